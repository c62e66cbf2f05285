//! Randomized invariants of the discretization building blocks.

use heatopt::controldisc::{project_admissible, Bounds, ControlFunction, ControlKind};
use heatopt::experiments::study::compute_eoc;
use heatopt::fem::{assemble, FemOperators};
use heatopt::mesh::{build_structured_mesh, build_time_grid, refine_uniform, Rect};
use heatopt::pde::solve_state;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn ops(n: usize, kind: &ControlKind, bounded: bool) -> FemOperators {
    let omega = vec![Rect::new(0.0, 0.5, 0.0, 0.75)];
    let mesh = build_structured_mesh(n, &omega).unwrap();
    assemble(&mesh, 0.1, &kind.spatial(bounded)).unwrap()
}

fn kind_strategy() -> impl Strategy<Value = (ControlKind, bool)> {
    prop_oneof![
        Just((ControlKind::Variational, false)),
        Just((ControlKind::Variational, true)),
        Just((ControlKind::PiecewiseConstant, true)),
        Just((ControlKind::PiecewiseLinear, true)),
        Just((ControlKind::Parameter(vec![Rect::new(0.0, 0.5, 0.0, 1.0), Rect::new(0.5, 1.0, 0.0, 0.5)]), true)),
    ]
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn b_and_bstar_are_adjoint(n in prop::sample::select(vec![4usize, 8, 12]), (kind, bounded) in kind_strategy(), seed in any::<u64>()) {
        let ops = ops(n, &kind, bounded);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let q: Vec<f64> = (0..ops.control.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let z: Vec<f64> = (0..ops.num_interior()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let lhs = ops.mass_inner(&ops.b_projected(&q).unwrap(), &z);
        let rhs = ops.control.mass.inner(&q, &ops.bstar_representer(&z).unwrap());
        prop_assert!(rel(lhs, rhs) <= 1e-11, "lhs={lhs} rhs={rhs}");
    }

    #[test]
    fn mass_entries_sum_to_domain_area(n in 1usize..24) {
        let mesh = build_structured_mesh(n, &[Rect::unit()]).unwrap();
        let ops = assemble(&mesh, 1.0, &ControlKind::Variational.spatial(false)).unwrap();
        prop_assert!((ops.m_full.sum() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn refinement_quadruples_triangles_and_keeps_area(n in 1usize..10) {
        let mesh = build_structured_mesh(n, &[Rect::unit()]).unwrap();
        let fine = refine_uniform(&mesh);
        prop_assert_eq!(fine.num_triangles(), 4 * mesh.num_triangles());
        let area: f64 = (0..fine.num_triangles()).map(|k| fine.area(k)).sum();
        prop_assert!((area - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn projection_is_idempotent_feasible_and_nonexpansive(
        a in prop::collection::vec(-10.0f64..10.0, 12),
        b in prop::collection::vec(-10.0f64..10.0, 12),
        lo in -5.0f64..0.0,
        width in 0.1f64..5.0,
    ) {
        let bounds = Bounds::new(lo, lo + width).unwrap();
        let qa = ControlFunction::from_values(3, 4, a).unwrap();
        let qb = ControlFunction::from_values(3, 4, b).unwrap();
        let pa = project_admissible(&qa, Some(bounds));
        let pb = project_admissible(&qb, Some(bounds));
        prop_assert_eq!(&project_admissible(&pa, Some(bounds)).values, &pa.values);
        for i in 0..pa.values.len() {
            prop_assert!(pa.values[i] >= bounds.lower && pa.values[i] <= bounds.upper);
            prop_assert!((pa.values[i] - pb.values[i]).abs() <= (qa.values[i] - qb.values[i]).abs());
        }
        prop_assert_eq!(&project_admissible(&qa, None).values, &qa.values);
    }

    #[test]
    fn eoc_recovers_power_laws(c in 1e-6f64..1e3, p in 0.5f64..4.0, ratio in prop::sample::select(vec![2.0f64, 3.0, 4.0])) {
        let errors: Vec<f64> = (0..5).map(|i| c * ratio.powf(-p * i as f64)).collect();
        for e in compute_eoc(&errors, ratio) {
            prop_assert!((e.unwrap() - p).abs() <= 1e-9);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 16, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn state_is_affine_in_control_and_initial_value(m in 1usize..6, nu in 0.2f64..3.0, s in -2.0f64..2.0) {
        let ops = ops(8, &ControlKind::PiecewiseConstant, true);
        let grid = build_time_grid(m).unwrap();
        let dim = ops.control.dim();
        let q1 = ControlFunction::from_values(m, dim, (0..m * dim).map(|i| ((i * 37) % 11) as f64 - 5.0).collect()).unwrap();
        let q2 = ControlFunction::from_values(m, dim, (0..m * dim).map(|i| ((i * 13) % 7) as f64 * 0.3).collect()).unwrap();
        let u0: Vec<f64> = (0..ops.num_interior()).map(|i| (i as f64 * 0.7).sin()).collect();
        let zero = vec![0.0; u0.len()];
        let mut q = q1.clone();
        q.axpy(s, &q2);
        let full = solve_state(&ops, &grid, nu, &q, &u0).unwrap();
        let a = solve_state(&ops, &grid, nu, &q1, &u0).unwrap();
        let b = solve_state(&ops, &grid, nu, &q2, &zero).unwrap();
        let scale = full.terminal().iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
        for (i, v) in full.terminal().iter().enumerate() {
            prop_assert!((v - a.terminal()[i] - s * b.terminal()[i]).abs() <= 1e-12 * scale);
        }
    }
}
