//! Fixed quadrature rules on triangles and intervals.

/// Quadrature point on a triangle: barycentric coordinates and a weight
/// normalized so the weights sum to one (multiply by the area).
#[derive(Clone, Copy, Debug)]
pub struct TriPoint {
    pub bary: [f64; 3],
    pub weight: f64,
}

const D4_A: f64 = 0.445_948_490_915_964_886_32;
const D4_WA: f64 = 0.223_381_589_678_011_465_70;
const D4_C: f64 = 0.091_576_213_509_770_743_46;
const D4_WC: f64 = 0.109_951_743_655_321_867_64;

/// Six-point rule exact for polynomials of degree 4.
pub fn triangle_order4() -> [TriPoint; 6] {
    let b = 1.0 - 2.0 * D4_A;
    let d = 1.0 - 2.0 * D4_C;
    [
        TriPoint { bary: [b, D4_A, D4_A], weight: D4_WA },
        TriPoint { bary: [D4_A, b, D4_A], weight: D4_WA },
        TriPoint { bary: [D4_A, D4_A, b], weight: D4_WA },
        TriPoint { bary: [d, D4_C, D4_C], weight: D4_WC },
        TriPoint { bary: [D4_C, d, D4_C], weight: D4_WC },
        TriPoint { bary: [D4_C, D4_C, d], weight: D4_WC },
    ]
}

/// Edge-midpoint rule, exact for degree 2.
pub fn triangle_order2() -> [TriPoint; 3] {
    [
        TriPoint { bary: [0.5, 0.5, 0.0], weight: 1.0 / 3.0 },
        TriPoint { bary: [0.0, 0.5, 0.5], weight: 1.0 / 3.0 },
        TriPoint { bary: [0.5, 0.0, 0.5], weight: 1.0 / 3.0 },
    ]
}

/// Maps barycentric coordinates to a physical point.
pub fn physical(v: &[[f64; 2]; 3], bary: [f64; 3]) -> [f64; 2] {
    [
        bary[0] * v[0][0] + bary[1] * v[1][0] + bary[2] * v[2][0],
        bary[0] * v[0][1] + bary[1] * v[1][1] + bary[2] * v[2][1],
    ]
}

/// Five-point Gauss-Legendre rule on [0, 1] (nodes, weights).
pub fn gauss_legendre5() -> [(f64, f64); 5] {
    const X: [f64; 5] = [
        -0.906_179_845_938_664,
        -0.538_469_310_105_683_1,
        0.0,
        0.538_469_310_105_683_1,
        0.906_179_845_938_664,
    ];
    const W: [f64; 5] = [
        0.236_926_885_056_189_1,
        0.478_628_670_499_366_5,
        0.568_888_888_888_888_9,
        0.478_628_670_499_366_5,
        0.236_926_885_056_189_1,
    ];
    let mut out = [(0.0, 0.0); 5];
    for i in 0..5 {
        out[i] = (0.5 * (X[i] + 1.0), 0.5 * W[i]);
    }
    out
}
