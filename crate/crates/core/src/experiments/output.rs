//! Artifact writers: atomic file output, CSV tables, and a small SVG
//! log-log chart for refinement studies.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::study::{Axis, StudyRow};
use super::sweep::SweepCell;
use super::{ExampleConfig, Run};
use crate::controldisc;
use crate::error::Result;
use crate::mesh::n_for_level;

/// Control CSVs with more values than this are replaced by per-interval
/// summaries.
pub const MAX_CONTROL_VALUES: usize = 2_000_000;

/// Writes `bytes` to a temporary sibling and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = path.with_file_name(format!(".{name}.tmp{}", std::process::id()));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| format!("{x:e}"))
}

pub fn study_csv(rows: &[StudyRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["level", "M", "N", "err_nu", "err_q", "err_u", "eoc_nu", "eoc_q", "eoc_u", "seconds"])?;
    for r in rows {
        w.write_record([
            r.level.to_string(),
            r.m.to_string(),
            r.nodes.to_string(),
            format!("{:e}", r.err_nu),
            format!("{:e}", r.err_q),
            format!("{:e}", r.err_u),
            fmt_opt(r.eoc_nu),
            fmt_opt(r.eoc_q),
            fmt_opt(r.eoc_u),
            format!("{:.3}", r.seconds),
        ])?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("csv output is utf-8"))
}

pub fn ssc_csv(cells: &[SweepCell]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["alpha", "M", "N", "gamma", "kappa_lower", "minres_iters", "residual", "inactive_frac"])?;
    for c in cells {
        let mut rec = vec![format!("{:e}", c.alpha), c.m.to_string(), c.nodes.to_string()];
        match &c.outcome {
            Ok(r) => rec.extend([
                format!("{:e}", r.gamma),
                fmt_opt(r.kappa_lower),
                r.minres_iterations.to_string(),
                format!("{:e}", r.residual),
                format!("{:e}", r.inactive_fraction),
            ]),
            Err(_) => rec.extend(std::iter::repeat(String::new()).take(5)),
        }
        w.write_record(&rec)?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("csv output is utf-8"))
}

/// Log-log chart of the three error series against the mesh size (h = 1/n
/// or k = 1/M) with slope-1 and slope-2 guide lines.
pub fn study_svg(rows: &[StudyRow], axis: Axis) -> String {
    let (w, h, pad) = (640.0, 480.0, 70.0);
    let xs: Vec<f64> = rows
        .iter()
        .map(|r| match axis {
            Axis::Space => 1.0 / n_for_level(r.level) as f64,
            Axis::Time => 1.0 / r.m as f64,
        })
        .collect();
    let series: [(&str, &str, Vec<f64>); 3] = [
        ("nu", "#1f77b4", rows.iter().map(|r| r.err_nu).collect()),
        ("q", "#d62728", rows.iter().map(|r| r.err_q).collect()),
        ("u(1)", "#2ca02c", rows.iter().map(|r| r.err_u).collect()),
    ];
    let positive = |v: &f64| *v > 0.0 && v.is_finite();
    let ys: Vec<f64> = series.iter().flat_map(|s| s.2.iter().copied().filter(positive)).collect();
    let lx: Vec<f64> = xs.iter().map(|x| x.log10()).collect();
    let (x0, x1) = (lx.iter().cloned().fold(f64::MAX, f64::min), lx.iter().cloned().fold(f64::MIN, f64::max));
    let (y0, y1) = if ys.is_empty() {
        (-1.0, 0.0)
    } else {
        (ys.iter().map(|y| y.log10()).fold(f64::MAX, f64::min).floor(), ys.iter().map(|y| y.log10()).fold(f64::MIN, f64::max).ceil())
    };
    let (x0, x1) = if x1 > x0 { (x0 - 0.1, x1 + 0.1) } else { (x0 - 1.0, x0 + 1.0) };
    let (y0, y1) = if y1 > y0 { (y0, y1) } else { (y0 - 1.0, y0 + 1.0) };
    let px = |lx: f64| pad + (lx - x0) / (x1 - x0) * (w - 2.0 * pad);
    let py = |ly: f64| h - pad - (ly - y0) / (y1 - y0) * (h - 2.0 * pad);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect x="{pad}" y="{pad}" width="{}" height="{}" fill="none" stroke="black"/>"#, w - 2.0 * pad, h - 2.0 * pad);
    for d in (y0 as i32)..=(y1 as i32) {
        let y = py(d as f64);
        let _ = writeln!(s, r##"<line x1="{pad}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#ddd"/>"##, w - pad);
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">1e{d}</text>"#, pad - 6.0, y + 4.0);
    }
    for (x, lxv) in xs.iter().zip(&lx) {
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{x:.2e}</text>"#, px(*lxv), h - pad + 18.0);
    }
    let label = match axis {
        Axis::Space => "h",
        Axis::Time => "k",
    };
    let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{label}</text>"#, w / 2.0, h - 20.0);
    // guide lines through the finest error of the control series
    if let Some((i, e)) = series[1].2.iter().enumerate().filter(|(_, e)| positive(e)).last() {
        for (slope, dash) in [(1.0, "6,4"), (2.0, "2,3")] {
            let (ax, ay) = (lx[i], e.log10());
            let (bx, by) = (x1, ay + slope * (x1 - ax));
            let (cx, cy) = (x0, ay + slope * (x0 - ax));
            let _ = writeln!(
                s,
                r#"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="gray" stroke-dasharray="{dash}"/>"#,
                px(cx),
                py(cy),
                px(bx),
                py(by)
            );
        }
    }
    let _ = writeln!(s, r#"<clipPath id="plot"><rect x="{pad}" y="{pad}" width="{}" height="{}"/></clipPath>"#, w - 2.0 * pad, h - 2.0 * pad);
    for (k, (name, color, vals)) in series.iter().enumerate() {
        let pts: Vec<String> = lx.iter().zip(vals).filter(|(_, v)| positive(v)).map(|(x, v)| format!("{:.1},{:.1}", px(*x), py(v.log10()))).collect();
        if !pts.is_empty() {
            let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#, pts.join(" "));
            for p in &pts {
                let (a, b) = p.split_once(',').expect("formatted pair");
                let _ = writeln!(s, r#"<circle cx="{a}" cy="{b}" r="3" fill="{color}"/>"#);
            }
        }
        let ly = pad + 16.0 + 16.0 * k as f64;
        let _ = writeln!(s, r#"<text x="{:.1}" y="{ly:.1}" fill="{color}">error {name}</text>"#, pad + 10.0);
    }
    let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" fill="gray">dashed: slope 1, dotted: slope 2</text>"#, pad + 10.0, pad + 64.0);
    s.push_str("</svg>\n");
    s
}

/// report.csv, history.csv, control.csv and solve.log for one run.
pub fn write_run_artifacts(dir: &Path, cfg: &ExampleConfig, run: &Run) -> Result<()> {
    let r = &run.report;
    let p = &run.problem;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["key", "value"])?;
    let fields: Vec<(&str, String)> = vec![
        ("example", cfg.name.clone()),
        ("control", cfg.control.name().to_string()),
        ("alpha", format!("{:e}", p.alpha)),
        ("M", p.intervals().to_string()),
        ("level", run.level.to_string()),
        ("N", p.ops.mesh.num_nodes().to_string()),
        ("nu", format!("{:e}", r.nu)),
        ("mu", format!("{:e}", r.mu)),
        ("rho", format!("{:e}", r.rho)),
        ("g", format!("{:e}", r.g)),
        ("j", format!("{:e}", r.j)),
        ("stationarity", format!("{:e}", r.stationarity)),
        ("hamiltonian_residual", format!("{:e}", r.hamiltonian_residual)),
        ("projection_residual", format!("{:e}", r.projection_residual)),
        ("multiplier_identity", format!("{:e}", r.multiplier_identity)),
        ("outer_iterations", r.outer_iterations.to_string()),
        ("newton_iterations", r.newton_iterations.to_string()),
        ("cg_iterations", r.cg_iterations.to_string()),
        ("converged", r.converged.to_string()),
        ("tr_initial_radius", format!("{:e}", r.trust_region.initial_radius)),
        ("tr_accept_ratio", format!("{:e}", r.trust_region.accept_ratio)),
        ("tr_shrink", format!("{:e}", r.trust_region.shrink)),
        ("tr_expand", format!("{:e}", r.trust_region.expand)),
        ("seconds", format!("{:.3}", r.seconds)),
    ];
    for (k, v) in &fields {
        w.write_record([*k, v.as_str()])?;
    }
    write_atomic(&dir.join("report.csv"), &w.into_inner().map_err(|e| e.into_error())?)?;

    let mut h = csv::Writer::from_writer(Vec::new());
    for rec in &r.history {
        h.serialize(rec)?;
    }
    write_atomic(&dir.join("history.csv"), &h.into_inner().map_err(|e| e.into_error())?)?;

    let mut buf = Vec::new();
    if run.iterate.q.len() <= MAX_CONTROL_VALUES {
        controldisc::write_csv(&mut buf, &p.grid, &run.iterate.q)?;
    } else {
        let mut c = csv::Writer::from_writer(&mut buf);
        c.write_record(["t_start", "t_end", "min", "max", "l2_norm"])?;
        for m in 0..p.intervals() {
            let b = run.iterate.q.block(m);
            let min = b.iter().cloned().fold(f64::MAX, f64::min);
            let max = b.iter().cloned().fold(f64::MIN, f64::max);
            let l2 = p.ops.control.mass.inner(b, b).sqrt();
            c.write_record([
                format!("{}", p.grid.breakpoints[m]),
                format!("{}", p.grid.breakpoints[m + 1]),
                format!("{min:e}"),
                format!("{max:e}"),
                format!("{l2:e}"),
            ])?;
        }
        c.flush()?;
    }
    write_atomic(&dir.join("control.csv"), &buf)?;

    let mut log = String::new();
    for rec in &r.history {
        let _ = writeln!(
            log,
            "outer={} nu={:.12} g={:.3e} mu={:.6e} rho={:.1e} newton={} cg={} stationarity={:.3e}",
            rec.iteration, rec.nu, rec.g, rec.mu, rec.rho, rec.newton_iterations, rec.cg_iterations, rec.stationarity
        );
    }
    let _ = writeln!(log, "converged={} nu={:.12} |g|={:.3e} seconds={:.3}", r.converged, r.nu, r.g.abs(), r.seconds);
    write_atomic(&dir.join("solve.log"), log.as_bytes())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows() -> Vec<StudyRow> {
        (0..3)
            .map(|i| StudyRow {
                level: i + 1,
                m: 16,
                nodes: 0,
                nu: 0.7,
                err_nu: 0.25f64.powi(i as i32),
                err_q: 0.5f64.powi(i as i32),
                err_u: 0.0,
                eoc_nu: (i > 0).then_some(2.0),
                eoc_q: (i > 0).then_some(1.0),
                eoc_u: None,
                g: 0.0,
                seconds: 0.0,
            })
            .collect()
    }

    #[test]
    fn study_csv_has_fixed_header_and_blank_missing_eoc() {
        let csv = study_csv(&rows()).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "level,M,N,err_nu,err_q,err_u,eoc_nu,eoc_q,eoc_u,seconds");
        assert_eq!(lines.next().unwrap(), "1,16,0,1e0,1e0,0e0,,,,0.000");
    }

    #[test]
    fn svg_contains_series_and_guides() {
        let svg = study_svg(&rows(), Axis::Space);
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("stroke-dasharray=\"6,4\"") && svg.contains("stroke-dasharray=\"2,3\""));
    }

    #[test]
    fn atomic_write_replaces_content() {
        let dir = std::env::temp_dir().join(format!("heatopt-out-{}", std::process::id()));
        let path = dir.join("sub").join("a.txt");
        write_atomic(&path, b"one").unwrap();
        write_atomic(&path, b"two").unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "two");
        assert_eq!(fs::read_dir(path.parent().unwrap()).unwrap().count(), 1);
        fs::remove_dir_all(dir).unwrap();
    }
}
