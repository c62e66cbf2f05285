//! Run configuration: a flat `key = value` file with `[section]` headers,
//! overridden by command-line flags.
//!
//! Grammar (one item per line, `#` starts a comment):
//!
//! ```text
//! [section]
//! key = value
//! ```
//!
//! Keys are looked up as `section.key`; keys before the first header have no
//! prefix. Recognized keys are listed in [`KNOWN_KEYS`].

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use heatopt::controldisc::ControlKind;
use heatopt::experiments::{Axis, ExampleConfig};
use heatopt::optimizer::SolverOptions;
use heatopt::{Error, Result};

pub const KNOWN_KEYS: &[&str] = &[
    "problem.example",
    "problem.control",
    "problem.alpha",
    "grid.M",
    "grid.level",
    "study.axis",
    "study.levels",
    "study.start",
    "ssc.alphas",
    "ssc.grids",
    "solver.tol_g",
    "solver.tol_s",
    "solver.max_outer",
    "solver.max_newton",
    "output.dir",
];

/// Parses the file format above into `section.key → value`.
pub fn parse(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    let mut section = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| Error::Config(format!("line {}: unterminated section header", i + 1)))?;
            section = name.trim().to_string();
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
        let key = if section.is_empty() { k.trim().to_string() } else { format!("{section}.{}", k.trim()) };
        if !KNOWN_KEYS.contains(&key.as_str()) {
            return Err(Error::Config(format!("line {}: unknown key '{key}'", i + 1)));
        }
        out.insert(key, v.trim().to_string());
    }
    Ok(out)
}

pub fn load(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse(&text)
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim().parse().map_err(|_| Error::Config(format!("{key}: cannot parse '{v}'")))
}

pub fn list<T: std::str::FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',').filter(|s| !s.trim().is_empty()).map(|s| num(key, s)).collect()
}

/// `M:level` pairs, comma separated.
pub fn grids(key: &str, v: &str) -> Result<Vec<(usize, usize)>> {
    v.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            let (m, l) = s.split_once(':').ok_or_else(|| Error::Config(format!("{key}: expected M:level, got '{s}'")))?;
            Ok((num(key, m)?, num(key, l)?))
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Subcommand {
    Solve,
    Study,
    Ssc,
    SelfCheck,
}

impl Subcommand {
    pub fn name(self) -> &'static str {
        match self {
            Subcommand::Solve => "solve",
            Subcommand::Study => "study",
            Subcommand::Ssc => "ssc",
            Subcommand::SelfCheck => "selfcheck",
        }
    }
}

/// Fully resolved settings for one invocation.
#[derive(Clone, Debug)]
pub struct CliConfig {
    pub subcommand: Subcommand,
    pub example: ExampleConfig,
    pub m: usize,
    pub level: usize,
    pub axis: Axis,
    /// study discretizations (levels for space, M values for time)
    pub values: Vec<usize>,
    pub alphas: Vec<f64>,
    pub grids: Vec<(usize, usize)>,
    pub solver: SolverOptions,
    pub out: PathBuf,
    pub self_check: bool,
}

pub fn control_kind(name: &str, example: &ExampleConfig) -> Result<ControlKind> {
    let forms = matches!(example.control, ControlKind::Parameter(_));
    let kind = match name {
        "variational" => ControlKind::Variational,
        "cellwise-constant" | "cells" => ControlKind::PiecewiseConstant,
        "cellwise-linear" | "nodes" => ControlKind::PiecewiseLinear,
        "parameter" if forms => example.control.clone(),
        "parameter" => return Err(Error::Config(format!("{} has no form functions", example.name))),
        other => {
            return Err(Error::Config(format!(
                "unknown control '{other}' (expected variational, cellwise-constant, cellwise-linear or parameter)"
            )))
        }
    };
    if forms && !matches!(kind, ControlKind::Parameter(_)) {
        return Err(Error::Config(format!("{} only supports parameter controls", example.name)));
    }
    Ok(kind)
}

/// Values for a study given `--levels`: either an explicit list or a count
/// starting at `start` (spatial level, or M doubling from `start`).
pub fn study_values(axis: Axis, levels: &str, start: Option<usize>) -> Result<Vec<usize>> {
    let parsed: Vec<usize> = list("study.levels", levels)?;
    let values = if parsed.len() == 1 {
        let count = parsed[0];
        match axis {
            Axis::Space => {
                let s = start.unwrap_or(2);
                (s..s + count).collect()
            }
            Axis::Time => {
                let s = start.unwrap_or(16);
                (0..count).map(|i| s << i).collect()
            }
        }
    } else {
        parsed
    };
    if values.len() < 3 {
        return Err(Error::Config(format!("a study needs at least three discretizations for EOCs, got {}", values.len())));
    }
    Ok(values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_and_comments() {
        let text = "# run\n[problem]\nexample = example2  # inline\nalpha=0.1\n\n[grid]\nM = 40\n";
        let map = parse(text).unwrap();
        assert_eq!(map["problem.example"], "example2");
        assert_eq!(map["problem.alpha"], "0.1");
        assert_eq!(map["grid.M"], "40");
    }

    #[test]
    fn rejects_bad_lines() {
        assert!(matches!(parse("[grid]\nfoo = 1"), Err(Error::Config(_))));
        assert!(parse("[grid\nM = 1").is_err());
        assert!(parse("[grid]\nM 1").is_err());
    }

    #[test]
    fn study_values_from_count_or_list() {
        assert_eq!(study_values(Axis::Space, "4", None).unwrap(), vec![2, 3, 4, 5]);
        assert_eq!(study_values(Axis::Time, "3", Some(8)).unwrap(), vec![8, 16, 32]);
        assert_eq!(study_values(Axis::Space, "1,2,3", None).unwrap(), vec![1, 2, 3]);
        assert!(study_values(Axis::Space, "2", None).is_err());
    }

    #[test]
    fn grid_pairs() {
        assert_eq!(grids("ssc.grids", "160:3, 320:3").unwrap(), vec![(160, 3), (320, 3)]);
        assert!(grids("ssc.grids", "160").is_err());
    }

    #[test]
    fn control_compatibility() {
        let ex2 = ExampleConfig::example2();
        assert!(control_kind("cells", &ex2).is_err());
        assert!(matches!(control_kind("parameter", &ex2).unwrap(), ControlKind::Parameter(_)));
        let ex3 = ExampleConfig::example3();
        assert!(control_kind("parameter", &ex3).is_err());
        assert_eq!(control_kind("nodes", &ex3).unwrap(), ControlKind::PiecewiseLinear);
    }
}
