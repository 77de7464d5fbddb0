//! Experiment configuration in a flat `key = value` grammar.
//!
//! Lines starting with `#` (after optional whitespace) are comments, as is
//! everything after a `#` on a line. Lists are comma-separated. Numbers may
//! be written as powers of two, e.g. `2^-3.5`. Unknown keys are rejected and
//! every problem is reported with its line number.
//!
//! | key | default | meaning |
//! |-----|---------|---------|
//! | `name` | `experiment` | base name of output files |
//! | `kind` | `convergence` | `convergence`, `noise`, `adaptive`, `solve` |
//! | `dimension` | `3` | space-time dimension `d` (2, 3, 4) |
//! | `target` | `smooth` | `smooth`, `hat`, `cube`, `noisy` |
//! | `delta` | `0.125` | noise level of the `noisy` target for `solve` |
//! | `levels` | `4, 8, 16` | cells per axis per convergence level |
//! | `deltas` | (none) | noise levels for `noise` studies |
//! | `cells` | `8` | cells per axis for `solve` |
//! | `coupling` | `rho_eq_h2` | `rho_eq_h2` or `fixed` |
//! | `rho` | (none) | regularization for `fixed` coupling, `solve`, `adaptive` |
//! | `method` | `saddle_gmres_ilu0` | or `schur_cg` |
//! | `tol` | `1e-8` | preconditioned residual reduction |
//! | `restart` | `100` | GMRES restart length |
//! | `max_iter` | `10000` | iteration limit |
//! | `true_residual_tol` | `1e-6` | target for the unpreconditioned residual |
//! | `inner_tol` | `1e-10` | inner CG tolerance (Schur path) |
//! | `load_smooth_order` | `3` | load rule order, smooth targets |
//! | `load_depth` | `4` | load subdivision depth, rough targets |
//! | `load_order` | `2` | load base order, rough targets |
//! | `error_depth` | `6` | error subdivision depth, discontinuous targets |
//! | `error_kink_depth` | `4` | error subdivision depth, continuous kinks |
//! | `error_order` | `2` | error base order on subdivided elements |
//! | `theta` | `0.5` | Dörfler parameter |
//! | `max_dofs` | `100000` | adaptive budget |
//! | `max_levels` | `200` | adaptive level limit |
//! | `initial_cells` | `4` | adaptive initial Kuhn mesh |
//! | `estimator_depth` | `4` | indicator subdivision depth |
//! | `audit` | `true` | audit every mesh |
//! | `output_dir` | `results` | output directory |
//! | `formats` | `csv, json` | any of `csv`, `json`, `gnuplot`, `vtk` |
//! | `threads` | `0` | worker threads, `0` for all cores |

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use serde::Serialize;

use crate::adaptivity::AdaptConfig;
use crate::analysis::{noise_level_cells, Coupling, ErrorQuadrature, StudyConfig};
use crate::assembly::LoadQuadrature;
use crate::error::{ConfigIssue, Error, Result};
use crate::ocp::{SolveMethod, SolverOptions};
use crate::quadrature;
use crate::targets::TargetSpec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StudyKind {
    Convergence,
    Noise,
    Adaptive,
    Solve,
}

impl StudyKind {
    fn as_str(self) -> &'static str {
        match self {
            StudyKind::Convergence => "convergence",
            StudyKind::Noise => "noise",
            StudyKind::Adaptive => "adaptive",
            StudyKind::Solve => "solve",
        }
    }
}

impl FromStr for StudyKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "convergence" => Ok(StudyKind::Convergence),
            "noise" => Ok(StudyKind::Noise),
            "adaptive" => Ok(StudyKind::Adaptive),
            "solve" => Ok(StudyKind::Solve),
            _ => Err(format!("unknown study kind '{s}'")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Json,
    Gnuplot,
    Vtk,
}

impl OutputFormat {
    pub fn as_str(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
            OutputFormat::Gnuplot => "gnuplot",
            OutputFormat::Vtk => "vtk",
        }
    }
}

impl FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            "gnuplot" => Ok(OutputFormat::Gnuplot),
            "vtk" => Ok(OutputFormat::Vtk),
            _ => Err(format!("unknown output format '{s}'")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub kind: StudyKind,
    pub dimension: usize,
    pub target: String,
    pub delta: f64,
    pub levels: Vec<usize>,
    pub deltas: Vec<f64>,
    pub cells: usize,
    pub coupling_fixed: bool,
    pub rho: Option<f64>,
    pub solver: SolverOptions,
    pub load: LoadQuadrature,
    pub error: ErrorQuadrature,
    pub theta: f64,
    pub max_dofs: usize,
    pub max_levels: usize,
    pub initial_cells: usize,
    pub estimator_depth: usize,
    pub audit: bool,
    pub output_dir: PathBuf,
    pub formats: Vec<OutputFormat>,
    pub threads: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            name: "experiment".into(),
            kind: StudyKind::Convergence,
            dimension: 3,
            target: "smooth".into(),
            delta: 0.125,
            levels: vec![4, 8, 16],
            deltas: Vec::new(),
            cells: 8,
            coupling_fixed: false,
            rho: None,
            solver: SolverOptions::default(),
            load: LoadQuadrature::default(),
            error: ErrorQuadrature::default(),
            theta: 0.5,
            max_dofs: 100_000,
            max_levels: 200,
            initial_cells: 4,
            estimator_depth: 4,
            audit: true,
            output_dir: PathBuf::from("results"),
            formats: vec![OutputFormat::Csv, OutputFormat::Json],
            threads: 0,
        }
    }
}

/// Parses a real number, also accepting `b^e` (e.g. `2^-3.5`).
fn parse_real(s: &str) -> std::result::Result<f64, String> {
    let v = match s.split_once('^') {
        Some((b, e)) => {
            let b: f64 = b.trim().parse().map_err(|_| format!("'{s}' is not a number"))?;
            let e: f64 = e.trim().parse().map_err(|_| format!("'{s}' is not a number"))?;
            b.powf(e)
        }
        None => s.parse().map_err(|_| format!("'{s}' is not a number"))?,
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("'{s}' is not a finite number"))
    }
}

fn parse_uint(s: &str) -> std::result::Result<usize, String> {
    s.parse().map_err(|_| format!("'{s}' is not a nonnegative integer"))
}

fn parse_bool(s: &str) -> std::result::Result<bool, String> {
    match s {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(format!("'{s}' is not a boolean")),
    }
}

fn parse_list<T>(s: &str, f: impl Fn(&str) -> std::result::Result<T, String>) -> std::result::Result<Vec<T>, String> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(',').map(|p| f(p.trim())).collect()
}

const KEYS: &[&str] = &[
    "name", "kind", "dimension", "target", "delta", "levels", "deltas", "cells", "coupling", "rho",
    "method", "tol", "restart", "max_iter", "true_residual_tol", "inner_tol", "load_smooth_order",
    "load_depth", "load_order", "error_depth", "error_kink_depth", "error_order", "theta",
    "max_dofs", "max_levels", "initial_cells", "estimator_depth", "audit", "output_dir", "formats",
    "threads",
];

/// Parses and validates a configuration. All problems are collected.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::default();
    let mut issues = Vec::new();
    let mut seen: Vec<(&str, usize)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            issues.push(ConfigIssue { line, message: format!("expected 'key = value', got '{content}'") });
            continue;
        };
        let (key, value) = (key.trim(), value.trim());
        let Some(&key) = KEYS.iter().find(|&&k| k == key) else {
            issues.push(ConfigIssue { line, message: format!("unknown key '{key}'") });
            continue;
        };
        if let Some(&(_, first)) = seen.iter().find(|(k, _)| *k == key) {
            issues.push(ConfigIssue { line, message: format!("duplicate key '{key}' (first set on line {first})") });
            continue;
        }
        seen.push((key, line));
        if let Err(message) = apply(&mut cfg, key, value) {
            issues.push(ConfigIssue { line, message: format!("{key}: {message}") });
        }
    }
    validate(&cfg, &seen, &mut issues);
    if issues.is_empty() {
        Ok(cfg)
    } else {
        issues.sort_by_key(|i| i.line);
        Err(Error::Config(issues))
    }
}

fn apply(cfg: &mut ExperimentConfig, key: &str, v: &str) -> std::result::Result<(), String> {
    match key {
        "name" => {
            if v.is_empty() || v.contains(['/', '\\']) {
                return Err("must be a non-empty file name".into());
            }
            cfg.name = v.to_string();
        }
        "kind" => cfg.kind = v.parse()?,
        "dimension" => cfg.dimension = parse_uint(v)?,
        "target" => cfg.target = v.to_string(),
        "delta" => cfg.delta = parse_real(v)?,
        "levels" => cfg.levels = parse_list(v, parse_uint)?,
        "deltas" => cfg.deltas = parse_list(v, parse_real)?,
        "cells" => cfg.cells = parse_uint(v)?,
        "coupling" => {
            cfg.coupling_fixed = match v {
                "rho_eq_h2" => false,
                "fixed" => true,
                _ => return Err(format!("expected 'rho_eq_h2' or 'fixed', got '{v}'")),
            }
        }
        "rho" => cfg.rho = Some(parse_real(v)?),
        "method" => cfg.solver.method = v.parse::<SolveMethod>().map_err(|e| e.to_string())?,
        "tol" => cfg.solver.tol = parse_real(v)?,
        "restart" => cfg.solver.restart = parse_uint(v)?,
        "max_iter" => cfg.solver.max_iter = parse_uint(v)?,
        "true_residual_tol" => cfg.solver.true_residual_tol = parse_real(v)?,
        "inner_tol" => cfg.solver.inner_tol = parse_real(v)?,
        "load_smooth_order" => cfg.load.smooth_order = parse_uint(v)?,
        "load_depth" => cfg.load.rough_depth = parse_uint(v)?,
        "load_order" => cfg.load.rough_order = parse_uint(v)?,
        "error_depth" => cfg.error.rough_depth = parse_uint(v)?,
        "error_kink_depth" => cfg.error.kink_depth = parse_uint(v)?,
        "error_order" => cfg.error.rough_order = parse_uint(v)?,
        "theta" => cfg.theta = parse_real(v)?,
        "max_dofs" => cfg.max_dofs = parse_uint(v)?,
        "max_levels" => cfg.max_levels = parse_uint(v)?,
        "initial_cells" => cfg.initial_cells = parse_uint(v)?,
        "estimator_depth" => cfg.estimator_depth = parse_uint(v)?,
        "audit" => cfg.audit = parse_bool(v)?,
        "output_dir" => {
            if v.is_empty() {
                return Err("must not be empty".into());
            }
            cfg.output_dir = PathBuf::from(v);
        }
        "formats" => {
            let mut f = parse_list(v, |s| s.parse::<OutputFormat>())?;
            f.sort();
            f.dedup();
            cfg.formats = f;
        }
        "threads" => cfg.threads = parse_uint(v)?,
        _ => unreachable!("key list checked"),
    }
    Ok(())
}

fn validate(cfg: &ExperimentConfig, seen: &[(&str, usize)], issues: &mut Vec<ConfigIssue>) {
    let line = |key: &str| seen.iter().find(|(k, _)| *k == key).map_or(0, |&(_, l)| l);
    let mut bad = |key: &str, message: String| {
        issues.push(ConfigIssue { line: line(key), message: format!("{key}: {message}") })
    };
    if !(2..=4).contains(&cfg.dimension) {
        bad("dimension", format!("must be 2, 3 or 4, got {}", cfg.dimension));
    } else {
        let delta = (cfg.target == "noisy" || cfg.target == "noisy_indicator").then_some(cfg.delta);
        if let Err(e) = TargetSpec::by_name(&cfg.target, cfg.dimension, delta) {
            bad("target", e.to_string());
        }
        for (name, order, dim) in [
            ("load_smooth_order", cfg.load.smooth_order, cfg.dimension),
            ("load_order", cfg.load.rough_order, cfg.dimension),
            ("error_order", cfg.error.rough_order, cfg.dimension),
        ] {
            if quadrature::rule(dim, order).is_err() {
                bad(name, format!("no rule of order {order} in dimension {dim}"));
            }
        }
    }
    if let Some(rho) = cfg.rho {
        if !(rho > 0.0) {
            bad("rho", format!("must be positive, got {rho}"));
        }
    }
    if cfg.coupling_fixed && cfg.rho.is_none() {
        bad("coupling", "fixed coupling requires 'rho'".into());
    }
    if !(cfg.delta >= 0.0) {
        bad("delta", format!("must be nonnegative, got {}", cfg.delta));
    }
    match cfg.kind {
        StudyKind::Convergence => {
            if cfg.levels.is_empty() {
                bad("levels", "at least one level is required".into());
            }
        }
        StudyKind::Noise => {
            if cfg.deltas.is_empty() {
                bad("deltas", "noise studies need at least one delta".into());
            }
            if cfg.dimension != 3 {
                bad("dimension", "noise studies are defined for dimension 3".into());
            }
        }
        StudyKind::Adaptive | StudyKind::Solve => {}
    }
    if cfg.levels.contains(&0) {
        bad("levels", "cells per axis must be positive".into());
    }
    for &d in &cfg.deltas {
        if let Err(e) = noise_level_cells(d) {
            bad("deltas", e.to_string());
        }
    }
    for (key, v) in [("cells", cfg.cells), ("initial_cells", cfg.initial_cells), ("restart", cfg.solver.restart), ("max_iter", cfg.solver.max_iter), ("max_levels", cfg.max_levels)] {
        if v == 0 {
            bad(key, "must be positive".into());
        }
    }
    for (key, v) in [("tol", cfg.solver.tol), ("true_residual_tol", cfg.solver.true_residual_tol), ("inner_tol", cfg.solver.inner_tol)] {
        if !(v > 0.0 && v < 1.0) {
            bad(key, format!("must lie in (0, 1), got {v}"));
        }
    }
    if !(cfg.theta > 0.0 && cfg.theta <= 1.0) {
        bad("theta", format!("must lie in (0, 1], got {}", cfg.theta));
    }
    for (key, v) in [("load_depth", cfg.load.rough_depth), ("error_depth", cfg.error.rough_depth), ("error_kink_depth", cfg.error.kink_depth), ("estimator_depth", cfg.estimator_depth)] {
        if v > 8 {
            bad(key, format!("subdivision depth {v} exceeds the limit 8"));
        }
    }
}

fn fmt_real(v: f64) -> String {
    format!("{v:?}")
}

impl ExperimentConfig {
    /// Writes every key; parsing the result gives back an equal config.
    pub fn serialize(&self) -> String {
        let mut s = String::new();
        let list = |v: &[String]| v.join(", ");
        let _ = writeln!(s, "name = {}", self.name);
        let _ = writeln!(s, "kind = {}", self.kind.as_str());
        let _ = writeln!(s, "dimension = {}", self.dimension);
        let _ = writeln!(s, "target = {}", self.target);
        let _ = writeln!(s, "delta = {}", fmt_real(self.delta));
        let _ = writeln!(s, "levels = {}", list(&self.levels.iter().map(|v| v.to_string()).collect::<Vec<_>>()));
        let _ = writeln!(s, "deltas = {}", list(&self.deltas.iter().map(|&v| fmt_real(v)).collect::<Vec<_>>()));
        let _ = writeln!(s, "cells = {}", self.cells);
        let _ = writeln!(s, "coupling = {}", if self.coupling_fixed { "fixed" } else { "rho_eq_h2" });
        if let Some(rho) = self.rho {
            let _ = writeln!(s, "rho = {}", fmt_real(rho));
        }
        let _ = writeln!(s, "method = {}", self.solver.method);
        let _ = writeln!(s, "tol = {}", fmt_real(self.solver.tol));
        let _ = writeln!(s, "restart = {}", self.solver.restart);
        let _ = writeln!(s, "max_iter = {}", self.solver.max_iter);
        let _ = writeln!(s, "true_residual_tol = {}", fmt_real(self.solver.true_residual_tol));
        let _ = writeln!(s, "inner_tol = {}", fmt_real(self.solver.inner_tol));
        let _ = writeln!(s, "load_smooth_order = {}", self.load.smooth_order);
        let _ = writeln!(s, "load_depth = {}", self.load.rough_depth);
        let _ = writeln!(s, "load_order = {}", self.load.rough_order);
        let _ = writeln!(s, "error_depth = {}", self.error.rough_depth);
        let _ = writeln!(s, "error_kink_depth = {}", self.error.kink_depth);
        let _ = writeln!(s, "error_order = {}", self.error.rough_order);
        let _ = writeln!(s, "theta = {}", fmt_real(self.theta));
        let _ = writeln!(s, "max_dofs = {}", self.max_dofs);
        let _ = writeln!(s, "max_levels = {}", self.max_levels);
        let _ = writeln!(s, "initial_cells = {}", self.initial_cells);
        let _ = writeln!(s, "estimator_depth = {}", self.estimator_depth);
        let _ = writeln!(s, "audit = {}", self.audit);
        let _ = writeln!(s, "output_dir = {}", self.output_dir.display());
        let _ = writeln!(s, "formats = {}", list(&self.formats.iter().map(|f| f.as_str().to_string()).collect::<Vec<_>>()));
        let _ = writeln!(s, "threads = {}", self.threads);
        s
    }

    fn coupling(&self) -> Coupling {
        match (self.coupling_fixed, self.rho) {
            (true, Some(r)) => Coupling::FixedRho(r),
            _ => Coupling::RhoEqH2,
        }
    }

    pub fn target_spec(&self) -> Result<TargetSpec> {
        let delta = matches!(self.target.as_str(), "noisy" | "noisy_indicator").then_some(self.delta);
        TargetSpec::by_name(&self.target, self.dimension, delta)
    }

    pub fn study_config(&self) -> StudyConfig {
        let mut s = StudyConfig::new(self.dimension, &self.target, self.levels.clone());
        if self.kind == StudyKind::Noise {
            s = StudyConfig::noise(self.deltas.clone());
        }
        s.coupling = self.coupling();
        s.solver = self.solver;
        s.load_quadrature = self.load;
        s.error_quadrature = self.error;
        s.audit = self.audit;
        s
    }

    pub fn adapt_config(&self) -> AdaptConfig {
        let mut a = AdaptConfig::new(self.dimension, &self.target, self.max_dofs);
        a.initial_cells = self.initial_cells;
        a.theta = self.theta;
        a.max_levels = self.max_levels;
        a.rho = self.rho;
        a.estimator_depth = self.estimator_depth;
        a.solver = self.solver;
        a.load_quadrature = self.load;
        a.error_quadrature = self.error;
        a.audit = self.audit;
        a
    }

    /// `rho` for a single solve on the `cells` mesh.
    pub fn solve_rho(&self) -> f64 {
        self.rho.unwrap_or_else(|| (1.0 / self.cells as f64).powi(2))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn minimal_config_uses_defaults() {
        let cfg = parse_config("dimension = 3\ntarget = hat\nlevels = 4, 8\n").unwrap();
        assert_eq!(cfg.levels, vec![4, 8]);
        assert_eq!(cfg.solver, SolverOptions::default());
        assert_eq!(cfg.formats, vec![OutputFormat::Csv, OutputFormat::Json]);
        assert_eq!(cfg.kind, StudyKind::Convergence);
    }

    #[test]
    fn comments_and_powers() {
        let cfg = parse_config("# noise\nkind = noise # inline\ndeltas = 2^-3, 2^-3.5\n").unwrap();
        assert_eq!(cfg.deltas[0], 0.125);
        assert_eq!(noise_level_cells(cfg.deltas[1]).unwrap(), 8);
    }

    #[test]
    fn negative_rho_names_the_line() {
        let err = parse_config("dimension = 3\nrho = -1\n").unwrap_err();
        match err {
            Error::Config(issues) => {
                assert_eq!(issues.len(), 1);
                assert_eq!(issues[0].line, 2);
                assert!(issues[0].message.contains("rho"));
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn all_errors_reported_together() {
        let text = "dimension = five\nbogus = 1\ntol = 2\nlevels 4\nformats = csv, png\ndimension = 3\n";
        let Error::Config(issues) = parse_config(text).unwrap_err() else { panic!() };
        let lines: Vec<usize> = issues.iter().map(|i| i.line).collect();
        assert_eq!(lines, vec![1, 2, 3, 4, 5, 6], "{issues:?}");
        let msg = Error::Config(issues).to_string();
        assert!(msg.contains("line 2: unknown key 'bogus'"));
    }

    #[test]
    fn constraint_errors() {
        for text in [
            "dimension = 5",
            "kind = noise",
            "kind = noise\ndeltas = 0.1",
            "target = noisy\ndimension = 2",
            "theta = 0",
            "coupling = fixed",
            "levels = 0, 4",
            "dimension = 4\nerror_order = 4",
        ] {
            assert!(parse_config(text).is_err(), "{text}");
        }
    }

    fn arb_config() -> impl Strategy<Value = ExperimentConfig> {
        (
            prop_oneof![Just(StudyKind::Convergence), Just(StudyKind::Adaptive), Just(StudyKind::Solve)],
            2usize..=4,
            prop_oneof![Just("smooth"), Just("hat"), Just("cube")],
            proptest::collection::vec(1usize..70, 1..6),
            proptest::option::of(1e-9f64..10.0),
            1e-14f64..0.5,
            1usize..300,
            0.01f64..1.0,
            any::<bool>(),
            proptest::collection::vec(prop_oneof![Just(OutputFormat::Csv), Just(OutputFormat::Json), Just(OutputFormat::Gnuplot), Just(OutputFormat::Vtk)], 0..4),
            0usize..=8,
        )
            .prop_map(|(kind, dimension, target, levels, rho, tol, restart, theta, audit, mut formats, depth)| {
                formats.sort();
                formats.dedup();
                ExperimentConfig {
                    kind,
                    dimension,
                    target: target.to_string(),
                    levels,
                    coupling_fixed: rho.is_some(),
                    rho,
                    solver: SolverOptions { tol, restart, ..Default::default() },
                    theta,
                    audit,
                    formats,
                    error: ErrorQuadrature { rough_depth: depth, ..Default::default() },
                    ..Default::default()
                }
            })
    }

    proptest! {
        #[test]
        fn serialize_round_trips(cfg in arb_config()) {
            let text = cfg.serialize();
            let back = parse_config(&text).unwrap();
            prop_assert_eq!(back, cfg);
        }
    }
}
