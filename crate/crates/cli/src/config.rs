//! Experiment configuration: TOML file, flag overrides, and validation.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use refldiff_core::TimeGrid;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Ou,
    Bm,
    Hyperbolic,
    Disc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Simulate,
    Law,
    Pde,
    Validate,
    Millson,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SchemeChoice {
    /// Exact Gaussian steps of the components (ou, bm only).
    #[default]
    Exact,
    Euler,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    pub dir: Option<PathBuf>,
    pub paths: Option<PathBuf>,
    pub law: Option<PathBuf>,
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    pub scheme: Option<SchemeChoice>,
    /// Keep every k-th step; only the endpoints when absent.
    pub record_every: Option<usize>,
    pub start: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LawSection {
    pub points: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdeSection {
    pub h: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateSection {
    pub moments: Option<Vec<f64>>,
    pub sigma_rule: Option<u32>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MillsonSection {
    pub eta: Option<f64>,
    pub from_d: Option<usize>,
}

/// The file as written; every key optional until [`Experiment::resolve`].
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub family: Option<Family>,
    pub d: Option<usize>,
    pub b: Option<f64>,
    #[serde(alias = "R", alias = "S", alias = "V")]
    pub radius: Option<f64>,
    pub t_end: Option<f64>,
    pub n_steps: Option<usize>,
    pub h: Option<f64>,
    pub n_paths: Option<usize>,
    pub seed: Option<u64>,
    pub suites: Option<Vec<Suite>>,
    #[serde(default)]
    pub outputs: Outputs,
    #[serde(default)]
    pub simulate: SimulateSection,
    #[serde(default)]
    pub law: LawSection,
    #[serde(default)]
    pub pde: PdeSection,
    #[serde(default)]
    pub validate: ValidateSection,
    #[serde(default)]
    pub millson: MillsonSection,
}

impl RawConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

/// Flag values that replace config keys.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub family: Option<Family>,
    pub d: Option<usize>,
    pub b: Option<f64>,
    pub radius: Option<f64>,
    pub t_end: Option<f64>,
    pub n_steps: Option<usize>,
    pub h: Option<f64>,
    pub n_paths: Option<usize>,
    pub seed: Option<u64>,
    pub scheme: Option<SchemeChoice>,
    pub points: Option<usize>,
}

impl Overrides {
    pub fn apply(self, raw: &mut RawConfig) {
        macro_rules! put {
            ($($f:ident),*) => { $( if self.$f.is_some() { raw.$f = self.$f; } )* };
        }
        put!(family, d, b, radius, t_end, n_steps, h, n_paths, seed);
        if self.h.is_some() && self.n_steps.is_none() {
            raw.n_steps = None;
        }
        if self.scheme.is_some() {
            raw.simulate.scheme = self.scheme;
        }
        if self.points.is_some() {
            raw.law.points = self.points;
        }
    }
}

/// Where each artifact goes; `None` means standard output.
#[derive(Debug, Clone, Default)]
pub struct Targets {
    pub paths: Option<PathBuf>,
    pub law: Option<PathBuf>,
    pub report: Option<PathBuf>,
}

/// A validated experiment.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub family: Family,
    pub d: usize,
    pub b: f64,
    /// R, S or V; infinite for an unreflected process.
    pub radius: f64,
    pub grid: TimeGrid,
    pub n_paths: usize,
    pub seed: u64,
    pub suites: Vec<Suite>,
    pub targets: Targets,
    pub scheme: SchemeChoice,
    pub record_every: Option<usize>,
    pub start: Option<f64>,
    pub law_points: usize,
    pub pde_h: Option<f64>,
    pub moments: Vec<f64>,
    pub sigma_rule: u32,
    pub millson_eta: f64,
    pub millson_from_d: usize,
}

fn bad(key: &str, detail: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("invalid parameter `{key}`: {detail}"))
}

fn missing(key: &str) -> CliError {
    CliError::Config(format!("missing key `{key}`"))
}

impl Experiment {
    /// Validates `raw`. With `file_outputs`, unset artifact paths get file
    /// names under `outputs.dir`; otherwise they stay on standard output.
    pub fn resolve(raw: RawConfig, file_outputs: bool) -> Result<Self, CliError> {
        let family = raw.family.ok_or_else(|| missing("family"))?;
        let d = match family {
            Family::Disc => match raw.d {
                None | Some(2) => 2,
                Some(d) => return Err(bad("d", format!("the disc is two-dimensional, got {d}"))),
            },
            _ => raw.d.ok_or_else(|| missing("d"))?,
        };
        if d < 2 {
            return Err(bad("d", format!("must be at least 2, got {d}")));
        }
        let b = match family {
            Family::Ou => raw.b.ok_or_else(|| missing("b"))?,
            Family::Bm | Family::Hyperbolic | Family::Disc => match raw.b {
                None => 0.0,
                Some(b) if b == 0.0 => 0.0,
                Some(b) => return Err(bad("b", format!("family {family:?} has no drift parameter, got {b}"))),
            },
        };
        if !b.is_finite() {
            return Err(bad("b", "must be finite"));
        }
        let radius = match family {
            Family::Disc => {
                let v = raw.radius.unwrap_or(f64::INFINITY);
                if v.is_finite() && !(v > 0.0 && v < 1.0) {
                    return Err(bad("radius", format!("V must lie in (0, 1), got {v}")));
                }
                v
            }
            _ => {
                let r = raw.radius.ok_or_else(|| missing("radius"))?;
                if !(r > 0.0) {
                    return Err(bad("radius", format!("must be positive, got {r}")));
                }
                r
            }
        };
        let t_end = raw.t_end.unwrap_or(1.0);
        if !(t_end > 0.0 && t_end.is_finite()) {
            return Err(bad("t_end", format!("must be positive, got {t_end}")));
        }
        let grid = match (raw.n_steps, raw.h) {
            (Some(n), _) => TimeGrid::new(t_end, n),
            (None, Some(h)) => TimeGrid::with_step(t_end, h),
            (None, None) => TimeGrid::with_step(t_end, 1e-3),
        }
        .map_err(|e| CliError::Config(e.to_string()))?;
        let n_paths = raw.n_paths.unwrap_or(10_000);
        if n_paths == 0 {
            return Err(bad("n_paths", "must be at least 1"));
        }
        let mut suites = raw.suites.unwrap_or_else(|| vec![Suite::Law]);
        suites.sort();
        suites.dedup();
        if suites.is_empty() {
            return Err(bad("suites", "nothing to run"));
        }
        let scheme = raw.simulate.scheme.unwrap_or_default();
        if scheme == SchemeChoice::Exact && matches!(family, Family::Hyperbolic | Family::Disc) && raw.simulate.scheme.is_some() {
            return Err(bad("scheme", "the exact scheme exists only for ou and bm"));
        }
        if let Some(0) = raw.simulate.record_every {
            return Err(bad("record_every", "must be at least 1"));
        }
        if let Some(s) = raw.simulate.start {
            if !(s > 0.0) {
                return Err(bad("start", format!("must be positive, got {s}")));
            }
        }
        let law_points = raw.law.points.unwrap_or(200);
        if law_points < 2 {
            return Err(bad("points", "need at least 2"));
        }
        let needs_laws = suites.iter().any(|s| matches!(s, Suite::Law | Suite::Pde | Suite::Validate));
        if family == Family::Hyperbolic && needs_laws && !(2..=5).contains(&d) {
            return Err(bad("d", format!("hyperbolic laws are available for d in 2..=5, got {d}")));
        }
        if suites.contains(&Suite::Pde) && !radius.is_finite() {
            return Err(bad("radius", "the pde suite needs a finite reflection radius"));
        }
        if let Some(h) = raw.pde.h {
            if !(h > 0.0 && h < 0.01 * radius) {
                return Err(bad("h", format!("pde step must lie in (0, radius/100), got {h}")));
            }
        }
        let moments = raw.validate.moments.unwrap_or_else(|| vec![1.0, 2.0]);
        if let Some(m) = moments.iter().find(|m| !(**m >= 1.0)) {
            return Err(bad("moments", format!("orders must be at least 1, got {m}")));
        }
        let sigma_rule = raw.validate.sigma_rule.unwrap_or(3);
        if sigma_rule == 0 {
            return Err(bad("sigma_rule", "must be at least 1"));
        }
        let millson_eta = raw.millson.eta.unwrap_or(1.0);
        if !(millson_eta > 0.0 && millson_eta.is_finite()) {
            return Err(bad("eta", format!("must be positive, got {millson_eta}")));
        }
        let millson_from_d = raw
            .millson
            .from_d
            .unwrap_or(if family == Family::Hyperbolic && d == 2 { 2 } else { 3 });
        if !(2..=3).contains(&millson_from_d) {
            return Err(bad("from_d", format!("must be 2 or 3, got {millson_from_d}")));
        }

        let dir = raw.outputs.dir.unwrap_or_default();
        let pick = |p: Option<PathBuf>, default: &str| match p {
            Some(p) => Some(dir.join(p)),
            None if file_outputs => Some(dir.join(default)),
            None => None,
        };
        let targets = Targets {
            paths: pick(raw.outputs.paths, "paths.csv"),
            law: pick(raw.outputs.law, "law.csv"),
            report: pick(raw.outputs.report, "report.json"),
        };

        Ok(Self {
            family,
            d,
            b,
            radius,
            grid,
            n_paths,
            seed: raw.seed.unwrap_or(0),
            suites,
            targets,
            scheme: if matches!(family, Family::Hyperbolic | Family::Disc) { SchemeChoice::Euler } else { scheme },
            record_every: raw.simulate.record_every,
            start: raw.simulate.start,
            law_points,
            pde_h: raw.pde.h,
            moments,
            sigma_rule,
            millson_eta,
            millson_from_d,
        })
    }

    pub fn reflected(&self) -> bool {
        self.radius.is_finite()
    }
}
