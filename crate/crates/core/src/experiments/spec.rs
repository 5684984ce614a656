//! Serializable experiment descriptions and value-list parsing.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::compare::CompareConfig;
use crate::{Error, Result};

/// Parses `a,b,c` or a geometric range `lo..hi` / `lo..hi:n`. Without `:n`
/// a range gets three points per decade, rounded, plus one.
pub fn parse_values(text: &str) -> Result<Vec<f64>> {
    let bad = |what: &str| Error::InvalidArgument(format!("cannot parse {what:?} in value list {text:?}"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad(s));
    if let Some((lo, rest)) = text.split_once("..") {
        let (hi, n) = match rest.split_once(':') {
            Some((h, n)) => (h, Some(n.trim().parse::<usize>().map_err(|_| bad(n))?)),
            None => (rest, None),
        };
        let (lo, hi) = (num(lo)?, num(hi)?);
        if !(lo > 0.0 && hi > lo) {
            return Err(Error::InvalidArgument(format!("range {text:?} needs 0 < lo < hi")));
        }
        let decades = (hi / lo).log10();
        let n = n.unwrap_or(1 + (3.0 * decades).round() as usize).max(2);
        let step = (hi / lo).ln() / (n - 1) as f64;
        return Ok((0..n)
            .map(|i| if i + 1 == n { hi } else { lo * (step * i as f64).exp() })
            .collect());
    }
    let v: Vec<f64> = text.split(',').filter(|s| !s.trim().is_empty()).map(num).collect::<Result<_>>()?;
    if v.is_empty() {
        return Err(Error::InvalidArgument("empty value list".into()));
    }
    Ok(v)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenDataParams {
    pub zeta: f64,
    pub trajectories: usize,
    pub steps: usize,
    pub dt: f64,
    pub noise: f64,
}

impl Default for GenDataParams {
    fn default() -> Self {
        Self { zeta: 0.5, trajectories: 20, steps: 200, dt: 0.02, noise: 0.10 }
    }
}

/// Strong-estimator sweep over noise levels and step sizes. Step sizes are
/// snapped to `T/K` with integer `K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StrongSweep {
    pub lambda: f64,
    pub x0: f64,
    pub t_final: f64,
    pub sigmas: Vec<f64>,
    pub dts: Vec<f64>,
    pub runs: usize,
    /// Realizations listed individually per cell.
    pub scatter: usize,
    /// Noise level of the step-scaled error panel.
    pub scaled_sigma: f64,
}

impl Default for StrongSweep {
    fn default() -> Self {
        Self {
            lambda: -2.0,
            x0: 1.0,
            t_final: 1.0,
            sigmas: vec![1e-3, 1e-2, 1e-1],
            dts: parse_values("1e-4..1e-1").expect("static range"),
            runs: 1000,
            scatter: 10,
            scaled_sigma: 1e-2,
        }
    }
}

/// Weak-estimator sweep over the support length of the three-point test
/// function, plus the strong/weak comparison on shared data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WeakSweep {
    pub lambda: f64,
    pub x0: f64,
    pub sigmas: Vec<f64>,
    pub supports: Vec<f64>,
    pub runs: usize,
    pub scatter: usize,
    /// Shared-data comparison: grid step, horizon and support.
    pub compare_dt: f64,
    pub compare_t_final: f64,
    pub compare_support: f64,
    pub compare_sigmas: Vec<f64>,
}

impl Default for WeakSweep {
    fn default() -> Self {
        Self {
            lambda: -2.0,
            x0: 1.0,
            sigmas: vec![1e-3, 1e-2, 1e-1],
            supports: parse_values("0.25..8").expect("static range"),
            runs: 1000,
            scatter: 10,
            compare_dt: 0.01,
            compare_t_final: 1.0,
            compare_support: 1.0,
            compare_sigmas: parse_values("1e-4..1e-1").expect("static range"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CrossingParams {
    pub lambda: f64,
    pub x0: f64,
    pub t_final: f64,
    pub sigma: f64,
    pub runs: usize,
    pub dt_min: f64,
    pub dt_max: f64,
    pub scan: usize,
}

impl Default for CrossingParams {
    fn default() -> Self {
        Self { lambda: -2.0, x0: 1.0, t_final: 1.0, sigma: 1e-2, runs: 100, dt_min: 1e-4, dt_max: 1e-1, scan: 400 }
    }
}

/// Scores a saved model on a directory of trajectory CSVs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvaluateParams {
    pub checkpoint: PathBuf,
    pub data: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Experiment {
    GenData(GenDataParams),
    EstimateStrong(StrongSweep),
    EstimateWeak(WeakSweep),
    Crossing(CrossingParams),
    TrainCompare(CompareConfig),
    Evaluate(EvaluateParams),
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::GenData(_) => "gen-data",
            Experiment::EstimateStrong(_) => "estimate-strong",
            Experiment::EstimateWeak(_) => "estimate-weak",
            Experiment::Crossing(_) => "crossing",
            Experiment::TrainCompare(_) => "train-compare",
            Experiment::Evaluate(_) => "evaluate",
        }
    }
}

/// A complete, re-runnable experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub seed: u64,
    pub out: PathBuf,
    pub experiment: Experiment,
}

/// Contents of a `--config` TOML file: optional global `seed`/`out` and one
/// optional table per subcommand.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case", deny_unknown_fields)]
pub struct ConfigFile {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub gen_data: Option<GenDataParams>,
    pub estimate_strong: Option<StrongSweep>,
    pub estimate_weak: Option<WeakSweep>,
    pub crossing: Option<CrossingParams>,
    pub train_compare: Option<CompareConfig>,
    pub evaluate: Option<EvaluateParams>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidArgument(format!("config: {e}")))
    }
}
