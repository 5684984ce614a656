//! Monte-Carlo statistics over noise realizations and the search for an
//! error-free strong step size.

use std::cell::RefCell;
use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{euler_truncation, weak_estimator, weak_samples, Scenario1D};
use crate::testfn::DiscreteTestFunction;
use crate::trajectory::normal_vector;
use crate::{Error, Result};

/// Which estimator a Monte-Carlo cell evaluates.
#[derive(Debug, Clone, PartialEq)]
pub enum EstimatorKind {
    /// Strong estimator on the scenario's full grid.
    Strong,
    /// Weak estimator on the stencil of the test function, centered on a
    /// state equal to the scenario's `x0`.
    Weak(DiscreteTestFunction),
}

#[derive(Debug, Clone, PartialEq)]
pub struct McCell {
    pub scenario: Scenario1D,
    pub kind: EstimatorKind,
}

impl McCell {
    /// `θ* − λ` on realization `run`.
    pub fn error(&self, run: u64) -> Result<f64> {
        let s = &self.scenario;
        match &self.kind {
            EstimatorKind::Strong => Ok(s.strong_report(run)?.error),
            EstimatorKind::Weak(tf) => {
                let eps = normal_vector(s.seed, run, 2 * tf.m() + 1);
                let y = weak_samples(s.lambda, s.x0, s.sigma, tf, &eps);
                Ok(weak_estimator(&y, &tf.psi(), &tf.dpsi())? - s.lambda)
            }
        }
    }
}

/// Statistics of one cell over `runs` realizations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellStats {
    /// `θ* − λ` per run, in run order.
    pub errors: Vec<f64>,
    pub mean_error: f64,
    /// Sample standard deviation of the error (zero for a single run).
    pub std_error: f64,
    /// Mean of `Δt·(θ* − λ)`.
    pub mean_scaled_error: f64,
    /// Mean of `Δt·|θ* − λ|`.
    pub mean_abs_scaled_error: f64,
    /// Mean of `|θ* − λ|/|λ|`.
    pub mean_abs_rel_error: f64,
    /// Fraction of runs with `|θ* − λ| > |λ|`.
    pub frac_rel_above_one: f64,
}

impl CellStats {
    fn from_errors(errors: Vec<f64>, lambda: f64, dt: f64) -> Self {
        let n = errors.len() as f64;
        let mean = errors.iter().sum::<f64>() / n;
        let var = if errors.len() > 1 {
            errors.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        let rel: Vec<f64> = errors.iter().map(|e| (e / lambda).abs()).collect();
        Self {
            mean_error: mean,
            std_error: var.sqrt(),
            mean_scaled_error: dt * mean,
            mean_abs_scaled_error: dt * errors.iter().map(|e| e.abs()).sum::<f64>() / n,
            mean_abs_rel_error: rel.iter().sum::<f64>() / n,
            frac_rel_above_one: rel.iter().filter(|r| **r > 1.0).count() as f64 / n,
            errors,
        }
    }

    /// Relative errors `(θ* − λ)/λ` per run.
    pub fn relative_errors(&self, lambda: f64) -> Vec<f64> {
        self.errors.iter().map(|e| e / lambda).collect()
    }
}

/// Runs every cell over realizations `0..runs`. Realization `r` of a cell
/// uses noise stream `r` of the cell's seed, so results do not depend on
/// the thread count.
pub fn monte_carlo(cells: &[McCell], runs: usize) -> Result<Vec<CellStats>> {
    if runs == 0 {
        return Err(Error::InvalidArgument("need at least one run".into()));
    }
    cells
        .iter()
        .map(|cell| {
            let errors = (0..runs as u64)
                .into_par_iter()
                .map(|r| cell.error(r))
                .collect::<Result<Vec<f64>>>()?;
            Ok(CellStats::from_errors(errors, cell.scenario.lambda, cell.scenario.dt))
        })
        .collect()
}

/// Strong-estimator error as a continuous function of the step size for
/// one noise stream.
///
/// Sample `j` always carries noise `ε_j`. On `Δt = T/K` with integer `K`
/// the curve is the exact error `E_{λ,Δt} + (σ/Δt)·G_K/‖Y_K‖²`; between
/// consecutive `K` the sums `G` and `‖Y‖²` are interpolated linearly in
/// `T/Δt`.
pub struct ContinuousError {
    lambda: f64,
    x0: f64,
    sigma: f64,
    t_final: f64,
    eps: Vec<f64>,
    cache: RefCell<HashMap<usize, (f64, f64)>>,
}

impl ContinuousError {
    /// `eps` must hold at least `T/Δt_min + 2` entries for the smallest step
    /// that will be evaluated.
    pub fn new(lambda: f64, x0: f64, sigma: f64, t_final: f64, eps: Vec<f64>) -> Self {
        Self { lambda, x0, sigma, t_final, eps, cache: RefCell::new(HashMap::new()) }
    }

    fn sums(&self, k: usize) -> (f64, f64) {
        if let Some(v) = self.cache.borrow().get(&k) {
            return *v;
        }
        let dt = self.t_final / k as f64;
        let growth = (self.lambda * dt).exp();
        let y = |j: usize| self.x0 * (self.lambda * j as f64 * dt).exp() + self.sigma * self.eps[j];
        let (mut g, mut y2) = (0.0, 0.0);
        let mut prev = y(0);
        for i in 1..=k {
            let cur = y(i);
            g += prev * (self.eps[i] - growth * self.eps[i - 1]);
            y2 += prev * prev;
            prev = cur;
        }
        self.cache.borrow_mut().insert(k, (g, y2));
        (g, y2)
    }

    /// `θ*(Δt) − λ` on the continuous extension.
    pub fn error_at(&self, dt: f64) -> Result<f64> {
        let kf = self.t_final / dt;
        let n = kf.floor() as usize;
        if n < 1 || n + 2 > self.eps.len() {
            return Err(Error::InvalidArgument(format!("step {dt} outside the prepared range")));
        }
        let frac = kf - n as f64;
        let (g, y2) = if frac == 0.0 {
            self.sums(n)
        } else {
            let (g0, a0) = self.sums(n);
            let (g1, a1) = self.sums(n + 1);
            ((1.0 - frac) * g0 + frac * g1, (1.0 - frac) * a0 + frac * a1)
        };
        Ok(euler_truncation(self.lambda, dt) + self.sigma * g / (dt * y2))
    }
}

/// A step size at which the strong estimator is (nearly) exact.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    pub dt: f64,
    /// `θ*(Δt) − λ` at `dt`.
    pub error: f64,
}

/// Scans `scan` log-spaced step sizes of `bracket` for a sign change of
/// `θ*(Δt) − λ` on noise stream `run` and bisects the first one found until
/// the error falls below `1e-8` in magnitude. `scenario.dt` is ignored.
pub fn find_crossing_dt(scenario: &Scenario1D, run: u64, bracket: (f64, f64), scan: usize) -> Result<Option<Crossing>> {
    let (lo, hi) = bracket;
    if !(lo > 0.0 && lo < hi && hi <= scenario.t_final) || scan < 2 {
        return Err(Error::InvalidArgument(format!("bad step bracket [{lo}, {hi}] or scan count {scan}")));
    }
    let k_max = (scenario.t_final / lo).ceil() as usize + 2;
    let eps = normal_vector(scenario.seed, run, k_max + 1);
    let curve = ContinuousError::new(scenario.lambda, scenario.x0, scenario.sigma, scenario.t_final, eps);
    let ratio = (hi / lo).ln() / (scan - 1) as f64;
    let grid: Vec<f64> = (0..scan).map(|i| (lo.ln() + i as f64 * ratio).exp().clamp(lo, hi)).collect();
    let mut prev = (grid[0], curve.error_at(grid[0])?);
    for &t in &grid[1..] {
        let e = curve.error_at(t)?;
        if e == 0.0 {
            return Ok(Some(Crossing { dt: t, error: 0.0 }));
        }
        if e.signum() != prev.1.signum() {
            let (mut a, mut fa) = prev;
            let mut b = t;
            let mut best = if fa.abs() < e.abs() { (a, fa) } else { (t, e) };
            for _ in 0..200 {
                if best.1.abs() < 1e-8 {
                    break;
                }
                let mid = 0.5 * (a + b);
                if mid <= a || mid >= b {
                    break;
                }
                let fm = curve.error_at(mid)?;
                if fm.abs() < best.1.abs() {
                    best = (mid, fm);
                }
                if fm.signum() == fa.signum() {
                    a = mid;
                    fa = fm;
                } else {
                    b = mid;
                }
            }
            return Ok(Some(Crossing { dt: best.0, error: best.1 }));
        }
        prev = (t, e);
    }
    Ok(None)
}
