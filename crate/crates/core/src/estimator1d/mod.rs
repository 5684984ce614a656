//! Closed-form estimators for the scalar model `ẋ = λx`.
//!
//! The strong estimator is the least-squares fit of one forward-Euler step
//! to consecutive samples; the weak estimator fits `θ` through a single
//! discrete test function on a symmetric stencil. Both minimize quadratics
//! in `θ`, so their minimizers are ratios of sums and their errors can be
//! split into a deterministic truncation part and a noise part.

mod kernels;
mod montecarlo;

pub use kernels::{e_lambda, e_lambda_prime, euler_truncation, variance_v};
pub use montecarlo::{find_crossing_dt, monte_carlo, CellStats, Crossing, EstimatorKind, McCell};

use serde::{Deserialize, Serialize};

use crate::testfn::DiscreteTestFunction;
use crate::trajectory::normal_vector;
use crate::{Error, Result};

/// Scalar linear model `ẋ = λx` observed on a uniform grid with additive
/// Gaussian noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scenario1D {
    pub lambda: f64,
    pub x0: f64,
    pub t_final: f64,
    pub dt: f64,
    pub sigma: f64,
    pub seed: u64,
}

impl Scenario1D {
    pub fn new(lambda: f64, x0: f64, t_final: f64, dt: f64, sigma: f64, seed: u64) -> Result<Self> {
        let s = Self { lambda, x0, t_final, dt, sigma, seed };
        s.steps()?;
        if lambda == 0.0 || !lambda.is_finite() {
            return Err(Error::InvalidArgument(format!("rate must be non-zero and finite, got {lambda}")));
        }
        if !(sigma >= 0.0) {
            return Err(Error::InvalidArgument(format!("noise level must be non-negative, got {sigma}")));
        }
        Ok(s)
    }

    /// `K = T/Δt`; fails unless it is a positive integer.
    pub fn steps(&self) -> Result<usize> {
        let k = self.t_final / self.dt;
        if !(self.dt > 0.0) || !k.is_finite() || k.round() < 1.0 || (k - k.round()).abs() > 1e-9 * k {
            return Err(Error::InvalidArgument(format!(
                "horizon {} is not a positive integer multiple of {}",
                self.t_final, self.dt
            )));
        }
        Ok(k.round() as usize)
    }

    /// Noiseless samples `x0·e^{λkΔt}`, `k = 0..=K`.
    pub fn clean_samples(&self) -> Result<Vec<f64>> {
        let k = self.steps()?;
        Ok((0..=k).map(|i| self.x0 * (self.lambda * i as f64 * self.dt).exp()).collect())
    }

    /// Standardized noise of realization `run`; sample `k` always receives
    /// entry `k`, whatever the step size.
    pub fn noise(&self, run: u64) -> Result<Vec<f64>> {
        Ok(normal_vector(self.seed, run, self.steps()? + 1))
    }

    /// Strong estimate on realization `run` with its error decomposition.
    pub fn strong_report(&self, run: u64) -> Result<EstimatorReport> {
        let eps = self.noise(run)?;
        strong_report(self.lambda, self.x0, self.sigma, self.dt, &eps)
    }
}

/// Strong estimate together with its error decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorReport {
    pub estimate: f64,
    /// `θ* − λ`
    pub error: f64,
    /// `E_{λ,Δt}`
    pub truncation: f64,
    /// `(σ/Δt)·G_K/‖Y_K‖²`
    pub noise: f64,
    /// `(θ* − λ)/λ`
    pub relative_error: f64,
}

/// `θ* = Σ y_{i−1}(y_i − y_{i−1}) / (Δt Σ y_{i−1}²)` over `i = 1..=K`.
pub fn strong_estimator(y: &[f64], dt: f64) -> Result<f64> {
    if y.len() < 2 {
        return Err(Error::InvalidArgument(format!("need at least two samples, got {}", y.len())));
    }
    let (mut num, mut den) = (0.0, 0.0);
    for w in y.windows(2) {
        num += w[0] * (w[1] - w[0]);
        den += w[0] * w[0];
    }
    if den == 0.0 {
        return Err(Error::DegenerateData("all samples but the last are zero".into()));
    }
    Ok(num / (dt * den))
}

/// `G_K = Σ y_{i−1}(ε_i − e^{λΔt}ε_{i−1})` and `‖Y_K‖² = Σ y_{i−1}²`.
fn noise_sums(lambda: f64, dt: f64, y: &[f64], eps: &[f64]) -> (f64, f64) {
    let growth = (lambda * dt).exp();
    let (mut g, mut y2) = (0.0, 0.0);
    for i in 1..y.len() {
        g += y[i - 1] * (eps[i] - growth * eps[i - 1]);
        y2 += y[i - 1] * y[i - 1];
    }
    (g, y2)
}

/// Strong estimate from the samples `x0·e^{λkΔt} + σε_k`, decomposed as
/// `θ* − λ = E_{λ,Δt} + (σ/Δt)·G_K/‖Y_K‖²`.
pub fn strong_report(lambda: f64, x0: f64, sigma: f64, dt: f64, eps: &[f64]) -> Result<EstimatorReport> {
    let y: Vec<f64> = eps
        .iter()
        .enumerate()
        .map(|(k, e)| x0 * (lambda * k as f64 * dt).exp() + sigma * e)
        .collect();
    let estimate = strong_estimator(&y, dt)?;
    let (g, y2) = noise_sums(lambda, dt, &y, eps);
    let error = estimate - lambda;
    Ok(EstimatorReport {
        estimate,
        error,
        truncation: euler_truncation(lambda, dt),
        noise: sigma / dt * g / y2,
        relative_error: error / lambda,
    })
}

/// `θ* = −Σ ỹ_i ψ'_i / Σ ỹ_i ψ_i`, the minimizer of `|θΣỹψ + Σỹψ'|²`.
pub fn weak_estimator(y: &[f64], psi: &[f64], dpsi: &[f64]) -> Result<f64> {
    if y.len() != psi.len() || y.len() != dpsi.len() {
        return Err(Error::DimensionMismatch { expected: y.len(), got: psi.len().min(dpsi.len()) });
    }
    let den: f64 = y.iter().zip(psi).map(|(a, b)| a * b).sum();
    let num: f64 = y.iter().zip(dpsi).map(|(a, b)| a * b).sum();
    if den == 0.0 {
        return Err(Error::DegenerateData("test function integrates the samples to zero".into()));
    }
    Ok(-num / den)
}

/// Weak estimate of a test function placed on grid samples: stencil point
/// `i` reads `y[n₀ + i·n̄]`.
pub fn weak_estimate_on_grid(y: &[f64], tf: &DiscreteTestFunction) -> Result<f64> {
    let (n0, nbar) = tf
        .quad
        .grid_offsets
        .ok_or_else(|| Error::InvalidArgument("quadrature is not placed on a grid".into()))?;
    let m = tf.m();
    if n0 < m * nbar || n0 + m * nbar >= y.len() {
        return Err(Error::SupportOutOfRange {
            start: n0.saturating_sub(m * nbar),
            end: n0 + m * nbar,
            last: y.len().saturating_sub(1),
        });
    }
    let samples: Vec<f64> = (0..=2 * m).map(|i| y[n0 - m * nbar + i * nbar]).collect();
    weak_estimator(&samples, &tf.psi(), &tf.dpsi())
}

/// Samples `x_c·e^{λih} + σε_i`, `i = −m..=m`, around a center state `x_c`.
pub fn weak_samples(lambda: f64, center_state: f64, sigma: f64, tf: &DiscreteTestFunction, eps: &[f64]) -> Vec<f64> {
    let m = tf.m() as isize;
    (-m..=m)
        .zip(eps)
        .map(|(i, e)| center_state * (lambda * i as f64 * tf.quad.h).exp() + sigma * e)
        .collect()
}

/// Which constant multiplies `x0²` in the strong-form noise limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LimitConstant {
    /// `(e^{2λT} − 1)/(2λT)`, the mean of `x(t)²/x0²` over `[0, T]`.
    MeanSquare,
    /// `(e^{λT} − 1)/(2λT)`.
    HalfExponent,
}

/// Almost-sure limit of `Δt·(θ* − λ)` as `Δt → 0` for the strong estimator:
/// `−σ²/(x0²·c + σ²)` with `c = (e^{2λT} − 1)/(2λT)`.
pub fn strong_limit(lambda: f64, sigma: f64, x0: f64, t_final: f64) -> f64 {
    strong_limit_with(LimitConstant::MeanSquare, lambda, sigma, x0, t_final)
}

/// [`strong_limit`] with a selectable constant.
pub fn strong_limit_with(constant: LimitConstant, lambda: f64, sigma: f64, x0: f64, t_final: f64) -> f64 {
    let lt = lambda * t_final;
    let c = match constant {
        LimitConstant::MeanSquare => (2.0 * lt).exp_m1() / (2.0 * lt),
        LimitConstant::HalfExponent => lt.exp_m1() / (2.0 * lt),
    };
    let s2 = sigma * sigma;
    -s2 / (x0 * x0 * c + s2)
}

/// Closed form of the weak estimator's relative error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WeakErrorForm {
    /// `σ·(−⟨ε, ψ + ψ'/λ⟩) / (x_c·(1 + (2/λ)Σψ_i e'_λ(ih)) + σ⟨ε, ψ⟩)`,
    /// identical to the estimator for every noise realization.
    Exact,
    /// Same with the noise term of the denominator taken without its `σ`
    /// factor, which makes the expression exactly linear in `σ`.
    LinearDenominator,
}

/// Relative error `(θ* − λ)/λ` of the weak estimator in closed form, for a
/// test function satisfying the five exactness conditions and samples
/// `x_c·e^{λih} + σε_i`.
pub fn weak_error_formula(
    lambda: f64,
    sigma: f64,
    center_state: f64,
    tf: &DiscreteTestFunction,
    eps: &[f64],
    form: WeakErrorForm,
) -> Result<f64> {
    let n = 2 * tf.m() + 1;
    if eps.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: eps.len() });
    }
    tf.check_conditions(lambda, 1e-10)?;
    let psi = tf.psi();
    let dpsi = tf.dpsi();
    let m = tf.m();
    let h = tf.quad.h;
    let mut bulk = 0.0;
    for i in 1..=m {
        bulk += psi[m + i] * e_lambda_prime(lambda, i as f64 * h);
    }
    let base = center_state * (1.0 + 2.0 / lambda * bulk);
    let e_mixed: f64 = (0..n).map(|i| eps[i] * (psi[i] + dpsi[i] / lambda)).sum();
    let e_psi: f64 = (0..n).map(|i| eps[i] * psi[i]).sum();
    let den = match form {
        WeakErrorForm::Exact => base + sigma * e_psi,
        WeakErrorForm::LinearDenominator => base + e_psi,
    };
    Ok(-sigma * e_mixed / den)
}
