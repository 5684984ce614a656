//! Compactly supported test functions.
//!
//! Two kinds live here. [`BumpTestFunction`] is the polynomial bump
//! `C(t−a)^p(b−t)^p` used to assemble weak-form losses, placed on a grid by
//! [`place_supports`] and tabulated by [`TestFunctionSet`].
//! [`DiscreteTestFunction`] holds only point values on a symmetric
//! quadrature stencil; it is what the scalar error analysis works with, and
//! [`three_point_testfn`] builds the three-point member of that family that
//! makes the weak estimator exact on noiseless exponential data.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::estimator1d::{e_lambda, e_lambda_prime};
use crate::{ConditionFailure, Error, Result};

/// `φ(t) = C(t−a)^p(b−t)^p` on `[a, b]`, zero outside, scaled so `max φ = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BumpTestFunction {
    pub a: f64,
    pub b: f64,
    pub p: u32,
    /// `((b − a)/2)^{−2p}`
    pub c: f64,
}

impl BumpTestFunction {
    pub fn new(a: f64, b: f64, p: u32) -> Result<Self> {
        if !(a < b) {
            return Err(Error::InvalidArgument(format!("support needs a < b, got [{a}, {b}]")));
        }
        if p < 2 {
            return Err(Error::InvalidArgument(format!("degree parameter must be at least 2, got {p}")));
        }
        let c = (0.5 * (b - a)).powi(-2 * p as i32);
        Ok(Self { a, b, p, c })
    }

    /// `(φ(t), φ'(t))`.
    pub fn eval(&self, t: f64) -> (f64, f64) {
        if t <= self.a || t >= self.b {
            return (0.0, 0.0);
        }
        // u = (t−a)(b−t)/r² keeps the powers in [0, 1]
        let r2 = (0.5 * (self.b - self.a)).powi(2);
        let u = (t - self.a) * (self.b - t) / r2;
        let du = ((self.b - t) - (t - self.a)) / r2;
        let p = self.p as i32;
        let up1 = u.powi(p - 1);
        (up1 * u, p as f64 * up1 * du)
    }
}

/// Support layout of a family of bump functions on a grid of `steps + 1` points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacementPlan {
    pub steps: usize,
    /// Support width in grid points.
    pub ell: usize,
    pub p: u32,
    pub s: f64,
    pub ell_overlap: usize,
    /// Inclusive `(first, last)` grid indices of each support.
    pub supports: Vec<(usize, usize)>,
}

impl PlacementPlan {
    pub fn count(&self) -> usize {
        self.supports.len()
    }

    pub fn stride(&self) -> usize {
        self.ell - self.ell_overlap
    }
}

/// `⌊ℓ·(1 − √(1 − s^{1/p}))⌋`
pub fn overlap_points(ell: usize, p: u32, s: f64) -> usize {
    let frac = 1.0 - (1.0 - s.powf(1.0 / p as f64)).sqrt();
    (ell as f64 * frac).floor() as usize
}

/// Left-aligned supports of width `ell`; consecutive supports share
/// `ell_overlap` points and any remainder at the right end is dropped.
pub fn place_supports(steps: usize, ell: usize, p: u32, s: f64) -> Result<PlacementPlan> {
    if ell < 2 || ell > steps + 1 {
        return Err(Error::InvalidArgument(format!("support width {ell} outside 2..={}", steps + 1)));
    }
    if p < 2 {
        return Err(Error::InvalidArgument(format!("degree parameter must be at least 2, got {p}")));
    }
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::InvalidArgument(format!("overlap parameter must lie in [0, 1], got {s}")));
    }
    let ell_overlap = overlap_points(ell, p, s);
    if ell_overlap >= ell {
        return Err(Error::InvalidPlacement(format!("overlap {ell_overlap} leaves no stride for width {ell}")));
    }
    let stride = ell - ell_overlap;
    let count = 1 + (steps + 1 - ell) / stride;
    let supports = (0..count).map(|j| (j * stride, j * stride + ell - 1)).collect();
    Ok(PlacementPlan { steps, ell, p, s, ell_overlap, supports })
}

/// Bump functions of a [`PlacementPlan`] tabulated at the interior points
/// `s_q = q·h`, `q = 1..=steps−1`, scaled by the spacing:
/// `phi[(q−1, j)] = h·φ_j(s_q)` and `dphi[(q−1, j)] = h·φ'_j(s_q)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TestFunctionSet {
    pub plan: PlacementPlan,
    pub h: f64,
    pub functions: Vec<BumpTestFunction>,
    pub phi: Array2<f64>,
    pub dphi: Array2<f64>,
}

impl TestFunctionSet {
    pub fn tabulate(plan: PlacementPlan, h: f64) -> Result<Self> {
        if !(h > 0.0) {
            return Err(Error::InvalidArgument(format!("spacing must be positive, got {h}")));
        }
        if let Some(&(start, end)) = plan.supports.iter().find(|(_, e)| *e > plan.steps) {
            return Err(Error::SupportOutOfRange { start, end, last: plan.steps });
        }
        let functions = plan
            .supports
            .iter()
            .map(|&(i0, i1)| BumpTestFunction::new(i0 as f64 * h, i1 as f64 * h, plan.p))
            .collect::<Result<Vec<_>>>()?;
        let q = plan.steps.saturating_sub(1);
        let mut phi = Array2::zeros((q, functions.len()));
        let mut dphi = Array2::zeros((q, functions.len()));
        for (j, f) in functions.iter().enumerate() {
            let (i0, i1) = plan.supports[j];
            for k in (i0 + 1).max(1)..i1.min(plan.steps) {
                let (v, dv) = f.eval(k as f64 * h);
                phi[[k - 1, j]] = h * v;
                dphi[[k - 1, j]] = h * dv;
            }
        }
        Ok(Self { plan, h, functions, phi, dphi })
    }

    pub fn count(&self) -> usize {
        self.functions.len()
    }

    /// Number of interior quadrature points `Q`.
    pub fn points(&self) -> usize {
        self.phi.nrows()
    }
}

/// Symmetric quadrature `{(t* + ih, w_i)}_{i=−m..m}` with `w_i = w_{−i}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetricQuadrature {
    pub center: f64,
    pub h: f64,
    pub m: usize,
    /// `weights[i + m] = w_i`
    pub weights: Vec<f64>,
    /// Grid offsets `(n₀, n̄)` with `t* = n₀Δt`, `h = n̄Δt`, once placed on a grid.
    pub grid_offsets: Option<(usize, usize)>,
}

impl SymmetricQuadrature {
    pub fn weight(&self, i: isize) -> f64 {
        self.weights[(i + self.m as isize) as usize]
    }

    /// Support length `S = 2mh`.
    pub fn support(&self) -> f64 {
        2.0 * self.m as f64 * self.h
    }

    /// Records `(n₀, n̄)` for a grid of spacing `dt`; both must be integers.
    pub fn on_grid(mut self, dt: f64) -> Result<Self> {
        let n0 = self.center / dt;
        let nbar = self.h / dt;
        let near = |x: f64| (x - x.round()).abs() <= 1e-9 * x.abs().max(1.0);
        if !near(n0) || !near(nbar) || nbar.round() < 1.0 || n0.round() < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "center {} and spacing {} are not grid multiples of {dt}",
                self.center, self.h
            )));
        }
        self.grid_offsets = Some((n0.round() as usize, nbar.round() as usize));
        Ok(self)
    }
}

/// Trapezoid weights `h/2, h, …, h, h/2` on `2m + 1` points.
pub fn symmetric_trapezoid(t_star: f64, m: usize, h: f64) -> Result<SymmetricQuadrature> {
    if m < 1 || !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("need m ≥ 1 and h > 0, got m = {m}, h = {h}")));
    }
    let mut weights = vec![h; 2 * m + 1];
    weights[0] = 0.5 * h;
    weights[2 * m] = 0.5 * h;
    Ok(SymmetricQuadrature { center: t_star, h, m, weights, grid_offsets: None })
}

/// Point values `φ_i`, `φ'_i` of a test function on a symmetric stencil.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteTestFunction {
    pub quad: SymmetricQuadrature,
    /// `values[i + m] = φ_i`
    pub values: Vec<f64>,
    /// `derivs[i + m] = φ'_i`
    pub derivs: Vec<f64>,
}

impl DiscreteTestFunction {
    pub fn m(&self) -> usize {
        self.quad.m
    }

    /// `ψ_i = w_i φ_i`
    pub fn psi(&self) -> Vec<f64> {
        self.values.iter().zip(&self.quad.weights).map(|(v, w)| v * w).collect()
    }

    /// `ψ'_i = w_i φ'_i`
    pub fn dpsi(&self) -> Vec<f64> {
        self.derivs.iter().zip(&self.quad.weights).map(|(v, w)| v * w).collect()
    }

    /// Builds the function from weighted values `ψ`, `ψ'`.
    pub fn from_weighted(quad: SymmetricQuadrature, psi: &[f64], dpsi: &[f64]) -> Result<Self> {
        let n = 2 * quad.m + 1;
        if psi.len() != n || dpsi.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: psi.len().min(dpsi.len()) });
        }
        let values = psi.iter().zip(&quad.weights).map(|(p, w)| p / w).collect();
        let derivs = dpsi.iter().zip(&quad.weights).map(|(p, w)| p / w).collect();
        Ok(Self { quad, values, derivs })
    }

    /// Residuals of the five exactness conditions for rate `lambda`:
    /// 1. `φ_i = φ_{−i}`;
    /// 2. `φ'_i = −φ'_{−i}`;
    /// 3. `φ'_0 = 0` and `Σψ_i = 1`;
    /// 4. `Σ_{i≥1} 2ih ψ'_i = −1`;
    /// 5. `Σ_{i≥1} ψ'_i e_λ(ih) + ψ_i e'_λ(ih) = 0` (relative to the magnitude of its terms).
    pub fn condition_residuals(&self, lambda: f64) -> [f64; 5] {
        let m = self.m() as isize;
        let h = self.quad.h;
        let psi = self.psi();
        let dpsi = self.dpsi();
        let at = |v: &[f64], i: isize| v[(i + m) as usize];
        let mut r = [0.0f64; 5];
        for i in 1..=m {
            r[0] = r[0].max((at(&self.values, i) - at(&self.values, -i)).abs());
            r[1] = r[1].max((at(&self.derivs, i) + at(&self.derivs, -i)).abs());
        }
        r[2] = at(&self.derivs, 0).abs().max((psi.iter().sum::<f64>() - 1.0).abs());
        let c4: f64 = (1..=m).map(|i| 2.0 * i as f64 * h * at(&dpsi, i)).sum();
        r[3] = (c4 + 1.0).abs();
        let (mut c5, mut scale) = (0.0, 0.0);
        for i in 1..=m {
            let t = i as f64 * h;
            let a = at(&dpsi, i) * e_lambda(lambda, t);
            let b = at(&psi, i) * e_lambda_prime(lambda, t);
            c5 += a + b;
            scale += a.abs() + b.abs();
        }
        r[4] = c5.abs() / scale.max(1.0);
        r
    }

    /// Fails with [`Error::ConditionViolation`] listing every condition
    /// whose residual exceeds `tol`.
    pub fn check_conditions(&self, lambda: f64, tol: f64) -> Result<()> {
        let failures: Vec<ConditionFailure> = self
            .condition_residuals(lambda)
            .iter()
            .enumerate()
            .filter(|(_, r)| !(**r <= tol))
            .map(|(i, r)| ConditionFailure { condition: i + 1, residual: *r })
            .collect();
        if failures.is_empty() {
            Ok(())
        } else {
            Err(Error::ConditionViolation(failures))
        }
    }
}

/// The three-point test function that makes the weak estimator exact for
/// `ẋ = λx`:
/// `φ₀ = (1 − 2e_λ(h)/(S e'_λ(h)))/w₀`, `φ₁ = e_λ(h)/(w₁ S e'_λ(h))`,
/// `φ'₀ = 0`, `φ'₁ = −1/(w₁S)`, mirrored symmetrically.
pub fn three_point_testfn(lambda: f64, support: f64, quad: &SymmetricQuadrature) -> Result<DiscreteTestFunction> {
    if quad.m != 1 {
        return Err(Error::InvalidArgument(format!("three-point construction needs m = 1, got {}", quad.m)));
    }
    if !(support > 0.0) || (quad.h - 0.5 * support).abs() > 1e-12 * support {
        return Err(Error::InvalidArgument(format!("spacing {} must equal S/2 = {}", quad.h, 0.5 * support)));
    }
    let h = quad.h;
    let ep = e_lambda_prime(lambda, h);
    if ep == 0.0 {
        return Err(Error::DegenerateTestFunction(format!("e'_λ(h) vanishes for λ = {lambda}, h = {h}")));
    }
    let ratio = e_lambda(lambda, h) / (support * ep);
    let (w0, w1) = (quad.weight(0), quad.weight(1));
    let phi0 = (1.0 - 2.0 * ratio) / w0;
    let phi1 = ratio / w1;
    let dphi1 = -1.0 / (w1 * support);
    Ok(DiscreteTestFunction {
        quad: quad.clone(),
        values: vec![phi1, phi0, phi1],
        derivs: vec![-dphi1, 0.0, dphi1],
    })
}

/// A test function on any symmetric stencil that satisfies the five
/// exactness conditions for rate `lambda`. The weighted values `ψ_i`, `ψ'_i`
/// for `i = 2..=m` are free and taken from `tail_psi`, `tail_dpsi`; `ψ'_1`,
/// `ψ_1` and `ψ_0` are then solved from conditions 4, 5 and 3. With `m = 1`
/// this reproduces [`three_point_testfn`].
pub fn exact_testfn(
    lambda: f64,
    quad: &SymmetricQuadrature,
    tail_psi: &[f64],
    tail_dpsi: &[f64],
) -> Result<DiscreteTestFunction> {
    let m = quad.m;
    if tail_psi.len() + 1 != m || tail_dpsi.len() + 1 != m {
        return Err(Error::DimensionMismatch { expected: m - 1, got: tail_psi.len().min(tail_dpsi.len()) });
    }
    let h = quad.h;
    let ep1 = e_lambda_prime(lambda, h);
    if ep1 == 0.0 {
        return Err(Error::DegenerateTestFunction(format!("e'_λ(h) vanishes for λ = {lambda}, h = {h}")));
    }
    let tail = |i: usize| (tail_psi[i - 2], tail_dpsi[i - 2]);
    let moment: f64 = (2..=m).map(|i| 2.0 * i as f64 * h * tail(i).1).sum();
    let dpsi1 = (-1.0 - moment) / (2.0 * h);
    let cross: f64 = (2..=m)
        .map(|i| {
            let t = i as f64 * h;
            tail(i).1 * e_lambda(lambda, t) + tail(i).0 * e_lambda_prime(lambda, t)
        })
        .sum();
    let psi1 = -(dpsi1 * e_lambda(lambda, h) + cross) / ep1;
    let psi0 = 1.0 - 2.0 * (psi1 + tail_psi.iter().sum::<f64>());
    let mut psi = vec![0.0; 2 * m + 1];
    let mut dpsi = vec![0.0; 2 * m + 1];
    psi[m] = psi0;
    for i in 1..=m {
        let (p, dp) = if i == 1 { (psi1, dpsi1) } else { tail(i) };
        psi[m + i] = p;
        psi[m - i] = p;
        dpsi[m + i] = dp;
        dpsi[m - i] = -dp;
    }
    DiscreteTestFunction::from_weighted(quad.clone(), &psi, &dpsi)
}
