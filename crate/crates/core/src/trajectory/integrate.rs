use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{Dynamics, TimeGrid};
use crate::{Error, Result};

/// Tolerances for the adaptive Bogacki–Shampine integrator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rk23Options {
    pub rtol: f64,
    pub atol: f64,
    /// Smallest admissible step; falling below it aborts with
    /// [`Error::StepSizeUnderflow`].
    pub min_step: f64,
}

impl Default for Rk23Options {
    fn default() -> Self {
        Self { rtol: 1e-6, atol: 1e-9, min_step: 1e-12 }
    }
}

impl Rk23Options {
    pub fn with_tol(rtol: f64, atol: f64) -> Self {
        Self { rtol, atol, ..Self::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Method {
    ForwardEuler,
    Rk23(Rk23Options),
}

impl Default for Method {
    fn default() -> Self {
        Method::Rk23(Rk23Options::default())
    }
}

/// Fixed single-step maps used for one-step predictions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OneStep {
    #[default]
    Euler,
    /// One Bogacki–Shampine step, see [`bs3_step`].
    Rk23,
}

impl OneStep {
    pub fn advance<D: Dynamics + ?Sized>(self, dyn_: &D, x: &[f64], h: f64) -> Vec<f64> {
        match self {
            OneStep::Euler => euler_step(dyn_, x, h),
            OneStep::Rk23 => bs3_step(dyn_, x, h),
        }
    }
}

/// `x + h·f(x)`.
pub fn euler_step<D: Dynamics + ?Sized>(dyn_: &D, x: &[f64], h: f64) -> Vec<f64> {
    let mut f = vec![0.0; x.len()];
    dyn_.eval(x, &mut f);
    x.iter().zip(&f).map(|(xi, fi)| xi + h * fi).collect()
}

/// One fixed Bogacki–Shampine step of size `h` (third-order solution).
pub fn bs3_step<D: Dynamics + ?Sized>(dyn_: &D, x: &[f64], h: f64) -> Vec<f64> {
    let n = x.len();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    dyn_.eval(x, &mut k1);
    for i in 0..n {
        tmp[i] = x[i] + 0.5 * h * k1[i];
    }
    dyn_.eval(&tmp, &mut k2);
    for i in 0..n {
        tmp[i] = x[i] + 0.75 * h * k2[i];
    }
    dyn_.eval(&tmp, &mut k3);
    (0..n)
        .map(|i| x[i] + h * (2.0 * k1[i] + 3.0 * k2[i] + 4.0 * k3[i]) / 9.0)
        .collect()
}

/// Integrates from `x0` at `grid.t0` and returns the state at every grid
/// point as a `(steps + 1) × d` array.
pub fn integrate<D: Dynamics + ?Sized>(
    dyn_: &D,
    x0: &[f64],
    grid: &TimeGrid,
    method: &Method,
) -> Result<Array2<f64>> {
    let d = dyn_.dim();
    if x0.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: x0.len() });
    }
    let mut out = Array2::zeros((grid.len(), d));
    out.row_mut(0).iter_mut().zip(x0).for_each(|(o, v)| *o = *v);
    match method {
        Method::ForwardEuler => {
            let mut x = x0.to_vec();
            for k in 1..grid.len() {
                x = euler_step(dyn_, &x, grid.dt);
                out.row_mut(k).iter_mut().zip(&x).for_each(|(o, v)| *o = *v);
            }
        }
        Method::Rk23(opts) => {
            let mut solver = Bs23::new(dyn_, x0, grid.t0, *opts);
            for k in 1..grid.len() {
                solver.advance_to(grid.time(k))?;
                out.row_mut(k).iter_mut().zip(&solver.y).for_each(|(o, v)| *o = *v);
            }
        }
    }
    Ok(out)
}

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 5.0;
// PI controller exponents for an embedded pair of order 2(3).
const ALPHA: f64 = 0.7 / 3.0;
const BETA: f64 = 0.4 / 3.0;

struct Bs23<'a, D: ?Sized> {
    dyn_: &'a D,
    opts: Rk23Options,
    t: f64,
    y: Vec<f64>,
    f: Vec<f64>,
    h: f64,
    err_prev: f64,
}

impl<'a, D: Dynamics + ?Sized> Bs23<'a, D> {
    fn new(dyn_: &'a D, x0: &[f64], t0: f64, opts: Rk23Options) -> Self {
        let mut f = vec![0.0; x0.len()];
        dyn_.eval(x0, &mut f);
        Self { dyn_, opts, t: t0, y: x0.to_vec(), f, h: 0.0, err_prev: 1e-4 }
    }

    fn rms_scaled(&self, v: &[f64], a: &[f64], b: &[f64]) -> f64 {
        let n = v.len().max(1) as f64;
        let s: f64 = v
            .iter()
            .zip(a.iter().zip(b))
            .map(|(vi, (ai, bi))| {
                let sc = self.opts.atol + self.opts.rtol * ai.abs().max(bi.abs());
                (vi / sc).powi(2)
            })
            .sum();
        (s / n).sqrt()
    }

    fn initial_step(&self, span: f64) -> f64 {
        let d0 = self.rms_scaled(&self.y, &self.y, &self.y);
        let d1 = self.rms_scaled(&self.f, &self.y, &self.y);
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        let h0 = h0.min(span);
        let y1: Vec<f64> = self.y.iter().zip(&self.f).map(|(y, f)| y + h0 * f).collect();
        let mut f1 = vec![0.0; y1.len()];
        self.dyn_.eval(&y1, &mut f1);
        let df: Vec<f64> = f1.iter().zip(&self.f).map(|(a, b)| (a - b) / h0).collect();
        let d2 = self.rms_scaled(&df, &self.y, &self.y);
        let h1 = if d1 <= 1e-15 && d2 <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(1.0 / 3.0)
        };
        (100.0 * h0).min(h1).min(span)
    }

    fn advance_to(&mut self, t_end: f64) -> Result<()> {
        if self.h == 0.0 {
            self.h = self.initial_step(t_end - self.t);
        }
        let n = self.y.len();
        let mut k2 = vec![0.0; n];
        let mut k3 = vec![0.0; n];
        let mut k4 = vec![0.0; n];
        let mut tmp = vec![0.0; n];
        let mut y_new = vec![0.0; n];
        let mut err = vec![0.0; n];
        let mut rejected = false;
        while self.t < t_end {
            let remaining = t_end - self.t;
            let last = self.h >= remaining * (1.0 - 1e-12);
            let h = if last { remaining } else { self.h };
            if h < self.opts.min_step && !last {
                return Err(Error::StepSizeUnderflow { t: self.t, step: h, floor: self.opts.min_step });
            }
            let k1 = &self.f;
            for i in 0..n {
                tmp[i] = self.y[i] + 0.5 * h * k1[i];
            }
            self.dyn_.eval(&tmp, &mut k2);
            for i in 0..n {
                tmp[i] = self.y[i] + 0.75 * h * k2[i];
            }
            self.dyn_.eval(&tmp, &mut k3);
            for i in 0..n {
                y_new[i] = self.y[i] + h * (2.0 * k1[i] + 3.0 * k2[i] + 4.0 * k3[i]) / 9.0;
            }
            self.dyn_.eval(&y_new, &mut k4);
            for i in 0..n {
                err[i] = h
                    * (-5.0 / 72.0 * k1[i] + 1.0 / 12.0 * k2[i] + 1.0 / 9.0 * k3[i] - 0.125 * k4[i]);
            }
            let en = self.rms_scaled(&err, &self.y, &y_new);
            if !en.is_finite() {
                self.h = h * MIN_FACTOR;
                rejected = true;
                if self.h < self.opts.min_step {
                    return Err(Error::StepSizeUnderflow { t: self.t, step: self.h, floor: self.opts.min_step });
                }
                continue;
            }
            if en <= 1.0 {
                let factor = if en == 0.0 {
                    MAX_FACTOR
                } else {
                    (SAFETY * en.powf(-ALPHA) * self.err_prev.powf(BETA)).clamp(MIN_FACTOR, MAX_FACTOR)
                };
                let factor = if rejected { factor.min(1.0) } else { factor };
                self.t = if last { t_end } else { self.t + h };
                std::mem::swap(&mut self.y, &mut y_new);
                std::mem::swap(&mut self.f, &mut k4);
                self.err_prev = en.max(1e-4);
                // a step clipped to land on the grid should not shrink the
                // proposal for the next interval
                self.h = if last { (h * factor).max(self.h.min(h * MAX_FACTOR)) } else { h * factor };
                rejected = false;
            } else {
                self.h = h * (SAFETY * en.powf(-1.0 / 3.0)).max(MIN_FACTOR);
                rejected = true;
                if self.h < self.opts.min_step {
                    return Err(Error::StepSizeUnderflow { t: self.t, step: self.h, floor: self.opts.min_step });
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajectory::{FnDynamics, LinearSystem};

    #[test]
    fn euler_single_step_on_linear_decay() {
        let sys = LinearSystem { rate: -2.0 };
        let g = TimeGrid::new(0.0, 0.1, 1).unwrap();
        let tr = integrate(&sys, &[1.0], &g, &Method::ForwardEuler).unwrap();
        assert_eq!(tr[[1, 0]], 1.0 + (-2.0) * 0.1);
        assert!((tr[[1, 0]] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn euler_reproduces_power_law() {
        let lam = -1.3;
        let dt = 0.05;
        let sys = LinearSystem { rate: lam };
        let g = TimeGrid::new(0.0, dt, 40).unwrap();
        let tr = integrate(&sys, &[2.0], &g, &Method::ForwardEuler).unwrap();
        let mut x = 2.0;
        for k in 1..=40 {
            // same evaluation order as the integrator: x + h·(λx)
            x = x + dt * (lam * x);
            assert_eq!(tr[[k, 0]], x);
            assert!((x - 2.0 * (1.0 + lam * dt).powi(k as i32)).abs() < 1e-13);
        }
    }

    #[test]
    fn zero_field_is_constant() {
        let z = FnDynamics::new(3, |_x: &[f64], dx: &mut [f64]| dx.fill(0.0));
        let g = TimeGrid::new(0.0, 0.25, 8).unwrap();
        for m in [Method::ForwardEuler, Method::default()] {
            let tr = integrate(&z, &[1.0, -2.0, 0.5], &g, &m).unwrap();
            for row in tr.rows() {
                assert_eq!(row.to_vec(), vec![1.0, -2.0, 0.5]);
            }
        }
    }

    #[test]
    fn rk23_matches_analytic_decay() {
        let sys = LinearSystem { rate: -2.0 };
        let g = TimeGrid::new(0.0, 0.1, 10).unwrap();
        let tr = integrate(&sys, &[1.0], &g, &Method::Rk23(Rk23Options::with_tol(1e-8, 1e-10))).unwrap();
        assert!((tr[[10, 0]] - (-2.0f64).exp()).abs() < 1e-6);
        for k in 0..=10 {
            let exact = sys.flow(g.time(k), &[1.0]).unwrap()[0];
            assert!((tr[[k, 0]] - exact).abs() < 1e-6);
        }
    }

    #[test]
    fn rk23_error_shrinks_with_tolerance() {
        let sys = LinearSystem { rate: -2.0 };
        let g = TimeGrid::new(0.0, 1.0, 1).unwrap();
        let errs: Vec<f64> = [1e-4, 1e-5, 1e-6, 1e-7]
            .iter()
            .map(|&tol| {
                let tr = integrate(&sys, &[1.0], &g, &Method::Rk23(Rk23Options::with_tol(tol, tol * 1e-3))).unwrap();
                (tr[[1, 0]] - (-2.0f64).exp()).abs()
            })
            .collect();
        for w in errs.windows(2) {
            assert!(w[1] < w[0] / 2.0, "{errs:?}");
        }
    }

    #[test]
    fn fixed_bs3_converges_at_least_second_order() {
        let sys = LinearSystem { rate: -2.0 };
        let err = |n: usize| {
            let h = 1.0 / n as f64;
            let mut x = vec![1.0];
            for _ in 0..n {
                x = bs3_step(&sys, &x, h);
            }
            (x[0] - (-2.0f64).exp()).abs()
        };
        let (e1, e2) = (err(20), err(40));
        let order = (e1 / e2).log2();
        assert!(order >= 2.0, "observed order {order}");
    }

    #[test]
    fn stiff_blowup_reports_underflow() {
        // finite-time blow-up: ẋ = x², x(0) = 1 explodes at t = 1
        let sys = FnDynamics::new(1, |x: &[f64], dx: &mut [f64]| dx[0] = x[0] * x[0]);
        let g = TimeGrid::new(0.0, 0.5, 4).unwrap();
        let r = integrate(&sys, &[1.0], &g, &Method::Rk23(Rk23Options { min_step: 1e-6, ..Default::default() }));
        assert!(matches!(r, Err(Error::StepSizeUnderflow { .. })), "{r:?}");
    }

    #[test]
    fn dimension_checked() {
        let sys = LinearSystem { rate: 1.0 };
        let g = TimeGrid::new(0.0, 0.1, 2).unwrap();
        assert!(matches!(
            integrate(&sys, &[1.0, 2.0], &g, &Method::ForwardEuler),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
