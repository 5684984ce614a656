//! Dynamics, integration, noisy datasets and per-state statistics.

mod benchmark;
mod dataset;
mod grid;
mod integrate;
pub mod io;

pub use benchmark::{damped_oscillator_benchmark, sample_initial_states, DampedOscillator};
pub use dataset::{add_noise, counter_normal, normal_vector, state_std, StateStats, TrajectoryDataset};
pub use grid::TimeGrid;
pub use integrate::{bs3_step, euler_step, integrate, Method, OneStep, Rk23Options};

/// An autonomous vector field `ẋ = f(x)`.
pub trait Dynamics {
    fn dim(&self) -> usize;

    /// Writes `f(x)` into `dx`.
    fn eval(&self, x: &[f64], dx: &mut [f64]);

    /// Exact flow map `x(t; x0)`, when one is known.
    fn flow(&self, _t: f64, _x0: &[f64]) -> Option<Vec<f64>> {
        None
    }
}

impl<D: Dynamics + ?Sized> Dynamics for &D {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn eval(&self, x: &[f64], dx: &mut [f64]) {
        (**self).eval(x, dx)
    }
    fn flow(&self, t: f64, x0: &[f64]) -> Option<Vec<f64>> {
        (**self).flow(t, x0)
    }
}

/// Scalar linear dynamics `ẋ = λx`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearSystem {
    pub rate: f64,
}

impl Dynamics for LinearSystem {
    fn dim(&self) -> usize {
        1
    }

    fn eval(&self, x: &[f64], dx: &mut [f64]) {
        dx[0] = self.rate * x[0];
    }

    fn flow(&self, t: f64, x0: &[f64]) -> Option<Vec<f64>> {
        Some(vec![linear_solution(self.rate, x0[0], t)])
    }
}

/// Wraps a closure as [`Dynamics`].
pub struct FnDynamics<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&[f64], &mut [f64])> FnDynamics<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F: Fn(&[f64], &mut [f64])> Dynamics for FnDynamics<F> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, x: &[f64], dx: &mut [f64]) {
        (self.f)(x, dx)
    }
}

/// `x0·e^{λt}`.
pub fn linear_solution(rate: f64, x0: f64, t: f64) -> f64 {
    x0 * (rate * t).exp()
}
