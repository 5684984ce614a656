use nalgebra::DMatrix;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{integrate, Dynamics, Method, TimeGrid, TrajectoryDataset};
use crate::genericnet::{GenericStructure, GenericTerms};
use crate::{Error, Result};

/// Linearly damped oscillator coupled to a heat bath, state `(q, p, S)`.
///
/// `E = (q² + p²)/2 + S`, entropy `S`, `L` the canonical symplectic block
/// and `M = ζ·[[0,0,0],[0,1,-p],[0,-p,p²]]`, giving
/// `q̇ = p`, `ṗ = -q - ζp`, `Ṡ = ζp²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DampedOscillator {
    pub zeta: f64,
}

pub fn damped_oscillator_benchmark(zeta: f64) -> Result<DampedOscillator> {
    if !(zeta >= 0.0) || !zeta.is_finite() {
        return Err(Error::InvalidArgument(format!("damping must be non-negative, got {zeta}")));
    }
    Ok(DampedOscillator { zeta })
}

impl DampedOscillator {
    pub fn energy(&self, x: &[f64]) -> f64 {
        0.5 * (x[0] * x[0] + x[1] * x[1]) + x[2]
    }

    pub fn entropy(&self, x: &[f64]) -> f64 {
        x[2]
    }

    /// Integrates every initial state on `grid` and bundles the results.
    pub fn dataset(&self, initial: &[[f64; 3]], grid: &TimeGrid, method: &Method) -> Result<TrajectoryDataset> {
        let trajs = initial
            .iter()
            .map(|x0| integrate(self, x0, grid, method))
            .collect::<Result<Vec<Array2<f64>>>>()?;
        TrajectoryDataset::new(*grid, trajs)
    }
}

impl Dynamics for DampedOscillator {
    fn dim(&self) -> usize {
        3
    }

    fn eval(&self, x: &[f64], dx: &mut [f64]) {
        let (q, p) = (x[0], x[1]);
        dx[0] = p;
        dx[1] = -q - self.zeta * p;
        dx[2] = self.zeta * p * p;
    }
}

impl GenericStructure for DampedOscillator {
    fn dim(&self) -> usize {
        3
    }

    fn terms(&self, x: &[f64]) -> GenericTerms {
        let p = x[1];
        let z = self.zeta;
        GenericTerms {
            energy: self.energy(x),
            entropy: self.entropy(x),
            grad_energy: vec![x[0], p, 1.0],
            grad_entropy: vec![0.0, 0.0, 1.0],
            poisson: DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.0, 0.0]),
            friction: DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 0.0, 0.0, z, -z * p, 0.0, -z * p, z * p * p]),
        }
    }
}

/// Initial states drawn uniformly from `q ∈ [0.5, 1.5]`, `p ∈ [-0.5, 0.5]`, `S = 0`.
pub fn sample_initial_states(n: usize, seed: u64) -> Vec<[f64; 3]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| [rng.random_range(0.5..1.5), rng.random_range(-0.5..0.5), 0.0])
        .collect()
}
