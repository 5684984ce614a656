use ndarray::Array2;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::TimeGrid;
use crate::{Error, Result};

/// Population mean and standard deviation of each state over all
/// trajectories and time points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateStats {
    pub std: Vec<f64>,
    pub mean: Vec<f64>,
}

/// A set of trajectories sharing one time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryDataset {
    grid: TimeGrid,
    trajectories: Vec<Array2<f64>>,
    noise_level: f64,
    stats: StateStats,
}

impl TrajectoryDataset {
    /// Each trajectory is a `(steps + 1) × d` array on `grid`.
    pub fn new(grid: TimeGrid, trajectories: Vec<Array2<f64>>) -> Result<Self> {
        let first = trajectories
            .first()
            .ok_or_else(|| Error::InvalidArgument("dataset needs at least one trajectory".into()))?;
        let d = first.ncols();
        if d == 0 {
            return Err(Error::InvalidArgument("trajectories must have at least one state".into()));
        }
        for tr in &trajectories {
            if tr.nrows() != grid.len() {
                return Err(Error::DimensionMismatch { expected: grid.len(), got: tr.nrows() });
            }
            if tr.ncols() != d {
                return Err(Error::DimensionMismatch { expected: d, got: tr.ncols() });
            }
        }
        let stats = population_stats(&trajectories);
        Ok(Self { grid, trajectories, noise_level: 0.0, stats })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn trajectories(&self) -> &[Array2<f64>] {
        &self.trajectories
    }

    pub fn trajectory(&self, i: usize) -> &Array2<f64> {
        &self.trajectories[i]
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.trajectories[0].ncols()
    }

    /// Relative noise level ρ the dataset was corrupted with (0 for clean data).
    pub fn noise_level(&self) -> f64 {
        self.noise_level
    }

    pub fn std(&self) -> &[f64] {
        &self.stats.std
    }

    pub fn mean(&self) -> &[f64] {
        &self.stats.mean
    }

    /// Keeps the trajectories selected by `idx`, in that order.
    pub fn subset(&self, idx: &[usize]) -> Result<Self> {
        let trajs = idx.iter().map(|&i| self.trajectories[i].clone()).collect();
        let mut out = Self::new(self.grid, trajs)?;
        out.noise_level = self.noise_level;
        Ok(out)
    }
}

fn population_stats(trajectories: &[Array2<f64>]) -> StateStats {
    let d = trajectories[0].ncols();
    let n: usize = trajectories.iter().map(|t| t.nrows()).sum();
    let mut mean = vec![0.0; d];
    for tr in trajectories {
        for row in tr.rows() {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut var = vec![0.0; d];
    for tr in trajectories {
        for row in tr.rows() {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
    }
    let std = var.into_iter().map(|s| (s / n as f64).sqrt()).collect();
    StateStats { std, mean }
}

/// Per-state population statistics; fails if any state is constant.
pub fn state_std(data: &TrajectoryDataset) -> Result<StateStats> {
    let total: usize = data.trajectories.iter().map(|t| t.nrows()).sum();
    if total < 2 {
        return Err(Error::DegenerateData("need at least two samples for a standard deviation".into()));
    }
    let stats = population_stats(&data.trajectories);
    if let Some(index) = stats.std.iter().position(|&s| s == 0.0) {
        return Err(Error::DegenerateState { index });
    }
    Ok(stats)
}

/// Standard normal variate addressed by `(seed, stream, index)`.
///
/// The value depends only on the key, so datasets can be generated in any
/// order or in parallel and still be reproducible.
pub fn counter_normal(seed: u64, stream: u64, index: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    normal_at(&mut rng, index)
}

/// The first `n` variates of stream `(seed, stream)`; entry `i` equals
/// `counter_normal(seed, stream, i)`.
pub fn normal_vector(seed: u64, stream: u64, n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    (0..n as u64).map(|i| normal_at(&mut rng, i)).collect()
}

fn normal_at(rng: &mut ChaCha8Rng, index: u64) -> f64 {
    // two u64 draws per variate = four 32-bit words
    rng.set_word_pos(index as u128 * 4);
    let a = rng.next_u64();
    let b = rng.next_u64();
    let u1 = ((a >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
    let u2 = (b >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Adds independent `N(0, (ρσ_ℓ)²)` noise to every sample, with `σ_ℓ` taken
/// from the input dataset's statistics. Statistics of the result are
/// recomputed from the noisy samples.
pub fn add_noise(data: &TrajectoryDataset, rho: f64, rng_seed: u64) -> Result<TrajectoryDataset> {
    if !(rho >= 0.0) || !rho.is_finite() {
        return Err(Error::InvalidArgument(format!("noise level must be non-negative, got {rho}")));
    }
    if rho == 0.0 {
        return Ok(data.clone());
    }
    let d = data.dim();
    let sigma: Vec<f64> = data.std().iter().map(|s| rho * s).collect();
    let mut base = ChaCha8Rng::seed_from_u64(rng_seed);
    let trajs = data
        .trajectories
        .iter()
        .enumerate()
        .map(|(i, tr)| {
            base.set_stream(i as u64);
            let mut out = tr.clone();
            for ((k, l), v) in out.indexed_iter_mut() {
                *v += sigma[l] * normal_at(&mut base, (k * d + l) as u64);
            }
            out
        })
        .collect();
    let mut noisy = TrajectoryDataset::new(data.grid, trajs)?;
    noisy.noise_level = rho;
    Ok(noisy)
}
