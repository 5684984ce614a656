use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Uniform grid `t_i = t0 + i·dt`, `i = 0..=steps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t0: f64,
    pub dt: f64,
    pub steps: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, dt: f64, steps: usize) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
        }
        if steps == 0 {
            return Err(Error::InvalidArgument("grid needs at least one step".into()));
        }
        if !t0.is_finite() {
            return Err(Error::InvalidArgument("grid origin must be finite".into()));
        }
        Ok(Self { t0, dt, steps })
    }

    /// Number of grid points, `steps + 1`.
    pub fn len(&self) -> usize {
        self.steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    // Computed directly rather than by accumulation so point i never drifts.
    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    pub fn end(&self) -> f64 {
        self.time(self.steps)
    }

    pub fn span(&self) -> f64 {
        self.steps as f64 * self.dt
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(|i| self.time(i))
    }
}
