//! Strong- and weak-form losses under a state-wise weighted norm.
//!
//! Matrices follow the column convention of the weak system: data `Y` and
//! field values `F` are `d × Q`, one column per interior quadrature point,
//! and the residual `YΦ̇ + FΦ` is `d × J`, one column per test function.

use ndarray::{s, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::testfn::{PlacementPlan, TestFunctionSet};
use crate::trajectory::{Dynamics, OneStep, StateStats, TrajectoryDataset};
use crate::{Error, Result};

/// Positive diagonal weights of the quadratic form `‖x‖²_W = Σ w_ℓ x_ℓ²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightMatrix {
    entries: Vec<f64>,
}

impl WeightMatrix {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.is_empty() || entries.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
            return Err(Error::InvalidArgument(format!("weights must be positive and finite, got {entries:?}")));
        }
        Ok(Self { entries })
    }

    pub fn identity(d: usize) -> Self {
        Self { entries: vec![1.0; d] }
    }

    /// `w_ℓ = 1/σ_ℓ`.
    pub fn from_stats(stats: &StateStats) -> Result<Self> {
        Self::new(stats.std.iter().map(|s| 1.0 / s).collect())
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    fn check(&self, d: usize) -> Result<()> {
        if d != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: d });
        }
        Ok(())
    }
}

/// `√(Σ w_ℓ x_ℓ²)`
pub fn w_norm(x: &[f64], w: &WeightMatrix) -> Result<f64> {
    w.check(x.len())?;
    Ok(x.iter().zip(&w.entries).map(|(v, wl)| wl * v * v).sum::<f64>().sqrt())
}

/// `(1/N)Σ_i (1/K)Σ_{k=1}^{K} (1/d)‖x̂_k − y_k‖²_W` where `x̂_k` advances
/// `y_{k−1}` by one step of `step`.
pub fn strong_loss<D: Dynamics + ?Sized>(model: &D, data: &TrajectoryDataset, w: &WeightMatrix, step: OneStep) -> Result<f64> {
    let d = data.dim();
    w.check(d)?;
    if model.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, got: model.dim() });
    }
    let dt = data.grid().dt;
    let k = data.grid().steps;
    if k < 1 {
        return Err(Error::InvalidArgument("strong loss needs at least one step".into()));
    }
    let mut total = 0.0;
    for traj in data.trajectories() {
        let mut sum = 0.0;
        for i in 1..=k {
            let prev = traj.row(i - 1).to_vec();
            let pred = step.advance(model, &prev, dt);
            sum += pred
                .iter()
                .zip(traj.row(i))
                .zip(&w.entries)
                .map(|((p, y), wl)| wl * (p - y).powi(2))
                .sum::<f64>();
        }
        total += sum / (k as f64 * d as f64);
    }
    Ok(total / data.len() as f64)
}

/// Weak-form matrices of one trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct WeakSystem {
    /// `Q × J`, `h·φ_j(s_q)`
    pub phi: Array2<f64>,
    /// `Q × J`, `h·φ'_j(s_q)`
    pub dphi: Array2<f64>,
    /// `d × Q`, columns `y_{n̄}, …, y_{n̄Q}`
    pub y: Array2<f64>,
    pub nbar: usize,
    pub h: f64,
}

impl WeakSystem {
    pub fn points(&self) -> usize {
        self.phi.nrows()
    }

    pub fn count(&self) -> usize {
        self.phi.ncols()
    }

    pub fn dim(&self) -> usize {
        self.y.nrows()
    }

    /// Grid indices `n̄, 2n̄, …, Qn̄` of the quadrature points.
    pub fn sample_indices(&self) -> Vec<usize> {
        (1..=self.points()).map(|q| q * self.nbar).collect()
    }

    /// `YΦ̇ + FΦ`, `d × J`.
    pub fn residual(&self, field: ArrayView2<f64>) -> Result<Array2<f64>> {
        if field.dim() != self.y.dim() {
            return Err(Error::DimensionMismatch { expected: self.y.len(), got: field.len() });
        }
        Ok(self.y.dot(&self.dphi) + field.dot(&self.phi))
    }
}

/// Builds the weak system of a `(K + 1) × d` trajectory sampled every `dt`,
/// with the test functions of `set` living on the grid subsampled by `nbar`.
pub fn assemble_weak(traj: ArrayView2<f64>, dt: f64, set: &TestFunctionSet, nbar: usize) -> Result<WeakSystem> {
    if nbar == 0 {
        return Err(Error::InvalidArgument("subsampling factor must be at least 1".into()));
    }
    let steps = traj.nrows().saturating_sub(1) / nbar;
    if let Some(&(start, end)) = set.plan.supports.iter().find(|(_, e)| *e > steps) {
        return Err(Error::SupportOutOfRange { start, end, last: steps });
    }
    if set.plan.steps > steps {
        return Err(Error::SupportOutOfRange { start: 0, end: set.plan.steps, last: steps });
    }
    let h = nbar as f64 * dt;
    if (set.h - h).abs() > 1e-12 * h {
        return Err(Error::InvalidArgument(format!("test functions tabulated with spacing {}, grid gives {h}", set.h)));
    }
    let q = set.points();
    let y = traj.slice(s![nbar..=q * nbar;nbar, ..]).t().to_owned();
    Ok(WeakSystem { phi: set.phi.clone(), dphi: set.dphi.clone(), y, nbar, h })
}

/// Tabulates `plan` on the subsampled grid and assembles every trajectory.
pub fn assemble_dataset(data: &TrajectoryDataset, plan: &PlacementPlan, nbar: usize) -> Result<Vec<WeakSystem>> {
    let set = TestFunctionSet::tabulate(plan.clone(), nbar as f64 * data.grid().dt)?;
    data.trajectories()
        .iter()
        .map(|t| assemble_weak(t.view(), data.grid().dt, &set, nbar))
        .collect()
}

/// `(1/(J·d·N))·Σ_i ‖Y⁽ⁱ⁾Φ̇ + F⁽ⁱ⁾Φ‖²_W` with `fields[i]` the `d × Q` field
/// values at the quadrature points of system `i`.
pub fn weak_loss(systems: &[WeakSystem], fields: &[Array2<f64>], w: &WeightMatrix) -> Result<f64> {
    if systems.is_empty() || systems.len() != fields.len() {
        return Err(Error::DimensionMismatch { expected: systems.len(), got: fields.len() });
    }
    let mut total = 0.0;
    for (sys, f) in systems.iter().zip(fields) {
        w.check(sys.dim())?;
        let r = sys.residual(f.view())?;
        for (row, wl) in r.rows().into_iter().zip(&w.entries) {
            total += wl * row.iter().map(|v| v * v).sum::<f64>();
        }
    }
    let s0 = &systems[0];
    Ok(total / (s0.count() * s0.dim() * systems.len()) as f64)
}

/// Discrete trajectory-consistency residual of two trajectories with the
/// fields evaluated along them (`d × Q` each, same quadrature points).
///
/// Entry `j` is `‖Y_aΦ̇_j + F_bΦ_j‖ + ‖Y_bΦ̇_j + F_aΦ_j‖`: each trajectory is
/// tested against the other's field. It is at quadrature-error level when
/// both trajectories solve the same dynamics and the fields agree along
/// them, and bounded away from zero otherwise.
pub fn consistency_residual(
    sys_a: &WeakSystem,
    sys_b: &WeakSystem,
    field_a: ArrayView2<f64>,
    field_b: ArrayView2<f64>,
) -> Result<Vec<f64>> {
    if sys_a.phi != sys_b.phi || sys_a.y.dim() != sys_b.y.dim() {
        return Err(Error::InvalidArgument("trajectories are not on the same quadrature grid".into()));
    }
    let ab = sys_a.residual(field_b)?;
    let ba = sys_b.residual(field_a)?;
    let norm = |m: &Array2<f64>, j: usize| m.column(j).iter().map(|v| v * v).sum::<f64>().sqrt();
    Ok((0..sys_a.count()).map(|j| norm(&ab, j) + norm(&ba, j)).collect())
}
