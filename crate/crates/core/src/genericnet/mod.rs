//! GENERIC-structured models.
//!
//! A GENERIC system evolves as `ẋ = L(x)∇E(x) + M(x)∇S(x)` with `L` skew,
//! `M` symmetric positive semidefinite, and the degeneracy conditions
//! `L∇S = 0`, `M∇E = 0`. Together they make `E` a conserved quantity and
//! `S` non-decreasing along every trajectory.
//!
//! [`GenericModel`] satisfies all of these for every parameter value by
//! building `L` and `M` from Q-matrices whose rows `(A_i∇h)ᵀ` are
//! orthogonal to `∇h`.

mod checkpoint;
mod dense;
mod model;
pub mod tape;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use dense::DenseNet;
pub use model::{batch, q_matrix, GenericModel, ModelConfig, TapeField};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

/// Energy, entropy, their gradients and the two operators at one state.
#[derive(Debug, Clone, PartialEq)]
pub struct GenericTerms {
    pub energy: f64,
    pub entropy: f64,
    pub grad_energy: Vec<f64>,
    pub grad_entropy: Vec<f64>,
    /// `L(x)`
    pub poisson: DMatrix<f64>,
    /// `M(x)`
    pub friction: DMatrix<f64>,
}

impl GenericTerms {
    /// `L∇E + M∇S`
    pub fn field(&self) -> Vec<f64> {
        let ge = DVector::from_column_slice(&self.grad_energy);
        let gs = DVector::from_column_slice(&self.grad_entropy);
        (&self.poisson * ge + &self.friction * gs).iter().copied().collect()
    }
}

/// Anything that exposes GENERIC building blocks pointwise.
pub trait GenericStructure {
    fn dim(&self) -> usize;
    fn terms(&self, x: &[f64]) -> GenericTerms;
}

/// Worst-case violations of the GENERIC constraints over a point set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DegeneracyReport {
    /// `max ‖L∇S‖∞`
    pub poisson_entropy: f64,
    /// `max ‖M∇E‖∞`
    pub friction_energy: f64,
    /// `max ‖L + Lᵀ‖∞`
    pub poisson_skew: f64,
    /// `max ‖M − Mᵀ‖∞`
    pub friction_symmetry: f64,
    /// Smallest eigenvalue of `M` seen.
    pub min_eig_friction: f64,
}

impl DegeneracyReport {
    /// Largest of the four residuals (the eigenvalue bound excluded).
    pub fn max_residual(&self) -> f64 {
        self.poisson_entropy.max(self.friction_energy).max(self.poisson_skew).max(self.friction_symmetry)
    }
}

pub fn degeneracy_report<G: GenericStructure + ?Sized>(model: &G, points: &[Vec<f64>]) -> DegeneracyReport {
    let mut r = DegeneracyReport {
        poisson_entropy: 0.0,
        friction_energy: 0.0,
        poisson_skew: 0.0,
        friction_symmetry: 0.0,
        min_eig_friction: f64::INFINITY,
    };
    for x in points {
        let t = model.terms(x);
        let ge = DVector::from_column_slice(&t.grad_energy);
        let gs = DVector::from_column_slice(&t.grad_entropy);
        r.poisson_entropy = r.poisson_entropy.max((&t.poisson * gs).amax());
        r.friction_energy = r.friction_energy.max((&t.friction * ge).amax());
        r.poisson_skew = r.poisson_skew.max((&t.poisson + t.poisson.transpose()).amax());
        r.friction_symmetry = r.friction_symmetry.max((&t.friction - t.friction.transpose()).amax());
        let eig = SymmetricEigen::new(t.friction.clone()).eigenvalues.min();
        r.min_eig_friction = r.min_eig_friction.min(eig);
    }
    if points.is_empty() {
        r.min_eig_friction = 0.0;
    }
    r
}
