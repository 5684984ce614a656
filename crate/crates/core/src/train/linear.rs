use ndarray::Array2;

use super::TrainableField;
use crate::genericnet::tape::{Tape, Var};
use crate::trajectory::Dynamics;

/// Linear vector field `f(x) = Θx` with a dense `d × d` matrix `Θ`,
/// stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    dim: usize,
    params: Vec<f64>,
}

impl LinearModel {
    pub fn new(dim: usize, params: Vec<f64>) -> Self {
        assert_eq!(params.len(), dim * dim, "Θ must be d × d");
        Self { dim, params }
    }

    /// Scalar model `ẋ = θx`.
    pub fn scalar(theta: f64) -> Self {
        Self::new(1, vec![theta])
    }
}

impl TrainableField for LinearModel {
    fn dim(&self) -> usize {
        self.dim
    }

    fn params(&self) -> &[f64] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn leaves(&self, t: &mut Tape) -> Vec<Var> {
        vec![t.leaf(Array2::from_shape_vec((self.dim, self.dim), self.params.clone()).expect("d × d"))]
    }

    fn field_on_tape(&self, t: &mut Tape, leaves: &[Var], x: Var) -> Var {
        t.matmul_nt(x, leaves[0])
    }
}

impl Dynamics for LinearModel {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &[f64], dx: &mut [f64]) {
        for (r, out) in dx.iter_mut().enumerate() {
            *out = (0..self.dim).map(|c| self.params[r * self.dim + c] * x[c]).sum();
        }
    }
}
