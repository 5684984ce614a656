//! Losses and residuals assembled on the tape.

use ndarray::{Array2, Axis};

use super::{LossKind, TrainConfig, TrainableField};
use crate::genericnet::tape::{Tape, Var};
use crate::testfn::{place_supports, TestFunctionSet};
use crate::trajectory::{OneStep, TrajectoryDataset};
use crate::{Error, Result};

/// Data of a loss, arranged once before training.
#[derive(Debug, Clone)]
pub enum Objective {
    Strong {
        /// Per trajectory, rows `y_0 … y_{K−1}`.
        inputs: Vec<Array2<f64>>,
        /// Per trajectory, rows `y_1 … y_K`.
        targets: Vec<Array2<f64>>,
        dt: f64,
        step: OneStep,
    },
    Weak {
        /// `Q × J`
        phi: Array2<f64>,
        /// `J × (N·d)`, the data part `Φ̇ᵀY` with trajectory `i` in columns `i·d..(i+1)·d`.
        data_term: Array2<f64>,
        /// `(Q·N) × d`, point `q` of trajectory `i` in row `q·N + i`.
        points: Array2<f64>,
        trajectories: usize,
    },
}

/// Residual nodes of one evaluation.
pub struct Residual {
    /// Strong: `P × d` one-step errors. Weak: `J × (N·d)` test-function residuals.
    pub value: Var,
    /// Number of residual rows per state, used for normalization.
    pub count: usize,
    /// Trajectory blocks tiled along the columns (weak) or 1 (strong).
    pub tiles: usize,
}

impl Objective {
    pub fn new(data: &TrajectoryDataset, cfg: &TrainConfig) -> Result<Self> {
        let k = data.grid().steps;
        let d = data.dim();
        match cfg.loss {
            LossKind::Strong => {
                if k < 1 {
                    return Err(Error::InvalidArgument("strong loss needs at least one step".into()));
                }
                let inputs = data.trajectories().iter().map(|t| t.slice(ndarray::s![..k, ..]).to_owned()).collect();
                let targets = data.trajectories().iter().map(|t| t.slice(ndarray::s![1.., ..]).to_owned()).collect();
                Ok(Objective::Strong { inputs, targets, dt: data.grid().dt, step: cfg.step })
            }
            LossKind::Weak => {
                let tf = &cfg.testfn;
                let nbar = tf.nbar.max(1);
                let steps = k / nbar;
                let plan = place_supports(steps, tf.ell, tf.p, tf.s)?;
                let set = TestFunctionSet::tabulate(plan, nbar as f64 * data.grid().dt)?;
                let q = set.points();
                let n = data.len();
                let mut points = Array2::zeros((q * n, d));
                let mut ybig = Array2::zeros((q, n * d));
                for (i, traj) in data.trajectories().iter().enumerate() {
                    for qq in 0..q {
                        let row = traj.row((qq + 1) * nbar);
                        points.row_mut(qq * n + i).assign(&row);
                        for l in 0..d {
                            ybig[[qq, i * d + l]] = row[l];
                        }
                    }
                }
                let data_term = set.dphi.t().dot(&ybig);
                Ok(Objective::Weak { phi: set.phi, data_term, points, trajectories: n })
            }
        }
    }

    /// Trajectories contributing to each evaluation.
    pub fn trajectories(&self) -> usize {
        match self {
            Objective::Strong { inputs, .. } => inputs.len(),
            Objective::Weak { trajectories, .. } => *trajectories,
        }
    }

    /// Records the residual of `model` on the tape. `batch` selects
    /// trajectories for the strong loss and is ignored by the weak loss.
    pub fn residual<M: TrainableField + ?Sized>(
        &self,
        model: &M,
        t: &mut Tape,
        leaves: &[Var],
        batch: Option<&[usize]>,
    ) -> Residual {
        match self {
            Objective::Strong { inputs, targets, dt, step } => {
                let all: Vec<usize>;
                let idx = match batch {
                    Some(b) => b,
                    None => {
                        all = (0..inputs.len()).collect();
                        &all
                    }
                };
                let xs: Vec<_> = idx.iter().map(|&i| inputs[i].view()).collect();
                let ys: Vec<_> = idx.iter().map(|&i| targets[i].view()).collect();
                let x0 = ndarray::concatenate(Axis(0), &xs).expect("equal widths");
                let y1 = ndarray::concatenate(Axis(0), &ys).expect("equal widths");
                let count = x0.nrows();
                let x = t.leaf(x0);
                let pred = one_step(model, t, leaves, x, *dt, *step);
                let y = t.leaf(y1);
                Residual { value: t.sub(pred, y), count, tiles: 1 }
            }
            Objective::Weak { phi, data_term, points, trajectories } => {
                let q = phi.nrows();
                let d = points.ncols();
                let x = t.leaf(points.clone());
                let f = model.field_on_tape(t, leaves, x);
                let fbig = t.reshape(f, (q, trajectories * d));
                let ph = t.leaf(phi.clone());
                let proj = t.matmul_tn(ph, fbig);
                let dt = t.leaf(data_term.clone());
                Residual { value: t.add(dt, proj), count: phi.ncols() * trajectories, tiles: *trajectories }
            }
        }
    }
}

/// Differentiable one-step map.
pub fn one_step<M: TrainableField + ?Sized>(model: &M, t: &mut Tape, leaves: &[Var], x: Var, h: f64, step: OneStep) -> Var {
    match step {
        OneStep::Euler => {
            let f = model.field_on_tape(t, leaves, x);
            let hf = t.scale(f, h);
            t.add(x, hf)
        }
        OneStep::Rk23 => {
            let k1 = model.field_on_tape(t, leaves, x);
            let a = t.scale(k1, 0.5 * h);
            let x2 = t.add(x, a);
            let k2 = model.field_on_tape(t, leaves, x2);
            let b = t.scale(k2, 0.75 * h);
            let x3 = t.add(x, b);
            let k3 = model.field_on_tape(t, leaves, x3);
            let s1 = t.scale(k1, 2.0 * h / 9.0);
            let s2 = t.scale(k2, 3.0 * h / 9.0);
            let s3 = t.scale(k3, 4.0 * h / 9.0);
            let s = t.add(s1, s2);
            let s = t.add(s, s3);
            t.add(x, s)
        }
    }
}

/// Per-state mean absolute residual.
pub fn state_residuals(value: &Array2<f64>, d: usize) -> Vec<f64> {
    let mut e = vec![0.0; d];
    for row in value.rows() {
        for (c, v) in row.iter().enumerate() {
            e[c % d] += v.abs();
        }
    }
    let n = (value.len() / d) as f64;
    e.iter_mut().for_each(|v| *v /= n);
    e
}

/// `Σ c_ℓ R²` with `c_ℓ = w_ℓ/(count·d)` tiled across trajectory blocks.
pub fn weighted_loss(t: &mut Tape, r: &Residual, weights: &[f64]) -> Var {
    let d = weights.len();
    let scale = 1.0 / (r.count * d) as f64;
    let c: Vec<f64> = (0..r.tiles).flat_map(|_| weights.iter().map(|w| w * scale)).collect();
    let sq = t.mul(r.value, r.value);
    let ws = t.mul_row_const(sq, &c);
    t.sum_all(ws)
}
