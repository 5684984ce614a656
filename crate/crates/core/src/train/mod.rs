//! Gradient training of vector-field models on trajectory data.
//!
//! Each iteration evaluates the residual of the chosen loss at the current
//! parameters, updates the state-wise attention multipliers from the mean
//! absolute residual of every state, and takes an AdamW step on the loss
//! weighted by `W·diag(λ)`.

mod linear;
mod objective;
mod optim;

pub use linear::LinearModel;
pub use objective::{one_step, Objective};
pub use optim::AdamW;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::genericnet::tape::{Tape, Var};
use crate::genericnet::GenericModel;
use crate::trajectory::io::fmt_f64;
use crate::trajectory::{OneStep, TrajectoryDataset};
use crate::{Error, Result};

/// A vector field whose parameters can be trained on the tape.
pub trait TrainableField {
    fn dim(&self) -> usize;
    fn params(&self) -> &[f64];
    fn params_mut(&mut self) -> &mut [f64];
    /// One leaf per parameter block, in parameter order.
    fn leaves(&self, t: &mut Tape) -> Vec<Var>;
    /// Field at the rows of `x` (`N × d`).
    fn field_on_tape(&self, t: &mut Tape, leaves: &[Var], x: Var) -> Var;
}

impl TrainableField for GenericModel {
    fn dim(&self) -> usize {
        self.config().dim
    }

    fn params(&self) -> &[f64] {
        GenericModel::params(self)
    }

    fn params_mut(&mut self) -> &mut [f64] {
        GenericModel::params_mut(self)
    }

    fn leaves(&self, t: &mut Tape) -> Vec<Var> {
        GenericModel::leaves(self, t)
    }

    fn field_on_tape(&self, t: &mut Tape, leaves: &[Var], x: Var) -> Var {
        self.field_tape(t, leaves, x).field
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Strong,
    #[default]
    Weak,
}

/// Attention hyperparameters `(η*, γ)`; `(0, 1)` disables attention.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RbaConfig {
    pub eta_star: f64,
    pub gamma: f64,
}

impl Default for RbaConfig {
    fn default() -> Self {
        Self { eta_star: 0.0, gamma: 1.0 }
    }
}

/// Bump test-function family of the weak loss: support width `ell` in
/// points of the subsampled grid, degree `p`, overlap `s`, subsampling `nbar`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TestFnConfig {
    pub ell: usize,
    pub p: u32,
    pub s: f64,
    pub nbar: usize,
}

impl Default for TestFnConfig {
    fn default() -> Self {
        Self { ell: 60, p: 4, s: 0.8, nbar: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lr: f64,
    pub decay_rate: f64,
    pub decay_steps: usize,
    pub weight_decay: f64,
    pub rba: RbaConfig,
    pub loss: LossKind,
    pub testfn: TestFnConfig,
    /// Trajectories per strong-loss iteration; `None` uses all of them.
    pub batch_size: Option<usize>,
    pub iters: usize,
    pub seed: u64,
    /// One-step map of the strong loss.
    pub step: OneStep,
    /// Record history every this many iterations (and at the last one).
    pub history_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            decay_rate: 0.95,
            decay_steps: 1000,
            weight_decay: 0.0,
            rba: RbaConfig::default(),
            loss: LossKind::Weak,
            testfn: TestFnConfig::default(),
            batch_size: None,
            iters: 5000,
            seed: 0,
            step: OneStep::Euler,
            history_every: 10,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0) {
            return Err(Error::InvalidArgument(format!("learning rate must be positive, got {}", self.lr)));
        }
        if !(self.decay_rate > 0.0 && self.decay_rate <= 1.0) {
            return Err(Error::InvalidArgument(format!("decay rate must lie in (0, 1], got {}", self.decay_rate)));
        }
        if self.decay_steps == 0 || self.history_every == 0 {
            return Err(Error::InvalidArgument("decay_steps and history_every must be at least 1".into()));
        }
        if !(self.rba.gamma > 0.0 && self.rba.gamma <= 1.0) || !(self.rba.eta_star >= 0.0) {
            return Err(Error::InvalidArgument(format!("attention needs γ ∈ (0, 1] and η* ≥ 0, got {:?}", self.rba)));
        }
        if self.weight_decay < 0.0 {
            return Err(Error::InvalidArgument("weight decay must be non-negative".into()));
        }
        if self.batch_size == Some(0) {
            return Err(Error::InvalidArgument("batch size must be at least 1".into()));
        }
        Ok(())
    }
}

/// `η·α^{⌊step/decay_steps⌋}`
pub fn lr_at(step: usize, cfg: &TrainConfig) -> f64 {
    cfg.lr * cfg.decay_rate.powi((step / cfg.decay_steps) as i32)
}

/// State-wise attention multipliers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RbaState {
    pub multipliers: Vec<f64>,
    pub gamma: f64,
    pub eta_star: f64,
}

impl RbaState {
    pub fn new(d: usize, cfg: RbaConfig) -> Self {
        Self { multipliers: vec![1.0; d], gamma: cfg.gamma, eta_star: cfg.eta_star }
    }
}

/// `λ ← γλ + η*·√W e/‖√W e‖∞`, the normalized term taken as zero when
/// `e = 0`.
pub fn rba_update(state: &RbaState, e: &[f64], weights: &[f64]) -> RbaState {
    let scaled: Vec<f64> = e.iter().zip(weights).map(|(v, w)| w.sqrt() * v).collect();
    let norm = scaled.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let multipliers = state
        .multipliers
        .iter()
        .zip(&scaled)
        .map(|(l, s)| {
            let term = if norm > 0.0 { s / norm } else { 0.0 };
            state.gamma * l + state.eta_star * term
        })
        .collect();
    RbaState { multipliers, ..state.clone() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryRecord {
    pub iter: usize,
    pub loss: f64,
    pub lr: f64,
    pub multipliers: Vec<f64>,
    pub residuals: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub records: Vec<HistoryRecord>,
}

impl TrainHistory {
    /// `iter,loss,lr,lambda_1..lambda_d,e_1..e_d`
    pub fn to_csv(&self) -> String {
        let d = self.records.first().map_or(0, |r| r.multipliers.len());
        let mut out = String::from("iter,loss,lr");
        for l in 1..=d {
            out.push_str(&format!(",lambda_{l}"));
        }
        for l in 1..=d {
            out.push_str(&format!(",e_{l}"));
        }
        out.push('\n');
        for r in &self.records {
            out.push_str(&format!("{},{},{}", r.iter, fmt_f64(r.loss), fmt_f64(r.lr)));
            for v in r.multipliers.iter().chain(&r.residuals) {
                out.push(',');
                out.push_str(&fmt_f64(*v));
            }
            out.push('\n');
        }
        out
    }

    pub fn final_loss(&self) -> Option<f64> {
        self.records.last().map(|r| r.loss)
    }
}

/// Trains `model` in place on `data`; `W = diag(1/σ_ℓ)` from the data's
/// per-state standard deviations.
pub fn train<M: TrainableField + ?Sized>(model: &mut M, data: &TrajectoryDataset, cfg: &TrainConfig) -> Result<TrainHistory> {
    run(model, data, cfg, true)
}

/// [`train`] with the attention update removed from the loop; the
/// multipliers stay at one.
pub fn train_without_attention<M: TrainableField + ?Sized>(
    model: &mut M,
    data: &TrajectoryDataset,
    cfg: &TrainConfig,
) -> Result<TrainHistory> {
    run(model, data, cfg, false)
}

/// Per-state mean absolute residual of the configured loss at the current
/// parameters (all trajectories).
pub fn residual_vector<M: TrainableField + ?Sized>(model: &M, data: &TrajectoryDataset, cfg: &TrainConfig) -> Result<Vec<f64>> {
    let obj = Objective::new(data, cfg)?;
    let mut t = Tape::new();
    let leaves = model.leaves(&mut t);
    let r = obj.residual(model, &mut t, &leaves, None);
    Ok(objective::state_residuals(t.value(r.value), model.dim()))
}

/// Training loss under `W·diag(multipliers)` over all trajectories, with its
/// gradient with respect to every parameter in parameter order.
pub fn loss_and_gradient<M: TrainableField + ?Sized>(
    model: &M,
    data: &TrajectoryDataset,
    cfg: &TrainConfig,
    multipliers: &[f64],
) -> Result<(f64, Vec<f64>)> {
    let d = data.dim();
    if multipliers.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: multipliers.len() });
    }
    let obj = Objective::new(data, cfg)?;
    let w: Vec<f64> = data.std().iter().zip(multipliers).map(|(s, l)| l / s).collect();
    let mut t = Tape::new();
    let leaves = model.leaves(&mut t);
    let r = obj.residual(model, &mut t, &leaves, None);
    let loss = objective::weighted_loss(&mut t, &r, &w);
    let grads = t.grad(loss, &leaves);
    Ok((t.scalar(loss), flatten(&t, &grads)))
}

fn flatten(t: &Tape, grads: &[Var]) -> Vec<f64> {
    grads.iter().flat_map(|g| t.value(*g).iter().copied().collect::<Vec<_>>()).collect()
}

fn run<M: TrainableField + ?Sized>(model: &mut M, data: &TrajectoryDataset, cfg: &TrainConfig, attention: bool) -> Result<TrainHistory> {
    cfg.validate()?;
    let d = data.dim();
    if model.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, got: model.dim() });
    }
    let weights: Vec<f64> = data.std().iter().map(|s| 1.0 / s).collect();
    if weights.iter().any(|w| !w.is_finite()) {
        let index = data.std().iter().position(|s| *s == 0.0).unwrap_or(0);
        return Err(Error::DegenerateState { index });
    }
    let obj = Objective::new(data, cfg)?;
    let mut opt = AdamW::new(model.params().len());
    let mut rba = RbaState::new(d, cfg.rba);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut history = TrainHistory::default();
    let n_traj = obj.trajectories();
    for it in 0..cfg.iters {
        let batch: Option<Vec<usize>> = match (&obj, cfg.batch_size) {
            (Objective::Strong { .. }, Some(b)) if b < n_traj => {
                let mut idx = sample(&mut rng, n_traj, b).into_vec();
                idx.sort_unstable();
                Some(idx)
            }
            _ => None,
        };
        let mut t = Tape::new();
        let leaves = model.leaves(&mut t);
        let r = obj.residual(&*model, &mut t, &leaves, batch.as_deref());
        let e = objective::state_residuals(t.value(r.value), d);
        if attention {
            rba = rba_update(&rba, &e, &weights);
        }
        let w: Vec<f64> = weights.iter().zip(&rba.multipliers).map(|(a, b)| a * b).collect();
        let loss = objective::weighted_loss(&mut t, &r, &w);
        let loss_value = t.scalar(loss);
        if !loss_value.is_finite() {
            return Err(Error::NonFiniteLoss { iteration: it });
        }
        let grads = t.grad(loss, &leaves);
        let flat = flatten(&t, &grads);
        let lr = lr_at(it, cfg);
        if it % cfg.history_every == 0 || it + 1 == cfg.iters {
            history.records.push(HistoryRecord {
                iter: it,
                loss: loss_value,
                lr,
                multipliers: rba.multipliers.clone(),
                residuals: e,
            });
        }
        opt.step(model.params_mut(), &flat, lr, cfg.weight_decay);
    }
    Ok(history)
}
