//! Strong-versus-weak training on the noisy damped oscillator.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::metrics::{calibrate_affine, rel_l2_error, Calibration};
use crate::genericnet::{degeneracy_report, DegeneracyReport, GenericModel, ModelConfig};
use crate::train::{train, LossKind, TrainConfig, TrainHistory};
use crate::trajectory::{
    add_noise, damped_oscillator_benchmark, integrate, sample_initial_states, DampedOscillator, Method, TimeGrid,
    TrajectoryDataset,
};
use crate::{Error, Result};

/// Setup of one comparison. Both runs share data, architecture and the
/// model initialization; only the loss and its optimizer settings differ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CompareConfig {
    /// Damping rate of the benchmark.
    pub zeta: f64,
    pub train_trajectories: usize,
    pub test_trajectories: usize,
    pub steps: usize,
    pub dt: f64,
    /// Noise level as a fraction of each state's standard deviation.
    pub noise: f64,
    pub model: ModelConfig,
    pub strong: TrainConfig,
    pub weak: TrainConfig,
    /// Pin the entropy calibration at the first test sample.
    pub anchor_entropy: bool,
}

impl Default for CompareConfig {
    fn default() -> Self {
        let weak = TrainConfig { loss: LossKind::Weak, ..TrainConfig::default() };
        let strong = TrainConfig {
            loss: LossKind::Strong,
            weight_decay: 1e-2,
            batch_size: Some(10),
            ..TrainConfig::default()
        };
        Self {
            zeta: 0.5,
            train_trajectories: 20,
            test_trajectories: 10,
            steps: 200,
            dt: 0.02,
            noise: 0.10,
            model: ModelConfig::new(3),
            strong,
            weak,
            anchor_entropy: false,
        }
    }
}

impl CompareConfig {
    /// Sets the iteration budget of both runs.
    pub fn with_iters(mut self, iters: usize) -> Self {
        self.strong.iters = iters;
        self.weak.iters = iters;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.model.dim != 3 {
            return Err(Error::DimensionMismatch { expected: 3, got: self.model.dim });
        }
        if self.train_trajectories == 0 || self.test_trajectories == 0 {
            return Err(Error::InvalidArgument("need training and test trajectories".into()));
        }
        self.model.validate()?;
        self.strong.validate()?;
        self.weak.validate()
    }
}

/// Data of one comparison, derived from the master seed.
#[derive(Debug, Clone)]
pub struct CompareData {
    pub system: DampedOscillator,
    pub train_clean: TrajectoryDataset,
    pub train_noisy: TrajectoryDataset,
    pub test: TrajectoryDataset,
}

impl CompareData {
    pub fn generate(cfg: &CompareConfig, seed: u64) -> Result<Self> {
        let system = damped_oscillator_benchmark(cfg.zeta)?;
        let grid = TimeGrid::new(0.0, cfg.dt, cfg.steps)?;
        let method = Method::default();
        let train_clean = system.dataset(&sample_initial_states(cfg.train_trajectories, seed), &grid, &method)?;
        let train_noisy = add_noise(&train_clean, cfg.noise, seed.wrapping_add(1))?;
        let test = system.dataset(&sample_initial_states(cfg.test_trajectories, seed.wrapping_add(2)), &grid, &method)?;
        Ok(Self { system, train_clean, train_noisy, test })
    }
}

/// Result of one trained model.
#[derive(Debug, Clone)]
pub struct ModelOutcome {
    pub loss: LossKind,
    /// Relative ℓ₂ error of RK23 rollouts from the test initial states;
    /// infinite when a rollout fails or leaves the finite range.
    pub rel_l2_error: f64,
    pub degeneracy: DegeneracyReport,
    pub history: TrainHistory,
    /// Calibrated energy and entropy along the rollout of test trajectory 0.
    pub energy: Option<Calibration>,
    pub entropy: Option<Calibration>,
    pub model: GenericModel,
}

#[derive(Debug, Clone)]
pub struct CompareOutcome {
    pub times: Vec<f64>,
    pub true_energy: Vec<f64>,
    pub true_entropy: Vec<f64>,
    pub strong: ModelOutcome,
    pub weak: ModelOutcome,
}

/// Trains one model per loss on the same noisy data and scores both on
/// clean test trajectories. The two runs execute in parallel.
pub fn train_compare(cfg: &CompareConfig, seed: u64) -> Result<CompareOutcome> {
    cfg.validate()?;
    let data = CompareData::generate(cfg, seed)?;
    let init = GenericModel::new(cfg.model.clone(), seed.wrapping_add(3))?;
    // the loss kind is fixed by the slot, whatever the tables say
    let strong_cfg = TrainConfig { loss: LossKind::Strong, ..cfg.strong.clone() };
    let weak_cfg = TrainConfig { loss: LossKind::Weak, ..cfg.weak.clone() };
    let (strong, weak) = rayon::join(
        || fit_and_score(&init, &data, &strong_cfg, cfg.anchor_entropy),
        || fit_and_score(&init, &data, &weak_cfg, cfg.anchor_entropy),
    );
    let first = data.test.trajectory(0);
    let rows: Vec<Vec<f64>> = first.rows().into_iter().map(|r| r.to_vec()).collect();
    Ok(CompareOutcome {
        times: data.test.grid().times().collect(),
        true_energy: rows.iter().map(|x| data.system.energy(x)).collect(),
        true_entropy: rows.iter().map(|x| data.system.entropy(x)).collect(),
        strong: strong?,
        weak: weak?,
    })
}

/// RK23 rollouts of `model` from the first state of each test trajectory.
pub fn rollouts(model: &GenericModel, test: &TrajectoryDataset) -> Option<Vec<Array2<f64>>> {
    test.trajectories()
        .iter()
        .map(|x| {
            let x0: Vec<f64> = x.row(0).to_vec();
            integrate(model, &x0, test.grid(), &Method::default())
                .ok()
                .filter(|p| p.iter().all(|v| v.is_finite()))
        })
        .collect()
}

fn fit_and_score(init: &GenericModel, data: &CompareData, cfg: &TrainConfig, anchor: bool) -> Result<ModelOutcome> {
    let mut model = init.clone();
    let history = train(&mut model, &data.train_noisy, cfg)?;
    let pred = rollouts(&model, &data.test);
    let rel = match &pred {
        Some(p) => rel_l2_error(data.test.trajectories(), p)?,
        None => f64::INFINITY,
    };
    let points: Vec<Vec<f64>> = data
        .test
        .trajectories()
        .iter()
        .flat_map(|x| x.rows().into_iter().map(|r| r.to_vec()).collect::<Vec<_>>())
        .collect();
    let degeneracy = degeneracy_report(&model, &points);
    let (energy, entropy) = match &pred {
        Some(p) => {
            let truth: Vec<Vec<f64>> = data.test.trajectory(0).rows().into_iter().map(|r| r.to_vec()).collect();
            let rows: Vec<Vec<f64>> = p[0].rows().into_iter().map(|r| r.to_vec()).collect();
            let e_nn: Vec<f64> = rows.iter().map(|x| model.energy(x).0).collect();
            let s_nn: Vec<f64> = rows.iter().map(|x| model.entropy(x).0).collect();
            let e_true: Vec<f64> = truth.iter().map(|x| data.system.energy(x)).collect();
            let s_true: Vec<f64> = truth.iter().map(|x| data.system.entropy(x)).collect();
            let s_anchor = anchor.then(|| (0, s_true[0]));
            (calibrate_affine(&e_nn, &e_true, None).ok(), calibrate_affine(&s_nn, &s_true, s_anchor).ok())
        }
        None => (None, None),
    };
    Ok(ModelOutcome { loss: cfg.loss, rel_l2_error: rel, degeneracy, history, energy, entropy, model })
}
