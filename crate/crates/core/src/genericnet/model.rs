use nalgebra::{DMatrix, DVector};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dense::{leaves_for, DenseNet};
use super::tape::{Tape, Var};
use super::{GenericStructure, GenericTerms};
use crate::trajectory::Dynamics;
use crate::{Error, Result};

/// Architecture of a [`GenericModel`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub dim: usize,
    pub hidden_layers: usize,
    pub width: usize,
    /// Number of skew generators per Q-matrix.
    pub generators: usize,
    /// Columns of the friction factor.
    pub rank: usize,
    /// Use state-independent `B` and `C` instead of networks.
    pub constant_factors: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self::new(3)
    }
}

impl ModelConfig {
    /// Three hidden layers of width 20, `dim` generators and rank `dim`.
    pub fn new(dim: usize) -> Self {
        Self { dim, hidden_layers: 3, width: 20, generators: dim, rank: dim, constant_factors: false }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.generators == 0 || self.rank == 0 || self.width == 0 {
            return Err(Error::InvalidArgument(format!("model sizes must be positive: {self:?}")));
        }
        Ok(())
    }

    pub fn energy_net(&self) -> DenseNet {
        DenseNet::new(self.dim, self.hidden_layers, self.width, 1)
    }

    pub fn entropy_net(&self) -> DenseNet {
        self.energy_net()
    }

    fn factor_net(&self, outputs: usize) -> Option<DenseNet> {
        (!self.constant_factors).then(|| DenseNet::new(self.dim, self.hidden_layers, self.width, outputs))
    }

    /// Produces the `generators × generators` matrix whose skew part is `B`.
    pub fn poisson_net(&self) -> Option<DenseNet> {
        self.factor_net(self.generators * self.generators)
    }

    /// Produces the `generators × rank` factor `C`.
    pub fn friction_net(&self) -> Option<DenseNet> {
        self.factor_net(self.generators * self.rank)
    }

    /// Shapes of every parameter block, in layout order: energy net, entropy
    /// net, entropy generators, energy generators, `B` source, `C`.
    pub fn shapes(&self) -> Vec<(usize, usize)> {
        let d = self.dim;
        let g = self.generators;
        let mut s = self.energy_net().shapes();
        s.extend(self.entropy_net().shapes());
        s.extend(std::iter::repeat_n((d, d), 2 * g));
        match self.poisson_net() {
            Some(n) => s.extend(n.shapes()),
            None => s.push((1, g * g)),
        }
        match self.friction_net() {
            Some(n) => s.extend(n.shapes()),
            None => s.push((1, g * self.rank)),
        }
        s
    }

    pub fn param_count(&self) -> usize {
        self.shapes().iter().map(|(r, c)| r * c).sum()
    }
}

/// Tape nodes of a batched field evaluation.
#[derive(Debug, Clone, Copy)]
pub struct TapeField {
    /// `N × d`
    pub field: Var,
    /// `N × 1`
    pub energy: Var,
    /// `N × 1`
    pub entropy: Var,
    pub grad_energy: Var,
    pub grad_entropy: Var,
}

/// GENERIC-structured model `ẋ = L(x)∇E(x) + M(x)∇S(x)` with
/// `L = Q_Sᵀ B Q_S`, `M = Q_Eᵀ C Cᵀ Q_E` and Q-matrix rows `(A_i∇h)ᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct GenericModel {
    config: ModelConfig,
    params: Vec<f64>,
}

struct Blocks {
    e: (usize, usize),
    s: (usize, usize),
    skew_s: (usize, usize),
    skew_e: (usize, usize),
    b: (usize, usize),
    c: (usize, usize),
}

impl GenericModel {
    /// Random initialization: uniform Glorot weights, zero biases, uniform
    /// generators and constant factors.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = Vec::with_capacity(config.param_count());
        config.energy_net().init(&mut rng, &mut p);
        config.entropy_net().init(&mut rng, &mut p);
        let d = config.dim;
        let a = (3.0 / d as f64).sqrt();
        for _ in 0..2 * config.generators * d * d {
            p.push(rng.random_range(-a..a));
        }
        let g = config.generators;
        for (net, outputs) in [(config.poisson_net(), g * g), (config.friction_net(), g * config.rank)] {
            match net {
                Some(n) => n.init(&mut rng, &mut p),
                None => p.extend((0..outputs).map(|_| rng.random_range(-1.0..1.0))),
            }
        }
        Self::from_params(config, p)
    }

    pub fn from_params(config: ModelConfig, params: Vec<f64>) -> Result<Self> {
        config.validate()?;
        if params.len() != config.param_count() {
            return Err(Error::DimensionMismatch { expected: config.param_count(), got: params.len() });
        }
        Ok(Self { config, params })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    fn blocks(&self) -> Blocks {
        let c = &self.config;
        let d = c.dim;
        let g = c.generators;
        let mut off = 0;
        let mut take = |n: usize| {
            let r = (off, off + n);
            off += n;
            r
        };
        let e = take(c.energy_net().param_count());
        let s = take(c.entropy_net().param_count());
        let skew_s = take(g * d * d);
        let skew_e = take(g * d * d);
        let b = take(c.poisson_net().map_or(g * g, |n| n.param_count()));
        let cc = take(c.friction_net().map_or(g * c.rank, |n| n.param_count()));
        Blocks { e, s, skew_s, skew_e, b, c: cc }
    }

    /// Index of the energy network's output bias.
    pub fn energy_bias_index(&self) -> usize {
        self.blocks().e.1 - 1
    }

    fn slice(&self, r: (usize, usize)) -> &[f64] {
        &self.params[r.0..r.1]
    }

    /// `A_i = U_i − U_iᵀ` for the entropy (`S`) or energy generators.
    pub fn generators(&self, entropy: bool) -> Vec<DMatrix<f64>> {
        let bl = self.blocks();
        let block = self.slice(if entropy { bl.skew_s } else { bl.skew_e });
        let d = self.config.dim;
        block
            .chunks(d * d)
            .map(|u| {
                let u = DMatrix::from_row_slice(d, d, u);
                &u - u.transpose()
            })
            .collect()
    }

    fn factor(&self, x: &[f64], net: Option<DenseNet>, r: (usize, usize), rows: usize, cols: usize) -> DMatrix<f64> {
        let p = self.slice(r);
        match net {
            Some(n) => DMatrix::from_row_slice(rows, cols, &n.forward(p, x)),
            None => DMatrix::from_row_slice(rows, cols, p),
        }
    }

    /// Skew `B(x)` (`generators × generators`).
    pub fn poisson_factor(&self, x: &[f64]) -> DMatrix<f64> {
        let g = self.config.generators;
        let raw = self.factor(x, self.config.poisson_net(), self.blocks().b, g, g);
        &raw - raw.transpose()
    }

    /// `C(x)` (`generators × rank`).
    pub fn friction_factor(&self, x: &[f64]) -> DMatrix<f64> {
        let c = &self.config;
        self.factor(x, c.friction_net(), self.blocks().c, c.generators, c.rank)
    }

    pub fn energy(&self, x: &[f64]) -> (f64, Vec<f64>) {
        self.config.energy_net().value_grad(self.slice(self.blocks().e), x)
    }

    pub fn entropy(&self, x: &[f64]) -> (f64, Vec<f64>) {
        self.config.entropy_net().value_grad(self.slice(self.blocks().s), x)
    }

    pub fn l_matrix(&self, x: &[f64]) -> DMatrix<f64> {
        self.terms(x).poisson
    }

    pub fn m_matrix(&self, x: &[f64]) -> DMatrix<f64> {
        self.terms(x).friction
    }

    /// `L(x)∇E(x) + M(x)∇S(x)` at a single point.
    pub fn gfinn_field(&self, x: &[f64]) -> Vec<f64> {
        self.terms(x).field()
    }

    /// Parameter leaves in layout order.
    pub fn leaves(&self, t: &mut Tape) -> Vec<Var> {
        leaves_for(t, &self.config.shapes(), &self.params)
    }

    /// Batched field at the rows of `x` (`N × d`), differentiable with
    /// respect to `leaves` (from [`GenericModel::leaves`]) and `x`.
    pub fn field_tape(&self, t: &mut Tape, leaves: &[Var], x: Var) -> TapeField {
        let c = &self.config;
        let n = t.value(x).nrows();
        let g = c.generators;
        let e_net = c.energy_net();
        let s_net = c.entropy_net();
        let ne = e_net.shapes().len();
        let ns = s_net.shapes().len();
        let (e_leaves, rest) = leaves.split_at(ne);
        let (s_leaves, rest) = rest.split_at(ns);
        let (us, rest) = rest.split_at(g);
        let (ue, rest) = rest.split_at(g);
        let nb = c.poisson_net().map_or(1, |n| n.shapes().len());
        let (b_leaves, c_leaves) = rest.split_at(nb);

        let energy = e_net.forward_tape(t, e_leaves, x);
        let entropy = s_net.forward_tape(t, s_leaves, x);
        let se = t.sum_all(energy);
        let grad_energy = t.grad(se, &[x])[0];
        let ss = t.sum_all(entropy);
        let grad_entropy = t.grad(ss, &[x])[0];

        let q_matrix = |t: &mut Tape, gens: &[Var], grad: Var| {
            let rows: Vec<Var> = gens
                .iter()
                .map(|&u| {
                    let ut = t.transpose(u);
                    let a = t.sub(u, ut);
                    t.matmul_nt(grad, a)
                })
                .collect();
            t.concat_cols(&rows)
        };
        let qs = q_matrix(t, us, grad_entropy);
        let qe = q_matrix(t, ue, grad_energy);
        let factor = |t: &mut Tape, net: Option<DenseNet>, lv: &[Var]| match net {
            Some(nn) => nn.forward_tape(t, lv, x),
            None => t.broadcast_rows(lv[0], n),
        };
        let b_raw = factor(t, c.poisson_net(), b_leaves);
        let c_f = factor(t, c.friction_net(), c_leaves);

        let u = t.bmv(qs, grad_energy);
        let bu = t.bmv(b_raw, u);
        let btu = t.bmv_t(b_raw, u);
        let w = t.sub(bu, btu);
        let reversible = t.bmv_t(qs, w);

        let a = t.bmv(qe, grad_entropy);
        let ct_a = t.bmv_t(c_f, a);
        let cc_a = t.bmv(c_f, ct_a);
        let irreversible = t.bmv_t(qe, cc_a);

        let field = t.add(reversible, irreversible);
        TapeField { field, energy, entropy, grad_energy, grad_entropy }
    }

    /// Flattens gradients of [`GenericModel::leaves`] into layout order.
    pub fn flatten(&self, t: &Tape, grads: &[Var]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.params.len());
        for g in grads {
            out.extend(t.value(*g).iter().copied());
        }
        out
    }
}

/// Q-matrix with rows `(A_i·grad)ᵀ`.
pub fn q_matrix(generators: &[DMatrix<f64>], grad: &[f64]) -> DMatrix<f64> {
    let d = grad.len();
    let gv = DVector::from_column_slice(grad);
    let mut q = DMatrix::zeros(generators.len(), d);
    for (i, a) in generators.iter().enumerate() {
        q.set_row(i, &(a * &gv).transpose());
    }
    q
}

impl GenericStructure for GenericModel {
    fn dim(&self) -> usize {
        self.config.dim
    }

    fn terms(&self, x: &[f64]) -> GenericTerms {
        let (energy, grad_energy) = self.energy(x);
        let (entropy, grad_entropy) = self.entropy(x);
        let qs = q_matrix(&self.generators(true), &grad_entropy);
        let qe = q_matrix(&self.generators(false), &grad_energy);
        let g = self.config.generators;
        let raw = self.factor(x, self.config.poisson_net(), self.blocks().b, g, g);
        // Q_Sᵀ(R − Rᵀ)Q_S written as K − Kᵀ keeps L exactly skew
        let k = qs.transpose() * raw * &qs;
        let poisson = &k - k.transpose();
        // Q_EᵀCCᵀQ_E as DᵀD keeps M exactly symmetric
        let dm = self.friction_factor(x).transpose() * qe;
        let friction = dm.transpose() * dm;
        GenericTerms { energy, entropy, grad_energy, grad_entropy, poisson, friction }
    }
}

impl Dynamics for GenericModel {
    fn dim(&self) -> usize {
        self.config.dim
    }

    fn eval(&self, x: &[f64], dx: &mut [f64]) {
        dx.copy_from_slice(&self.gfinn_field(x));
    }
}

/// Rows of `points` as an `N × d` array.
pub fn batch(points: &[Vec<f64>]) -> Array2<f64> {
    let d = points.first().map_or(0, |p| p.len());
    Array2::from_shape_fn((points.len(), d), |(i, j)| points[i][j])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genericnet::degeneracy_report;

    fn random_points(seed: u64, n: usize, d: usize) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect()).collect()
    }

    #[test]
    fn q_matrix_examples() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let q = q_matrix(&[a.clone()], &[2.0, 3.0]);
        assert_eq!(q, DMatrix::from_row_slice(1, 2, &[3.0, -2.0]));
        assert_eq!(q_matrix(&[a], &[0.0, 0.0]), DMatrix::zeros(1, 2));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for d in 2..=6 {
            let gens: Vec<DMatrix<f64>> = (0..d)
                .map(|_| {
                    let u = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
                    &u - u.transpose()
                })
                .collect();
            let grad: Vec<f64> = (0..d).map(|_| rng.random_range(-3.0..3.0)).collect();
            let q = q_matrix(&gens, &grad);
            let r = q * DVector::from_column_slice(&grad);
            assert!(r.amax() <= 1e-13, "{}", r.amax());
        }
    }

    #[test]
    fn layout_matches_count() {
        for constant in [false, true] {
            let mut c = ModelConfig::new(4);
            c.constant_factors = constant;
            let m = GenericModel::new(c.clone(), 0).unwrap();
            assert_eq!(m.param_count(), c.param_count());
        }
        assert!(GenericModel::from_params(ModelConfig::new(3), vec![0.0; 5]).is_err());
    }

    #[test]
    fn structure_holds_for_random_models() {
        for (seed, d) in [(1u64, 3usize), (2, 4), (3, 10)] {
            let mut c = ModelConfig::new(d);
            c.width = 8;
            let m = GenericModel::new(c, seed).unwrap();
            let r = degeneracy_report(&m, &random_points(seed + 10, 20, d));
            assert!(r.max_residual() <= 1e-12, "{r:?}");
            assert!(r.min_eig_friction >= -1e-12, "{r:?}");
        }
    }

    #[test]
    fn zero_model_is_inert() {
        let c = ModelConfig::new(3);
        let m = GenericModel::from_params(c.clone(), vec![0.0; c.param_count()]).unwrap();
        let r = degeneracy_report(&m, &random_points(0, 5, 3));
        assert_eq!(r.max_residual(), 0.0);
        assert_eq!(m.gfinn_field(&[1.0, 2.0, 3.0]), vec![0.0; 3]);
    }

    #[test]
    fn tape_field_matches_plain() {
        for constant in [false, true] {
            let mut c = ModelConfig::new(3);
            c.width = 7;
            c.generators = 2;
            c.rank = 4;
            c.constant_factors = constant;
            let m = GenericModel::new(c, 5).unwrap();
            let pts = random_points(6, 8, 3);
            let mut t = Tape::new();
            let leaves = m.leaves(&mut t);
            let x = t.leaf(batch(&pts));
            let f = m.field_tape(&mut t, &leaves, x);
            for (i, p) in pts.iter().enumerate() {
                let plain = m.gfinn_field(p);
                for k in 0..3 {
                    let v = t.value(f.field)[[i, k]];
                    assert!((v - plain[k]).abs() <= 1e-12 * (1.0 + plain[k].abs()), "{v} vs {}", plain[k]);
                }
                assert!((t.value(f.energy)[[i, 0]] - m.energy(p).0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn energy_bias_is_a_no_op() {
        let m = GenericModel::new(ModelConfig::new(3), 8).unwrap();
        let mut shifted = m.clone();
        let i = shifted.energy_bias_index();
        shifted.params_mut()[i] += 3.7;
        for p in random_points(9, 10, 3) {
            assert_eq!(m.gfinn_field(&p), shifted.gfinn_field(&p));
            assert!((shifted.energy(&p).0 - m.energy(&p).0 - 3.7).abs() < 1e-12);
        }
    }

    #[test]
    fn field_parameter_gradient_matches_finite_differences() {
        let mut c = ModelConfig::new(3);
        c.width = 6;
        let m = GenericModel::new(c, 12).unwrap();
        let pts = random_points(13, 3, 3);
        let target = [0.3, -0.1, 0.2];
        let loss = |model: &GenericModel| -> f64 {
            pts.iter()
                .map(|p| model.gfinn_field(p).iter().zip(&target).map(|(f, y)| (f - y).powi(2)).sum::<f64>())
                .sum()
        };
        let mut t = Tape::new();
        let leaves = m.leaves(&mut t);
        let x = t.leaf(batch(&pts));
        let f = m.field_tape(&mut t, &leaves, x);
        let tg = t.leaf(Array2::from_shape_fn((3, 3), |(_, k)| target[k]));
        let r = t.sub(f.field, tg);
        let sq = t.mul(r, r);
        let l = t.sum_all(sq);
        let grads = t.grad(l, &leaves);
        let g = m.flatten(&t, &grads);
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for _ in 0..20 {
            let i = rng.random_range(0..m.param_count());
            let mut mp = m.clone();
            let mut mm = m.clone();
            mp.params_mut()[i] += 1e-6;
            mm.params_mut()[i] -= 1e-6;
            let fd = (loss(&mp) - loss(&mm)) / 2e-6;
            assert!((fd - g[i]).abs() <= 1e-5 * g[i].abs().max(1e-4), "param {i}: {fd} vs {}", g[i]);
        }
    }
}
