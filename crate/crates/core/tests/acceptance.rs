//! Acceptance criteria 1 through 13. Every test prints one verdict line of
//! the form `criterion N [title]: PASS|FAIL | details` and then asserts the
//! verdict. Runtime limits are part of each verdict; the criteria run one at
//! a time so the limits measure only their own work.

mod common;

use std::time::{Duration, Instant};

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{scan_minimize, serial, verdict, Dd};
use weakdyn::estimator1d::{
    find_crossing_dt, monte_carlo, strong_estimator, variance_v, weak_error_formula, weak_estimator, weak_samples,
    EstimatorKind, McCell, Scenario1D, WeakErrorForm,
};
use weakdyn::experiments::{train_compare, CompareConfig};
use weakdyn::genericnet::tape::Tape;
use weakdyn::genericnet::{batch, degeneracy_report, GenericModel, ModelConfig};
use weakdyn::testfn::{place_supports, symmetric_trapezoid, three_point_testfn, BumpTestFunction, DiscreteTestFunction};
use weakdyn::train::{
    loss_and_gradient, train, train_without_attention, LossKind, RbaConfig, TestFnConfig, TrainConfig,
};
use weakdyn::trajectory::{
    add_noise, damped_oscillator_benchmark, integrate, normal_vector, sample_initial_states, Method, OneStep,
    Rk23Options, TimeGrid, TrajectoryDataset,
};
use weakdyn::weakform::{assemble_dataset, strong_loss, weak_loss, WeightMatrix};

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

fn within_time(start: Instant, limit: f64) -> (bool, f64) {
    let t = secs(start.elapsed());
    (t < limit, t)
}

/// `(e^{λΔt} − 1)/Δt − λ` from its Taylor series `Σ_{n≥2} λⁿΔt^{n−1}/n!`.
fn euler_error_series(lambda: f64, dt: f64) -> f64 {
    let mut term = lambda; // λⁿΔt^{n−1}/n! at n = 1
    let mut sum = 0.0;
    for n in 2..60 {
        term *= lambda * dt / n as f64;
        sum += term;
        if term.abs() < 1e-30 {
            break;
        }
    }
    sum
}

fn three_point(lambda: f64, support: f64) -> DiscreteTestFunction {
    let q = symmetric_trapezoid(0.0, 1, 0.5 * support).unwrap();
    three_point_testfn(lambda, support, &q).unwrap()
}

#[test]
fn criterion_01_strong_noise_limit() {
    let _g = serial();
    let start = Instant::now();
    let (lambda, x0, t_final, sigma, dt) = (-2.0f64, 1.0f64, 1.0f64, 1e-2f64, 1e-4f64);
    let s = Scenario1D::new(lambda, x0, t_final, dt, sigma, 2024).unwrap();
    let stats = monte_carlo(&[McCell { scenario: s, kind: EstimatorKind::Strong }], 1000).unwrap();
    let mean = stats[0].mean_scaled_error;
    let s2 = sigma * sigma;
    let lt = lambda * t_final;
    let mean_square = -s2 / (x0 * x0 * ((2.0 * lt).exp() - 1.0) / (2.0 * lt) + s2);
    let half_exp = -s2 / (x0 * x0 * (lt.exp() - 1.0) / (2.0 * lt) + s2);
    let rel_ms = ((mean - mean_square) / mean_square).abs();
    let rel_he = ((mean - half_exp) / half_exp).abs();
    let winner = if rel_ms <= rel_he { "(e^{2λT}-1)/(2λT)" } else { "(e^{λT}-1)/(2λT)" };
    let (fast, t) = within_time(start, 30.0);
    let pass = rel_ms <= 0.10 && fast;
    verdict(
        1,
        "strong-form noise limit",
        pass,
        &format!(
            "mean Δt(θ*-λ) = {mean:.6e}; constant (e^{{2λT}}-1)/(2λT) gives {mean_square:.6e} (rel {rel_ms:.2e}); \
             constant (e^{{λT}}-1)/(2λT) gives {half_exp:.6e} (rel {rel_he:.2e}); closer: {winner}; {t:.2}s"
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_02_strong_noiseless_exactness() {
    let _g = serial();
    let start = Instant::now();
    let lambda = -2.0;
    let mut worst = 0.0f64;
    for dt in [1e-1, 1e-2, 1e-3] {
        let s = Scenario1D::new(lambda, 1.0, 1.0, dt, 0.0, 0).unwrap();
        let theta = strong_estimator(&s.clean_samples().unwrap(), dt).unwrap();
        worst = worst.max((theta - lambda - euler_error_series(lambda, dt)).abs());
    }
    let (fast, t) = within_time(start, 1.0);
    let pass = worst <= 1e-12 && fast;
    verdict(2, "strong-form noiseless exactness", pass, &format!("max |θ*-λ-E| = {worst:.3e}; {t:.3}s"));
    assert!(pass);
}

#[test]
fn criterion_03_crossing_step_size() {
    let _g = serial();
    let start = Instant::now();
    let s = Scenario1D::new(-2.0, 1.0, 1.0, 1.0, 1e-2, 77).unwrap();
    let mut found = 0;
    let mut worst = 0.0f64;
    for run in 0..100 {
        if let Some(c) = find_crossing_dt(&s, run, (1e-4, 1e-1), 400).unwrap() {
            found += 1;
            worst = worst.max(c.error.abs());
        }
    }
    let (fast, t) = within_time(start, 60.0);
    let pass = found >= 1 && worst < 1e-8 && fast;
    verdict(
        3,
        "crossing step size",
        pass,
        &format!("{found}/100 streams change sign; worst |θ*(Δt*)-λ| = {worst:.3e}; {t:.2}s"),
    );
    assert!(pass);
}

#[test]
fn criterion_04_weak_noiseless_exactness() {
    let _g = serial();
    let start = Instant::now();
    let mut worst = 0.0f64;
    for lambda in [-2.0, 1.0, 3.0] {
        for support in [0.5, 1.0, 4.0] {
            let tf = three_point(lambda, support);
            let y = weak_samples(lambda, 1.0, 0.0, &tf, &[0.0; 3]);
            let theta = weak_estimator(&y, &tf.psi(), &tf.dpsi()).unwrap();
            worst = worst.max((theta - lambda).abs());
        }
    }
    let (fast, t) = within_time(start, 1.0);
    let pass = worst <= 1e-10 && fast;
    verdict(4, "weak-form noiseless exactness", pass, &format!("max |θ*-λ| = {worst:.3e}; {t:.3}s"));
    assert!(pass);
}

#[test]
fn criterion_05_weak_error_linear_in_noise() {
    let _g = serial();
    let start = Instant::now();
    let (lambda, sigma, center) = (-2.0, 1e-2, 1.0);
    let tf = three_point(lambda, 1.0);
    let direct = |sig: f64, eps: &[f64]| {
        let y = weak_samples(lambda, center, sig, &tf, eps);
        (weak_estimator(&y, &tf.psi(), &tf.dpsi()).unwrap() - lambda) / lambda
    };
    // linearity of the estimator's relative error on one fixed noise vector
    let eps = normal_vector(5, 0, 3);
    let r1 = direct(sigma, &eps);
    let r10 = direct(10.0 * sigma, &eps);
    let linearity = (r10 / (10.0 * r1) - 1.0).abs();
    // printed closed form (and the variant keeping σ in the denominator)
    let (mut worst_printed, mut worst_exact) = (0.0f64, 0.0f64);
    for run in 0..1000 {
        let eps = normal_vector(6, run, 3);
        let d = direct(sigma, &eps);
        let printed = weak_error_formula(lambda, sigma, center, &tf, &eps, WeakErrorForm::LinearDenominator).unwrap();
        let exact = weak_error_formula(lambda, sigma, center, &tf, &eps, WeakErrorForm::Exact).unwrap();
        worst_printed = worst_printed.max((printed - d).abs());
        worst_exact = worst_exact.max((exact - d).abs());
    }
    let (fast, t) = within_time(start, 5.0);
    let pass = linearity <= 1e-8 && worst_printed <= 1e-10 && fast;
    verdict(
        5,
        "weak-form error linear in σ",
        pass,
        &format!(
            "|r(10σ)/(10 r(σ)) - 1| = {linearity:.3e} at σ = {sigma}; closed form vs estimator: \
             max diff {worst_printed:.3e} (σ-free denominator noise term), {worst_exact:.3e} (σ kept); {t:.3}s"
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_06_weak_support_limits() {
    let _g = serial();
    let start = Instant::now();
    let (lambda, sigma) = (-2.0, 1e-2);
    let s = Scenario1D::new(lambda, 1.0, 1.0, 1.0, sigma, 606).unwrap();
    let supports = [0.05, 0.5, 8.0];
    let cells: Vec<McCell> = supports
        .iter()
        .map(|&sup| McCell { scenario: s, kind: EstimatorKind::Weak(three_point(lambda, sup)) })
        .collect();
    let stats = monte_carlo(&cells, 1000).unwrap();
    let (m_small, m_mid, m_big) = (stats[0].mean_abs_rel_error, stats[1].mean_abs_rel_error, stats[2].mean_abs_rel_error);
    let (f_small, f_big) = (stats[0].frac_rel_above_one, stats[2].frac_rel_above_one);
    let (fast, t) = within_time(start, 60.0);
    let pass = m_big < m_mid && m_mid < m_small && f_small >= 0.5 && f_big <= 0.05 && fast;
    verdict(
        6,
        "weak-form support limits",
        pass,
        &format!(
            "mean |rel err| S=8: {m_big:.3e}, S=0.5: {m_mid:.3e}, S=0.05: {m_small:.3e}; \
             Pr(|rel err|>1) S=0.05: {f_small:.3}, S=8: {f_big:.3}; {t:.2}s"
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_07_variance_profile() {
    let _g = serial();
    let start = Instant::now();
    let v0 = variance_v(1e-6);
    let (vp, vm) = (variance_v(50.0), variance_v(-50.0));
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..10_000 {
        let z = -100.0 + 200.0 * i as f64 / 9999.0;
        let v = variance_v(z);
        lo = lo.min(v);
        hi = hi.max(v);
    }
    let (fast, t) = within_time(start, 1.0);
    let pass = (v0 - 0.5).abs() <= 1e-6 && (vp - 1.0).abs() <= 1e-6 && (vm - 1.0).abs() <= 1e-6
        && lo >= 0.5
        && hi <= 1.0
        && fast;
    verdict(
        7,
        "V(z) properties",
        pass,
        &format!("V(1e-6) = {v0:.9}; V(50) = {vp:.9}; V(-50) = {vm:.9}; range on grid [{lo:.9}, {hi:.9}]; {t:.3}s"),
    );
    assert!(pass);
}

#[test]
fn criterion_08_degeneracy_by_construction() {
    let _g = serial();
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut worst, mut min_eig) = (0.0f64, f64::INFINITY);
    for i in 0..100u64 {
        let d = [3, 4, 10][i as usize % 3];
        let m = GenericModel::new(ModelConfig::new(d), 1000 + i).unwrap();
        let points: Vec<Vec<f64>> = (0..100).map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
        let r = degeneracy_report(&m, &points);
        worst = worst.max(r.max_residual());
        min_eig = min_eig.min(r.min_eig_friction);
    }
    let (fast, t) = within_time(start, 30.0);
    let pass = worst <= 1e-12 && min_eig >= -1e-12 && fast;
    verdict(
        8,
        "degeneracy by construction",
        pass,
        &format!("max residual {worst:.3e}; min eig(M) {min_eig:.3e}; {t:.2}s"),
    );
    assert!(pass);
}

fn tiny_dataset() -> TrajectoryDataset {
    let sys = damped_oscillator_benchmark(0.5).unwrap();
    let grid = TimeGrid::new(0.0, 0.1, 10).unwrap();
    let clean = sys.dataset(&sample_initial_states(2, 90), &grid, &Method::default()).unwrap();
    add_noise(&clean, 0.05, 91).unwrap()
}

/// Largest entrywise relative mismatch, relative to `max(|a|, floor)`.
fn worst_rel(a: &[f64], b: &[f64], floor: f64) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs() / x.abs().max(floor)).fold(0.0, f64::max)
}

#[test]
fn criterion_09_gradient_engine() {
    let _g = serial();
    let start = Instant::now();
    let data = tiny_dataset();
    let mut cfg = ModelConfig::new(3);
    cfg.width = 6;
    cfg.hidden_layers = 2;
    let model = GenericModel::new(cfg, 9).unwrap();
    let w = WeightMatrix::new(data.std().iter().map(|s| 1.0 / s).collect()).unwrap();
    let testfn = TestFnConfig { ell: 6, p: 3, s: 0.5, nbar: 1 };
    let plan = place_supports(10, 6, 3, 0.5).unwrap();

    // Loss oracles evaluated without the tape.
    let strong_value = |m: &GenericModel, step: OneStep| strong_loss(m, &data, &w, step).unwrap();
    let weak_value = |m: &GenericModel| {
        let systems = assemble_dataset(&data, &plan, 1).unwrap();
        let fields: Vec<Array2<f64>> = systems
            .iter()
            .map(|s| {
                let mut f = Array2::zeros(s.y.dim());
                for q in 0..s.points() {
                    let x: Vec<f64> = s.y.column(q).to_vec();
                    for (l, v) in m.gfinn_field(&x).into_iter().enumerate() {
                        f[[l, q]] = v;
                    }
                }
                f
            })
            .collect();
        weak_loss(&systems, &fields, &w).unwrap()
    };
    let fd = |f: &dyn Fn(&GenericModel) -> f64| -> Vec<f64> {
        let h = 1e-5;
        (0..model.param_count())
            .map(|i| {
                let mut p = model.clone();
                let mut q = model.clone();
                p.params_mut()[i] += h;
                q.params_mut()[i] -= h;
                (f(&p) - f(&q)) / (2.0 * h)
            })
            .collect()
    };
    let mut first = Vec::new();
    for (name, loss, step) in [
        ("strong/euler", LossKind::Strong, OneStep::Euler),
        ("strong/rk23", LossKind::Strong, OneStep::Rk23),
        ("weak", LossKind::Weak, OneStep::Euler),
    ] {
        let tc = TrainConfig { loss, step, testfn, ..Default::default() };
        let (value, grad) = loss_and_gradient(&model, &data, &tc, &[1.0; 3]).unwrap();
        let (oracle_value, numeric) = match loss {
            LossKind::Strong => (strong_value(&model, step), fd(&|m| strong_value(m, step))),
            LossKind::Weak => (weak_value(&model), fd(&|m| weak_value(m))),
        };
        let gmax = grad.iter().fold(0.0f64, |a, g| a.max(g.abs()));
        let rel = worst_rel(&grad, &numeric, 1e-3 * gmax);
        let value_rel = ((value - oracle_value) / oracle_value).abs();
        first.push((name, rel, value_rel));
    }

    // Hessians of the learned potentials through the tape versus four-point
    // second differences of the potentials, Richardson-extrapolated.
    let x0 = [0.3, -0.7, 0.2];
    let mut t = Tape::new();
    let leaves = model.leaves(&mut t);
    let x = t.leaf(batch(&[x0.to_vec()]));
    let tf = model.field_tape(&mut t, &leaves, x);
    let mut second = 0.0f64;
    for (grad_var, pot) in [(tf.grad_energy, 0usize), (tf.grad_entropy, 1usize)] {
        let value = |p: &[f64]| if pot == 0 { model.energy(p).0 } else { model.entropy(p).0 };
        let d2 = |i: usize, j: usize, h: f64| {
            let at = |si: f64, sj: f64| {
                let mut p = x0;
                p[i] += si * h;
                p[j] += sj * h;
                value(&p)
            };
            (at(1.0, 1.0) - at(1.0, -1.0) - at(-1.0, 1.0) + at(-1.0, -1.0)) / (4.0 * h * h)
        };
        let mut tape_h = Vec::new();
        let mut fd_h = Vec::new();
        for i in 0..3 {
            let gi = t.slice_cols(grad_var, i, 1);
            let s = t.sum_all(gi);
            let row = t.grad(s, &[x])[0];
            for j in 0..3 {
                tape_h.push(t.value(row)[[0, j]]);
                let (a, b) = (d2(i, j, 2e-3), d2(i, j, 1e-3));
                fd_h.push((4.0 * b - a) / 3.0);
            }
        }
        let hmax = tape_h.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        second = second.max(worst_rel(&tape_h, &fd_h, 1e-3 * hmax));
    }
    let (fast, t_el) = within_time(start, 30.0);
    let first_ok = first.iter().all(|(_, rel, vrel)| *rel <= 1e-5 && *vrel <= 1e-12);
    let pass = first_ok && second <= 1e-4 && fast;
    let detail: Vec<String> =
        first.iter().map(|(n, r, v)| format!("{n}: grad rel {r:.2e}, value rel {v:.1e}")).collect();
    verdict(
        9,
        "gradient engine",
        pass,
        &format!("{}; input Hessian rel {second:.2e}; {t_el:.2}s", detail.join("; ")),
    );
    assert!(pass);
}

#[test]
fn criterion_10_thermodynamic_laws_along_learned_dynamics() {
    let _g = serial();
    let start = Instant::now();
    let grid = TimeGrid::new(0.0, 0.05, 100).unwrap();
    let method = Method::Rk23(Rk23Options::with_tol(1e-10, 1e-12));
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let (mut energy_drift, mut entropy_drop) = (0.0f64, 0.0f64);
    let mut ok = true;
    for k in 0..10u64 {
        let model = GenericModel::new(ModelConfig::new(3), 100 + k).unwrap();
        let x0: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let traj = integrate(&model, &x0, &grid, &method).unwrap();
        let e0 = model.energy(&x0).0;
        let mut s_prev = model.entropy(&x0).0;
        for row in traj.rows() {
            let x = row.to_vec();
            let drift = (model.energy(&x).0 - e0).abs();
            energy_drift = energy_drift.max(drift / (1.0 + e0.abs()));
            ok &= drift <= 1e-5 * (1.0 + e0.abs());
            let s = model.entropy(&x).0;
            entropy_drop = entropy_drop.max(s_prev - s);
            ok &= s - s_prev >= -1e-8;
            s_prev = s;
        }
    }
    let (fast, t) = within_time(start, 30.0);
    let pass = ok && fast;
    verdict(
        10,
        "thermodynamic laws along learned dynamics",
        pass,
        &format!("max |ΔE|/(1+|E0|) = {energy_drift:.3e}; largest entropy decrease {entropy_drop:.3e}; {t:.2}s"),
    );
    assert!(pass);
}

/// Iteration budget of each run; the single-core desk budget of 20 minutes
/// for ten runs does not accommodate the CLI default of 5,000.
const COMPARE_ITERS: usize = 1500;

#[test]
fn criterion_11_weak_beats_strong_on_noisy_data() {
    let _g = serial();
    let start = Instant::now();
    let cfg = CompareConfig { noise: 0.10, train_trajectories: 20, ..CompareConfig::default() }.with_iters(COMPARE_ITERS);
    let mut wins = 0;
    let mut lines = Vec::new();
    for seed in 1..=5u64 {
        let o = train_compare(&cfg, seed).unwrap();
        if o.weak.rel_l2_error < o.strong.rel_l2_error {
            wins += 1;
        }
        lines.push(format!("seed {seed}: weak {:.4} vs strong {:.4}", o.weak.rel_l2_error, o.strong.rel_l2_error));
    }
    let (fast, t) = within_time(start, 1200.0);
    let pass = wins >= 4 && fast;
    verdict(
        11,
        "weak beats strong on noisy data",
        pass,
        &format!("{wins}/5 seeds; {}; {COMPARE_ITERS} iterations; {t:.1}s", lines.join("; ")),
    );
    assert!(pass);
}

#[test]
fn criterion_12_brute_force_oracles() {
    let _g = serial();
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut strong_worst = 0.0f64;
    let mut weak_worst = 0.0f64;
    for inst in 0..100u64 {
        let lambda = if rng.random_bool(0.5) { -1.0 } else { 1.0 } * rng.random_range(0.5..3.0);
        let x0 = rng.random_range(0.5..2.0);
        let sigma = rng.random_range(0.0..0.05);

        let k = rng.random_range(10..=200usize);
        let dt = 1.0 / k as f64;
        let eps = normal_vector(1200, inst, k + 1);
        let y: Vec<f64> = (0..=k).map(|i| x0 * (lambda * i as f64 * dt).exp() + sigma * eps[i]).collect();
        let theta = strong_estimator(&y, dt).unwrap();
        let loss = |th: f64| {
            let step = Dd::from(th).mul(Dd::from(dt));
            let mut acc = Dd::ZERO;
            for i in 1..=k {
                let prev = Dd::from(y[i - 1]);
                let r = Dd::from(y[i]).sub(prev).sub(step.mul(prev));
                acc = acc.add(r.mul(r));
            }
            acc
        };
        let scanned = scan_minimize(loss, -100.0, 100.0, 2001);
        strong_worst = strong_worst.max((scanned - theta).abs());

        let m = rng.random_range(1..=12usize);
        let support = rng.random_range(0.3..4.0);
        let h = support / (2 * m) as f64;
        let bump = BumpTestFunction::new(-0.5 * support, 0.5 * support, rng.random_range(2..=6)).unwrap();
        let quad = symmetric_trapezoid(0.0, m, h).unwrap();
        let mut psi = Vec::new();
        let mut dpsi = Vec::new();
        for i in -(m as isize)..=(m as isize) {
            let (v, dv) = bump.eval(i as f64 * h);
            psi.push(quad.weight(i) * v);
            dpsi.push(quad.weight(i) * dv);
        }
        let eps = normal_vector(1201, inst, 2 * m + 1);
        let yw: Vec<f64> = (0..=2 * m)
            .map(|i| x0 * (lambda * (i as f64 - m as f64) * h).exp() + sigma * eps[i])
            .collect();
        let theta_w = weak_estimator(&yw, &psi, &dpsi).unwrap();
        let (mut a, mut b) = (Dd::ZERO, Dd::ZERO);
        for i in 0..yw.len() {
            a = a.add(Dd::from(yw[i]).mul(Dd::from(psi[i])));
            b = b.add(Dd::from(yw[i]).mul(Dd::from(dpsi[i])));
        }
        let wloss = |th: f64| {
            let r = Dd::from(th).mul(a).add(b);
            r.mul(r)
        };
        let scanned_w = scan_minimize(wloss, -100.0, 100.0, 2001);
        weak_worst = weak_worst.max((scanned_w - theta_w).abs());
    }

    // Assembled weak loss against the unassembled triple sum.
    let mut triple_worst = 0.0f64;
    for inst in 0..50u64 {
        let d = rng.random_range(1..=3usize);
        let n = rng.random_range(1..=3usize);
        let k = rng.random_range(12..=40usize);
        let dt = rng.random_range(0.01..0.2);
        let ell = rng.random_range(3..=k.min(15));
        let p = rng.random_range(2..=5u32);
        let s = rng.random_range(0.0..0.8);
        let Ok(plan) = place_supports(k, ell, p, s) else { continue };
        let grid = TimeGrid::new(0.0, dt, k).unwrap();
        let trajs: Vec<Array2<f64>> =
            (0..n).map(|_| Array2::from_shape_fn((k + 1, d), |_| rng.random_range(-2.0..2.0))).collect();
        let fields: Vec<Array2<f64>> =
            (0..n).map(|_| Array2::from_shape_fn((k + 1, d), |_| rng.random_range(-2.0..2.0))).collect();
        let weights: Vec<f64> = (0..d).map(|_| rng.random_range(0.1..3.0)).collect();
        let data = TrajectoryDataset::new(grid, trajs.clone()).unwrap();
        let systems = assemble_dataset(&data, &plan, 1).unwrap();
        let field_cols: Vec<Array2<f64>> = systems
            .iter()
            .zip(&fields)
            .map(|(sys, f)| {
                let idx = sys.sample_indices();
                Array2::from_shape_fn((d, idx.len()), |(l, q)| f[[idx[q], l]])
            })
            .collect();
        let assembled = weak_loss(&systems, &field_cols, &WeightMatrix::new(weights.clone()).unwrap()).unwrap();
        let mut total = 0.0;
        for (y, f) in trajs.iter().zip(&fields) {
            for &(i0, i1) in &plan.supports {
                let bump = BumpTestFunction::new(i0 as f64 * dt, i1 as f64 * dt, p).unwrap();
                for l in 0..d {
                    let mut r = 0.0;
                    for q in 0..=k {
                        let (v, dv) = bump.eval(q as f64 * dt);
                        r += dt * dv * y[[q, l]] + dt * v * f[[q, l]];
                    }
                    total += weights[l] * r * r;
                }
            }
        }
        let direct = total / (plan.count() * d * n) as f64;
        let _ = inst;
        triple_worst = triple_worst.max(((assembled - direct) / direct.abs().max(1e-300)).abs());
    }
    let (fast, t) = within_time(start, 10.0);
    let pass = strong_worst <= 1e-9 && weak_worst <= 1e-9 && triple_worst <= 1e-12 && fast;
    verdict(
        12,
        "brute-force oracle equivalences",
        pass,
        &format!(
            "strong |θ_scan-θ*| max {strong_worst:.3e}; weak {weak_worst:.3e}; weak loss vs triple sum rel {triple_worst:.3e}; {t:.2}s"
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_13_attention_disable_is_bit_identical() {
    let _g = serial();
    let start = Instant::now();
    let sys = damped_oscillator_benchmark(0.5).unwrap();
    let grid = TimeGrid::new(0.0, 0.02, 50).unwrap();
    let clean = sys.dataset(&sample_initial_states(5, 130), &grid, &Method::default()).unwrap();
    let data = add_noise(&clean, 0.1, 131).unwrap();
    let mut identical = true;
    for loss in [LossKind::Strong, LossKind::Weak] {
        let cfg = TrainConfig {
            loss,
            iters: 200,
            seed: 13,
            batch_size: Some(3),
            rba: RbaConfig { eta_star: 0.0, gamma: 1.0 },
            testfn: TestFnConfig { ell: 20, p: 4, s: 0.8, nbar: 1 },
            weight_decay: 1e-2,
            ..Default::default()
        };
        let mut a = GenericModel::new(ModelConfig::new(3), 14).unwrap();
        let mut b = a.clone();
        let ha = train(&mut a, &data, &cfg).unwrap();
        let hb = train_without_attention(&mut b, &data, &cfg).unwrap();
        identical &= a.params().iter().zip(b.params()).all(|(x, y)| x.to_bits() == y.to_bits());
        identical &= ha == hb;
    }
    let (fast, t) = within_time(start, 60.0);
    let pass = identical && fast;
    verdict(
        13,
        "attention disable equivalence",
        pass,
        &format!("strong and weak runs, 200 iterations: parameters and histories identical = {identical}; {t:.2}s"),
    );
    assert!(pass);
}
