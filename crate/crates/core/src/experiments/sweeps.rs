//! Monte-Carlo sweeps of the scalar estimators, returned as CSV tables.

use rayon::prelude::*;

use super::spec::{CrossingParams, StrongSweep, WeakSweep};
use crate::estimator1d::{
    euler_truncation, find_crossing_dt, monte_carlo, strong_estimator, strong_limit, weak_estimate_on_grid,
    EstimatorKind, McCell, Scenario1D,
};
use crate::testfn::{symmetric_trapezoid, three_point_testfn};
use crate::trajectory::io::fmt_f64;
use crate::{Error, Result};

/// A CSV table kept as formatted cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }
}

fn f(v: f64) -> String {
    fmt_f64(v)
}

/// `T/K` nearest to each requested step, deduplicated, descending `K`.
pub fn snap_steps(t_final: f64, dts: &[f64]) -> Vec<f64> {
    let mut ks: Vec<usize> = dts.iter().map(|dt| ((t_final / dt).round() as usize).max(1)).collect();
    ks.sort_unstable_by(|a, b| b.cmp(a));
    ks.dedup();
    ks.into_iter().map(|k| t_final / k as f64).collect()
}

/// Strong-estimator errors versus step size.
pub struct StrongTables {
    /// `sigma,dt,mean_error,std_error,mean_abs_rel_error,truncation`
    pub left: Table,
    /// `sigma,dt,run,error`
    pub left_scatter: Table,
    /// `dt,mean_scaled_error,mean_abs_scaled_error,limit`
    pub right: Table,
    /// `dt,run,scaled_abs_error,above`
    pub right_scatter: Table,
}

pub fn strong_sweep(p: &StrongSweep, seed: u64) -> Result<StrongTables> {
    let dts = snap_steps(p.t_final, &p.dts);
    let mut sigmas = p.sigmas.clone();
    if !sigmas.contains(&p.scaled_sigma) {
        sigmas.push(p.scaled_sigma);
    }
    let mut cells = Vec::new();
    for &sigma in &sigmas {
        for &dt in &dts {
            let scenario = Scenario1D::new(p.lambda, p.x0, p.t_final, dt, sigma, seed)?;
            cells.push(McCell { scenario, kind: EstimatorKind::Strong });
        }
    }
    let stats = monte_carlo(&cells, p.runs)?;
    let mut t = StrongTables {
        left: Table::new(&["sigma", "dt", "mean_error", "std_error", "mean_abs_rel_error", "truncation"]),
        left_scatter: Table::new(&["sigma", "dt", "run", "error"]),
        right: Table::new(&["dt", "mean_scaled_error", "mean_abs_scaled_error", "limit"]),
        right_scatter: Table::new(&["dt", "run", "scaled_abs_error", "above"]),
    };
    for (cell, st) in cells.iter().zip(&stats) {
        let s = &cell.scenario;
        if p.sigmas.contains(&s.sigma) {
            t.left.push(vec![
                f(s.sigma),
                f(s.dt),
                f(st.mean_error),
                f(st.std_error),
                f(st.mean_abs_rel_error),
                f(euler_truncation(s.lambda, s.dt)),
            ]);
            for (r, e) in st.errors.iter().take(p.scatter).enumerate() {
                t.left_scatter.push(vec![f(s.sigma), f(s.dt), r.to_string(), f(*e)]);
            }
        }
        if s.sigma == p.scaled_sigma {
            t.right.push(vec![
                f(s.dt),
                f(st.mean_scaled_error),
                f(st.mean_abs_scaled_error),
                f(strong_limit(s.lambda, s.sigma, s.x0, s.t_final)),
            ]);
            for (r, e) in st.errors.iter().take(p.scatter).enumerate() {
                t.right_scatter.push(vec![f(s.dt), r.to_string(), f(s.dt * e.abs()), (*e > 0.0).to_string()]);
            }
        }
    }
    Ok(t)
}

/// Weak-estimator errors versus support length, and strong versus weak on
/// shared data.
pub struct WeakTables {
    /// `sigma,support,mean_abs_rel_error,std_rel_error,frac_rel_above_one`
    pub left: Table,
    /// `sigma,support,run,rel_error`
    pub left_scatter: Table,
    /// `sigma,strong_mean_abs_rel_error,weak_mean_abs_rel_error,euler_rel_error`
    pub right: Table,
    /// `sigma,run,strong_rel_error,weak_rel_error`
    pub right_scatter: Table,
}

pub fn weak_sweep(p: &WeakSweep, seed: u64) -> Result<WeakTables> {
    let mut cells = Vec::new();
    for &sigma in &p.sigmas {
        for &support in &p.supports {
            let quad = symmetric_trapezoid(0.0, 1, 0.5 * support)?;
            let tf = three_point_testfn(p.lambda, support, &quad)?;
            // the horizon and step of the scenario are unused by the weak cell
            let scenario = Scenario1D::new(p.lambda, p.x0, 1.0, 1.0, sigma, seed)?;
            cells.push((support, McCell { scenario, kind: EstimatorKind::Weak(tf) }));
        }
    }
    let mc: Vec<McCell> = cells.iter().map(|(_, c)| c.clone()).collect();
    let stats = monte_carlo(&mc, p.runs)?;
    let mut t = WeakTables {
        left: Table::new(&["sigma", "support", "mean_abs_rel_error", "std_rel_error", "frac_rel_above_one"]),
        left_scatter: Table::new(&["sigma", "support", "run", "rel_error"]),
        right: Table::new(&["sigma", "strong_mean_abs_rel_error", "weak_mean_abs_rel_error", "euler_rel_error"]),
        right_scatter: Table::new(&["sigma", "run", "strong_rel_error", "weak_rel_error"]),
    };
    for ((support, cell), st) in cells.iter().zip(&stats) {
        let sigma = cell.scenario.sigma;
        t.left.push(vec![
            f(sigma),
            f(*support),
            f(st.mean_abs_rel_error),
            f(st.std_error / p.lambda.abs()),
            f(st.frac_rel_above_one),
        ]);
        for (r, e) in st.relative_errors(p.lambda).iter().take(p.scatter).enumerate() {
            t.left_scatter.push(vec![f(sigma), f(*support), r.to_string(), f(*e)]);
        }
    }
    // Both estimators read the same noisy samples; the weak one uses the
    // three samples at t* and t* ± S/2 with t* = S/2.
    let half = 0.5 * p.compare_support;
    let quad = symmetric_trapezoid(half, 1, half)?.on_grid(p.compare_dt)?;
    let tf = three_point_testfn(p.lambda, p.compare_support, &quad)?;
    let euler = euler_truncation(p.lambda, p.compare_dt) / p.lambda;
    for &sigma in &p.compare_sigmas {
        let s = Scenario1D::new(p.lambda, p.x0, p.compare_t_final, p.compare_dt, sigma, seed)?;
        let clean = s.clean_samples()?;
        let pairs = (0..p.runs as u64)
            .into_par_iter()
            .map(|r| {
                let eps = s.noise(r)?;
                let y: Vec<f64> = clean.iter().zip(&eps).map(|(c, e)| c + sigma * e).collect();
                let strong = (strong_estimator(&y, s.dt)? - s.lambda) / s.lambda;
                let weak = (weak_estimate_on_grid(&y, &tf)? - s.lambda) / s.lambda;
                Ok((strong, weak))
            })
            .collect::<Result<Vec<(f64, f64)>>>()?;
        let n = pairs.len() as f64;
        let ms = pairs.iter().map(|p| p.0.abs()).sum::<f64>() / n;
        let mw = pairs.iter().map(|p| p.1.abs()).sum::<f64>() / n;
        t.right.push(vec![f(sigma), f(ms), f(mw), f(euler)]);
        for (r, (a, b)) in pairs.iter().take(p.scatter).enumerate() {
            t.right_scatter.push(vec![f(sigma), r.to_string(), f(*a), f(*b)]);
        }
    }
    Ok(t)
}

/// `run,found,dt,error` per noise stream.
pub fn crossing_table(p: &CrossingParams, seed: u64) -> Result<Table> {
    if p.runs == 0 {
        return Err(Error::InvalidArgument("need at least one run".into()));
    }
    let s = Scenario1D::new(p.lambda, p.x0, p.t_final, p.t_final, p.sigma, seed)?;
    let found = (0..p.runs as u64)
        .into_par_iter()
        .map(|r| find_crossing_dt(&s, r, (p.dt_min, p.dt_max), p.scan))
        .collect::<Result<Vec<_>>>()?;
    let mut t = Table::new(&["run", "found", "dt", "error"]);
    for (r, c) in found.iter().enumerate() {
        match c {
            Some(c) => t.push(vec![r.to_string(), "true".into(), f(c.dt), f(c.error)]),
            None => t.push(vec![r.to_string(), "false".into(), String::new(), String::new()]),
        }
    }
    Ok(t)
}
