//! Executes an [`ExperimentSpec`], writing CSVs and `manifest.json`.

use std::fs;
use std::path::Path;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::json;

use super::compare::{rollouts, train_compare, CompareConfig};
use super::metrics::rel_l2_error;
use super::spec::{EvaluateParams, Experiment, ExperimentSpec, GenDataParams};
use super::sweeps::{crossing_table, strong_sweep, weak_sweep, Table};
use crate::genericnet::{degeneracy_report, load_checkpoint, save_checkpoint, DegeneracyReport};
use crate::trajectory::io::{fmt_f64, read_dataset, write_dataset};
use crate::trajectory::{add_noise, damped_oscillator_benchmark, sample_initial_states, Method, TimeGrid};
use crate::{Error, Result};

/// Contents of `manifest.json`.
#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub tool: &'static str,
    pub version: &'static str,
    pub spec: ExperimentSpec,
    pub threads: usize,
    pub started_unix: u64,
    pub elapsed_seconds: f64,
    /// Files written, relative to the output directory.
    pub outputs: Vec<String>,
}

struct Outputs<'a> {
    dir: &'a Path,
    written: Vec<String>,
}

impl Outputs<'_> {
    fn text(&mut self, name: &str, body: &str) -> Result<()> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(path, body)?;
        self.written.push(name.to_string());
        Ok(())
    }

    fn table(&mut self, name: &str, t: &Table) -> Result<()> {
        self.text(name, &t.to_csv())
    }
}

pub fn run(spec: &ExperimentSpec) -> Result<RunRecord> {
    let start = Instant::now();
    let started_unix = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    fs::create_dir_all(&spec.out)?;
    let mut out = Outputs { dir: &spec.out, written: Vec::new() };
    let seed = spec.seed;
    match &spec.experiment {
        Experiment::GenData(p) => gen_data(p, seed, &mut out)?,
        Experiment::EstimateStrong(p) => {
            let t = strong_sweep(p, seed)?;
            out.table("fig1_left.csv", &t.left)?;
            out.table("fig1_left_scatter.csv", &t.left_scatter)?;
            out.table("fig1_right.csv", &t.right)?;
            out.table("fig1_right_scatter.csv", &t.right_scatter)?;
        }
        Experiment::EstimateWeak(p) => {
            let t = weak_sweep(p, seed)?;
            out.table("fig2_left.csv", &t.left)?;
            out.table("fig2_left_scatter.csv", &t.left_scatter)?;
            out.table("fig2_right.csv", &t.right)?;
            out.table("fig2_right_scatter.csv", &t.right_scatter)?;
        }
        Experiment::Crossing(p) => out.table("crossing.csv", &crossing_table(p, seed)?)?,
        Experiment::TrainCompare(c) => compare(c, seed, &mut out)?,
        Experiment::Evaluate(p) => evaluate(p, &mut out)?,
    }
    let mut record = RunRecord {
        tool: "weakdyn",
        version: env!("CARGO_PKG_VERSION"),
        spec: spec.clone(),
        threads: rayon::current_num_threads(),
        started_unix,
        elapsed_seconds: 0.0,
        outputs: out.written.clone(),
    };
    record.elapsed_seconds = start.elapsed().as_secs_f64();
    let text = serde_json::to_string_pretty(&record).map_err(|e| Error::Parse(e.to_string()))?;
    fs::write(spec.out.join("manifest.json"), text)?;
    Ok(record)
}

/// Machine-readable failure record: `{"status":"error","kind":…,"message":…}`.
pub fn error_record(e: &Error) -> serde_json::Value {
    let kind = if e.is_numerical() { "numerical" } else { "spec" };
    json!({ "status": "error", "kind": kind, "message": e.to_string() })
}

/// CLI exit status for an error: 3 for numerical failures, 2 otherwise.
pub fn exit_code(e: &Error) -> i32 {
    if e.is_numerical() {
        3
    } else {
        2
    }
}

fn gen_data(p: &GenDataParams, seed: u64, out: &mut Outputs) -> Result<()> {
    let sys = damped_oscillator_benchmark(p.zeta)?;
    let grid = TimeGrid::new(0.0, p.dt, p.steps)?;
    let clean = sys.dataset(&sample_initial_states(p.trajectories, seed), &grid, &Method::default())?;
    let noisy = add_noise(&clean, p.noise, seed.wrapping_add(1))?;
    for (sub, data) in [("clean", &clean), ("noisy", &noisy)] {
        for path in write_dataset(&out.dir.join(sub), data)? {
            let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
            out.written.push(format!("{sub}/{name}"));
        }
    }
    let mut t = Table::new(&["state", "mean", "std"]);
    for (l, (m, s)) in clean.mean().iter().zip(clean.std()).enumerate() {
        t.push(vec![(l + 1).to_string(), fmt_f64(*m), fmt_f64(*s)]);
    }
    out.table("stats.csv", &t)
}

fn degeneracy_row(r: &DegeneracyReport) -> Vec<String> {
    [r.poisson_entropy, r.friction_energy, r.poisson_skew, r.friction_symmetry, r.min_eig_friction]
        .iter()
        .map(|v| fmt_f64(*v))
        .collect()
}

const DEGENERACY_COLUMNS: [&str; 5] =
    ["poisson_entropy", "friction_energy", "poisson_skew", "friction_symmetry", "min_eig_friction"];

fn compare(cfg: &CompareConfig, seed: u64, out: &mut Outputs) -> Result<()> {
    let o = train_compare(cfg, seed)?;
    let mut header = vec!["loss", "rel_l2_error", "final_loss"];
    header.extend(DEGENERACY_COLUMNS);
    let mut summary = Table::new(&header);
    for (name, m) in [("strong", &o.strong), ("weak", &o.weak)] {
        let mut row = vec![
            name.to_string(),
            fmt_f64(m.rel_l2_error),
            fmt_f64(m.history.final_loss().unwrap_or(f64::NAN)),
        ];
        row.extend(degeneracy_row(&m.degeneracy));
        summary.push(row);
        out.text(&format!("history_{name}.csv"), &m.history.to_csv())?;
        let path = out.dir.join(format!("{name}_model.json"));
        save_checkpoint(&m.model, &path)?;
        out.written.push(format!("{name}_model.json"));
    }
    out.table("train_compare.csv", &summary)?;
    let mut cal = Table::new(&[
        "t",
        "energy_true",
        "energy_strong",
        "energy_weak",
        "entropy_true",
        "entropy_strong",
        "entropy_weak",
    ]);
    let pick = |c: &Option<super::metrics::Calibration>, k: usize| {
        c.as_ref().map(|c| fmt_f64(c.calibrated[k])).unwrap_or_default()
    };
    for (k, t) in o.times.iter().enumerate() {
        cal.push(vec![
            fmt_f64(*t),
            fmt_f64(o.true_energy[k]),
            pick(&o.strong.energy, k),
            pick(&o.weak.energy, k),
            fmt_f64(o.true_entropy[k]),
            pick(&o.strong.entropy, k),
            pick(&o.weak.entropy, k),
        ]);
    }
    out.table("calibration.csv", &cal)
}

fn evaluate(p: &EvaluateParams, out: &mut Outputs) -> Result<()> {
    let model = load_checkpoint(&p.checkpoint)?;
    let data = read_dataset(&p.data)?;
    if data.dim() != model.config().dim {
        return Err(Error::DimensionMismatch { expected: model.config().dim, got: data.dim() });
    }
    let rel = match rollouts(&model, &data) {
        Some(pred) => rel_l2_error(data.trajectories(), &pred)?,
        None => f64::INFINITY,
    };
    let points: Vec<Vec<f64>> = data
        .trajectories()
        .iter()
        .flat_map(|x| x.rows().into_iter().map(|r| r.to_vec()).collect::<Vec<_>>())
        .collect();
    let mut header = vec!["rel_l2_error"];
    header.extend(DEGENERACY_COLUMNS);
    let mut t = Table::new(&header);
    let mut row = vec![fmt_f64(rel)];
    row.extend(degeneracy_row(&degeneracy_report(&model, &points)));
    t.push(row);
    out.table("evaluate.csv", &t)
}
