//! Trajectory CSV files: header `t,x1,…,xd`, one file per trajectory named
//! `traj_{i:04}.csv`, values written with 17 significant digits.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;

use super::{TimeGrid, TrajectoryDataset};
use crate::{Error, Result};

/// Formats a float with 17 significant digits, enough to round-trip any f64.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn trajectory_file_name(i: usize) -> String {
    format!("traj_{i:04}.csv")
}

pub fn trajectory_to_csv(grid: &TimeGrid, traj: &Array2<f64>) -> String {
    let d = traj.ncols();
    let mut s = String::from("t");
    for l in 1..=d {
        let _ = write!(s, ",x{l}");
    }
    s.push('\n');
    for (k, row) in traj.rows().into_iter().enumerate() {
        s.push_str(&fmt_f64(grid.time(k)));
        for v in row {
            s.push(',');
            s.push_str(&fmt_f64(*v));
        }
        s.push('\n');
    }
    s
}

/// Parses one trajectory file; returns the time column and the states.
pub fn trajectory_from_csv(text: &str) -> Result<(Vec<f64>, Array2<f64>)> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::Parse("empty trajectory file".into()))?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.first() != Some(&"t") || cols.len() < 2 {
        return Err(Error::Parse(format!("bad trajectory header `{header}`")));
    }
    let d = cols.len() - 1;
    let mut times = Vec::new();
    let mut vals = Vec::new();
    for (n, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != d + 1 {
            return Err(Error::Parse(format!("row {} has {} fields, expected {}", n + 1, fields.len(), d + 1)));
        }
        let parse = |f: &str| f.trim().parse::<f64>().map_err(|e| Error::Parse(format!("row {}: {e}", n + 1)));
        times.push(parse(fields[0])?);
        for f in &fields[1..] {
            vals.push(parse(f)?);
        }
    }
    let rows = times.len();
    let arr = Array2::from_shape_vec((rows, d), vals).map_err(|e| Error::Parse(e.to_string()))?;
    Ok((times, arr))
}

/// Writes every trajectory of `data` into `dir`; returns the written paths.
pub fn write_dataset(dir: &Path, data: &TrajectoryDataset) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    data.trajectories()
        .iter()
        .enumerate()
        .map(|(i, tr)| {
            let path = dir.join(trajectory_file_name(i));
            fs::write(&path, trajectory_to_csv(data.grid(), tr))?;
            Ok(path)
        })
        .collect()
}

/// Reads `traj_0000.csv`, `traj_0001.csv`, … from `dir` until the first gap.
pub fn read_dataset(dir: &Path) -> Result<TrajectoryDataset> {
    let mut trajs = Vec::new();
    let mut times = Vec::new();
    loop {
        let path = dir.join(trajectory_file_name(trajs.len()));
        if !path.exists() {
            break;
        }
        let (t, tr) = trajectory_from_csv(&fs::read_to_string(&path)?)?;
        if times.is_empty() {
            times = t;
        } else if t != times {
            return Err(Error::Parse(format!("{} uses a different time grid", path.display())));
        }
        trajs.push(tr);
    }
    if times.len() < 2 {
        return Err(Error::Parse(format!("no trajectories found in {}", dir.display())));
    }
    let dt = times[1] - times[0];
    let grid = TimeGrid::new(times[0], dt, times.len() - 1)?;
    TrajectoryDataset::new(grid, trajs)
}
