//! Plain-text file formats: trajectories, online histories, residual
//! tables and likelihood surfaces.
//!
//! Floats are written with 17 significant digits so every file reads back
//! to the same bits. Trajectories carry a JSON sidecar (`<stem>.meta.json`)
//! with the model, parameter and grid.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{ModelSpec, Theta};
use crate::offline::NormalitySample;
use crate::online::HistoryPoint;
use crate::simulate::{SimConfig, TrajectoryBatch};
use crate::surface::SurfacePoint;

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Companion file path: `out.csv` → `out.<suffix>`.
pub fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}"))
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}

pub(crate) fn indexed(prefix: &str, p: usize) -> impl Iterator<Item = String> + '_ {
    (1..=p).map(move |j| format!("{prefix}_{j}"))
}

pub(crate) fn csv_bytes(header: Vec<String>, records: impl IntoIterator<Item = Vec<String>>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&header).expect("in-memory write");
    for r in records {
        w.write_record(&r).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

pub(crate) fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::format(path, e.to_string()))?;
    let header = r
        .headers()
        .map_err(|e| Error::format(path, e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut records = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| Error::format(path, e.to_string()))?;
        records.push(rec.iter().map(str::to_string).collect());
    }
    Ok((header, records))
}

pub(crate) fn parse_field<T: std::str::FromStr>(path: &Path, s: &str) -> Result<T> {
    s.parse()
        .map_err(|_| Error::format(path, format!("cannot parse field '{s}'")))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct TrajectoryMeta {
    model: String,
    sigma: f64,
    theta_true: Theta,
    n_particles: usize,
    state_dim: usize,
    dt: f64,
    steps: usize,
    has_noise: bool,
    #[serde(default)]
    config: Option<SimConfig>,
}

/// Long-format trajectory CSV: `time, particle_id, x_1..x_d` and, when
/// the increments were recorded, `dw_1..dw_d` (the increment applied from
/// this frame to the next; empty on the last frame).
pub fn write_trajectory_csv(traj: &TrajectoryBatch, path: &Path) -> Result<Vec<PathBuf>> {
    let (n, d) = (traj.n_particles, traj.state_dim);
    let has_noise = traj.noise.is_some();
    let mut header = vec!["time".to_string(), "particle_id".to_string()];
    header.extend(indexed("x", d));
    if has_noise {
        header.extend(indexed("dw", d));
    }
    let steps = traj.steps();
    let records = (0..=steps).flat_map(|k| {
        let frame = traj.frame(k);
        let noise = if k < steps { traj.noise_frame(k) } else { None };
        (0..n).map(move |i| {
            let mut rec = vec![fmt_f64(traj.times[k]), i.to_string()];
            rec.extend(frame[i * d..(i + 1) * d].iter().map(|&v| fmt_f64(v)));
            if has_noise {
                match noise {
                    Some(nz) => rec.extend(nz[i * d..(i + 1) * d].iter().map(|&v| fmt_f64(v))),
                    None => rec.extend(std::iter::repeat_n(String::new(), d)),
                }
            }
            rec
        })
    });
    write_file(path, &csv_bytes(header, records))?;
    let meta = TrajectoryMeta {
        model: traj.model_id.clone(),
        sigma: traj.sigma,
        theta_true: traj.theta_true.clone(),
        n_particles: n,
        state_dim: d,
        dt: traj.dt,
        steps,
        has_noise,
        config: traj.config.clone(),
    };
    let meta_path = sidecar(path, "meta.json");
    let text = serde_json::to_string_pretty(&meta).expect("serializable");
    write_file(&meta_path, text.as_bytes())?;
    Ok(vec![path.to_path_buf(), meta_path])
}

/// Reads a trajectory written by [`write_trajectory_csv`]. The model named
/// in the sidecar must be a built-in one.
pub fn read_trajectory_csv(path: &Path) -> Result<TrajectoryBatch> {
    let meta_path = sidecar(path, "meta.json");
    let text = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let meta: TrajectoryMeta =
        serde_json::from_str(&text).map_err(|e| Error::format(&meta_path, e.to_string()))?;
    let model = ModelSpec::from_name(&meta.model)?.with_sigma(meta.sigma)?;
    let (n, d) = (meta.n_particles, meta.state_dim);
    if d != model.state_dim() {
        return Err(Error::format(&meta_path, "state dimension does not match the model"));
    }
    let (header, records) = read_csv(path)?;
    let width = 2 + d + if meta.has_noise { d } else { 0 };
    if header.len() != width || records.len() != (meta.steps + 1) * n {
        return Err(Error::format(path, "table shape does not match the sidecar"));
    }
    let mut frames = vec![Vec::with_capacity(n * d); meta.steps + 1];
    let mut noise = vec![Vec::with_capacity(n * d); meta.steps];
    for (row, rec) in records.iter().enumerate() {
        let (k, i) = (row / n, row % n);
        if parse_field::<usize>(path, &rec[1])? != i {
            return Err(Error::format(path, format!("unexpected particle order at row {row}")));
        }
        for c in 0..d {
            frames[k].push(parse_field(path, &rec[2 + c])?);
        }
        if meta.has_noise && k < meta.steps {
            for c in 0..d {
                noise[k].push(parse_field(path, &rec[2 + d + c])?);
            }
        }
    }
    let mut traj = TrajectoryBatch::from_frames(
        &model,
        meta.theta_true,
        n,
        meta.dt,
        frames,
        meta.has_noise.then_some(noise),
    )?;
    traj.config = meta.config;
    Ok(traj)
}

/// `t, theta_1..theta_p`.
pub fn write_history_csv(history: &[HistoryPoint], path: &Path) -> Result<()> {
    let p = history.first().map_or(0, |h| h.theta.len());
    let mut header = vec!["t".to_string()];
    header.extend(indexed("theta", p));
    let records = history.iter().map(|h| {
        let mut rec = vec![fmt_f64(h.t)];
        rec.extend(h.theta.iter().map(|&v| fmt_f64(v)));
        rec
    });
    write_file(path, &csv_bytes(header, records))
}

/// `trial, comp1, comp2` with `comp_j = √N(θ̂_j − θ_j)`.
pub fn write_residuals_csv(sample: &NormalitySample, path: &Path) -> Result<()> {
    let header = ["trial", "comp1", "comp2"].iter().map(|s| s.to_string()).collect();
    let records = sample
        .residuals
        .iter()
        .map(|(trial, r)| vec![trial.to_string(), fmt_f64(r[0]), fmt_f64(r[1])]);
    write_file(path, &csv_bytes(header, records))
}

/// `theta1, theta2, ips, mean_field`.
pub fn write_surface_csv(points: &[SurfacePoint], path: &Path) -> Result<()> {
    let header = ["theta1", "theta2", "ips", "mean_field"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let records = points.iter().map(|p| {
        vec![
            fmt_f64(p.theta1),
            fmt_f64(p.theta2),
            fmt_f64(p.ips),
            fmt_f64(p.mean_field),
        ]
    });
    write_file(path, &csv_bytes(header, records))
}
