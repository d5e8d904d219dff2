pub mod eval;
pub mod metrics;
pub mod perturb;
pub mod simulate;
pub mod table;
pub mod train;

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use platoon_core::config::Config;
use platoon_core::metrics::EpisodeMetrics;
use platoon_core::record::{format_sig, write_trajectory_csv, StepRecord};

/// Which experiment family a metrics file came from; decides the summary
/// table columns (TTC for closed-loop runs, log-TTC safety for perturbation
/// runs).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunKind {
    ClosedLoop,
    Perturbation,
}

impl std::fmt::Display for RunKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunKind::ClosedLoop => write!(f, "closed-loop"),
            RunKind::Perturbation => write!(f, "perturbation"),
        }
    }
}

/// Contents of a `metrics.json` artifact.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MethodMetrics {
    pub method: String,
    pub kind: RunKind,
    #[serde(flatten)]
    pub metrics: EpisodeMetrics,
}

pub fn write_metrics_json(dir: &Path, metrics: &MethodMetrics) -> anyhow::Result<PathBuf> {
    let path = dir.join("metrics.json");
    let file = std::fs::File::create(&path)?;
    serde_json::to_writer_pretty(std::io::BufWriter::new(file), metrics)?;
    Ok(path)
}

pub fn write_trajectory(
    dir: &Path,
    records: &[StepRecord],
    config: &Config,
) -> anyhow::Result<PathBuf> {
    let tags: Vec<String> = config
        .scenario
        .vehicles
        .iter()
        .map(|v| v.controller.clone())
        .collect();
    let path = dir.join("trajectory.csv");
    let file = std::fs::File::create(&path)?;
    write_trajectory_csv(std::io::BufWriter::new(file), records, &tags)?;
    Ok(path)
}

/// `t,vehicle_id,position` export for space-time plots.
pub fn write_spacetime(dir: &Path, records: &[StepRecord]) -> anyhow::Result<PathBuf> {
    let path = dir.join("spacetime.csv");
    let file = std::fs::File::create(&path)?;
    let mut w = std::io::BufWriter::new(file);
    writeln!(w, "t,vehicle_id,position")?;
    for record in records {
        for row in &record.rows {
            writeln!(
                w,
                "{},{},{}",
                format_sig(record.t),
                row.vehicle_id,
                format_sig(row.position)
            )?;
        }
    }
    Ok(path)
}

/// The method under test: controller of the subject vehicles.
pub fn subject_method(config: &Config) -> String {
    config
        .scenario
        .subjects
        .first()
        .and_then(|&i| config.scenario.vehicles.get(i))
        .map(|v| v.controller.clone())
        .unwrap_or_else(|| "mixed".into())
}

/// Report collisions on stderr and pick the exit code for a finished episode.
pub fn episode_exit_code(records: &[StepRecord], collided: bool, frozen: bool) -> i32 {
    if frozen {
        eprintln!("warning: a vehicle reached the end of the road; episode frozen early");
    }
    if !collided {
        return 0;
    }
    if let Some(record) = records.last() {
        for row in &record.rows {
            if row.collision {
                eprintln!(
                    "collision: vehicle {} rear-ended its leader at t = {} s (front gap {:.3} m)",
                    row.vehicle_id,
                    format_sig(record.t),
                    row.front_gap.unwrap_or(0.0)
                );
            }
        }
    }
    3
}
