//! Surrogate safety / efficiency / comfort measures and episode aggregation.
//!
//! Undefined-value policy: TTC is undefined while not closing, time headway
//! is undefined while stopped; both are excluded from means rather than
//! substituted with sentinels.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::record::StepRecord;
use crate::reward;

/// Default transient cut for oscillation analysis, in forcing periods. Long
/// enough for the wave front to reach the tail of a 12-vehicle platoon and
/// for the start-up response to settle before amplitudes are read.
pub const DEFAULT_TRANSIENT_PERIODS: f64 = 6.0;

/// Time to collision. `dv` is the leader speed minus the follower speed; the
/// metric is defined only while the follower closes (dv < 0).
pub fn ttc(gap: f64, dv: f64) -> Option<f64> {
    if dv < 0.0 {
        Some(gap / -dv)
    } else {
        None
    }
}

/// Time for the follower to reach the leader's current position:
/// (gap + leader length) / speed. Undefined when stopped.
pub fn time_headway(gap: f64, leader_length: f64, speed: f64) -> Option<f64> {
    if speed > 0.0 {
        Some((gap + leader_length) / speed)
    } else {
        None
    }
}

/// Rate of change of acceleration. Callers use `prev_accel = 0` on the first
/// step of an episode.
pub fn jerk(accel: f64, prev_accel: f64, dt: f64) -> f64 {
    (accel - prev_accel) / dt
}

/// Mean of the log-TTC safety score over the steps where TTC is defined
/// (the Safety column of the perturbation summaries). Zero when no step has
/// a defined TTC.
pub fn log_ttc_safety<I: IntoIterator<Item = Option<f64>>>(ttcs: I) -> f64 {
    let mut sum = 0.0;
    let mut n = 0usize;
    for t in ttcs {
        if t.is_some() {
            sum += reward::f_safety(t);
            n += 1;
        }
    }
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Post-transient speed oscillation amplitude per vehicle: (max - min) / 2
/// over a whole number of forcing periods after `transient_cut` seconds.
pub fn oscillation_amplitudes(
    speeds: &[Vec<f64>],
    dt: f64,
    period: f64,
    transient_cut: f64,
) -> Result<Vec<f64>> {
    let per = (period / dt).round() as usize;
    let start = (transient_cut / dt).round() as usize;
    let len = speeds.iter().map(Vec::len).min().unwrap_or(0);
    let needed = start + per.max(1);
    if per == 0 || len < needed {
        return Err(Error::SeriesTooShort { needed, have: len });
    }
    let whole_periods = (len - start) / per;
    let end = start + whole_periods * per;
    Ok(speeds
        .iter()
        .map(|series| {
            let window = &series[start..end];
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for &v in window {
                lo = lo.min(v);
                hi = hi.max(v);
            }
            (hi - lo) / 2.0
        })
        .collect())
}

/// Per-vehicle speed series extracted from a record stream, indexed by
/// vehicle id.
pub fn speed_series(records: &[StepRecord], num_vehicles: usize) -> Vec<Vec<f64>> {
    let mut series = vec![Vec::with_capacity(records.len()); num_vehicles];
    for record in records {
        for row in &record.rows {
            if row.vehicle_id < num_vehicles {
                series[row.vehicle_id].push(row.speed);
            }
        }
    }
    series
}

/// Episode-level aggregates. Means are taken over the steps (and vehicles)
/// where the quantity is defined; `None` means it was never defined.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub mean_time_headway: Option<f64>,
    pub mean_abs_jerk: f64,
    pub mean_ttc: Option<f64>,
    pub mean_log_ttc_safety: f64,
    pub collision_count: usize,
    pub mean_speed: f64,
}

impl EpisodeMetrics {
    /// Aggregate over a record stream. `subjects` restricts the computation
    /// to the given vehicle ids; `None` includes every vehicle.
    pub fn from_records(records: &[StepRecord], subjects: Option<&[usize]>) -> Self {
        let included = |id: usize| subjects.is_none_or(|s| s.contains(&id));

        let mut headway = MeanAcc::default();
        let mut ttc_acc = MeanAcc::default();
        let mut jerk_acc = MeanAcc::default();
        let mut speed_acc = MeanAcc::default();
        let mut safety_sum = 0.0;
        let mut safety_n = 0usize;
        let mut collisions = 0usize;

        for record in records {
            for row in &record.rows {
                if !included(row.vehicle_id) {
                    continue;
                }
                if let Some(h) = row.time_headway {
                    headway.push(h);
                }
                if let Some(t) = row.ttc {
                    ttc_acc.push(t);
                    safety_sum += reward::f_safety(Some(t));
                    safety_n += 1;
                }
                jerk_acc.push(row.jerk.abs());
                speed_acc.push(row.speed);
                if row.collision {
                    collisions += 1;
                }
            }
        }

        EpisodeMetrics {
            mean_time_headway: headway.mean(),
            mean_abs_jerk: jerk_acc.mean().unwrap_or(0.0),
            mean_ttc: ttc_acc.mean(),
            mean_log_ttc_safety: if safety_n == 0 {
                0.0
            } else {
                safety_sum / safety_n as f64
            },
            collision_count: collisions,
            mean_speed: speed_acc.mean().unwrap_or(0.0),
        }
    }
}

#[derive(Default)]
struct MeanAcc {
    sum: f64,
    n: usize,
}

impl MeanAcc {
    fn push(&mut self, v: f64) {
        self.sum += v;
        self.n += 1;
    }

    fn mean(&self) -> Option<f64> {
        if self.n == 0 {
            None
        } else {
            Some(self.sum / self.n as f64)
        }
    }
}
