//! Per-step measurement rows and their CSV form.
//!
//! The trajectory file is the interchange format between the simulator, the
//! metrics tooling and external plotting: one line per vehicle per step,
//! floats printed with six significant digits, absent values as empty fields.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};

pub const TRAJECTORY_HEADER: &str = "t,vehicle_id,controller,position,speed,accel,front_gap,\
back_gap,ttc,time_headway,jerk,r_safety,r_eff,r_comfort,r_safety_f,r_eff_f,reward,collision";

/// Unweighted reward components logged for RL-controlled vehicles, plus the
/// weighted total actually handed to the learner (which includes any terminal
/// collision penalty).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RewardBreakdown {
    pub safety: f64,
    pub efficiency: f64,
    pub comfort: f64,
    pub safety_back: f64,
    pub efficiency_back: f64,
    pub total: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VehicleRow {
    pub vehicle_id: usize,
    pub position: f64,
    pub speed: f64,
    pub accel: f64,
    /// Bumper-to-bumper clearance ahead; `None` for the head of an open chain.
    pub front_gap: Option<f64>,
    pub back_gap: Option<f64>,
    /// Defined only while closing on the leader.
    pub ttc: Option<f64>,
    /// Defined only while moving and with a leader present.
    pub time_headway: Option<f64>,
    pub jerk: f64,
    /// Present only on RL-controlled vehicles.
    pub reward: Option<RewardBreakdown>,
    pub collision: bool,
}

/// All vehicle rows for one simulation step, time-stamped at the end of the
/// step interval.
#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub t: f64,
    pub rows: Vec<VehicleRow>,
}

/// A trajectory parsed back from CSV: the records plus the controller tag of
/// each vehicle id.
#[derive(Clone, Debug)]
pub struct TrajectoryData {
    pub records: Vec<StepRecord>,
    pub controllers: Vec<String>,
}

/// Format with six significant digits, the fixed precision of every float in
/// exported CSV.
pub fn format_sig(value: f64) -> String {
    const DIGITS: i32 = 6;
    if value == 0.0 {
        return format!("{:.*}", DIGITS as usize, 0.0);
    }
    let magnitude = value.abs().log10().floor() as i32;
    let decimals = (DIGITS - 1 - magnitude).max(0) as usize;
    format!("{:.*}", decimals, value)
}

fn opt_sig(value: Option<f64>) -> String {
    value.map(format_sig).unwrap_or_default()
}

pub fn write_trajectory_csv<W: Write>(
    mut w: W,
    records: &[StepRecord],
    controllers: &[String],
) -> std::io::Result<()> {
    writeln!(w, "{}", TRAJECTORY_HEADER)?;
    for record in records {
        for row in &record.rows {
            let (rs, re, rc, rsf, ref_, rt) = match &row.reward {
                Some(b) => (
                    format_sig(b.safety),
                    format_sig(b.efficiency),
                    format_sig(b.comfort),
                    format_sig(b.safety_back),
                    format_sig(b.efficiency_back),
                    format_sig(b.total),
                ),
                None => Default::default(),
            };
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                format_sig(record.t),
                row.vehicle_id,
                controllers
                    .get(row.vehicle_id)
                    .map(String::as_str)
                    .unwrap_or(""),
                format_sig(row.position),
                format_sig(row.speed),
                format_sig(row.accel),
                opt_sig(row.front_gap),
                opt_sig(row.back_gap),
                opt_sig(row.ttc),
                opt_sig(row.time_headway),
                format_sig(row.jerk),
                rs,
                re,
                rc,
                rsf,
                ref_,
                rt,
                u8::from(row.collision),
            )?;
        }
    }
    Ok(())
}

pub fn trajectory_to_string(records: &[StepRecord], controllers: &[String]) -> String {
    let mut buf = Vec::new();
    write_trajectory_csv(&mut buf, records, controllers).expect("writing to Vec cannot fail");
    String::from_utf8(buf).expect("csv output is ascii")
}

fn parse_f64(field: &str, line: usize) -> Result<f64> {
    field.parse::<f64>().map_err(|_| Error::Csv {
        line,
        msg: format!("bad float `{field}`"),
    })
}

fn parse_opt(field: &str, line: usize) -> Result<Option<f64>> {
    if field.is_empty() {
        Ok(None)
    } else {
        parse_f64(field, line).map(Some)
    }
}

/// Parse a trajectory CSV produced by [`write_trajectory_csv`]. Rows are
/// grouped into step records by their (textual) time stamp.
pub fn read_trajectory_csv<R: BufRead>(reader: R) -> Result<TrajectoryData> {
    let mut records: Vec<StepRecord> = Vec::new();
    let mut controllers: Vec<(usize, String)> = Vec::new();
    let mut current_t: Option<String> = None;

    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        if idx == 0 {
            if line.trim() != TRAJECTORY_HEADER {
                return Err(Error::Csv {
                    line: lineno,
                    msg: "unrecognized header".into(),
                });
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 18 {
            return Err(Error::Csv {
                line: lineno,
                msg: format!("expected 18 fields, got {}", fields.len()),
            });
        }
        let vehicle_id = fields[1].parse::<usize>().map_err(|_| Error::Csv {
            line: lineno,
            msg: format!("bad vehicle id `{}`", fields[1]),
        })?;
        let reward = if fields[11].is_empty() {
            None
        } else {
            Some(RewardBreakdown {
                safety: parse_f64(fields[11], lineno)?,
                efficiency: parse_f64(fields[12], lineno)?,
                comfort: parse_f64(fields[13], lineno)?,
                safety_back: parse_f64(fields[14], lineno)?,
                efficiency_back: parse_f64(fields[15], lineno)?,
                total: parse_f64(fields[16], lineno)?,
            })
        };
        let row = VehicleRow {
            vehicle_id,
            position: parse_f64(fields[3], lineno)?,
            speed: parse_f64(fields[4], lineno)?,
            accel: parse_f64(fields[5], lineno)?,
            front_gap: parse_opt(fields[6], lineno)?,
            back_gap: parse_opt(fields[7], lineno)?,
            ttc: parse_opt(fields[8], lineno)?,
            time_headway: parse_opt(fields[9], lineno)?,
            jerk: parse_f64(fields[10], lineno)?,
            reward,
            collision: fields[17] == "1",
        };
        if controllers.iter().all(|(id, _)| *id != vehicle_id) {
            controllers.push((vehicle_id, fields[2].to_string()));
        }
        if current_t.as_deref() != Some(fields[0]) {
            records.push(StepRecord {
                t: parse_f64(fields[0], lineno)?,
                rows: Vec::new(),
            });
            current_t = Some(fields[0].to_string());
        }
        records
            .last_mut()
            .expect("record pushed above")
            .rows
            .push(row);
    }

    controllers.sort_by_key(|(id, _)| *id);
    let tags = controllers.into_iter().map(|(_, tag)| tag).collect();
    Ok(TrajectoryData {
        records,
        controllers: tags,
    })
}
