//! Discrete-time longitudinal kinematics on a ring or an open chain.
//!
//! Integration is semi-implicit Euler: speed updates first (clamped at zero,
//! there is no reverse gear), then position. Positions are front-bumper
//! coordinates; gaps are bumper-to-bumper clearances. Vehicle order is fixed
//! on the single lane — a would-be overtake is flagged as a collision and the
//! episode is expected to terminate.

use crate::config::{ScenarioConfig, Topology};
use crate::error::{Error, Result};
use crate::metrics;
use crate::record::{StepRecord, VehicleRow};

#[derive(Clone, Debug, PartialEq)]
pub struct VehicleState {
    pub id: usize,
    /// Front-bumper position in meters; on a ring always reduced into
    /// [0, track_length).
    pub position: f64,
    /// Never negative.
    pub speed: f64,
    /// Acceleration realized over the last step (zero before the first step).
    pub accel: f64,
    pub length: f64,
    pub controller: String,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrontNeighbor {
    /// Bumper-to-bumper clearance; non-positive only in a flagged collision.
    pub gap: f64,
    pub speed: f64,
    pub length: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BackNeighbor {
    pub gap: f64,
    pub speed: f64,
}

/// What a vehicle can sense: its immediate leader and follower. Absent
/// neighbors are reported as absent, never as zero gaps.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NeighborView {
    pub front: Option<FrontNeighbor>,
    pub back: Option<BackNeighbor>,
}

#[derive(Clone, Debug)]
pub struct SimState {
    topology: Topology,
    dt: f64,
    vehicles: Vec<VehicleState>,
    /// Cached clearance ahead of each vehicle, `None` where no leader exists.
    front_gaps: Vec<Option<f64>>,
    steps_done: usize,
    collided: bool,
}

/// Build the initial simulation state from a validated scenario.
pub fn init_scenario(config: &ScenarioConfig) -> Result<SimState> {
    config.validate()?;

    let mut vehicles: Vec<VehicleState> = config
        .vehicles
        .iter()
        .enumerate()
        .map(|(id, spec)| VehicleState {
            id,
            position: spec.position,
            speed: spec.speed,
            accel: 0.0,
            length: spec.length,
            controller: spec.controller.clone(),
        })
        .collect();

    if let Topology::Ring { length } = config.topology {
        for v in &mut vehicles {
            v.position = v.position.rem_euclid(length);
        }
    }

    // Initial gaps from the ordered roster, unwrapped: the single wrap-around
    // pair on a ring is handled explicitly so that an overlapping roster
    // cannot alias into a nearly-full-lap clearance.
    let n = vehicles.len();
    let mut front_gaps = vec![None; n];
    for i in 0..n {
        let lead = match config.topology {
            Topology::Ring { .. } if n > 1 => (i + 1) % n,
            Topology::Ring { .. } => continue,
            Topology::OpenChain { .. } if i + 1 < n => i + 1,
            Topology::OpenChain { .. } => continue,
        };
        let mut gap = vehicles[lead].position - vehicles[lead].length - vehicles[i].position;
        if lead < i {
            gap += config.topology.length();
        }
        if gap <= 0.0 {
            return Err(Error::OverlappingVehicles {
                follower: i,
                leader: lead,
                gap,
            });
        }
        front_gaps[i] = Some(gap);
    }

    Ok(SimState {
        topology: config.topology,
        dt: config.dt,
        vehicles,
        front_gaps,
        steps_done: 0,
        collided: false,
    })
}

impl SimState {
    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn num_vehicles(&self) -> usize {
        self.vehicles.len()
    }

    pub fn vehicles(&self) -> &[VehicleState] {
        &self.vehicles
    }

    pub fn vehicle(&self, id: usize) -> Result<&VehicleState> {
        self.vehicles.get(id).ok_or(Error::UnknownVehicle(id))
    }

    /// Simulation time at the end of the last completed step.
    pub fn time(&self) -> f64 {
        self.steps_done as f64 * self.dt
    }

    pub fn steps_done(&self) -> usize {
        self.steps_done
    }

    pub fn collided(&self) -> bool {
        self.collided
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    fn leader_of(&self, id: usize) -> Option<usize> {
        let n = self.vehicles.len();
        match self.topology {
            Topology::Ring { .. } if n > 1 => Some((id + 1) % n),
            Topology::Ring { .. } => None,
            Topology::OpenChain { .. } => (id + 1 < n).then_some(id + 1),
        }
    }

    fn follower_of(&self, id: usize) -> Option<usize> {
        let n = self.vehicles.len();
        match self.topology {
            Topology::Ring { .. } if n > 1 => Some((id + n - 1) % n),
            Topology::Ring { .. } => None,
            Topology::OpenChain { .. } => id.checked_sub(1),
        }
    }

    /// Gap ahead of `id` recomputed from positions (ring distances wrap).
    fn positional_gap(&self, id: usize) -> Option<f64> {
        let lead = self.leader_of(id)?;
        let me = &self.vehicles[id];
        let leader = &self.vehicles[lead];
        let raw = leader.position - leader.length - me.position;
        Some(match self.topology {
            Topology::Ring { length } => raw.rem_euclid(length),
            Topology::OpenChain { .. } => raw,
        })
    }

    /// Immediate leader and follower of `id`, with bumper-to-bumper gaps.
    pub fn neighbors(&self, id: usize) -> Result<NeighborView> {
        if id >= self.vehicles.len() {
            return Err(Error::UnknownVehicle(id));
        }
        let front = self.leader_of(id).map(|lead| FrontNeighbor {
            gap: self.front_gaps[id].expect("leader implies cached gap"),
            speed: self.vehicles[lead].speed,
            length: self.vehicles[lead].length,
        });
        let back = self.follower_of(id).map(|fol| BackNeighbor {
            gap: self.front_gaps[fol].expect("follower implies cached gap"),
            speed: self.vehicles[fol].speed,
        });
        Ok(NeighborView { front, back })
    }

    /// Advance one step under the given per-vehicle acceleration commands and
    /// report the post-step measurements.
    pub fn step(&mut self, commands: &[f64]) -> Result<StepRecord> {
        let n = self.vehicles.len();
        if commands.len() != n {
            return Err(Error::CommandCount {
                expected: n,
                got: commands.len(),
            });
        }
        for (i, &a) in commands.iter().enumerate() {
            if !a.is_finite() {
                return Err(Error::NonFiniteCommand {
                    vehicle: i,
                    value: a,
                });
            }
        }

        let dt = self.dt;
        let prev_speeds: Vec<f64> = self.vehicles.iter().map(|v| v.speed).collect();
        let prev_accels: Vec<f64> = self.vehicles.iter().map(|v| v.accel).collect();

        // Speed first (clamped at zero), then position.
        let mut new_speeds = vec![0.0; n];
        for i in 0..n {
            new_speeds[i] = (prev_speeds[i] + commands[i] * dt).max(0.0);
        }
        for i in 0..n {
            let v = &mut self.vehicles[i];
            v.accel = (new_speeds[i] - prev_speeds[i]) / dt; // realized, post-clamp
            v.speed = new_speeds[i];
            v.position += new_speeds[i] * dt;
            if let Topology::Ring { length } = self.topology {
                v.position = v.position.rem_euclid(length);
            }
        }

        // Gap update. The incremental form detects closure through zero even
        // when the wrapped positional distance would alias to nearly a full
        // lap; away from collisions the positional form is used so gaps stay
        // consistent with positions.
        let mut collisions = vec![false; n];
        for i in 0..n {
            let Some(lead) = self.leader_of(i) else {
                continue;
            };
            let old = self.front_gaps[i].expect("leader implies cached gap");
            let inc = old + (new_speeds[lead] - new_speeds[i]) * dt;
            if inc <= 0.0 {
                collisions[i] = true;
                self.collided = true;
                self.front_gaps[i] = Some(inc);
            } else {
                let mut gap = self.positional_gap(i).expect("leader exists");
                if let Topology::Ring { length } = self.topology {
                    if (gap - inc).abs() > length / 2.0 {
                        gap = inc;
                    }
                }
                self.front_gaps[i] = Some(gap);
            }
        }

        self.steps_done += 1;
        let t = self.steps_done as f64 * dt;

        let rows = (0..n)
            .map(|i| {
                let v = &self.vehicles[i];
                let front = self.leader_of(i);
                let front_gap = self.front_gaps[i];
                let back_gap = self.follower_of(i).and_then(|f| self.front_gaps[f]);
                let (ttc, time_headway) = match front {
                    Some(lead) => {
                        let gap = front_gap.expect("leader implies gap");
                        let leader = &self.vehicles[lead];
                        (
                            metrics::ttc(gap, leader.speed - v.speed),
                            metrics::time_headway(gap, leader.length, v.speed),
                        )
                    }
                    None => (None, None),
                };
                VehicleRow {
                    vehicle_id: i,
                    position: v.position,
                    speed: v.speed,
                    accel: v.accel,
                    front_gap,
                    back_gap,
                    ttc,
                    time_headway,
                    jerk: metrics::jerk(v.accel, prev_accels[i], dt),
                    reward: None,
                    collision: collisions[i],
                }
            })
            .collect();

        Ok(StepRecord { t, rows })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::VehicleSpec;
    use approx::assert_relative_eq;

    fn ring_config(n: usize, track: f64, speed: f64) -> ScenarioConfig {
        let spacing = track / n as f64;
        ScenarioConfig {
            topology: Topology::Ring { length: track },
            vehicles: (0..n)
                .map(|i| VehicleSpec {
                    controller: "idm".into(),
                    position: spacing * i as f64,
                    speed,
                    length: 5.0,
                })
                .collect(),
            ..ScenarioConfig::base_ring(track)
        }
    }

    #[test]
    fn equally_spaced_ring_has_equal_gaps() {
        let state = init_scenario(&ring_config(10, 250.0, 20.0)).unwrap();
        for i in 0..10 {
            let nv = state.neighbors(i).unwrap();
            let front = nv.front.unwrap();
            let back = nv.back.unwrap();
            assert_relative_eq!(front.gap, 20.0, max_relative = 1e-12);
            assert_relative_eq!(front.gap, back.gap, max_relative = 1e-12);
        }
    }

    #[test]
    fn two_vehicle_ring_geometry() {
        let cfg = ScenarioConfig {
            topology: Topology::Ring { length: 250.0 },
            vehicles: vec![
                VehicleSpec {
                    controller: "idm".into(),
                    position: 0.0,
                    speed: 0.0,
                    length: 5.0,
                },
                VehicleSpec {
                    controller: "idm".into(),
                    position: 100.0,
                    speed: 0.0,
                    length: 5.0,
                },
            ],
            ..ScenarioConfig::base_ring(250.0)
        };
        let state = init_scenario(&cfg).unwrap();
        assert_relative_eq!(
            state.neighbors(0).unwrap().front.unwrap().gap,
            95.0,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            state.neighbors(1).unwrap().front.unwrap().gap,
            145.0,
            max_relative = 1e-12
        );
    }

    #[test]
    fn open_chain_boundaries() {
        let cfg = ScenarioConfig {
            topology: Topology::OpenChain { length: 2000.0 },
            vehicles: (0..12)
                .map(|i| VehicleSpec {
                    controller: "idm".into(),
                    position: 30.0 * i as f64,
                    speed: 20.0,
                    length: 5.0,
                })
                .collect(),
            ..ScenarioConfig::base_open(2000.0)
        };
        let state = init_scenario(&cfg).unwrap();
        let head = state.neighbors(11).unwrap();
        assert!(head.front.is_none());
        assert!(head.back.is_some());
        let tail = state.neighbors(0).unwrap();
        assert!(tail.back.is_none());
        assert!(tail.front.is_some());
    }

    #[test]
    fn unknown_vehicle_is_an_error() {
        let state = init_scenario(&ring_config(3, 100.0, 10.0)).unwrap();
        assert!(matches!(state.neighbors(7), Err(Error::UnknownVehicle(7))));
    }

    #[test]
    fn overlap_rejected_at_init() {
        let mut cfg = ring_config(2, 100.0, 10.0);
        cfg.vehicles[1].position = 4.0; // leader rear at -1 behind follower front
        assert!(matches!(
            init_scenario(&cfg),
            Err(Error::OverlappingVehicles { .. })
        ));
    }

    #[test]
    fn plain_advance() {
        let mut state = init_scenario(&ring_config(10, 250.0, 20.0)).unwrap();
        let record = state.step(&[0.0; 10]).unwrap();
        assert_relative_eq!(record.t, 0.1, max_relative = 1e-12);
        assert_relative_eq!(record.rows[0].speed, 20.0, max_relative = 1e-12);
        assert_relative_eq!(record.rows[0].position, 2.0, max_relative = 1e-12);
    }

    #[test]
    fn speed_clamps_at_zero() {
        let mut cfg = ring_config(2, 250.0, 0.1);
        cfg.vehicles[0].speed = 0.1;
        let mut state = init_scenario(&cfg).unwrap();
        let record = state.step(&[-3.0, 0.0]).unwrap();
        assert_eq!(record.rows[0].speed, 0.0);
        // The realized deceleration is -1, not the commanded -3.
        assert_relative_eq!(record.rows[0].accel, -1.0, max_relative = 1e-12);
    }

    #[test]
    fn non_finite_command_fails_fast() {
        let mut state = init_scenario(&ring_config(2, 250.0, 10.0)).unwrap();
        assert!(matches!(
            state.step(&[f64::NAN, 0.0]),
            Err(Error::NonFiniteCommand { vehicle: 0, .. })
        ));
        assert!(matches!(
            state.step(&[0.0]),
            Err(Error::CommandCount {
                expected: 2,
                got: 1
            })
        ));
    }

    #[test]
    fn overtake_reported_as_collision() {
        let cfg = ScenarioConfig {
            topology: Topology::Ring { length: 250.0 },
            vehicles: vec![
                VehicleSpec {
                    controller: "idm".into(),
                    position: 0.0,
                    speed: 30.0,
                    length: 5.0,
                },
                VehicleSpec {
                    controller: "idm".into(),
                    position: 6.0,
                    speed: 0.0,
                    length: 5.0,
                },
            ],
            ..ScenarioConfig::base_ring(250.0)
        };
        let mut state = init_scenario(&cfg).unwrap();
        // Gap is 1 m, closure 3 m per step: the follower would pass through.
        let record = state.step(&[0.0, 0.0]).unwrap();
        assert!(record.rows[0].collision);
        assert!(record.rows[0].front_gap.unwrap() <= 0.0);
        assert!(state.collided());
        // Order is conserved: ids keep their roster order, nobody swapped.
        assert_eq!(state.vehicles()[0].id, 0);
    }

    #[test]
    fn ring_gap_plus_length_sums_to_track() {
        let mut state = init_scenario(&ring_config(10, 250.0, 20.0)).unwrap();
        let commands: Vec<f64> = (0..10).map(|i| (i as f64 - 4.5) * 0.3).collect();
        for _ in 0..500 {
            state.step(&commands).unwrap();
            if state.collided() {
                break;
            }
            let total: f64 = (0..10)
                .map(|i| {
                    let nv = state.neighbors(i).unwrap().front.unwrap();
                    nv.gap + nv.length
                })
                .sum();
            assert!((total - 250.0).abs() < 1e-6);
        }
    }

    #[test]
    fn deterministic_restart() {
        let cfg = ring_config(5, 200.0, 15.0);
        let run = |cfg: &ScenarioConfig| {
            let mut state = init_scenario(cfg).unwrap();
            let mut out = Vec::new();
            for k in 0..200 {
                let a = ((k % 7) as f64 - 3.0) * 0.2;
                out.push(state.step(&[a; 5]).unwrap());
            }
            out
        };
        assert_eq!(run(&cfg), run(&cfg));
    }
}
