//! Multi-agent car-following environment: observation construction, action
//! application, reward wiring and episode control.
//!
//! One environment instance is single-threaded; independent instances (for
//! different seeds or scenarios) can run in parallel with no shared state.
//! All RL vehicles act through one shared policy, each queried independently
//! on its own local observation.

use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::controllers::{
    clip_accel, BuildContext, Controller, ControllerRegistry, StepContext, ACCEL_MAX, ACCEL_MIN,
};
use crate::error::{Error, Result};
use crate::metrics::{self, EpisodeMetrics};
use crate::record::{RewardBreakdown, StepRecord};
use crate::reward::{reward_bilateral, reward_cfm, EffParams, RewardWeights};
use crate::sim::{init_scenario, SimState};

/// Observation normalization constants; chosen to keep entries near [-1, 1].
pub const SPEED_NORM: f64 = 30.0;
pub const GAP_NORM: f64 = 100.0;
pub const ACCEL_NORM: f64 = 3.0;
/// Sensing range; reported for a missing neighbor (with zero relative speed).
pub const SENSING_CAP: f64 = 100.0;

/// State-vector layout. `Bilateral` senses both neighbors (7 entries);
/// `Cfm` is the front-only baseline (5 entries).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObsVariant {
    #[default]
    Bilateral,
    Cfm,
}

impl ObsVariant {
    pub fn dim(self) -> usize {
        match self {
            ObsVariant::Bilateral => 7,
            ObsVariant::Cfm => 5,
        }
    }
}

impl std::str::FromStr for ObsVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bilateral" => Ok(ObsVariant::Bilateral),
            "cfm" => Ok(ObsVariant::Cfm),
            other => Err(Error::ConfigParse(format!(
                "unknown observation variant `{other}` (expected bilateral or cfm)"
            ))),
        }
    }
}

/// Normalized observation vector. Neighbor tuples are (gap, relative speed)
/// with the relative-speed convention leader-minus-self for the front pair
/// and self-minus-follower for the back pair. Missing neighbors read as the
/// sensing cap with zero relative speed.
///
/// Bilateral order: v, front gap, front dv, back gap, back dv, v_l, prev a.
/// Cfm drops the two back entries.
pub fn build_observation(
    variant: ObsVariant,
    v_self: f64,
    prev_accel: f64,
    front: Option<(f64, f64)>,
    back: Option<(f64, f64)>,
    target_speed: f64,
) -> Vec<f64> {
    let (fg, fdv) = front.unwrap_or((SENSING_CAP, 0.0));
    let (bg, bdv) = back.unwrap_or((SENSING_CAP, 0.0));
    let mut obs = Vec::with_capacity(variant.dim());
    obs.push(v_self / SPEED_NORM);
    obs.push(fg / GAP_NORM);
    obs.push(fdv / SPEED_NORM);
    if variant == ObsVariant::Bilateral {
        obs.push(bg / GAP_NORM);
        obs.push(bdv / SPEED_NORM);
    }
    obs.push(target_speed / SPEED_NORM);
    obs.push(prev_accel / ACCEL_NORM);
    obs
}

/// One agent-step of experience.
#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub agent_id: usize,
    pub obs: Vec<f64>,
    pub action: f64,
    pub reward: f64,
    pub next_obs: Vec<f64>,
    pub done: bool,
}

/// Anything that maps an observation to a scalar acceleration command.
pub trait Policy {
    fn act(&mut self, obs: &[f64]) -> f64;
}

/// Result of one environment step.
pub struct EnvStep {
    /// Per-agent observations of the post-step state, in agent order.
    pub observations: Vec<Vec<f64>>,
    pub rewards: Vec<f64>,
    /// Actually applied (clipped) commands per agent.
    pub actions: Vec<f64>,
    pub done: bool,
    pub record: StepRecord,
}

/// A completed episode.
pub struct EpisodeRollout {
    pub records: Vec<StepRecord>,
    pub transitions: Vec<Transition>,
    pub metrics: EpisodeMetrics,
    pub collided: bool,
    /// True when an open-chain vehicle ran off the configured road length and
    /// the episode was frozen early.
    pub frozen: bool,
    /// Per-agent sum of rewards.
    pub returns: Vec<f64>,
}

pub struct TrafficEnv {
    config: Config,
    eff: EffParams,
    weights: RewardWeights,
    collision_penalty: f64,
    variant: ObsVariant,
    /// One slot per vehicle. `None` marks an RL slot driven externally
    /// (training mode) rather than by a built controller.
    controllers: Vec<Option<Box<dyn Controller>>>,
    rl_ids: Vec<usize>,
    /// Head vehicle forced to the perturbation profile, if any.
    forced: Option<usize>,
    state: SimState,
    done: bool,
    frozen: bool,
}

impl TrafficEnv {
    /// Environment with every vehicle driven by its configured controller
    /// (the `rl` tag loads its checkpoint).
    pub fn from_config(config: &Config, registry: &ControllerRegistry) -> Result<Self> {
        Self::build(config, registry, false)
    }

    /// Environment for training: vehicles tagged `rl` take external actions.
    pub fn for_training(config: &Config, registry: &ControllerRegistry) -> Result<Self> {
        Self::build(config, registry, true)
    }

    fn build(config: &Config, registry: &ControllerRegistry, training: bool) -> Result<Self> {
        config.validate()?;
        let scenario = &config.scenario;
        let state = init_scenario(scenario)?;
        let build_ctx = BuildContext {
            scenario,
            controllers: &config.controllers,
        };
        let mut controllers = Vec::with_capacity(scenario.vehicles.len());
        let mut rl_ids = Vec::new();
        for (i, spec) in scenario.vehicles.iter().enumerate() {
            if spec.controller == "rl" {
                rl_ids.push(i);
                if training {
                    controllers.push(None);
                    continue;
                }
            }
            controllers.push(Some(registry.build(&spec.controller, &build_ctx)?));
        }
        let forced = scenario
            .perturbation
            .is_some()
            .then(|| scenario.vehicles.len() - 1);
        Ok(Self {
            eff: config.reward.eff_params(scenario.target_headway),
            weights: config.reward.weights,
            collision_penalty: config.reward.collision_penalty,
            variant: config.controllers.rl.variant,
            config: config.clone(),
            controllers,
            rl_ids,
            forced,
            state,
            done: false,
            frozen: false,
        })
    }

    pub fn reset(&mut self) -> Result<()> {
        self.state = init_scenario(&self.config.scenario)?;
        self.done = false;
        self.frozen = false;
        Ok(())
    }

    pub fn num_agents(&self) -> usize {
        self.rl_ids.len()
    }

    pub fn rl_ids(&self) -> &[usize] {
        &self.rl_ids
    }

    pub fn variant(&self) -> ObsVariant {
        self.variant
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    pub fn config(&self) -> &Config {
        &self.config
    }

    pub fn done(&self) -> bool {
        self.done
    }

    /// Local observation of one RL agent.
    pub fn observe(&self, vehicle_id: usize) -> Result<Vec<f64>> {
        let v = self.state.vehicle(vehicle_id)?;
        let nv = self.state.neighbors(vehicle_id)?;
        Ok(build_observation(
            self.variant,
            v.speed,
            v.accel,
            nv.front.map(|f| (f.gap, f.speed - v.speed)),
            nv.back.map(|b| (b.gap, v.speed - b.speed)),
            self.config.scenario.target_speed,
        ))
    }

    /// Observations for every agent, in `rl_ids` order.
    pub fn observations(&self) -> Vec<Vec<f64>> {
        self.rl_ids
            .iter()
            .map(|&id| self.observe(id).expect("agent ids are valid"))
            .collect()
    }

    fn controller_command(&self, vehicle_id: usize) -> Result<f64> {
        let controller = self.controllers[vehicle_id]
            .as_ref()
            .ok_or(Error::MissingPolicy(vehicle_id))?;
        let v = &self.state.vehicles()[vehicle_id];
        let ctx = StepContext {
            v_self: v.speed,
            prev_accel: v.accel,
            dt: self.state.dt(),
            neighbors: self.state.neighbors(vehicle_id)?,
            target_speed: self.config.scenario.target_speed,
        };
        let a = controller.accel(&ctx)?;
        Ok(if v.controller == "rl" {
            // Learned actions always respect the action-space bounds.
            clip_accel(a, ACCEL_MIN, ACCEL_MAX)
        } else if self.config.controllers.clip_classical {
            clip_accel(a, ACCEL_MIN, ACCEL_MAX)
        } else {
            a
        })
    }

    /// Advance one step. `rl_actions`, when given, supplies one command per
    /// agent (in `rl_ids` order); otherwise RL slots fall back to their built
    /// controller. Non-RL vehicles always use their controllers; a forced
    /// leader tracks the perturbation profile exactly.
    pub fn step(&mut self, rl_actions: Option<&[f64]>) -> Result<EnvStep> {
        if self.done {
            return Err(Error::EpisodeFinished);
        }
        if let Some(actions) = rl_actions {
            if actions.len() != self.rl_ids.len() {
                return Err(Error::CommandCount {
                    expected: self.rl_ids.len(),
                    got: actions.len(),
                });
            }
        }

        let n = self.state.num_vehicles();
        let dt = self.state.dt();
        let t_next = (self.state.steps_done() + 1) as f64 * dt;
        let mut commands = Vec::with_capacity(n);
        let mut applied = Vec::with_capacity(self.rl_ids.len());
        let mut agent_idx = 0usize;
        for i in 0..n {
            if Some(i) == self.forced {
                let profile = self.config.scenario.perturbation.as_ref().unwrap();
                let v = self.state.vehicles()[i].speed;
                commands.push((profile.speed_at(t_next) - v) / dt);
            } else if self.rl_ids.contains(&i) {
                let a = match rl_actions {
                    Some(actions) => clip_accel(actions[agent_idx], ACCEL_MIN, ACCEL_MAX),
                    None => self.controller_command(i)?,
                };
                commands.push(a);
                applied.push(a);
                agent_idx += 1;
            } else {
                commands.push(self.controller_command(i)?);
            }
        }

        let mut record = self.state.step(&commands)?;

        let collided = record.rows.iter().any(|r| r.collision);
        let step_limit = self.state.steps_done() >= self.config.scenario.steps_per_episode;
        if !self.config.scenario.topology.is_ring() {
            let road = self.config.scenario.topology.length();
            if self.state.vehicles().iter().any(|v| v.position >= road) {
                self.frozen = true;
            }
        }
        self.done = collided || step_limit || self.frozen;

        let mut rewards = Vec::with_capacity(self.rl_ids.len());
        for &id in &self.rl_ids.clone() {
            let breakdown = self.agent_reward(&record, id)?;
            record.rows[id].reward = Some(breakdown);
            rewards.push(breakdown.total);
        }

        Ok(EnvStep {
            observations: self.observations(),
            rewards,
            actions: applied,
            done: self.done,
            record,
        })
    }

    /// Reward components for one agent from the post-step state.
    fn agent_reward(&self, record: &StepRecord, id: usize) -> Result<RewardBreakdown> {
        use crate::reward::{f_comfort, f_eff, f_safety};

        let row = &record.rows[id];
        let me = &self.state.vehicles()[id];
        let nv = self.state.neighbors(id)?;
        // Back view: the follower's TTC and headway toward this vehicle.
        let (ttc_back, h_back) = match nv.back.filter(|_| self.variant == ObsVariant::Bilateral) {
            Some(back) => (
                metrics::ttc(back.gap, me.speed - back.speed),
                metrics::time_headway(back.gap, me.length, back.speed),
            ),
            None => (None, None),
        };

        let mut total = match self.variant {
            ObsVariant::Bilateral => reward_bilateral(
                row.ttc,
                row.time_headway,
                ttc_back,
                h_back,
                row.jerk,
                &self.weights,
                &self.eff,
            ),
            ObsVariant::Cfm => reward_cfm(
                row.ttc,
                row.time_headway,
                row.jerk,
                &self.weights,
                &self.eff,
            ),
        };
        if row.collision {
            total += self.collision_penalty;
        }
        Ok(RewardBreakdown {
            safety: f_safety(row.ttc),
            efficiency: f_eff(row.time_headway, &self.eff),
            comfort: f_comfort(row.jerk),
            safety_back: f_safety(ttc_back),
            efficiency_back: f_eff(h_back, &self.eff),
            total,
        })
    }

    /// Roll one entire episode. With a policy, every agent is driven by that
    /// single shared policy queried per agent per step and all transitions
    /// are pooled into one stream; without one, RL slots use their built
    /// controllers.
    pub fn run_episode(&mut self, mut policy: Option<&mut dyn Policy>) -> Result<EpisodeRollout> {
        if self.state.steps_done() > 0 || self.done {
            self.reset()?;
        }
        let agents = self.rl_ids.len();
        let mut records = Vec::with_capacity(self.config.scenario.steps_per_episode);
        let mut transitions = Vec::new();
        let mut returns = vec![0.0; agents];
        let mut obs = self.observations();

        while !self.done {
            let actions: Option<Vec<f64>> = policy
                .as_deref_mut()
                .map(|p| obs.iter().map(|o| p.act(o)).collect());
            let step = self.step(actions.as_deref())?;
            for k in 0..agents {
                returns[k] += step.rewards[k];
                transitions.push(Transition {
                    agent_id: self.rl_ids[k],
                    obs: std::mem::take(&mut obs[k]),
                    action: step.actions[k],
                    reward: step.rewards[k],
                    next_obs: step.observations[k].clone(),
                    done: step.done,
                });
            }
            obs = step.observations;
            records.push(step.record);
        }

        let subjects = self.config.scenario.subject_ids();
        let metrics = EpisodeMetrics::from_records(&records, Some(&subjects));
        Ok(EpisodeRollout {
            records,
            transitions,
            metrics,
            collided: self.state.collided(),
            frozen: self.frozen,
            returns,
        })
    }
}
