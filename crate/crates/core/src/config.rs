//! Scenario, controller, reward and training configuration.
//!
//! The on-disk format is TOML; every key here is addressable with a dotted
//! path (e.g. `reward.weights.safety`, `controllers.bcm.k_d`) both in config
//! files and through `--set` style overrides. Presets build the rosters used
//! by the experiments; anything they set can be overridden afterwards.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::controllers;
use crate::env::ObsVariant;
use crate::error::{Error, Result};
use crate::reward::{EffParams, RewardWeights};

pub const DEFAULT_VEHICLE_LENGTH: f64 = 5.0;
pub const PRESETS: &[&str] = &["closed-loop", "perturbation", "smoke"];

/// Road layout: a periodic ring or a straight open chain. Lengths in meters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Topology {
    Ring { length: f64 },
    OpenChain { length: f64 },
}

impl Topology {
    pub fn is_ring(&self) -> bool {
        matches!(self, Topology::Ring { .. })
    }

    pub fn length(&self) -> f64 {
        match *self {
            Topology::Ring { length } | Topology::OpenChain { length } => length,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleSpec {
    pub controller: String,
    /// Front-bumper position, meters. Rosters are listed back-to-front:
    /// strictly increasing positions, the last entry is the head vehicle.
    pub position: f64,
    pub speed: f64,
    #[serde(default = "default_length")]
    pub length: f64,
}

fn default_length() -> f64 {
    DEFAULT_VEHICLE_LENGTH
}

/// Forced speed profile for the lead vehicle of a perturbation experiment.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationProfile {
    #[serde(default = "default_base_speed")]
    pub base_speed: f64,
    pub waveform: Waveform,
}

fn default_base_speed() -> f64 {
    20.0
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Waveform {
    Sinusoid {
        amplitude: f64,
        period: f64,
    },
    Pulse {
        drop: f64,
        duration: f64,
        start: f64,
    },
}

impl PerturbationProfile {
    /// Leader speed at simulation time `t`.
    pub fn speed_at(&self, t: f64) -> f64 {
        match self.waveform {
            Waveform::Sinusoid { amplitude, period } => {
                self.base_speed + amplitude * (2.0 * std::f64::consts::PI * t / period).sin()
            }
            Waveform::Pulse {
                drop,
                duration,
                start,
            } => {
                if t >= start && t < start + duration {
                    self.base_speed - drop
                } else {
                    self.base_speed
                }
            }
        }
    }

    /// Largest downward speed excursion of the waveform.
    pub fn peak_excursion(&self) -> f64 {
        match self.waveform {
            Waveform::Sinusoid { amplitude, .. } => amplitude.abs(),
            Waveform::Pulse { drop, .. } => drop,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.base_speed - self.peak_excursion() < 0.0 {
            return Err(Error::NegativeProfileSpeed {
                base: self.base_speed,
                excursion: self.peak_excursion(),
            });
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub topology: Topology,
    /// Simulation step, seconds.
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_steps")]
    pub steps_per_episode: usize,
    #[serde(default)]
    pub vehicles: Vec<VehicleSpec>,
    /// Posted target speed v_l for the road section, m/s.
    #[serde(default = "default_target_speed")]
    pub target_speed: f64,
    /// Target time headway h*, seconds.
    #[serde(default = "default_target_headway")]
    pub target_headway: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<PerturbationProfile>,
    #[serde(default)]
    pub rng_seed: u64,
    /// Vehicles the experiment is about (metrics focus). Empty means all.
    #[serde(default)]
    pub subjects: Vec<usize>,
}

fn default_dt() -> f64 {
    0.1
}

fn default_steps() -> usize {
    3600
}

fn default_target_speed() -> f64 {
    20.0
}

fn default_target_headway() -> f64 {
    1.26
}

impl ScenarioConfig {
    /// Minimal ring scenario with defaults; callers fill in the roster.
    pub fn base_ring(length: f64) -> Self {
        Self {
            topology: Topology::Ring { length },
            dt: default_dt(),
            steps_per_episode: default_steps(),
            vehicles: Vec::new(),
            target_speed: default_target_speed(),
            target_headway: default_target_headway(),
            perturbation: None,
            rng_seed: 0,
            subjects: Vec::new(),
        }
    }

    pub fn base_open(length: f64) -> Self {
        Self {
            topology: Topology::OpenChain { length },
            ..Self::base_ring(0.0)
        }
    }

    /// Vehicle ids metrics focus on; all vehicles when `subjects` is empty.
    pub fn subject_ids(&self) -> Vec<usize> {
        if self.subjects.is_empty() {
            (0..self.vehicles.len()).collect()
        } else {
            self.subjects.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dt.is_nan() || self.dt <= 0.0 {
            return Err(Error::NonPositiveDt(self.dt));
        }
        if self.steps_per_episode == 0 {
            return Err(Error::NoSteps);
        }
        if self.vehicles.is_empty() {
            return Err(Error::EmptyRoster);
        }
        for (i, v) in self.vehicles.iter().enumerate() {
            if v.length.is_nan() || v.length <= 0.0 {
                return Err(Error::BadVehicleLength(i));
            }
            if !v.speed.is_finite() || v.speed < 0.0 {
                return Err(Error::BadVehicleSpeed(i));
            }
            if i > 0 && v.position <= self.vehicles[i - 1].position {
                return Err(Error::UnorderedRoster(i));
            }
        }
        if let Some(p) = &self.perturbation {
            p.validate()?;
            if self.topology.is_ring() {
                return Err(Error::ProfileNeedsOpenChain);
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Controller parameter tables, one per tag.
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GippsConfig {
    /// Defaults to the scenario target speed.
    pub desired_speed: Option<f64>,
    pub max_accel: f64,
    /// Comfortable deceleration, positive magnitude.
    pub comfort_decel: f64,
    pub reaction_time: f64,
}

impl Default for GippsConfig {
    fn default() -> Self {
        Self {
            desired_speed: None,
            max_accel: 3.0,
            comfort_decel: 3.0,
            reaction_time: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IdmConfig {
    pub desired_speed: Option<f64>,
    pub max_accel: f64,
    pub comfort_decel: f64,
    /// Defaults to the scenario target headway.
    pub time_headway: Option<f64>,
    pub jam_distance: f64,
    pub exponent: f64,
}

impl Default for IdmConfig {
    fn default() -> Self {
        Self {
            desired_speed: None,
            max_accel: 1.4,
            comfort_decel: 2.0,
            time_headway: None,
            jam_distance: 2.0,
            exponent: 4.0,
        }
    }
}

/// Gains shared by the bilateral controller and its front-only fallback. The
/// reaction time only enters the fallback's adaptive desired spacing
/// s0 = v·T; it is a fixed constant, deliberately not coupled to the
/// (retargetable) scenario headway.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BcmConfig {
    pub k_d: f64,
    pub k_v: f64,
    pub reaction_time: f64,
}

impl Default for BcmConfig {
    fn default() -> Self {
        Self {
            k_d: 0.5,
            k_v: 1.0,
            reaction_time: 1.26,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RlConfig {
    pub checkpoint: Option<PathBuf>,
    pub variant: ObsVariant,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ControllersConfig {
    pub gipps: GippsConfig,
    pub idm: IdmConfig,
    pub bcm: BcmConfig,
    pub unilateral: BcmConfig,
    pub rl: RlConfig,
    /// Clip classical controllers to the RL action bounds. Off by default;
    /// the closed-form models are run unbounded.
    pub clip_classical: bool,
}

impl ControllersConfig {
    pub fn gipps_params(&self, scenario: &ScenarioConfig) -> controllers::GippsParams {
        controllers::GippsParams {
            desired_speed: self.gipps.desired_speed.unwrap_or(scenario.target_speed),
            max_accel: self.gipps.max_accel,
            comfort_decel: self.gipps.comfort_decel,
            reaction_time: self.gipps.reaction_time,
        }
    }

    pub fn idm_params(&self, scenario: &ScenarioConfig) -> controllers::IdmParams {
        controllers::IdmParams {
            desired_speed: self.idm.desired_speed.unwrap_or(scenario.target_speed),
            max_accel: self.idm.max_accel,
            comfort_decel: self.idm.comfort_decel,
            time_headway: self.idm.time_headway.unwrap_or(scenario.target_headway),
            jam_distance: self.idm.jam_distance,
            exponent: self.idm.exponent,
        }
    }

    pub fn bcm_gains(&self) -> controllers::BcmGains {
        controllers::BcmGains {
            k_d: self.bcm.k_d,
            k_v: self.bcm.k_v,
            reaction_time: self.bcm.reaction_time,
        }
    }

    pub fn unilateral_gains(&self) -> controllers::BcmGains {
        controllers::BcmGains {
            k_d: self.unilateral.k_d,
            k_v: self.unilateral.k_v,
            reaction_time: self.unilateral.reaction_time,
        }
    }
}

// ---------------------------------------------------------------------------
// Reward and training tables.
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RewardConfig {
    pub weights: RewardWeights,
    /// Headway the efficiency term should peak at. `None` follows the
    /// scenario target headway.
    pub target_headway: Option<f64>,
    pub sigma: f64,
    /// Added to the final step's reward when the episode ends in a collision.
    pub collision_penalty: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            weights: RewardWeights::default(),
            target_headway: None,
            sigma: 0.4365,
            collision_penalty: -50.0,
        }
    }
}

impl RewardConfig {
    /// Resolve the efficiency-term parameters. The human-fit constants are
    /// used verbatim at the default 1.26 s target; any other target shifts
    /// the log-normal mode onto it.
    pub fn eff_params(&self, scenario_target_headway: f64) -> EffParams {
        let target = self.target_headway.unwrap_or(scenario_target_headway);
        if (target - 1.26).abs() < 1e-9 && (self.sigma - 0.4365).abs() < 1e-12 {
            EffParams::default()
        } else {
            EffParams::for_target_headway(target, self.sigma)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub episodes: usize,
    /// Steps per training episode (overrides the scenario's step count).
    pub steps: usize,
    pub gamma: f64,
    pub soft_update: f64,
    pub batch_size: usize,
    pub actor_lr: f64,
    pub critic_lr: f64,
    /// Gaussian exploration noise, m/s², decayed per episode.
    pub noise_sigma: f64,
    pub noise_decay: f64,
    pub buffer_capacity: usize,
    /// Environment steps collected before updates begin.
    pub warmup_steps: usize,
    pub updates_per_step: usize,
    pub hidden: Vec<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            episodes: 120,
            steps: 3600,
            gamma: 0.99,
            soft_update: 0.005,
            batch_size: 64,
            actor_lr: 1e-4,
            critic_lr: 1e-3,
            noise_sigma: 0.3,
            noise_decay: 0.995,
            buffer_capacity: 100_000,
            warmup_steps: 500,
            updates_per_step: 1,
            hidden: vec![64, 64],
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::ConfigParse(format!(
                "train.gamma must lie in (0, 1), got {}",
                self.gamma
            )));
        }
        if !(self.soft_update > 0.0 && self.soft_update <= 1.0) {
            return Err(Error::ConfigParse(format!(
                "train.soft_update must lie in (0, 1], got {}",
                self.soft_update
            )));
        }
        if self.batch_size == 0 || self.buffer_capacity == 0 {
            return Err(Error::ConfigParse(
                "train.batch_size and train.buffer_capacity must be positive".into(),
            ));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Top-level config, presets and overrides.
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub scenario: ScenarioConfig,
    #[serde(default)]
    pub controllers: ControllersConfig,
    #[serde(default)]
    pub reward: RewardConfig,
    #[serde(default)]
    pub train: TrainConfig,
}

impl Config {
    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.train.validate()
    }

    /// Build a named preset with its default subject controller.
    pub fn preset(name: &str) -> Result<Config> {
        Config::preset_with(name, None, None)
    }

    /// Build a named preset, optionally substituting the subject controller
    /// tag and the target headway (which re-derives rosters and spacings).
    pub fn preset_with(
        name: &str,
        method: Option<&str>,
        target_headway: Option<f64>,
    ) -> Result<Config> {
        match name {
            "closed-loop" => Ok(closed_loop_preset(
                method.unwrap_or("rl"),
                target_headway,
                3600,
                default_alternating_subjects(),
            )),
            "smoke" => Ok(closed_loop_preset(
                method.unwrap_or("rl"),
                target_headway,
                600,
                vec![0],
            )),
            "perturbation" => perturbation_preset(method.unwrap_or("bcm"), target_headway),
            other => Err(Error::UnknownPreset(other.to_string())),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Config> {
        let cfg: Config = toml::from_str(text).map_err(|e| Error::ConfigParse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Config> {
        let text = std::fs::read_to_string(path)?;
        Config::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Overlay a partial TOML document (e.g. a user config file) onto this
    /// config. Tables merge recursively; scalar and array values replace.
    pub fn merged_with_toml(&self, text: &str) -> Result<Config> {
        let mut base =
            toml::Value::try_from(self).map_err(|e| Error::ConfigParse(e.to_string()))?;
        let overlay: toml::Value =
            toml::from_str(text).map_err(|e| Error::ConfigParse(e.to_string()))?;
        merge_value(&mut base, overlay);
        let cfg: Config = base
            .try_into()
            .map_err(|e: toml::de::Error| Error::ConfigParse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Apply a `dotted.key=value` override. The key path must address an
    /// existing table; the leaf may be new (optional keys are omitted when
    /// unset).
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (key, raw) = assignment
            .split_once('=')
            .ok_or_else(|| Error::BadOverride(assignment.to_string()))?;
        let key = key.trim();
        let raw = raw.trim();
        if key.is_empty() {
            return Err(Error::BadOverride(assignment.to_string()));
        }

        let mut root =
            toml::Value::try_from(&*self).map_err(|e| Error::ConfigParse(e.to_string()))?;
        {
            let mut node = &mut root;
            let segments: Vec<&str> = key.split('.').collect();
            for seg in &segments[..segments.len() - 1] {
                node = node
                    .as_table_mut()
                    .and_then(|t| t.get_mut(*seg))
                    .ok_or_else(|| Error::UnknownConfigKey(key.to_string()))?;
            }
            let table = node
                .as_table_mut()
                .ok_or_else(|| Error::UnknownConfigKey(key.to_string()))?;
            table.insert(
                segments[segments.len() - 1].to_string(),
                parse_override_value(raw),
            );
        }
        let cfg: Config = root
            .try_into()
            .map_err(|e: toml::de::Error| Error::ConfigParse(e.to_string()))?;
        *self = cfg;
        Ok(())
    }
}

fn parse_override_value(raw: &str) -> toml::Value {
    if let Ok(b) = raw.parse::<bool>() {
        return toml::Value::Boolean(b);
    }
    if let Ok(i) = raw.parse::<i64>() {
        return toml::Value::Integer(i);
    }
    if let Ok(f) = raw.parse::<f64>() {
        return toml::Value::Float(f);
    }
    toml::Value::String(raw.to_string())
}

fn merge_value(base: &mut toml::Value, overlay: toml::Value) {
    match (base, overlay) {
        (toml::Value::Table(b), toml::Value::Table(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge_value(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

fn default_alternating_subjects() -> Vec<usize> {
    vec![0, 2, 4, 6, 8]
}

/// Ring of ten equally spaced vehicles; subject slots run `method`, the rest
/// are IDM.
fn closed_loop_preset(
    method: &str,
    target_headway: Option<f64>,
    steps: usize,
    subjects: Vec<usize>,
) -> Config {
    let track = 250.0;
    let n = 10;
    let spacing = track / n as f64;
    let mut scenario = ScenarioConfig::base_ring(track);
    scenario.steps_per_episode = steps;
    if let Some(h) = target_headway {
        scenario.target_headway = h;
    }
    scenario.vehicles = (0..n)
        .map(|i| VehicleSpec {
            controller: if subjects.contains(&i) {
                method.to_string()
            } else {
                "idm".to_string()
            },
            position: spacing * i as f64,
            speed: 20.0,
            length: DEFAULT_VEHICLE_LENGTH,
        })
        .collect();
    scenario.subjects = subjects;
    Config {
        scenario,
        controllers: ControllersConfig::default(),
        reward: RewardConfig::default(),
        train: TrainConfig::default(),
    }
}

/// Straight platoon: IDM tail, ten `method` vehicles, IDM leader driven by
/// the forcing profile. Spacing starts at each controller's own equilibrium
/// gap for the base speed, so the episode opens in steady following.
fn perturbation_preset(method: &str, target_headway: Option<f64>) -> Result<Config> {
    let base_speed = 20.0;
    let mut scenario = ScenarioConfig::base_open(10_000.0);
    // A desired speed above the operating speed gives IDM (and Gipps) a
    // finite following equilibrium at the 20 m/s base speed.
    scenario.target_speed = 30.0;
    if let Some(h) = target_headway {
        scenario.target_headway = h;
    }
    scenario.perturbation = Some(PerturbationProfile {
        base_speed,
        waveform: Waveform::Sinusoid {
            amplitude: 2.0,
            period: 10.0,
        },
    });
    let controllers = ControllersConfig::default();

    let mut tags = vec!["idm".to_string()];
    tags.extend(std::iter::repeat_n(method.to_string(), 10));
    tags.push("idm".to_string());

    let mut vehicles = Vec::with_capacity(tags.len());
    let mut position = 0.0;
    let mut prev_gap: Option<f64> = None;
    for (i, tag) in tags.iter().enumerate() {
        if i > 0 {
            // The follower's preferred gap sits between it and the vehicle
            // ahead; positions grow tail -> leader. A bilateral follower
            // holds the midpoint of its neighbors, so its rest spacing is
            // whatever its back gap is: inherit the previous gap.
            let follower_tag = &tags[i - 1];
            let gap = if follower_tag == "bcm" {
                match prev_gap {
                    Some(g) => g,
                    None => equilibrium_gap(follower_tag, base_speed, &scenario, &controllers)?,
                }
            } else {
                equilibrium_gap(follower_tag, base_speed, &scenario, &controllers)?
            };
            prev_gap = Some(gap);
            position += gap + DEFAULT_VEHICLE_LENGTH;
        }
        vehicles.push(VehicleSpec {
            controller: tag.clone(),
            position,
            speed: base_speed,
            length: DEFAULT_VEHICLE_LENGTH,
        });
    }
    scenario.vehicles = vehicles;
    scenario.subjects = (1..=10).collect();

    let cfg = Config {
        scenario,
        controllers,
        reward: RewardConfig::default(),
        train: TrainConfig::default(),
    };
    cfg.scenario.validate()?;
    Ok(cfg)
}

/// Steady-state following gap of a controller at `speed` behind a leader
/// moving at the same speed. Used to seed open-chain platoons.
pub fn equilibrium_gap(
    tag: &str,
    speed: f64,
    scenario: &ScenarioConfig,
    controllers_cfg: &ControllersConfig,
) -> Result<f64> {
    match tag {
        "idm" => {
            let p = controllers_cfg.idm_params(scenario);
            Ok(controllers::idm_equilibrium_gap(speed, &p))
        }
        // v_safe(gap, v) = v holds exactly at gap = v * tau.
        "gipps" => Ok(speed * controllers_cfg.gipps.reaction_time),
        "bcm" => Ok(speed * controllers_cfg.bcm.reaction_time),
        "unilateral" => Ok(speed * controllers_cfg.unilateral.reaction_time),
        // Place learned vehicles at their reward's target headway.
        "rl" => Ok(scenario.target_headway * speed - DEFAULT_VEHICLE_LENGTH),
        _ => Ok(scenario.target_headway * speed - DEFAULT_VEHICLE_LENGTH),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn closed_loop_preset_layout() {
        let cfg = Config::preset("closed-loop").unwrap();
        assert_eq!(cfg.scenario.vehicles.len(), 10);
        assert!(cfg.scenario.topology.is_ring());
        assert_eq!(cfg.scenario.steps_per_episode, 3600);
        let rl: Vec<usize> = cfg
            .scenario
            .vehicles
            .iter()
            .enumerate()
            .filter(|(_, v)| v.controller == "rl")
            .map(|(i, _)| i)
            .collect();
        assert_eq!(rl, vec![0, 2, 4, 6, 8]);
        // Equal spacing of 25 m centers -> 20 m gaps at 5 m lengths.
        assert_relative_eq!(
            cfg.scenario.vehicles[1].position - cfg.scenario.vehicles[0].position,
            25.0
        );
    }

    #[test]
    fn perturbation_preset_layout() {
        let cfg = Config::preset("perturbation").unwrap();
        let tags: Vec<&str> = cfg
            .scenario
            .vehicles
            .iter()
            .map(|v| v.controller.as_str())
            .collect();
        assert_eq!(tags.len(), 12);
        assert_eq!(tags[0], "idm");
        assert_eq!(tags[11], "idm");
        assert!(tags[1..11].iter().all(|t| *t == "bcm"));
        assert_eq!(cfg.scenario.subjects, (1..=10).collect::<Vec<_>>());
        assert!(cfg.scenario.perturbation.is_some());
        // A bilateral vehicle rests at the midpoint of its neighbors, so the
        // whole chain inherits the tail's equilibrium gap and starts static.
        let tail_gap = cfg.scenario.vehicles[1].position - cfg.scenario.vehicles[0].position - 5.0;
        let expected = crate::controllers::idm_equilibrium_gap(
            20.0,
            &cfg.controllers.idm_params(&cfg.scenario),
        );
        assert_relative_eq!(tail_gap, expected, max_relative = 1e-12);
        let bcm_gap = cfg.scenario.vehicles[2].position - cfg.scenario.vehicles[1].position - 5.0;
        assert_relative_eq!(bcm_gap, tail_gap, max_relative = 1e-12);
    }

    #[test]
    fn unknown_preset_rejected() {
        assert!(matches!(
            Config::preset("nope"),
            Err(Error::UnknownPreset(_))
        ));
    }

    #[test]
    fn toml_round_trip() {
        let cfg = Config::preset("perturbation").unwrap();
        let text = cfg.to_toml_string();
        let parsed = Config::from_toml_str(&text).unwrap();
        assert_eq!(parsed, cfg);
    }

    #[test]
    fn overrides_reach_dotted_keys() {
        let mut cfg = Config::preset("closed-loop").unwrap();
        cfg.apply_override("reward.weights.safety=2.5").unwrap();
        cfg.apply_override("controllers.bcm.k_d=0.7").unwrap();
        cfg.apply_override("reward.target_headway=0.8").unwrap();
        cfg.apply_override("scenario.rng_seed=99").unwrap();
        assert_eq!(cfg.reward.weights.safety, 2.5);
        assert_eq!(cfg.controllers.bcm.k_d, 0.7);
        assert_eq!(cfg.reward.target_headway, Some(0.8));
        assert_eq!(cfg.scenario.rng_seed, 99);
    }

    #[test]
    fn bad_overrides_rejected() {
        let mut cfg = Config::preset("closed-loop").unwrap();
        assert!(matches!(
            cfg.apply_override("no_equals_sign"),
            Err(Error::BadOverride(_))
        ));
        assert!(matches!(
            cfg.apply_override("reward.nonsense.key=1"),
            Err(Error::UnknownConfigKey(_))
        ));
        // Unknown leaf keys are caught by strict deserialization.
        assert!(cfg.apply_override("reward.typo=1").is_err());
    }

    #[test]
    fn merge_overlays_preset() {
        let cfg = Config::preset("closed-loop").unwrap();
        let merged = cfg
            .merged_with_toml("[reward]\ncollision_penalty = -10.0\n[scenario]\nrng_seed = 5\n")
            .unwrap();
        assert_eq!(merged.reward.collision_penalty, -10.0);
        assert_eq!(merged.scenario.rng_seed, 5);
        // Untouched parts survive the merge.
        assert_eq!(merged.scenario.vehicles, cfg.scenario.vehicles);
    }

    #[test]
    fn validation_errors() {
        let mut cfg = Config::preset("closed-loop").unwrap();
        cfg.scenario.dt = 0.0;
        assert!(matches!(cfg.validate(), Err(Error::NonPositiveDt(_))));

        let mut cfg = Config::preset("closed-loop").unwrap();
        cfg.scenario.steps_per_episode = 0;
        assert!(matches!(cfg.validate(), Err(Error::NoSteps)));

        let mut cfg = Config::preset("closed-loop").unwrap();
        cfg.scenario.perturbation = Some(PerturbationProfile {
            base_speed: 20.0,
            waveform: Waveform::Sinusoid {
                amplitude: 25.0,
                period: 10.0,
            },
        });
        assert!(matches!(
            cfg.validate(),
            Err(Error::NegativeProfileSpeed { .. })
        ));
    }

    #[test]
    fn retargeting_flows_into_rosters() {
        let a = Config::preset_with("perturbation", Some("idm"), None).unwrap();
        let b = Config::preset_with("perturbation", Some("idm"), Some(0.8)).unwrap();
        // IDM's desired headway follows the scenario target, so platoon
        // spacing tightens under the 0.8 s target.
        let gap_a = a.scenario.vehicles[2].position - a.scenario.vehicles[1].position;
        let gap_b = b.scenario.vehicles[2].position - b.scenario.vehicles[1].position;
        assert!(gap_b < gap_a);
    }

    #[test]
    fn pulse_profile_shape() {
        let p = PerturbationProfile {
            base_speed: 20.0,
            waveform: Waveform::Pulse {
                drop: 5.0,
                duration: 10.0,
                start: 30.0,
            },
        };
        assert_eq!(p.speed_at(0.0), 20.0);
        assert_eq!(p.speed_at(30.0), 15.0);
        assert_eq!(p.speed_at(39.99), 15.0);
        assert_eq!(p.speed_at(40.0), 20.0);
        p.validate().unwrap();
    }
}
