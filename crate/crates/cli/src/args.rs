//! Shared config resolution: preset, then config file overlay, then `--set`
//! dotted-key overrides, then the specific flags.

use std::path::PathBuf;

use anyhow::Context;
use clap::Args;
use platoon_core::config::Config;
use platoon_core::learner::Checkpoint;

#[derive(Args, Debug, Clone)]
pub struct ConfigArgs {
    /// Scenario preset: closed-loop, perturbation or smoke.
    #[arg(long)]
    pub preset: Option<String>,

    /// TOML config file overlaid on the preset.
    #[arg(long)]
    pub config: Option<PathBuf>,

    /// Controller tag for the subject vehicles (gipps|idm|bcm|unilateral|rl).
    #[arg(long)]
    pub controller: Option<String>,

    /// Policy checkpoint, required when the subject controller is `rl`.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,

    #[arg(long)]
    pub seed: Option<u64>,

    /// Steps per episode.
    #[arg(long)]
    pub steps: Option<usize>,

    /// Target time headway in seconds; retargets the efficiency reward and
    /// headway-coupled controllers.
    #[arg(long)]
    pub target_headway: Option<f64>,

    /// Override any dotted config key, e.g. --set reward.weights.safety=2.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,

    /// Output directory (created if missing).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl ConfigArgs {
    pub fn resolve(
        &self,
        default_preset: &str,
        default_method: Option<&str>,
    ) -> anyhow::Result<Config> {
        let preset = self.preset.as_deref().unwrap_or(default_preset);
        let method = self.controller.as_deref().or(default_method);
        let mut cfg = Config::preset_with(preset, method, self.target_headway)?;

        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            cfg = cfg.merged_with_toml(&text)?;
        }
        for assignment in &self.set {
            cfg.apply_override(assignment)?;
        }
        if let Some(seed) = self.seed {
            cfg.scenario.rng_seed = seed;
        }
        if let Some(steps) = self.steps {
            cfg.scenario.steps_per_episode = steps;
            cfg.train.steps = steps;
        }
        if let Some(path) = &self.checkpoint {
            cfg.controllers.rl.checkpoint = Some(path.clone());
            // The checkpoint knows which observation variant it was trained
            // with; keep the environment consistent with it.
            let ckpt = Checkpoint::load(path)?;
            cfg.controllers.rl.variant = ckpt.variant;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn out_dir(&self, default: &str) -> anyhow::Result<PathBuf> {
        let dir = self
            .out
            .clone()
            .unwrap_or_else(|| PathBuf::from("runs").join(default));
        std::fs::create_dir_all(&dir)
            .with_context(|| format!("creating output directory {}", dir.display()))?;
        Ok(dir)
    }
}
