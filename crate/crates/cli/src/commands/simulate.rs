use clap::Args;

use platoon_core::controllers::ControllerRegistry;
use platoon_core::env::TrafficEnv;
use platoon_core::metrics::EpisodeMetrics;

use crate::args::ConfigArgs;
use crate::manifest::write_manifest;

use super::{
    episode_exit_code, subject_method, write_metrics_json, write_trajectory, MethodMetrics, RunKind,
};

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
}

pub fn run(args: SimulateArgs) -> anyhow::Result<i32> {
    let cfg = args.config.resolve("closed-loop", None)?;
    let dir = args.config.out_dir("simulate")?;

    let registry = ControllerRegistry::with_builtins();
    let mut env = TrafficEnv::from_config(&cfg, &registry)?;
    let rollout = env.run_episode(None)?;

    let metrics = MethodMetrics {
        method: subject_method(&cfg),
        kind: if cfg.scenario.perturbation.is_some() {
            RunKind::Perturbation
        } else {
            RunKind::ClosedLoop
        },
        metrics: EpisodeMetrics::from_records(&rollout.records, Some(&cfg.scenario.subject_ids())),
    };

    let trajectory = write_trajectory(&dir, &rollout.records, &cfg)?;
    let metrics_path = write_metrics_json(&dir, &metrics)?;
    write_manifest(&dir, "simulate", &cfg, &[trajectory, metrics_path])?;

    println!(
        "simulate | method={} steps={} collisions={} mean_headway={} mean_speed={:.3}",
        metrics.method,
        rollout.records.len(),
        metrics.metrics.collision_count,
        metrics
            .metrics
            .mean_time_headway
            .map(|h| format!("{h:.3}"))
            .unwrap_or_else(|| "-".into()),
        metrics.metrics.mean_speed,
    );
    println!("output written to {}", dir.display());
    Ok(episode_exit_code(
        &rollout.records,
        rollout.collided,
        rollout.frozen,
    ))
}
