use std::path::PathBuf;

use clap::Args;
use serde::Serialize;

use platoon_core::controllers::ControllerRegistry;
use platoon_core::env::TrafficEnv;
use platoon_core::learner::{ActorPolicy, Checkpoint};
use platoon_core::metrics::EpisodeMetrics;

use crate::args::ConfigArgs;
use crate::manifest::write_manifest;

use super::{episode_exit_code, write_metrics_json, write_trajectory, MethodMetrics, RunKind};

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[command(flatten)]
    pub config: ConfigArgs,

    /// Evaluation episodes.
    #[arg(long, default_value_t = 5)]
    pub episodes: usize,
}

#[derive(Serialize)]
struct EvalSummary {
    checkpoint: PathBuf,
    episodes: usize,
    mean_return: f64,
    returns: Vec<f64>,
    collisions: Vec<usize>,
    last_episode: EpisodeMetrics,
}

pub fn run(args: EvalArgs) -> anyhow::Result<i32> {
    let ckpt_path = args
        .config
        .checkpoint
        .clone()
        .ok_or(platoon_core::Error::MissingCheckpoint)?;
    let cfg = args.config.resolve("closed-loop", Some("rl"))?;
    let dir = args.config.out_dir("eval")?;

    let checkpoint = Checkpoint::load(&ckpt_path)?;
    let registry = ControllerRegistry::with_builtins();
    let mut env = TrafficEnv::for_training(&cfg, &registry)?;
    let mut policy = ActorPolicy::new(&checkpoint.actor);

    let mut returns = Vec::with_capacity(args.episodes);
    let mut collisions = Vec::with_capacity(args.episodes);
    let mut last = None;
    for episode in 0..args.episodes {
        let rollout = env.run_episode(Some(&mut policy))?;
        let mean_return = if rollout.returns.is_empty() {
            0.0
        } else {
            rollout.returns.iter().sum::<f64>() / rollout.returns.len() as f64
        };
        println!(
            "eval episode {:>2}/{} | return {:>10.2} | collisions {}",
            episode + 1,
            args.episodes,
            mean_return,
            rollout.metrics.collision_count
        );
        returns.push(mean_return);
        collisions.push(rollout.metrics.collision_count);
        last = Some(rollout);
    }
    let last = last.expect("at least one episode");

    let metrics = MethodMetrics {
        method: "rl".into(),
        kind: if cfg.scenario.perturbation.is_some() {
            RunKind::Perturbation
        } else {
            RunKind::ClosedLoop
        },
        metrics: EpisodeMetrics::from_records(&last.records, Some(&cfg.scenario.subject_ids())),
    };

    let summary = EvalSummary {
        checkpoint: ckpt_path,
        episodes: args.episodes,
        mean_return: returns.iter().sum::<f64>() / returns.len().max(1) as f64,
        returns,
        collisions,
        last_episode: metrics.metrics,
    };
    let eval_path = dir.join("eval.json");
    serde_json::to_writer_pretty(
        std::io::BufWriter::new(std::fs::File::create(&eval_path)?),
        &summary,
    )?;
    let trajectory = write_trajectory(&dir, &last.records, &cfg)?;
    let metrics_path = write_metrics_json(&dir, &metrics)?;
    write_manifest(&dir, "eval", &cfg, &[eval_path, trajectory, metrics_path])?;

    println!(
        "eval | mean return {:.2} over {} episodes; output written to {}",
        summary.mean_return,
        args.episodes,
        dir.display()
    );
    Ok(episode_exit_code(&last.records, last.collided, last.frozen))
}
