use std::io::Write;

use clap::Args;

use platoon_core::controllers::ControllerRegistry;
use platoon_core::learner::train_with;
use platoon_core::record::format_sig;

use crate::args::ConfigArgs;
use crate::manifest::write_manifest;

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[command(flatten)]
    pub config: ConfigArgs,

    /// Training episodes.
    #[arg(long)]
    pub episodes: Option<usize>,

    /// Observation/reward variant: bilateral (7-dim) or cfm (5-dim baseline).
    #[arg(long)]
    pub variant: Option<String>,
}

pub fn run(args: TrainArgs) -> anyhow::Result<i32> {
    let mut cfg = args.config.resolve("closed-loop", Some("rl"))?;
    if let Some(episodes) = args.episodes {
        cfg.train.episodes = episodes;
    }
    if let Some(variant) = &args.variant {
        cfg.controllers.rl.variant = variant.parse()?;
    }
    if !cfg.scenario.vehicles.iter().any(|v| v.controller == "rl") {
        anyhow::bail!(platoon_core::Error::UnknownController(
            "train needs at least one rl-tagged vehicle".into()
        ));
    }
    let dir = args.config.out_dir("train")?;

    let registry = ControllerRegistry::with_builtins();
    let episodes = cfg.train.episodes;
    let outcome = train_with(&cfg, &registry, |p| {
        println!(
            "episode {:>3}/{episodes} | reward {:>10.2} | headway {:>8} | collisions {}",
            p.episode + 1,
            p.mean_reward,
            p.mean_headway
                .map(|h| format!("{h:.3}"))
                .unwrap_or_else(|| "-".into()),
            p.collisions
        );
    })?;

    let ckpt_path = dir.join("policy.ckpt");
    outcome.checkpoint.save(&ckpt_path)?;

    let curve_path = dir.join("curve.csv");
    {
        let file = std::fs::File::create(&curve_path)?;
        let mut w = std::io::BufWriter::new(file);
        writeln!(w, "episode,mean_reward,mean_headway,collisions")?;
        for p in &outcome.curve {
            writeln!(
                w,
                "{},{},{},{}",
                p.episode,
                format_sig(p.mean_reward),
                p.mean_headway.map(format_sig).unwrap_or_default(),
                p.collisions
            )?;
        }
    }
    write_manifest(&dir, "train", &cfg, &[ckpt_path, curve_path])?;
    println!(
        "trained {} episodes ({} variant); checkpoint and curve written to {}",
        outcome.curve.len(),
        serde_json::to_string(&outcome.checkpoint.variant)?.trim_matches('"'),
        dir.display()
    );
    Ok(0)
}
