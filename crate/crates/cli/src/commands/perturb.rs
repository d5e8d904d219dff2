use std::io::Write;

use clap::Args;

use platoon_core::config::Waveform;
use platoon_core::controllers::ControllerRegistry;
use platoon_core::env::TrafficEnv;
use platoon_core::metrics::{
    oscillation_amplitudes, speed_series, EpisodeMetrics, DEFAULT_TRANSIENT_PERIODS,
};
use platoon_core::record::format_sig;

use crate::args::ConfigArgs;
use crate::manifest::write_manifest;

use super::{
    episode_exit_code, subject_method, write_metrics_json, write_spacetime, write_trajectory,
    MethodMetrics, RunKind,
};

#[derive(Args, Debug)]
pub struct PerturbArgs {
    #[command(flatten)]
    pub config: ConfigArgs,

    /// Waveform kind: sinusoid or pulse.
    #[arg(long)]
    pub waveform: Option<String>,

    /// Sinusoid amplitude, m/s.
    #[arg(long)]
    pub amplitude: Option<f64>,

    /// Sinusoid period, seconds.
    #[arg(long)]
    pub period: Option<f64>,

    /// Pulse speed drop, m/s.
    #[arg(long)]
    pub drop: Option<f64>,

    /// Pulse duration, seconds.
    #[arg(long)]
    pub duration: Option<f64>,

    /// Pulse start time, seconds.
    #[arg(long)]
    pub start: Option<f64>,
}

pub fn run(args: PerturbArgs) -> anyhow::Result<i32> {
    let mut cfg = args.config.resolve("perturbation", Some("bcm"))?;
    apply_waveform_flags(&mut cfg, &args)?;
    cfg.validate()?;
    let dir = args.config.out_dir("perturb")?;

    let registry = ControllerRegistry::with_builtins();
    let mut env = TrafficEnv::from_config(&cfg, &registry)?;
    let rollout = env.run_episode(None)?;

    let metrics = MethodMetrics {
        method: subject_method(&cfg),
        kind: RunKind::Perturbation,
        metrics: EpisodeMetrics::from_records(&rollout.records, Some(&cfg.scenario.subject_ids())),
    };

    let trajectory = write_trajectory(&dir, &rollout.records, &cfg)?;
    let spacetime = write_spacetime(&dir, &rollout.records)?;
    let metrics_path = write_metrics_json(&dir, &metrics)?;

    // Per-vehicle post-transient speed oscillation amplitudes.
    let profile = cfg.scenario.perturbation.expect("perturbation preset");
    let period = match profile.waveform {
        Waveform::Sinusoid { period, .. } => period,
        // A pulse has no period; analyze everything after the pulse start.
        Waveform::Pulse { start, .. } => {
            (cfg.scenario.dt * rollout.records.len() as f64 - start).max(cfg.scenario.dt)
        }
    };
    let transient = match profile.waveform {
        Waveform::Sinusoid { .. } => DEFAULT_TRANSIENT_PERIODS * period,
        Waveform::Pulse { start, .. } => start,
    };
    let n = cfg.scenario.vehicles.len();
    let amplitudes = oscillation_amplitudes(
        &speed_series(&rollout.records, n),
        cfg.scenario.dt,
        period,
        transient,
    )?;

    let amp_path = dir.join("amplitudes.csv");
    {
        let file = std::fs::File::create(&amp_path)?;
        let mut w = std::io::BufWriter::new(file);
        writeln!(w, "vehicle_id,controller,amplitude")?;
        for (id, amp) in amplitudes.iter().enumerate() {
            writeln!(
                w,
                "{},{},{}",
                id,
                cfg.scenario.vehicles[id].controller,
                format_sig(*amp)
            )?;
        }
    }
    write_manifest(
        &dir,
        "perturb",
        &cfg,
        &[trajectory, spacetime, metrics_path, amp_path],
    )?;

    // Stability report, leader first (ids run tail -> leader).
    println!("perturbation test | method={}", metrics.method);
    for id in (0..n).rev() {
        let role = if id == n - 1 {
            " (forced leader)"
        } else if id == 0 {
            " (tail)"
        } else {
            ""
        };
        println!(
            "  vehicle {:>2} [{:>10}]{role}: amplitude {:.3} m/s",
            id, cfg.scenario.vehicles[id].controller, amplitudes[id]
        );
    }
    let chain: Vec<f64> = (1..=n - 2).rev().map(|id| amplitudes[id]).collect();
    let non_increasing = chain.windows(2).all(|w| w[1] <= w[0] + 1e-9);
    println!(
        "  subjects: non-increasing={} last/first amplitude ratio={:.3}",
        if non_increasing { "yes" } else { "no" },
        chain.last().unwrap_or(&0.0) / chain.first().unwrap_or(&1.0)
    );
    println!(
        "  summary: headway={} jerk={:.3} safety={:.3}",
        metrics
            .metrics
            .mean_time_headway
            .map(|h| format!("{h:.3}"))
            .unwrap_or_else(|| "-".into()),
        metrics.metrics.mean_abs_jerk,
        metrics.metrics.mean_log_ttc_safety,
    );
    println!("output written to {}", dir.display());
    Ok(episode_exit_code(
        &rollout.records,
        rollout.collided,
        rollout.frozen,
    ))
}

fn apply_waveform_flags(
    cfg: &mut platoon_core::config::Config,
    args: &PerturbArgs,
) -> anyhow::Result<()> {
    let profile = cfg
        .scenario
        .perturbation
        .as_mut()
        .ok_or(platoon_core::Error::ProfileNeedsOpenChain)?;
    if let Some(kind) = &args.waveform {
        profile.waveform = match kind.as_str() {
            "sinusoid" => Waveform::Sinusoid {
                amplitude: 2.0,
                period: 10.0,
            },
            "pulse" => Waveform::Pulse {
                drop: 5.0,
                duration: 10.0,
                start: 60.0,
            },
            other => anyhow::bail!("unknown waveform `{other}` (expected sinusoid or pulse)"),
        };
    }
    match &mut profile.waveform {
        Waveform::Sinusoid { amplitude, period } => {
            if let Some(a) = args.amplitude {
                *amplitude = a;
            }
            if let Some(p) = args.period {
                *period = p;
            }
        }
        Waveform::Pulse {
            drop,
            duration,
            start,
        } => {
            if let Some(d) = args.drop {
                *drop = d;
            }
            if let Some(d) = args.duration {
                *duration = d;
            }
            if let Some(s) = args.start {
                *start = s;
            }
        }
    }
    Ok(())
}
