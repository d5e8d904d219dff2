use std::path::PathBuf;

use clap::Args;

use platoon_core::metrics::EpisodeMetrics;
use platoon_core::record::{format_sig, read_trajectory_csv};

use super::{MethodMetrics, RunKind};

#[derive(Args, Debug)]
pub struct MetricsArgs {
    /// Trajectory CSV to analyze.
    #[arg(long)]
    pub input: PathBuf,

    /// Output format: json or csv.
    #[arg(long, default_value = "json")]
    pub format: String,

    /// Restrict to these vehicle ids (comma separated); default all.
    #[arg(long, value_delimiter = ',')]
    pub vehicles: Vec<usize>,

    /// Method label for the emitted row (defaults to the controller of the
    /// first selected vehicle).
    #[arg(long)]
    pub method: Option<String>,

    /// Row kind for table building: closed-loop or perturbation.
    #[arg(long, default_value = "closed-loop")]
    pub kind: String,

    /// Write to a file instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(args: MetricsArgs) -> anyhow::Result<i32> {
    let file = std::fs::File::open(&args.input)?;
    let data = read_trajectory_csv(std::io::BufReader::new(file))?;
    let subjects = if args.vehicles.is_empty() {
        None
    } else {
        Some(args.vehicles.as_slice())
    };
    let metrics = EpisodeMetrics::from_records(&data.records, subjects);

    let method = args.method.clone().unwrap_or_else(|| {
        let first = args.vehicles.first().copied().unwrap_or(0);
        data.controllers
            .get(first)
            .cloned()
            .unwrap_or_else(|| "unknown".into())
    });
    let kind = match args.kind.as_str() {
        "closed-loop" => RunKind::ClosedLoop,
        "perturbation" => RunKind::Perturbation,
        other => anyhow::bail!("unknown kind `{other}` (expected closed-loop or perturbation)"),
    };
    let row = MethodMetrics {
        method,
        kind,
        metrics,
    };

    let opt = |v: Option<f64>| v.map(format_sig).unwrap_or_default();
    let text = match args.format.as_str() {
        "json" => serde_json::to_string_pretty(&row)?,
        "csv" => format!(
            "method,kind,mean_time_headway,mean_abs_jerk,mean_ttc,mean_log_ttc_safety,collision_count,mean_speed\n{},{},{},{},{},{},{},{}",
            row.method,
            row.kind,
            opt(row.metrics.mean_time_headway),
            format_sig(row.metrics.mean_abs_jerk),
            opt(row.metrics.mean_ttc),
            format_sig(row.metrics.mean_log_ttc_safety),
            row.metrics.collision_count,
            format_sig(row.metrics.mean_speed),
        ),
        other => anyhow::bail!("unknown format `{other}` (expected json or csv)"),
    };
    match &args.out {
        Some(path) => std::fs::write(path, text + "\n")?,
        None => println!("{text}"),
    }
    Ok(0)
}
