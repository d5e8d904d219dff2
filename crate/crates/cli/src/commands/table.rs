use std::path::PathBuf;

use clap::Args;

use platoon_core::record::format_sig;

use super::{MethodMetrics, RunKind};

#[derive(Args, Debug)]
pub struct TableArgs {
    /// Run directories, each holding a metrics.json.
    #[arg(required = true)]
    pub dirs: Vec<PathBuf>,

    /// Also write the table as CSV to this path.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(args: TableArgs) -> anyhow::Result<i32> {
    let mut rows: Vec<(PathBuf, MethodMetrics)> = Vec::with_capacity(args.dirs.len());
    for dir in &args.dirs {
        let path = dir.join("metrics.json");
        let file =
            std::fs::File::open(&path).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
        let metrics: MethodMetrics = serde_json::from_reader(std::io::BufReader::new(file))?;
        rows.push((dir.clone(), metrics));
    }

    // All rows must come from the same experiment family.
    let kind = rows[0].1.kind;
    let offenders: Vec<String> = rows
        .iter()
        .filter(|(_, m)| m.kind != kind)
        .map(|(dir, m)| format!("{} ({})", dir.display(), m.kind))
        .collect();
    if !offenders.is_empty() {
        anyhow::bail!(
            "mixed run kinds: expected {kind} like {}, but got {}",
            rows[0].0.display(),
            offenders.join(", ")
        );
    }

    rows.sort_by(|a, b| a.1.method.cmp(&b.1.method).then(a.0.cmp(&b.0)));

    let third_column = match kind {
        RunKind::ClosedLoop => "TTC",
        RunKind::Perturbation => "Safety",
    };
    // On quiet scenarios the rare closing events have near-zero rates and
    // TTC means become astronomical; fall back to scientific notation there.
    let fmt = |x: f64| {
        if x.abs() < 1e6 {
            format!("{x:.3}")
        } else {
            format!("{x:.2e}")
        }
    };
    let fmt_opt = |v: Option<f64>| v.map(fmt).unwrap_or_else(|| "-".into());
    println!(
        "{:<14} {:>9} {:>9} {:>9}",
        "Method", "Headway", "Jerk", third_column
    );
    let mut csv = format!("method,headway,jerk,{}\n", third_column.to_lowercase());
    for (_, row) in &rows {
        let third = match kind {
            RunKind::ClosedLoop => fmt_opt(row.metrics.mean_ttc),
            RunKind::Perturbation => format!("{:.3}", row.metrics.mean_log_ttc_safety),
        };
        println!(
            "{:<14} {:>9} {:>9.3} {:>9}",
            row.method,
            fmt_opt(row.metrics.mean_time_headway),
            row.metrics.mean_abs_jerk,
            third
        );
        let third_csv = match kind {
            RunKind::ClosedLoop => row.metrics.mean_ttc.map(format_sig).unwrap_or_default(),
            RunKind::Perturbation => format_sig(row.metrics.mean_log_ttc_safety),
        };
        csv.push_str(&format!(
            "{},{},{},{}\n",
            row.method,
            row.metrics
                .mean_time_headway
                .map(format_sig)
                .unwrap_or_default(),
            format_sig(row.metrics.mean_abs_jerk),
            third_csv
        ));
    }
    if let Some(path) = &args.out {
        std::fs::write(path, csv)?;
        println!("table written to {}", path.display());
    }
    Ok(0)
}
