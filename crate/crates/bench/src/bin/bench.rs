use std::path::PathBuf;

use clap::{Parser, Subcommand};

use bench::workload::{run_interleaved, Kind, WorkloadSpec};
use bench::{micro, to_csv, variants, BenchResult};
use viewcap::Validation;

#[derive(Parser)]
#[command(about = "Workload and microbenchmark timings as CSV")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Skip expression validation against view schemas.
    #[arg(long, global = true)]
    no_validate: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Replay a generated request stream against one or more variants.
    Workload {
        #[arg(long, default_value = "rw")]
        kind: String,
        /// Requests per repetition; defaults to one fifth of the full size.
        #[arg(long)]
        count: Option<usize>,
        #[arg(long, default_value_t = 10)]
        reps: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Comma-separated variant names, or `all`.
        #[arg(long, default_value = "all")]
        variant: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Time one operation in raw SQL and through a capability.
    Micro {
        /// Comma-separated benchmark names, or `all`.
        #[arg(long, default_value = "all")]
        bench: String,
        #[arg(long, default_value_t = 50_000)]
        rows: i64,
        /// Comma-separated percentages.
        #[arg(long, default_value = "0,25,50,75,100")]
        selectivity: String,
        #[arg(long, default_value_t = 10)]
        reps: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn pick<'a>(arg: &'a str, all: Vec<&'static str>) -> Vec<&'a str> {
    if arg == "all" {
        all
    } else {
        arg.split(',').map(str::trim).collect()
    }
}

fn summarize(results: &[BenchResult]) {
    let base = results.iter().filter(|r| r.variant == "baseline");
    for b in base {
        for r in results
            .iter()
            .filter(|r| r.variant != "baseline" && r.bench == b.bench && r.selectivity == b.selectivity)
        {
            let s = r.estimate().ratio(b.estimate());
            eprintln!(
                "{:<10} {:>6} {:<18} {:.3}x ± {:.3}",
                r.bench,
                r.selectivity.map(|p| format!("{p}%")).unwrap_or_default(),
                r.variant,
                s.mean,
                s.ci
            );
        }
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cli = Cli::parse();
    let validation = if cli.no_validate { Validation::Off } else { Validation::On };
    let (results, out) = match cli.command {
        Command::Workload {
            kind,
            count,
            reps,
            seed,
            variant,
            out,
        } => {
            let kind = Kind::parse(&kind).ok_or_else(|| format!("unknown workload kind {kind}"))?;
            let mut chosen = Vec::new();
            for name in pick(&variant, variants::names()) {
                chosen.push(variants::by_name(name).ok_or_else(|| format!("unknown variant {name}"))??);
            }
            let refs: Vec<&dyn variants::Variant> = chosen.iter().map(|v| v.as_ref()).collect();
            let spec = WorkloadSpec {
                kind,
                count: count.unwrap_or(kind.default_count()),
                seed,
            };
            (run_interleaved(spec, &refs, reps, validation)?, out)
        }
        Command::Micro {
            bench,
            rows,
            selectivity,
            reps,
            out,
        } => {
            let mut results = Vec::new();
            for name in pick(&bench, micro::names()) {
                let m = micro::by_name(name).ok_or_else(|| format!("unknown benchmark {name}"))?;
                for p in selectivity.split(',') {
                    let p: f64 = p.trim().parse()?;
                    if !(0.0..=100.0).contains(&p) {
                        return Err(format!("selectivity {p} is not a percentage").into());
                    }
                    let (b, c) = micro::run_micro(m.as_ref(), rows, p, reps, validation)?;
                    results.push(b);
                    results.push(c);
                }
            }
            (results, out)
        }
    };
    summarize(&results);
    let csv = to_csv(&results);
    match out {
        Some(path) => std::fs::write(path, csv)?,
        None => print!("{csv}"),
    }
    Ok(())
}
