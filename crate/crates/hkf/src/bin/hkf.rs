use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use hkf::experiments::{self, default_config, Experiment, ExperimentConfig};

/// Run an EB/KF hyperparameter estimation experiment.
#[derive(Parser, Debug)]
#[command(name = "hkf", version)]
struct Cli {
    /// regularity | l2-bias | amplitude | lengthscale | joint | varcoef |
    /// discontinuity | deterministic | oracle-check
    experiment: String,
    /// JSON configuration; the built-in defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    instances: Option<usize>,
    /// Output directory (default: the config's output_dir, else out/<experiment>).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Diagonal jitter added to every Gram matrix.
    #[arg(long)]
    jitter: Option<f64>,
    /// Extra dyadic levels for kernel heads and truth truncation.
    #[arg(long)]
    truncation_extra: Option<u32>,
    /// Print the resolved configuration and exit.
    #[arg(long)]
    dump_config: bool,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("error")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> hkf::Result<()> {
    let exp = Experiment::parse(&cli.experiment)?;
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => default_config(exp),
    };
    if cfg.experiment != exp {
        return Err(hkf::Error::Config(format!(
            "config describes '{}' but '{}' was requested",
            cfg.experiment.name(),
            exp.name()
        )));
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(n) = cli.instances {
        cfg.instances = n;
    }
    if let Some(j) = cli.jitter {
        cfg.jitter = j;
    }
    if let Some(k) = cli.truncation_extra {
        cfg.truncation_extra = k;
    }
    if let Some(o) = &cli.out {
        cfg.output_dir = Some(o.clone());
    }
    cfg.validate()?;
    if cli.dump_config {
        println!("{}", serde_json::to_string_pretty(&cfg)?);
        return Ok(());
    }
    let out = cfg.output_dir.clone().unwrap_or_else(|| PathBuf::from("out").join(exp.name()));
    let report = experiments::run(&cfg)?;
    report.write(&out)?;
    for s in &report.summaries {
        let nv = s.normalized_variance.map(|v| format!("{v:.3e}")).unwrap_or_else(|| "-".into());
        println!(
            "{:<16} {:<10} n={:<3} mean={:.6} var={:.3e} normvar={} boundary={} failed={}",
            s.method, s.param_name, s.count, s.mean, s.variance, nv, s.boundary_hits, s.failures
        );
    }
    for (k, v) in &report.derived {
        println!("{k} = {v:.6e}");
    }
    println!("wrote {}", out.display());
    Ok(())
}
