use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Parser;
use roughwz::experiment::{run_experiment, ExperimentConfig, RunOptions, SuiteReport, EXPERIMENTS};
use roughwz::rde::BUILTIN_FIELDS;

/// Monte-Carlo convergence experiments for Wong-Zakai approximations of fBm rough paths.
#[derive(Debug, Parser)]
#[command(name = "roughwz", version)]
struct Cli {
    /// Experiment to run: noise, solution, stopping or suite.
    #[arg(long)]
    experiment: Option<String>,
    /// TOML (.toml) or JSON config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Hurst index.
    #[arg(long = "H", value_name = "H")]
    hurst: Option<f64>,
    #[arg(long)]
    seeds: Option<usize>,
    /// Steps on [t_min, t_max].
    #[arg(long)]
    grid_n: Option<usize>,
    /// Comma-separated grid multiples, e.g. 2,4,8,16.
    #[arg(long, value_delimiter = ',')]
    delta_ladder: Option<Vec<usize>>,
    /// Directory for CSV and JSON reports.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
    /// Print the experiment and vector-field catalogs and exit.
    #[arg(long)]
    list: bool,
}

fn catalog() -> String {
    let mut s = String::from("experiments:\n");
    for (name, what) in EXPERIMENTS {
        s.push_str(&format!("  {name:<12}{what}\n"));
    }
    s.push_str("vector fields:\n");
    for (name, what) in BUILTIN_FIELDS {
        s.push_str(&format!("  {name:<12}{what}\n"));
    }
    s
}

fn build_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::from_path(path).with_context(|| format!("loading {}", path.display()))?,
        None => ExperimentConfig::default(),
    };
    if let Some(e) = &cli.experiment {
        cfg.experiment = e.clone();
    }
    if let Some(h) = cli.hurst {
        cfg.hurst = h;
        // keep the default Hölder exponents admissible for the requested H
        if cli.config.is_none() && cfg.beta_prime >= h {
            cfg.beta_prime = (1.0 / 3.0 + 2.0 * h) / 3.0;
            cfg.beta = (2.0 / 3.0 + h) / 3.0;
        }
    }
    if let Some(n) = cli.seeds {
        cfg.n_seeds = n;
    }
    if let Some(n) = cli.grid_n {
        cfg.grid_n = n;
    }
    if let Some(l) = &cli.delta_ladder {
        cfg.delta_ladder = l.clone();
    }
    if let Some(o) = &cli.out {
        cfg.out = Some(o.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn summary(report: &SuiteReport) -> String {
    let mut s = String::new();
    for r in &report.reports {
        s.push_str(&format!("{} ({:.1} s)\n", r.experiment, r.runtime_secs));
        for m in &r.metrics {
            let slope = m.slope.map_or("n/a".to_string(), |f| format!("{:.4}", f.slope));
            let mono = m.monotone_fraction.map_or(String::new(), |f| format!(", monotone in {:.0}% of seeds", 100.0 * f));
            s.push_str(&format!("  {:<18} slope {slope}{mono}\n", m.metric));
        }
        for g in &r.gates {
            let verdict = if g.passed { "PASS" } else { "FAIL" };
            s.push_str(&format!("  [{verdict}] {}: observed {:.4}; {} (n = {})\n", g.name, g.observed, g.band, g.sample_size));
        }
        for n in &r.notes {
            s.push_str(&format!("  note: {n}\n"));
        }
    }
    s
}

fn run(cli: &Cli) -> Result<bool> {
    let cfg = build_config(cli)?;
    let report = run_experiment(&cfg, RunOptions { threads: cli.threads })?;
    if let Some(dir) = &cfg.out {
        report.write(dir).with_context(|| format!("writing reports to {}", dir.display()))?;
    }
    print!("{}", summary(&report));
    Ok(report.passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.list {
        print!("{}", catalog());
        return ExitCode::SUCCESS;
    }
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
