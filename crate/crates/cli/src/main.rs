use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand as ClapSubcommand};
use cracklab_cli::config::RunConfig;
use cracklab_cli::pipeline::{run, Subcommand};

/// Numerical laboratory for elliptic problems at the edge of a crack.
#[derive(Parser)]
#[command(name = "cracklab", version, about)]
struct Cli {
    /// Path to the JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override the configured output directory.
    #[arg(long, global = true)]
    output: Option<PathBuf>,

    /// Worker threads (1 reproduces runs bit-identically).
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,

    /// Override the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Multiply all audit tolerances (coarse-mesh smoke runs).
    #[arg(long, global = true)]
    tolerance_scale: Option<f64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(ClapSubcommand)]
enum Command {
    /// Solve the slit-sphere eigenproblem and export the eigenpairs.
    Spectrum,
    /// Mesh the slit ball and solve the boundary value problem.
    Solve,
    /// Compute the Almgren frequency profile of the solved field.
    Frequency,
    /// Blow-up convergence against the matched spherical eigencluster.
    Blowup,
    /// Fourier coefficients, correction integrals and beta coefficients.
    Fourier,
    /// Run the inequality audits; nonzero exit if any fails.
    Audit,
    /// Approximating domains: star-shapedness sweep and H1 convergence.
    Approx,
    /// The full acceptance suite.
    Verify,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let sub = match cli.command {
        Command::Spectrum => Subcommand::Spectrum,
        Command::Solve => Subcommand::Solve,
        Command::Frequency => Subcommand::Frequency,
        Command::Blowup => Subcommand::Blowup,
        Command::Fourier => Subcommand::Fourier,
        Command::Audit => Subcommand::Audit,
        Command::Approx => Subcommand::Approx,
        Command::Verify => Subcommand::Verify,
    };

    let config_path = match &cli.config {
        Some(p) => p.clone(),
        None => {
            eprintln!("error: --config PATH is required");
            return ExitCode::from(2);
        }
    };
    let text = match std::fs::read_to_string(&config_path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", config_path.display());
            return ExitCode::from(2);
        }
    };
    let mut cfg = match RunConfig::from_json(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: invalid config: {e}");
            return ExitCode::from(2);
        }
    };
    if let Some(out) = cli.output {
        cfg.output_dir = out;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(ts) = cli.tolerance_scale {
        if !(ts > 0.0) {
            eprintln!("error: invalid config: tolerance scale must be positive");
            return ExitCode::from(2);
        }
        cfg.tolerance_scale = ts;
    }

    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads.max(1)).build_global()
    {
        eprintln!("warning: thread pool already configured: {e}");
    }

    match run(sub, &cfg) {
        Ok(outcome) => {
            for c in &outcome.checks {
                println!("[{}] {} {}", if c.pass { "ok" } else { "FAIL" }, c.name, c.detail);
            }
            println!(
                "{}: wrote {}",
                if outcome.pass { "pass" } else { "FAIL" },
                outcome.published.display()
            );
            if outcome.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
