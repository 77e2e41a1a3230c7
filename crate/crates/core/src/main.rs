use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use noisereg::config::{parse_config, ExperimentPlan};
use noisereg::experiment::{render_report, run_conditions, run_experiment, run_single};
use noisereg::figures::run_figure;

#[derive(Parser)]
#[command(name = "noisereg", version, about = "Simulate SPDEs with nonlinear multiplicative noise")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Overrides {
    /// Number of ensemble paths.
    #[arg(long)]
    paths: Option<usize>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one path and write its trajectory.
    Simulate {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run the ensemble and every analysis listed in the plan.
    Ensemble {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
        /// Write one trajectory CSV per path.
        #[arg(long)]
        dump_paths: bool,
    },
    /// Evaluate the structural conditions and print the reports as JSON.
    Check {
        config: PathBuf,
    },
    /// Reproduce one of the scalar figure scenarios (fig1 to fig5).
    Figure {
        name: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

fn load(path: &PathBuf, overrides: Option<&Overrides>) -> anyhow::Result<ExperimentPlan> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut plan = parse_config(&text)?;
    if let Some(o) = overrides {
        let ens = plan.ensemble.get_or_insert_with(Default::default);
        if let Some(n) = o.paths {
            ens.n_paths = Some(n);
        }
        if let Some(s) = o.seed {
            ens.master_seed = Some(s);
        }
        if let Some(out) = &o.out {
            plan.output_dir = Some(out.clone());
        }
        plan.setup()?;
    }
    Ok(plan)
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    match cli.command {
        Command::Simulate { config, overrides } => {
            let plan = load(&config, Some(&overrides))?;
            let record = run_single(&plan)?;
            println!("{}", serde_json::to_string(&record.status)?);
            Ok(true)
        }
        Command::Ensemble { config, overrides, dump_paths } => {
            let plan = load(&config, Some(&overrides))?;
            let result = run_experiment(&plan, dump_paths)?;
            print!("{}", render_report(&result));
            Ok(result.passed())
        }
        Command::Check { config } => {
            let plan = load(&config, None)?;
            let reports = run_conditions(&plan.setup()?)?;
            println!("{}", serde_json::to_string_pretty(&reports)?);
            Ok(reports.iter().all(|r| r.holds))
        }
        Command::Figure { name, seed, out } => {
            let outcome = run_figure(&name, seed, &out)?;
            println!("{}", serde_json::to_string(&outcome)?);
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
