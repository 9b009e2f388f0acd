use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use dsa_cli::commands::{self, RunOptions, SimulateOptions};
use dsa_cli::scenario::Scenario;

#[derive(Parser)]
#[command(name = "dsa", version, about = "Dynamic security analysis of power systems by hybrid RRT search")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario file (JSON).
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory; defaults to the scenario's `output` or out/<name>.
    #[arg(long)]
    out: Option<PathBuf>,
    /// RNG seed, overrides planner.seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for the simulations of one expansion.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
    threads: u16,
    /// Iteration budget, overrides planner.k.
    #[arg(long)]
    k: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Load flow of the base mode: powerflow.csv and powerflow.log.
    Powerflow(Common),
    /// Time response through the fault sequence: simulate.csv and charts.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Post-fault mode label.
        #[arg(long)]
        mode: Option<String>,
        /// Constant control input.
        #[arg(long, allow_negative_numbers = true)]
        u: Option<f64>,
        /// End time in seconds.
        #[arg(long)]
        duration: Option<f64>,
        /// Start at the equilibrium without the fault.
        #[arg(long)]
        no_fault: bool,
    },
    /// RRT search for an execution reaching the goal region.
    Dsa(Common),
    /// Timing of full-budget runs over the scenario's K list.
    Bench(Common),
}

fn options(c: &Common) -> RunOptions {
    RunOptions {
        out: c.out.clone(),
        seed: c.seed,
        threads: usize::from(c.threads),
        k: c.k,
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Powerflow(c) => {
            let sc = Scenario::load(&c.scenario)?;
            let r = commands::powerflow(&sc, &options(&c))?;
            println!(
                "power flow converged in {} iterations, mismatch {:e}; {} buses written to {}",
                r.iterations,
                r.mismatch,
                r.rows,
                r.out_dir.display()
            );
        }
        Command::Simulate {
            common,
            mode,
            u,
            duration,
            no_fault,
        } => {
            let sc = Scenario::load(&common.scenario)?;
            let sim = SimulateOptions {
                mode,
                u,
                duration,
                no_fault,
            };
            let r = commands::simulate(&sc, &options(&common), &sim)?;
            println!(
                "{} samples written to {}; index-1 test singular at {} of {} states",
                r.series.rows.len(),
                r.out_dir.display(),
                r.index1_failures,
                r.states_checked
            );
        }
        Command::Dsa(c) => {
            let sc = Scenario::load(&c.scenario)?;
            let r = commands::dsa(&sc, &options(&c))?;
            print!("{}", r.summary);
        }
        Command::Bench(c) => {
            let sc = Scenario::load(&c.scenario)?;
            let rows = commands::bench(&sc, &options(&c))?;
            println!("k,total,t_step4,nodes,sims_total,comparisons");
            for r in rows {
                println!(
                    "{},{:.4},{:.4},{},{},{}",
                    r.k, r.total, r.step4, r.nodes, r.sims_total, r.comparisons
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    // clap exits with 2 on bad arguments, which is taken by power-flow failures
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            let code = if e.use_stderr() { dsa_cli::EXIT_PARSE } else { dsa_cli::EXIT_OK };
            return ExitCode::from(code as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::from(dsa_cli::EXIT_OK as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(dsa_cli::exit_code(&e) as u8)
        }
    }
}
