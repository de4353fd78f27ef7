use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cm_euler3d::config::load_config;
use cm_euler3d::convergence::{abc_convergence, self_convergence};
use cm_euler3d::driver::{init_threads_from_env, resample, resume, run, ResampleQuantity};
use cm_euler3d::scenarios::ScenarioKind;
use cm_euler3d::{Error, Result};

#[derive(Parser)]
#[command(name = "cm-euler3d", version, about = "Characteristic mapping solver for 3D Euler")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a configuration file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the output directory of the config.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Continue from a stack directory written by an earlier run.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Evaluate a persisted stack on an N³ grid and write its spectrum.
    Resample {
        #[arg(long)]
        stack: PathBuf,
        #[arg(long)]
        grid: usize,
        #[arg(long, default_value = "w")]
        quantity: String,
        #[arg(long)]
        output: Option<PathBuf>,
        /// Also write the raw samples.
        #[arg(long)]
        save_samples: bool,
    },
    /// Grid-convergence study.
    Convergence {
        #[arg(long)]
        scenario: String,
        #[arg(long, value_delimiter = ',', default_values_t = [24usize, 36, 48])]
        levels: Vec<usize>,
        /// Reference resolution for self-convergence.
        #[arg(long, default_value_t = 72)]
        reference: usize,
        #[arg(long, default_value_t = 2.0)]
        t_final: f64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn execute(cmd: Command) -> Result<()> {
    init_threads_from_env()?;
    match cmd {
        Command::Run { config, output, resume: from } => {
            let mut cfg = load_config(&config)?;
            if let Some(o) = output {
                cfg.output_dir = o;
            }
            let summary = match from {
                Some(dir) => resume(&cfg, &dir)?,
                None => run(&cfg)?,
            };
            println!("{}", cm_euler3d::diagnostics::DiagnosticsRow::CSV_HEADER);
            for r in &summary.rows {
                println!("{}", r.to_csv());
            }
            println!("# {} steps, {} remaps, output in {}", summary.n_steps, summary.remaps.len(), summary.output_dir.display());
        }
        Command::Resample {
            stack,
            grid,
            quantity,
            output,
            save_samples,
        } => {
            let q: ResampleQuantity = quantity.parse()?;
            let out = output.unwrap_or_else(|| stack.join(format!("resample_{grid}")));
            let r = resample(&stack, grid, q, &out, save_samples)?;
            println!("t {} grid {} spectrum {}", r.t, r.grid, r.spectrum_path.display());
            if let Some(c) = r.conserved {
                println!(
                    "enstrophy {:.6e} energy {:.6e} helicity {:.6e} max_w {:.6e} max_u {:.6e}",
                    c.enstrophy, c.energy, c.helicity, c.max_w, c.max_u
                );
            }
        }
        Command::Convergence {
            scenario,
            levels,
            reference,
            t_final,
        } => {
            let report = match scenario.parse::<ScenarioKind>()? {
                ScenarioKind::Abc => abc_convergence(&levels, t_final)?,
                ScenarioKind::TaylorGreen => self_convergence(ScenarioKind::TaylorGreen, &levels, reference, t_final)?,
                other => return Err(Error::Config(format!("convergence supports abc and taylor_green, not {other}"))),
            };
            println!("{report}");
        }
    }
    Ok(())
}
