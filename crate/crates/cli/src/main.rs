use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use odsbounds::inference::BootstrapScheme;
use odsbounds::{SettingTag, TermPolicy};

mod commands;
mod error;
mod input;

use commands::{BootstrapRequest, Format, Globals, Outcome};

#[derive(Debug, Parser)]
#[command(name = "odsbounds", version, about = "Bounds on the causal risk difference under outcome-dependent sampling")]
struct Cli {
    /// Seed for bootstrap, random verification and studies; overrides config files.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Directory for study output files.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,

    #[arg(long, global = true, value_enum, default_value = "json")]
    format: Format,

    /// Term set for the unconfounded instrument design.
    #[arg(long, global = true)]
    term_policy: Option<TermPolicy>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Point bounds, optionally with bootstrap intervals.
    Bounds {
        input: PathBuf,
        #[arg(long, value_delimiter = ',')]
        settings: Option<Vec<SettingTag>>,
        #[arg(long)]
        bootstrap: Option<BootstrapScheme>,
        #[arg(long = "B", default_value_t = 1000)]
        b: usize,
        #[arg(long, default_value_t = 0.95)]
        level: f64,
    },
    /// Compare closed forms with the linear program.
    Verify {
        input: Option<PathBuf>,
        /// Number of random instances per setting.
        #[arg(long)]
        random: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        settings: Option<Vec<SettingTag>>,
        /// Probability of zeroing each response-type weight.
        #[arg(long, default_value_t = 0.3)]
        sparsity: f64,
    },
    /// Width and validity study over random scenarios.
    Simulate { config: PathBuf },
    /// Bootstrap coverage study.
    Coverage { config: PathBuf },
    /// Bounds and intervals over a grid of selection probabilities.
    Sensitivity { config: PathBuf },
}

fn run(cli: Cli) -> Result<Outcome, error::CliError> {
    let g = Globals { seed: cli.seed, out_dir: cli.out_dir, format: cli.format, term_policy: cli.term_policy };
    match cli.command {
        Command::Bounds { input, settings, bootstrap, b, level } => {
            let boot = bootstrap.map(|scheme| BootstrapRequest { scheme, b, level });
            commands::cmd_bounds(&g, &input, settings, boot)
        }
        Command::Verify { input, random, settings, sparsity } => {
            commands::cmd_verify(&g, input.as_deref(), random, settings, sparsity)
        }
        Command::Simulate { config } => commands::cmd_simulate(&g, &config),
        Command::Coverage { config } => commands::cmd_coverage(&g, &config),
        Command::Sensitivity { config } => commands::cmd_sensitivity(&g, &config),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(out) => {
            let mut stdout = std::io::stdout().lock();
            let _ = stdout.write_all(out.stdout.as_bytes());
            for line in &out.stderr {
                eprintln!("{line}");
            }
            ExitCode::from(out.code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
