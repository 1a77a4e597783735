use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mdx_cli::commands::{self, App, Mode};
use mdx_cli::load::{self, Failure, Source};
use mdx_cli::schema::ResultFile;
use mdx_core::Limits;

/// Decompose marginals into distributions over subsets that meet covering
/// requirements.
#[derive(Parser)]
#[command(name = "mdx", version)]
struct Cli {
    /// Cap on ground-set size for subset enumeration.
    #[arg(long, global = true, env = "MDX_CAP")]
    cap: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Test the covering condition for the instance's marginals.
    Check {
        /// Instance file.
        file: String,
    },
    /// Compute and verify a decomposition.
    Decompose {
        /// Instance file.
        file: String,
        /// Solver; auto picks one from the family kind.
        #[arg(long, value_enum, default_value = "auto")]
        mode: Mode,
        /// Write the result here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Draw sets from a result file.
    Sample {
        /// Result file written by decompose or app.
        file: String,
        /// Number of draws, one line each.
        #[arg(long, default_value_t = 1)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run an application solver.
    App {
        #[arg(value_enum)]
        which: App,
        /// Instance file.
        file: String,
        /// Write the result here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn emit(file: &ResultFile, out: Option<&PathBuf>) -> Result<String, Failure> {
    let text = commands::render(file);
    match out {
        Some(path) => {
            std::fs::write(path, &text)
                .map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
            Ok(String::new())
        }
        None => Ok(text),
    }
}

fn run(cli: Cli) -> Result<String, Failure> {
    let limits = match cli.cap {
        Some(cap) => Limits::default().with_subset_cap(cap),
        None => Limits::default(),
    };
    match cli.command {
        Command::Check { file } => commands::check(&load::load(&file, limits)?),
        Command::Decompose { file, mode, out } => {
            let result = commands::decompose(&load::load(&file, limits)?, mode)?;
            emit(&result, out.as_ref())
        }
        Command::Sample { file, n, seed } => commands::sample(&Source::read(&file)?, n, seed),
        Command::App { which, file, out } => {
            let result = commands::app(&load::load(&file, limits)?, which)?;
            emit(&result, out.as_ref())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(failure) => {
            eprintln!("mdx: {failure}");
            ExitCode::from(failure.code as u8)
        }
    }
}
