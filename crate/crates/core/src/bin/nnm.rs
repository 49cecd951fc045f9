use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use nnm_core::experiment::{exit_code, run_experiment, Example, RunConfig};
use nnm_core::MethodKind;

const EXIT_USAGE: u8 = 64;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MethodArg {
    Standard,
    Mixed,
    New,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ExampleArg {
    #[value(name = "1")]
    One,
    #[value(name = "2")]
    Two,
    Custom,
}

/// Neumann-Neumann iterations on the four-subdomain square.
#[derive(Debug, Parser)]
#[command(name = "nnm", version)]
struct Cli {
    #[arg(long, value_enum, default_value = "new")]
    method: MethodArg,

    #[arg(long, value_enum, default_value = "1")]
    example: ExampleArg,

    /// Relaxation parameter.
    #[arg(long, default_value_t = 0.25)]
    theta: f64,

    /// Mesh parameter: h = 1/n.
    #[arg(long, default_value_t = 100)]
    n: usize,

    #[arg(long, default_value_t = 50)]
    max_iter: usize,

    /// Relative error at which the iteration stops.
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,

    #[arg(long, default_value = "out")]
    out: PathBuf,

    /// Also write solution, error, psi and reference fields.
    #[arg(long)]
    emit_fields: bool,

    /// Source term for --example custom (x,y,value CSV).
    #[arg(long)]
    f_file: Option<PathBuf>,

    /// Outer boundary data for --example custom; zero when omitted.
    #[arg(long)]
    g_file: Option<PathBuf>,
}

fn config(cli: Cli) -> Result<RunConfig, String> {
    let example = match cli.example {
        ExampleArg::One | ExampleArg::Two if cli.f_file.is_some() || cli.g_file.is_some() => {
            return Err("--f-file/--g-file require --example custom".into());
        }
        ExampleArg::One => Example::One,
        ExampleArg::Two => Example::Two,
        ExampleArg::Custom => Example::Custom {
            f_file: cli.f_file.ok_or("--example custom requires --f-file")?,
            g_file: cli.g_file,
        },
    };
    let method = match cli.method {
        MethodArg::Standard => MethodKind::Standard,
        MethodArg::Mixed => MethodKind::Mixed,
        MethodArg::New => MethodKind::New,
    };
    let config = RunConfig {
        method,
        example,
        theta: cli.theta,
        n: cli.n,
        max_iter: cli.max_iter,
        tol: cli.tol,
        output_dir: cli.out,
        emit_fields: cli.emit_fields,
    };
    config.validate().map_err(|e| e.to_string())?;
    Ok(config)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let config = match config(cli) {
        Ok(c) => c,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    match run_experiment(&config, &mut std::io::stdout()) {
        Ok(outcome) => ExitCode::from(exit_code(&outcome.history.status) as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
