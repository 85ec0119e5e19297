use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use jetconvex_cli::{
    cmd_build, cmd_check, cmd_eval, cmd_modulus, cmd_validate, parse_box, BuildOptions, ModulusRange, EXIT_ERROR,
};
use jetconvex_core::modulus::DEFAULT_NODES;
use jetconvex_core::verify::Sampler;
use jetconvex_core::{EvalMode, ExtensionConfig, Tolerances};

/// Convex C¹ extension of finite 1-jets.
#[derive(Parser)]
#[command(name = "jetconvex", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct TolArgs {
    /// Allowed negative slack, relative to data scale.
    #[arg(long, default_value_t = 0.0)]
    eps_c: f64,
    /// Slacks at or below this (times data scale) count as equalities.
    #[arg(long, default_value_t = 1e-9)]
    eps_p: f64,
    /// Gradient gaps at or above this (times data scale) count as distinct.
    #[arg(long, default_value_t = 1e-6)]
    eps_g: f64,
}

impl TolArgs {
    fn tolerances(&self) -> Tolerances {
        Tolerances {
            eps_c: self.eps_c,
            eps_p: self.eps_p,
            eps_g: self.eps_g,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Check extendability. Exit 0 valid, 2 violates (C), 3 violates (CW1).
    Validate {
        jet: PathBuf,
        #[command(flatten)]
        tol: TolArgs,
    },
    /// Build and save an extension model.
    Build {
        jet: PathBuf,
        /// Output model file.
        #[arg(short, long)]
        out: PathBuf,
        /// Domain box axis `lo:hi`, once per dimension.
        #[arg(long = "box", allow_hyphen_values = true)]
        domain_box: Vec<String>,
        #[arg(long, default_value_t = DEFAULT_NODES)]
        nodes: usize,
        #[arg(long)]
        tmax: Option<f64>,
        #[arg(long, default_value_t = 0)]
        enrichment: usize,
        #[arg(long, env = "JETCONVEX_SEED", default_value_t = 0)]
        seed: u64,
        /// Default evaluation mode stored in the model.
        #[arg(long, default_value = "shared")]
        mode: EvalMode,
        /// Column budget per refined query.
        #[arg(long, default_value_t = ExtensionConfig::default().max_columns)]
        max_columns: usize,
        /// Build even if validation fails; recorded in the model.
        #[arg(long)]
        force: bool,
        #[command(flatten)]
        tol: TolArgs,
    },
    /// Evaluate a model at the points of a CSV file.
    Eval {
        model: PathBuf,
        queries: PathBuf,
        #[arg(long, default_value = "shared")]
        mode: EvalMode,
        /// Append gradient columns.
        #[arg(long)]
        grad: bool,
    },
    /// Run property checks. Exit 4 when a gated check fails.
    Check {
        model: PathBuf,
        #[arg(long, default_value = "all")]
        suite: String,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, env = "JETCONVEX_SEED", default_value_t = 0)]
        seed: u64,
    },
    /// Tabulate the modulus of a model or jet file.
    Modulus {
        file: PathBuf,
        #[arg(long)]
        tmin: Option<f64>,
        #[arg(long)]
        tmax: Option<f64>,
        #[arg(long, default_value_t = 100)]
        steps: usize,
    },
}

fn run(cli: Cli) -> anyhow::Result<i32> {
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let code = match cli.command {
        Command::Validate { jet, tol } => cmd_validate(&jet, &tol.tolerances(), &mut out)?,
        Command::Build {
            jet,
            out: model_out,
            domain_box,
            nodes,
            tmax,
            enrichment,
            seed,
            mode,
            max_columns,
            force,
            tol,
        } => {
            let opts = BuildOptions {
                domain_box: if domain_box.is_empty() {
                    None
                } else {
                    Some(parse_box(&domain_box)?)
                },
                nodes,
                t_max: tmax,
                config: ExtensionConfig {
                    mode,
                    enrichment,
                    seed,
                    max_columns,
                    ..Default::default()
                },
                tolerances: tol.tolerances(),
                force,
            };
            cmd_build(&jet, &opts, &model_out, &mut std::io::stderr())?
        }
        Command::Eval {
            model,
            queries,
            mode,
            grad,
        } => cmd_eval(&model, &queries, mode, grad, &mut out)?,
        Command::Check {
            model,
            suite,
            samples,
            seed,
        } => cmd_check(&model, &suite, &Sampler::new(samples, seed), &mut out)?,
        Command::Modulus {
            file,
            tmin,
            tmax,
            steps,
        } => cmd_modulus(
            &file,
            &ModulusRange {
                t_min: tmin,
                t_max: tmax,
                steps,
            },
            &mut out,
        )?,
    };
    out.flush()?;
    Ok(code)
}

fn main() -> ExitCode {
    // usage errors exit 1 so that 2 and 3 stay reserved for validation
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_ERROR as u8 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR as u8)
        }
    }
}
