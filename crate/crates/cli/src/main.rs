//! `lscure`: fit, bootstrap and simulate the location-scale mixture cure model.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lscure::error_dist::DEFAULT_GRID_STEPS;
use lscure::io::{
    file_checksum, read_json, sniff_header, BandwidthChoice, Command, FitSettings, GridSpec, InputRecord,
    RunManifest, SimulateSettings, SCHEMA_VERSION,
};
use lscure::score::{DEFAULT_SCALE, DEFAULT_THRESHOLD};
use lscure::simulation::AmiseGrid;
use lscure::{BandwidthRule, BootstrapConfig, CureError, KernelFamily, ScoreForm, ScoreFunction, TiePolicy};

use commands::Failure;

#[derive(Parser)]
#[command(name = "lscure", version, about = "Nonparametric location-scale mixture cure model")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Fit the model to a CSV of (x, z, delta) rows.
    Fit {
        #[command(flatten)]
        fit: FitArgs,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// Percentile bootstrap band for the error distribution.
    Bootstrap {
        #[command(flatten)]
        fit: FitArgs,
        #[arg(long, default_value_t = 300)]
        replicates: usize,
        #[arg(long, default_value_t = 0.95)]
        level: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// Monte Carlo study on the simulation design.
    Simulate(SimulateArgs),
    /// Re-run the command recorded in a manifest.
    Replay {
        manifest: PathBuf,
        /// Defaults to the manifest's directory.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    score_threshold: f64,
    #[arg(long, default_value_t = DEFAULT_SCALE)]
    score_scale: f64,
    /// Use J = 1 above the threshold instead of the logistic step.
    #[arg(long)]
    uniform_score: bool,
    /// Rescale J to integrate to exactly 1.
    #[arg(long)]
    normalize_score: bool,
}

impl ScoreArgs {
    fn resolve(&self) -> Result<ScoreFunction, CureError> {
        let form = if self.uniform_score {
            ScoreForm::Uniform
        } else {
            ScoreForm::LogisticStep
        };
        ScoreFunction::new(form, self.score_threshold, self.score_scale, self.normalize_score)
    }
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    input: PathBuf,
    /// First row is a header (detected when neither flag is given).
    #[arg(long, conflicts_with = "no_header")]
    header: bool,
    #[arg(long)]
    no_header: bool,
    /// Replace z by ln(z).
    #[arg(long)]
    log_transform: bool,
    /// Fixed bandwidth in covariate units.
    #[arg(long, conflicts_with_all = ["c", "gamma"])]
    bandwidth: Option<f64>,
    /// Bandwidth rule a = C sd(x) n^(-1/4-gamma) ln(n)^(1/4+gamma).
    #[arg(long, default_value_t = 1.125)]
    c: f64,
    #[arg(long, default_value_t = 1.0 / 28.0)]
    gamma: f64,
    #[arg(long, default_value = "biweight")]
    kernel: KernelFamily,
    #[command(flatten)]
    score: ScoreArgs,
    /// Refuse tied times instead of jittering them.
    #[arg(long)]
    strict_ties: bool,
    #[arg(long, default_value_t = 0)]
    tie_seed: u64,
    #[arg(long, allow_negative_numbers = true)]
    grid_lo: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    grid_hi: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_GRID_STEPS)]
    grid_steps: usize,
    /// Points of the covariate grid in curves.csv.
    #[arg(long, default_value_t = 101)]
    curve_steps: usize,
}

impl FitArgs {
    fn resolve(&self) -> Result<FitSettings, CureError> {
        let path = std::fs::canonicalize(&self.input)
            .map_err(|e| CureError::Io(format!("{}: {e}", self.input.display())))?;
        let has_header = if self.header {
            true
        } else if self.no_header {
            false
        } else {
            sniff_header(&path)?
        };
        let bandwidth = match self.bandwidth {
            Some(value) if value > 0.0 && value.is_finite() => BandwidthChoice::Explicit { value },
            Some(value) => {
                return Err(CureError::InvalidInput(format!("bandwidth must be positive, got {value}")))
            }
            None if self.c > 0.0 && self.c.is_finite() && self.gamma.is_finite() => BandwidthChoice::Rule {
                c: self.c,
                gamma: self.gamma,
            },
            None => return Err(CureError::InvalidInput("--c must be positive".into())),
        };
        if self.grid_steps < 2 {
            return Err(CureError::InvalidInput("--grid-steps must be at least 2".into()));
        }
        if let (Some(lo), Some(hi)) = (self.grid_lo, self.grid_hi) {
            if !(lo < hi) {
                return Err(CureError::InvalidInput(format!("empty grid [{lo}, {hi}]")));
            }
        }
        Ok(FitSettings {
            input: InputRecord {
                sha256: file_checksum(&path)?,
                path,
                has_header,
                log_transform: self.log_transform,
            },
            kernel: self.kernel,
            bandwidth,
            score: self.score.resolve()?,
            ties: if self.strict_ties {
                TiePolicy::Strict
            } else {
                TiePolicy::Jitter { seed: self.tie_seed }
            },
            grid: GridSpec {
                t_lo: self.grid_lo,
                t_hi: self.grid_hi,
                steps: self.grid_steps,
            },
            curve_steps: self.curve_steps,
        })
    }
}

#[derive(Args)]
struct SimulateArgs {
    /// Sample sizes; repeat for several.
    #[arg(long = "n", default_values_t = [100])]
    sizes: Vec<usize>,
    #[arg(long, default_value_t = 1000)]
    runs: usize,
    /// Bandwidth constants, paired with --gamma by position.
    #[arg(long, default_values_t = [0.75])]
    c: Vec<f64>,
    #[arg(long, default_values_t = [0.0625])]
    gamma: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "biweight")]
    kernel: KernelFamily,
    #[command(flatten)]
    score: ScoreArgs,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, default_values_t = [-2.0, -1.0, 0.0, 1.0, 2.0])]
    eval_points: Vec<f64>,
    #[arg(long, allow_negative_numbers = true, default_value_t = -2.5)]
    amise_lo: f64,
    #[arg(long, allow_negative_numbers = true, default_value_t = 2.0)]
    amise_hi: f64,
    #[arg(long, default_value_t = 91)]
    amise_steps: usize,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

impl SimulateArgs {
    fn resolve(&self) -> Result<SimulateSettings, CureError> {
        if self.c.len() != self.gamma.len() {
            return Err(CureError::InvalidInput(format!(
                "{} values of --c but {} of --gamma; they are paired by position",
                self.c.len(),
                self.gamma.len()
            )));
        }
        let settings = SimulateSettings {
            sizes: self.sizes.clone(),
            rules: self.c.iter().zip(&self.gamma).map(|(&c, &g)| BandwidthRule::new(c, g)).collect(),
            runs: self.runs,
            seed: self.seed,
            kernel: self.kernel,
            score: self.score.resolve()?,
            eval_points: self.eval_points.clone(),
            amise_grid: AmiseGrid {
                t_lo: self.amise_lo,
                t_hi: self.amise_hi,
                steps: self.amise_steps,
            },
        };
        for &n in &settings.sizes {
            for rule in &settings.rules {
                lscure::SimulationConfig {
                    n,
                    runs: settings.runs,
                    bandwidth: *rule,
                    kernel: settings.kernel,
                    score: settings.score,
                    seed: settings.seed,
                    eval_points: settings.eval_points.clone(),
                    amise_grid: settings.amise_grid,
                }
                .validate()?;
            }
        }
        Ok(settings)
    }
}

fn usage(error: CureError) -> Failure {
    Failure {
        context: "invalid arguments".into(),
        error,
        diagnostics: None,
    }
}

fn execute(cli: Cli) -> Result<Vec<PathBuf>, Failure> {
    let (command, out_dir) = match cli.command {
        Cmd::Fit { fit, out_dir } => (Command::Fit(fit.resolve().map_err(usage)?), out_dir),
        Cmd::Bootstrap {
            fit,
            replicates,
            level,
            seed,
            out_dir,
        } => {
            let bootstrap = BootstrapConfig {
                replicates,
                level,
                seed,
                range: None,
                grid_steps: fit.grid_steps,
            };
            bootstrap.validate().map_err(usage)?;
            let fit = fit.resolve().map_err(usage)?;
            (Command::Bootstrap { fit, bootstrap }, out_dir)
        }
        Cmd::Simulate(args) => (Command::Simulate(args.resolve().map_err(usage)?), args.out_dir),
        Cmd::Replay { manifest, out_dir } => {
            let recorded: RunManifest = read_json(&manifest).map_err(usage)?;
            if recorded.schema != SCHEMA_VERSION {
                return Err(usage(CureError::InvalidInput(format!(
                    "manifest schema {} is not supported (expected {SCHEMA_VERSION})",
                    recorded.schema
                ))));
            }
            let dir = out_dir.unwrap_or_else(|| {
                manifest
                    .parent()
                    .map(|p| p.to_path_buf())
                    .unwrap_or_else(|| PathBuf::from("."))
            });
            (recorded.command, dir)
        }
    };
    commands::run(&command, &out_dir)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(paths) => {
            for p in paths {
                println!("wrote {}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(failure) => {
            eprintln!("error: {}: {}", failure.context, failure.error);
            if let Some(d) = &failure.diagnostics {
                eprintln!("  {d}");
            }
            ExitCode::from(failure.exit_code() as u8)
        }
    }
}
