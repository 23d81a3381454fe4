//! Command execution from fully resolved settings, shared by the direct
//! subcommands and `replay`.

use std::path::{Path, PathBuf};

use lscure::error_dist::{ErrorDistEstimate, Exclusions};
use lscure::io::{
    file_checksum, load_csv, write_band_csv, write_curves_csv, write_fhat_csv, write_json, write_table1_csv,
    write_table2_csv, BandwidthChoice, Command, CurvePoint, FitSettings, GridSpec, LoadOptions, RunManifest,
    SimulateSettings, MIN_FIT_ROWS,
};
use lscure::kernel::sample_sd;
use lscure::{
    bootstrap_f_band, default_bandwidth, CureError, ErrorDistribution, FittedCureModel, KernelSpec,
    MonteCarloReport, Result, SimulationConfig, SurvivalSample,
};
use serde::Serialize;

pub const MANIFEST_FILE: &str = "manifest.json";

/// A command failure together with the estimator it came from.
#[derive(Debug)]
pub struct Failure {
    pub context: String,
    pub error: CureError,
    pub diagnostics: Option<String>,
}

impl Failure {
    fn new(context: impl Into<String>, error: CureError) -> Self {
        Self {
            context: context.into(),
            error,
            diagnostics: None,
        }
    }

    pub fn exit_code(&self) -> i32 {
        if self.error.is_estimation_failure() {
            3
        } else {
            2
        }
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

trait Context<T> {
    fn context(self, what: &str) -> Outcome<T>;
}

impl<T> Context<T> for Result<T> {
    fn context(self, what: &str) -> Outcome<T> {
        self.map_err(|e| Failure::new(what, e))
    }
}

pub fn run(command: &Command, out_dir: &Path) -> Outcome<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir)
        .map_err(CureError::from)
        .context("creating output directory")?;
    let mut written = match command {
        Command::Fit(settings) => fit(settings, out_dir)?,
        Command::Bootstrap { fit, bootstrap } => run_bootstrap(fit, bootstrap, out_dir)?,
        Command::Simulate(settings) => simulate(settings, out_dir)?,
    };
    let manifest = out_dir.join(MANIFEST_FILE);
    write_json(&manifest, &RunManifest::new(command.clone())).context("writing manifest")?;
    written.push(manifest);
    Ok(written)
}

struct Fitted {
    model: FittedCureModel,
    bandwidth: f64,
    sigma_x: f64,
}

fn load_and_fit(settings: &FitSettings) -> Outcome<Fitted> {
    let input = &settings.input;
    let checksum = file_checksum(&input.path).context("reading input")?;
    if checksum != input.sha256 {
        return Err(Failure::new(
            "reading input",
            CureError::InvalidInput(format!(
                "{} changed since the manifest was written (sha256 {checksum}, expected {})",
                input.path.display(),
                input.sha256
            )),
        ));
    }
    let data = load_csv(
        &input.path,
        LoadOptions {
            has_header: input.has_header,
            log_transform_z: input.log_transform,
        },
    )
    .context("reading input")?;
    if data.rows.len() < MIN_FIT_ROWS {
        return Err(Failure::new(
            "reading input",
            CureError::InvalidInput(format!(
                "{} has {} rows, fitting needs at least {MIN_FIT_ROWS}",
                input.path.display(),
                data.rows.len()
            )),
        ));
    }
    let sample = SurvivalSample::new(data.rows, settings.ties).context("building the sample")?;
    let sigma_x = sample_sd(&sample.covariates());
    let bandwidth = match settings.bandwidth {
        BandwidthChoice::Explicit { value } => value,
        BandwidthChoice::Rule { c, gamma } => {
            default_bandwidth(&lscure::BandwidthRule::new(c, gamma), sample.len(), sigma_x)
        }
    };
    let spec = KernelSpec::new(settings.kernel, bandwidth).context("bandwidth")?;
    let model = FittedCureModel::fit(sample, spec, settings.score).context("Beran estimator")?;
    Ok(Fitted {
        model,
        bandwidth,
        sigma_x,
    })
}

/// Counts of failed local fits at the sample covariates and on the curve grid.
#[derive(Debug, Clone, Copy, Default, Serialize)]
struct LocalDiagnostics {
    sample: Exclusions,
    curve_points: usize,
    curve_empty_window: usize,
    curve_no_local_events: usize,
    curve_degenerate_scale: usize,
}

impl LocalDiagnostics {
    fn describe(&self) -> String {
        format!(
            "at sample covariates: empty_window {}, no_local_events {}, degenerate_scale {}; on the {}-point curve grid: empty_window {}, no_local_events {}, degenerate_scale {}",
            self.sample.empty_window,
            self.sample.no_local_events,
            self.sample.degenerate_scale,
            self.curve_points,
            self.curve_empty_window,
            self.curve_no_local_events,
            self.curve_degenerate_scale
        )
    }
}

fn classify(fit: &Result<lscure::LocalFit>, counts: [&mut usize; 3]) {
    let [empty, no_events, degenerate] = counts;
    match fit {
        Err(_) => *empty += 1,
        Ok(f) if f.m().is_err() => *no_events += 1,
        Ok(f) if f.s().is_err() => *degenerate += 1,
        Ok(_) => {}
    }
}

fn curve_grid(model: &FittedCureModel, steps: usize) -> Vec<f64> {
    let xs = model.sample().covariates();
    let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if steps == 0 {
        return Vec::new();
    }
    if steps == 1 || hi == lo {
        return vec![lo];
    }
    (0..steps)
        .map(|i| if i + 1 == steps { hi } else { lo + (hi - lo) * i as f64 / (steps - 1) as f64 })
        .collect()
}

fn curves(model: &FittedCureModel, steps: usize) -> (Vec<CurvePoint>, LocalDiagnostics) {
    let mut diag = LocalDiagnostics::default();
    for fit in model.sample_fits() {
        let s = &mut diag.sample;
        classify(fit, [&mut s.empty_window, &mut s.no_local_events, &mut s.degenerate_scale]);
    }
    let grid = curve_grid(model, steps);
    diag.curve_points = grid.len();
    let points = grid
        .into_iter()
        .map(|x| {
            let fit = model.local_fit(x);
            classify(
                &fit,
                [
                    &mut diag.curve_empty_window,
                    &mut diag.curve_no_local_events,
                    &mut diag.curve_degenerate_scale,
                ],
            );
            let fit = fit.ok();
            CurvePoint {
                x,
                pi_hat: fit.as_ref().map(|f| f.pi()),
                m_hat: fit.as_ref().and_then(|f| f.m().ok()),
                s_hat: fit.as_ref().and_then(|f| f.s().ok()),
            }
        })
        .collect();
    (points, diag)
}

fn resolve_range(dist: &ErrorDistribution, grid: &GridSpec) -> (f64, f64) {
    let (lo, hi) = dist.default_range();
    (grid.t_lo.unwrap_or(lo), grid.t_hi.unwrap_or(hi))
}

fn estimate_grid(model: &FittedCureModel, grid: &GridSpec, diag: &LocalDiagnostics) -> Outcome<ErrorDistEstimate> {
    let with_diagnostics = |e: CureError| Failure {
        context: "error distribution estimator F_hat".into(),
        error: e,
        diagnostics: Some(diag.describe()),
    };
    let dist = ErrorDistribution::new(model).map_err(with_diagnostics)?;
    let (lo, hi) = resolve_range(&dist, grid);
    dist.grid(lo, hi, grid.steps).map_err(with_diagnostics)
}

#[derive(Serialize)]
struct FitReport<'a> {
    schema: u32,
    tool: &'a str,
    version: &'a str,
    n: usize,
    censored_fraction: f64,
    jittered_ties: usize,
    sigma_x: f64,
    bandwidth: f64,
    bandwidth_choice: BandwidthChoice,
    kernel: lscure::KernelFamily,
    score: lscure::ScoreFunction,
    score_mass: f64,
    tau0: f64,
    grid: GridReport,
    included: usize,
    exclusions: Exclusions,
    clamped: usize,
    warning: Option<String>,
    local_diagnostics: LocalDiagnostics,
}

#[derive(Serialize)]
struct GridReport {
    t_lo: f64,
    t_hi: f64,
    steps: usize,
}

fn fit(settings: &FitSettings, out_dir: &Path) -> Outcome<Vec<PathBuf>> {
    let fitted = load_and_fit(settings)?;
    let model = &fitted.model;
    let (curve, diag) = curves(model, settings.curve_steps);
    let est = estimate_grid(model, &settings.grid, &diag)?;
    let report = FitReport {
        schema: lscure::io::SCHEMA_VERSION,
        tool: lscure::io::TOOL_NAME,
        version: lscure::io::TOOL_VERSION,
        n: model.sample().len(),
        censored_fraction: model.sample().censored_fraction(),
        jittered_ties: model.sample().jittered(),
        sigma_x: fitted.sigma_x,
        bandwidth: fitted.bandwidth,
        bandwidth_choice: settings.bandwidth,
        kernel: settings.kernel,
        score: settings.score,
        score_mass: settings.score.total_mass(),
        tau0: model.tau0(),
        grid: GridReport {
            t_lo: est.grid[0],
            t_hi: *est.grid.last().unwrap(),
            steps: est.grid.len(),
        },
        included: est.included,
        exclusions: est.exclusions,
        clamped: est.clamped,
        warning: est.warning.clone(),
        local_diagnostics: diag,
    };
    let paths = [out_dir.join("fit.json"), out_dir.join("curves.csv"), out_dir.join("fhat.csv")];
    write_json(&paths[0], &report).context("writing fit.json")?;
    write_curves_csv(&paths[1], &curve).context("writing curves.csv")?;
    write_fhat_csv(&paths[2], &est).context("writing fhat.csv")?;
    Ok(paths.to_vec())
}

fn run_bootstrap(
    settings: &FitSettings,
    config: &lscure::BootstrapConfig,
    out_dir: &Path,
) -> Outcome<Vec<PathBuf>> {
    config.validate().context("bootstrap configuration")?;
    let fitted = load_and_fit(settings)?;
    let model = &fitted.model;
    let (_, diag) = curves(model, 0);
    let dist = ErrorDistribution::new(model).map_err(|e| Failure {
        context: "error distribution estimator F_hat".into(),
        error: e,
        diagnostics: Some(diag.describe()),
    })?;
    let mut config = config.clone();
    config.range = Some(resolve_range(&dist, &settings.grid));
    config.grid_steps = settings.grid.steps;
    let band = bootstrap_f_band(model, &config).context("bootstrap")?;
    let paths = [out_dir.join("band.csv"), out_dir.join("band.json")];
    write_band_csv(&paths[0], &band).context("writing band.csv")?;
    write_json(&paths[1], &band).context("writing band.json")?;
    Ok(paths.to_vec())
}

fn simulate(settings: &SimulateSettings, out_dir: &Path) -> Outcome<Vec<PathBuf>> {
    let mut reports: Vec<MonteCarloReport> = Vec::new();
    for &n in &settings.sizes {
        for rule in &settings.rules {
            let config = SimulationConfig {
                n,
                runs: settings.runs,
                bandwidth: *rule,
                kernel: settings.kernel,
                score: settings.score,
                seed: settings.seed,
                eval_points: settings.eval_points.clone(),
                amise_grid: settings.amise_grid,
            };
            log::info!("simulating n = {n}, C = {}, gamma = {}", rule.c, rule.gamma);
            reports.push(lscure::run_monte_carlo(&config).context("Monte Carlo simulation")?);
        }
    }
    let paths = [out_dir.join("table1.csv"), out_dir.join("table2.csv"), out_dir.join("report.json")];
    write_table1_csv(&paths[0], &reports).context("writing table1.csv")?;
    write_table2_csv(&paths[1], &reports).context("writing table2.csv")?;
    write_json(&paths[2], &reports).context("writing report.json")?;
    Ok(paths.to_vec())
}
