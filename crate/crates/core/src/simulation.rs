//! The simulation design: a known location-scale cure model, its data
//! generator and the Monte Carlo harness producing n-scaled (integrated)
//! mean squared errors of the error distribution estimator.

use std::sync::OnceLock;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::cure::FittedCureModel;
use crate::error::{CureError, Result};
use crate::error_dist::{uniform_grid, ErrorDistribution};
use crate::kernel::{sample_sd, BandwidthRule, KernelFamily, KernelSpec};
use crate::rng::{stream, Purpose, Stream};
use crate::sample::{Observation, SurvivalSample, TiePolicy};
use crate::score::ScoreFunction;

/// Upper truncation point of the standard normal error law.
pub const ERROR_TRUNCATION: f64 = 2.0;
/// Location of the logistic cure curve.
pub const CURE_CENTER: f64 = 1.75;
/// Mean and variance of the far censoring component.
pub const FAR_CENSORING_MEAN: f64 = 10.0;
pub const FAR_CENSORING_VARIANCE: f64 = 0.5;
/// Upward shift of the near censoring component's location.
pub const NEAR_CENSORING_SHIFT: f64 = 0.5;

fn standard_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

/// Standard normal truncated above at 2, affinely standardized so that its
/// quantile function has `int xi J = 0` and `int xi^2 J = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncatedNormalLaw {
    /// Location of the truncated normal in the J-weighted sense.
    pub loc: f64,
    /// Scale of the truncated normal in the J-weighted sense.
    pub scale: f64,
    /// `Phi(2)`.
    pub upper_mass: f64,
}

impl TruncatedNormalLaw {
    pub fn new(score: &ScoreFunction) -> Self {
        let normal = standard_normal();
        let upper_mass = normal.cdf(ERROR_TRUNCATION);
        let raw_quantile = |p: f64| normal.inverse_cdf(p * upper_mass);
        let (first, second) = score_weighted_moments(raw_quantile, score);
        let mass = score.total_mass();
        let loc = first / mass;
        let scale = (second - first * loc).sqrt();
        Self {
            loc,
            scale,
            upper_mass,
        }
    }

    /// The law standardized under the default score function.
    pub fn standard() -> &'static Self {
        static LAW: OnceLock<TruncatedNormalLaw> = OnceLock::new();
        LAW.get_or_init(|| TruncatedNormalLaw::new(&ScoreFunction::default()))
    }

    /// Upper support point `tau_F`.
    pub fn upper_support(&self) -> f64 {
        (ERROR_TRUNCATION - self.loc) / self.scale
    }

    pub fn cdf(&self, t: f64) -> f64 {
        let w = self.loc + self.scale * t;
        if w >= ERROR_TRUNCATION {
            1.0
        } else {
            (standard_normal().cdf(w) / self.upper_mass).clamp(0.0, 1.0)
        }
    }

    pub fn quantile(&self, p: f64) -> f64 {
        let w = standard_normal().inverse_cdf(p * self.upper_mass);
        (w.min(ERROR_TRUNCATION) - self.loc) / self.scale
    }

    /// Inverse transform draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        // open interval keeps the quantile finite
        let u = u.max(f64::MIN_POSITIVE);
        self.quantile(u)
    }
}

/// `(int xi J, int xi^2 J)` by composite Simpson on a mesh graded towards
/// the score threshold, where `J` changes fastest.
fn score_weighted_moments(quantile: impl Fn(f64) -> f64, score: &ScoreFunction) -> (f64, f64) {
    let start = score.threshold.max(1e-12);
    let mut breaks = vec![start];
    let mut edge = start;
    for b in [2e-4, 5e-4, 1e-3, 3e-3, 1e-2, 3e-2, 0.1, 0.3, 0.7, 0.9, 0.99, 1.0] {
        if b > edge {
            breaks.push(b);
            edge = b;
        }
    }
    let panels = 4000;
    let mut first = 0.0;
    let mut second = 0.0;
    for seg in breaks.windows(2) {
        let (lo, hi) = (seg[0], seg[1]);
        let h = (hi - lo) / panels as f64;
        for i in 0..=panels {
            // open at the threshold, where J is discontinuous
            let p = if i == 0 { lo + h * 1e-9 } else { lo + i as f64 * h };
            let w = if i == 0 || i == panels {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            let xi = quantile(p);
            let j = score.density(p);
            first += w * xi * j * h / 3.0;
            second += w * xi * xi * j * h / 3.0;
        }
    }
    (first, second)
}

/// The data-generating model: location, scale, cure curve, errors and the
/// two-component censoring mixture.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrueModel {
    pub errors: TruncatedNormalLaw,
}

impl Default for TrueModel {
    fn default() -> Self {
        Self {
            errors: *TruncatedNormalLaw::standard(),
        }
    }
}

impl TrueModel {
    pub fn with_score(score: &ScoreFunction) -> Self {
        if *score == ScoreFunction::default() {
            Self::default()
        } else {
            Self {
                errors: TruncatedNormalLaw::new(score),
            }
        }
    }

    pub fn m(&self, x: f64) -> f64 {
        use std::f64::consts::PI;
        1.0 + 2.0 * x + 1.25 * (PI * x * x).cos()
    }

    pub fn s(&self, x: f64) -> f64 {
        use std::f64::consts::PI;
        1.0 + 0.5 * (PI * x).cos()
    }

    pub fn pi(&self, x: f64) -> f64 {
        1.0 / (1.0 + (-(x - CURE_CENTER)).exp())
    }

    /// Error distribution function `F`.
    pub fn error_cdf(&self, t: f64) -> f64 {
        self.errors.cdf(t)
    }

    /// One observation with its hidden truth.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> SimulatedObservation {
        let x = -1.0 + 2.0 * rng.random::<f64>();
        let eps = self.errors.sample(rng);
        let uncured = self.m(x) + self.s(x) * eps;
        let cured = rng.random::<f64>() < self.pi(x);
        let far = rng.random::<f64>() < 0.5;
        let eta: f64 = rng.sample(StandardNormal);
        let censoring = if far {
            FAR_CENSORING_MEAN + FAR_CENSORING_VARIANCE.sqrt() * eta
        } else {
            self.m(x) + NEAR_CENSORING_SHIFT + self.s(x) * eta
        };
        let response = if cured { f64::INFINITY } else { uncured };
        let delta = response <= censoring;
        SimulatedObservation {
            observation: Observation::new(x, response.min(censoring), delta),
            cured,
            uncured_response: uncured,
            censoring,
        }
    }
}

/// The standardized error law `(cdf, sampler)` of the simulation design.
pub fn true_error_distribution() -> TruncatedNormalLaw {
    *TruncatedNormalLaw::standard()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulatedObservation {
    pub observation: Observation,
    pub cured: bool,
    pub uncured_response: f64,
    pub censoring: f64,
}

/// A generated sample and the truth behind it.
#[derive(Debug, Clone)]
pub struct SimulatedDataset {
    pub sample: SurvivalSample,
    pub cured: Vec<bool>,
    pub uncured_response: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmiseGrid {
    pub t_lo: f64,
    pub t_hi: f64,
    pub steps: usize,
}

impl Default for AmiseGrid {
    fn default() -> Self {
        Self {
            t_lo: -2.5,
            t_hi: 2.0,
            steps: 91,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub n: usize,
    pub runs: usize,
    pub bandwidth: BandwidthRule,
    #[serde(default)]
    pub kernel: KernelFamily,
    #[serde(default)]
    pub score: ScoreFunction,
    pub seed: u64,
    pub eval_points: Vec<f64>,
    pub amise_grid: AmiseGrid,
}

impl SimulationConfig {
    pub fn new(n: usize, runs: usize, c: f64, gamma: f64, seed: u64) -> Self {
        Self {
            n,
            runs,
            bandwidth: BandwidthRule::new(c, gamma),
            kernel: KernelFamily::default(),
            score: ScoreFunction::default(),
            seed,
            eval_points: vec![-2.0, -1.0, 0.0, 1.0, 2.0],
            amise_grid: AmiseGrid::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 10 {
            return Err(CureError::InvalidInput(format!("n must be at least 10, got {}", self.n)));
        }
        if self.runs == 0 {
            return Err(CureError::InvalidInput("runs must be at least 1".into()));
        }
        if !(self.bandwidth.c > 0.0) {
            return Err(CureError::InvalidInput("bandwidth constant must be positive".into()));
        }
        self.score.validate()?;
        let tau_f = TrueModel::with_score(&self.score).errors.upper_support();
        if let Some(t) = self.eval_points.iter().find(|&&t| !(t <= tau_f)) {
            return Err(CureError::InvalidInput(format!(
                "evaluation point {t} lies beyond the error support bound {tau_f}"
            )));
        }
        uniform_grid(self.amise_grid.t_lo, self.amise_grid.t_hi, self.amise_grid.steps)?;
        Ok(())
    }
}

/// Dataset `run_index` of the configuration.
pub fn generate_dataset(config: &SimulationConfig, run_index: u64) -> Result<SimulatedDataset> {
    let model = TrueModel::with_score(&config.score);
    let mut rng = stream(config.seed, run_index, Purpose::Dataset);
    let draws = draw_many(&model, config.n, &mut rng);
    let sample = SurvivalSample::new(
        draws.iter().map(|d| d.observation).collect(),
        TiePolicy::Jitter {
            seed: config.seed ^ run_index.rotate_left(32),
        },
    )?;
    Ok(SimulatedDataset {
        sample,
        cured: draws.iter().map(|d| d.cured).collect(),
        uncured_response: draws.iter().map(|d| d.uncured_response).collect(),
    })
}

pub fn draw_many(model: &TrueModel, n: usize, rng: &mut Stream) -> Vec<SimulatedObservation> {
    (0..n).map(|_| model.draw(rng)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointMetric {
    pub t: f64,
    pub true_f: f64,
    /// `n * mean (F_hat(t) - F(t))^2`.
    pub amse: f64,
    /// `mean F_hat(t) - F(t)`.
    pub bias: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloReport {
    pub schema: u32,
    pub config: SimulationConfig,
    /// Bandwidth of run 0, for reference.
    pub first_bandwidth: f64,
    pub amse: Vec<PointMetric>,
    pub amise: f64,
    pub succeeded: usize,
    pub failures: usize,
    /// Covariates excluded from the average, summed over successful runs.
    pub excluded_covariates: usize,
}

impl MonteCarloReport {
    pub fn amse_at(&self, t: f64) -> Option<f64> {
        self.amse.iter().find(|p| p.t == t).map(|p| p.amse)
    }
}

#[derive(Debug, Clone)]
struct RunOutcome {
    bandwidth: f64,
    at_points: Vec<f64>,
    on_grid: Vec<f64>,
    excluded: usize,
}

fn single_run(config: &SimulationConfig, grid: &[f64], run: u64) -> Result<RunOutcome> {
    let data = generate_dataset(config, run)?;
    let sigma = sample_sd(&data.sample.covariates());
    let bandwidth = config.bandwidth.bandwidth(config.n, sigma);
    let spec = KernelSpec::new(config.kernel, bandwidth)?;
    let model = FittedCureModel::fit(data.sample, spec, config.score)?;
    let dist = ErrorDistribution::new(&model)?;
    Ok(RunOutcome {
        bandwidth,
        at_points: config.eval_points.iter().map(|&t| dist.eval(t)).collect(),
        on_grid: grid.iter().map(|&t| dist.eval(t)).collect(),
        excluded: dist.exclusions().total(),
    })
}

pub fn run_monte_carlo(config: &SimulationConfig) -> Result<MonteCarloReport> {
    config.validate()?;
    let truth = TrueModel::with_score(&config.score);
    let grid = uniform_grid(config.amise_grid.t_lo, config.amise_grid.t_hi, config.amise_grid.steps)?;
    let outcomes: Vec<Result<RunOutcome>> = (0..config.runs as u64)
        .into_par_iter()
        .map(|run| single_run(config, &grid, run))
        .collect();

    let k = config.eval_points.len();
    let mut sq_points = vec![0.0; k];
    let mut err_points = vec![0.0; k];
    let mut sq_grid = vec![0.0; grid.len()];
    let mut succeeded = 0;
    let mut excluded = 0;
    let mut first_bandwidth = f64::NAN;
    let true_points: Vec<f64> = config.eval_points.iter().map(|&t| truth.error_cdf(t)).collect();
    let true_grid: Vec<f64> = grid.iter().map(|&t| truth.error_cdf(t)).collect();
    for (run, outcome) in outcomes.iter().enumerate() {
        let Ok(out) = outcome else {
            log::debug!("run {run} failed: {}", outcome.as_ref().unwrap_err());
            continue;
        };
        if succeeded == 0 {
            first_bandwidth = out.bandwidth;
        }
        succeeded += 1;
        excluded += out.excluded;
        for i in 0..k {
            let e = out.at_points[i] - true_points[i];
            sq_points[i] += e * e;
            err_points[i] += e;
        }
        for (acc, (&f, &t)) in sq_grid.iter_mut().zip(out.on_grid.iter().zip(&true_grid)) {
            *acc += (f - t) * (f - t);
        }
    }
    if succeeded == 0 {
        return Err(CureError::AllRunsFailed { runs: config.runs });
    }
    let n = config.n as f64;
    let runs = succeeded as f64;
    let amse = (0..k)
        .map(|i| PointMetric {
            t: config.eval_points[i],
            true_f: true_points[i],
            amse: n * (sq_points[i] / runs),
            bias: err_points[i] / runs,
        })
        .collect();
    let mse_grid: Vec<f64> = sq_grid.iter().map(|s| s / runs).collect();
    let amise = n * trapezoid(&grid, &mse_grid);
    Ok(MonteCarloReport {
        schema: 1,
        config: config.clone(),
        first_bandwidth,
        amse,
        amise,
        succeeded,
        failures: config.runs - succeeded,
        excluded_covariates: excluded,
    })
}

fn trapezoid(xs: &[f64], ys: &[f64]) -> f64 {
    xs.windows(2)
        .zip(ys.windows(2))
        .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
        .sum()
}
