//! Model-based bootstrap for pointwise confidence intervals of the error
//! distribution estimate.
//!
//! Each replicate resamples covariates, draws standardized errors from the
//! estimated error distribution, cure indicators from the estimated cure
//! fraction and censoring times from the local censoring estimate, then
//! refits the whole pipeline with the original bandwidth.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cure::{FittedCureModel, LocalFit};
use crate::error::{CureError, Result};
use crate::error_dist::{ErrorDistribution, DEFAULT_GRID_STEPS};
use crate::rng::{stream, Purpose};
use crate::sample::{Observation, SurvivalSample, TiePolicy};
use crate::score::StepQuantile;

/// Total attempts allowed per requested replicate.
pub const MAX_ATTEMPTS_PER_REPLICATE: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub replicates: usize,
    pub level: f64,
    pub seed: u64,
    /// Reporting range; the estimate's default range when absent.
    #[serde(default)]
    pub range: Option<(f64, f64)>,
    pub grid_steps: usize,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            replicates: 300,
            level: 0.95,
            seed: 0,
            range: None,
            grid_steps: DEFAULT_GRID_STEPS,
        }
    }
}

impl BootstrapConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(CureError::InvalidInput("replicates must be at least 1".into()));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(CureError::InvalidInput(format!(
                "confidence level must lie in (0, 1), got {}",
                self.level
            )));
        }
        if self.grid_steps < 2 {
            return Err(CureError::InvalidInput("grid needs at least 2 steps".into()));
        }
        Ok(())
    }
}

/// Percentile band around the point estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceBand {
    pub grid: Vec<f64>,
    pub lower: Vec<f64>,
    pub point: Vec<f64>,
    pub upper: Vec<f64>,
    pub level: f64,
    pub replicates: usize,
    pub attempts: usize,
    /// Mean fraction of censored bootstrap responses over the kept replicates.
    pub bootstrap_censored_fraction: f64,
    pub sample_censored_fraction: f64,
}

#[derive(Debug, Clone)]
struct Source<'a> {
    fit: &'a LocalFit,
    quantile: &'a StepQuantile,
    m: f64,
    s: f64,
}

#[derive(Debug, Clone)]
struct Replicate {
    values: Vec<f64>,
    censored_fraction: f64,
}

/// Bootstrap world built from a fitted model.
struct World<'a> {
    model: &'a FittedCureModel,
    sources: Vec<Source<'a>>,
    report_grid: Vec<f64>,
    fallback_censoring: f64,
    seed: u64,
}

impl World<'_> {
    fn sample(&self, replicate: u64) -> Result<(SurvivalSample, f64)> {
        let mut rng = stream(self.seed, replicate, Purpose::BootstrapReplicate);
        let n = self.model.sample().len();
        let k = self.sources.len();
        let picks: Vec<&Source> = (0..n).map(|_| &self.sources[rng.random_range(0..k)]).collect();
        // F is the average of the local standardized laws, so a draw from a
        // uniformly chosen local law is a draw from F.
        let raw: Vec<f64> = (0..n)
            .map(|_| {
                let src = &self.sources[rng.random_range(0..k)];
                let u: f64 = rng.random();
                let y = src.quantile.at(u).unwrap_or(f64::NAN);
                (y - src.m) / src.s
            })
            .collect();
        let (loc, scale) = StepQuantile::empirical(&raw)
            .moments(self.model.score())
            .standardizing_constants()
            .ok_or(CureError::DegenerateScale {
                x0: f64::NAN,
                variance: 0.0,
            })?;
        let mut obs = Vec::with_capacity(n);
        let mut censored = 0;
        for (src, e) in picks.iter().zip(&raw) {
            let eps = (e - loc) / scale;
            let uncured = src.m + src.s * eps;
            let cured = rng.random::<f64>() < src.fit.pi();
            let response = if cured { f64::INFINITY } else { uncured };
            let u: f64 = rng.random();
            let c = src.fit.censoring_inverse(u).unwrap_or(self.fallback_censoring);
            let z = response.min(c);
            let delta = response <= c;
            if !delta {
                censored += 1;
            }
            obs.push(Observation::new(src.fit.x0(), z, delta));
        }
        let ties = TiePolicy::Jitter {
            seed: rng.random(),
        };
        let sample = SurvivalSample::new(obs, ties)?;
        Ok((sample, censored as f64 / n as f64))
    }

    fn replicate(&self, index: u64) -> Result<Replicate> {
        let (sample, censored_fraction) = self.sample(index)?;
        let refit = FittedCureModel::fit(sample, *self.model.kernel(), *self.model.score())?;
        let dist = ErrorDistribution::new(&refit)?;
        let grid = &self.report_grid;
        let mut running: f64 = 0.0;
        let values = grid
            .iter()
            .map(|&t| {
                running = running.max(dist.eval(t));
                running
            })
            .collect();
        Ok(Replicate {
            values,
            censored_fraction,
        })
    }
}

/// Linear-interpolation sample quantile of sorted data.
fn percentile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = p * (n - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn bootstrap_f_band(model: &FittedCureModel, config: &BootstrapConfig) -> Result<ConfidenceBand> {
    config.validate()?;
    let dist = ErrorDistribution::new(model)?;
    let (lo, hi) = config.range.unwrap_or_else(|| dist.default_range());
    let report = dist.grid(lo, hi, config.grid_steps)?;
    let sources: Vec<Source> = model
        .sample_fits()
        .iter()
        .flatten()
        .filter_map(|fit| {
            Some(Source {
                fit,
                quantile: fit.uncured_quantile().ok()?,
                m: fit.m().ok()?,
                s: fit.s().ok()?,
            })
        })
        .collect();
    let fallback_censoring = model
        .sample()
        .observations()
        .iter()
        .filter(|o| !o.delta)
        .map(|o| o.z)
        .fold(f64::INFINITY, |acc, z| if acc.is_finite() { acc.max(z) } else { z });
    let world = World {
        model,
        sources,
        report_grid: report.grid.clone(),
        fallback_censoring,
        seed: config.seed,
    };

    let wanted = config.replicates;
    let budget = MAX_ATTEMPTS_PER_REPLICATE * wanted;
    let mut kept: Vec<Replicate> = Vec::with_capacity(wanted);
    let mut attempts = 0;
    while kept.len() < wanted && attempts < budget {
        let batch = (wanted - kept.len()).min(budget - attempts);
        let results: Vec<Result<Replicate>> = (attempts..attempts + batch)
            .into_par_iter()
            .map(|r| world.replicate(r as u64))
            .collect();
        attempts += batch;
        kept.extend(results.into_iter().filter_map(|r| r.ok()));
    }
    if kept.len() < wanted {
        return Err(CureError::BootstrapUnstable {
            wanted,
            accepted: kept.len(),
            attempts,
        });
    }

    let alpha = 1.0 - config.level;
    let grid = report.grid;
    let mut lower = Vec::with_capacity(grid.len());
    let mut upper = Vec::with_capacity(grid.len());
    let mut column = vec![0.0; kept.len()];
    for i in 0..grid.len() {
        for (slot, rep) in column.iter_mut().zip(&kept) {
            *slot = rep.values[i];
        }
        column.sort_by(f64::total_cmp);
        lower.push(percentile(&column, alpha / 2.0).clamp(0.0, 1.0));
        upper.push(percentile(&column, 1.0 - alpha / 2.0).clamp(0.0, 1.0));
    }
    let bootstrap_censored_fraction =
        kept.iter().map(|r| r.censored_fraction).sum::<f64>() / kept.len() as f64;
    Ok(ConfidenceBand {
        grid,
        lower,
        point: report.values,
        upper,
        level: config.level,
        replicates: kept.len(),
        attempts,
        bootstrap_censored_fraction,
        sample_censored_fraction: model.sample().censored_fraction(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percentile_interpolates() {
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(percentile(&xs, 0.0), 1.0);
        assert_eq!(percentile(&xs, 1.0), 5.0);
        assert_eq!(percentile(&xs, 0.5), 3.0);
        assert!((percentile(&xs, 0.125) - 1.5).abs() < 1e-15);
        assert_eq!(percentile(&[0.4], 0.975), 0.4);
    }

    #[test]
    fn config_validation() {
        let mut c = BootstrapConfig::default();
        assert!(c.validate().is_ok());
        c.level = 1.5;
        assert!(c.validate().is_err());
        c.level = 0.9;
        c.replicates = 0;
        assert!(c.validate().is_err());
    }
}
