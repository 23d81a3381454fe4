//! The averaged estimator of the standardized error distribution.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::cure::{FittedCureModel, LocalFit};
use crate::error::{CureError, Result};

pub const DEFAULT_GRID_STEPS: usize = 512;

/// A warning is attached when more than this fraction of covariates is excluded.
pub const EXCLUSION_WARNING_FRACTION: f64 = 0.10;

/// Why sample covariates were left out of the average.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exclusions {
    pub empty_window: usize,
    pub no_local_events: usize,
    pub degenerate_scale: usize,
}

impl Exclusions {
    pub fn total(&self) -> usize {
        self.empty_window + self.no_local_events + self.degenerate_scale
    }

    fn record(&mut self, err: &CureError) {
        match err {
            CureError::EmptyWindow { .. } => self.empty_window += 1,
            CureError::NoLocalEvents { .. } => self.no_local_events += 1,
            _ => self.degenerate_scale += 1,
        }
    }
}

/// One included covariate: its local fit and standardization.
#[derive(Debug, Clone, Copy)]
struct Standardizer<'a> {
    fit: &'a LocalFit,
    m: f64,
    s: f64,
}

/// `F(t) = mean_j Q(t s(X_j) + m(X_j) | X_j) / (1 - pi(X_j))` over the
/// covariates whose local location and scale exist.
#[derive(Debug, Clone)]
pub struct ErrorDistribution<'a> {
    model: &'a FittedCureModel,
    terms: Vec<Standardizer<'a>>,
    exclusions: Exclusions,
}

impl<'a> ErrorDistribution<'a> {
    pub fn new(model: &'a FittedCureModel) -> Result<Self> {
        let mut terms = Vec::new();
        let mut exclusions = Exclusions::default();
        for local in model.sample_fits() {
            let standardized = local.as_ref().map_err(Clone::clone).and_then(|fit| {
                Ok(Standardizer {
                    fit,
                    m: fit.m()?,
                    s: fit.s()?,
                })
            });
            match standardized {
                Ok(term) => terms.push(term),
                Err(err) => exclusions.record(&err),
            }
        }
        if terms.is_empty() {
            return Err(CureError::NoValidCovariates {
                excluded: exclusions.total(),
            });
        }
        let n = model.sample().len();
        if exclusions.total() as f64 > EXCLUSION_WARNING_FRACTION * n as f64 {
            warn!(
                "{} of {n} covariates excluded from the error distribution estimate",
                exclusions.total()
            );
        }
        Ok(Self {
            model,
            terms,
            exclusions,
        })
    }

    pub fn exclusions(&self) -> Exclusions {
        self.exclusions
    }

    pub fn included(&self) -> usize {
        self.terms.len()
    }

    fn eval_counting(&self, t: f64) -> (f64, usize) {
        let mut clamped = 0;
        let sum: f64 = self
            .terms
            .iter()
            .map(|term| {
                let ratio = term.fit.q(t * term.s + term.m) / term.fit.observable_mass();
                if ratio > 1.0 {
                    clamped += 1;
                }
                ratio.clamp(0.0, 1.0)
            })
            .sum();
        (sum / self.terms.len() as f64, clamped)
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.eval_counting(t).0
    }

    /// `[smallest standardized jump - 0.5, max_j (tau0 - m_j) / s_j]`.
    ///
    /// The lower end is the smallest `(z_k - m_j) / s_j` over the event
    /// times `z_k` carrying weight in the window of an included covariate
    /// `X_j`, so `F` vanishes there and reaches 1 at the upper end.
    pub fn default_range(&self) -> (f64, f64) {
        let tau0 = self.model.tau0();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for term in &self.terms {
            if let Ok(q) = term.fit.uncured_quantile() {
                if let Some(&first) = q.values().first() {
                    lo = lo.min((first - term.m) / term.s);
                }
            }
            hi = hi.max((tau0 - term.m) / term.s);
        }
        lo -= 0.5;
        if !(hi > lo) {
            hi = lo + 1.0;
        }
        (lo, hi)
    }

    pub fn grid(&self, t_lo: f64, t_hi: f64, steps: usize) -> Result<ErrorDistEstimate> {
        let grid = uniform_grid(t_lo, t_hi, steps)?;
        let mut clamped = 0;
        let mut values = Vec::with_capacity(steps);
        let mut running: f64 = 0.0;
        for &t in &grid {
            let (v, c) = self.eval_counting(t);
            clamped += c;
            running = running.max(v);
            values.push(running);
        }
        let n = self.model.sample().len();
        let warning = (self.exclusions.total() as f64 > EXCLUSION_WARNING_FRACTION * n as f64)
            .then(|| {
                format!(
                    "{} of {n} covariates excluded (more than {:.0}%)",
                    self.exclusions.total(),
                    100.0 * EXCLUSION_WARNING_FRACTION
                )
            });
        Ok(ErrorDistEstimate {
            grid,
            values,
            t_max: self.default_range().1,
            included: self.terms.len(),
            exclusions: self.exclusions,
            clamped,
            warning,
        })
    }
}

pub(crate) fn uniform_grid(t_lo: f64, t_hi: f64, steps: usize) -> Result<Vec<f64>> {
    if !(t_lo < t_hi) || steps < 2 || !t_lo.is_finite() || !t_hi.is_finite() {
        return Err(CureError::InvalidInput(format!(
            "grid needs t_lo < t_hi and at least 2 steps, got [{t_lo}, {t_hi}] with {steps}"
        )));
    }
    let h = (t_hi - t_lo) / (steps - 1) as f64;
    let mut grid: Vec<f64> = (0..steps).map(|i| t_lo + i as f64 * h).collect();
    grid[steps - 1] = t_hi;
    Ok(grid)
}

/// `F` evaluated on a grid, with the diagnostics of the fit behind it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorDistEstimate {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub t_max: f64,
    pub included: usize,
    pub exclusions: Exclusions,
    /// Local ratios above 1 that were clamped, summed over the grid.
    pub clamped: usize,
    pub warning: Option<String>,
}

impl ErrorDistEstimate {
    /// Masses of the grid points as a discrete distribution: point `i`
    /// carries `F(t_i) - F(t_{i-1})`, the first point carries `F(t_0)`.
    pub fn cumulative(&self) -> &[f64] {
        &self.values
    }

    /// Smallest grid point with `F(t) >= u * F(t_last)`.
    pub fn inverse(&self, u: f64) -> f64 {
        let top = self.values.last().copied().unwrap_or(0.0);
        let target = u * top;
        let idx = self.values.partition_point(|&v| v < target);
        self.grid[idx.min(self.grid.len() - 1)]
    }
}

/// `F(t)` at a single point.
pub fn estimate_f(model: &FittedCureModel, t: f64) -> Result<f64> {
    Ok(ErrorDistribution::new(model)?.eval(t))
}

/// `F` on `steps` uniform points of `[t_lo, t_hi]`, or of the default range.
pub fn estimate_f_grid(
    model: &FittedCureModel,
    range: Option<(f64, f64)>,
    steps: usize,
) -> Result<ErrorDistEstimate> {
    let dist = ErrorDistribution::new(model)?;
    let (lo, hi) = range.unwrap_or_else(|| dist.default_range());
    dist.grid(lo, hi, steps)
}
