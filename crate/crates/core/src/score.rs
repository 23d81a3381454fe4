//! Score functions on quantile levels and the L-functionals they define.

use serde::{Deserialize, Serialize};

use crate::error::{CureError, Result};

pub const DEFAULT_THRESHOLD: f64 = 1e-4;
pub const DEFAULT_SCALE: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreForm {
    /// Logistic distribution function `1 / (1 + exp(-p / scale))` above the threshold.
    #[default]
    LogisticStep,
    /// Constant 1 above the threshold.
    Uniform,
}

/// Nonnegative bounded weight `J` on `[0, 1]`, zero on `[0, threshold]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreFunction {
    pub form: ScoreForm,
    pub threshold: f64,
    pub scale: f64,
    /// Divide `J` by its integral so that it integrates to exactly 1.
    #[serde(default)]
    pub normalize: bool,
}

impl Default for ScoreFunction {
    fn default() -> Self {
        Self {
            form: ScoreForm::LogisticStep,
            threshold: DEFAULT_THRESHOLD,
            scale: DEFAULT_SCALE,
            normalize: false,
        }
    }
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

impl ScoreFunction {
    pub fn new(form: ScoreForm, threshold: f64, scale: f64, normalize: bool) -> Result<Self> {
        let score = Self {
            form,
            threshold,
            scale,
            normalize,
        };
        score.validate()?;
        Ok(score)
    }

    pub fn uniform() -> Self {
        Self {
            form: ScoreForm::Uniform,
            threshold: 0.0,
            scale: 1.0,
            normalize: false,
        }
    }

    pub fn normalized(mut self) -> Self {
        self.normalize = true;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.threshold) {
            return Err(CureError::InvalidInput(format!(
                "score threshold must lie in [0, 1), got {}",
                self.threshold
            )));
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(CureError::InvalidInput(format!(
                "score scale must be positive, got {}",
                self.scale
            )));
        }
        Ok(())
    }

    fn raw_density(&self, p: f64) -> f64 {
        if p <= self.threshold || p > 1.0 {
            return 0.0;
        }
        match self.form {
            ScoreForm::LogisticStep => 1.0 / (1.0 + (-p / self.scale).exp()),
            ScoreForm::Uniform => 1.0,
        }
    }

    fn raw_mass(&self, q: f64) -> f64 {
        let q = q.min(1.0);
        if q <= self.threshold {
            return 0.0;
        }
        match self.form {
            ScoreForm::LogisticStep => {
                self.scale * (softplus(q / self.scale) - softplus(self.threshold / self.scale))
            }
            ScoreForm::Uniform => q - self.threshold,
        }
    }

    /// `J(p)`.
    pub fn density(&self, p: f64) -> f64 {
        if self.normalize {
            self.raw_density(p) / self.raw_mass(1.0)
        } else {
            self.raw_density(p)
        }
    }

    /// `I(q) = integral of J over [0, q]`, in closed form.
    pub fn mass(&self, q: f64) -> f64 {
        if self.normalize {
            self.raw_mass(q) / self.raw_mass(1.0)
        } else {
            self.raw_mass(q)
        }
    }

    /// `I(1)`.
    pub fn total_mass(&self) -> f64 {
        self.mass(1.0)
    }
}

/// A left-continuous quantile function taking `values[i]` on the level
/// interval `(levels[i-1], levels[i]]`, with `levels` ending at 1.
#[derive(Debug, Clone, PartialEq)]
pub struct StepQuantile {
    values: Vec<f64>,
    levels: Vec<f64>,
}

/// `int xi J`, `int xi^2 J` and the number of steps carrying score mass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LMoments {
    pub first: f64,
    pub second: f64,
    pub mass: f64,
    pub weighted_steps: usize,
}

impl LMoments {
    /// `second - first^2`, the scale functional before the square root.
    pub fn variance(&self) -> f64 {
        self.second - self.first * self.first
    }

    /// Affine constants `(loc, scale)` such that `(xi - loc) / scale` has
    /// `int xi J = 0` and `int xi^2 J = 1`.
    pub fn standardizing_constants(&self) -> Option<(f64, f64)> {
        if !(self.mass > 0.0) {
            return None;
        }
        let loc = self.first / self.mass;
        let var = self.second - self.first * loc;
        (var > 0.0).then(|| (loc, var.sqrt()))
    }
}

impl StepQuantile {
    /// `values` ascending, `levels` strictly increasing in (0, 1]; the final
    /// level is forced to exactly 1.
    pub fn new(values: Vec<f64>, mut levels: Vec<f64>) -> Self {
        assert_eq!(values.len(), levels.len());
        if let Some(last) = levels.last_mut() {
            *last = 1.0;
        }
        Self { values, levels }
    }

    /// Empirical quantile function of a sample.
    pub fn empirical(sample: &[f64]) -> Self {
        let mut values = sample.to_vec();
        values.sort_by(f64::total_cmp);
        let n = values.len() as f64;
        let levels = (1..=values.len()).map(|k| k as f64 / n).collect();
        Self::new(values, levels)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Quantile at level `p`; for `p = 0` the smallest value.
    pub fn at(&self, p: f64) -> Option<f64> {
        let idx = self.levels.partition_point(|&u| u < p);
        self.values.get(idx).copied()
    }

    pub fn moments(&self, score: &ScoreFunction) -> LMoments {
        let mut first = 0.0;
        let mut second = 0.0;
        let mut steps = 0;
        let mut lower = 0.0;
        for (&v, &u) in self.values.iter().zip(&self.levels) {
            let upper = score.mass(u);
            let w = upper - lower;
            if w > 0.0 {
                first += v * w;
                second += v * v * w;
                steps += 1;
            }
            lower = upper;
        }
        LMoments {
            first,
            second,
            mass: lower,
            weighted_steps: steps,
        }
    }
}
