//! Compactly supported kernels, Nadaraya-Watson weights and the
//! rule-of-thumb undersmoothing bandwidth.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{CureError, Result};

/// Kernel sums below this are treated as an empty window.
const DENOMINATOR_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelFamily {
    Epanechnikov,
    #[default]
    Biweight,
}

impl KernelFamily {
    /// Kernel density at `u`, zero outside the open interval (-1, 1).
    #[inline]
    pub fn eval(self, u: f64) -> f64 {
        let u = u.abs();
        if u >= 1.0 || u.is_nan() {
            return 0.0;
        }
        let w = 1.0 - u * u;
        match self {
            KernelFamily::Epanechnikov => 0.75 * w,
            KernelFamily::Biweight => 0.9375 * w * w,
        }
    }
}

impl std::str::FromStr for KernelFamily {
    type Err = CureError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "biweight" | "quartic" => Ok(KernelFamily::Biweight),
            "epanechnikov" => Ok(KernelFamily::Epanechnikov),
            other => Err(CureError::InvalidInput(format!("unknown kernel `{other}`"))),
        }
    }
}

/// Kernel family together with a bandwidth in covariate units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub bandwidth: f64,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, bandwidth: f64) -> Result<Self> {
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(CureError::InvalidInput(format!(
                "bandwidth must be positive and finite, got {bandwidth}"
            )));
        }
        Ok(Self { family, bandwidth })
    }

    pub fn biweight(bandwidth: f64) -> Result<Self> {
        Self::new(KernelFamily::Biweight, bandwidth)
    }

    /// Unnormalized kernel weight K((x0 - x) / a).
    #[inline]
    pub fn raw_weight(&self, x0: f64, x: f64) -> f64 {
        self.family.eval((x0 - x) / self.bandwidth)
    }
}

/// Evaluates the kernel density at `u`.
pub fn kernel_eval(spec: &KernelSpec, u: f64) -> f64 {
    spec.family.eval(u)
}

/// Unnormalized kernel values at `x0` and their sum, or `EmptyWindow`.
pub(crate) fn raw_weights(x0: f64, xs: &[f64], spec: &KernelSpec) -> Result<(Vec<f64>, f64)> {
    let raw: Vec<f64> = xs.iter().map(|&x| spec.raw_weight(x0, x)).collect();
    let total: f64 = raw.iter().sum();
    if !(total > DENOMINATOR_FLOOR) {
        return Err(CureError::EmptyWindow {
            x0,
            bandwidth: spec.bandwidth,
        });
    }
    Ok((raw, total))
}

/// Nadaraya-Watson weights of every `xs[j]` at `x0`.
pub fn nw_weights(x0: f64, xs: &[f64], spec: &KernelSpec) -> Result<Vec<f64>> {
    let (mut raw, total) = raw_weights(x0, xs, spec)?;
    for w in raw.iter_mut() {
        *w /= total;
    }
    Ok(raw)
}

/// Bandwidth rule `c * sigma_x * n^(-1/4 - gamma) * log(n)^(1/4 + gamma)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandwidthRule {
    pub c: f64,
    pub gamma: f64,
}

impl BandwidthRule {
    pub fn new(c: f64, gamma: f64) -> Self {
        Self { c, gamma }
    }

    /// Whether `gamma` lies in the undersmoothing range (0, 1/12).
    pub fn undersmooths(&self) -> bool {
        self.gamma > 0.0 && self.gamma < 1.0 / 12.0
    }

    pub fn bandwidth(&self, n: usize, sigma_x: f64) -> f64 {
        default_bandwidth(self, n, sigma_x)
    }
}

pub fn default_bandwidth(rule: &BandwidthRule, n: usize, sigma_x: f64) -> f64 {
    if !rule.undersmooths() {
        warn!(
            "bandwidth exponent gamma = {} is outside (0, 1/12); the bandwidth does not undersmooth",
            rule.gamma
        );
    }
    let n = n as f64;
    let exponent = 0.25 + rule.gamma;
    rule.c * sigma_x * n.powf(-exponent) * n.ln().powf(exponent)
}

/// Sample standard deviation with the n - 1 denominator.
pub fn sample_sd(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
    (ss / (n as f64 - 1.0)).sqrt()
}
