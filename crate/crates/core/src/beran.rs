//! Kernel-localized (sub)distribution estimators and the Beran
//! product-limit estimator of the conditional response distribution.

use serde::{Deserialize, Serialize};

use crate::error::{CureError, Result};
use crate::kernel::KernelSpec;
use crate::sample::SurvivalSample;

/// Which side of a jump a step function takes at the jump point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Continuity {
    /// Product over `Z_(j) <= t`.
    #[default]
    Right,
    /// Product over `Z_(j) < t`.
    Left,
}

/// Which indicator drives the hazard increments of a product-limit fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Indicator {
    /// `delta = 1`: the response distribution.
    Event,
    /// `delta = 0`: the censoring distribution.
    Censoring,
}

/// The observations with positive kernel weight at `x0`, in ascending `z`.
///
/// Observations outside the window contribute nothing to any estimator and
/// are dropped, so adding them leaves every fit bit-identical.
#[derive(Debug, Clone)]
pub struct LocalWindow {
    x0: f64,
    times: Vec<f64>,
    raw: Vec<f64>,
    events: Vec<bool>,
    total: f64,
}

impl LocalWindow {
    pub fn new(sample: &SurvivalSample, spec: &KernelSpec, x0: f64) -> Result<Self> {
        let obs = sample.observations();
        let mut times = Vec::new();
        let mut raw = Vec::new();
        let mut events = Vec::new();
        for &i in sample.sorted_index() {
            let o = &obs[i];
            let w = spec.raw_weight(x0, o.x);
            if w > 0.0 {
                times.push(o.z);
                raw.push(w);
                events.push(o.delta);
            }
        }
        let total: f64 = raw.iter().sum();
        if !(total > 1e-300) {
            return Err(CureError::EmptyWindow {
                x0,
                bandwidth: spec.bandwidth,
            });
        }
        Ok(Self {
            x0,
            times,
            raw,
            events,
            total,
        })
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Observed times in the window, ascending.
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn events(&self) -> &[bool] {
        &self.events
    }

    /// Normalized Nadaraya-Watson weight of each windowed observation.
    pub fn weights(&self) -> Vec<f64> {
        self.raw.iter().map(|w| w / self.total).collect()
    }

    /// `sum_j 1[z_j <= t] W_j`, restricted to events when `events_only`.
    pub fn subdistribution(&self, t: f64, events_only: bool) -> f64 {
        let end = self.times.partition_point(|&z| z <= t);
        let mass: f64 = self.raw[..end]
            .iter()
            .zip(&self.events[..end])
            .filter(|(_, &d)| d || !events_only)
            .map(|(w, _)| w)
            .sum();
        (mass / self.total).min(1.0)
    }

    /// Product-limit estimator with hazard increments `W_(j) / sum_{k>=j} W_(k)`
    /// at the observations selected by `indicator`.
    pub fn product_limit(&self, indicator: Indicator) -> ProductLimit {
        let n = self.times.len();
        let mut remaining = vec![0.0; n];
        let mut acc = 0.0;
        for j in (0..n).rev() {
            acc += self.raw[j];
            remaining[j] = acc;
        }
        let mut survival = 1.0;
        let mut values = Vec::with_capacity(n);
        for j in 0..n {
            let counts = match indicator {
                Indicator::Event => self.events[j],
                Indicator::Censoring => !self.events[j],
            };
            if counts && remaining[j] > 0.0 {
                let factor = (1.0 - self.raw[j] / remaining[j]).clamp(0.0, 1.0);
                survival *= factor;
            }
            values.push(1.0 - survival);
        }
        ProductLimit {
            times: self.times.clone(),
            values,
        }
    }
}

/// A right-continuous nondecreasing step function stored as its values
/// after each ordered time.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductLimit {
    times: Vec<f64>,
    values: Vec<f64>,
}

impl ProductLimit {
    pub fn eval(&self, t: f64) -> f64 {
        self.eval_with(t, Continuity::Right)
    }

    pub fn eval_with(&self, t: f64, continuity: Continuity) -> f64 {
        let idx = match continuity {
            Continuity::Right => self.times.partition_point(|&z| z <= t),
            Continuity::Left => self.times.partition_point(|&z| z < t),
        };
        if idx == 0 {
            0.0
        } else {
            self.values[idx - 1]
        }
    }

    /// Value beyond the last time.
    pub fn total_mass(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    /// `(time, value after the jump)` for every time where the function
    /// strictly increases.
    pub fn jumps(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        let mut prev = 0.0;
        for (&t, &v) in self.times.iter().zip(&self.values) {
            if v > prev {
                out.push((t, v));
                prev = v;
            }
        }
        out
    }

    /// Smallest jump time whose value reaches `u`, if any.
    pub fn inverse(&self, u: f64) -> Option<f64> {
        let idx = self.values.partition_point(|&v| v < u);
        self.times.get(idx).copied()
    }
}

/// Conditional distribution estimate of `Z` given `X = x0`.
pub fn subdist_m(sample: &SurvivalSample, spec: &KernelSpec, t: f64, x0: f64) -> Result<f64> {
    Ok(LocalWindow::new(sample, spec, x0)?.subdistribution(t, false))
}

/// Conditional subdistribution estimate of `(Z <= t, delta = 1)` given `X = x0`.
pub fn subdist_m1(sample: &SurvivalSample, spec: &KernelSpec, t: f64, x0: f64) -> Result<f64> {
    Ok(LocalWindow::new(sample, spec, x0)?.subdistribution(t, true))
}

/// Beran estimate of `P(Y <= t | X = x0)`, right-continuous.
pub fn beran_q(sample: &SurvivalSample, spec: &KernelSpec, t: f64, x0: f64) -> Result<f64> {
    beran_q_with(sample, spec, t, x0, Continuity::Right)
}

pub fn beran_q_with(
    sample: &SurvivalSample,
    spec: &KernelSpec,
    t: f64,
    x0: f64,
    continuity: Continuity,
) -> Result<f64> {
    let window = LocalWindow::new(sample, spec, x0)?;
    Ok(window.product_limit(Indicator::Event).eval_with(t, continuity))
}

/// Beran estimate of `P(C <= t | X = x0)`.
pub fn beran_censor(sample: &SurvivalSample, spec: &KernelSpec, t: f64, x0: f64) -> Result<f64> {
    let window = LocalWindow::new(sample, spec, x0)?;
    Ok(window.product_limit(Indicator::Censoring).eval(t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sample::SurvivalSample;

    fn wide() -> KernelSpec {
        KernelSpec::biweight(100.0).unwrap()
    }

    fn same_x(zs: &[f64], ds: &[bool]) -> SurvivalSample {
        let t: Vec<_> = zs.iter().zip(ds).map(|(&z, &d)| (0.0, z, d)).collect();
        SurvivalSample::from_triples(&t).unwrap()
    }

    #[test]
    fn single_observation_subdistribution() {
        let s = same_x(&[1.0], &[true]);
        assert_eq!(subdist_m(&s, &wide(), 2.0, 0.0).unwrap(), 1.0);
        assert_eq!(subdist_m(&s, &wide(), 0.0, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn equal_weight_subdistributions() {
        let s = same_x(&[1.0, 2.0, 3.0], &[true, false, true]);
        let m = subdist_m(&s, &wide(), 2.0, 0.0).unwrap();
        assert!((m - 2.0 / 3.0).abs() < 1e-15);
        let m1 = subdist_m1(&s, &wide(), 2.0, 0.0).unwrap();
        assert!((m1 - 1.0 / 3.0).abs() < 1e-15);
        assert!((subdist_m1(&s, &wide(), 3.0, 0.0).unwrap() - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn m1_vanishes_without_events_in_window() {
        // the only event sits outside the window
        let s = SurvivalSample::from_triples(&[(0.0, 1.0, false), (0.1, 2.0, false), (5.0, 3.0, true)])
            .unwrap();
        let k = KernelSpec::biweight(1.0).unwrap();
        for t in [0.0, 1.0, 2.5, 10.0] {
            assert_eq!(subdist_m1(&s, &k, t, 0.0).unwrap(), 0.0);
            assert_eq!(beran_q(&s, &k, t, 0.0).unwrap(), 0.0);
        }
    }

    #[test]
    fn uncensored_beran_is_ecdf() {
        let s = same_x(&[0.5, 1.5, 2.5, 4.0], &[true; 4]);
        for (t, want) in [(0.0, 0.0), (0.5, 0.25), (1.0, 0.25), (2.5, 0.75), (4.0, 1.0)] {
            let q = beran_q(&s, &wide(), t, 0.0).unwrap();
            assert!((q - want).abs() < 1e-15, "t = {t}: {q}");
        }
        assert_eq!(beran_q(&s, &wide(), 4.0, 0.0).unwrap(), 1.0);
    }

    #[test]
    fn left_continuous_variant_excludes_the_jump() {
        let s = same_x(&[1.0, 2.0], &[true, true]);
        let k = wide();
        assert_eq!(beran_q_with(&s, &k, 2.0, 0.0, Continuity::Left).unwrap(), 0.5);
        assert_eq!(beran_q_with(&s, &k, 2.0, 0.0, Continuity::Right).unwrap(), 1.0);
    }

    #[test]
    fn censoring_estimator_mirrors_roles() {
        // a sample needs one event; park it outside the window
        let s = SurvivalSample::from_triples(&[
            (0.0, 1.0, false),
            (0.0, 2.0, false),
            (0.0, 3.0, false),
            (50.0, 0.2, true),
        ])
        .unwrap();
        let k = KernelSpec::biweight(1.0).unwrap();
        for (t, want) in [(0.5, 0.0), (1.0, 1.0 / 3.0), (2.0, 2.0 / 3.0), (3.0, 1.0)] {
            let g = beran_censor(&s, &k, t, 0.0).unwrap();
            assert!((g - want).abs() < 1e-15);
        }
        let all_events = same_x(&[1.0, 2.0, 3.0], &[true; 3]);
        assert_eq!(beran_censor(&all_events, &wide(), 10.0, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn two_point_mixed_censoring_by_hand() {
        // z = 1 event, z = 2 censored, equal weights:
        // censoring: factor at z=2 is 1 - 1/1 = 0 -> G(2) = 1, G(1.5) = 0
        // response: factor at z=1 is 1 - 1/2 -> Q(1) = 1/2
        let s = same_x(&[1.0, 2.0], &[true, false]);
        assert_eq!(beran_censor(&s, &wide(), 1.5, 0.0).unwrap(), 0.0);
        assert_eq!(beran_censor(&s, &wide(), 2.0, 0.0).unwrap(), 1.0);
        assert_eq!(beran_q(&s, &wide(), 1.0, 0.0).unwrap(), 0.5);
        assert_eq!(beran_q(&s, &wide(), 9.0, 0.0).unwrap(), 0.5);
    }

    #[test]
    fn empty_window_propagates() {
        let s = same_x(&[1.0], &[true]);
        let k = KernelSpec::biweight(0.5).unwrap();
        assert!(matches!(beran_q(&s, &k, 1.0, 3.0), Err(CureError::EmptyWindow { .. })));
        assert!(matches!(subdist_m(&s, &k, 1.0, 3.0), Err(CureError::EmptyWindow { .. })));
    }

    #[test]
    fn inverse_and_jumps() {
        let s = same_x(&[1.0, 2.0, 3.0], &[true, false, true]);
        let pl = LocalWindow::new(&s, &wide(), 0.0).unwrap().product_limit(Indicator::Event);
        let jumps = pl.jumps();
        assert_eq!(jumps.len(), 2);
        assert_eq!(jumps[0].0, 1.0);
        assert!((jumps[0].1 - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(jumps[1].1, 1.0);
        assert_eq!(pl.inverse(0.2), Some(1.0));
        assert_eq!(pl.inverse(0.5), Some(3.0));
    }
}
