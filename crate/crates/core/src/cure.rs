//! Cure horizon, cure fraction, conditional quantiles and the L-functional
//! location and scale of the uncured responses.

use rayon::prelude::*;

use crate::beran::{Indicator, LocalWindow, ProductLimit};
use crate::error::{CureError, Result};
use crate::kernel::KernelSpec;
use crate::sample::SurvivalSample;
use crate::score::{LMoments, ScoreFunction, StepQuantile};

/// Largest uncensored time, the estimate of the uncured support bound.
pub fn estimate_tau0(sample: &SurvivalSample) -> Result<f64> {
    sample.max_event_time().ok_or(CureError::NoEvents)
}

/// All local estimators at one covariate value.
#[derive(Debug, Clone)]
pub struct LocalFit {
    x0: f64,
    window_len: usize,
    response: ProductLimit,
    censoring: ProductLimit,
    observable_mass: f64,
    /// `p -> xi((1 - pi) p | x0)`; `None` when no event has weight at `x0`.
    quantile: Option<StepQuantile>,
    moments: Option<LMoments>,
    largest_censored: Option<f64>,
}

impl LocalFit {
    pub fn new(
        sample: &SurvivalSample,
        spec: &KernelSpec,
        score: &ScoreFunction,
        tau0: f64,
        x0: f64,
    ) -> Result<Self> {
        let window = LocalWindow::new(sample, spec, x0)?;
        let response = window.product_limit(Indicator::Event);
        let censoring = window.product_limit(Indicator::Censoring);
        let observable_mass = response.eval(tau0);
        let jumps: Vec<(f64, f64)> = response
            .jumps()
            .into_iter()
            .filter(|&(t, _)| t <= tau0)
            .collect();
        let quantile = (!jumps.is_empty() && observable_mass > 0.0).then(|| {
            let values = jumps.iter().map(|j| j.0).collect();
            let levels = jumps.iter().map(|j| j.1 / observable_mass).collect();
            StepQuantile::new(values, levels)
        });
        let moments = quantile.as_ref().map(|q| q.moments(score));
        let largest_censored = window
            .times()
            .iter()
            .zip(window.events())
            .filter(|(_, &d)| !d)
            .map(|(&t, _)| t)
            .last();
        Ok(Self {
            x0,
            window_len: window.len(),
            response,
            censoring,
            observable_mass,
            quantile,
            moments,
            largest_censored,
        })
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }

    /// Number of observations with positive kernel weight.
    pub fn window_len(&self) -> usize {
        self.window_len
    }

    /// `Q(t | x0)`.
    pub fn q(&self, t: f64) -> f64 {
        self.response.eval(t)
    }

    /// `P(C <= t | x0)`.
    pub fn censoring_cdf(&self, t: f64) -> f64 {
        self.censoring.eval(t)
    }

    pub fn response(&self) -> &ProductLimit {
        &self.response
    }

    pub fn censoring(&self) -> &ProductLimit {
        &self.censoring
    }

    /// `Q(tau0 | x0) = 1 - pi(x0)`.
    pub fn observable_mass(&self) -> f64 {
        self.observable_mass
    }

    pub fn pi(&self) -> f64 {
        (1.0 - self.observable_mass).clamp(0.0, 1.0)
    }

    /// Smallest jump `y <= tau0` of `Q(. | x0)` with `Q(y | x0) >= q`.
    pub fn xi(&self, q: f64) -> Result<f64> {
        let out_of_range = CureError::QuantileOutOfRange {
            x0: self.x0,
            q,
            max: self.observable_mass,
        };
        if !(0.0..=self.observable_mass).contains(&q) {
            return Err(out_of_range);
        }
        let jumps = self.response.jumps();
        if jumps.is_empty() {
            return Err(out_of_range);
        }
        let idx = jumps.partition_point(|&(_, v)| v < q);
        jumps.get(idx).map(|j| j.0).ok_or(out_of_range)
    }

    /// Quantile function of the uncured responses, on levels `p` in [0, 1].
    pub fn uncured_quantile(&self) -> Result<&StepQuantile> {
        self.quantile
            .as_ref()
            .ok_or(CureError::NoLocalEvents { x0: self.x0 })
    }

    fn moments(&self) -> Result<&LMoments> {
        self.moments
            .as_ref()
            .ok_or(CureError::NoLocalEvents { x0: self.x0 })
    }

    /// `m(x0) = int xi((1 - pi) p) J(p) dp`.
    pub fn m(&self) -> Result<f64> {
        Ok(self.moments()?.first)
    }

    /// `v(x0) = int xi^2((1 - pi) p) J(p) dp - m^2`.
    pub fn v(&self) -> Result<f64> {
        Ok(self.moments()?.variance())
    }

    /// `s(x0) = sqrt(v)`; `DegenerateScale` if `v <= 0` or if a single
    /// quantile value carries all score mass.
    pub fn s(&self) -> Result<f64> {
        let moments = self.moments()?;
        let v = moments.variance();
        if moments.weighted_steps < 2 || !(v > 0.0) {
            return Err(CureError::DegenerateScale {
                x0: self.x0,
                variance: v,
            });
        }
        Ok(v.sqrt())
    }

    /// Inverse transform draw from the censoring estimate. Levels the
    /// estimate never reaches map to the largest censored time in the window.
    pub fn censoring_inverse(&self, u: f64) -> Option<f64> {
        self.censoring.inverse(u).or(self.largest_censored)
    }

    pub fn largest_censored(&self) -> Option<f64> {
        self.largest_censored
    }
}

/// A sample bound to a kernel and score, with local fits at every sample
/// covariate built once at construction.
#[derive(Debug, Clone)]
pub struct FittedCureModel {
    sample: SurvivalSample,
    spec: KernelSpec,
    score: ScoreFunction,
    tau0: f64,
    locals: Vec<Result<LocalFit>>,
}

impl FittedCureModel {
    pub fn fit(sample: SurvivalSample, spec: KernelSpec, score: ScoreFunction) -> Result<Self> {
        score.validate()?;
        let tau0 = estimate_tau0(&sample)?;
        let locals = sample
            .observations()
            .par_iter()
            .map(|o| LocalFit::new(&sample, &spec, &score, tau0, o.x))
            .collect();
        Ok(Self {
            sample,
            spec,
            score,
            tau0,
            locals,
        })
    }

    pub fn sample(&self) -> &SurvivalSample {
        &self.sample
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn score(&self) -> &ScoreFunction {
        &self.score
    }

    pub fn tau0(&self) -> f64 {
        self.tau0
    }

    /// Local fits at the sample covariates, in input order.
    pub fn sample_fits(&self) -> &[Result<LocalFit>] {
        &self.locals
    }

    /// Local fit at an arbitrary covariate value.
    pub fn local_fit(&self, x0: f64) -> Result<LocalFit> {
        LocalFit::new(&self.sample, &self.spec, &self.score, self.tau0, x0)
    }

    pub fn estimate_pi(&self, x0: f64) -> Result<f64> {
        Ok(self.local_fit(x0)?.pi())
    }

    pub fn quantile_xi(&self, x0: f64, q: f64) -> Result<f64> {
        self.local_fit(x0)?.xi(q)
    }

    pub fn estimate_m(&self, x0: f64) -> Result<f64> {
        self.local_fit(x0)?.m()
    }

    pub fn estimate_s(&self, x0: f64) -> Result<f64> {
        self.local_fit(x0)?.s()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wide() -> KernelSpec {
        KernelSpec::biweight(100.0).unwrap()
    }

    fn fit(triples: &[(f64, f64, bool)], score: ScoreFunction) -> FittedCureModel {
        FittedCureModel::fit(SurvivalSample::from_triples(triples).unwrap(), wide(), score).unwrap()
    }

    #[test]
    fn tau0_cases() {
        let s = SurvivalSample::from_triples(&[(0.0, 1.0, true), (0.0, 2.0, true), (0.0, 3.0, false)])
            .unwrap();
        assert_eq!(estimate_tau0(&s).unwrap(), 2.0);
        let s = SurvivalSample::from_triples(&[(0.0, 5.0, true)]).unwrap();
        assert_eq!(estimate_tau0(&s).unwrap(), 5.0);
    }

    #[test]
    fn no_cure_when_everything_is_observed() {
        let m = fit(&[(0.0, 1.0, true), (0.0, 2.0, true), (0.0, 3.0, true)], ScoreFunction::default());
        assert_eq!(m.estimate_pi(0.0).unwrap(), 0.0);
    }

    #[test]
    fn quantiles_of_uncensored_sample() {
        let m = fit(&[(0.0, 1.0, true), (0.0, 2.0, true), (0.0, 3.0, true)], ScoreFunction::default());
        assert_eq!(m.quantile_xi(0.0, 0.5).unwrap(), 2.0);
        assert_eq!(m.quantile_xi(0.0, 0.0).unwrap(), 1.0);
        assert_eq!(m.quantile_xi(0.0, 1.0).unwrap(), m.tau0());
    }

    #[test]
    fn quantile_beyond_observable_mass_errors() {
        // the last time is censored, so Q(tau0) = 1/2
        let m = fit(&[(0.0, 1.0, true), (0.0, 2.0, false)], ScoreFunction::default());
        assert_eq!(m.estimate_pi(0.0).unwrap(), 0.5);
        assert!(matches!(
            m.quantile_xi(0.0, 0.75),
            Err(CureError::QuantileOutOfRange { .. })
        ));
        assert_eq!(m.quantile_xi(0.0, 0.5).unwrap(), 1.0);
    }

    #[test]
    fn single_observation_location_and_degenerate_scale() {
        let m = fit(&[(0.0, 4.0, true)], ScoreFunction::default());
        assert!((m.estimate_m(0.0).unwrap() - 4.0).abs() < 1e-3);
        assert!(matches!(
            m.estimate_s(0.0),
            Err(CureError::DegenerateScale { .. })
        ));
    }

    #[test]
    fn uniform_score_on_three_points() {
        let m = fit(&[(0.0, 1.0, true), (0.0, 2.0, true), (0.0, 3.0, true)], ScoreFunction::uniform());
        assert!((m.estimate_m(0.0).unwrap() - 2.0).abs() < 1e-14);
        let s = m.estimate_s(0.0).unwrap();
        assert!((s - (2.0f64 / 3.0).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn scale_equivariance_of_location() {
        let base = [(0.0, 1.0, true), (0.1, 2.5, false), (0.2, 3.0, true), (0.3, 4.0, true)];
        let doubled: Vec<_> = base.iter().map(|&(x, z, d)| (x, 2.0 * z, d)).collect();
        let a = fit(&base, ScoreFunction::default());
        let b = fit(&doubled, ScoreFunction::default());
        let (ma, mb) = (a.estimate_m(0.1).unwrap(), b.estimate_m(0.1).unwrap());
        assert!((mb - 2.0 * ma).abs() < 1e-12);
    }

    #[test]
    fn no_local_events() {
        let s = SurvivalSample::from_triples(&[(0.0, 1.0, false), (5.0, 2.0, true)]).unwrap();
        let m = FittedCureModel::fit(s, KernelSpec::biweight(1.0).unwrap(), ScoreFunction::default())
            .unwrap();
        assert_eq!(m.estimate_pi(0.0).unwrap(), 1.0);
        assert!(matches!(m.estimate_m(0.0), Err(CureError::NoLocalEvents { .. })));
        assert!(matches!(m.estimate_m(9.0), Err(CureError::EmptyWindow { .. })));
    }

    #[test]
    fn censoring_inverse_truncates_at_largest_censored_time() {
        // censoring estimate: z=2 censored with remaining weight 2 of 3 -> G(2) = 1/2;
        // z=3 is an event, so G never reaches 1
        let m = fit(&[(0.0, 1.0, true), (0.0, 2.0, false), (0.0, 3.0, true)], ScoreFunction::default());
        let local = m.local_fit(0.0).unwrap();
        assert_eq!(local.censoring_cdf(2.5), 0.5);
        assert_eq!(local.censoring_inverse(0.3), Some(2.0));
        assert_eq!(local.censoring_inverse(0.9), Some(2.0));
    }
}
