//! Right-censored observations and tie-free ingestion.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{CureError, Result};
use crate::rng::{stream, Purpose};

/// Relative size of the offsets used to separate tied times.
pub const TIE_JITTER_SCALE: f64 = 1e-9;

/// One `(x, z, delta)` triple; `delta` is true for an uncensored time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub x: f64,
    pub z: f64,
    pub delta: bool,
}

impl Observation {
    pub fn new(x: f64, z: f64, delta: bool) -> Self {
        Self { x, z, delta }
    }
}

/// What to do with tied observed times.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum TiePolicy {
    /// Separate tied times by tiny seeded offsets.
    Jitter { seed: u64 },
    /// Refuse tied times.
    Strict,
}

impl Default for TiePolicy {
    fn default() -> Self {
        TiePolicy::Jitter { seed: 0 }
    }
}

/// A validated sample with no tied times, plus the ascending order of `z`.
#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalSample {
    observations: Vec<Observation>,
    sorted_index: Vec<usize>,
    jittered: usize,
}

impl SurvivalSample {
    pub fn new(observations: Vec<Observation>, ties: TiePolicy) -> Result<Self> {
        if observations.is_empty() {
            return Err(CureError::EmptySample);
        }
        for (i, o) in observations.iter().enumerate() {
            if !o.x.is_finite() || !o.z.is_finite() {
                return Err(CureError::InvalidInput(format!(
                    "observation {i} has a non-finite value (x = {}, z = {})",
                    o.x, o.z
                )));
            }
        }
        if !observations.iter().any(|o| o.delta) {
            return Err(CureError::NoEvents);
        }
        let mut observations = observations;
        let mut order = sort_by_time(&observations);
        let jittered = break_ties(&mut observations, &order, ties)?;
        if jittered > 0 {
            order = sort_by_time(&observations);
        }
        Ok(Self {
            observations,
            sorted_index: order,
            jittered,
        })
    }

    /// Builds a sample with the default jitter policy.
    pub fn from_triples(triples: &[(f64, f64, bool)]) -> Result<Self> {
        let obs = triples
            .iter()
            .map(|&(x, z, d)| Observation::new(x, z, d))
            .collect();
        Self::new(obs, TiePolicy::default())
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    /// Indices of the observations ordered by ascending `z`.
    pub fn sorted_index(&self) -> &[usize] {
        &self.sorted_index
    }

    /// Number of observations moved to separate ties.
    pub fn jittered(&self) -> usize {
        self.jittered
    }

    pub fn covariates(&self) -> Vec<f64> {
        self.observations.iter().map(|o| o.x).collect()
    }

    pub fn censored_fraction(&self) -> f64 {
        let censored = self.observations.iter().filter(|o| !o.delta).count();
        censored as f64 / self.len() as f64
    }

    /// Largest uncensored time.
    pub fn max_event_time(&self) -> Option<f64> {
        self.observations
            .iter()
            .filter(|o| o.delta)
            .map(|o| o.z)
            .fold(None, |acc, z| Some(acc.map_or(z, |m: f64| m.max(z))))
    }
}

fn sort_by_time(obs: &[Observation]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..obs.len()).collect();
    order.sort_by(|&a, &b| obs[a].z.total_cmp(&obs[b].z).then(a.cmp(&b)));
    order
}

/// Spreads each group of equal times over `[z, z + k * eps]`, keeping every
/// group strictly below the next distinct time. Returns the number of moved
/// observations.
fn break_ties(obs: &mut [Observation], order: &[usize], ties: TiePolicy) -> Result<usize> {
    let n = order.len();
    let lo = obs[order[0]].z;
    let hi = obs[order[n - 1]].z;
    let range = hi - lo;
    let base_eps = if range > 0.0 {
        TIE_JITTER_SCALE * range
    } else {
        TIE_JITTER_SCALE * lo.abs().max(1.0)
    };
    let mut rng = match ties {
        TiePolicy::Jitter { seed } => Some(stream(seed, 0, Purpose::TieJitter)),
        TiePolicy::Strict => None,
    };
    let mut moved = 0;
    let mut start = 0;
    while start < n {
        let z = obs[order[start]].z;
        let mut end = start + 1;
        while end < n && obs[order[end]].z == z {
            end += 1;
        }
        let size = end - start;
        if size > 1 {
            let Some(rng) = rng.as_mut() else {
                return Err(CureError::TiedTimes { z });
            };
            let gap = if end < n {
                obs[order[end]].z - z
            } else {
                f64::INFINITY
            };
            let eps = base_eps.min(gap / (size as f64 + 1.0));
            let mut group: Vec<usize> = order[start..end].to_vec();
            group.shuffle(rng);
            for (k, &idx) in group.iter().enumerate().skip(1) {
                let shifted = z + k as f64 * eps;
                if shifted == obs[idx].z {
                    // eps below the resolution of z
                    return Err(CureError::TiedTimes { z });
                }
                obs[idx].z = shifted;
                moved += 1;
            }
        }
        start = end;
    }
    Ok(moved)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sorts_and_keeps_input_order() {
        let s = SurvivalSample::from_triples(&[(0.0, 3.0, true), (1.0, 1.0, false), (2.0, 2.0, true)])
            .unwrap();
        assert_eq!(s.sorted_index(), &[1, 2, 0]);
        assert_eq!(s.observations()[0].z, 3.0);
        assert_eq!(s.jittered(), 0);
    }

    #[test]
    fn requires_an_event() {
        let err = SurvivalSample::from_triples(&[(0.0, 1.0, false)]).unwrap_err();
        assert_eq!(err, CureError::NoEvents);
        assert_eq!(
            SurvivalSample::new(vec![], TiePolicy::Strict).unwrap_err(),
            CureError::EmptySample
        );
    }

    #[test]
    fn strict_mode_rejects_ties() {
        let obs = vec![
            Observation::new(0.0, 1.0, true),
            Observation::new(0.5, 1.0, false),
        ];
        assert_eq!(
            SurvivalSample::new(obs, TiePolicy::Strict).unwrap_err(),
            CureError::TiedTimes { z: 1.0 }
        );
    }

    #[test]
    fn jitter_breaks_ties_and_preserves_distinct_order() {
        let obs: Vec<Observation> = [1.0, 2.0, 2.0, 2.0, 2.0 + 1e-12, 3.0, 3.0]
            .iter()
            .enumerate()
            .map(|(i, &z)| Observation::new(i as f64, z, i % 2 == 0))
            .collect();
        let s = SurvivalSample::new(obs.clone(), TiePolicy::Jitter { seed: 9 }).unwrap();
        assert_eq!(s.jittered(), 3);
        let zs: Vec<f64> = s.sorted_index().iter().map(|&i| s.observations()[i].z).collect();
        assert!(zs.windows(2).all(|w| w[0] < w[1]), "{zs:?}");
        // the group at 2 stays below the nearby distinct value it preceded
        let at_two: Vec<f64> = s.observations()[1..4].iter().map(|o| o.z).collect();
        assert!(at_two.iter().all(|&z| (2.0..2.0 + 1e-12).contains(&z)));
        assert!(s.observations()[5].z >= 3.0 && s.observations()[6].z >= 3.0);

        let again = SurvivalSample::new(obs, TiePolicy::Jitter { seed: 9 }).unwrap();
        assert_eq!(s, again);
    }

    #[test]
    fn rejects_non_finite() {
        assert!(SurvivalSample::from_triples(&[(0.0, f64::INFINITY, true)]).is_err());
    }
}
