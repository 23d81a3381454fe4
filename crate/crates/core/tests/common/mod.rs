//! Brute-force reference implementations, written independently of the
//! library's windowed/suffix-sum code paths.

#![allow(dead_code)]

use lscure::{KernelSpec, Observation, SurvivalSample, TiePolicy};

pub fn biweight(u: f64) -> f64 {
    if u.abs() <= 1.0 {
        let w = 1.0 - u * u;
        15.0 / 16.0 * w * w
    } else {
        0.0
    }
}

/// Normalized biweight weights at `x0`, or `None` for an empty window.
pub fn weights(obs: &[Observation], spec: &KernelSpec, x0: f64) -> Option<Vec<f64>> {
    assert_eq!(spec.family, lscure::KernelFamily::Biweight);
    let raw: Vec<f64> = obs.iter().map(|o| biweight((x0 - o.x) / spec.bandwidth)).collect();
    let total: f64 = raw.iter().sum();
    (total > 0.0).then(|| raw.iter().map(|w| w / total).collect())
}

/// Naive product-limit `1 - prod_{Z_i <= t, delta_i} (1 - W_i / sum_{Z_j >= Z_i} W_j)`.
pub fn naive_q(obs: &[Observation], w: &[f64], t: f64) -> f64 {
    let mut prod = 1.0;
    for (i, o) in obs.iter().enumerate() {
        if !o.delta || o.z > t || w[i] == 0.0 {
            continue;
        }
        let mut at_risk = 0.0;
        for (j, p) in obs.iter().enumerate() {
            if p.z >= o.z {
                at_risk += w[j];
            }
        }
        prod *= 1.0 - w[i] / at_risk;
    }
    1.0 - prod
}

/// Same product with censoring indicators swapped.
pub fn naive_censor(obs: &[Observation], w: &[f64], t: f64) -> f64 {
    let flipped: Vec<Observation> = obs.iter().map(|o| Observation::new(o.x, o.z, !o.delta)).collect();
    naive_q(&flipped, w, t)
}

pub fn tau0(obs: &[Observation]) -> f64 {
    obs.iter()
        .filter(|o| o.delta)
        .map(|o| o.z)
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn default_j(p: f64) -> f64 {
    // logistic(40) is 1.0 in f64.
    if p > 4e-3 {
        1.0
    } else if p > 1e-4 {
        1.0 / (1.0 + (-p / 1e-4).exp())
    } else {
        0.0
    }
}

/// Everything the oracle knows about one covariate value.
#[derive(Debug, Clone)]
pub struct OracleLocal {
    pub weights: Vec<f64>,
    pub pi: f64,
    /// Sorted candidate times `<= tau0` and `Q` at each.
    pub times: Vec<f64>,
    pub q: Vec<f64>,
    pub m: f64,
    pub v: f64,
    pub weighted_steps: usize,
}

impl OracleLocal {
    pub fn s(&self) -> Option<f64> {
        (self.weighted_steps >= 2 && self.v > 0.0).then(|| self.v.sqrt())
    }
}

/// Local fit by midpoint Riemann sums over `points` uniform levels.
/// `None` when the window is empty or carries no event.
pub fn local(obs: &[Observation], spec: &KernelSpec, x0: f64, j: impl Fn(f64) -> f64, points: usize) -> Option<OracleLocal> {
    let w = weights(obs, spec, x0)?;
    let tau = tau0(obs);
    let mut times: Vec<f64> = obs
        .iter()
        .zip(&w)
        .filter(|(o, &wi)| o.delta && wi > 0.0 && o.z <= tau)
        .map(|(o, _)| o.z)
        .collect();
    if times.is_empty() {
        return None;
    }
    times.sort_by(f64::total_cmp);
    let q: Vec<f64> = times.iter().map(|&t| naive_q(obs, &w, t)).collect();
    let observable = naive_q(obs, &w, tau);
    let pi = 1.0 - observable;

    let h = 1.0 / points as f64;
    let mut first = 0.0;
    let mut second = 0.0;
    let mut k = 0;
    let mut used = vec![false; times.len()];
    for i in 0..points {
        let p = (i as f64 + 0.5) * h;
        let jp = j(p);
        while k + 1 < times.len() && q[k] < observable * p {
            k += 1;
        }
        let y = times[k];
        if jp > 0.0 {
            used[k] = true;
        }
        first += y * jp * h;
        second += y * y * jp * h;
    }
    let weighted_steps = {
        let mut distinct: Vec<f64> = times.iter().zip(&used).filter(|(_, &u)| u).map(|(&t, _)| t).collect();
        distinct.dedup();
        distinct.len()
    };
    Some(OracleLocal {
        weights: w,
        pi,
        times,
        q,
        m: first,
        v: second - first * first,
        weighted_steps,
    })
}

/// `F(t)` as the mean over usable covariates of the clamped ratio.
pub fn f_hat(obs: &[Observation], locals: &[Option<OracleLocal>], t: f64) -> Option<f64> {
    let mut sum = 0.0;
    let mut count = 0;
    for local in locals {
        let Some(l) = local else { continue };
        let Some(s) = l.s() else { continue };
        let value = naive_q(obs, &l.weights, t * s + l.m) / (1.0 - l.pi);
        sum += value.clamp(0.0, 1.0);
        count += 1;
    }
    (count > 0).then(|| sum / count as f64)
}

/// Distance from `t` to the nearest point where some local term jumps.
pub fn distance_to_jump(locals: &[Option<OracleLocal>], obs: &[Observation], t: f64) -> f64 {
    let mut best = f64::INFINITY;
    for l in locals.iter().flatten() {
        let Some(s) = l.s() else { continue };
        for o in obs.iter().filter(|o| o.delta) {
            best = best.min((t - (o.z - l.m) / s).abs());
        }
    }
    best
}

const Z: [f64; 5] = [2.3, 0.7, 1.9, 3.4, 1.1];
const SPREAD: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];
pub struct Fixture {
    pub obs: Vec<Observation>,
    pub spec: KernelSpec,
}

impl Fixture {
    pub fn sample(&self) -> SurvivalSample {
        SurvivalSample::new(self.obs.clone(), TiePolicy::Strict).unwrap()
    }
}

/// Every event pattern with at least one event, for sizes `sizes`, under a
/// single covariate value (uniform weights) and under spread covariates.
pub fn fixtures(sizes: std::ops::RangeInclusive<usize>, reversed: bool) -> Vec<Fixture> {
    let mut out = Vec::new();
    for n in sizes {
        for mask in 1u32..(1 << n) {
            for spread in [false, true] {
                let obs = (0..n)
                    .map(|i| {
                        let zi = if reversed { Z[n - 1 - i] } else { Z[i] };
                        let x = if spread { SPREAD[i] } else { 0.5 };
                        Observation::new(x, zi, mask & (1 << i) != 0)
                    })
                    .collect();
                let bandwidth = if spread { 0.6 } else { 10.0 };
                out.push(Fixture {
                    obs,
                    spec: KernelSpec::biweight(bandwidth).unwrap(),
                });
            }
        }
    }
    out
}

pub fn probe_times(obs: &[Observation]) -> Vec<f64> {
    let mut ts = vec![0.0, 5.0];
    for o in obs {
        ts.extend([o.z, o.z - 1e-9, o.z + 1e-9]);
    }
    ts
}
