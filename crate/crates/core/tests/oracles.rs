//! Library estimators against brute-force references on every small fixture.

mod common;

use common::{distance_to_jump, fixtures, local, naive_censor, naive_q, probe_times, tau0, weights, OracleLocal};
use lscure::{beran_censor, beran_q, estimate_f, FittedCureModel, ScoreFunction};

const RIEMANN_POINTS: usize = 10_000_000;

#[test]
fn beran_matches_naive_product_limit() {
    for reversed in [false, true] {
        for fx in fixtures(1..=5, reversed) {
            let sample = fx.sample();
            for x0 in [0.0, 0.3, 0.5, 1.0] {
                let Some(w) = weights(&fx.obs, &fx.spec, x0) else {
                    continue;
                };
                for t in probe_times(&fx.obs) {
                    let lib = beran_q(&sample, &fx.spec, t, x0).unwrap();
                    let naive = naive_q(&fx.obs, &w, t);
                    assert!((lib - naive).abs() <= 1e-12, "Q({t}|{x0}) {lib} vs {naive}");
                    let lib_c = beran_censor(&sample, &fx.spec, t, x0).unwrap();
                    let naive_c = naive_censor(&fx.obs, &w, t);
                    assert!((lib_c - naive_c).abs() <= 1e-12, "G({t}|{x0}) {lib_c} vs {naive_c}");
                }
            }
        }
    }
}

#[test]
fn cure_fraction_matches_naive() {
    for fx in fixtures(1..=5, false) {
        let model = FittedCureModel::fit(fx.sample(), fx.spec, ScoreFunction::default()).unwrap();
        let tau = tau0(&fx.obs);
        for x0 in [0.0, 0.5, 1.0] {
            let Some(w) = weights(&fx.obs, &fx.spec, x0) else {
                continue;
            };
            let expected = 1.0 - naive_q(&fx.obs, &w, tau);
            let got = model.estimate_pi(x0).unwrap();
            assert!((got - expected).abs() <= 1e-12, "pi({x0}) {got} vs {expected}");
        }
    }
}

/// Returns whether a scale estimate was compared.
fn check_local(model: &FittedCureModel, oracle: &Option<OracleLocal>, x0: f64) -> bool {
    let fit = model.local_fit(x0);
    match oracle {
        None => {
            assert!(fit.is_err() || fit.unwrap().m().is_err());
            false
        }
        Some(o) => {
            let fit = fit.unwrap();
            let m = fit.m().unwrap();
            let v = fit.v().unwrap();
            assert!((m - o.m).abs() <= 1e-6, "m({x0}) {m} vs {}", o.m);
            assert!((v - o.v).abs() <= 1e-6, "v({x0}) {v} vs {}", o.v);
            match (fit.s(), o.s()) {
                (Ok(s), Some(so)) => {
                    assert!((s - so).abs() <= 1e-6, "s({x0}) {s} vs {so}");
                    true
                }
                (Err(_), None) => false,
                (lib, ora) => panic!("s({x0}) disagrees: {lib:?} vs {ora:?}"),
            }
        }
    }
}

#[test]
fn location_and_scale_match_riemann_sums() {
    let mut compared = 0;
    for fx in fixtures(3..=5, false) {
        let model = FittedCureModel::fit(fx.sample(), fx.spec, ScoreFunction::default()).unwrap();
        let xs: Vec<f64> = fx.obs.iter().map(|o| o.x).collect();
        let mut seen: Vec<f64> = Vec::new();
        for x0 in xs {
            if seen.contains(&x0) {
                continue;
            }
            seen.push(x0);
            let oracle = local(&fx.obs, &fx.spec, x0, common::default_j, RIEMANN_POINTS);
            compared += check_local(&model, &oracle, x0) as usize;
        }
    }
    assert!(compared > 100, "only {compared} scale comparisons");
}

#[test]
fn uniform_score_matches_riemann_sums() {
    let all = fixtures(5..=5, true);
    let fx = all
        .iter()
        .find(|f| f.spec.bandwidth < 1.0 && f.obs.iter().filter(|o| o.delta).count() == 4)
        .unwrap();
    let model = FittedCureModel::fit(fx.sample(), fx.spec, ScoreFunction::uniform()).unwrap();
    let mut compared = 0;
    for o in &fx.obs {
        let oracle = local(&fx.obs, &fx.spec, o.x, |_| 1.0, RIEMANN_POINTS);
        compared += check_local(&model, &oracle, o.x) as usize;
    }
    assert!(compared >= 3);
}

#[test]
fn error_distribution_matches_composition() {
    let ts: Vec<f64> = (0..=60).map(|i| -3.0 + 0.1 * i as f64).collect();
    let mut compared = 0;
    for fx in fixtures(4..=5, false).into_iter().filter(|f| f.spec.bandwidth < 1.0) {
        let model = FittedCureModel::fit(fx.sample(), fx.spec, ScoreFunction::default()).unwrap();
        let locals: Vec<Option<OracleLocal>> = fx
            .obs
            .iter()
            .map(|o| local(&fx.obs, &fx.spec, o.x, common::default_j, RIEMANN_POINTS))
            .collect();
        for &t in &ts {
            if distance_to_jump(&locals, &fx.obs, t) < 1e-5 {
                continue;
            }
            match (estimate_f(&model, t), common::f_hat(&fx.obs, &locals, t)) {
                (Ok(lib), Some(oracle)) => {
                    assert!((lib - oracle).abs() <= 1e-6, "F({t}) {lib} vs {oracle}");
                    compared += (oracle > 0.0 && oracle < 1.0) as usize;
                }
                (Err(_), None) => {}
                (lib, oracle) => panic!("F({t}) disagrees: {lib:?} vs {oracle:?}"),
            }
        }
    }
    assert!(compared > 200, "only {compared} interior comparisons");
}
