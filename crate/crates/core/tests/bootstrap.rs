use lscure::kernel::sample_sd;
use lscure::{
    bootstrap_f_band, generate_dataset, BootstrapConfig, CureError, FittedCureModel, KernelSpec, ScoreFunction,
    SimulationConfig,
};

fn fitted(n: usize, index: u64) -> FittedCureModel {
    let config = SimulationConfig::new(n, 1, 0.75, 1.0 / 16.0, 77);
    let data = generate_dataset(&config, index).unwrap();
    let a = config.bandwidth.bandwidth(n, sample_sd(&data.sample.covariates()));
    FittedCureModel::fit(data.sample, KernelSpec::biweight(a).unwrap(), ScoreFunction::default()).unwrap()
}

fn config(replicates: usize, seed: u64) -> BootstrapConfig {
    BootstrapConfig {
        replicates,
        seed,
        grid_steps: 41,
        range: Some((-2.5, 1.5)),
        ..BootstrapConfig::default()
    }
}

#[test]
fn single_replicate_band_is_degenerate() {
    let model = fitted(100, 0);
    let band = bootstrap_f_band(&model, &config(1, 4)).unwrap();
    assert_eq!(band.replicates, 1);
    assert_eq!(band.lower, band.upper);
    assert_eq!(band.grid.len(), 41);
}

#[test]
fn band_is_ordered_and_bounded() {
    let model = fitted(100, 1);
    let band = bootstrap_f_band(&model, &config(60, 5)).unwrap();
    for i in 0..band.grid.len() {
        assert!(band.lower[i] <= band.upper[i]);
        assert!((0.0..=1.0).contains(&band.lower[i]) && (0.0..=1.0).contains(&band.upper[i]));
        assert!((0.0..=1.0).contains(&band.point[i]));
    }
    assert!(band.lower.windows(2).all(|w| w[0] <= w[1] + 1e-12));
    let width: f64 = band.lower.iter().zip(&band.upper).map(|(l, u)| u - l).sum();
    assert!(width > 0.0);
}

#[test]
fn bands_are_reproducible_under_any_worker_count() {
    let model = fitted(100, 2);
    let cfg = config(40, 6);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| bootstrap_f_band(&model, &cfg).unwrap())
    };
    let one = run(1);
    let four = run(4);
    assert_eq!(one, four);
    assert_eq!(one.lower.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), four.lower.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    let other = bootstrap_f_band(&model, &config(40, 7)).unwrap();
    assert_ne!(one.lower, other.lower);
}

#[test]
fn censoring_rate_is_reproduced() {
    let model = fitted(200, 3);
    let band = bootstrap_f_band(&model, &config(100, 8)).unwrap();
    let gap = (band.bootstrap_censored_fraction - band.sample_censored_fraction).abs();
    assert!(gap <= 0.05, "bootstrap {} vs sample {}", band.bootstrap_censored_fraction, band.sample_censored_fraction);
}

#[test]
fn invalid_configs_are_rejected() {
    let model = fitted(100, 0);
    let mut bad = config(10, 0);
    bad.level = 1.5;
    assert!(matches!(bootstrap_f_band(&model, &bad), Err(CureError::InvalidInput(_))));
    let zero = config(0, 0);
    assert!(matches!(bootstrap_f_band(&model, &zero), Err(CureError::InvalidInput(_))));
}
