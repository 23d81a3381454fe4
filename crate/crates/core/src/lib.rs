//! Fully nonparametric location-scale mixture cure model.
//!
//! Responses `Y = m(X) + s(X) e` are observed through right censoring, and a
//! covariate-dependent fraction `pi(X)` of subjects never experiences the
//! event. The crate estimates `pi`, `m`, `s` and the distribution `F` of `e`
//! from kernel-localized Beran product-limit fits:
//!
//! ```
//! use lscure::{estimate_f, FittedCureModel, KernelSpec, ScoreFunction, SurvivalSample};
//!
//! let sample = SurvivalSample::from_triples(&[
//!     (0.0, 1.0, true),
//!     (0.1, 1.8, true),
//!     (0.2, 2.4, false),
//!     (0.3, 2.9, true),
//!     (0.4, 3.6, false),
//! ])?;
//! let kernel = KernelSpec::biweight(0.35)?;
//! let model = FittedCureModel::fit(sample, kernel, ScoreFunction::default())?;
//! let cure = model.estimate_pi(0.2)?;
//! let f0 = estimate_f(&model, 0.0)?;
//! assert!((0.0..=1.0).contains(&cure) && (0.0..=1.0).contains(&f0));
//! # Ok::<(), lscure::CureError>(())
//! ```

pub mod beran;
pub mod bootstrap;
pub mod cure;
pub mod error;
pub mod error_dist;
pub mod io;
pub mod kernel;
pub mod rng;
pub mod sample;
pub mod score;
pub mod simulation;

pub use beran::{beran_censor, beran_q, beran_q_with, subdist_m, subdist_m1, Continuity};
pub use bootstrap::{bootstrap_f_band, BootstrapConfig, ConfidenceBand};
pub use cure::{estimate_tau0, FittedCureModel, LocalFit};
pub use error::{CureError, Result};
pub use error_dist::{estimate_f, estimate_f_grid, ErrorDistEstimate, ErrorDistribution};
pub use kernel::{default_bandwidth, kernel_eval, nw_weights, BandwidthRule, KernelFamily, KernelSpec};
pub use sample::{Observation, SurvivalSample, TiePolicy};
pub use score::{ScoreForm, ScoreFunction};
pub use simulation::{
    generate_dataset, run_monte_carlo, true_error_distribution, MonteCarloReport, SimulationConfig,
    TrueModel,
};
