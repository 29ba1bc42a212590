//! Laplacian-Gaussian mixture (LGM) modelling of signal-amplitude samples.
//!
//! * [`distributions`]: Laplacian, Gaussian and LGM densities, CDFs, quantiles, sampling.
//! * [`em`]: EM fitting of the mixture and closed-form single-component baselines.
//! * [`evaluation`]: empirical pdf, KL divergence, Q-Q goodness of fit, likelihood-ratio tests.
//! * [`ingestion`]: manifests, delimited trial files, highest-energy channel selection.
//! * [`report`]: per-trial evaluation reports and heatmap tables.
//! * [`commands`]: the `fit`, `batch`, `synth` and `eval` pipelines behind the `lgm` binary.

pub mod commands;
pub mod distributions;
pub mod em;
pub mod error;
pub mod evaluation;
pub mod ingestion;
pub mod report;
pub mod special;
pub mod stats;

pub use distributions::{Density, GaussianParams, LaplacianParams, LgmParams, ModelKind};
pub use em::{fit_gaussian, fit_laplacian, fit_lgm, EmConfig, FitResult};
pub use error::{Error, Result};
pub use stats::{Fitted, SampleHash};
