//! Gaussian-process surrogate: ARD kernels, MAP fitting, posterior
//! prediction, joint sampling and fantasy conditioning.
//!
//! Inputs are mapped to the unit cube and outputs standardized before any
//! kernel algebra happens; [`GpModel::posterior`] can map results back.

mod fit;
mod gp;
mod kernel;

pub use fit::{
    fit, fit_with_report, lengthscale_prior, log_marginal_likelihood, FitConfig, FitReport, LogNormalPrior,
    LOG_LENGTHSCALE_BOUNDS, LOG_NOISE_BOUNDS, LOG_OUTPUTSCALE_BOUNDS, NOISE_PRIOR, OUTPUTSCALE_PRIOR,
};
pub use gp::{Dataset, GpModel, OutputTransform, PosteriorPrediction, JITTER_LADDER};
pub use kernel::{KernelFamily, KernelParams};

/// Covariance between two inputs (unit-cube units).
pub fn kernel_eval(params: &KernelParams, x: &[f64], x2: &[f64]) -> crate::Result<f64> {
    params.eval(x, x2)
}
