//! Closed-form members: improvement-based and confidence-based.

use super::AcquisitionKind;
use crate::error::{Error, Result};
use crate::stats::{ei_h, log_ei_h, log_norm_cdf, log_norm_pdf, norm_cdf, norm_pdf};
use crate::surrogate::PosteriorPrediction;

/// Acquisition value and its partial derivatives with respect to the
/// predictive mean and standard deviation of `g`.
pub(crate) fn value_and_sensitivities(kind: AcquisitionKind, mu: f64, sigma: f64, tau: f64, kappa: f64) -> (f64, f64, f64) {
    use AcquisitionKind::*;
    let diff = mu - tau;
    if sigma <= 0.0 {
        return match kind {
            Pi => (step(diff), 0.0, 0.0),
            LogPi => (step(diff).ln(), 0.0, 0.0),
            Ei => (diff.max(0.0), if diff > 0.0 { 1.0 } else { 0.0 }, 0.0),
            LogEi => (diff.max(0.0).ln(), if diff > 0.0 { 1.0 / diff } else { 0.0 }, 0.0),
            Ucb | PosMean => (mu, 1.0, 0.0),
            PosStd => (0.0, 0.0, 0.0),
            _ => unreachable!("not a closed-form acquisition"),
        };
    }
    let z = diff / sigma;
    match kind {
        Pi => {
            let phi = norm_pdf(z);
            (norm_cdf(z), phi / sigma, -phi * z / sigma)
        }
        LogPi => {
            let log_cdf = log_norm_cdf(z);
            let ratio = (log_norm_pdf(z) - log_cdf).exp();
            (log_cdf, ratio / sigma, -ratio * z / sigma)
        }
        Ei => (sigma * ei_h(z), norm_cdf(z), norm_pdf(z)),
        LogEi => {
            let log_h = log_ei_h(z);
            let cdf_over_h = (log_norm_cdf(z) - log_h).exp();
            let pdf_over_h = (log_norm_pdf(z) - log_h).exp();
            (sigma.ln() + log_h, cdf_over_h / sigma, pdf_over_h / sigma)
        }
        Ucb => (mu + kappa * sigma, 1.0, kappa),
        PosMean => (mu, 1.0, 0.0),
        PosStd => (sigma, 0.0, 1.0),
        _ => unreachable!("not a closed-form acquisition"),
    }
}

fn step(diff: f64) -> f64 {
    if diff > 0.0 {
        1.0
    } else if diff == 0.0 {
        0.5
    } else {
        0.0
    }
}

/// PI, LogPI, EI or LogEI per query point. `prediction` is the posterior of
/// `g` and `incumbent` the target τ on the same scale.
pub fn eval_improvement(kind: AcquisitionKind, prediction: &PosteriorPrediction, incumbent: f64) -> Result<Vec<f64>> {
    use AcquisitionKind::*;
    if !matches!(kind, Pi | LogPi | Ei | LogEi) {
        return Err(Error::arg(format!("{kind} is not an improvement-based acquisition")));
    }
    Ok(evaluate(kind, prediction, incumbent, 1.0))
}

/// UCB, PosMean or PosSTD per query point.
pub fn eval_confidence(kind: AcquisitionKind, prediction: &PosteriorPrediction, kappa: f64) -> Result<Vec<f64>> {
    use AcquisitionKind::*;
    if !matches!(kind, Ucb | PosMean | PosStd) {
        return Err(Error::arg(format!("{kind} is not a confidence-based acquisition")));
    }
    if kind == Ucb && !(kappa > 0.0 && kappa.is_finite()) {
        return Err(Error::arg(format!("kappa must be positive, got {kappa}")));
    }
    Ok(evaluate(kind, prediction, 0.0, kappa))
}

fn evaluate(kind: AcquisitionKind, prediction: &PosteriorPrediction, tau: f64, kappa: f64) -> Vec<f64> {
    prediction
        .mean
        .iter()
        .zip(prediction.std())
        .map(|(&mu, sigma)| value_and_sensitivities(kind, mu, sigma, tau, kappa).0)
        .collect()
}

/// Value and gradient in unit coordinates, given the posterior of `f` and its
/// gradients at the query.
pub(crate) fn value_and_gradient(
    kind: AcquisitionKind,
    f_mean: f64,
    f_var: f64,
    d_mean: &[f64],
    d_var: &[f64],
    tau: f64,
    kappa: f64,
) -> (f64, Vec<f64>) {
    let sigma = f_var.max(0.0).sqrt();
    let (v, dmu, dsigma) = value_and_sensitivities(kind, -f_mean, sigma, tau, kappa);
    let grad = d_mean
        .iter()
        .zip(d_var)
        .map(|(&dm, &dv)| {
            let ds = if sigma > 1e-12 { dv / (2.0 * sigma) } else { 0.0 };
            -dmu * dm + dsigma * ds
        })
        .collect();
    (v, grad)
}
