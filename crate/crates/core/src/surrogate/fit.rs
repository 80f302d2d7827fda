//! Marginal likelihood and MAP hyperparameter fitting.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::gp::{check_coincident, factorize, kernel_matrix, Dataset, GpModel, OutputTransform};
use super::kernel::{KernelFamily, KernelParams};
use crate::error::{Error, Result};
use crate::optimize::{minimize_box, LbfgsConfig};
use crate::rng::Rng;

const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// Box for the optimizer, in log space.
pub const LOG_LENGTHSCALE_BOUNDS: (f64, f64) = (-6.0, 8.0);
pub const LOG_OUTPUTSCALE_BOUNDS: (f64, f64) = (-6.0, 6.0);
pub const LOG_NOISE_BOUNDS: (f64, f64) = (-12.0, 2.0);

/// Log-normal prior `LogNormal(loc, scale)` on a positive hyperparameter.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogNormalPrior {
    pub loc: f64,
    pub scale: f64,
}

impl LogNormalPrior {
    /// Log density at `exp(theta)` and its derivative with respect to `theta`.
    fn log_density(&self, theta: f64) -> (f64, f64) {
        let z = (theta - self.loc) / self.scale;
        let v = -theta - self.scale.ln() - 0.5 * LN_2PI - 0.5 * z * z;
        (v, -1.0 - z / self.scale)
    }

    fn sample(&self, rng: &mut Rng) -> f64 {
        Normal::new(self.loc, self.scale).expect("valid prior").sample(rng)
    }
}

/// Dimension-scaled lengthscale prior.
pub fn lengthscale_prior(dim: usize) -> LogNormalPrior {
    LogNormalPrior { loc: std::f64::consts::SQRT_2 + 0.5 * (dim as f64).ln(), scale: 3f64.sqrt() }
}

pub const OUTPUTSCALE_PRIOR: LogNormalPrior = LogNormalPrior { loc: 0.0, scale: 1.0 };
pub const NOISE_PRIOR: LogNormalPrior = LogNormalPrior { loc: -4.0, scale: 1.0 };

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub n_restarts: usize,
    pub family: KernelFamily,
    /// Fix the noise variance instead of learning it.
    pub fixed_noise: Option<f64>,
    /// Lower bound on the learned log-noise; raised when a fit fails.
    pub min_log_noise: f64,
    pub max_iters: usize,
    /// Previous hyperparameters, used as one extra start.
    #[serde(skip)]
    pub warm_start: Option<KernelParams>,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            n_restarts: 8,
            family: KernelFamily::Matern52,
            fixed_noise: None,
            min_log_noise: LOG_NOISE_BOUNDS.0,
            max_iters: 200,
            warm_start: None,
        }
    }
}

/// Diagnostics from a fit.
#[derive(Clone, Debug)]
pub struct FitReport {
    /// Log posterior (marginal likelihood plus log prior) at each start.
    pub initial_objectives: Vec<f64>,
    /// Log posterior at the returned hyperparameters.
    pub objective: f64,
}

/// Log marginal likelihood of the standardized values of `dataset` and its
/// gradient with respect to `[log ℓ₁ … log ℓ_D, log outputscale, log noise]`.
pub fn log_marginal_likelihood(params: &KernelParams, dataset: &Dataset) -> Result<(f64, Vec<f64>)> {
    params.validate()?;
    if dataset.is_empty() {
        return Err(Error::arg("log marginal likelihood of an empty dataset"));
    }
    if params.dim() != dataset.dim() {
        return Err(Error::arg("lengthscale count does not match dataset dimension"));
    }
    let xs = dataset.unit_points();
    let out = OutputTransform::fit(dataset.values());
    let y = DVector::from_iterator(dataset.len(), dataset.values().iter().map(|&v| out.forward(v)));
    lml_with_grad(params, &xs, &y)
}

pub(crate) fn lml_with_grad(params: &KernelParams, xs: &[Vec<f64>], y: &DVector<f64>) -> Result<(f64, Vec<f64>)> {
    let n = xs.len();
    let d = params.dim();
    check_coincident(xs, &vec![params.noise_variance; n])?;
    let kf = kernel_matrix(params, xs);
    let mut k = kf.clone();
    for i in 0..n {
        k[(i, i)] += params.noise_variance;
    }
    let factor = factorize(&k)?;
    let alpha = factor.chol.solve(y);
    let log_det: f64 = factor.chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>() * 2.0;
    let value = -0.5 * y.dot(&alpha) - 0.5 * log_det - 0.5 * n as f64 * LN_2PI;

    // W = ααᵀ − K⁻¹; ∂L/∂θ = ½ tr(W ∂K/∂θ)
    let kinv = factor.chol.inverse();
    let w: DMatrix<f64> = &alpha * alpha.transpose() - kinv;

    let mut grad = vec![0.0; d + 2];
    let inv_l2: Vec<f64> = params.lengthscales.iter().map(|l| 1.0 / (l * l)).collect();
    for i in 0..n {
        for j in 0..i {
            let r2 = params.scaled_sq_dist(&xs[i], &xs[j]);
            let (_, dk) = params.profile(r2);
            let wij = w[(i, j)];
            // symmetric pair counted twice, times the ½
            for (c, g) in grad.iter_mut().take(d).enumerate() {
                let delta = xs[i][c] - xs[j][c];
                *g += wij * dk * (-2.0 * delta * delta * inv_l2[c]);
            }
        }
    }
    let mut tr_wk = 0.0;
    let mut tr_w = 0.0;
    for i in 0..n {
        tr_w += w[(i, i)];
        for j in 0..n {
            tr_wk += w[(i, j)] * kf[(i, j)];
        }
    }
    grad[d] = 0.5 * tr_wk;
    grad[d + 1] = 0.5 * params.noise_variance * tr_w;
    Ok((value, grad))
}

struct Layout {
    dim: usize,
    learn_noise: bool,
}

impl Layout {
    fn len(&self) -> usize {
        self.dim + 1 + usize::from(self.learn_noise)
    }

    fn params(&self, theta: &[f64], family: KernelFamily, fixed_noise: f64) -> KernelParams {
        KernelParams {
            lengthscales: theta[..self.dim].iter().map(|t| t.exp()).collect(),
            outputscale: theta[self.dim].exp(),
            noise_variance: if self.learn_noise { theta[self.dim + 1].exp() } else { fixed_noise },
            family,
        }
    }
}

/// Negative log posterior and its gradient in the optimizer's coordinates.
fn neg_log_posterior(
    theta: &[f64],
    layout: &Layout,
    config: &FitConfig,
    xs: &[Vec<f64>],
    y: &DVector<f64>,
) -> Result<(f64, Vec<f64>)> {
    let params = layout.params(theta, config.family, config.fixed_noise.unwrap_or(0.0));
    let (lml, g) = lml_with_grad(&params, xs, y)?;
    let ls_prior = lengthscale_prior(layout.dim);
    let mut value = lml;
    let mut grad = vec![0.0; layout.len()];
    for c in 0..layout.dim {
        let (lp, dlp) = ls_prior.log_density(theta[c]);
        value += lp;
        grad[c] = g[c] + dlp;
    }
    let (lp, dlp) = OUTPUTSCALE_PRIOR.log_density(theta[layout.dim]);
    value += lp;
    grad[layout.dim] = g[layout.dim] + dlp;
    if layout.learn_noise {
        let (lp, dlp) = NOISE_PRIOR.log_density(theta[layout.dim + 1]);
        value += lp;
        grad[layout.dim + 1] = g[layout.dim + 1] + dlp;
    }
    Ok((-value, grad.into_iter().map(|v| -v).collect()))
}

/// MAP fit of the kernel hyperparameters: best of `n_restarts` bound-constrained
/// quasi-Newton runs (plus the warm start, if any).
pub fn fit(dataset: &Dataset, config: &FitConfig, rng: &mut Rng) -> Result<GpModel> {
    fit_with_report(dataset, config, rng).map(|(m, _)| m)
}

pub fn fit_with_report(dataset: &Dataset, config: &FitConfig, rng: &mut Rng) -> Result<(GpModel, FitReport)> {
    if dataset.len() < 2 {
        return Err(Error::arg("fitting needs at least two observations"));
    }
    let dim = dataset.dim();
    let layout = Layout { dim, learn_noise: config.fixed_noise.is_none() };
    let xs = dataset.unit_points();
    let out = OutputTransform::fit(dataset.values());
    let y = DVector::from_iterator(dataset.len(), dataset.values().iter().map(|&v| out.forward(v)));

    let min_noise = config.min_log_noise.clamp(LOG_NOISE_BOUNDS.0, LOG_NOISE_BOUNDS.1);
    let mut lower = vec![LOG_LENGTHSCALE_BOUNDS.0; dim];
    let mut upper = vec![LOG_LENGTHSCALE_BOUNDS.1; dim];
    lower.push(LOG_OUTPUTSCALE_BOUNDS.0);
    upper.push(LOG_OUTPUTSCALE_BOUNDS.1);
    if layout.learn_noise {
        lower.push(min_noise);
        upper.push(LOG_NOISE_BOUNDS.1);
    }

    let ls_prior = lengthscale_prior(dim);
    let mut starts: Vec<Vec<f64>> = Vec::with_capacity(config.n_restarts + 1);
    if let Some(prev) = config.warm_start.as_ref().filter(|p| p.dim() == dim) {
        let mut t: Vec<f64> = prev.lengthscales.iter().map(|l| l.ln()).collect();
        t.push(prev.outputscale.ln());
        if layout.learn_noise {
            t.push(prev.noise_variance.max(1e-300).ln());
        }
        starts.push(t);
    }
    for _ in 0..config.n_restarts {
        let mut t: Vec<f64> = (0..dim).map(|_| ls_prior.sample(rng)).collect();
        t.push(OUTPUTSCALE_PRIOR.sample(rng));
        if layout.learn_noise {
            t.push(NOISE_PRIOR.sample(rng));
        }
        starts.push(t);
    }
    for t in &mut starts {
        for ((v, &lo), &hi) in t.iter_mut().zip(&lower).zip(&upper) {
            *v = v.clamp(lo, hi);
        }
    }

    let lbfgs = LbfgsConfig { max_iters: config.max_iters, pg_tol: 1e-5, f_tol: 1e-10, ..Default::default() };
    let mut initial_objectives = Vec::with_capacity(starts.len());
    let mut results: Vec<(f64, Vec<f64>)> = Vec::new();
    let mut last_error = String::from("no restarts attempted");
    for start in &starts {
        let objective = |t: &[f64]| neg_log_posterior(t, &layout, config, &xs, &y).ok();
        match objective(start) {
            Some((f0, _)) => initial_objectives.push(-f0),
            None => {
                initial_objectives.push(f64::NEG_INFINITY);
                last_error = "objective not evaluable at the initial hyperparameters".into();
                continue;
            }
        }
        match minimize_box(objective, start, &lower, &upper, &lbfgs) {
            Ok(m) => results.push((m.value, m.x)),
            Err(e) => last_error = e.to_string(),
        }
    }

    results.sort_by(|a, b| a.0.total_cmp(&b.0));
    for (value, theta) in results {
        let params = layout.params(&theta, config.family, config.fixed_noise.unwrap_or(0.0));
        match GpModel::with_transform(dataset.clone(), params, out) {
            Ok(model) => {
                return Ok((model, FitReport { initial_objectives, objective: -value }));
            }
            Err(e) => last_error = e.to_string(),
        }
    }
    Err(Error::Fit(last_error))
}
