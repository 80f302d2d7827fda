//! Sampling-based members: Thompson sampling, knowledge gradient and the
//! entropy-search family.
//!
//! Conditioning on a single noiseless observation is a rank-one update of
//! the posterior, so KG fantasies and PES/JES optimizer samples are applied
//! in closed form instead of refactorizing the model for each one.

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use super::{argmax, observed_best_g, AcqContext};
use crate::error::{Error, Result};
use crate::lowdisc;
use crate::rng::{derived, Rng};
use crate::stats::{gaussian_entropy, log_norm_cdf, log_norm_pdf, upper_truncated_entropy};
use crate::surrogate::{GpModel, PosteriorPrediction};

/// Variances below this are raised to it before taking entropies.
pub const ENTROPY_VARIANCE_FLOOR: f64 = 1e-12;

/// Optimizer samples whose own variance is below this are skipped: they sit
/// on a noiseless observation and carry no information.
const MIN_CONDITIONING_VARIANCE: f64 = 1e-10;

/// Margin by which extreme-value samples must exceed the incumbent.
pub const EXTREME_VALUE_MARGIN: f64 = 1e-6;

const KG_TAG: u64 = 0x4b47;

fn unit_queries(model: &GpModel, points: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    if points.is_empty() {
        return Err(Error::arg("at least one candidate is required"));
    }
    model.to_unit_checked(points)
}

/// Prior covariance between a unit query and each column of a whitened
/// cross-covariance, minus the explained part: the posterior covariance.
fn posterior_cov_with(model: &GpModel, u: &[f64], v_u: &DVector<f64>, others: &[Vec<f64>], v_others: &DMatrix<f64>) -> Vec<f64> {
    let explained = v_others.tr_mul(v_u);
    others
        .iter()
        .enumerate()
        .map(|(j, o)| model.params().cov(u, o) - explained[j])
        .collect()
}

/// One joint posterior draw over the candidates; returns the maximizer of
/// the drawn `g` (ties to the lowest index).
pub fn select_thompson(model: &GpModel, candidates: &[Vec<f64>], rng: &mut Rng) -> Result<Vec<f64>> {
    let us = unit_queries(model, candidates)?;
    if us.len() == 1 {
        return Ok(candidates[0].clone());
    }
    let draw = model.sample_joint_unit(&us, 1, rng)?.remove(0);
    let g: Vec<f64> = draw.iter().map(|v| -v).collect();
    let best = argmax(&g).ok_or_else(|| Error::Evaluation("Thompson draw is not finite".into()))?;
    Ok(candidates[best].clone())
}

/// `n` joint draws over the candidates, each reduced to its maximizer and the
/// drawn maximum of `g`.
pub fn sample_optimum_pairs(
    model: &GpModel,
    candidates: &[Vec<f64>],
    n: usize,
    rng: &mut Rng,
) -> Result<Vec<(Vec<f64>, f64)>> {
    let us = unit_queries(model, candidates)?;
    let draws = model.sample_joint_unit(&us, n, rng)?;
    draws
        .into_iter()
        .map(|row| {
            let g: Vec<f64> = row.iter().map(|v| -v).collect();
            let i = argmax(&g).ok_or_else(|| Error::Evaluation("posterior draw is not finite".into()))?;
            Ok((candidates[i].clone(), g[i]))
        })
        .collect()
}

/// Knowledge gradient with a fixed inner candidate set and common fantasy
/// draws. The query point itself always joins the inner set.
pub struct KnowledgeGradient<'a> {
    model: &'a GpModel,
    inner: Vec<Vec<f64>>,
    inner_whitened: DMatrix<f64>,
    inner_mean: Vec<f64>,
    whitened_targets: DVector<f64>,
    fantasies: Vec<f64>,
}

impl<'a> KnowledgeGradient<'a> {
    /// Fantasy draws come in antithetic pairs (an odd count leaves one
    /// unpaired), which keeps the estimate non-negative.
    pub fn new(model: &'a GpModel, inner_points: &[Vec<f64>], n_fantasies: usize, rng: &mut Rng) -> Result<Self> {
        if n_fantasies == 0 {
            return Err(Error::arg("at least one fantasy is required"));
        }
        let inner = unit_queries(model, inner_points)?;
        let mut fantasies = Vec::with_capacity(n_fantasies);
        while fantasies.len() < n_fantasies {
            let e: f64 = StandardNormal.sample(rng);
            fantasies.push(e);
            if fantasies.len() < n_fantasies {
                fantasies.push(-e);
            }
        }
        Ok(Self::from_unit(model, inner, fantasies))
    }

    pub(crate) fn from_unit(model: &'a GpModel, inner: Vec<Vec<f64>>, fantasies: Vec<f64>) -> Self {
        let inner_whitened = model.whitened_cross(&inner);
        let whitened_targets = model.whitened_targets();
        let inner_mean = inner_whitened.tr_mul(&whitened_targets).iter().map(|v| -v).collect();
        KnowledgeGradient { model, inner, inner_whitened, inner_mean, whitened_targets, fantasies }
    }

    /// Standard-normal fantasy draws for `g(x)`.
    pub fn fantasies(&self) -> &[f64] {
        &self.fantasies
    }

    pub fn value(&self, x: &[f64]) -> Result<f64> {
        let u = unit_queries(self.model, &[x.to_vec()])?;
        Ok(self.value_unit(&u[0]))
    }

    pub(crate) fn value_unit(&self, u: &[f64]) -> f64 {
        let v_u = self.model.whitened_cross(&[u.to_vec()]).column(0).into_owned();
        let var = self.model.params().outputscale - v_u.norm_squared();
        if var < MIN_CONDITIONING_VARIANCE {
            return 0.0;
        }
        let sigma = var.sqrt();
        let mean_u = -v_u.dot(&self.whitened_targets);
        let cov = posterior_cov_with(self.model, u, &v_u, &self.inner, &self.inner_whitened);
        let base = self.inner_mean.iter().copied().fold(mean_u, f64::max);
        let total: f64 = self
            .fantasies
            .iter()
            .map(|&e| {
                self.inner_mean
                    .iter()
                    .zip(&cov)
                    .map(|(m, c)| m + c / sigma * e)
                    .fold(mean_u + sigma * e, f64::max)
            })
            .sum();
        total / self.fantasies.len() as f64 - base
    }
}

/// KG at `x` with the context's inner-set size and fantasy count, drawn from
/// the context seed.
pub fn eval_kg(ctx: &AcqContext<'_>, x: &[f64]) -> Result<f64> {
    let mut rng = derived(ctx.seed, &[KG_TAG]);
    let inner = lowdisc::points_in(ctx.model.bounds(), ctx.mc.kg_inner, &mut rng);
    KnowledgeGradient::new(ctx.model, &inner, ctx.mc.kg_fantasies, &mut rng)?.value(x)
}

/// Gumbel approximation to the distribution of `max g` over the candidates,
/// fitted by matching the quartiles of `Π Φ((y − μᵢ)/σᵢ)`, then sampled.
/// Every sample is at least the observed best plus [`EXTREME_VALUE_MARGIN`].
pub fn sample_extreme_values(model: &GpModel, candidates: &[Vec<f64>], n: usize, rng: &mut Rng) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::arg("at least one extreme-value sample is required"));
    }
    let us = unit_queries(model, candidates)?;
    let (f_mean, var) = model.predict_batch_unit(&us);
    let mean: Vec<f64> = f_mean.iter().map(|v| -v).collect();
    let sd: Vec<f64> = var.iter().map(|v| v.max(0.0).sqrt()).collect();
    let floor = observed_best_g(model) + EXTREME_VALUE_MARGIN;

    let (q25, q50, q75) = (max_quantile(&mean, &sd, 0.25), max_quantile(&mean, &sd, 0.5), max_quantile(&mean, &sd, 0.75));
    let loglog = |p: f64| (-p.ln()).ln();
    let scale = ((q75 - q25) / (loglog(0.25) - loglog(0.75))).max(0.0);
    let loc = q50 + scale * loglog(0.5);
    Ok((0..n)
        .map(|_| {
            let u: f64 = rng.random_range(f64::MIN_POSITIVE..1.0);
            (loc - scale * loglog(u)).max(floor)
        })
        .collect())
}

fn log_cdf_of_max(mean: &[f64], sd: &[f64], y: f64) -> f64 {
    mean.iter()
        .zip(sd)
        .map(|(&m, &s)| {
            if s > 1e-12 {
                log_norm_cdf((y - m) / s)
            } else if y >= m {
                0.0
            } else {
                f64::NEG_INFINITY
            }
        })
        .sum()
}

/// `y` with `Π Φ((y − μᵢ)/σᵢ) = p`, by bisection.
fn max_quantile(mean: &[f64], sd: &[f64], p: f64) -> f64 {
    let target = p.ln();
    let top = mean.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let spread = sd.iter().copied().fold(0.0, f64::max);
    if spread <= 1e-12 {
        return top;
    }
    let mut hi = mean.iter().zip(sd).map(|(m, s)| m + 10.0 * s).fold(f64::NEG_INFINITY, f64::max);
    let mut step = spread;
    let mut lo = top - step;
    while log_cdf_of_max(mean, sd, lo) > target && step < 1e12 {
        step *= 2.0;
        lo = top - step;
    }
    while log_cdf_of_max(mean, sd, hi) < target && hi - top < 1e12 {
        hi += spread;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if log_cdf_of_max(mean, sd, mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * (1.0 + mid.abs()) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Max-value entropy search per query point, from the posterior of `g` and
/// samples of `max g`.
pub fn eval_mes(prediction: &PosteriorPrediction, extreme_samples: &[f64]) -> Result<Vec<f64>> {
    if extreme_samples.is_empty() {
        return Err(Error::arg("at least one extreme-value sample is required"));
    }
    Ok(prediction
        .mean
        .iter()
        .zip(prediction.std())
        .map(|(&mu, sigma)| mes_value(mu, sigma, extreme_samples))
        .collect())
}

pub(crate) fn mes_value(mu: f64, sigma: f64, samples: &[f64]) -> f64 {
    if sigma <= 0.0 {
        return 0.0;
    }
    let total: f64 = samples
        .iter()
        .map(|&y| {
            let gamma = (y - mu) / sigma;
            let log_cdf = log_norm_cdf(gamma);
            let ratio = (log_norm_pdf(gamma) - log_cdf).exp();
            0.5 * gamma * ratio - log_cdf
        })
        .sum();
    total / samples.len() as f64
}

struct OptimumSample {
    u: Vec<f64>,
    var: f64,
    mean: f64,
    value: f64,
}

/// Shared state for PES and JES: sampled optimizers (and values), their
/// whitened cross-covariances and posterior moments.
pub(crate) struct EntropySearch<'a> {
    model: &'a GpModel,
    samples: Vec<OptimumSample>,
    stars: Vec<Vec<f64>>,
    stars_whitened: DMatrix<f64>,
    whitened_targets: DVector<f64>,
    truncate: bool,
}

impl<'a> EntropySearch<'a> {
    pub(crate) fn new(model: &'a GpModel, pairs: &[(Vec<f64>, f64)], truncate: bool) -> Result<Self> {
        let points: Vec<Vec<f64>> = pairs.iter().map(|(p, _)| p.clone()).collect();
        let us = unit_queries(model, &points)?;
        let (f_mean, var) = model.predict_batch_unit(&us);
        let samples: Vec<OptimumSample> = us
            .into_iter()
            .zip(pairs)
            .zip(f_mean.iter().zip(&var))
            .filter(|(_, (_, &v))| v >= MIN_CONDITIONING_VARIANCE)
            .map(|((u, (_, value)), (m, &v))| OptimumSample { u, var: v, mean: -m, value: *value })
            .collect();
        if samples.is_empty() {
            return Err(Error::Evaluation("every optimizer sample sits on a noiseless observation".into()));
        }
        let stars: Vec<Vec<f64>> = samples.iter().map(|s| s.u.clone()).collect();
        let stars_whitened = model.whitened_cross(&stars);
        Ok(EntropySearch { model, samples, stars, stars_whitened, whitened_targets: model.whitened_targets(), truncate })
    }

    pub(crate) fn value_unit(&self, u: &[f64]) -> f64 {
        let v_u = self.model.whitened_cross(&[u.to_vec()]).column(0).into_owned();
        let var = self.model.params().outputscale - v_u.norm_squared();
        if var <= ENTROPY_VARIANCE_FLOOR {
            return 0.0;
        }
        let mean = -v_u.dot(&self.whitened_targets);
        let cov = posterior_cov_with(self.model, u, &v_u, &self.stars, &self.stars_whitened);
        let before = gaussian_entropy(var);
        let after: f64 = self
            .samples
            .iter()
            .zip(&cov)
            .map(|(s, &c)| {
                let var_after = (var - c * c / s.var).max(ENTROPY_VARIANCE_FLOOR);
                if self.truncate {
                    let mean_after = mean + c / s.var * (s.value - s.mean);
                    upper_truncated_entropy(mean_after, var_after.sqrt(), s.value)
                } else {
                    gaussian_entropy(var_after)
                }
            })
            .sum::<f64>()
            / self.samples.len() as f64;
        (before - after).max(0.0)
    }
}

/// Predictive entropy search at `x` given sampled optimizer locations.
pub fn eval_pes(ctx: &AcqContext<'_>, x: &[f64], optimizer_samples: &[Vec<f64>]) -> Result<f64> {
    let pairs: Vec<(Vec<f64>, f64)> = optimizer_samples.iter().map(|p| (p.clone(), f64::INFINITY)).collect();
    let es = EntropySearch::new(ctx.model, &pairs, false)?;
    let u = unit_queries(ctx.model, &[x.to_vec()])?;
    Ok(es.value_unit(&u[0]))
}

/// Joint entropy search at `x` given sampled `(x*, y*)` pairs, `y*` on the
/// standardized `g` scale.
pub fn eval_jes(ctx: &AcqContext<'_>, x: &[f64], optimum_pairs: &[(Vec<f64>, f64)]) -> Result<f64> {
    let es = EntropySearch::new(ctx.model, optimum_pairs, true)?;
    let u = unit_queries(ctx.model, &[x.to_vec()])?;
    Ok(es.value_unit(&u[0]))
}

/// Posterior of `g` at unit queries.
pub(crate) fn predict_g_unit(model: &GpModel, us: &[Vec<f64>]) -> PosteriorPrediction {
    let (mean, variance) = model.predict_batch_unit(us);
    PosteriorPrediction { mean: mean.into_iter().map(|v| -v).collect(), variance }
}

