//! Exact GP regression on unit-cube inputs and standardized outputs.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::kernel::KernelParams;
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::space::{sq_dist, Bounds};

/// Diagonal jitter tried, in order, when a covariance is not numerically
/// positive definite.
pub const JITTER_LADDER: [f64; 5] = [1e-8, 1e-7, 1e-6, 1e-5, 1e-4];

/// Observations in original domain and objective units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    points: Vec<Vec<f64>>,
    values: Vec<f64>,
    bounds: Bounds,
}

impl Dataset {
    pub fn new(points: Vec<Vec<f64>>, values: Vec<f64>, bounds: Bounds) -> Result<Self> {
        if points.len() != values.len() {
            return Err(Error::arg(format!("{} points but {} values", points.len(), values.len())));
        }
        for (i, p) in points.iter().enumerate() {
            if !bounds.contains(p) {
                return Err(Error::arg(format!("point {i} lies outside the bounds or has wrong dimension")));
            }
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::arg(format!("non-finite objective value {v}")));
        }
        Ok(Dataset { points, values, bounds })
    }

    pub fn empty(bounds: Bounds) -> Self {
        Dataset { points: Vec::new(), values: Vec::new(), bounds }
    }

    pub fn push(&mut self, point: Vec<f64>, value: f64) -> Result<()> {
        if !self.bounds.contains(&point) {
            return Err(Error::arg("point lies outside the bounds or has wrong dimension"));
        }
        if !value.is_finite() {
            return Err(Error::arg(format!("non-finite objective value {value}")));
        }
        self.points.push(point);
        self.values.push(value);
        Ok(())
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    pub fn dim(&self) -> usize {
        self.bounds.dim()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn unit_points(&self) -> Vec<Vec<f64>> {
        self.points.iter().map(|p| self.bounds.to_unit(p)).collect()
    }
}

/// Affine standardization of objective values.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputTransform {
    pub mean: f64,
    pub std: f64,
}

impl OutputTransform {
    /// Mean and population standard deviation; a zero spread maps to 1.
    pub fn fit(values: &[f64]) -> Self {
        if values.is_empty() {
            return OutputTransform { mean: 0.0, std: 1.0 };
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let std = var.sqrt();
        let std = if std > 0.0 && std.is_finite() { std } else { 1.0 };
        OutputTransform { mean, std }
    }

    pub fn forward(&self, y: f64) -> f64 {
        (y - self.mean) / self.std
    }

    pub fn inverse(&self, z: f64) -> f64 {
        z * self.std + self.mean
    }
}

/// Posterior mean and variance per query point.
#[derive(Clone, Debug, PartialEq)]
pub struct PosteriorPrediction {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
}

impl PosteriorPrediction {
    pub fn std(&self) -> Vec<f64> {
        self.variance.iter().map(|v| v.max(0.0).sqrt()).collect()
    }
}

pub(crate) struct Factor {
    pub chol: Cholesky<f64, Dyn>,
    pub jitter: f64,
}

/// Cholesky with the jitter ladder.
pub(crate) fn factorize(k: &DMatrix<f64>) -> Result<Factor> {
    if let Some(chol) = Cholesky::new(k.clone()) {
        return Ok(Factor { chol, jitter: 0.0 });
    }
    let n = k.nrows();
    for &j in &JITTER_LADDER {
        let mut kj = k.clone();
        for i in 0..n {
            kj[(i, i)] += j;
        }
        if let Some(chol) = Cholesky::new(kj) {
            return Ok(Factor { chol, jitter: j });
        }
    }
    Err(Error::Numerical {
        message: format!("{n}x{n} covariance is not positive definite"),
        jitter: JITTER_LADDER[JITTER_LADDER.len() - 1],
    })
}

/// Rejects coincident inputs that carry no observation noise: the joint
/// covariance of such a pair is exactly singular.
pub(crate) fn check_coincident(xs: &[Vec<f64>], noise: &[f64]) -> Result<()> {
    for i in 0..xs.len() {
        for j in 0..i {
            if noise[i] + noise[j] == 0.0 && sq_dist(&xs[i], &xs[j]) <= 1e-24 {
                return Err(Error::Numerical {
                    message: format!("singular covariance: inputs {j} and {i} coincide with zero noise"),
                    jitter: JITTER_LADDER[JITTER_LADDER.len() - 1],
                });
            }
        }
    }
    Ok(())
}

pub(crate) fn kernel_matrix(params: &KernelParams, xs: &[Vec<f64>]) -> DMatrix<f64> {
    let n = xs.len();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        k[(i, i)] = params.outputscale;
        for j in 0..i {
            let v = params.cov(&xs[i], &xs[j]);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

/// A fitted surrogate. Immutable once built.
#[derive(Clone, Debug)]
pub struct GpModel {
    dataset: Dataset,
    params: KernelParams,
    output: OutputTransform,
    xs: Vec<Vec<f64>>,
    y: DVector<f64>,
    noise: Vec<f64>,
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
    jitter: f64,
}

impl GpModel {
    /// Builds the posterior for `dataset` under fixed hyperparameters,
    /// standardizing outputs from the data.
    pub fn new(dataset: Dataset, params: KernelParams) -> Result<Self> {
        let output = OutputTransform::fit(dataset.values());
        Self::with_transform(dataset, params, output)
    }

    /// Same as [`GpModel::new`] but with a caller-supplied output transform.
    pub fn with_transform(dataset: Dataset, params: KernelParams, output: OutputTransform) -> Result<Self> {
        params.validate()?;
        if params.dim() != dataset.dim() {
            return Err(Error::arg(format!(
                "{} lengthscales for a {}-dimensional dataset",
                params.dim(),
                dataset.dim()
            )));
        }
        if dataset.is_empty() {
            return Err(Error::arg("cannot build a GP on an empty dataset"));
        }
        let xs = dataset.unit_points();
        let y = DVector::from_iterator(dataset.len(), dataset.values().iter().map(|&v| output.forward(v)));
        let noise = vec![params.noise_variance; dataset.len()];
        Self::assemble(dataset, params, output, xs, y, noise)
    }

    fn assemble(
        dataset: Dataset,
        params: KernelParams,
        output: OutputTransform,
        xs: Vec<Vec<f64>>,
        y: DVector<f64>,
        noise: Vec<f64>,
    ) -> Result<Self> {
        check_coincident(&xs, &noise)?;
        let mut k = kernel_matrix(&params, &xs);
        for (i, nv) in noise.iter().enumerate() {
            k[(i, i)] += nv;
        }
        let Factor { chol, jitter } = factorize(&k)?;
        let alpha = chol.solve(&y);
        Ok(GpModel { dataset, params, output, xs, y, noise, chol, alpha, jitter })
    }

    pub fn dataset(&self) -> &Dataset {
        &self.dataset
    }

    pub fn params(&self) -> &KernelParams {
        &self.params
    }

    pub fn output_transform(&self) -> OutputTransform {
        self.output
    }

    pub fn bounds(&self) -> &Bounds {
        self.dataset.bounds()
    }

    pub fn dim(&self) -> usize {
        self.dataset.dim()
    }

    /// Jitter that had to be added to the diagonal to factorize.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Lower Cholesky factor of `K + noise·I` (plus jitter).
    pub fn cholesky_factor(&self) -> DMatrix<f64> {
        self.chol.l()
    }

    /// `K + noise·I` without jitter, as the factor is meant to reproduce.
    pub fn covariance_matrix(&self) -> DMatrix<f64> {
        let mut k = kernel_matrix(&self.params, &self.xs);
        for (i, nv) in self.noise.iter().enumerate() {
            k[(i, i)] += nv;
        }
        k
    }

    /// Standardized targets the model was conditioned on.
    pub fn standardized_targets(&self) -> &DVector<f64> {
        &self.y
    }

    /// `L⁻¹·y`, so that the posterior mean at `U` is `whitened_cross(U)ᵀ·L⁻¹y`.
    pub(crate) fn whitened_targets(&self) -> DVector<f64> {
        self.chol.l_dirty().solve_lower_triangular(&self.y).expect("triangular solve")
    }

    /// `L⁻¹·K(X, U)` for a batch of unit-cube queries.
    pub(crate) fn whitened_cross(&self, us: &[Vec<f64>]) -> DMatrix<f64> {
        let n = self.xs.len();
        let mut kxu = DMatrix::zeros(n, us.len());
        for (j, u) in us.iter().enumerate() {
            for (i, x) in self.xs.iter().enumerate() {
                kxu[(i, j)] = self.params.cov(u, x);
            }
        }
        self.chol.l_dirty().solve_lower_triangular(&kxu).unwrap_or_else(|| {
            // L has a strictly positive diagonal, so the solve cannot fail.
            unreachable!("triangular solve with a Cholesky factor")
        })
    }

    /// Posterior mean and variance with their gradients in unit coordinates.
    pub(crate) fn predict_unit_grad(&self, u: &[f64]) -> (f64, f64, Vec<f64>, Vec<f64>) {
        let d = u.len();
        let n = self.xs.len();
        let mut k = DVector::zeros(n);
        let mut jac = DMatrix::zeros(n, d);
        for (i, x) in self.xs.iter().enumerate() {
            let (ki, gi) = self.params.grad_x(u, x);
            k[i] = ki;
            for (c, g) in gi.into_iter().enumerate() {
                jac[(i, c)] = g;
            }
        }
        let mean = k.dot(&self.alpha);
        let w = self.chol.solve(&k);
        let var_raw = self.params.outputscale - k.dot(&w);
        let dmean = jac.tr_mul(&self.alpha);
        let dvar = jac.tr_mul(&w) * -2.0;
        let (var, dvar) = if var_raw > 0.0 { (var_raw, dvar.as_slice().to_vec()) } else { (0.0, vec![0.0; d]) };
        (mean, var, dmean.as_slice().to_vec(), dvar)
    }

    /// Latent posterior for a batch of unit-cube queries (standardized units).
    pub(crate) fn predict_batch_unit(&self, us: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
        if us.is_empty() {
            return (Vec::new(), Vec::new());
        }
        let v = self.whitened_cross(us);
        // K(X,U)ᵀ α = (L⁻¹K)ᵀ (L⁻¹ y)
        let ly = self.whitened_targets();
        let means = v.tr_mul(&ly);
        let vars = (0..us.len())
            .map(|j| (self.params.outputscale - v.column(j).norm_squared()).max(0.0))
            .collect();
        (means.as_slice().to_vec(), vars)
    }

    /// Joint latent posterior over a batch of unit-cube queries.
    pub(crate) fn joint_unit(&self, us: &[Vec<f64>]) -> (DVector<f64>, DMatrix<f64>) {
        let v = self.whitened_cross(us);
        let ly = self.whitened_targets();
        let mean = v.tr_mul(&ly);
        let mut cov = kernel_matrix(&self.params, us);
        cov -= v.tr_mul(&v);
        // symmetrize against rounding
        let m = us.len();
        for i in 0..m {
            for j in 0..i {
                let s = 0.5 * (cov[(i, j)] + cov[(j, i)]);
                cov[(i, j)] = s;
                cov[(j, i)] = s;
            }
        }
        (mean, cov)
    }

    /// Posterior at points in original domain units. Points outside the
    /// bounds are clamped with a warning.
    pub fn posterior(&self, points: &[Vec<f64>], destandardize: bool) -> Result<PosteriorPrediction> {
        let us = self.to_unit_checked(points)?;
        let (mut mean, mut variance) = self.predict_batch_unit(&us);
        if destandardize {
            let OutputTransform { mean: m, std } = self.output;
            mean.iter_mut().for_each(|v| *v = *v * std + m);
            variance.iter_mut().for_each(|v| *v *= std * std);
        }
        Ok(PosteriorPrediction { mean, variance })
    }

    pub(crate) fn to_unit_checked(&self, points: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let b = self.bounds();
        points
            .iter()
            .map(|p| {
                if p.len() != b.dim() {
                    return Err(Error::arg(format!("query has dimension {} but model has {}", p.len(), b.dim())));
                }
                if !b.contains(p) {
                    tracing::warn!("query point outside bounds, clamping");
                    return Ok(b.to_unit(&b.clamp(p)));
                }
                Ok(b.to_unit(p))
            })
            .collect()
    }

    /// Exact joint posterior draws (rows = samples, columns = candidates).
    pub fn sample_joint(
        &self,
        candidates: &[Vec<f64>],
        n_samples: usize,
        destandardize: bool,
        rng: &mut Rng,
    ) -> Result<Vec<Vec<f64>>> {
        if candidates.is_empty() {
            return Err(Error::arg("sample_joint needs at least one candidate"));
        }
        let us = self.to_unit_checked(candidates)?;
        let mut draws = self.sample_joint_unit(&us, n_samples, rng)?;
        if destandardize {
            for row in &mut draws {
                row.iter_mut().for_each(|v| *v = self.output.inverse(*v));
            }
        }
        Ok(draws)
    }

    pub(crate) fn sample_joint_unit(&self, us: &[Vec<f64>], n_samples: usize, rng: &mut Rng) -> Result<Vec<Vec<f64>>> {
        let (mean, cov) = self.joint_unit(us);
        sample_mvn(&mean, &cov, self.params.outputscale, n_samples, rng)
    }

    /// Conditions on extra noiseless observations (objective units) without
    /// refitting hyperparameters or the output transform.
    pub fn condition(&self, extra_points: &[Vec<f64>], extra_values: &[f64]) -> Result<GpModel> {
        if extra_points.len() != extra_values.len() {
            return Err(Error::arg("extra points and values differ in length"));
        }
        if extra_points.is_empty() {
            return Ok(self.clone());
        }
        let us = self.to_unit_checked(extra_points)?;
        let ys: Vec<f64> = extra_values.iter().map(|&v| self.output.forward(v)).collect();
        let mut dataset = self.dataset.clone();
        for (p, &v) in extra_points.iter().zip(extra_values) {
            dataset.push(self.bounds().clamp(p), v)?;
        }
        self.extend_unit(dataset, &us, &ys)
    }

    fn extend_unit(&self, dataset: Dataset, us: &[Vec<f64>], ys: &[f64]) -> Result<GpModel> {
        let mut xs = self.xs.clone();
        xs.extend(us.iter().cloned());
        let mut y = self.y.as_slice().to_vec();
        y.extend_from_slice(ys);
        let mut noise = self.noise.clone();
        noise.extend(std::iter::repeat_n(0.0, us.len()));
        Self::assemble(dataset, self.params.clone(), self.output, xs, DVector::from_vec(y), noise)
    }
}

/// Lower factor `L` with `L·Lᵀ ≈ cov` for a positive semi-definite matrix.
///
/// `scale` is the variance the entries are measured against (the prior
/// variance for a GP posterior). Pivots below `1e-12·scale` are treated as
/// exact zeros (their column is dropped), which keeps degenerate directions
/// exactly degenerate. A pivot below `-1e-8·scale` means the matrix is
/// indefinite; the jitter ladder is then applied before giving up.
pub(crate) fn psd_factor(cov: &DMatrix<f64>, scale: f64) -> Result<DMatrix<f64>> {
    let m = cov.nrows();
    let max_diag = (0..m).map(|i| cov[(i, i)]).fold(0.0, f64::max);
    let scale = scale.max(max_diag).max(f64::MIN_POSITIVE);
    let tol = 1e-12 * scale;
    let try_factor = |jitter: f64| -> Option<DMatrix<f64>> {
        let mut a = cov.clone();
        for i in 0..m {
            a[(i, i)] += jitter;
        }
        let data = a.as_mut_slice();
        for k in 0..m {
            let d = data[k + k * m];
            if d > tol {
                let l = d.sqrt();
                data[k + k * m] = l;
                for i in k + 1..m {
                    data[i + k * m] /= l;
                }
            } else if d >= -1e-8 * scale {
                for i in k..m {
                    data[i + k * m] = 0.0;
                }
            } else {
                return None;
            }
            for j in k + 1..m {
                let ajk = data[j + k * m];
                if ajk != 0.0 {
                    for i in j..m {
                        data[i + j * m] -= data[i + k * m] * ajk;
                    }
                }
            }
        }
        for j in 0..m {
            for i in 0..j {
                data[i + j * m] = 0.0;
            }
        }
        Some(a)
    };
    std::iter::once(0.0)
        .chain(JITTER_LADDER.iter().map(|j| j * scale))
        .find_map(try_factor)
        .ok_or_else(|| Error::Numerical {
            message: format!("{m}x{m} predictive covariance is indefinite"),
            jitter: JITTER_LADDER[JITTER_LADDER.len() - 1],
        })
}

/// Draws from `N(mean, cov)`.
pub(crate) fn sample_mvn(
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    scale: f64,
    n_samples: usize,
    rng: &mut Rng,
) -> Result<Vec<Vec<f64>>> {
    let m = mean.len();
    let l = psd_factor(cov, scale)?;
    let mut out = Vec::with_capacity(n_samples);
    let mut z = DVector::zeros(m);
    for _ in 0..n_samples {
        for v in z.iter_mut() {
            *v = StandardNormal.sample(rng);
        }
        let draw = mean + &l * &z;
        out.push(draw.as_slice().to_vec());
    }
    Ok(out)
}
