//! Stationary ARD kernels.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    #[default]
    Matern52,
    SquaredExponential,
}

/// Kernel hyperparameters. Lengthscales live in unit-cube input units, the
/// outputscale and noise in standardized-output variance units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub lengthscales: Vec<f64>,
    pub outputscale: f64,
    pub noise_variance: f64,
    #[serde(default)]
    pub family: KernelFamily,
}

const SQRT5: f64 = 2.236_067_977_499_79;

impl KernelParams {
    pub fn new(lengthscales: Vec<f64>, outputscale: f64, noise_variance: f64, family: KernelFamily) -> Result<Self> {
        let p = KernelParams { lengthscales, outputscale, noise_variance, family };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.lengthscales.is_empty() {
            return Err(Error::arg("at least one lengthscale is required"));
        }
        if let Some(l) = self.lengthscales.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
            return Err(Error::arg(format!("lengthscale must be positive, got {l}")));
        }
        if !(self.outputscale.is_finite() && self.outputscale > 0.0) {
            return Err(Error::arg(format!("outputscale must be positive, got {}", self.outputscale)));
        }
        if !(self.noise_variance.is_finite() && self.noise_variance >= 0.0) {
            return Err(Error::arg(format!("noise variance must be non-negative, got {}", self.noise_variance)));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lengthscales.len()
    }

    /// Covariance between two inputs, with argument checking.
    pub fn eval(&self, x: &[f64], x2: &[f64]) -> Result<f64> {
        self.validate()?;
        if x.len() != self.dim() || x2.len() != self.dim() {
            return Err(Error::arg(format!(
                "dimension mismatch: {} and {} against {} lengthscales",
                x.len(),
                x2.len(),
                self.dim()
            )));
        }
        Ok(self.cov(x, x2))
    }

    pub(crate) fn scaled_sq_dist(&self, x: &[f64], x2: &[f64]) -> f64 {
        x.iter()
            .zip(x2)
            .zip(&self.lengthscales)
            .map(|((a, b), l)| {
                let d = (a - b) / l;
                d * d
            })
            .sum()
    }

    /// Kernel value and its derivative with respect to the squared scaled
    /// distance `r²`.
    pub(crate) fn profile(&self, r2: f64) -> (f64, f64) {
        let s = self.outputscale;
        match self.family {
            KernelFamily::SquaredExponential => {
                let k = s * (-0.5 * r2).exp();
                (k, -0.5 * k)
            }
            KernelFamily::Matern52 => {
                let r = r2.max(0.0).sqrt();
                let e = (-SQRT5 * r).exp();
                let k = s * (1.0 + SQRT5 * r + 5.0 / 3.0 * r2) * e;
                let dk_dr2 = -5.0 / 6.0 * s * (1.0 + SQRT5 * r) * e;
                (k, dk_dr2)
            }
        }
    }

    pub(crate) fn cov(&self, x: &[f64], x2: &[f64]) -> f64 {
        self.profile(self.scaled_sq_dist(x, x2)).0
    }

    /// Gradient of `k(x, x2)` with respect to `x`.
    pub(crate) fn grad_x(&self, x: &[f64], x2: &[f64]) -> (f64, Vec<f64>) {
        let (k, dk) = self.profile(self.scaled_sq_dist(x, x2));
        let g = x
            .iter()
            .zip(x2)
            .zip(&self.lengthscales)
            .map(|((a, b), l)| dk * 2.0 * (a - b) / (l * l))
            .collect();
        (k, g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn se(ls: Vec<f64>, s: f64) -> KernelParams {
        KernelParams::new(ls, s, 0.0, KernelFamily::SquaredExponential).unwrap()
    }

    #[test]
    fn diagonal_is_outputscale() {
        let p = se(vec![0.3, 2.0], 0.898);
        assert_eq!(p.eval(&[0.1, 0.2], &[0.1, 0.2]).unwrap(), 0.898);
        let m = KernelParams::new(vec![0.5], 1.7, 0.0, KernelFamily::Matern52).unwrap();
        assert_eq!(m.eval(&[0.4], &[0.4]).unwrap(), 1.7);
    }

    #[test]
    fn unit_distance_squared_exponential() {
        let p = se(vec![1.0, 1.0, 1.0], 1.0);
        let k = p.eval(&[0.0, 0.0, 0.0], &[0.6, 0.8, 0.0]).unwrap();
        assert!((k - 0.606_530_659_712_633_4).abs() < 1e-12);
    }

    #[test]
    fn matern_reference_value() {
        // r = 1: (1 + √5 + 5/3)·e^{-√5}
        let p = KernelParams::new(vec![1.0], 1.0, 0.0, KernelFamily::Matern52).unwrap();
        let k = p.eval(&[0.0], &[1.0]).unwrap();
        let expect = (1.0 + 5f64.sqrt() + 5.0 / 3.0) * (-(5f64.sqrt())).exp();
        assert!((k - expect).abs() < 1e-14);
    }

    #[test]
    fn argument_errors() {
        let p = se(vec![1.0, 1.0], 1.0);
        assert!(matches!(p.eval(&[0.0], &[0.0, 1.0]), Err(Error::Argument(_))));
        let bad = KernelParams { lengthscales: vec![0.0], outputscale: 1.0, noise_variance: 0.0, family: KernelFamily::Matern52 };
        assert!(matches!(bad.eval(&[0.0], &[0.0]), Err(Error::Argument(_))));
        assert!(KernelParams::new(vec![-1.0], 1.0, 0.0, KernelFamily::Matern52).is_err());
    }

    #[test]
    fn x_gradient_matches_finite_differences() {
        for family in [KernelFamily::Matern52, KernelFamily::SquaredExponential] {
            let p = KernelParams::new(vec![0.4, 1.3], 1.2, 0.0, family).unwrap();
            let (x, x2) = ([0.3, 0.7], [0.55, 0.1]);
            let (_, g) = p.grad_x(&x, &x2);
            for d in 0..2 {
                let h = 1e-6;
                let mut xp = x;
                let mut xm = x;
                xp[d] += h;
                xm[d] -= h;
                let fd = (p.cov(&xp, &x2) - p.cov(&xm, &x2)) / (2.0 * h);
                assert!((fd - g[d]).abs() < 1e-7, "{family:?} dim {d}");
            }
        }
    }
}
