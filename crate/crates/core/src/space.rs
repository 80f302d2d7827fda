//! Box-shaped search domains and the affine map to the unit cube.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-dimension `(lower, upper)` limits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Bounds(Vec<(f64, f64)>);

impl Bounds {
    pub fn new(limits: Vec<(f64, f64)>) -> Result<Self> {
        if limits.is_empty() {
            return Err(Error::arg("bounds must have at least one dimension"));
        }
        for (i, &(lo, hi)) in limits.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::arg(format!("dimension {i}: invalid bounds [{lo}, {hi}]")));
            }
        }
        Ok(Bounds(limits))
    }

    pub fn unit(dim: usize) -> Self {
        Bounds(vec![(0.0, 1.0); dim])
    }

    pub fn uniform(dim: usize, lo: f64, hi: f64) -> Self {
        Bounds(vec![(lo, hi); dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn limits(&self) -> &[(f64, f64)] {
        &self.0
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && x.iter().zip(&self.0).all(|(&v, &(lo, hi))| v >= lo && v <= hi)
    }

    pub fn clamp(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.0).map(|(&v, &(lo, hi))| v.clamp(lo, hi)).collect()
    }

    pub fn to_unit(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.0).map(|(&v, &(lo, hi))| (v - lo) / (hi - lo)).collect()
    }

    pub fn from_unit(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .zip(&self.0)
            .map(|(&t, &(lo, hi))| (lo + t * (hi - lo)).clamp(lo, hi))
            .collect()
    }
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
