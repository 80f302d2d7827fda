//! The twelve-member acquisition portfolio.
//!
//! All formulas maximize `g = −f` on the model's standardized scale, so the
//! textbook maximization forms apply directly to minimization problems.
//! Incumbents, extreme-value samples and optimum values are expressed on
//! that scale too.

mod analytic;
mod lookahead;
mod search;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::surrogate::{GpModel, PosteriorPrediction};

pub use analytic::{eval_confidence, eval_improvement};
pub use lookahead::{
    eval_jes, eval_kg, eval_mes, eval_pes, sample_extreme_values, sample_optimum_pairs, select_thompson,
    KnowledgeGradient, ENTROPY_VARIANCE_FLOOR,
};
pub use search::{optimize_acquisition, CandidateSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AcquisitionKind {
    Pi,
    LogPi,
    Ei,
    LogEi,
    Ucb,
    PosMean,
    PosStd,
    Ts,
    Kg,
    Pes,
    Mes,
    Jes,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Group {
    Exploitative,
    Exploratory,
}

impl AcquisitionKind {
    pub const ALL: [AcquisitionKind; 12] = [
        AcquisitionKind::Pi,
        AcquisitionKind::LogPi,
        AcquisitionKind::Ei,
        AcquisitionKind::LogEi,
        AcquisitionKind::Ucb,
        AcquisitionKind::PosMean,
        AcquisitionKind::PosStd,
        AcquisitionKind::Ts,
        AcquisitionKind::Kg,
        AcquisitionKind::Pes,
        AcquisitionKind::Mes,
        AcquisitionKind::Jes,
    ];

    pub fn abbrev(self) -> &'static str {
        match self {
            AcquisitionKind::Pi => "PI",
            AcquisitionKind::LogPi => "LogPI",
            AcquisitionKind::Ei => "EI",
            AcquisitionKind::LogEi => "LogEI",
            AcquisitionKind::Ucb => "UCB",
            AcquisitionKind::PosMean => "PosMean",
            AcquisitionKind::PosStd => "PosSTD",
            AcquisitionKind::Ts => "TS",
            AcquisitionKind::Kg => "KG",
            AcquisitionKind::Pes => "PES",
            AcquisitionKind::Mes => "MES",
            AcquisitionKind::Jes => "JES",
        }
    }

    pub fn group(self) -> Group {
        match self {
            AcquisitionKind::Pi
            | AcquisitionKind::LogPi
            | AcquisitionKind::Ei
            | AcquisitionKind::LogEi
            | AcquisitionKind::PosMean => Group::Exploitative,
            _ => Group::Exploratory,
        }
    }

    /// Closed-form members optimized by gradient ascent.
    pub fn is_analytic(self) -> bool {
        matches!(
            self,
            AcquisitionKind::Pi
                | AcquisitionKind::LogPi
                | AcquisitionKind::Ei
                | AcquisitionKind::LogEi
                | AcquisitionKind::Ucb
                | AcquisitionKind::PosMean
                | AcquisitionKind::PosStd
        )
    }

    /// Case-insensitive lookup by abbreviation. A leading `q` (batch
    /// notation) is accepted.
    pub fn from_token(token: &str) -> Option<Self> {
        let t = token.trim();
        let find = |s: &str| AcquisitionKind::ALL.into_iter().find(|k| k.abbrev().eq_ignore_ascii_case(s));
        find(t).or_else(|| {
            let rest = t.strip_prefix('q').or_else(|| t.strip_prefix('Q'))?;
            find(rest)
        })
    }
}

impl fmt::Display for AcquisitionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.abbrev())
    }
}

impl FromStr for AcquisitionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AcquisitionKind::from_token(s).ok_or_else(|| Error::arg(format!("unknown acquisition function '{s}'")))
    }
}

impl Serialize for AcquisitionKind {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.abbrev())
    }
}

impl<'de> Deserialize<'de> for AcquisitionKind {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Sample counts and candidate-set sizes for the stochastic members.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct McConfig {
    pub kg_fantasies: usize,
    pub kg_inner: usize,
    pub mes_samples: usize,
    pub entropy_optimizer_samples: usize,
    pub entropy_optimizer_candidates: usize,
    /// Fresh candidates for TS and PES.
    pub discrete_candidates: usize,
    /// Candidates scored for KG, MES and JES.
    pub lookahead_candidates: usize,
    pub n_probes: usize,
    pub n_starts: usize,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            kg_fantasies: 8,
            kg_inner: 512,
            mes_samples: 16,
            entropy_optimizer_samples: 10,
            entropy_optimizer_candidates: 512,
            discrete_candidates: 1024,
            lookahead_candidates: 512,
            n_probes: 512,
            n_starts: 10,
        }
    }
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        let sizes = [
            self.kg_fantasies,
            self.kg_inner,
            self.mes_samples,
            self.entropy_optimizer_samples,
            self.entropy_optimizer_candidates,
            self.discrete_candidates,
            self.lookahead_candidates,
            self.n_probes,
            self.n_starts,
        ];
        if sizes.contains(&0) {
            return Err(Error::arg("sample counts and candidate-set sizes must be at least 1"));
        }
        Ok(())
    }
}

pub const DEFAULT_KAPPA: f64 = 2.0;

/// Everything an acquisition evaluation needs besides the query point.
#[derive(Clone, Debug)]
pub struct AcqContext<'a> {
    pub model: &'a GpModel,
    /// Best observed `g` (standardized), the improvement target τ.
    pub incumbent: f64,
    pub kappa: f64,
    pub mc: McConfig,
    pub seed: u64,
}

impl<'a> AcqContext<'a> {
    /// Context with τ taken from the model's data.
    pub fn new(model: &'a GpModel, kappa: f64, mc: McConfig, seed: u64) -> Result<Self> {
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(Error::arg(format!("kappa must be positive, got {kappa}")));
        }
        mc.validate()?;
        Ok(AcqContext { model, incumbent: observed_best_g(model), kappa, mc, seed })
    }
}

pub(crate) fn observed_best_g(model: &GpModel) -> f64 {
    model.standardized_targets().iter().map(|v| -v).fold(f64::NEG_INFINITY, f64::max)
}

/// Posterior of `g` on the standardized scale.
pub fn predict_g(model: &GpModel, points: &[Vec<f64>]) -> Result<PosteriorPrediction> {
    let mut p = model.posterior(points, false)?;
    p.mean.iter_mut().for_each(|m| *m = -*m);
    Ok(p)
}

/// Index of the largest value; NaN never wins and ties go to the lowest index.
pub(crate) fn argmax(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &v) in values.iter().enumerate() {
        if v.is_nan() {
            continue;
        }
        match best {
            Some(b) if values[b] >= v => {}
            _ => best = Some(i),
        }
    }
    best
}

#[cfg(test)]
mod tests;
