//! Policies that pick one acquisition function per iteration.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng as _, RngCore};
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::acquisition::{optimize_acquisition, predict_g, AcqContext, AcquisitionKind, CandidateSet};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, derived, Rng};
use crate::surrogate::GpModel;

/// Which policy drives the loop.
#[derive(Clone, Debug, PartialEq)]
pub enum StrategistKind {
    Static(AcquisitionKind),
    /// Uniform draw from `subset` each iteration.
    Random(Vec<AcquisitionKind>),
    /// Blocks of `k` iterations alternating between `a` and `b`, starting with `a`.
    Alternating { a: AcquisitionKind, b: AcquisitionKind, k: usize },
    /// `explore` for the first `⌈split·budget⌉` iterations, `exploit` afterwards.
    TwoPhase { explore: AcquisitionKind, exploit: AcquisitionKind, split: f64 },
    Hedge(HedgeVariant),
    Esp,
    /// Cycles through a fixed sequence.
    Scripted(Vec<AcquisitionKind>),
    Llm,
}

/// The bandit-style portfolio baselines. The discounting rules of the two
/// memory variants are reconstructions, not reference implementations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum HedgeVariant {
    /// No discounting, raw rewards.
    GpHedge,
    /// Fixed discount 0.9, min-max normalized rewards.
    NoPastBo,
    /// Discount tracks the recent failure rate, normalized rewards.
    SetupBo,
}

impl HedgeVariant {
    pub fn tag(self) -> &'static str {
        match self {
            HedgeVariant::GpHedge => "GP-Hedge",
            HedgeVariant::NoPastBo => "No-PASt-BO",
            HedgeVariant::SetupBo => "SETUP-BO",
        }
    }
}

pub const DEFAULT_SPLIT: f64 = 0.5;
pub const DEFAULT_ETA: f64 = 1.0;

impl StrategistKind {
    pub fn validate(&self) -> Result<()> {
        match self {
            StrategistKind::Random(s) | StrategistKind::Scripted(s) if s.is_empty() => {
                Err(Error::arg("strategist needs at least one acquisition function"))
            }
            StrategistKind::Alternating { k: 0, .. } => Err(Error::arg("alternation block length must be at least 1")),
            StrategistKind::TwoPhase { split, .. } if !(*split > 0.0 && *split < 1.0) => {
                Err(Error::arg(format!("two-phase split must lie in (0, 1), got {split}")))
            }
            _ => Ok(()),
        }
    }

    /// Every acquisition function this strategist can return.
    pub fn portfolio(&self) -> Vec<AcquisitionKind> {
        let mut out = match self {
            StrategistKind::Static(k) => vec![*k],
            StrategistKind::Random(s) | StrategistKind::Scripted(s) => s.clone(),
            StrategistKind::Alternating { a, b, .. } => vec![*a, *b],
            StrategistKind::TwoPhase { explore, exploit, .. } => vec![*explore, *exploit],
            StrategistKind::Hedge(_) | StrategistKind::Esp | StrategistKind::Llm => AcquisitionKind::ALL.to_vec(),
        };
        let mut seen = Vec::new();
        out.retain(|k| {
            let fresh = !seen.contains(k);
            seen.push(*k);
            fresh
        });
        out
    }

    /// Strategists whose choice needs the fitted model rather than only the
    /// iteration counter.
    pub fn is_model_based(&self) -> bool {
        matches!(self, StrategistKind::Hedge(_) | StrategistKind::Esp | StrategistKind::Llm)
    }

    /// Loads a scripted sequence: one abbreviation per line, blank lines and
    /// `#` comments ignored.
    pub fn scripted_from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut seq = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let k = AcquisitionKind::from_token(line)
                .ok_or_else(|| Error::Config(format!("{}:{}: unknown acquisition '{line}'", path.display(), i + 1)))?;
            seq.push(k);
        }
        let s = StrategistKind::Scripted(seq);
        s.validate()?;
        Ok(s)
    }
}

fn join(kinds: &[AcquisitionKind]) -> String {
    kinds.iter().map(|k| k.abbrev()).collect::<Vec<_>>().join("-")
}

impl fmt::Display for StrategistKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StrategistKind::Static(k) => write!(f, "{k}"),
            StrategistKind::Random(s) if s.as_slice() == AcquisitionKind::ALL => write!(f, "Random"),
            StrategistKind::Random(s) => write!(f, "Random-{}", join(s)),
            StrategistKind::Alternating { a, b, k } => write!(f, "Alt-{a}-{b}-{k}"),
            StrategistKind::TwoPhase { explore, exploit, split } if *split == DEFAULT_SPLIT => {
                write!(f, "TwoPhases-{explore}-{exploit}")
            }
            StrategistKind::TwoPhase { explore, exploit, split } => write!(f, "TwoPhases-{explore}-{exploit}-{split}"),
            StrategistKind::Hedge(v) => write!(f, "{}", v.tag()),
            StrategistKind::Esp => write!(f, "ESP"),
            StrategistKind::Scripted(s) => write!(f, "Scripted-{}", join(s)),
            StrategistKind::Llm => write!(f, "LLM"),
        }
    }
}

impl FromStr for StrategistKind {
    type Err = Error;

    /// Accepts the tags produced by `Display` (case-insensitive), plus
    /// `Scripted@<path>` to read a sequence file.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::arg(format!("unknown strategist '{s}'"));
        let kinds = |parts: &[&str]| -> Result<Vec<AcquisitionKind>> {
            parts.iter().map(|p| AcquisitionKind::from_token(p).ok_or_else(bad)).collect()
        };
        let lower = s.to_ascii_lowercase();
        if let Some(path) = s.strip_prefix("Scripted@").or_else(|| s.strip_prefix("scripted@")) {
            return StrategistKind::scripted_from_file(Path::new(path));
        }
        let parsed = match lower.as_str() {
            "gp-hedge" => StrategistKind::Hedge(HedgeVariant::GpHedge),
            "no-past-bo" => StrategistKind::Hedge(HedgeVariant::NoPastBo),
            "setup-bo" => StrategistKind::Hedge(HedgeVariant::SetupBo),
            "esp" => StrategistKind::Esp,
            "llm" | "lmabo" => StrategistKind::Llm,
            "random" => StrategistKind::Random(AcquisitionKind::ALL.to_vec()),
            _ => {
                if let Some(k) = AcquisitionKind::from_token(s) {
                    return Ok(StrategistKind::Static(k));
                }
                let parts: Vec<&str> = s.split('-').collect();
                match parts[0].to_ascii_lowercase().as_str() {
                    "random" if parts.len() > 1 => StrategistKind::Random(kinds(&parts[1..])?),
                    "scripted" if parts.len() > 1 => StrategistKind::Scripted(kinds(&parts[1..])?),
                    "alt" if parts.len() == 3 || parts.len() == 4 => {
                        let k = match parts.get(3) {
                            Some(t) => t.parse().map_err(|_| bad())?,
                            None => 1,
                        };
                        let ab = kinds(&parts[1..3])?;
                        StrategistKind::Alternating { a: ab[0], b: ab[1], k }
                    }
                    "twophases" | "twophase" if parts.len() == 3 || parts.len() == 4 => {
                        let split = match parts.get(3) {
                            Some(t) => t.parse().map_err(|_| bad())?,
                            None => DEFAULT_SPLIT,
                        };
                        let ee = kinds(&parts[1..3])?;
                        StrategistKind::TwoPhase { explore: ee[0], exploit: ee[1], split }
                    }
                    _ => return Err(bad()),
                }
            }
        };
        parsed.validate()?;
        Ok(parsed)
    }
}

impl Serialize for StrategistKind {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for StrategistKind {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// Choice for the schedule-only strategists (static, random, alternating,
/// two-phase, scripted).
pub fn select_simple(kind: &StrategistKind, iteration: usize, budget: usize, rng: &mut Rng) -> Result<AcquisitionKind> {
    if iteration == 0 || iteration > budget {
        return Err(Error::arg(format!("iteration {iteration} outside 1..={budget}")));
    }
    Ok(match kind {
        StrategistKind::Static(k) => *k,
        StrategistKind::Random(subset) => subset[rng.random_range(0..subset.len())],
        StrategistKind::Alternating { a, b, k } => {
            if ((iteration - 1) / k).is_multiple_of(2) {
                *a
            } else {
                *b
            }
        }
        StrategistKind::TwoPhase { explore, exploit, split } => {
            let cut = (split * budget as f64).ceil() as usize;
            if iteration <= cut {
                *explore
            } else {
                *exploit
            }
        }
        StrategistKind::Scripted(seq) => scripted_select(seq, iteration),
        _ => return Err(Error::arg(format!("{kind} needs the fitted model to choose"))),
    })
}

/// `sequence[(iteration - 1) mod len]`.
pub fn scripted_select(sequence: &[AcquisitionKind], iteration: usize) -> AcquisitionKind {
    sequence[(iteration.max(1) - 1) % sequence.len()]
}

/// Cumulative (optionally discounted) rewards of each portfolio member.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HedgeState {
    pub portfolio: Vec<AcquisitionKind>,
    pub gains: Vec<f64>,
    pub eta: f64,
    pub memory: f64,
    pub normalize: bool,
    /// Re-derive `memory` from the improvement rate before each update.
    pub adaptive_memory: bool,
}

impl HedgeState {
    pub fn new(variant: HedgeVariant, portfolio: Vec<AcquisitionKind>, eta: f64) -> Result<Self> {
        if portfolio.is_empty() {
            return Err(Error::arg("hedge portfolio must be non-empty"));
        }
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::arg(format!("eta must be positive, got {eta}")));
        }
        let (memory, normalize, adaptive_memory) = match variant {
            HedgeVariant::GpHedge => (1.0, false, false),
            HedgeVariant::NoPastBo => (0.9, true, false),
            HedgeVariant::SetupBo => (0.9, true, true),
        };
        Ok(HedgeState { gains: vec![0.0; portfolio.len()], portfolio, eta, memory, normalize, adaptive_memory })
    }

    /// Selection probabilities over the whole portfolio.
    pub fn probabilities(&self) -> Vec<f64> {
        softmax(&self.gains, self.eta)
    }

    /// `gains ← m·gains + r`, with `r` min-max normalized first when enabled.
    /// Members without a reward this round (`None`) receive 0.
    pub fn update(&mut self, rewards: &[Option<f64>]) -> Result<()> {
        if rewards.len() != self.gains.len() {
            return Err(Error::arg("one reward slot per portfolio member is required"));
        }
        if rewards.iter().flatten().any(|r| !r.is_finite()) {
            return Err(Error::arg("rewards must be finite"));
        }
        let present: Vec<f64> = rewards.iter().flatten().copied().collect();
        let (lo, hi) = present.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &r| (a.min(r), b.max(r)));
        for (g, r) in self.gains.iter_mut().zip(rewards) {
            let r = match r {
                None => 0.0,
                Some(r) if self.normalize => {
                    if hi > lo {
                        (r - lo) / (hi - lo)
                    } else {
                        0.5
                    }
                }
                Some(r) => *r,
            };
            *g = self.memory * *g + r;
        }
        Ok(())
    }

    /// SETUP-BO discount: `clip(1 − improvement_rate, 0.5, 0.99)`.
    pub fn adapt_memory(&mut self, improvement_rate: f64) {
        if self.adaptive_memory {
            self.memory = (1.0 - improvement_rate).clamp(0.5, 0.99);
        }
    }

    /// Samples a member among `available` (indices into the portfolio) with
    /// probability proportional to `exp(η·gain)`.
    pub fn sample(&self, available: &[usize], rng: &mut Rng) -> Result<usize> {
        if available.is_empty() {
            return Err(Error::Evaluation("no portfolio member produced a proposal".into()));
        }
        let gains: Vec<f64> = available.iter().map(|&i| self.gains[i]).collect();
        let p = softmax(&gains, self.eta);
        Ok(available[sample_index(&p, rng)])
    }
}

/// `exp(η·g_i) / Σ_j exp(η·g_j)`, shifted by the maximum for stability.
pub fn softmax(gains: &[f64], eta: f64) -> Vec<f64> {
    let top = gains.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = gains.iter().map(|g| (eta * (g - top)).exp()).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|v| v / total).collect()
}

/// Inverse-CDF draw from a probability vector.
pub fn sample_index(probs: &[f64], rng: &mut Rng) -> usize {
    let u: f64 = rng.random::<f64>() * probs.iter().sum::<f64>();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// Each member's maximizer, or `None` when its optimization failed. Members
/// are optimized in parallel on independent derived streams.
pub fn propose_all(portfolio: &[AcquisitionKind], ctx: &AcqContext<'_>, rng: &mut Rng) -> Vec<Option<Vec<f64>>> {
    let base = rng.next_u64();
    portfolio
        .par_iter()
        .enumerate()
        .map(|(i, &kind)| {
            let mut local = derived(base, &[i as u64]);
            let member_ctx = AcqContext { seed: derive_seed(ctx.seed, &[i as u64]), ..ctx.clone() };
            match optimize_acquisition(kind, &member_ctx, &mut local) {
                Ok(x) => Some(x),
                Err(e) => {
                    tracing::warn!("{kind} proposal failed and is excluded this round: {e}");
                    None
                }
            }
        })
        .collect()
}

/// Nominates one point per member and samples a member by its gains.
/// Returns the chosen portfolio index and all nominations.
pub fn hedge_propose_and_select(
    state: &HedgeState,
    ctx: &AcqContext<'_>,
    rng: &mut Rng,
) -> Result<(usize, Vec<Option<Vec<f64>>>)> {
    let proposals = propose_all(&state.portfolio, ctx, rng);
    let available: Vec<usize> = (0..proposals.len()).filter(|&i| proposals[i].is_some()).collect();
    let chosen = state.sample(&available, rng)?;
    Ok((chosen, proposals))
}

/// Hedge rewards: standardized posterior mean of `g = −f` at each nomination
/// under the model refitted after the new observation.
pub fn hedge_rewards(model: &GpModel, proposals: &[Option<Vec<f64>>]) -> Result<Vec<Option<f64>>> {
    proposals
        .iter()
        .map(|p| match p {
            Some(x) => Ok(Some(predict_g(model, std::slice::from_ref(x))?.mean[0])),
            None => Ok(None),
        })
        .collect()
}

/// Settings for entropy-based portfolio selection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EspConfig {
    pub n_candidates: usize,
    pub n_samples: usize,
    pub n_fantasies: usize,
}

impl Default for EspConfig {
    fn default() -> Self {
        EspConfig { n_candidates: 256, n_samples: 128, n_fantasies: 4 }
    }
}

/// Shannon entropy (nats) of the empirical distribution of the argmax of `g`
/// over `candidates` across `n_samples` joint posterior draws.
pub fn optimum_location_entropy(model: &GpModel, candidates: &CandidateSet, n_samples: usize, rng: &mut Rng) -> Result<f64> {
    let draws = model.sample_joint(candidates.points(), n_samples, false, rng)?;
    let mut counts = vec![0usize; candidates.size()];
    for row in &draws {
        // argmax of g is the argmin of f; ties to the lowest index
        let mut best = 0;
        for (i, v) in row.iter().enumerate() {
            if *v < row[best] {
                best = i;
            }
        }
        counts[best] += 1;
    }
    let n = draws.len() as f64;
    Ok(counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum())
}

/// Picks the nomination whose observation is expected to shrink the entropy
/// of the optimum's location the most. `proposals` is indexed like the
/// portfolio; returns the winning index (ties go to the lowest).
///
/// All nominations share the same random streams so that their scores differ
/// only through the nominated point.
pub fn esp_select(
    model: &GpModel,
    proposals: &[Option<Vec<f64>>],
    candidates: &CandidateSet,
    config: &EspConfig,
    rng: &mut Rng,
) -> Result<usize> {
    if proposals.iter().all(Option::is_none) {
        return Err(Error::Evaluation("no portfolio member produced a proposal".into()));
    }
    let base = rng.next_u64();
    let prior = optimum_location_entropy(model, candidates, config.n_samples, &mut derived(base, &[0]))?;
    let scores: Vec<Option<f64>> = proposals
        .par_iter()
        .map(|p| {
            let x = p.as_ref()?;
            let mut fantasy_rng = derived(base, &[1]);
            let draws = model.sample_joint(std::slice::from_ref(x), config.n_fantasies, true, &mut fantasy_rng).ok()?;
            let mut total = 0.0;
            for (j, y) in draws.iter().enumerate() {
                let cond = model.condition(std::slice::from_ref(x), &[y[0]]).ok()?;
                let mut srng = derived(base, &[2, j as u64]);
                total += prior - optimum_location_entropy(&cond, candidates, config.n_samples, &mut srng).ok()?;
            }
            Some(total / draws.len() as f64)
        })
        .collect();
    let mut best: Option<(usize, f64)> = None;
    for (i, s) in scores.iter().enumerate() {
        match s {
            Some(v) if best.is_none_or(|(_, b)| *v > b) => best = Some((i, *v)),
            Some(_) => {}
            None if proposals[i].is_some() => tracing::warn!("{i}: fantasy conditioning failed, member skipped"),
            None => {}
        }
    }
    best.map(|(i, _)| i).ok_or_else(|| Error::Evaluation("every nomination failed to condition".into()))
}

/// One strategist decision as stored in a run record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionRecord {
    pub iteration: usize,
    pub chosen: AcquisitionKind,
    #[serde(default)]
    pub justification: String,
    #[serde(default)]
    pub fallback_used: bool,
}
