//! Maximizing an acquisition function over the domain.

use serde::{Deserialize, Serialize};

use super::analytic::{value_and_gradient, value_and_sensitivities};
use super::lookahead::{mes_value, predict_g_unit, sample_extreme_values, sample_optimum_pairs, EntropySearch, KnowledgeGradient};
use super::{argmax, AcqContext, AcquisitionKind};
use crate::error::{Error, Result};
use crate::lowdisc;
use crate::optimize::{minimize_box, LbfgsConfig};
use crate::rng::Rng;
use crate::space::Bounds;
use crate::surrogate::GpModel;

/// Quasi-uniform points within a box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    points: Vec<Vec<f64>>,
}

impl CandidateSet {
    /// `size` scrambled-Halton points in `bounds`.
    pub fn quasi_random(bounds: &Bounds, size: usize, rng: &mut Rng) -> Result<Self> {
        if size == 0 {
            return Err(Error::arg("candidate set must be non-empty"));
        }
        Ok(CandidateSet { points: lowdisc::points_in(bounds, size, rng) })
    }

    pub fn from_points(bounds: &Bounds, points: Vec<Vec<f64>>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::arg("candidate set must be non-empty"));
        }
        if points.iter().any(|p| !bounds.contains(p)) {
            return Err(Error::arg("candidate outside the bounds"));
        }
        Ok(CandidateSet { points })
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn size(&self) -> usize {
        self.points.len()
    }
}

/// Returns the point (domain units) that maximizes `kind`.
///
/// Closed-form members: the best `n_starts` of `n_probes` quasi-random probes
/// seed projected L-BFGS runs in unit coordinates; the best of probes and
/// refined points wins. TS and PES pick from a fresh discrete candidate set;
/// KG, MES and JES score a candidate set and return its best point.
pub fn optimize_acquisition(kind: AcquisitionKind, ctx: &AcqContext<'_>, rng: &mut Rng) -> Result<Vec<f64>> {
    ctx.mc.validate()?;
    let model = ctx.model;
    let bounds = model.bounds();
    let dim = model.dim();
    let unit = match kind {
        k if k.is_analytic() => optimize_analytic(k, ctx, rng)?,
        AcquisitionKind::Ts => {
            let cands = lowdisc::unit_points(dim, ctx.mc.discrete_candidates, rng);
            let draw = model.sample_joint_unit(&cands, 1, rng)?.remove(0);
            let g: Vec<f64> = draw.iter().map(|v| -v).collect();
            pick(&cands, &g, kind)?
        }
        AcquisitionKind::Pes | AcquisitionKind::Jes => {
            let star_set = lowdisc::points_in(bounds, ctx.mc.entropy_optimizer_candidates, rng);
            let mut pairs = sample_optimum_pairs(model, &star_set, ctx.mc.entropy_optimizer_samples, rng)?;
            let truncate = kind == AcquisitionKind::Jes;
            if !truncate {
                pairs.iter_mut().for_each(|p| p.1 = f64::INFINITY);
            }
            let es = EntropySearch::new(model, &pairs, truncate)?;
            let n = if truncate { ctx.mc.lookahead_candidates } else { ctx.mc.discrete_candidates };
            let cands = lowdisc::unit_points(dim, n, rng);
            let values: Vec<f64> = cands.iter().map(|u| es.value_unit(u)).collect();
            pick(&cands, &values, kind)?
        }
        AcquisitionKind::Kg => {
            let inner = lowdisc::points_in(bounds, ctx.mc.kg_inner, rng);
            let kg = KnowledgeGradient::new(model, &inner, ctx.mc.kg_fantasies, rng)?;
            let cands = lowdisc::unit_points(dim, ctx.mc.lookahead_candidates, rng);
            let values: Vec<f64> = cands.iter().map(|u| kg.value_unit(u)).collect();
            pick(&cands, &values, kind)?
        }
        AcquisitionKind::Mes => {
            let cands = lowdisc::unit_points(dim, ctx.mc.lookahead_candidates, rng);
            let domain: Vec<Vec<f64>> = cands.iter().map(|u| bounds.from_unit(u)).collect();
            let samples = sample_extreme_values(model, &domain, ctx.mc.mes_samples, rng)?;
            let pred = predict_g_unit(model, &cands);
            let values: Vec<f64> =
                pred.mean.iter().zip(pred.std()).map(|(&m, s)| mes_value(m, s, &samples)).collect();
            pick(&cands, &values, kind)?
        }
        _ => unreachable!("every kind is covered above"),
    };
    Ok(bounds.from_unit(&unit))
}

fn pick(cands: &[Vec<f64>], values: &[f64], kind: AcquisitionKind) -> Result<Vec<f64>> {
    argmax(values)
        .map(|i| cands[i].clone())
        .ok_or_else(|| Error::Evaluation(format!("{kind} produced no finite value on the candidate set")))
}

fn optimize_analytic(kind: AcquisitionKind, ctx: &AcqContext<'_>, rng: &mut Rng) -> Result<Vec<f64>> {
    let model = ctx.model;
    let dim = model.dim();
    let probes = lowdisc::unit_points(dim, ctx.mc.n_probes, rng);
    let pred = predict_g_unit(model, &probes);
    let values: Vec<f64> = pred
        .mean
        .iter()
        .zip(pred.std())
        .map(|(&m, s)| value_and_sensitivities(kind, m, s, ctx.incumbent, ctx.kappa).0)
        .map(|v| if v.is_nan() { f64::NEG_INFINITY } else { v })
        .collect();

    let mut order: Vec<usize> = (0..probes.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));

    let mut best_u = probes[order[0]].clone();
    let mut best_v = values[order[0]];
    let lower = vec![0.0; dim];
    let upper = vec![1.0; dim];
    let config = LbfgsConfig { max_iters: 100, ..Default::default() };
    for &i in order.iter().take(ctx.mc.n_starts) {
        if !values[i].is_finite() {
            continue;
        }
        let objective = |u: &[f64]| {
            let (v, g) = analytic_at(model, kind, u, ctx.incumbent, ctx.kappa);
            v.is_finite().then(|| (-v, g.into_iter().map(|d| -d).collect()))
        };
        if let Ok(m) = minimize_box(objective, &probes[i], &lower, &upper, &config) {
            if -m.value > best_v {
                best_v = -m.value;
                best_u = m.x;
            }
        }
    }
    if !best_v.is_finite() {
        return Err(Error::Evaluation(format!("{kind} is not finite at any probe")));
    }
    Ok(best_u)
}

fn analytic_at(model: &GpModel, kind: AcquisitionKind, u: &[f64], tau: f64, kappa: f64) -> (f64, Vec<f64>) {
    let (mean, var, dmean, dvar) = model.predict_unit_grad(u);
    value_and_gradient(kind, mean, var, &dmean, &dvar, tau, kappa)
}
