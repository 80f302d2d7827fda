//! Regret metrics, rank statistics, hypothesis tests and selection-behavior
//! summaries over collections of run records.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::acquisition::AcquisitionKind;
use crate::error::{Error, Result};
use crate::harness::RunRecord;
use crate::stats::{chi2_sf, norm_cdf};

pub const REPORT_SCHEMA: u32 = 1;
/// Guard for problems where the best method has zero area.
pub const ZERO_AUC_GUARD: f64 = 1e-12;
const REGRET_TOLERANCE: f64 = 1e-9;
pub const BEHAVIOR_BINS: usize = 10;

/// Simple regret per loop iteration; non-negative and non-increasing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegretCurve(Vec<f64>);

impl RegretCurve {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Data("empty regret curve".into()));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= -REGRET_TOLERANCE)) {
            return Err(Error::Data(format!("regret {v} is negative or not finite")))
        }
        if values.windows(2).any(|w| w[1] > w[0] + REGRET_TOLERANCE) {
            return Err(Error::Data("regret increases along the curve".into()));
        }
        Ok(RegretCurve(values.into_iter().map(|v| v.max(0.0)).collect()))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

/// `incumbent_t − optimum` for each loop iteration.
pub fn regret_curve(record: &RunRecord, optimum: f64) -> Result<RegretCurve> {
    RegretCurve::new(record.incumbents().iter().map(|v| v - optimum).collect())
}

/// Unit-width rectangle rule: the sum of the regrets.
pub fn auc(curve: &RegretCurve) -> f64 {
    curve.0.iter().sum()
}

/// Reference optimum per problem: the known optimum, lowered to the best
/// observation when noisy evaluations dip below it; otherwise the best value
/// any record observed.
pub fn reference_optima(records: &[RunRecord]) -> BTreeMap<String, f64> {
    let mut out: BTreeMap<String, f64> = BTreeMap::new();
    for r in records {
        let best = r.all_values().fold(f64::INFINITY, f64::min);
        let e = out.entry(r.header.problem.clone()).or_insert(f64::INFINITY);
        *e = e.min(best);
        if let Some(k) = r.header.known_optimum {
            *e = e.min(k);
        }
    }
    out
}

/// Mean AUC per (method, problem) with the per-repetition values kept.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AucTable {
    pub methods: Vec<String>,
    pub problems: Vec<String>,
    /// `per_rep[m][p]`: AUC of every repetition.
    pub per_rep: Vec<Vec<Vec<f64>>>,
}

impl AucTable {
    /// Builds the table from complete records; methods and problems are
    /// sorted by name. Every (method, problem) cell must be populated and all
    /// records of a problem must share one budget.
    pub fn from_records(records: &[RunRecord]) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::Data("no run records".into()));
        }
        let optima = reference_optima(records);
        let mut budgets: BTreeMap<&str, usize> = BTreeMap::new();
        let mut cells: BTreeMap<(String, String), Vec<(u64, f64)>> = BTreeMap::new();
        for r in records {
            let h = &r.header;
            let b = *budgets.entry(&h.problem).or_insert(h.budget);
            if b != h.budget || r.iterations.len() != h.budget {
                return Err(Error::Data(format!("{}: records of one problem have different budgets", h.problem)));
            }
            let curve = regret_curve(r, optima[&h.problem])?;
            cells.entry((h.strategist.to_string(), h.problem.clone())).or_default().push((h.seed, auc(&curve)));
        }
        let mut methods: Vec<String> = cells.keys().map(|k| k.0.clone()).collect();
        let mut problems: Vec<String> = cells.keys().map(|k| k.1.clone()).collect();
        methods.dedup();
        methods.sort();
        methods.dedup();
        problems.sort();
        problems.dedup();
        let mut per_rep = vec![vec![Vec::new(); problems.len()]; methods.len()];
        for ((m, p), mut v) in cells {
            v.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
            let mi = methods.binary_search(&m).expect("method present");
            let pi = problems.binary_search(&p).expect("problem present");
            per_rep[mi][pi] = v.into_iter().map(|(_, a)| a).collect();
        }
        for (mi, row) in per_rep.iter().enumerate() {
            if let Some(pi) = row.iter().position(Vec::is_empty) {
                return Err(Error::Data(format!("no records for {} on {}", methods[mi], problems[pi])));
            }
        }
        Ok(AucTable { methods, problems, per_rep })
    }

    /// `mean[m][p]`.
    pub fn mean(&self) -> Vec<Vec<f64>> {
        self.per_rep.iter().map(|row| row.iter().map(|v| v.iter().sum::<f64>() / v.len() as f64).collect()).collect()
    }

    pub fn method_index(&self, name: &str) -> Option<usize> {
        self.methods.iter().position(|m| m == name)
    }
}

/// RP per (method, problem) and the problems whose best AUC was zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelativePerformance {
    pub values: Vec<Vec<f64>>,
    pub guarded_problems: Vec<String>,
}

/// `AUC_m / min_m AUC` per problem, on mean AUCs.
pub fn relative_performance(table: &AucTable) -> RelativePerformance {
    let mean = table.mean();
    let mut values = vec![vec![0.0; table.problems.len()]; table.methods.len()];
    let mut guarded = Vec::new();
    for p in 0..table.problems.len() {
        let best = mean.iter().map(|row| row[p]).fold(f64::INFINITY, f64::min);
        let denom = if best > 0.0 {
            best
        } else {
            guarded.push(table.problems[p].clone());
            ZERO_AUC_GUARD
        };
        for m in 0..table.methods.len() {
            // the best method gets exactly 1 even under the guard
            values[m][p] = if mean[m][p] == best { 1.0 } else { mean[m][p].max(ZERO_AUC_GUARD) / denom };
        }
    }
    RelativePerformance { values, guarded_problems: guarded }
}

/// Ranks of `values` (1 = smallest) with ties sharing their average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Per-problem ranks, `ranks[m][p]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankMatrix {
    pub ranks: Vec<Vec<f64>>,
}

impl RankMatrix {
    /// From rows of per-problem ranks (`rows[p][m]`).
    pub fn from_problem_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let k = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != k) {
            return Err(Error::arg("ragged rank matrix"));
        }
        Ok(RankMatrix { ranks: (0..k).map(|m| rows.iter().map(|r| r[m]).collect()).collect() })
    }

    pub fn n_methods(&self) -> usize {
        self.ranks.len()
    }

    pub fn n_problems(&self) -> usize {
        self.ranks.first().map_or(0, Vec::len)
    }

    pub fn mean_ranks(&self) -> Vec<f64> {
        self.ranks.iter().map(|r| r.iter().sum::<f64>() / r.len() as f64).collect()
    }
}

/// Ascending ranks of mean AUC within each problem.
pub fn ranks(table: &AucTable) -> Result<RankMatrix> {
    if table.methods.is_empty() || table.problems.is_empty() {
        return Err(Error::Data("empty AUC table".into()));
    }
    let mean = table.mean();
    let mut out = vec![vec![0.0; table.problems.len()]; table.methods.len()];
    for p in 0..table.problems.len() {
        let col: Vec<f64> = mean.iter().map(|row| row[p]).collect();
        for (m, r) in average_ranks(&col).into_iter().enumerate() {
            out[m][p] = r;
        }
    }
    Ok(RankMatrix { ranks: out })
}

/// Population standard deviation over mean.
pub fn coefficient_of_variation(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Undefined("coefficient of variation of no values".into()));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if mean == 0.0 {
        return Err(Error::Undefined("coefficient of variation with zero mean".into()));
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Ok(var.sqrt() / mean.abs())
}

/// Friedman chi-squared statistic with tie correction and its p-value on
/// `k − 1` degrees of freedom. Problems are blocks, methods treatments.
pub fn friedman_test(ranks: &RankMatrix) -> Result<(f64, f64)> {
    let k = ranks.n_methods();
    let n = ranks.n_problems();
    if k < 3 || n < 2 {
        return Err(Error::arg(format!("Friedman test needs at least 3 methods and 2 problems, got {k} and {n}")));
    }
    let (kf, nf) = (k as f64, n as f64);
    let sums: Vec<f64> = ranks.ranks.iter().map(|r| r.iter().sum()).collect();
    let ss: f64 = sums.iter().map(|s| s * s).sum();
    let raw = 12.0 / (nf * kf * (kf + 1.0)) * ss - 3.0 * nf * (kf + 1.0);
    // ties: groups of equal ranks within each problem
    let mut tie_sum = 0.0;
    for p in 0..n {
        let mut col: Vec<f64> = ranks.ranks.iter().map(|r| r[p]).collect();
        col.sort_by(f64::total_cmp);
        let mut i = 0;
        while i < col.len() {
            let mut j = i;
            while j + 1 < col.len() && col[j + 1] == col[i] {
                j += 1;
            }
            let t = (j - i + 1) as f64;
            tie_sum += t * t * t - t;
            i = j + 1;
        }
    }
    let denom = 1.0 - tie_sum / (nf * (kf * kf * kf - kf));
    if denom <= 1e-12 {
        return Ok((0.0, 1.0));
    }
    let stat = (raw / denom).max(0.0);
    Ok((stat, chi2_sf(stat, kf - 1.0).clamp(0.0, 1.0)))
}

/// Two-sided Wilcoxon signed-rank test, normal approximation with
/// continuity and tie corrections. Zero differences are dropped. Returns
/// `(min(W+, W−), p)`.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<(f64, f64)> {
    if a.len() != b.len() {
        return Err(Error::arg("paired samples differ in length"));
    }
    if a.len() < 6 {
        return Err(Error::arg(format!("signed-rank test needs at least 6 pairs, got {}", a.len())));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|d| *d != 0.0).collect();
    if d.is_empty() {
        return Ok((0.0, 1.0));
    }
    let abs: Vec<f64> = d.iter().map(|v| v.abs()).collect();
    let r = average_ranks(&abs);
    let w_plus: f64 = d.iter().zip(&r).filter(|(v, _)| **v > 0.0).map(|(_, r)| r).sum();
    let nf = d.len() as f64;
    let total = nf * (nf + 1.0) / 2.0;
    let w_minus = total - w_plus;
    let mean = total / 2.0;
    let mut sorted = abs.clone();
    sorted.sort_by(f64::total_cmp);
    let mut tie = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        tie += t * t * t - t;
        i = j + 1;
    }
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie / 48.0;
    if var <= 0.0 {
        return Ok((w_plus.min(w_minus), 1.0));
    }
    let z = ((w_plus - mean).abs() - 0.5).max(0.0) / var.sqrt();
    Ok((w_plus.min(w_minus), (2.0 * (1.0 - norm_cdf(z))).min(1.0)))
}

/// Holm step-down adjustment, returned in the input order.
pub fn holm_bonferroni(p_values: &[f64]) -> Vec<f64> {
    let m = p_values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p_values[a].total_cmp(&p_values[b]));
    let mut out = vec![0.0; m];
    let mut running = 0.0f64;
    for (j, &i) in order.iter().enumerate() {
        running = running.max(((m - j) as f64 * p_values[i]).min(1.0));
        out[i] = running;
    }
    out
}

/// Selection behavior aggregated over runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BehaviorStats {
    pub portfolio: Vec<AcquisitionKind>,
    /// `bin_frequency[b][a]`: share of selections in progress bin `b` that
    /// chose portfolio member `a`.
    pub bin_frequency: Vec<Vec<f64>>,
    pub bin_counts: Vec<usize>,
    /// `switches[from][to]` for consecutive iterations with a change.
    pub switches: Vec<Vec<usize>>,
    /// Selections made at iterations that improved the incumbent.
    pub on_improvement: Vec<usize>,
    /// Selections made at iterations that did not.
    pub on_stagnation: Vec<usize>,
}

impl BehaviorStats {
    pub fn total_selections(&self) -> usize {
        self.bin_counts.iter().sum()
    }
}

/// Frequency per normalized-progress bin, switch counts and the
/// improvement/stagnation split.
pub fn behavior_stats(records: &[RunRecord]) -> BehaviorStats {
    let portfolio = AcquisitionKind::ALL.to_vec();
    let a = portfolio.len();
    let index = |k: AcquisitionKind| portfolio.iter().position(|&p| p == k).expect("every kind is in the portfolio");
    let mut counts = vec![vec![0usize; a]; BEHAVIOR_BINS];
    let mut switches = vec![vec![0usize; a]; a];
    let mut on_improvement = vec![0usize; a];
    let mut on_stagnation = vec![0usize; a];
    for r in records {
        let total = r.iterations.len().max(1);
        let mut best = r.header.init_values.iter().copied().fold(f64::INFINITY, f64::min);
        let mut prev: Option<usize> = None;
        for (t, it) in r.iterations.iter().enumerate() {
            let k = index(it.chosen);
            counts[(t * BEHAVIOR_BINS / total).min(BEHAVIOR_BINS - 1)][k] += 1;
            if let Some(p) = prev.filter(|&p| p != k) {
                switches[p][k] += 1;
            }
            prev = Some(k);
            if it.incumbent < best {
                on_improvement[k] += 1;
            } else {
                on_stagnation[k] += 1;
            }
            best = best.min(it.incumbent);
        }
    }
    let bin_counts: Vec<usize> = counts.iter().map(|c| c.iter().sum()).collect();
    let bin_frequency = counts
        .iter()
        .zip(&bin_counts)
        .map(|(c, &n)| c.iter().map(|&v| if n == 0 { 0.0 } else { v as f64 / n as f64 }).collect())
        .collect();
    BehaviorStats { portfolio, bin_frequency, bin_counts, switches, on_improvement, on_stagnation }
}

/// Numpy-style linear-interpolation quantile.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// One row of the method summary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub mean_auc: f64,
    pub mean_rp: f64,
    pub rp_q25: f64,
    pub rp_q75: f64,
    pub mean_rank: f64,
    pub min_rank: f64,
    pub max_rank: f64,
    /// Mean over problems of the across-repetition AUC coefficient of variation.
    pub cv: Option<f64>,
    /// Holm-adjusted signed-rank p-value against the reference method.
    pub p_vs_reference: Option<f64>,
}

/// Everything `emit_report` writes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema: u32,
    pub reference: String,
    pub table: AucTable,
    pub relative_performance: RelativePerformance,
    pub ranks: RankMatrix,
    pub summary: Vec<MethodSummary>,
    pub friedman: Option<(f64, f64)>,
    pub behavior: BehaviorStats,
    /// Mean regret curve per (method, problem).
    pub mean_curves: BTreeMap<String, BTreeMap<String, Vec<f64>>>,
}

/// Runs every analysis on `records` with `reference` as the comparison method.
pub fn analyze(records: &[RunRecord], reference: &str) -> Result<Report> {
    let table = AucTable::from_records(records)?;
    let ref_idx = table
        .method_index(reference)
        .ok_or_else(|| Error::arg(format!("reference method '{reference}' has no records")))?;
    let rp = relative_performance(&table);
    let rank = ranks(&table)?;
    let mean = table.mean();
    let friedman = friedman_test(&rank).ok();

    let mut raw_p: Vec<(usize, f64)> = Vec::new();
    for m in 0..table.methods.len() {
        if m != ref_idx {
            if let Ok((_, p)) = wilcoxon_signed_rank(&mean[m], &mean[ref_idx]) {
                raw_p.push((m, p));
            }
        }
    }
    let adjusted = holm_bonferroni(&raw_p.iter().map(|x| x.1).collect::<Vec<_>>());
    let p_of = |m: usize| raw_p.iter().position(|x| x.0 == m).map(|i| adjusted[i]);

    let summary = (0..table.methods.len())
        .map(|m| {
            let mut rps = rp.values[m].clone();
            rps.sort_by(f64::total_cmp);
            let r = &rank.ranks[m];
            let cvs: Vec<f64> = table.per_rep[m].iter().filter_map(|v| coefficient_of_variation(v).ok()).collect();
            MethodSummary {
                method: table.methods[m].clone(),
                mean_auc: mean[m].iter().sum::<f64>() / mean[m].len() as f64,
                mean_rp: rps.iter().sum::<f64>() / rps.len() as f64,
                rp_q25: quantile(&rps, 0.25),
                rp_q75: quantile(&rps, 0.75),
                mean_rank: r.iter().sum::<f64>() / r.len() as f64,
                min_rank: r.iter().copied().fold(f64::INFINITY, f64::min),
                max_rank: r.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                cv: (!cvs.is_empty()).then(|| cvs.iter().sum::<f64>() / cvs.len() as f64),
                p_vs_reference: p_of(m),
            }
        })
        .collect();

    let optima = reference_optima(records);
    let mut sums: BTreeMap<String, BTreeMap<String, (Vec<f64>, usize)>> = BTreeMap::new();
    for r in records {
        let curve = regret_curve(r, optima[&r.header.problem])?;
        let e = sums
            .entry(r.header.strategist.to_string())
            .or_default()
            .entry(r.header.problem.clone())
            .or_insert_with(|| (vec![0.0; curve.values().len()], 0));
        e.0.iter_mut().zip(curve.values()).for_each(|(s, v)| *s += v);
        e.1 += 1;
    }
    let mean_curves = sums
        .into_iter()
        .map(|(m, ps)| (m, ps.into_iter().map(|(p, (s, n))| (p, s.into_iter().map(|v| v / n as f64).collect())).collect()))
        .collect();

    Ok(Report {
        schema: REPORT_SCHEMA,
        reference: reference.to_string(),
        relative_performance: rp,
        ranks: rank,
        summary,
        friedman,
        behavior: behavior_stats(records),
        mean_curves,
        table,
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{x:.6}"))
}

impl Report {
    pub fn summary_csv(&self) -> String {
        let mut s = format!("# lmabo summary schema {}\n", self.schema);
        s.push_str("method,mean_auc,mean_rp,rp_q25,rp_q75,mean_rank,min_rank,max_rank,cv_auc,p_vs_reference\n");
        for r in &self.summary {
            let p = if r.method == self.reference { String::new() } else { fmt_opt(r.p_vs_reference) };
            let _ = writeln!(
                s,
                "{},{:.6},{:.6},{:.6},{:.6},{:.6},{},{},{},{}",
                r.method, r.mean_auc, r.mean_rp, r.rp_q25, r.rp_q75, r.mean_rank, r.min_rank, r.max_rank, fmt_opt(r.cv), p
            );
        }
        s
    }

    pub fn tests_text(&self) -> String {
        let mut s = String::new();
        match self.friedman {
            Some((stat, p)) => {
                let _ = writeln!(s, "Friedman chi-squared = {stat:.6}, p = {p:.6} ({} methods, {} problems)", self.table.methods.len(), self.table.problems.len());
            }
            None => s.push_str("Friedman test not applicable (needs at least 3 methods and 2 problems)\n"),
        }
        let _ = writeln!(s, "Signed-rank tests against {} (Holm-adjusted, alpha 0.05):", self.reference);
        for r in self.summary.iter().filter(|r| r.method != self.reference) {
            let verdict = match r.p_vs_reference {
                Some(p) if p < 0.05 => "significant",
                Some(_) => "not significant",
                None => "not applicable (fewer than 6 problems)",
            };
            let _ = writeln!(s, "  {}: p = {} ({verdict})", r.method, fmt_opt(r.p_vs_reference));
        }
        if !self.relative_performance.guarded_problems.is_empty() {
            let _ = writeln!(s, "Zero best AUC (guarded): {}", self.relative_performance.guarded_problems.join(", "));
        }
        s
    }
}

/// Writes `summary.csv`, `report.json` (plot data) and `tests.txt` into
/// `dir`. Returns the paths written.
pub fn emit_report(report: &Report, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let files = [
        (dir.join("summary.csv"), report.summary_csv()),
        (dir.join("report.json"), serde_json::to_string_pretty(report)? + "\n"),
        (dir.join("tests.txt"), report.tests_text()),
    ];
    for (p, body) in &files {
        std::fs::write(p, body)?;
    }
    Ok(files.into_iter().map(|(p, _)| p).collect())
}

/// Loads every complete record (`*.jsonl`, transcripts excluded) under `dir`.
pub fn load_records(dir: &Path) -> Result<Vec<RunRecord>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::Data(format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            let name = p.file_name().and_then(|n| n.to_str()).unwrap_or("");
            name.ends_with(".jsonl") && !name.ends_with(".transcript.jsonl")
        })
        .collect();
    paths.sort();
    let mut out = Vec::new();
    for p in paths {
        let r = RunRecord::read_jsonl(&p)?;
        if r.is_complete() {
            out.push(r);
        } else {
            tracing::warn!("{}: incomplete record skipped", p.display());
        }
    }
    if out.is_empty() {
        return Err(Error::Data(format!("no complete run records in {}", dir.display())));
    }
    Ok(out)
}
