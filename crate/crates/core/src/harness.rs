//! The optimization loop: initial design, refit, strategist query,
//! acquisition maximization, evaluation and persistence.

use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::acquisition::{optimize_acquisition, AcqContext, AcquisitionKind, CandidateSet, McConfig, DEFAULT_KAPPA};
use crate::benchmarks::{find_problem, load_external_problem, Problem};
use crate::error::{Error, Result};
use crate::llm::{ChatTransport, HttpTransport, LlmSession, StateSnapshot, Transcript, TransportConfig};
use crate::lowdisc;
use crate::rng::{derive_seed, derived, stream, Rng};
use crate::space::{sq_dist, Bounds};
use crate::strategist::{
    esp_select, hedge_rewards, propose_all, select_simple, EspConfig, HedgeState, StrategistKind, DEFAULT_ETA,
};
use crate::surrogate::{fit, Dataset, FitConfig, GpModel, KernelParams};

/// Version of the record line format.
pub const RECORD_SCHEMA: u32 = 1;

/// Noise floors (log variance) tried in turn when a fit fails.
const RECOVERY_LOG_NOISE: [f64; 3] = [-9.21, -6.91, -4.61];

/// `2·dim + 1` scrambled low-discrepancy points inside `bounds`.
pub fn initial_design(bounds: &Bounds, rng: &mut Rng) -> Vec<Vec<f64>> {
    lowdisc::points_in(bounds, 2 * bounds.dim() + 1, rng)
}

/// 50 iterations below ten dimensions, 100 from ten upwards.
pub fn default_budget(dim: usize) -> usize {
    if dim < 10 {
        50
    } else {
        100
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    /// Registry name (or `Name-kD` alias).
    pub problem: String,
    /// JSON manifest of an externally evaluated problem; overrides `problem`.
    pub problem_file: Option<PathBuf>,
    pub strategist: StrategistKind,
    pub seed: u64,
    pub budget: Option<usize>,
    pub n_init: Option<usize>,
    /// Observation noise added to the objective.
    pub noise_std: f64,
    pub fit: FitConfig,
    pub mc: McConfig,
    pub kappa: f64,
    pub eta: f64,
    pub esp: EspConfig,
    pub transport: TransportConfig,
    /// Problem description inserted into the opening prompt.
    pub task_context: Option<String>,
    /// Where the record (and transcript) go; nothing is written when unset.
    pub output_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            problem: String::new(),
            problem_file: None,
            strategist: StrategistKind::Static(AcquisitionKind::LogEi),
            seed: 0,
            budget: None,
            n_init: None,
            noise_std: 0.0,
            fit: FitConfig::default(),
            mc: McConfig::default(),
            kappa: DEFAULT_KAPPA,
            eta: DEFAULT_ETA,
            esp: EspConfig::default(),
            transport: TransportConfig::default(),
            task_context: None,
            output_dir: None,
        }
    }
}

impl RunConfig {
    pub fn new(problem: impl Into<String>, strategist: StrategistKind, seed: u64) -> Self {
        RunConfig { problem: problem.into(), strategist, seed, ..Default::default() }
    }

    pub fn resolve_problem(&self) -> Result<Problem> {
        let p = match &self.problem_file {
            Some(path) => load_external_problem(path)?,
            None => find_problem(&self.problem)?,
        };
        p.with_noise(self.noise_std)
    }

    /// `{problem}__{strategist}__seed{n}`, with path-hostile characters replaced.
    pub fn run_id(&self, problem: &Problem) -> String {
        let clean = |s: &str| s.chars().map(|c| if c.is_ascii_alphanumeric() || "._-".contains(c) { c } else { '_' }).collect::<String>();
        format!("{}__{}__seed{}", clean(&problem.name), clean(&self.strategist.to_string()), self.seed)
    }

    pub fn record_path(&self, problem: &Problem) -> Option<PathBuf> {
        self.output_dir.as_ref().map(|d| d.join(format!("{}.jsonl", self.run_id(problem))))
    }

    pub fn transcript_path(&self, problem: &Problem) -> Option<PathBuf> {
        self.output_dir.as_ref().map(|d| d.join(format!("{}.transcript.jsonl", self.run_id(problem))))
    }
}

/// First line of a record file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunHeader {
    pub schema: u32,
    pub run_id: String,
    pub problem: String,
    pub dim: usize,
    pub strategist: StrategistKind,
    pub seed: u64,
    pub budget: usize,
    pub known_optimum: Option<f64>,
    pub init_points: Vec<Vec<f64>>,
    pub init_values: Vec<f64>,
    pub config: RunConfig,
}

/// One loop iteration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub chosen: AcquisitionKind,
    pub justification: String,
    /// The strategist's reply was unusable and UCB was substituted.
    pub fallback_used: bool,
    pub x: Vec<f64>,
    pub y: f64,
    /// Best raw value seen after this evaluation.
    pub incumbent: f64,
    /// Distance (unit cube) from the point evaluated before this iteration to
    /// its nearest predecessor, as reported to the strategist.
    pub shortest_distance: f64,
    pub params: KernelParams,
    /// The fit needed a raised noise floor.
    pub fit_recovered: bool,
    /// Acquisition maximization failed; `x` is a random point.
    pub random_fallback: bool,
    /// Portfolio gains after this iteration (Hedge strategists only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hedge: Option<HedgeState>,
    pub wall_ms: u64,
}

/// Last line of a finished record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunFooter {
    pub completed: bool,
    pub abort_reason: Option<String>,
    pub evaluations: usize,
    /// Share of strategist queries answered by the UCB fallback (LLM runs).
    pub fallback_rate: Option<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum RecordLine {
    Header(Box<RunHeader>),
    Iteration(Box<IterationRecord>),
    Footer(RunFooter),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub header: RunHeader,
    pub iterations: Vec<IterationRecord>,
    pub footer: Option<RunFooter>,
}

impl RunRecord {
    pub fn is_complete(&self) -> bool {
        self.footer.as_ref().is_some_and(|f| f.completed)
    }

    /// Initial and loop observations in evaluation order.
    pub fn all_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.header.init_values.iter().copied().chain(self.iterations.iter().map(|r| r.y))
    }

    pub fn incumbents(&self) -> Vec<f64> {
        self.iterations.iter().map(|r| r.incumbent).collect()
    }

    pub fn choices(&self) -> Vec<AcquisitionKind> {
        self.iterations.iter().map(|r| r.chosen).collect()
    }

    /// Total objective evaluations (initial design included).
    pub fn evaluations(&self) -> usize {
        self.header.init_values.len() + self.iterations.len()
    }

    /// Copy with timing fields zeroed, for reproducibility comparisons.
    pub fn without_timing(&self) -> RunRecord {
        let mut r = self.clone();
        r.iterations.iter_mut().for_each(|i| i.wall_ms = 0);
        r
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("jsonl.tmp");
        {
            let mut w = std::io::BufWriter::new(std::fs::File::create(&tmp)?);
            write_line(&mut w, &RecordLine::Header(Box::new(self.header.clone())))?;
            for it in &self.iterations {
                write_line(&mut w, &RecordLine::Iteration(Box::new(it.clone())))?;
            }
            if let Some(f) = &self.footer {
                write_line(&mut w, &RecordLine::Footer(f.clone()))?;
            }
            w.flush()?;
        }
        std::fs::rename(tmp, path)?;
        Ok(())
    }

    /// Reads a record, tolerating a truncated last line from a crash.
    pub fn read_jsonl(path: &Path) -> Result<RunRecord> {
        let file = std::fs::File::open(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::NotFound(format!("record {}", path.display())),
            _ => Error::Io(e),
        })?;
        let lines: Vec<String> = BufReader::new(file).lines().collect::<std::io::Result<_>>()?;
        let mut header = None;
        let mut iterations = Vec::new();
        let mut footer = None;
        let n = lines.len();
        for (i, line) in lines.iter().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let parsed: RecordLine = match serde_json::from_str(line) {
                Ok(p) => p,
                Err(_) if i + 1 == n && header.is_some() => {
                    tracing::warn!("{}: ignoring truncated final line", path.display());
                    break;
                }
                Err(e) => return Err(Error::Data(format!("{}:{}: {e}", path.display(), i + 1))),
            };
            match parsed {
                RecordLine::Header(h) => header = Some(*h),
                RecordLine::Iteration(it) => {
                    if it.iteration != iterations.len() + 1 {
                        return Err(Error::Data(format!("{}:{}: iteration out of sequence", path.display(), i + 1)));
                    }
                    iterations.push(*it);
                }
                RecordLine::Footer(f) => footer = Some(f),
            }
        }
        let header = header.ok_or_else(|| Error::Data(format!("{}: missing header", path.display())))?;
        Ok(RunRecord { header, iterations, footer })
    }
}

fn write_line<W: Write>(w: &mut W, line: &RecordLine) -> Result<()> {
    serde_json::to_writer(&mut *w, line)?;
    w.write_all(b"\n")?;
    Ok(())
}

fn append_line(path: &Path, line: &RecordLine) -> Result<()> {
    let mut f = std::fs::OpenOptions::new().append(true).open(path)?;
    let mut buf = serde_json::to_vec(line)?;
    buf.push(b'\n');
    f.write_all(&buf)?;
    f.sync_data()?;
    Ok(())
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let std = if v.len() > 1 { (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() } else { 0.0 };
    (mean, std)
}

/// Unit-cube distance from the newest point to its nearest predecessor.
pub fn shortest_distance(dataset: &Dataset) -> f64 {
    let pts = dataset.unit_points();
    let Some((last, rest)) = pts.split_last() else { return 0.0 };
    rest.iter().map(|p| sq_dist(p, last)).fold(f64::INFINITY, f64::min).sqrt().min(f64::MAX)
}

/// Summary handed to the strategist before choosing at the current state.
/// `budget` is the loop length, `n_init` the size of the initial design.
pub fn state_snapshot(model: &GpModel, budget: usize, n_init: usize) -> StateSnapshot {
    let data = model.dataset();
    let values = data.values();
    let (f_mean, f_std) = mean_std(values);
    let ls = &model.params().lengthscales;
    let (ls_mean, ls_std) = mean_std(ls);
    let done = data.len().saturating_sub(n_init);
    let d = shortest_distance(data);
    StateSnapshot {
        n_evaluated: data.len(),
        remaining: budget.saturating_sub(done),
        dim: data.dim(),
        f_min: values.iter().copied().fold(f64::INFINITY, f64::min),
        f_max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        f_mean,
        f_std,
        shortest_distance: if d.is_finite() { d } else { 0.0 },
        ls_min: ls.iter().copied().fold(f64::INFINITY, f64::min),
        ls_max: ls.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        ls_mean,
        ls_std,
        outputscale: model.params().outputscale,
    }
}

/// Fits the surrogate, raising the noise floor step by step on failure.
fn fit_with_recovery(dataset: &Dataset, config: &FitConfig, rng_seed: u64) -> Result<(GpModel, bool)> {
    let first = fit(dataset, config, &mut crate::rng::seeded(rng_seed));
    let err = match first {
        Ok(m) => return Ok((m, false)),
        Err(e) => e,
    };
    tracing::warn!("GP fit failed ({err}); retrying with a higher noise floor");
    for (i, &floor) in RECOVERY_LOG_NOISE.iter().enumerate() {
        let mut c = config.clone();
        c.min_log_noise = c.min_log_noise.max(floor);
        if let Some(n) = c.fixed_noise.as_mut() {
            *n = n.max(floor.exp());
        }
        match fit(dataset, &c, &mut derived(rng_seed, &[i as u64 + 1])) {
            Ok(m) => {
                tracing::warn!("GP fit recovered with log-noise floor {floor}");
                return Ok((m, true));
            }
            Err(e) => tracing::warn!("GP fit with log-noise floor {floor} failed: {e}"),
        }
    }
    Err(err)
}

enum Driver {
    Simple,
    Hedge(HedgeState),
    Esp,
    Llm(Box<LlmSession>),
}

/// Runs with the endpoint described by `config.transport` for LLM runs.
pub fn run(config: &RunConfig) -> Result<RunRecord> {
    let problem = config.resolve_problem()?;
    let transport: Option<Box<dyn ChatTransport>> = match config.strategist {
        StrategistKind::Llm => Some(Box::new(HttpTransport::from_config(&config.transport)?)),
        _ => None,
    };
    run_with(config, &problem, transport)
}

/// Runs `config` on `problem`. An LLM strategist talks to `transport`.
///
/// With an output directory set the record is appended line by line; an
/// existing partial record is resumed and a complete one returned as is.
pub fn run_with(config: &RunConfig, problem: &Problem, transport: Option<Box<dyn ChatTransport>>) -> Result<RunRecord> {
    config.strategist.validate()?;
    config.mc.validate()?;
    let dim = problem.dim;
    let budget = config.budget.unwrap_or_else(|| default_budget(dim));
    if budget == 0 {
        return Err(Error::arg("budget must be at least 1"));
    }
    let n_init = config.n_init.unwrap_or(2 * dim + 1);
    if n_init < 2 {
        return Err(Error::arg("the initial design needs at least two points"));
    }
    let run_id = config.run_id(problem);
    let record_path = config.record_path(problem);
    let transcript_path = config.transcript_path(problem);
    if let Some(dir) = &config.output_dir {
        std::fs::create_dir_all(dir)?;
    }

    let previous = match &record_path {
        Some(p) if p.exists() => Some(RunRecord::read_jsonl(p)?),
        _ => None,
    };
    if let Some(prev) = &previous {
        let h = &prev.header;
        if h.problem != problem.name || h.strategist != config.strategist || h.seed != config.seed || h.budget != budget {
            return Err(Error::Config(format!("{} belongs to a different run configuration", run_id)));
        }
        if prev.footer.is_some() {
            return Ok(prev.clone());
        }
    }

    let header = match &previous {
        Some(prev) => prev.header.clone(),
        None => {
            let mut init_rng = derived(config.seed, &[stream::INIT_DESIGN]);
            let init_points = lowdisc::points_in(&problem.bounds, n_init, &mut init_rng);
            let mut noise_rng = derived(config.seed, &[stream::NOISE, 0]);
            let init_values =
                init_points.iter().map(|x| problem.evaluate(x, Some(&mut noise_rng))).collect::<Result<Vec<_>>>()?;
            RunHeader {
                schema: RECORD_SCHEMA,
                run_id: run_id.clone(),
                problem: problem.name.clone(),
                dim,
                strategist: config.strategist.clone(),
                seed: config.seed,
                budget,
                known_optimum: problem.known_optimum,
                init_points,
                init_values,
                config: config.clone(),
            }
        }
    };
    let mut record = RunRecord { header, iterations: previous.map(|p| p.iterations).unwrap_or_default(), footer: None };
    if let Some(p) = &record_path {
        record.write_jsonl(p)?;
    }

    let mut dataset =
        Dataset::new(record.header.init_points.clone(), record.header.init_values.clone(), problem.bounds.clone())?;
    for it in &record.iterations {
        dataset.push(it.x.clone(), it.y)?;
    }

    let portfolio = config.strategist.portfolio();
    let mut driver = match &config.strategist {
        StrategistKind::Hedge(v) => Driver::Hedge(match record.iterations.last().and_then(|r| r.hedge.clone()) {
            Some(h) => h,
            None => HedgeState::new(*v, portfolio.clone(), config.eta)?,
        }),
        StrategistKind::Esp => Driver::Esp,
        StrategistKind::Llm => {
            let transport = transport.ok_or_else(|| Error::Config("an LLM strategist needs a transport".into()))?;
            let done = record.iterations.len();
            let resumed = match &transcript_path {
                Some(p) if done > 0 && p.exists() => Some(Transcript::read_jsonl(p)?),
                _ => None,
            };
            let session = match resumed {
                Some(mut t) if t.turns.len() >= 2 + 2 * done => {
                    t.turns.truncate(2 + 2 * done);
                    LlmSession::resume(t, transport, config.transport.retry.clone(), config.transport.history_window)
                }
                _ => LlmSession::start(
                    &run_id,
                    transport,
                    config.transport.retry.clone(),
                    config.transport.history_window,
                    config.task_context.as_deref(),
                )?,
            };
            Driver::Llm(Box::new(session))
        }
        _ => Driver::Simple,
    };
    let mut improvements = record
        .iterations
        .iter()
        .scan(record.header.init_values.iter().copied().fold(f64::INFINITY, f64::min), |best, it| {
            let improved = it.y < *best;
            *best = best.min(it.y);
            Some(improved)
        })
        .filter(|&b| b)
        .count();
    let mut incumbent = dataset.values().iter().copied().fold(f64::INFINITY, f64::min);
    let mut abort_reason = None;

    for t in record.iterations.len() + 1..=budget {
        let started = Instant::now();
        let mut fit_config = config.fit.clone();
        fit_config.warm_start = record.iterations.last().map(|r| r.params.clone());
        let (model, fit_recovered) = match fit_with_recovery(&dataset, &fit_config, derive_seed(config.seed, &[stream::FIT, t as u64])) {
            Ok(m) => m,
            Err(e) => {
                tracing::error!("{run_id}: iteration {t}: surrogate could not be fitted, aborting: {e}");
                abort_reason = Some(format!("iteration {t}: {e}"));
                break;
            }
        };
        let snapshot = state_snapshot(&model, budget, n_init);
        let acq_seed = derive_seed(config.seed, &[stream::ACQUISITION, t as u64]);
        let ctx = AcqContext::new(&model, config.kappa, config.mc.clone(), acq_seed)?;
        let mut strat_rng = derived(config.seed, &[stream::STRATEGIST, t as u64]);
        let mut acq_rng = derived(acq_seed, &[0]);

        let mut justification = String::new();
        let mut fallback_used = false;
        let mut nominated: Option<Vec<f64>> = None;
        let mut proposals = Vec::new();
        let chosen = match &mut driver {
            Driver::Simple => select_simple(&config.strategist, t, budget, &mut strat_rng)?,
            Driver::Hedge(state) => {
                proposals = propose_all(&state.portfolio, &ctx, &mut acq_rng);
                let available: Vec<usize> = (0..proposals.len()).filter(|&i| proposals[i].is_some()).collect();
                match state.sample(&available, &mut strat_rng) {
                    Ok(i) => {
                        nominated = proposals[i].clone();
                        state.portfolio[i]
                    }
                    Err(e) => {
                        tracing::warn!("{run_id}: iteration {t}: {e}");
                        AcquisitionKind::Ucb
                    }
                }
            }
            Driver::Esp => {
                proposals = propose_all(&portfolio, &ctx, &mut acq_rng);
                let cands = CandidateSet::quasi_random(&problem.bounds, config.esp.n_candidates.max(1), &mut strat_rng)?;
                match esp_select(&model, &proposals, &cands, &config.esp, &mut strat_rng) {
                    Ok(i) => {
                        nominated = proposals[i].clone();
                        portfolio[i]
                    }
                    Err(e) => {
                        tracing::warn!("{run_id}: iteration {t}: {e}");
                        AcquisitionKind::Ucb
                    }
                }
            }
            Driver::Llm(session) => {
                let d = session.select(&snapshot);
                justification = d.justification;
                fallback_used = d.fallback_used;
                d.kind
            }
        };

        let mut random_fallback = false;
        let x = match nominated {
            Some(x) => x,
            None => match optimize_acquisition(chosen, &ctx, &mut acq_rng) {
                Ok(x) => x,
                Err(e) => {
                    tracing::warn!("{run_id}: iteration {t}: {chosen} maximization failed, evaluating a random point: {e}");
                    random_fallback = true;
                    let mut r = derived(config.seed, &[stream::FALLBACK, t as u64]);
                    lowdisc::points_in(&problem.bounds, 1, &mut r).remove(0)
                }
            },
        };
        let x = problem.bounds.clamp(&x);
        let mut noise_rng = derived(config.seed, &[stream::NOISE, t as u64]);
        let y = match problem.evaluate(&x, Some(&mut noise_rng)) {
            Ok(y) => y,
            Err(e) => {
                tracing::error!("{run_id}: iteration {t}: evaluation failed, aborting: {e}");
                abort_reason = Some(format!("iteration {t}: {e}"));
                break;
            }
        };
        dataset.push(x.clone(), y)?;
        if y < incumbent {
            improvements += 1;
        }
        incumbent = incumbent.min(y);

        let hedge = match &mut driver {
            Driver::Hedge(state) => {
                // rewards under the posterior that already includes y
                let updated = GpModel::new(dataset.clone(), model.params().clone())?;
                let rewards = hedge_rewards(&updated, &proposals)?;
                state.adapt_memory(improvements as f64 / t as f64);
                state.update(&rewards)?;
                Some(state.clone())
            }
            _ => None,
        };

        let it = IterationRecord {
            iteration: t,
            chosen,
            justification,
            fallback_used,
            x,
            y,
            incumbent,
            shortest_distance: snapshot.shortest_distance,
            params: model.params().clone(),
            fit_recovered,
            random_fallback,
            hedge,
            wall_ms: started.elapsed().as_millis() as u64,
        };
        if let Some(p) = &record_path {
            append_line(p, &RecordLine::Iteration(Box::new(it.clone())))?;
        }
        if let (Driver::Llm(session), Some(p)) = (&driver, &transcript_path) {
            session.transcript.write_jsonl(p)?;
        }
        record.iterations.push(it);
    }

    let fallback_rate = match &driver {
        Driver::Llm(s) => Some(s.fallback_rate()),
        _ => None,
    };
    if let (Driver::Llm(session), Some(p)) = (&driver, &transcript_path) {
        session.transcript.write_jsonl(p)?;
    }
    let footer = RunFooter {
        completed: abort_reason.is_none(),
        abort_reason,
        evaluations: record.evaluations(),
        fallback_rate,
    };
    if let Some(p) = &record_path {
        append_line(p, &RecordLine::Footer(footer.clone()))?;
    }
    record.footer = Some(footer);
    Ok(record)
}

/// The transcript written next to a record, when the run used an LLM.
pub fn transcript_for(config: &RunConfig) -> Result<Transcript> {
    let problem = config.resolve_problem()?;
    let path = config.transcript_path(&problem).ok_or_else(|| Error::arg("no output directory configured"))?;
    Transcript::read_jsonl(&path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::MockTransport;
    use crate::rng::seeded;

    fn quick(problem: &str, strategist: &str, seed: u64, budget: usize) -> RunConfig {
        let mut c = RunConfig::new(problem, strategist.parse().unwrap(), seed);
        c.budget = Some(budget);
        c.fit.n_restarts = 2;
        c.mc = McConfig { n_probes: 128, n_starts: 3, ..Default::default() };
        c
    }

    #[test]
    fn budget_and_design_sizes() {
        assert_eq!(default_budget(5), 50);
        assert_eq!(default_budget(13), 100);
        assert_eq!(default_budget(10), 100);
        assert_eq!(default_budget(9), 50);
        for dim in [2usize, 5] {
            let b = Bounds::uniform(dim, -3.0, 4.0);
            let pts = initial_design(&b, &mut seeded(3));
            assert_eq!(pts.len(), 2 * dim + 1);
            assert!(pts.iter().all(|p| b.contains(p)));
            for i in 0..pts.len() {
                for j in 0..i {
                    assert!(sq_dist(&pts[i], &pts[j]) > 0.0);
                }
            }
            assert_eq!(pts, initial_design(&b, &mut seeded(3)));
        }
    }

    fn model_with(n: usize, dim: usize) -> GpModel {
        let b = Bounds::unit(dim);
        let pts = lowdisc::points_in(&b, n, &mut seeded(1));
        let vals: Vec<f64> = pts.iter().map(|p| p.iter().sum()).collect();
        let params = KernelParams::new(vec![0.5; dim], 1.0, 1e-4, Default::default()).unwrap();
        GpModel::new(Dataset::new(pts, vals, b).unwrap(), params).unwrap()
    }

    #[test]
    fn remaining_iterations_follow_evaluations() {
        assert_eq!(state_snapshot(&model_with(11, 5), 50, 11).remaining, 50);
        assert_eq!(state_snapshot(&model_with(21, 5), 50, 11).remaining, 40);
        assert_eq!(state_snapshot(&model_with(60, 5), 50, 11).remaining, 1);
    }

    #[test]
    fn duplicate_last_point_has_zero_distance() {
        let b = Bounds::unit(2);
        let d = Dataset::new(vec![vec![0.1, 0.2], vec![0.5, 0.5], vec![0.1, 0.2]], vec![1.0, 2.0, 1.5], b).unwrap();
        assert_eq!(shortest_distance(&d), 0.0);
        let d2 = Dataset::new(vec![vec![0.0, 0.0], vec![0.3, 0.4]], vec![1.0, 2.0], Bounds::unit(2)).unwrap();
        assert!((shortest_distance(&d2) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn static_run_is_reproducible_and_monotone() {
        let c = quick("Griewank-2D", "Scripted-EI", 7, 6);
        let p = c.resolve_problem().unwrap();
        let a = run_with(&c, &p, None).unwrap();
        let b = run_with(&c, &p, None).unwrap();
        assert_eq!(a.without_timing(), b.without_timing());
        assert_eq!(a.evaluations(), 5 + 6);
        assert!(a.incumbents().windows(2).all(|w| w[1] <= w[0]));
        assert!(a.is_complete());
    }

    #[test]
    fn resumes_partial_record_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = quick("Beale", "Alt-EI-TS-2", 3, 5);
        c.output_dir = Some(dir.path().to_path_buf());
        let p = c.resolve_problem().unwrap();
        let full = run_with(&c, &p, None).unwrap();
        let path = c.record_path(&p).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 1 + 5 + 1);

        // drop the footer and the last two iterations, leave a torn line
        let kept: Vec<&str> = text.lines().take(1 + 3).collect();
        std::fs::write(&path, format!("{}\n{{\"type\":\"iter", kept.join("\n"))).unwrap();
        let resumed = run_with(&c, &p, None).unwrap();
        assert_eq!(resumed.without_timing().iterations, full.without_timing().iterations);
        let again = RunRecord::read_jsonl(&path).unwrap();
        assert_eq!(again.iterations.len(), 5);
        assert!(again.is_complete());
    }

    #[test]
    fn llm_run_survives_dead_transport() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = quick("SixHumpCamel", "LLM", 1, 4);
        c.output_dir = Some(dir.path().to_path_buf());
        c.transport.retry = crate::llm::RetryPolicy::immediate(2);
        let p = c.resolve_problem().unwrap();
        let r = run_with(&c, &p, Some(Box::new(MockTransport::Down))).unwrap();
        assert!(r.is_complete());
        assert!(r.iterations.iter().all(|i| i.fallback_used && i.chosen == AcquisitionKind::Ucb));
        assert_eq!(r.footer.as_ref().unwrap().fallback_rate, Some(1.0));
        let t = transcript_for(&c).unwrap();
        assert_eq!(t.turns.len(), 2 * (4 + 1));
    }

    #[test]
    fn hedge_run_records_gains() {
        let mut c = quick("Beale", "GP-Hedge", 2, 2);
        c.mc = McConfig {
            n_probes: 64,
            n_starts: 2,
            kg_inner: 32,
            lookahead_candidates: 64,
            discrete_candidates: 64,
            entropy_optimizer_candidates: 64,
            ..Default::default()
        };
        let p = c.resolve_problem().unwrap();
        let r = run_with(&c, &p, None).unwrap();
        let h = r.iterations[1].hedge.as_ref().unwrap();
        assert_eq!(h.gains.len(), 12);
        assert!(h.gains.iter().all(|g| g.is_finite()));
        assert!(h.portfolio.contains(&r.iterations[1].chosen));
    }
}
