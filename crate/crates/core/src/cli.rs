//! Campaign manifests and the command implementations behind the `lmabo`
//! binary. Every command writes its human-readable output to a caller-supplied
//! writer so it can be exercised in tests.

use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Deserialize;

use crate::acquisition::AcquisitionKind;
use crate::analysis::{analyze, emit_report, load_records, Report};
use crate::benchmarks::{problem_registry, Problem};
use crate::error::{Error, Result};
use crate::harness::{self, RunConfig, RunRecord};
use crate::llm::{Role, Transcript};
use crate::strategist::StrategistKind;

pub const MANIFEST_SCHEMA: u32 = 1;

/// Keys that identify a cell and therefore cannot be overridden.
const RESERVED_KEYS: [&str; 5] = ["problem", "problem_file", "strategist", "seed", "output_dir"];

/// Declarative description of a campaign: the cartesian product of problems,
/// strategists and seeds, with shared settings and per-pair overrides.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignManifest {
    pub schema: u32,
    /// Record directory, relative to the manifest.
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default)]
    pub problems: Vec<String>,
    /// Externally evaluated problem descriptions (JSON), relative to the manifest.
    #[serde(default)]
    pub problem_files: Vec<PathBuf>,
    pub strategists: Vec<String>,
    pub seeds: Vec<u64>,
    /// Run settings shared by every cell (any `RunConfig` field).
    #[serde(default)]
    pub defaults: toml::Table,
    #[serde(default)]
    pub overrides: Vec<Override>,
}

fn default_output() -> PathBuf {
    PathBuf::from("runs")
}

/// Settings applied to the cells matching `problem` and/or `strategist`
/// (an absent selector matches everything). Later overrides win.
#[derive(Clone, Debug, Deserialize)]
pub struct Override {
    pub problem: Option<String>,
    pub strategist: Option<String>,
    #[serde(flatten)]
    pub settings: toml::Table,
}

/// One (problem, strategist, seed) run with its resolved configuration.
#[derive(Clone, Debug)]
pub struct Cell {
    pub config: RunConfig,
    pub problem: Problem,
    pub run_id: String,
    pub record_path: PathBuf,
}

impl Cell {
    pub fn label(&self) -> String {
        format!("({}, {}, seed {})", self.problem.name, self.config.strategist, self.config.seed)
    }

    /// True when a record with a footer already exists.
    pub fn is_finished(&self) -> bool {
        self.record_path.exists() && RunRecord::read_jsonl(&self.record_path).is_ok_and(|r| r.footer.is_some())
    }
}

fn merge(into: &mut toml::Table, from: &toml::Table) {
    for (k, v) in from {
        match (into.get_mut(k), v) {
            (Some(toml::Value::Table(a)), toml::Value::Table(b)) => merge(a, b),
            _ => {
                into.insert(k.clone(), v.clone());
            }
        }
    }
}

fn check_reserved(table: &toml::Table, place: &str) -> Result<()> {
    match RESERVED_KEYS.iter().find(|k| table.contains_key(**k)) {
        Some(k) => Err(Error::Validation(format!("{place}: '{k}' is set by the problems/strategists/seeds lists"))),
        None => Ok(()),
    }
}

impl CampaignManifest {
    pub fn parse(text: &str) -> Result<Self> {
        let m: CampaignManifest = toml::from_str(text).map_err(|e| Error::Validation(format!("manifest: {e}")))?;
        m.validate_shape()?;
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Validation(m) => Error::Validation(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    fn validate_shape(&self) -> Result<()> {
        if self.schema != MANIFEST_SCHEMA {
            return Err(Error::Validation(format!("schema: expected {MANIFEST_SCHEMA}, found {}", self.schema)));
        }
        if self.problems.is_empty() && self.problem_files.is_empty() {
            return Err(Error::Validation("problems: at least one problem or problem file is required".into()));
        }
        if self.strategists.is_empty() {
            return Err(Error::Validation("strategists: at least one strategist is required".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Validation("seeds: at least one seed is required".into()));
        }
        let mut seeds = self.seeds.clone();
        seeds.sort_unstable();
        if let Some(w) = seeds.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Validation(format!("seeds: seed {} is listed twice", w[0])));
        }
        check_reserved(&self.defaults, "defaults")?;
        for (i, o) in self.overrides.iter().enumerate() {
            check_reserved(&o.settings, &format!("overrides[{i}]"))?;
        }
        Ok(())
    }

    /// Resolves every cell. Fails on the first cell that cannot be configured,
    /// naming it; nothing is executed by planning.
    pub fn plan(&self, base_dir: &Path) -> Result<Vec<Cell>> {
        let output = base_dir.join(&self.output);
        let entries: Vec<(String, Option<PathBuf>)> = self
            .problems
            .iter()
            .map(|p| (p.clone(), None))
            .chain(self.problem_files.iter().map(|f| (f.display().to_string(), Some(base_dir.join(f)))))
            .collect();
        let mut cells = Vec::new();
        for (label, file) in &entries {
            for strat in &self.strategists {
                for &seed in &self.seeds {
                    let cell_name = format!("cell ({label}, {strat}, seed {seed})");
                    let fail = |e: Error| Error::Validation(format!("{cell_name}: {e}"));
                    let kind: StrategistKind = strat.parse().map_err(fail)?;
                    let mut table = self.defaults.clone();
                    for o in &self.overrides {
                        let p_ok = o.problem.as_ref().is_none_or(|p| p.eq_ignore_ascii_case(label));
                        let s_ok = o.strategist.as_ref().is_none_or(|s| s.eq_ignore_ascii_case(strat));
                        if p_ok && s_ok {
                            merge(&mut table, &o.settings);
                        }
                    }
                    let mut config: RunConfig = toml::Value::Table(table)
                        .try_into()
                        .map_err(|e: toml::de::Error| Error::Validation(format!("{cell_name}: {}", e.message())))?;
                    config.problem = label.clone();
                    config.problem_file = file.clone();
                    config.strategist = kind;
                    config.seed = seed;
                    config.output_dir = Some(output.clone());
                    config.strategist.validate().map_err(fail)?;
                    config.mc.validate().map_err(fail)?;
                    let problem = config.resolve_problem().map_err(fail)?;
                    let record_path = config.record_path(&problem).expect("output directory is set");
                    cells.push(Cell { run_id: config.run_id(&problem), config, problem, record_path });
                }
            }
        }
        Ok(cells)
    }
}

/// Outcome of `cmd_run`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunSummary {
    pub planned: usize,
    /// Cells whose record was already finished.
    pub skipped: usize,
    pub executed: usize,
    /// Cell label and reason.
    pub failed: Vec<(String, String)>,
}

impl RunSummary {
    pub fn success(&self) -> bool {
        self.failed.is_empty()
    }
}

/// Plans the manifest and runs every cell that has no finished record, with
/// at most `parallel` cells at a time.
pub fn cmd_run(manifest_path: &Path, parallel: usize, dry_run: bool, out: &mut dyn Write) -> Result<RunSummary> {
    let manifest = CampaignManifest::load(manifest_path)?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let cells = manifest.plan(base)?;
    let finished: Vec<bool> = cells.iter().map(Cell::is_finished).collect();
    // Fail before any work starts rather than midway through the pool.
    let needs_key = cells.iter().zip(&finished).find(|(c, done)| !**done && c.config.strategist == StrategistKind::Llm);
    if let (false, Some((c, _))) = (dry_run, needs_key) {
        c.config.transport.api_key().map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", c.label())),
            other => other,
        })?;
    }
    let mut summary = RunSummary { planned: cells.len(), skipped: finished.iter().filter(|f| **f).count(), ..Default::default() };

    if dry_run {
        writeln!(out, "plan: {} cells ({} already finished)", cells.len(), summary.skipped)?;
        for (c, done) in cells.iter().zip(&finished) {
            let budget = c.config.budget.unwrap_or_else(|| harness::default_budget(c.problem.dim));
            writeln!(out, "  {} {} budget {budget} -> {}", if *done { "done" } else { "todo" }, c.label(), c.record_path.display())?;
        }
        return Ok(summary);
    }

    let todo: Vec<&Cell> = cells.iter().zip(&finished).filter(|(_, d)| !**d).map(|(c, _)| c).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallel.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let results: Vec<Result<RunRecord>> = pool.install(|| todo.par_iter().map(|c| harness::run(&c.config)).collect());
    for (c, r) in todo.iter().zip(results) {
        summary.executed += 1;
        let failure = match r {
            Ok(rec) => rec.footer.as_ref().filter(|f| !f.completed).map(|f| f.abort_reason.clone().unwrap_or_else(|| "aborted".into())),
            Err(e) => Some(e.to_string()),
        };
        match failure {
            Some(reason) => {
                writeln!(out, "failed {}: {reason}", c.label())?;
                summary.failed.push((c.label(), reason));
            }
            None => writeln!(out, "done   {}", c.label())?,
        }
    }
    writeln!(
        out,
        "{} planned, {} already finished, {} executed, {} failed",
        summary.planned,
        summary.skipped,
        summary.executed,
        summary.failed.len()
    )?;
    Ok(summary)
}

/// Analyzes every complete record under `records`, writes the report files
/// into `out_dir` and prints mean RP and mean rank per method.
pub fn cmd_analyze(records: &Path, reference: &str, out_dir: &Path, out: &mut dyn Write) -> Result<Report> {
    let recs = load_records(records)?;
    let report = analyze(&recs, reference)?;
    let files = emit_report(&report, out_dir)?;
    writeln!(out, "{} records, {} methods, {} problems", recs.len(), report.table.methods.len(), report.table.problems.len())?;
    writeln!(out, "{:<24} {:>10} {:>10}", "method", "mean RP", "mean rank")?;
    let mut rows: Vec<_> = report.summary.iter().collect();
    rows.sort_by(|a, b| a.mean_rank.total_cmp(&b.mean_rank).then(a.method.cmp(&b.method)));
    for r in rows {
        writeln!(out, "{:<24} {:>10.3} {:>10.3}", r.method, r.mean_rp, r.mean_rank)?;
    }
    write!(out, "{}", report.tests_text())?;
    for f in files {
        writeln!(out, "wrote {}", f.display())?;
    }
    Ok(report)
}

/// Locates a transcript by run id (or direct path) under `records`.
pub fn transcript_path(records: &Path, run: &str) -> Result<PathBuf> {
    let direct = PathBuf::from(run);
    if direct.is_file() {
        return Ok(direct);
    }
    let p = records.join(format!("{run}.transcript.jsonl"));
    if p.is_file() {
        Ok(p)
    } else {
        Err(Error::NotFound(format!("no transcript for run '{run}' in {}", records.display())))
    }
}

/// Prints each turn with its role; strategist replies also show the parsed
/// decision. Returns the number of turns printed.
pub fn cmd_transcript(records: &Path, run: &str, out: &mut dyn Write) -> Result<usize> {
    let t = Transcript::read_jsonl(&transcript_path(records, run)?)?;
    let portfolio = AcquisitionKind::ALL;
    writeln!(out, "run {} ({} turns, ~{} tokens)", t.run_id, t.turns.len(), t.token_estimate())?;
    for (i, turn) in t.turns.iter().enumerate() {
        writeln!(out, "--- [{i}] {}", turn.role.as_str())?;
        if let Some(e) = &turn.error {
            writeln!(out, "(request failed: {e})")?;
        }
        if !turn.content.is_empty() {
            writeln!(out, "{}", turn.content.trim_end())?;
        }
        if turn.role == Role::Assistant && i >= 2 {
            let d = crate::llm::parse_decision(&turn.content, &portfolio);
            let note = if d.fallback_used { " (fallback)" } else { "" };
            writeln!(out, ">>> decision: {}{note}", d.kind)?;
        }
    }
    Ok(t.turns.len())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ListKind {
    Problems,
    Strategists,
}

/// Strategist tags with a short description.
pub fn strategist_catalog() -> Vec<(String, &'static str)> {
    let mut v: Vec<(String, &'static str)> =
        AcquisitionKind::ALL.iter().map(|k| (k.to_string(), "static acquisition function")).collect();
    v.extend([
        ("Random".to_string(), "uniform draw from the full portfolio each iteration"),
        ("Random-EI-TS".to_string(), "uniform draw from the listed functions"),
        ("Alt-EI-TS-3".to_string(), "alternate two functions every k iterations"),
        ("TwoPhases-TS-EI".to_string(), "explore, then exploit after the split fraction (default 0.5)"),
        ("GP-Hedge".to_string(), "Hedge over the portfolio, posterior-mean rewards"),
        ("No-PASt-BO".to_string(), "Hedge with normalized rewards and memory 0.9"),
        ("SETUP-BO".to_string(), "Hedge with memory adapted to the improvement rate"),
        ("ESP".to_string(), "pick the nomination that most reduces optimum-location entropy"),
        ("Scripted-EI-TS".to_string(), "cycle through a fixed sequence"),
        ("Scripted@<file>".to_string(), "cycle through a sequence read from a file"),
        ("LLM".to_string(), "language-model strategist over a chat-completion endpoint"),
    ]);
    v
}

pub fn cmd_list(kind: ListKind, out: &mut dyn Write) -> Result<usize> {
    match kind {
        ListKind::Problems => {
            let reg = problem_registry();
            writeln!(out, "{:<16} {:>3}  {:<28} {:>14}", "name", "dim", "bounds", "optimum")?;
            for p in &reg {
                let lim = p.bounds.limits();
                let bounds = if lim.iter().all(|l| *l == lim[0]) {
                    format!("[{}, {}]^{}", lim[0].0, lim[0].1, p.dim)
                } else {
                    lim.iter().map(|(a, b)| format!("[{a}, {b}]")).collect::<Vec<_>>().join("x")
                };
                let opt = p.known_optimum.map_or_else(|| "unknown".to_string(), |v| format!("{v:.6}"));
                writeln!(out, "{:<16} {:>3}  {:<28} {:>14}", p.name, p.dim, bounds, opt)?;
            }
            Ok(reg.len())
        }
        ListKind::Strategists => {
            let cat = strategist_catalog();
            for (tag, what) in &cat {
                writeln!(out, "{tag:<18} {what}")?;
            }
            Ok(cat.len())
        }
    }
}
