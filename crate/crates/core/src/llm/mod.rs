//! Conversational strategist: prompt rendering, reply parsing, transport and
//! transcripts.

mod session;
mod transport;

pub use session::{LlmSession, Role, Transcript, Turn};
pub use transport::{
    chat_turn, ChatMessage, ChatOutcome, ChatTransport, HttpTransport, MockTransport, RetryPolicy, TransportConfig,
    TransportFailure,
};

use serde::{Deserialize, Serialize};

use crate::acquisition::AcquisitionKind;
use crate::error::{Error, Result};

/// The opening instruction, stored byte for byte.
pub const INITIAL_PROMPT: &str = include_str!("../../resources/p0.txt");

/// The sentence after which a task description is inserted.
const CONTEXT_ANCHOR: &str = "with a Matern 5/2 kernel with ARD.\n";

/// Renders the opening prompt. A non-empty `task_context` becomes its own
/// paragraph right after the surrogate-model sentence.
pub fn render_initial_prompt(portfolio: &[AcquisitionKind], task_context: Option<&str>) -> Result<String> {
    let mut expected = AcquisitionKind::ALL.to_vec();
    let mut given = portfolio.to_vec();
    expected.sort_by_key(|k| k.abbrev());
    given.sort_by_key(|k| k.abbrev());
    given.dedup();
    if given != expected {
        return Err(Error::Render("the opening prompt lists exactly the twelve-member portfolio".into()));
    }
    let context = task_context.map(str::trim).filter(|c| !c.is_empty());
    Ok(match context {
        None => INITIAL_PROMPT.to_string(),
        Some(c) => {
            let at = INITIAL_PROMPT.find(CONTEXT_ANCHOR).expect("anchor present in the bundled prompt") + CONTEXT_ANCHOR.len();
            format!("{}\n{}\n{}", &INITIAL_PROMPT[..at], c, &INITIAL_PROMPT[at..])
        }
    })
}

/// Everything the strategist is told about the run at one iteration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateSnapshot {
    pub n_evaluated: usize,
    pub remaining: usize,
    pub dim: usize,
    pub f_min: f64,
    pub f_max: f64,
    pub f_mean: f64,
    pub f_std: f64,
    /// Unit-cube Euclidean distance from the newest point to its nearest
    /// predecessor.
    pub shortest_distance: f64,
    pub ls_min: f64,
    pub ls_max: f64,
    pub ls_mean: f64,
    pub ls_std: f64,
    pub outputscale: f64,
}

impl StateSnapshot {
    fn reals(&self) -> [(&'static str, f64); 10] {
        [
            ("f_min", self.f_min),
            ("f_max", self.f_max),
            ("f_mean", self.f_mean),
            ("f_std", self.f_std),
            ("shortest_distance", self.shortest_distance),
            ("ls_min", self.ls_min),
            ("ls_max", self.ls_max),
            ("ls_mean", self.ls_mean),
            ("ls_std", self.ls_std),
            ("outputscale", self.outputscale),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        if let Some((name, v)) = self.reals().into_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::Render(format!("{name} is not finite ({v})")));
        }
        if self.f_min > self.f_max || self.ls_min > self.ls_max || self.shortest_distance < 0.0 {
            return Err(Error::Render("inconsistent snapshot ranges".into()));
        }
        Ok(())
    }
}

/// The per-iteration state summary. Reals use three decimals.
pub fn render_state_summary(s: &StateSnapshot) -> Result<String> {
    s.validate()?;
    Ok(format!(
        "Current optimization state:\n\
         - N: {}\n\
         - Remaining iterations: {}\n\
         - D: {}\n\
         - f_range: Range [{:.3}, {:.3}], Mean {:.3} (Std Dev {:.3})\n\
         - f_min: {:.3}\n\
         - Shortest distance: {:.3}\n\
         - Lengthscales: Range [{:.3}, {:.3}], Mean {:.3} (Std Dev {:.3})\n\
         - Outputscale: {:.3}",
        s.n_evaluated,
        s.remaining,
        s.dim,
        s.f_min,
        s.f_max,
        s.f_mean,
        s.f_std,
        s.f_min,
        s.shortest_distance,
        s.ls_min,
        s.ls_max,
        s.ls_mean,
        s.ls_std,
        s.outputscale
    ))
}

/// A parsed reply.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParsedDecision {
    pub kind: AcquisitionKind,
    pub justification: String,
    /// The reply had no usable `ABBR: justification` line; `kind` is UCB.
    pub fallback_used: bool,
    pub raw: String,
}

impl ParsedDecision {
    pub fn fallback(raw: &str) -> Self {
        ParsedDecision { kind: AcquisitionKind::Ucb, justification: raw.to_string(), fallback_used: true, raw: raw.to_string() }
    }
}

fn strip_emphasis(s: &str) -> &str {
    s.trim().trim_matches(|c: char| matches!(c, '*' | '_' | '`' | '\'' | '"' | '#') || c.is_whitespace())
}

/// Finds the first line of the form `ABBR: justification` whose abbreviation
/// (any case, optional `q` prefix, markdown emphasis ignored) names a
/// portfolio member. Anything else falls back to UCB.
pub fn parse_decision(raw: &str, portfolio: &[AcquisitionKind]) -> ParsedDecision {
    for line in raw.lines() {
        let line = line.trim().trim_start_matches(['-', '>']).trim();
        let Some((head, rest)) = line.split_once(':') else { continue };
        let token = strip_emphasis(head);
        if token.contains(char::is_whitespace) {
            continue;
        }
        if let Some(kind) = AcquisitionKind::from_token(token).filter(|k| portfolio.contains(k)) {
            let rest = rest.trim_start_matches(['*', '_']).trim();
            return ParsedDecision { kind, justification: rest.to_string(), fallback_used: false, raw: raw.to_string() };
        }
    }
    ParsedDecision::fallback(raw)
}
