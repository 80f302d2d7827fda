//! Conversation state for one run.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::transport::{chat_turn, ChatMessage, ChatTransport, RetryPolicy};
use super::{parse_decision, render_initial_prompt, render_state_summary, ParsedDecision, StateSnapshot};
use crate::acquisition::AcquisitionKind;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    User,
    Assistant,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::User => "user",
            Role::Assistant => "assistant",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Turn {
    pub role: Role,
    pub content: String,
    /// Unix time in milliseconds.
    pub timestamp: u64,
    /// Set on assistant turns that stand in for a failed request.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Line format of a persisted transcript.
#[derive(Serialize, Deserialize)]
struct TurnLine {
    run_id: String,
    turn_index: usize,
    role: Role,
    content: String,
    timestamp: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

/// Rough token count: four characters per token.
pub fn estimate_tokens(text: &str) -> usize {
    text.chars().count().div_ceil(4)
}

/// Append-only conversation log. The first turn is the opening prompt, the
/// second its acknowledgment, then one (summary, reply) pair per iteration.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub run_id: String,
    pub turns: Vec<Turn>,
    /// Estimated tokens sent over all requests (history included).
    pub sent_tokens: usize,
}

fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
}

impl Transcript {
    pub fn new(run_id: impl Into<String>) -> Self {
        Transcript { run_id: run_id.into(), turns: Vec::new(), sent_tokens: 0 }
    }

    pub(crate) fn push(&mut self, role: Role, content: &str, error: Option<String>) {
        self.turns.push(Turn { role, content: content.to_string(), timestamp: now_ms(), error });
    }

    pub(crate) fn record_request(&mut self, messages: &[ChatMessage]) {
        self.sent_tokens += messages.iter().map(|m| estimate_tokens(&m.content)).sum::<usize>();
    }

    /// Estimated tokens of distinct content (each turn counted once).
    pub fn token_estimate(&self) -> usize {
        self.turns.iter().map(|t| estimate_tokens(&t.content)).sum()
    }

    /// Messages for the next request: the opening pair is always kept, then
    /// at most `window` recent exchanges and the pending user message.
    /// Exchanges whose request failed are left out.
    pub(crate) fn request_messages(&self, window: Option<usize>) -> Vec<ChatMessage> {
        let mut keep: Vec<&Turn> = Vec::with_capacity(self.turns.len());
        let mut i = 0;
        while i < self.turns.len() {
            let t = &self.turns[i];
            let failed_pair = t.role == Role::User
                && self.turns.get(i + 1).is_some_and(|n| n.role == Role::Assistant && n.error.is_some());
            if failed_pair && i > 0 {
                i += 2;
                continue;
            }
            if t.error.is_none() {
                keep.push(t);
            }
            i += 1;
        }
        if let Some(w) = window {
            let pinned = keep.len().min(2);
            let tail = (2 * w + 1).min(keep.len() - pinned);
            let cut = keep.len() - tail;
            keep.drain(pinned..cut);
        }
        keep.iter().map(|t| ChatMessage { role: t.role.as_str().into(), content: t.content.clone() }).collect()
    }

    /// Replays every assistant reply after the acknowledgment through the
    /// parser, reproducing the sequence of selections.
    pub fn decisions(&self, portfolio: &[AcquisitionKind]) -> Vec<ParsedDecision> {
        self.turns
            .iter()
            .skip(2)
            .filter(|t| t.role == Role::Assistant)
            .map(|t| parse_decision(&t.content, portfolio))
            .collect()
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("jsonl.tmp");
        {
            let mut w = BufWriter::new(std::fs::File::create(&tmp)?);
            for (i, t) in self.turns.iter().enumerate() {
                let line = TurnLine {
                    run_id: self.run_id.clone(),
                    turn_index: i,
                    role: t.role,
                    content: t.content.clone(),
                    timestamp: t.timestamp,
                    error: t.error.clone(),
                };
                serde_json::to_writer(&mut w, &line)?;
                w.write_all(b"\n")?;
            }
            w.flush()?;
        }
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn read_jsonl(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::NotFound(format!("transcript {}", path.display())),
            _ => Error::Io(e),
        })?;
        let mut t = Transcript::default();
        for (n, line) in BufReader::new(file).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let l: TurnLine =
                serde_json::from_str(&line).map_err(|e| Error::Data(format!("{}:{}: {e}", path.display(), n + 1)))?;
            if l.turn_index != t.turns.len() {
                return Err(Error::Data(format!("{}:{}: turn index out of sequence", path.display(), n + 1)));
            }
            t.run_id = l.run_id;
            t.turns.push(Turn { role: l.role, content: l.content, timestamp: l.timestamp, error: l.error });
        }
        t.sent_tokens = t.token_estimate();
        Ok(t)
    }
}

/// A live conversation with a strategist endpoint. Every failure path ends
/// in a UCB fallback; nothing here aborts a run.
pub struct LlmSession {
    pub transcript: Transcript,
    transport: Box<dyn ChatTransport>,
    retry: RetryPolicy,
    window: Option<usize>,
    portfolio: Vec<AcquisitionKind>,
    queries: usize,
    fallbacks: usize,
}

impl LlmSession {
    /// Sends the opening prompt and records the acknowledgment.
    pub fn start(
        run_id: &str,
        transport: Box<dyn ChatTransport>,
        retry: RetryPolicy,
        window: Option<usize>,
        task_context: Option<&str>,
    ) -> Result<Self> {
        let portfolio = AcquisitionKind::ALL.to_vec();
        let p0 = render_initial_prompt(&portfolio, task_context)?;
        let mut s = LlmSession {
            transcript: Transcript::new(run_id),
            transport,
            retry,
            window,
            portfolio,
            queries: 0,
            fallbacks: 0,
        };
        if let Err(e) = chat_turn(&mut s.transcript, &p0, s.transport.as_mut(), &s.retry, s.window) {
            tracing::warn!("opening prompt was not acknowledged: {e}");
        }
        Ok(s)
    }

    /// Continues an earlier conversation.
    pub fn resume(
        transcript: Transcript,
        transport: Box<dyn ChatTransport>,
        retry: RetryPolicy,
        window: Option<usize>,
    ) -> Self {
        let portfolio = AcquisitionKind::ALL.to_vec();
        let past = transcript.decisions(&portfolio);
        LlmSession {
            fallbacks: past.iter().filter(|d| d.fallback_used).count(),
            queries: past.len(),
            transcript,
            transport,
            retry,
            window,
            portfolio,
        }
    }

    /// One strategist decision for the given state.
    pub fn select(&mut self, snapshot: &StateSnapshot) -> ParsedDecision {
        self.queries += 1;
        let decision = match render_state_summary(snapshot) {
            Err(e) => {
                tracing::warn!("state summary could not be rendered, using UCB: {e}");
                self.transcript.push(Role::User, "", Some(e.to_string()));
                self.transcript.push(Role::Assistant, "", Some(e.to_string()));
                ParsedDecision::fallback("")
            }
            Ok(msg) => match chat_turn(&mut self.transcript, &msg, self.transport.as_mut(), &self.retry, self.window) {
                Ok(out) => parse_decision(&out.reply, &self.portfolio),
                Err(e) => {
                    tracing::warn!("strategist unreachable, using UCB: {e}");
                    ParsedDecision::fallback("")
                }
            },
        };
        if decision.fallback_used {
            self.fallbacks += 1;
            tracing::info!("fallback selection (UCB) at query {}", self.queries);
        }
        decision
    }

    pub fn queries(&self) -> usize {
        self.queries
    }

    pub fn fallbacks(&self) -> usize {
        self.fallbacks
    }

    /// Share of queries that ended in the UCB fallback.
    pub fn fallback_rate(&self) -> f64 {
        if self.queries == 0 {
            0.0
        } else {
            self.fallbacks as f64 / self.queries as f64
        }
    }
}
