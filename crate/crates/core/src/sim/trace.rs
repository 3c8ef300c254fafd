//! Trace events and the line-oriented trace file.
//!
//! ```text
//! # perimeter-trace v1 hash=sha-256 build=0.1.0
//! 0 fob send keyfob-request to=car nonce=.. len=..
//! 2000 car receive keyfob-request from=fob nonce=..
//! ...
//! ```

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::hash::HASH_NAME;

pub const TRACE_MAGIC: &str = "perimeter-trace";
pub const TRACE_VERSION: &str = "v1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TraceKind {
    Send,
    Receive,
    Relay,
    ClaimRunning,
    ClaimCommit,
    Verdict,
    CommitmentTranscript,
}

impl TraceKind {
    pub const ALL: [TraceKind; 7] = [
        TraceKind::Send,
        TraceKind::Receive,
        TraceKind::Relay,
        TraceKind::ClaimRunning,
        TraceKind::ClaimCommit,
        TraceKind::Verdict,
        TraceKind::CommitmentTranscript,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TraceKind::Send => "send",
            TraceKind::Receive => "receive",
            TraceKind::Relay => "relay",
            TraceKind::ClaimRunning => "claim-running",
            TraceKind::ClaimCommit => "claim-commit",
            TraceKind::Verdict => "verdict",
            TraceKind::CommitmentTranscript => "commitment-transcript",
        }
    }
}

impl FromStr for TraceKind {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        TraceKind::ALL.into_iter().find(|k| k.as_str() == s).ok_or(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceEvent {
    pub t_us: i64,
    pub actor: String,
    pub kind: TraceKind,
    pub payload: String,
}

impl TraceEvent {
    /// Value of `key=value` in the payload.
    pub fn field(&self, key: &str) -> Option<&str> {
        self.payload.split_whitespace().find_map(|tok| tok.strip_prefix(key)?.strip_prefix('='))
    }
}

impl fmt::Display for TraceEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.t_us, self.actor, self.kind.as_str())?;
        if !self.payload.is_empty() {
            write!(f, " {}", self.payload)?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
#[error("line {line}: {message}")]
pub struct TraceError {
    pub line: usize,
    pub message: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Trace {
    pub events: Vec<TraceEvent>,
}

impl Trace {
    pub fn push(&mut self, t_us: i64, actor: &str, kind: TraceKind, payload: String) {
        if let Some(last) = self.events.last() {
            debug_assert!(t_us >= last.t_us, "trace time went backwards");
        }
        self.events.push(TraceEvent { t_us, actor: actor.to_string(), kind, payload });
    }

    pub fn header() -> String {
        format!("# {TRACE_MAGIC} {TRACE_VERSION} hash={HASH_NAME} build={}", crate::VERSION)
    }

    pub fn render(&self) -> String {
        let mut out = Trace::header();
        out.push('\n');
        for e in &self.events {
            out.push_str(&e.to_string());
            out.push('\n');
        }
        out
    }

    /// File line number (1-based, header is line 1) of event `i`.
    pub fn line_of(i: usize) -> usize {
        i + 2
    }

    pub fn parse(text: &str) -> Result<Trace, TraceError> {
        let mut lines = text.lines().enumerate();
        let err = |line: usize, message: String| TraceError { line, message };
        match lines.next() {
            Some((_, h)) if h.starts_with(&format!("# {TRACE_MAGIC} ")) => {}
            Some((i, _)) => return Err(err(i + 1, "missing trace header".into())),
            None => return Err(err(1, "empty trace".into())),
        }
        let mut trace = Trace::default();
        for (i, line) in lines {
            let n = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.splitn(4, ' ');
            let t_us = parts
                .next()
                .and_then(|t| t.parse::<i64>().ok())
                .ok_or_else(|| err(n, "bad timestamp".into()))?;
            let actor = parts.next().filter(|a| !a.is_empty()).ok_or_else(|| err(n, "missing actor".into()))?;
            let kind_str = parts.next().ok_or_else(|| err(n, "missing event kind".into()))?;
            let kind: TraceKind =
                kind_str.parse().map_err(|_| err(n, format!("unknown event kind `{kind_str}`")))?;
            if let Some(last) = trace.events.last() {
                if t_us < last.t_us {
                    return Err(err(n, "time goes backwards".into()));
                }
            }
            let payload = parts.next().unwrap_or("").to_string();
            trace.events.push(TraceEvent { t_us, actor: actor.to_string(), kind, payload });
        }
        Ok(trace)
    }
}
