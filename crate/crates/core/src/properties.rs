//! Finite-trace checks of the Lowe authentication hierarchy.
//!
//! Honest parties emit `claim-running` when they send their last message and
//! the verifier emits `claim-commit` when it accepts. Each claim names the
//! peer and the session data `(nonce, challenge, response digest)`. A run is
//! identified by its nonce.
//!
//! For every commit of verifier `v` naming prover `p`:
//!
//! * aliveness: `p` emitted some running claim earlier;
//! * weak agreement: `p` emitted an earlier running claim naming `v`;
//! * non-injective agreement: one of those also carries the same session data;
//! * agreement: additionally no two commits are matched to the same run.

use std::collections::BTreeMap;
use std::fmt;

use crate::sim::trace::{Trace, TraceError, TraceKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Property {
    Aliveness,
    WeakAgreement,
    NonInjectiveAgreement,
    Agreement,
}

impl Property {
    /// Weakest first.
    pub const ALL: [Property; 4] =
        [Property::Aliveness, Property::WeakAgreement, Property::NonInjectiveAgreement, Property::Agreement];

    pub fn as_str(self) -> &'static str {
        match self {
            Property::Aliveness => "aliveness",
            Property::WeakAgreement => "weak-agreement",
            Property::NonInjectiveAgreement => "non-injective-agreement",
            Property::Agreement => "agreement",
        }
    }
}

/// `Violated` carries trace file line numbers that on their own refute the property.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PropertyVerdict {
    Holds,
    Violated { witness: Vec<usize> },
}

impl PropertyVerdict {
    pub fn holds(&self) -> bool {
        matches!(self, PropertyVerdict::Holds)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClaimKind {
    Running,
    Commit,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Claim {
    /// Line in the trace file.
    pub line: usize,
    pub t_us: i64,
    pub actor: String,
    pub kind: ClaimKind,
    pub peer: String,
    pub nonce: String,
    pub challenge: String,
    pub response: String,
}

impl Claim {
    fn same_data(&self, o: &Claim) -> bool {
        (&self.nonce, &self.challenge, &self.response) == (&o.nonce, &o.challenge, &o.response)
    }
}

pub fn extract_claims(trace: &Trace) -> Result<Vec<Claim>, TraceError> {
    let mut out = Vec::new();
    for (i, e) in trace.events.iter().enumerate() {
        let kind = match e.kind {
            TraceKind::ClaimRunning => ClaimKind::Running,
            TraceKind::ClaimCommit => ClaimKind::Commit,
            _ => continue,
        };
        let line = Trace::line_of(i);
        let field = |k: &str| {
            e.field(k).map(str::to_string).ok_or_else(|| TraceError { line, message: format!("claim without `{k}=`") })
        };
        out.push(Claim {
            line,
            t_us: e.t_us,
            actor: e.actor.clone(),
            kind,
            peer: field("peer")?,
            nonce: field("nonce")?,
            challenge: field("challenge")?,
            response: field("resp")?,
        });
    }
    Ok(out)
}

struct Claims<'a> {
    commits: Vec<&'a Claim>,
    runnings: Vec<&'a Claim>,
    verifier: &'a str,
}

impl<'a> Claims<'a> {
    fn new(all: &'a [Claim], verifier: &'a str, prover: &str) -> Self {
        Claims {
            commits: all
                .iter()
                .filter(|c| c.kind == ClaimKind::Commit && c.actor == verifier && c.peer == prover)
                .collect(),
            runnings: all.iter().filter(|c| c.kind == ClaimKind::Running && c.actor == prover).collect(),
            verifier,
        }
    }

    fn first_unmatched(&self, ok: impl Fn(&Claim, &Claim) -> bool) -> PropertyVerdict {
        for c in &self.commits {
            if !self.runnings.iter().any(|r| r.t_us <= c.t_us && ok(c, r)) {
                return PropertyVerdict::Violated { witness: vec![c.line] };
            }
        }
        PropertyVerdict::Holds
    }

    fn aliveness(&self) -> PropertyVerdict {
        self.first_unmatched(|_, _| true)
    }

    fn weak_agreement(&self) -> PropertyVerdict {
        self.first_unmatched(|_, r| r.peer == self.verifier)
    }

    fn non_injective(&self) -> PropertyVerdict {
        self.first_unmatched(|c, r| r.peer == self.verifier && c.same_data(r))
    }

    fn agreement(&self) -> PropertyVerdict {
        let base = self.non_injective();
        if !base.holds() {
            return base;
        }
        let mut by_run: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for c in &self.commits {
            by_run.entry(c.nonce.as_str()).or_default().push(c.line);
        }
        match by_run.into_values().find(|lines| lines.len() > 1) {
            Some(lines) => PropertyVerdict::Violated { witness: lines },
            None => PropertyVerdict::Holds,
        }
    }
}

fn check(trace: &Trace, v: &str, kf: &str, p: Property) -> Result<PropertyVerdict, TraceError> {
    let all = extract_claims(trace)?;
    let claims = Claims::new(&all, v, kf);
    Ok(match p {
        Property::Aliveness => claims.aliveness(),
        Property::WeakAgreement => claims.weak_agreement(),
        Property::NonInjectiveAgreement => claims.non_injective(),
        Property::Agreement => claims.agreement(),
    })
}

pub fn check_aliveness(trace: &Trace, v: &str, kf: &str) -> Result<PropertyVerdict, TraceError> {
    check(trace, v, kf, Property::Aliveness)
}

pub fn check_weak_agreement(trace: &Trace, v: &str, kf: &str) -> Result<PropertyVerdict, TraceError> {
    check(trace, v, kf, Property::WeakAgreement)
}

pub fn check_noninjective_agreement(trace: &Trace, v: &str, kf: &str) -> Result<PropertyVerdict, TraceError> {
    check(trace, v, kf, Property::NonInjectiveAgreement)
}

pub fn check_agreement(trace: &Trace, v: &str, kf: &str) -> Result<PropertyVerdict, TraceError> {
    check(trace, v, kf, Property::Agreement)
}

/// Sub-trace holding only the events on the given file lines.
pub fn witness_trace(trace: &Trace, lines: &[usize]) -> Trace {
    Trace {
        events: trace
            .events
            .iter()
            .enumerate()
            .filter(|(i, _)| lines.contains(&Trace::line_of(*i)))
            .map(|(_, e)| e.clone())
            .collect(),
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PropertyReport {
    pub verifier: String,
    pub prover: String,
    pub commits: usize,
    pub results: Vec<(Property, PropertyVerdict)>,
}

impl PropertyReport {
    pub fn verdict(&self, p: Property) -> &PropertyVerdict {
        &self.results.iter().find(|(q, _)| *q == p).expect("all properties checked").1
    }

    /// No stronger property holds while a weaker one fails.
    pub fn hierarchy_consistent(&self) -> bool {
        self.results.windows(2).all(|w| w[0].1.holds() || !w[1].1.holds())
    }
}

impl fmt::Display for PropertyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (p, v) in &self.results {
            match v {
                PropertyVerdict::Holds if self.commits == 0 => writeln!(f, "{:<24} holds (no commit)", p.as_str())?,
                PropertyVerdict::Holds => writeln!(f, "{:<24} holds", p.as_str())?,
                PropertyVerdict::Violated { witness } => {
                    let lines: Vec<String> = witness.iter().map(|l| l.to_string()).collect();
                    writeln!(f, "{:<24} violated witness-lines={}", p.as_str(), lines.join(","))?
                }
            }
        }
        Ok(())
    }
}

pub fn check_all(trace: &Trace, verifier: &str, prover: &str) -> Result<PropertyReport, TraceError> {
    let all = extract_claims(trace)?;
    let claims = Claims::new(&all, verifier, prover);
    Ok(PropertyReport {
        verifier: verifier.to_string(),
        prover: prover.to_string(),
        commits: claims.commits.len(),
        results: vec![
            (Property::Aliveness, claims.aliveness()),
            (Property::WeakAgreement, claims.weak_agreement()),
            (Property::NonInjectiveAgreement, claims.non_injective()),
            (Property::Agreement, claims.agreement()),
        ],
    })
}
