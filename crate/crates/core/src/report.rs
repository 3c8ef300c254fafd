//! Run reports: one text block per scenario run.
//!
//! Rows are tab-separated `key<TAB>value...`; the two `#` header lines name
//! the hash, build and group so a report can be reproduced.

use std::fmt::Write as _;

use crate::hash::HASH_NAME;
use crate::group::GroupParams;
use crate::properties::{self, PropertyReport, PropertyVerdict};
use crate::protocol::keyfob::GaitCheck;
use crate::protocol::OpCounts;
use crate::sim::{Handshake, HopRecord, Outcome, RunResult, Scenario};

pub const REPORT_MAGIC: &str = "perimeter-report";

#[derive(Clone, Debug, PartialEq)]
pub struct RunReport {
    pub scenario: String,
    pub seed: u64,
    pub expect: Option<String>,
    pub expectation_met: Option<bool>,
    pub outcome: Outcome,
    pub sessions: Vec<(usize, Option<Outcome>)>,
    pub hops: Vec<HopRecord>,
    pub measured_us: Vec<(usize, u32, i64)>,
    pub gait: Vec<(usize, GaitCheck)>,
    pub ops: Vec<(String, OpCounts)>,
    pub transcript: Option<String>,
    pub properties: PropertyReport,
    group_line: String,
}

pub fn prover_label(sc: &Scenario) -> &'static str {
    match sc.handshake {
        Handshake::Keyfob => "keyfob",
        Handshake::Basic => "peripheral",
    }
}

pub fn group_line(g: &GroupParams) -> String {
    let mut s = format!("# group p={:#x} q={:#x} g={:#x}", g.p(), g.q(), g.g().value());
    if let Ok(h) = g.h() {
        let _ = write!(s, " h={:#x}", h.value());
    }
    s
}

impl RunReport {
    pub fn new(sc: &Scenario, run: &RunResult) -> Self {
        let properties = properties::check_all(&run.trace, "vehicle", prover_label(sc))
            .expect("simulator emits well-formed claims");
        RunReport {
            scenario: run.scenario.clone(),
            seed: run.seed,
            expect: sc.expect.map(|e| e.to_string()),
            expectation_met: sc.expect.map(|e| e.matches(&run.outcome)),
            outcome: run.outcome,
            sessions: run.sessions.iter().map(|s| (s.index, s.outcome)).collect(),
            hops: run.hops.clone(),
            measured_us: run
                .sessions
                .iter()
                .flat_map(|s| s.metrics.measured_us.iter().map(move |(h, p)| (s.index, *h, *p)))
                .collect(),
            gait: run
                .sessions
                .iter()
                .flat_map(|s| s.metrics.gait_checks.iter().map(move |g| (s.index, g.clone())))
                .collect(),
            ops: run.ops.clone(),
            transcript: run.transcript.clone(),
            properties,
            group_line: group_line(&sc.group),
        }
    }

    pub fn render(&self) -> String {
        let mut o = String::new();
        let _ = writeln!(o, "# {REPORT_MAGIC} v1 hash={HASH_NAME} build={}", crate::VERSION);
        let _ = writeln!(o, "{}", self.group_line);
        let _ = writeln!(o, "scenario\t{}", self.scenario);
        let _ = writeln!(o, "seed\t{}", self.seed);
        let _ = writeln!(o, "verdict\t{}", self.outcome);
        if let (Some(e), Some(met)) = (&self.expect, self.expectation_met) {
            let _ = writeln!(o, "expect\t{e}\t{}", if met { "met" } else { "mismatch" });
        }
        for (i, out) in &self.sessions {
            let v = out.map(|o| o.to_string()).unwrap_or_else(|| "undecided".into());
            let _ = writeln!(o, "session\t{i}\t{v}");
        }
        for h in &self.hops {
            let _ = writeln!(
                o,
                "hop\t{}\t{}\t{}->{}\tsent={}\tarrived={}\tadded={}",
                h.session, h.hop, h.from, h.to, h.sent_us, h.arrived_us, h.added_us
            );
        }
        for (s, hop, p) in &self.measured_us {
            let _ = writeln!(o, "measured\t{s}\tp{}\t{p}", hop + 1);
        }
        for (s, g) in &self.gait {
            let _ = writeln!(
                o,
                "gait\t{s}\tvel_kf={:.6}\tvel_v={:.6}\tdelta={:.6}\tw_kf={}\tw_v={}\tdisp={:.6}",
                g.vel_kf,
                g.vel_v,
                g.delta_vel(),
                g.w_kf_us,
                g.w_v_us,
                g.displacement_m
            );
        }
        for (who, c) in &self.ops {
            let _ = writeln!(o, "cost\t{who}\texp={}\thash={}", c.exponentiations, c.digests);
        }
        if let Some(t) = &self.transcript {
            let _ = writeln!(o, "commitment\t{t}");
        }
        for (p, v) in &self.properties.results {
            let cell = match v {
                PropertyVerdict::Holds => "holds".to_string(),
                PropertyVerdict::Violated { witness } => {
                    let w: Vec<String> = witness.iter().map(|l| l.to_string()).collect();
                    format!("violated\twitness-lines={}", w.join(","))
                }
            };
            let _ = writeln!(o, "property\t{}\t{cell}", p.as_str());
        }
        o
    }
}
