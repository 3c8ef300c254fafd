//! Scenario files.
//!
//! TOML with durations in seconds and positions in meters:
//!
//! ```toml
//! id = "relay-2ms"
//! expect = "reject(propagation-excess)"
//! seed = 7
//!
//! [timing]
//! t_travel_max = 0.002
//! t_epsilon = 0.001
//!
//! [world]
//! holder_path = [[0.0, 100.0, 0.0], [30.0, 55.0, 0.0]]
//!
//! [adversary]
//! mode = "pure_relay"
//! t_relay = 0.002
//! ```
//!
//! Keys not listed in [`KEYS`] are rejected. Integers in `group.*` may be
//! TOML integers or decimal / `0x` hex strings.

use std::path::Path;

use num_bigint::BigUint;
use num_traits::Num;
use thiserror::Error;
pub use toml::{Table, Value};

use crate::commitments::Scheme;
use crate::edr::{EventKind, EventRecord};
use crate::group::{hash_to_subgroup, GroupError, GroupParams, ParamViolation, H_DOMAIN_TAG};
use crate::sim::{Expectation, Point, Scenario, ScenarioError, Trajectory};

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("`{key}`: {message}")]
    Key { key: String, message: String },
}

impl ConfigError {
    fn key(key: &str, message: impl Into<String>) -> Self {
        ConfigError::Key { key: key.to_string(), message: message.into() }
    }

    /// The offending key, when the error is tied to one.
    pub fn key_name(&self) -> Option<&str> {
        match self {
            ConfigError::Key { key, .. } => Some(key),
            _ => None,
        }
    }
}

impl From<ScenarioError> for ConfigError {
    fn from(e: ScenarioError) -> Self {
        match e {
            ScenarioError::Invalid { key, message } => ConfigError::Key { key, message },
        }
    }
}

/// Every accepted key, dotted.
pub const KEYS: &[&str] = &[
    "id",
    "scheme",
    "backend",
    "sessions",
    "session_start",
    "session_gap",
    "replay_protection",
    "reinit_budget",
    "trials",
    "seed",
    "expect",
    "response_bits",
    "drive_script",
    "group.preset",
    "group.p",
    "group.q",
    "group.g",
    "group.h",
    "timing.t_travel_max",
    "timing.t_travel_min",
    "timing.t_epsilon",
    "timing.vel_epsilon",
    "timing.drift",
    "timing.clock_offset",
    "timing.processing",
    "timing.gait_window",
    "timing.jitter",
    "timing.propagation_check",
    "timing.gait_check",
    "world.vehicle_pos",
    "world.holder_path",
    "world.holder_walk",
    "world.signal_speed",
    "adversary.mode",
    "adversary.t_relay",
    "adversary.consistency",
    "adversary.schedule",
    "adversary.pos",
    "adversary.ghost_pos",
    "adversary.forgery",
    "adversary.splice",
    "adversary.pedometer",
    "adversary.stale_digest",
    "adversary.canned_speed",
    "adversary.levels",
    "keyfob.stale_events",
];

const SECTIONS: &[&str] = &["group", "timing", "world", "adversary", "keyfob"];

pub fn load(path: &Path) -> Result<Scenario, ConfigError> {
    let table = load_table(path)?;
    let fallback = path.file_stem().and_then(|s| s.to_str()).unwrap_or("scenario");
    scenario_from_table(&table, fallback)
}

pub fn load_table(path: &Path) -> Result<Table, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::Io { path: path.display().to_string(), message: e.to_string() })?;
    parse_table(&text)
}

pub fn parse_table(text: &str) -> Result<Table, ConfigError> {
    text.parse::<Table>().map_err(|e| ConfigError::Parse(e.message().to_string()))
}

pub fn parse(text: &str) -> Result<Scenario, ConfigError> {
    scenario_from_table(&parse_table(text)?, "scenario")
}

/// Parse an override value the way it would appear on the right of `=` in
/// the file; bare words become strings.
pub fn parse_value(raw: &str) -> Value {
    let raw = raw.trim();
    match format!("v = {raw}").parse::<Table>() {
        Ok(mut t) => t.remove("v").expect("single key"),
        Err(_) => Value::String(raw.to_string()),
    }
}

/// Set a dotted key, creating the section if needed.
pub fn set_key(table: &mut Table, key: &str, value: Value) -> Result<(), ConfigError> {
    if !KEYS.contains(&key) {
        return Err(ConfigError::key(key, "unknown key"));
    }
    match key.split_once('.') {
        None => {
            table.insert(key.to_string(), value);
        }
        Some((section, leaf)) => {
            let entry = table.entry(section.to_string()).or_insert_with(|| Value::Table(Table::new()));
            let Value::Table(sub) = entry else {
                return Err(ConfigError::key(section, "expected a table"));
            };
            sub.insert(leaf.to_string(), value);
        }
    }
    Ok(())
}

struct Reader<'a> {
    root: &'a Table,
}

impl<'a> Reader<'a> {
    fn get(&self, key: &str) -> Option<&'a Value> {
        match key.split_once('.') {
            None => self.root.get(key),
            Some((s, leaf)) => self.root.get(s)?.as_table()?.get(leaf),
        }
    }

    fn float(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::Float(f)) => Ok(Some(*f)),
            Some(Value::Integer(i)) => Ok(Some(*i as f64)),
            Some(_) => Err(ConfigError::key(key, "expected a number")),
        }
    }

    /// Seconds to microseconds.
    fn micros(&self, key: &str) -> Result<Option<i64>, ConfigError> {
        Ok(self.float(key)?.map(seconds_to_us))
    }

    fn int(&self, key: &str) -> Result<Option<i64>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::Integer(i)) => Ok(Some(*i)),
            Some(_) => Err(ConfigError::key(key, "expected an integer")),
        }
    }

    fn uint(&self, key: &str) -> Result<Option<u64>, ConfigError> {
        match self.int(key)? {
            Some(i) if i < 0 => Err(ConfigError::key(key, "must be >= 0")),
            other => Ok(other.map(|i| i as u64)),
        }
    }

    fn boolean(&self, key: &str) -> Result<Option<bool>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::Boolean(b)) => Ok(Some(*b)),
            Some(_) => Err(ConfigError::key(key, "expected true or false")),
        }
    }

    fn string(&self, key: &str) -> Result<Option<&'a str>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s)),
            Some(_) => Err(ConfigError::key(key, "expected a string")),
        }
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str, what: &str) -> Result<Option<T>, ConfigError> {
        self.string(key)?
            .map(|s| s.parse::<T>().map_err(|_| ConfigError::key(key, format!("unknown {what} `{s}`"))))
            .transpose()
    }

    fn point(&self, key: &str) -> Result<Option<Point>, ConfigError> {
        self.get(key).map(|v| point(key, v)).transpose()
    }

    fn bigint(&self, key: &str) -> Result<Option<BigUint>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::Integer(i)) if *i >= 0 => Ok(Some(BigUint::from(*i as u64))),
            Some(Value::String(s)) => {
                let s = s.trim();
                let parsed = match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
                    Some(hex) => BigUint::from_str_radix(hex, 16),
                    None => BigUint::from_str_radix(s, 10),
                };
                parsed.map(Some).map_err(|_| ConfigError::key(key, "not a decimal or 0x-hex integer"))
            }
            Some(_) => Err(ConfigError::key(key, "expected a non-negative integer")),
        }
    }
}

fn seconds_to_us(s: f64) -> i64 {
    (s * 1e6).round() as i64
}

fn number(key: &str, v: &Value) -> Result<f64, ConfigError> {
    match v {
        Value::Float(f) => Ok(*f),
        Value::Integer(i) => Ok(*i as f64),
        _ => Err(ConfigError::key(key, "expected a number")),
    }
}

fn point(key: &str, v: &Value) -> Result<Point, ConfigError> {
    match v.as_array().map(|a| a.as_slice()) {
        Some([x, y]) => Ok(Point::new(number(key, x)?, number(key, y)?)),
        _ => Err(ConfigError::key(key, "expected [x, y]")),
    }
}

fn check_keys(root: &Table) -> Result<(), ConfigError> {
    for (k, v) in root {
        if SECTIONS.contains(&k.as_str()) {
            let sub = v.as_table().ok_or_else(|| ConfigError::key(k, "expected a table"))?;
            for leaf in sub.keys() {
                let full = format!("{k}.{leaf}");
                if !KEYS.contains(&full.as_str()) {
                    return Err(ConfigError::key(&full, "unknown key"));
                }
            }
        } else if !KEYS.contains(&k.as_str()) {
            return Err(ConfigError::key(k, "unknown key"));
        }
    }
    Ok(())
}

fn group(r: &Reader) -> Result<GroupParams, ConfigError> {
    let explicit = ["group.p", "group.q", "group.g", "group.h"].iter().any(|k| r.get(k).is_some());
    match r.string("group.preset")? {
        Some(_) if explicit => return Err(ConfigError::key("group.preset", "cannot be combined with group.p/q/g/h")),
        Some("demo") => return Ok(GroupParams::demo()),
        Some("desk") => return Ok(GroupParams::desk()),
        Some(other) => return Err(ConfigError::key("group.preset", format!("unknown preset `{other}`"))),
        None if !explicit => return Ok(GroupParams::demo()),
        None => {}
    }
    let need = |k: &str| r.bigint(k)?.ok_or_else(|| ConfigError::key(k, "missing"));
    let p = need("group.p")?;
    let q = need("group.q")?;
    let g = need("group.g")?;
    let h = r.bigint("group.h")?;
    // Only derive h once p, q, g are known to be sound.
    let h = match h {
        Some(h) => h,
        None => {
            GroupParams::new(p.clone(), q.clone(), g.clone(), None).map_err(group_error)?;
            hash_to_subgroup(&p, &q, &g, H_DOMAIN_TAG)
        }
    };
    GroupParams::new(p, q, g, Some(h)).map_err(group_error)
}

fn group_error(e: GroupError) -> ConfigError {
    let key = match &e {
        GroupError::Params(v) => match v {
            ParamViolation::PNotPrime => "group.p",
            ParamViolation::QNotPrime | ParamViolation::QNotDividing => "group.q",
            ParamViolation::GOutOfRange | ParamViolation::GTrivial | ParamViolation::GOrder => "group.g",
            _ => "group.h",
        },
        _ => "group",
    };
    ConfigError::key(key, e.to_string())
}

fn holder(r: &Reader) -> Result<Option<Trajectory>, ConfigError> {
    let path = r.get("world.holder_path");
    let walk = r.get("world.holder_walk");
    match (path, walk) {
        (Some(_), Some(_)) => Err(ConfigError::key("world.holder_walk", "cannot be combined with world.holder_path")),
        (Some(v), None) => {
            let key = "world.holder_path";
            let rows = v.as_array().ok_or_else(|| ConfigError::key(key, "expected [[t, x, y], ...]"))?;
            let mut pts = Vec::with_capacity(rows.len());
            for row in rows {
                match row.as_array().map(|a| a.as_slice()) {
                    Some([t, x, y]) => pts.push((
                        seconds_to_us(number(key, t)?),
                        Point::new(number(key, x)?, number(key, y)?),
                    )),
                    _ => return Err(ConfigError::key(key, "each waypoint is [t, x, y]")),
                }
            }
            Trajectory::new(pts).map(Some).map_err(|m| ConfigError::key(key, m))
        }
        (None, Some(v)) => {
            let key = "world.holder_walk";
            let t = v.as_table().ok_or_else(|| ConfigError::key(key, "expected {from, towards, speed, duration}"))?;
            let field = |f: &str| t.get(f).ok_or_else(|| ConfigError::key(&format!("{key}.{f}"), "missing"));
            let from = point(key, field("from")?)?;
            let towards = point(key, field("towards")?)?;
            let speed = number(key, field("speed")?)?;
            let duration = seconds_to_us(number(key, field("duration")?)?);
            if speed < 0.0 {
                return Err(ConfigError::key(key, "speed must be >= 0"));
            }
            Ok(Some(Trajectory::walking(from, towards, speed, duration)))
        }
        (None, None) => Ok(None),
    }
}

fn drive_script(r: &Reader) -> Result<Option<Vec<EventRecord>>, ConfigError> {
    let key = "drive_script";
    let Some(v) = r.get(key) else { return Ok(None) };
    let rows = v.as_array().ok_or_else(|| ConfigError::key(key, "expected [[t, kind, value], ...]"))?;
    let mut out = Vec::with_capacity(rows.len());
    for row in rows {
        let Some([t, kind, value]) = row.as_array().map(|a| a.as_slice()) else {
            return Err(ConfigError::key(key, "each event is [t, kind, value]"));
        };
        let kind: EventKind = kind
            .as_str()
            .ok_or_else(|| ConfigError::key(key, "event kind must be a string"))?
            .parse()
            .map_err(|e: crate::edr::EdrError| ConfigError::key(key, e.to_string()))?;
        out.push(EventRecord::new(seconds_to_us(number(key, t)?), kind, number(key, value)?));
    }
    Ok(Some(out))
}

/// Build and validate a scenario; defaults come from [`Scenario::new`].
pub fn scenario_from_table(root: &Table, fallback_id: &str) -> Result<Scenario, ConfigError> {
    check_keys(root)?;
    let r = Reader { root };
    let mut sc = Scenario::new(r.string("id")?.unwrap_or(fallback_id));
    sc.group = group(&r)?;
    if let Some(h) = r.parsed("scheme", "scheme")? {
        sc.handshake = h;
    }
    sc.backend = match r.string("backend")? {
        None | Some("none") => None,
        Some("schnorr") => Some(Scheme::Schnorr),
        Some("pedersen") => Some(Scheme::Pedersen),
        Some(other) => return Err(ConfigError::key("backend", format!("unknown backend `{other}`"))),
    };
    macro_rules! set {
        ($target:expr, $value:expr) => {
            if let Some(v) = $value {
                $target = v;
            }
        };
    }
    set!(sc.sessions, r.uint("sessions")?.map(|v| v as u32));
    set!(sc.session_start_us, r.micros("session_start")?);
    set!(sc.session_gap_us, r.micros("session_gap")?);
    set!(sc.replay_protection, r.boolean("replay_protection")?);
    set!(sc.reinit_budget, r.uint("reinit_budget")?.map(|v| v as u32));
    set!(sc.trials, r.uint("trials")?);
    set!(sc.seed, r.uint("seed")?);
    set!(sc.response_bits, r.uint("response_bits")?.map(|v| v as u32));
    sc.expect = r.parsed::<Expectation>("expect", "expectation")?;

    let t = &mut sc.timing;
    set!(t.t_travel_max_us, r.micros("timing.t_travel_max")?);
    set!(t.t_travel_min_us, r.micros("timing.t_travel_min")?);
    set!(t.t_epsilon_us, r.micros("timing.t_epsilon")?);
    set!(t.vel_epsilon, r.float("timing.vel_epsilon")?);
    set!(t.clock_drift_bound_us, r.micros("timing.drift")?);
    set!(t.propagation_check, r.boolean("timing.propagation_check")?);
    set!(t.gait_check, r.boolean("timing.gait_check")?);
    set!(sc.clock_drift_us, r.micros("timing.clock_offset")?);
    set!(sc.processing_us, r.micros("timing.processing")?);
    set!(sc.gait_window_us, r.micros("timing.gait_window")?);
    set!(sc.jitter_us, r.micros("timing.jitter")?);

    set!(sc.world.vehicle_pos, r.point("world.vehicle_pos")?);
    set!(sc.world.holder, holder(&r)?);
    set!(sc.world.signal_speed, r.float("world.signal_speed")?);

    let a = &mut sc.adversary;
    set!(a.mode, r.parsed("adversary.mode", "adversary mode")?);
    set!(a.t_relay_us, r.micros("adversary.t_relay")?);
    set!(a.consistency, r.parsed("adversary.consistency", "consistency")?);
    if let Some(v) = r.get("adversary.schedule") {
        let key = "adversary.schedule";
        let arr = v.as_array().ok_or_else(|| ConfigError::key(key, "expected a list of delays"))?;
        a.schedule_us = Some(arr.iter().map(|d| number(key, d).map(seconds_to_us)).collect::<Result<_, _>>()?);
    }
    set!(a.pos, r.point("adversary.pos")?);
    a.ghost_pos = r.point("adversary.ghost_pos")?;
    set!(a.forgery, r.parsed("adversary.forgery", "forgery")?);
    set!(a.splice, r.boolean("adversary.splice")?);
    set!(a.pedometer, r.boolean("adversary.pedometer")?);
    set!(a.stale_digest, r.boolean("adversary.stale_digest")?);
    set!(a.canned_speed, r.float("adversary.canned_speed")?);
    set!(a.guess_levels, r.uint("adversary.levels")?);

    set!(sc.drive_script, drive_script(&r)?);
    set!(sc.stale_events, r.uint("keyfob.stale_events")?.map(|v| v as usize));

    sc.validate()?;
    Ok(sc)
}
