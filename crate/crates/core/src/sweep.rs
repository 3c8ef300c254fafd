//! Grid sweeps over scenario keys.
//!
//! Each grid point runs twice: as configured, and with the propagation bound
//! disabled so the velocity cross-check is seen on its own. The `prop` flag
//! marks a measured hop over the propagation bound, `gait` a velocity
//! mismatch in the gait-only run.

use std::fmt::Write as _;

use rayon::prelude::*;
use toml::Table;

use crate::config::{self, ConfigError};
use crate::protocol::TimingPolicy;
use crate::sim::{run_scenario, Outcome, RunResult};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GridAxis {
    pub key: String,
    pub values: Vec<String>,
}

/// `KEY=v1,v2,...`. An empty value list is allowed and yields no rows.
pub fn parse_axis(spec: &str) -> Result<GridAxis, ConfigError> {
    let (key, values) = spec
        .split_once('=')
        .ok_or_else(|| ConfigError::Key { key: spec.to_string(), message: "grid axis must be KEY=v1,v2,...".into() })?;
    let key = key.trim();
    if !config::KEYS.contains(&key) {
        return Err(ConfigError::Key { key: key.to_string(), message: "unknown grid key".into() });
    }
    let values: Vec<String> = values.split(',').map(|v| v.trim().to_string()).filter(|v| !v.is_empty()).collect();
    Ok(GridAxis { key: key.to_string(), values })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub point: Vec<String>,
    pub outcome: Outcome,
    pub max_added_us: i64,
    pub max_measured_us: i64,
    pub prop_flag: bool,
    pub gait_flag: bool,
    /// Largest |vel_v - vel_kf| seen by the gait-only run.
    pub gait_delta: Option<f64>,
    pub gait_only: Outcome,
}

fn points(axes: &[GridAxis]) -> Vec<Vec<String>> {
    axes.iter().fold(vec![Vec::new()], |acc, axis| {
        acc.iter()
            .flat_map(|prefix| {
                axis.values.iter().map(move |v| {
                    let mut p = prefix.clone();
                    p.push(v.clone());
                    p
                })
            })
            .collect()
    })
}

fn over_bound(policy: &TimingPolicy, run: &RunResult) -> bool {
    let bound = policy.t_travel_max_us + policy.t_epsilon_us + policy.clock_drift_bound_us;
    run.sessions.iter().flat_map(|s| &s.metrics.measured_us).any(|(_, p)| *p > bound)
}

/// Rows in grid order (first axis slowest). No axes means no rows.
pub fn sweep(base: &Table, fallback_id: &str, axes: &[GridAxis]) -> Result<Vec<SweepRow>, ConfigError> {
    if axes.is_empty() {
        config::scenario_from_table(base, fallback_id)?;
        return Ok(Vec::new());
    }
    let scenarios = points(axes)
        .into_iter()
        .map(|point| {
            let mut t = base.clone();
            for (axis, v) in axes.iter().zip(&point) {
                config::set_key(&mut t, &axis.key, config::parse_value(v))?;
            }
            Ok((point, config::scenario_from_table(&t, fallback_id)?))
        })
        .collect::<Result<Vec<_>, ConfigError>>()?;
    scenarios
        .into_par_iter()
        .map(|(point, sc)| {
            let run = run_scenario(&sc)?;
            let mut gait_sc = sc.clone();
            gait_sc.timing.propagation_check = false;
            let gait_run = run_scenario(&gait_sc)?;
            let checks: Vec<_> = gait_run.sessions.iter().flat_map(|s| &s.metrics.gait_checks).collect();
            Ok(SweepRow {
                point,
                outcome: run.outcome,
                max_added_us: run.hops.iter().map(|h| h.added_us).max().unwrap_or(0),
                max_measured_us: run
                    .sessions
                    .iter()
                    .flat_map(|s| &s.metrics.measured_us)
                    .map(|(_, p)| *p)
                    .max()
                    .unwrap_or(0),
                prop_flag: over_bound(&sc.timing, &run),
                gait_flag: checks.iter().any(|g| g.mismatch(&gait_sc.timing)),
                gait_delta: checks.iter().map(|g| g.delta_vel()).reduce(f64::max),
                gait_only: gait_run.outcome,
            })
        })
        .collect()
}

fn columns(axes: &[GridAxis]) -> Vec<String> {
    let mut c: Vec<String> = axes.iter().map(|a| a.key.clone()).collect();
    c.extend(
        ["verdict", "max_added_us", "max_measured_us", "prop", "gait", "gait_delta", "gait_only_verdict"]
            .map(String::from),
    );
    c
}

fn cells(row: &SweepRow) -> Vec<String> {
    let flag = |b: bool| if b { "yes" } else { "no" }.to_string();
    let mut c = row.point.clone();
    c.push(row.outcome.to_string());
    c.push(row.max_added_us.to_string());
    c.push(row.max_measured_us.to_string());
    c.push(flag(row.prop_flag));
    c.push(flag(row.gait_flag));
    c.push(row.gait_delta.map(|d| format!("{d:.6}")).unwrap_or_else(|| "-".into()));
    c.push(row.gait_only.to_string());
    c
}

pub fn render_tsv(axes: &[GridAxis], rows: &[SweepRow]) -> String {
    let mut o = columns(axes).join("\t");
    o.push('\n');
    for r in rows {
        o.push_str(&cells(r).join("\t"));
        o.push('\n');
    }
    o
}

pub fn render_aligned(axes: &[GridAxis], rows: &[SweepRow]) -> String {
    let table: Vec<Vec<String>> = std::iter::once(columns(axes)).chain(rows.iter().map(cells)).collect();
    let widths: Vec<usize> =
        (0..table[0].len()).map(|i| table.iter().map(|r| r[i].len()).max().unwrap_or(0)).collect();
    let mut o = String::new();
    for r in &table {
        let line: Vec<String> = r.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
        let _ = writeln!(o, "{}", line.join("  ").trim_end());
    }
    o
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_parsing() {
        let a = parse_axis("adversary.t_relay=0, 0.001,0.002").unwrap();
        assert_eq!(a.values, ["0", "0.001", "0.002"]);
        assert!(parse_axis("adversary.t_relay=").unwrap().values.is_empty());
        assert!(parse_axis("t_relay").is_err());
        assert!(parse_axis("adversary.speed=1").is_err());
    }

    #[test]
    fn cartesian_order() {
        let axes = [
            GridAxis { key: "a".into(), values: vec!["1".into(), "2".into()] },
            GridAxis { key: "b".into(), values: vec!["x".into(), "y".into()] },
        ];
        let p = points(&axes);
        assert_eq!(p, [["1", "x"], ["1", "y"], ["2", "x"], ["2", "y"]]);
    }

    #[test]
    fn empty_axis_gives_no_rows() {
        let base = config::parse_table("").unwrap();
        let axes = [parse_axis("adversary.t_relay=").unwrap()];
        assert!(sweep(&base, "x", &axes).unwrap().is_empty());
        assert_eq!(render_tsv(&axes, &[]).lines().count(), 1);
    }

    #[test]
    fn bad_value_is_an_error() {
        let base = config::parse_table("").unwrap();
        let axes = [parse_axis("adversary.consistency=sideways").unwrap()];
        assert_eq!(sweep(&base, "x", &axes).unwrap_err().key_name(), Some("adversary.consistency"));
    }

    #[test]
    fn relay_boundary() {
        let base = config::parse_table(
            "[timing]\nt_travel_max = 0.002\nt_epsilon = 0.001\n[adversary]\nmode = \"pure_relay\"\n",
        )
        .unwrap();
        let axes = [parse_axis("adversary.t_relay=0,0.0005,0.001,0.0011,0.002").unwrap()];
        let rows = sweep(&base, "x", &axes).unwrap();
        let accepted: Vec<bool> = rows.iter().map(|r| r.outcome.verdict.is_accept()).collect();
        assert_eq!(accepted, [true, true, true, false, false]);
        assert!(rows[4].prop_flag && !rows[0].prop_flag);
        let aligned = render_aligned(&axes, &rows);
        assert_eq!(aligned.lines().count(), 6);
    }
}
