use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use perimeter::config::{self, ConfigError};
use perimeter::properties;
use perimeter::report::RunReport;
use perimeter::sim::montecarlo::{estimate_advantage, run_trials};
use perimeter::sim::{run_scenario, AdversaryMode, Scenario, Trace};
use perimeter::sweep;

const SEED_ENV: &str = "PERIMETER_SEED";

/// Seeds live in the scenario table, and TOML integers are signed 64-bit.
const MAX_SEED: u64 = i64::MAX as u64;

/// Expected successes below this make an advantage estimate meaningless.
const MIN_EXPECTED_SUCCESSES: f64 = 10.0;

#[derive(Parser)]
#[command(name = "perimeter", version, about = "Keyfob relay-attack simulator and trace checker")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and check its verdict against `expect`.
    Run {
        config: PathBuf,
        #[arg(long, value_parser = clap::value_parser!(u64).range(..=MAX_SEED))]
        seed: Option<u64>,
        /// Write the trace file here.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Write the report here instead of stdout.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Run a scenario over a grid of key values.
    Sweep {
        config: PathBuf,
        /// KEY=v1,v2,... (repeatable; axes combine as a cartesian product)
        #[arg(long = "grid")]
        grid: Vec<String>,
        #[arg(long, value_parser = clap::value_parser!(u64).range(..=MAX_SEED))]
        seed: Option<u64>,
        /// Print the aligned table instead of tab-separated rows.
        #[arg(long)]
        aligned: bool,
    },
    /// Estimate the brute-force relay advantage over n challenge rounds.
    Advantage {
        config: PathBuf,
        #[arg(long)]
        rounds: u32,
        #[arg(long)]
        trials: u64,
        #[arg(long, value_parser = clap::value_parser!(u64).range(..=MAX_SEED))]
        seed: Option<u64>,
    },
    /// Check a trace against the authentication hierarchy.
    Check {
        trace: PathBuf,
        #[arg(long)]
        verifier: String,
        #[arg(long)]
        prover: String,
    },
}

/// Anything that ends in exit code 2: bad configuration, grid, trace or file.
enum Failure {
    Input(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Input(format!("config error: {e}"))
    }
}

fn io_err(path: &Path, e: std::io::Error) -> Failure {
    Failure::Input(format!("{}: {e}", path.display()))
}

/// `--seed`, then the file's own `seed`, then `PERIMETER_SEED`.
fn resolve_seed(flag: Option<u64>, table: &config::Table) -> Result<Option<u64>, Failure> {
    if flag.is_some() {
        return Ok(flag);
    }
    if table.contains_key("seed") {
        return Ok(None);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse::<u64>()
            .ok()
            .filter(|s| *s <= MAX_SEED)
            .map(Some)
            .ok_or_else(|| Failure::Input(format!("{SEED_ENV}: not an integer in 0..={MAX_SEED}: `{v}`"))),
        Err(_) => Ok(None),
    }
}

fn load(path: &Path, seed_flag: Option<u64>) -> Result<(config::Table, Scenario), Failure> {
    let mut table = config::load_table(path)?;
    if let Some(seed) = resolve_seed(seed_flag, &table)? {
        table.insert("seed".into(), config::Value::Integer(seed as i64));
    }
    let fallback = path.file_stem().and_then(|s| s.to_str()).unwrap_or("scenario");
    let sc = config::scenario_from_table(&table, fallback)?;
    Ok((table, sc))
}

fn write_out(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| io_err(p, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_run(config: &Path, seed: Option<u64>, trace: Option<&Path>, report: Option<&Path>) -> Result<u8, Failure> {
    let (_, sc) = load(config, seed)?;
    let run = run_scenario(&sc).map_err(ConfigError::from)?;
    if let Some(p) = trace {
        fs::write(p, run.trace.render()).map_err(|e| io_err(p, e))?;
    }
    let mut text = RunReport::new(&sc, &run).render();
    let mut met = sc.expect.map(|e| e.matches(&run.outcome)).unwrap_or(true);
    if sc.trials > 1 {
        let summary = run_trials(&sc, sc.trials, |_, _| {}).map_err(ConfigError::from)?;
        text.push_str(&format!(
            "trials\t{}\taccepted={}\texpectation_met={}\n",
            summary.runs, summary.accepted, summary.expectation_met
        ));
        for (verdict, n) in &summary.verdicts {
            text.push_str(&format!("trial-verdict\t{verdict}\t{n}\n"));
        }
        met = summary.expectation_met == summary.runs;
    }
    write_out(report, &text)?;
    if !met {
        eprintln!("verdict {} does not match expect={}", run.outcome, sc.expect.expect("mismatch implies expect"));
        return Ok(1);
    }
    Ok(0)
}

fn cmd_sweep(config: &Path, grid: &[String], seed: Option<u64>, aligned: bool) -> Result<u8, Failure> {
    let axes = grid
        .iter()
        .map(|g| sweep::parse_axis(g))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| Failure::Input(format!("invalid grid: {e}")))?;
    let (table, _) = load(config, seed)?;
    let fallback = config.file_stem().and_then(|s| s.to_str()).unwrap_or("scenario");
    let rows = sweep::sweep(&table, fallback, &axes).map_err(|e| Failure::Input(format!("invalid grid: {e}")))?;
    let text = if aligned { sweep::render_aligned(&axes, &rows) } else { sweep::render_tsv(&axes, &rows) };
    print!("{text}");
    Ok(0)
}

fn cmd_advantage(config: &Path, rounds: u32, trials: u64, seed: Option<u64>) -> Result<u8, Failure> {
    let (_, sc) = load(config, seed)?;
    if sc.adversary.mode != AdversaryMode::BruteForceRelay {
        return Err(Failure::Input(format!(
            "config error: `adversary.mode`: advantage needs brute_force_relay, got {}",
            sc.adversary.mode.as_str()
        )));
    }
    let expected = 2f64.powf(-(sc.response_bits as f64) * rounds as f64);
    if expected * (trials as f64) < MIN_EXPECTED_SUCCESSES {
        return Err(Failure::Input(format!(
            "not measurable: {trials} trials expect {:.3e} successes at {} response bits x {rounds} rounds; \
             lower `response_bits` or raise --trials",
            expected * trials as f64,
            sc.response_bits
        )));
    }
    let e = estimate_advantage(rounds, sc.response_bits, trials, sc.seed);
    let half = 1.96 * (e.rate() * (1.0 - e.rate()) / trials as f64).sqrt();
    println!("rounds\t{rounds}");
    println!("response_bits\t{}", sc.response_bits);
    println!("trials\t{trials}");
    println!("seed\t{}", sc.seed);
    println!("successes\t{}", e.successes);
    println!("adv\t{:.6e}\t+-{:.3e}", e.rate(), half);
    println!("analytic\t{:.6e}", e.expected);
    println!("sigma\t{:.3e}", e.sigma());
    println!("z\t{:+.3}", e.z());
    Ok(0)
}

fn cmd_check(trace: &Path, verifier: &str, prover: &str) -> Result<u8, Failure> {
    let text = fs::read_to_string(trace).map_err(|e| io_err(trace, e))?;
    let bad = |e: perimeter::sim::trace::TraceError| Failure::Input(format!("{}: {e}", trace.display()));
    let parsed = Trace::parse(&text).map_err(bad)?;
    let report = properties::check_all(&parsed, verifier, prover).map_err(bad)?;
    print!("{report}");
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { config, seed, trace, report } => cmd_run(config, *seed, trace.as_deref(), report.as_deref()),
        Command::Sweep { config, grid, seed, aligned } => cmd_sweep(config, grid, *seed, *aligned),
        Command::Advantage { config, rounds, trials, seed } => cmd_advantage(config, *rounds, *trials, *seed),
        Command::Check { trace, verifier, prover } => cmd_check(trace, verifier, prover),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Input(msg)) => {
            eprintln!("perimeter: {msg}");
            ExitCode::from(2)
        }
    }
}
