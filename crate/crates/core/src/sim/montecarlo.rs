//! Monte Carlo estimators: the n-round response-guessing game, EDR pattern
//! guessing, and repeated scenario runs. Trials run in parallel; each has its
//! own seed derived from (root seed, trial index), and results are plain
//! counts, so the outcome does not depend on scheduling.

use std::collections::BTreeMap;
use std::fmt;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use super::{run_scenario, RunResult, Scenario, ScenarioError};
use crate::edr::{guess_space_size, EdrError, EventKind, EventRecord, GuessSpace, MobilityPattern};
use crate::hash;

/// Empirical success rate against an analytic expectation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub trials: u64,
    pub successes: u64,
    pub expected: f64,
}

impl Estimate {
    pub fn rate(&self) -> f64 {
        if self.trials == 0 {
            return 0.0;
        }
        self.successes as f64 / self.trials as f64
    }

    /// Binomial standard error under the expected rate.
    pub fn sigma(&self) -> f64 {
        if self.trials == 0 {
            return 0.0;
        }
        (self.expected * (1.0 - self.expected) / self.trials as f64).sqrt()
    }

    pub fn z(&self) -> f64 {
        let d = self.rate() - self.expected;
        let s = self.sigma();
        if s == 0.0 {
            if d == 0.0 { 0.0 } else { f64::INFINITY }
        } else {
            d / s
        }
    }

    pub fn within_sigmas(&self, k: f64) -> bool {
        self.z().abs() <= k
    }
}

impl fmt::Display for Estimate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "adv={:.6e} ({}/{}) expected={:.6e} sigma={:.3e} z={:+.3}",
            self.rate(),
            self.successes,
            self.trials,
            self.expected,
            self.sigma(),
            self.z()
        )
    }
}

fn trial_rng(tag: &[u8], seed: u64, trial: u64) -> ChaCha20Rng {
    ChaCha20Rng::from_seed(hash::derive_seed(&[tag, &seed.to_be_bytes(), &trial.to_be_bytes()]))
}

fn truncated_eq(a: &[u8], b: &[u8], bits: u32) -> bool {
    let full = (bits / 8) as usize;
    if a[..full] != b[..full] {
        return false;
    }
    let rem = bits % 8;
    rem == 0 || (a[full] ^ b[full]) >> (8 - rem) == 0
}

/// One play of the n-round game: the vehicle issues `rounds` fresh challenges
/// and the adversary, holding no key, must guess each response's leading
/// `response_bits` bits.
pub fn advantage_trial(rounds: u32, response_bits: u32, seed: u64, trial: u64) -> bool {
    let mut rng = trial_rng(b"perimeter/advantage", seed, trial);
    let mut key = [0u8; 16];
    let mut nonce = [0u8; 16];
    rng.fill_bytes(&mut key);
    rng.fill_bytes(&mut nonce);
    for _ in 0..rounds {
        let mut challenge = [0u8; 16];
        rng.fill_bytes(&mut challenge);
        let expected = hash::prf(&key, &[challenge.as_slice(), nonce.as_slice()].concat());
        let mut guess = [0u8; 32];
        rng.fill_bytes(&mut guess);
        if !truncated_eq(&expected, &guess, response_bits) {
            return false;
        }
    }
    true
}

/// Empirical `Pr[Check = 1]` over `trials` plays; the analytic value is `2^-(bits * rounds)`.
pub fn estimate_advantage(rounds: u32, response_bits: u32, trials: u64, seed: u64) -> Estimate {
    assert!((1..=256).contains(&response_bits), "response width must be 1..=256 bits");
    let successes = (0..trials).into_par_iter().filter(|&i| advantage_trial(rounds, response_bits, seed, i)).count();
    Estimate {
        trials,
        successes: successes as u64,
        expected: 2f64.powf(-(response_bits as f64) * rounds as f64),
    }
}

/// Pattern over `slots` one-second slots, each a kind among the first
/// `kinds` and a value among `levels`.
fn random_pattern<R: RngCore>(rng: &mut R, kinds: u64, levels: u64, slots: u32) -> MobilityPattern {
    let mut p = MobilityPattern::new(i64::MAX / 2, slots as usize + 1);
    for s in 0..slots {
        let kind = EventKind::ALL[rng.random_range(0..kinds) as usize];
        let level = rng.random_range(0..levels);
        p.record_event(EventRecord { t_us: s as i64 * 1_000_000, kind, value_milli: level as i64 })
            .expect("increasing times");
    }
    p
}

/// An adversary who knows the event schema guesses a secret pattern
/// uniformly; success when the digests match.
pub fn edr_guess_rate(kinds: u64, levels: u64, slots: u32, trials: u64, seed: u64) -> Result<Estimate, EdrError> {
    if kinds as usize > EventKind::ALL.len() {
        return Err(EdrError::UnknownKind(format!("kind #{kinds}")));
    }
    let space = guess_space_size(kinds, levels, slots)?;
    let expected = match space {
        GuessSpace::Exact(n) => 1.0 / n as f64,
        GuessSpace::ExceedsU64 => 0.0,
    };
    let successes = (0..trials)
        .into_par_iter()
        .filter(|&i| {
            let mut rng = trial_rng(b"perimeter/edr-guess", seed, i);
            let truth = random_pattern(&mut rng, kinds, levels, slots);
            let guess = random_pattern(&mut rng, kinds, levels, slots);
            truth.digest() == guess.digest()
        })
        .count();
    Ok(Estimate { trials, successes: successes as u64, expected })
}

/// Verdict counts over repeated runs of one scenario.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TrialSummary {
    pub runs: u64,
    pub accepted: u64,
    pub expectation_met: u64,
    pub verdicts: BTreeMap<String, u64>,
}

/// Run `trials` copies of `sc` with derived seeds; `inspect` sees each run in trial order.
pub fn run_trials(
    sc: &Scenario,
    trials: u64,
    inspect: impl Fn(u64, &RunResult) + Sync,
) -> Result<TrialSummary, ScenarioError> {
    sc.validate()?;
    let results: Vec<Result<(bool, bool, String), ScenarioError>> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut s = sc.clone();
            s.seed = sc.trial_seed(i);
            let r = run_scenario(&s)?;
            inspect(i, &r);
            let met = sc.expect.map(|e| e.matches(&r.outcome)).unwrap_or(true);
            Ok((r.outcome.verdict.is_accept(), met, r.outcome.to_string()))
        })
        .collect();
    let mut summary = TrialSummary::default();
    for r in results {
        let (accepted, met, label) = r?;
        summary.runs += 1;
        summary.accepted += accepted as u64;
        summary.expectation_met += met as u64;
        *summary.verdicts.entry(label).or_default() += 1;
    }
    Ok(summary)
}
