//! Batch runner: executes protocol rounds in fixed-size chunks, merges the
//! tallies, and compares every empirical rate with its closed-form prediction.
//!
//! Chunk `k` draws from the ChaCha8 stream `k` of the run seed, so the merged
//! tallies do not depend on how many worker threads execute the chunks.

use std::fmt;
use std::io::Write;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::attacks::{AttackKind, AttackParams};
use crate::error::{QkdError, Result};
use crate::protocol::{run_round, Protocol, ProtocolConfig, Ratio, RoundRecord, Tallies};

pub const CHUNK_ROUNDS: u64 = 1 << 16;
/// Two-sided 95% normal quantile.
pub const Z_95: f64 = 1.959_963_984_540_054;
/// Width of the PASS band, in standard deviations.
pub const PASS_SIGMAS: f64 = 5.0;

/// RNG stream for chunk `chunk` of a run seeded with `seed`.
pub fn chunk_rng(seed: u64, chunk: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk);
    rng
}

fn chunk_count(rounds: u64) -> u64 {
    rounds.div_ceil(CHUNK_ROUNDS)
}

fn chunk_len(rounds: u64, chunk: u64) -> u64 {
    (rounds - chunk * CHUNK_ROUNDS).min(CHUNK_ROUNDS)
}

fn run_chunk(config: &ProtocolConfig, attack: &AttackParams, chunk: u64) -> Result<Tallies> {
    let mut rng = chunk_rng(config.seed, chunk);
    let mut strategy = attack.strategy()?;
    let mut t = Tallies::default();
    for _ in 0..chunk_len(config.rounds, chunk) {
        t.add_record(&run_round(config, strategy.as_mut(), &mut rng)?);
    }
    Ok(t)
}

/// Runs all rounds of `config` and returns every record, in round order.
pub fn simulate_records(
    config: &ProtocolConfig,
    attack: &AttackParams,
) -> Result<Vec<RoundRecord>> {
    config.validate()?;
    let mut out = Vec::with_capacity(config.rounds as usize);
    for chunk in 0..chunk_count(config.rounds) {
        let mut rng = chunk_rng(config.seed, chunk);
        let mut strategy = attack.strategy()?;
        for _ in 0..chunk_len(config.rounds, chunk) {
            out.push(run_round(config, strategy.as_mut(), &mut rng)?);
        }
    }
    Ok(out)
}

/// Merged tallies of a run. `workers = None` uses rayon's global pool;
/// `Some(1)` runs on the calling thread.
pub fn run_tallies(
    config: &ProtocolConfig,
    attack: &AttackParams,
    workers: Option<usize>,
) -> Result<Tallies> {
    config.validate()?;
    attack.validate()?;
    let chunks = chunk_count(config.rounds);
    let merge = |parts: Vec<Result<Tallies>>| -> Result<Tallies> {
        let mut total = Tallies::default();
        for p in parts {
            total += p?;
        }
        Ok(total)
    };
    match workers {
        Some(1) => merge((0..chunks).map(|c| run_chunk(config, attack, c)).collect()),
        Some(k) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .map_err(|e| QkdError::InvalidConfig(e.to_string()))?;
            pool.install(|| {
                merge(
                    (0..chunks)
                        .into_par_iter()
                        .map(|c| run_chunk(config, attack, c))
                        .collect(),
                )
            })
        }
        None => merge(
            (0..chunks)
                .into_par_iter()
                .map(|c| run_chunk(config, attack, c))
                .collect(),
        ),
    }
}

/// Closed-form expectations for each tallied rate. Eve's rates are
/// conditioned on attacked rounds, since unattacked rounds record no guess.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Predictions {
    pub q1: Option<f64>,
    /// Control-mode error split by Bob's basis (Z, X).
    pub q1_by_basis: [Option<f64>; 2],
    pub q_ab: Option<f64>,
    pub q_ae: Option<f64>,
    pub q_be: Option<f64>,
}

pub fn predictions(protocol: Protocol, attack: &AttackParams) -> Predictions {
    let mut p = aggregate_predictions(protocol, attack);
    p.q1_by_basis = match attack.kind {
        // The CNOTs act in Z only: Z states pass, X states are randomised.
        AttackKind::Dcnot | AttackKind::DcnotStar => [Some(0.0), Some(0.5 * attack.xi)],
        _ => [p.q1, p.q1],
    };
    p
}

fn aggregate_predictions(protocol: Protocol, attack: &AttackParams) -> Predictions {
    let xi = attack.xi;
    let (sx, cx) = attack.x.sin_cos();
    let (sxp, cxp) = attack.x_prime.sin_cos();
    match (protocol, attack.kind) {
        (_, AttackKind::None) => Predictions {
            q1: Some(0.0),
            q_ab: Some(0.0),
            ..Default::default()
        },
        (Protocol::Lm05, AttackKind::Ir) => Predictions {
            q1: Some(0.25 * xi),
            q_ab: Some(0.25 * xi),
            q_ae: Some(0.0),
            q_be: Some(0.25),
            ..Default::default()
        },
        (Protocol::Lm05, AttackKind::Nort) => Predictions {
            q1: Some(xi * (1.0 - cx) / 4.0),
            q_ab: Some(xi * (1.0 - cx * cxp) / 4.0),
            // Wrong iff exactly one of the two Helstrom guesses fails.
            q_ae: Some(0.5 * (1.0 - sx * sxp)),
            // Bob's decoded bit is itself wrong on half of the misaligned rounds.
            q_be: Some((2.0 - sx * sxp) / 4.0),
            ..Default::default()
        },
        (Protocol::Lm05, AttackKind::Dcnot) => Predictions {
            q1: Some(0.25 * xi),
            q_ab: Some(0.0),
            q_ae: Some(0.0),
            q_be: Some(0.0),
            ..Default::default()
        },
        (Protocol::Lm05, AttackKind::DcnotStar) => Predictions {
            q1: Some(0.25 * xi),
            q_ab: Some(xi * attack.chi),
            q_ae: Some(0.0),
            q_be: Some(0.0),
            ..Default::default()
        },
        (Protocol::Bb84, AttackKind::Ir) => Predictions {
            q1: Some(0.25 * xi),
            q_ae: Some(0.25),
            q_be: Some(0.25),
            ..Default::default()
        },
        (Protocol::Bb84, AttackKind::Nort) => Predictions {
            q1: Some(xi * (1.0 - cx) / 4.0),
            q_ae: Some((2.0 - sx) / 4.0),
            q_be: Some((2.0 - sx) / 4.0),
            ..Default::default()
        },
        (Protocol::Bb84, AttackKind::Dcnot | AttackKind::DcnotStar) => Predictions {
            q1: Some(0.25 * xi),
            q_ae: Some(0.25),
            q_be: Some(0.25),
            ..Default::default()
        },
    }
}

/// Wilson score interval for `errors / trials` at normal quantile `z`.
pub fn wilson_interval(errors: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = errors as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Pass,
    Fail,
    /// Trials exist but no closed form is available.
    Unpredicted,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Unpredicted => "n/a",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateReport {
    pub name: &'static str,
    pub errors: u64,
    pub trials: u64,
    pub rate: Option<f64>,
    pub ci95: (f64, f64),
    pub band: (f64, f64),
    pub prediction: Option<f64>,
    /// `None` when there were no trials.
    pub verdict: Option<Verdict>,
}

impl RateReport {
    fn new(name: &'static str, r: Ratio, prediction: Option<f64>) -> Self {
        let band = wilson_interval(r.errors, r.trials, PASS_SIGMAS);
        let verdict = (r.trials > 0).then_some(match prediction {
            None => Verdict::Unpredicted,
            Some(p) if p >= band.0 - 1e-12 && p <= band.1 + 1e-12 => Verdict::Pass,
            Some(_) => Verdict::Fail,
        });
        Self {
            name,
            errors: r.errors,
            trials: r.trials,
            rate: r.rate(),
            ci95: wilson_interval(r.errors, r.trials, Z_95),
            band,
            prediction,
            verdict,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchReport {
    pub config: ProtocolConfig,
    pub attack: AttackParams,
    pub tallies: Tallies,
    pub rates: Vec<RateReport>,
    pub wall_seconds: f64,
}

impl BatchReport {
    pub fn rate(&self, name: &str) -> Option<&RateReport> {
        self.rates.iter().find(|r| r.name == name)
    }
}

pub fn build_report(
    config: &ProtocolConfig,
    attack: &AttackParams,
    tallies: Tallies,
    wall_seconds: f64,
) -> BatchReport {
    let p = predictions(config.protocol, attack);
    let rates = vec![
        RateReport::new("q1", tallies.q1, p.q1),
        RateReport::new("q1_Z", tallies.q1_by_basis[0], p.q1_by_basis[0]),
        RateReport::new("q1_X", tallies.q1_by_basis[1], p.q1_by_basis[1]),
        RateReport::new("q_ab", tallies.q_ab, p.q_ab),
        RateReport::new("q_ae", tallies.q_ae, p.q_ae),
        RateReport::new("q_be", tallies.q_be, p.q_be),
    ];
    BatchReport {
        config: *config,
        attack: *attack,
        tallies,
        rates,
        wall_seconds,
    }
}

/// Runs `config.rounds` rounds under `attack` and compares with the closed forms.
pub fn run_batch(
    config: &ProtocolConfig,
    attack: &AttackParams,
    workers: Option<usize>,
) -> Result<BatchReport> {
    let start = Instant::now();
    let tallies = run_tallies(config, attack, workers)?;
    Ok(build_report(
        config,
        attack,
        tallies,
        start.elapsed().as_secs_f64(),
    ))
}

/// Outcome of checking a report.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Comparison {
    AllPass,
    Failed(Vec<&'static str>),
}

impl Comparison {
    pub fn exit_code(&self) -> i32 {
        match self {
            Comparison::AllPass => 0,
            Comparison::Failed(_) => 1,
        }
    }
}

/// Rates without trials or without a prediction are skipped.
pub fn compare(report: &BatchReport) -> Comparison {
    let failed: Vec<_> = report
        .rates
        .iter()
        .filter(|r| r.verdict == Some(Verdict::Fail))
        .map(|r| r.name)
        .collect();
    if failed.is_empty() {
        Comparison::AllPass
    } else {
        Comparison::Failed(failed)
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.6}")).unwrap_or_default()
}

pub fn write_table<W: Write>(out: &mut W, report: &BatchReport) -> Result<()> {
    writeln!(
        out,
        "{} rounds={} seed={} attack={} xi={} x={:.6} x'={:.6} chi={} ({:.2}s)",
        report.config.protocol,
        report.config.rounds,
        report.config.seed,
        report.attack.kind,
        report.attack.xi,
        report.attack.x,
        report.attack.x_prime,
        report.attack.chi,
        report.wall_seconds
    )?;
    writeln!(
        out,
        "{:<6} {:>10} {:>10} {:>10} {:>23} {:>10} {:>7}",
        "rate", "errors", "trials", "value", "95% interval", "predicted", "verdict"
    )?;
    for r in &report.rates {
        let ci = format!("[{:.6}, {:.6}]", r.ci95.0, r.ci95.1);
        writeln!(
            out,
            "{:<6} {:>10} {:>10} {:>10} {:>23} {:>10} {:>7}",
            r.name,
            r.errors,
            r.trials,
            fmt_opt(r.rate),
            ci,
            fmt_opt(r.prediction),
            r.verdict
                .map(|v| v.to_string())
                .unwrap_or_else(|| "-".into())
        )?;
    }
    Ok(())
}

pub const REPORT_CSV_HEADER: &str =
    "rate,errors,trials,value,ci95_lo,ci95_hi,band_lo,band_hi,predicted,verdict";

pub fn write_csv<W: Write>(out: &mut W, report: &BatchReport) -> Result<()> {
    writeln!(out, "{REPORT_CSV_HEADER}")?;
    for r in &report.rates {
        writeln!(
            out,
            "{},{},{},{},{:.9},{:.9},{:.9},{:.9},{},{}",
            r.name,
            r.errors,
            r.trials,
            r.rate.map(|v| format!("{v:.9}")).unwrap_or_default(),
            r.ci95.0,
            r.ci95.1,
            r.band.0,
            r.band.1,
            r.prediction.map(|v| format!("{v:.9}")).unwrap_or_default(),
            r.verdict.map(|v| v.to_string()).unwrap_or_default()
        )?;
    }
    Ok(())
}

/// One JSON object per rate.
pub fn write_jsonl<W: Write>(out: &mut W, report: &BatchReport) -> Result<()> {
    for r in &report.rates {
        let line = serde_json::to_string(r).map_err(|e| QkdError::Io(e.to_string()))?;
        writeln!(out, "{line}")?;
    }
    Ok(())
}
