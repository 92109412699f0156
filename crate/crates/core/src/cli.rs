//! `qkd2way` command-line front end.
//!
//! Exit codes: 0 on success, 1 when a simulation disagrees with its closed
//! forms, 2 on usage errors. Every flag may also be given in a `key=value`
//! file passed with `--config`; flags on the command line win.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::attacks::{AttackKind, AttackParams};
use crate::error::{QkdError, Result};
use crate::infotheory::{curve_points, threshold_table, write_curve_csv, EveCurve, NoiseModel};
use crate::montecarlo::{
    compare, run_batch, simulate_records, write_csv, write_jsonl, write_table, Comparison,
};
use crate::photonics::{
    crossover_distance_in, distance_sweep, write_gain_csv, LinkBudget, Objective,
};
use crate::protocol::{write_round_log, Protocol, ProtocolConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "qkd2way",
    version,
    about = "Two-way QKD (LM05) vs BB84 simulator and analysis"
)]
#[command(args_override_self = true)]
pub struct Cli {
    /// key=value file mirroring the command-line flags.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Monte Carlo simulation of protocol rounds under an attack.
    Simulate(SimulateArgs),
    /// Mutual-information curves versus q1.
    Curves(CurvesArgs),
    /// Security-threshold table for all single-particle attacks.
    Thresholds(ThresholdsArgs),
    /// Optimised secure gain under beam splitting versus distance.
    Gain(PhotonArgs),
    /// Optimised PNS security margins versus distance, plus the crossover.
    Pns(PhotonArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Csv,
    Jsonl,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TableFormat {
    Table,
    Csv,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value = "lm05", value_parser = parse_protocol)]
    pub protocol: Protocol,
    #[arg(long, default_value = "none", value_parser = parse_attack)]
    pub attack: AttackKind,
    #[arg(long, default_value_t = 1.0)]
    pub xi: f64,
    /// Forward ancilla angle in radians (NORT).
    #[arg(long, default_value_t = std::f64::consts::FRAC_PI_2)]
    pub x: f64,
    /// Backward ancilla angle in radians (NORT).
    #[arg(long, default_value_t = std::f64::consts::FRAC_PI_2)]
    pub xprime: f64,
    #[arg(long, default_value_t = 0.0)]
    pub chi: f64,
    #[arg(long, default_value_t = 100_000)]
    pub rounds: u64,
    #[arg(long, env = "QKD2WAY_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Control-mode probability.
    #[arg(long, default_value_t = 0.25)]
    pub c: f64,
    /// Fraction of encoding rounds revealed for the Q_AB estimate.
    #[arg(long, default_value_t = 0.1)]
    pub reveal: f64,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: ReportFormat,
    /// Machine-readable report destination.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-round CSV log destination.
    #[arg(long)]
    pub log: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CurvesArgs {
    #[arg(long, value_parser = parse_curve)]
    pub attack: EveCurve,
    #[arg(long, default_value = "identified", value_parser = parse_model)]
    pub model: NoiseModel,
    #[arg(long = "grid-step", default_value_t = 0.001)]
    pub grid_step: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ThresholdsArgs {
    #[arg(long, default_value = "identified", value_parser = parse_model)]
    pub model: NoiseModel,
    #[arg(long, value_enum, default_value = "table")]
    pub format: TableFormat,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PhotonArgs {
    #[arg(long, default_value_t = 0.0)]
    pub lmin: f64,
    #[arg(long, default_value_t = 50.0)]
    pub lmax: f64,
    #[arg(long, default_value_t = 0.25)]
    pub lstep: f64,
    #[arg(long = "eta-d", default_value_t = 0.12)]
    pub eta_d: f64,
    #[arg(long = "gamma-b", default_value_t = 0.4)]
    pub gamma_b: f64,
    #[arg(long = "gamma-a", default_value_t = 0.45)]
    pub gamma_a: f64,
    #[arg(long, default_value_t = 0.02)]
    pub atten: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_protocol(s: &str) -> std::result::Result<Protocol, String> {
    s.parse().map_err(|e: QkdError| e.to_string())
}

fn parse_attack(s: &str) -> std::result::Result<AttackKind, String> {
    s.parse().map_err(|e: QkdError| e.to_string())
}

fn parse_curve(s: &str) -> std::result::Result<EveCurve, String> {
    s.parse().map_err(|e: QkdError| e.to_string())
}

fn parse_model(s: &str) -> std::result::Result<NoiseModel, String> {
    s.parse().map_err(|e: QkdError| e.to_string())
}

const SUBCOMMANDS: [&str; 5] = ["simulate", "curves", "thresholds", "gain", "pns"];

/// Reads `key=value` lines; blank lines and `#` comments are skipped.
pub fn read_config_file(path: &Path) -> Result<Vec<(String, String)>> {
    let text = std::fs::read_to_string(path)?;
    let mut pairs = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            QkdError::InvalidConfig(format!("{}:{}: expected key=value", path.display(), n + 1))
        })?;
        pairs.push((
            k.trim().trim_start_matches('-').to_string(),
            v.trim().to_string(),
        ));
    }
    Ok(pairs)
}

/// Splices flags from the `--config` file right after the subcommand so that
/// later command-line occurrences override them.
pub fn expand_config(args: Vec<OsString>) -> Result<Vec<OsString>> {
    let strs: Vec<String> = args
        .iter()
        .map(|a| a.to_string_lossy().into_owned())
        .collect();
    let mut path = None;
    for (i, a) in strs.iter().enumerate() {
        if a == "--config" {
            path = strs.get(i + 1).cloned();
        } else if let Some(p) = a.strip_prefix("--config=") {
            path = Some(p.to_string());
        }
    }
    let Some(path) = path else {
        return Ok(args);
    };
    let Some(sub) = strs.iter().position(|a| SUBCOMMANDS.contains(&a.as_str())) else {
        return Ok(args);
    };
    let mut out: Vec<OsString> = args[..=sub].to_vec();
    for (k, v) in read_config_file(Path::new(&path))? {
        if k == "config" {
            continue;
        }
        out.push(format!("--{k}").into());
        out.push(v.into());
    }
    out.extend_from_slice(&args[sub + 1..]);
    Ok(out)
}

fn open_out(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| QkdError::Io(format!("{}: {e}", p.display())))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let args = match expand_config(args) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let result = match cli.command {
        Command::Simulate(a) => simulate(&a),
        Command::Curves(a) => curves(&a),
        Command::Thresholds(a) => thresholds(&a),
        Command::Gain(a) => photon(&a, Objective::SecureGain),
        Command::Pns(a) => photon(&a, Objective::PnsMargin),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
    }
}

pub fn simulate(a: &SimulateArgs) -> Result<i32> {
    let config = ProtocolConfig {
        protocol: a.protocol,
        control_prob: a.c,
        rounds: a.rounds,
        seed: a.seed,
        reveal_fraction: a.reveal,
    };
    config.validate()?;
    let attack = AttackParams {
        kind: a.attack,
        xi: a.xi,
        x: a.x,
        x_prime: a.xprime,
        chi: a.chi,
    };
    attack.validate()?;
    if a.workers == Some(0) {
        return Err(QkdError::InvalidConfig("workers must be at least 1".into()));
    }

    let report = run_batch(&config, &attack, a.workers)?;
    if let Some(path) = &a.out {
        let mut w = open_out(&Some(path.clone()))?;
        match a.format {
            ReportFormat::Csv => write_csv(&mut w, &report)?,
            ReportFormat::Jsonl => write_jsonl(&mut w, &report)?,
        }
        w.flush()?;
    }
    if let Some(path) = &a.log {
        let records = simulate_records(&config, &attack)?;
        let mut w = open_out(&Some(path.clone()))?;
        write_round_log(&mut w, &records)?;
        w.flush()?;
    }
    let mut stdout = io::stdout().lock();
    write_table(&mut stdout, &report)?;
    stdout.flush()?;

    Ok(match compare(&report) {
        Comparison::AllPass => EXIT_OK,
        c @ Comparison::Failed(_) => {
            if let Comparison::Failed(names) = &c {
                eprintln!("verification failed: {}", names.join(", "));
            }
            c.exit_code()
        }
    })
}

pub fn curves(a: &CurvesArgs) -> Result<i32> {
    let points = curve_points(a.attack, a.model, a.grid_step)?;
    let mut w = open_out(&a.out)?;
    write_curve_csv(&mut w, &points)?;
    w.flush()?;
    Ok(EXIT_OK)
}

pub fn thresholds(a: &ThresholdsArgs) -> Result<i32> {
    let table = threshold_table(a.model)?;
    let mut w = open_out(&a.out)?;
    let cols = ["LM05-DR", "LM05-RR", "BB84"];
    match a.format {
        TableFormat::Table => {
            writeln!(w, "Security thresholds on q1 (%)")?;
            writeln!(
                w,
                "{:<9} {:>8} {:>8} {:>8}",
                "attack", cols[0], cols[1], cols[2]
            )?;
            let mut notes = Vec::new();
            for row in &table {
                let cells: Vec<String> = row
                    .cells
                    .iter()
                    .zip(cols)
                    .map(|(c, col)| match c {
                        Ok(t) => format!("{:.1}", 100.0 * t.value()),
                        Err(why) => {
                            notes.push(format!("{} / {}: {}", row.attack, col, why));
                            "N/A".to_string()
                        }
                    })
                    .collect();
                writeln!(
                    w,
                    "{:<9} {:>8} {:>8} {:>8}",
                    row.attack, cells[0], cells[1], cells[2]
                )?;
            }
            for n in notes {
                writeln!(w, "N/A  {n}")?;
            }
        }
        TableFormat::Csv => {
            writeln!(w, "attack,column,threshold_q1,kind")?;
            for row in &table {
                for (c, col) in row.cells.iter().zip(cols) {
                    match c {
                        Ok(t) => {
                            let kind = match t {
                                crate::infotheory::Threshold::Crossing(_) => "crossing",
                                crate::infotheory::Threshold::WholeDomain(_) => "whole_domain",
                            };
                            writeln!(w, "{},{},{:.6},{}", row.attack, col, t.value(), kind)?;
                        }
                        Err(why) => writeln!(w, "{},{},,N/A: {}", row.attack, col, why)?,
                    }
                }
            }
        }
    }
    w.flush()?;
    Ok(EXIT_OK)
}

pub fn photon(a: &PhotonArgs, objective: Objective) -> Result<i32> {
    let budget = LinkBudget {
        eta_d: a.eta_d,
        gamma_b: a.gamma_b,
        gamma_a: a.gamma_a,
        atten: a.atten,
        ..LinkBudget::default()
    };
    budget.validate()?;
    let rows = distance_sweep(objective, &budget, a.lmin, a.lmax, a.lstep)?;
    let mut w = open_out(&a.out)?;
    write_gain_csv(&mut w, objective, &rows)?;
    if objective == Objective::PnsMargin {
        match crossover_distance_in(&budget, a.lmin, a.lmax) {
            Ok(l) => writeln!(w, "# crossover_km,{l:.4}")?,
            Err(QkdError::NoCrossing { .. }) => writeln!(w, "# crossover_km,none in range")?,
            Err(e) => return Err(e),
        }
    }
    w.flush()?;
    Ok(EXIT_OK)
}
