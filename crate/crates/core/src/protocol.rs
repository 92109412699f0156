//! Round-level state machines for LM05 and BB84, and QBER tallies.

use std::fmt;
use std::io::Write;
use std::ops::AddAssign;
use std::str::FromStr;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::attacks::{AttackStrategy, EveGuesses, Path};
use crate::error::{QkdError, Result};
use crate::qsim::{measure, prepare, Basis, Gate};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Protocol {
    Lm05,
    Bb84,
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Protocol::Lm05 => f.write_str("LM05"),
            Protocol::Bb84 => f.write_str("BB84"),
        }
    }
}

impl FromStr for Protocol {
    type Err = QkdError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lm05" => Ok(Protocol::Lm05),
            "bb84" => Ok(Protocol::Bb84),
            other => Err(QkdError::InvalidConfig(format!(
                "unknown protocol '{other}'"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub protocol: Protocol,
    /// Probability of control mode (LM05 only).
    pub control_prob: f64,
    pub rounds: u64,
    pub seed: u64,
    /// Fraction of encoding-mode rounds whose encoding Alice reveals.
    pub reveal_fraction: f64,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            protocol: Protocol::Lm05,
            control_prob: 0.25,
            rounds: 100_000,
            seed: 0,
            reveal_fraction: 0.1,
        }
    }
}

impl ProtocolConfig {
    pub fn lm05(rounds: u64, seed: u64) -> Self {
        Self {
            rounds,
            seed,
            ..Self::default()
        }
    }

    pub fn bb84(rounds: u64, seed: u64) -> Self {
        Self {
            protocol: Protocol::Bb84,
            rounds,
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.control_prob) {
            return Err(QkdError::InvalidConfig(format!(
                "control probability {} outside [0, 1]",
                self.control_prob
            )));
        }
        if self.rounds == 0 {
            return Err(QkdError::InvalidConfig("rounds must be at least 1".into()));
        }
        if !(self.reveal_fraction > 0.0 && self.reveal_fraction <= 1.0) {
            return Err(QkdError::InvalidConfig(format!(
                "reveal fraction {} outside (0, 1]",
                self.reveal_fraction
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    /// Alice encodes and returns the qubit.
    Encoding,
    /// Alice measures the qubit; nothing returns to Bob.
    Control,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::Encoding => f.write_str("EM"),
            Mode::Control => f.write_str("CM"),
        }
    }
}

/// Everything that happened in one round.
///
/// BB84 rounds reuse the control-mode layout: Bob is the sender, and the
/// `alice_cm_*` fields hold the receiver's basis and outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub protocol: Protocol,
    pub mode: Mode,
    pub bob_basis: Basis,
    pub bob_bit: u8,
    pub alice_op: Option<u8>,
    pub alice_cm_basis: Option<Basis>,
    pub alice_cm_outcome: Option<u8>,
    /// `None` when the qubit never returned.
    pub bob_outcome: Option<u8>,
    pub eve_alice_guess: Option<u8>,
    pub eve_bob_guess: Option<u8>,
    pub attacked: bool,
    /// Encoding disclosed for the Q_AB estimate.
    pub revealed: bool,
}

impl RoundRecord {
    /// Bob's decoded operation, `outcome XOR prepared bit`.
    pub fn decoded_op(&self) -> Option<u8> {
        self.bob_outcome.map(|o| o ^ self.bob_bit)
    }

    pub fn is_sifted(&self) -> bool {
        self.mode == Mode::Control && self.alice_cm_basis == Some(self.bob_basis)
    }
}

/// Alice's choice for an LM05 round.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AliceChoice {
    Encode { op: u8, revealed: bool },
    Control { basis: Basis },
}

/// The random choices of the legitimate users in one LM05 round.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Lm05Choices {
    pub bob_basis: Basis,
    pub bob_bit: u8,
    pub alice: AliceChoice,
}

impl Lm05Choices {
    pub fn draw<R: Rng + ?Sized>(config: &ProtocolConfig, rng: &mut R) -> Self {
        let bob_basis = Basis::random(rng);
        let bob_bit = rng.gen_range(0..2u8);
        let alice = if rng.gen::<f64>() < config.control_prob {
            AliceChoice::Control {
                basis: Basis::random(rng),
            }
        } else {
            let op = rng.gen_range(0..2u8);
            AliceChoice::Encode {
                op,
                revealed: rng.gen::<f64>() < config.reveal_fraction,
            }
        };
        Self {
            bob_basis,
            bob_bit,
            alice,
        }
    }
}

/// Executes an LM05 round with fixed user choices.
pub fn execute_lm05(
    choices: Lm05Choices,
    attack: &mut dyn AttackStrategy,
    rng: &mut dyn RngCore,
) -> Result<RoundRecord> {
    let Lm05Choices {
        bob_basis,
        bob_bit,
        alice,
    } = choices;
    let attacked = attack.begin_round(rng);
    let state = attack.on_forward(prepare(bob_basis, bob_bit), rng)?;
    let mut rec = RoundRecord {
        protocol: Protocol::Lm05,
        mode: Mode::Control,
        bob_basis,
        bob_bit,
        alice_op: None,
        alice_cm_basis: None,
        alice_cm_outcome: None,
        bob_outcome: None,
        eve_alice_guess: None,
        eve_bob_guess: None,
        attacked,
        revealed: false,
    };
    match alice {
        AliceChoice::Control { basis } => {
            let (o, _) = measure(&state, 0, basis, rng)?;
            rec.alice_cm_basis = Some(basis);
            rec.alice_cm_outcome = Some(o);
        }
        AliceChoice::Encode { op, revealed } => {
            let encoded = if op == 1 {
                state.apply(Gate::SpinFlip(0))?
            } else {
                state
            };
            let back = attack.on_backward(encoded, rng)?;
            let (o, post) = measure(&back, 0, bob_basis, rng)?;
            let EveGuesses { alice, bob } = attack.finalize(&post, Path::Returned, rng)?;
            rec.mode = Mode::Encoding;
            rec.alice_op = Some(op);
            rec.revealed = revealed;
            rec.bob_outcome = Some(o);
            rec.eve_alice_guess = alice;
            rec.eve_bob_guess = bob;
        }
    }
    Ok(rec)
}

pub fn run_round_lm05(
    config: &ProtocolConfig,
    attack: &mut dyn AttackStrategy,
    rng: &mut dyn RngCore,
) -> Result<RoundRecord> {
    let choices = Lm05Choices::draw(config, rng);
    execute_lm05(choices, attack, rng)
}

/// One BB84 round: Bob sends, the receiver measures in a random basis.
pub fn run_round_bb84(
    _config: &ProtocolConfig,
    attack: &mut dyn AttackStrategy,
    rng: &mut dyn RngCore,
) -> Result<RoundRecord> {
    let bob_basis = Basis::random(rng);
    let bob_bit = rng.gen_range(0..2u8);
    let attacked = attack.begin_round(rng);
    let state = attack.on_forward(prepare(bob_basis, bob_bit), rng)?;
    let rx_basis = Basis::random(rng);
    let (o, post) = measure(&state, 0, rx_basis, rng)?;
    let EveGuesses { alice, bob } = attack.finalize(&post, Path::Consumed, rng)?;
    Ok(RoundRecord {
        protocol: Protocol::Bb84,
        mode: Mode::Control,
        bob_basis,
        bob_bit,
        alice_op: None,
        alice_cm_basis: Some(rx_basis),
        alice_cm_outcome: Some(o),
        bob_outcome: None,
        eve_alice_guess: alice,
        eve_bob_guess: bob,
        attacked,
        revealed: false,
    })
}

pub fn run_round(
    config: &ProtocolConfig,
    attack: &mut dyn AttackStrategy,
    rng: &mut dyn RngCore,
) -> Result<RoundRecord> {
    match config.protocol {
        Protocol::Lm05 => run_round_lm05(config, attack, rng),
        Protocol::Bb84 => run_round_bb84(config, attack, rng),
    }
}

/// An error counter.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ratio {
    pub errors: u64,
    pub trials: u64,
}

impl Ratio {
    pub fn record(&mut self, error: bool) {
        self.trials += 1;
        self.errors += u64::from(error);
    }

    pub fn rate(&self) -> Option<f64> {
        (self.trials > 0).then(|| self.errors as f64 / self.trials as f64)
    }
}

impl AddAssign for Ratio {
    fn add_assign(&mut self, rhs: Self) {
        self.errors += rhs.errors;
        self.trials += rhs.trials;
    }
}

/// QBER counters of a run.
///
/// * `q1`: control-mode rounds with matching bases (BB84: sifted rounds).
/// * `q_ab`: revealed encoding-mode rounds, decoded op vs Alice's op.
/// * `q_ae`: Eve's guess of Alice's op (BB84: of the sender's bit).
/// * `q_be`: Eve's guess of Bob's key bit, the decoded op (BB84: the
///   receiver's outcome).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tallies {
    pub rounds: u64,
    pub control_rounds: u64,
    pub q1: Ratio,
    /// `q1` split by Bob's preparation basis, indexed by [`Basis::index`].
    pub q1_by_basis: [Ratio; 2],
    pub q_ab: Ratio,
    pub q_ae: Ratio,
    pub q_be: Ratio,
}

impl AddAssign for Tallies {
    fn add_assign(&mut self, rhs: Self) {
        self.rounds += rhs.rounds;
        self.control_rounds += rhs.control_rounds;
        self.q1 += rhs.q1;
        for (a, b) in self.q1_by_basis.iter_mut().zip(rhs.q1_by_basis) {
            *a += b;
        }
        self.q_ab += rhs.q_ab;
        self.q_ae += rhs.q_ae;
        self.q_be += rhs.q_be;
    }
}

impl Tallies {
    pub fn add_record(&mut self, r: &RoundRecord) {
        self.rounds += 1;
        match r.mode {
            Mode::Control => {
                self.control_rounds += 1;
                let (Some(basis), Some(out)) = (r.alice_cm_basis, r.alice_cm_outcome) else {
                    return;
                };
                if basis != r.bob_basis {
                    return;
                }
                let err = out != r.bob_bit;
                self.q1.record(err);
                self.q1_by_basis[r.bob_basis.index()].record(err);
                if r.protocol == Protocol::Bb84 {
                    if let Some(g) = r.eve_alice_guess {
                        self.q_ae.record(g != r.bob_bit);
                    }
                    if let Some(g) = r.eve_bob_guess {
                        self.q_be.record(g != out);
                    }
                }
            }
            Mode::Encoding => {
                let (Some(op), Some(out)) = (r.alice_op, r.bob_outcome) else {
                    return;
                };
                if r.revealed {
                    self.q_ab.record((out ^ r.bob_bit) != op);
                }
                if let Some(g) = r.eve_alice_guess {
                    self.q_ae.record(g != op);
                }
                if let Some(g) = r.eve_bob_guess {
                    self.q_be.record(g != out ^ r.bob_bit);
                }
            }
        }
    }
}

pub fn tally<'a, I>(records: I) -> Tallies
where
    I: IntoIterator<Item = &'a RoundRecord>,
{
    let mut t = Tallies::default();
    for r in records {
        t.add_record(r);
    }
    t
}

pub const ROUND_LOG_HEADER: &str = "round,protocol,mode,bob_basis,bob_bit,alice_op,alice_cm_basis,\
alice_cm_outcome,bob_outcome,eve_alice_guess,eve_bob_guess,attacked,revealed";

fn opt<T: fmt::Display>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// Writes one CSV row per round. Absent values (including a lost qubit) are empty cells.
pub fn write_round_log<W: Write>(out: &mut W, records: &[RoundRecord]) -> Result<()> {
    writeln!(out, "{ROUND_LOG_HEADER}")?;
    for (i, r) in records.iter().enumerate() {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            i,
            r.protocol,
            r.mode,
            r.bob_basis,
            r.bob_bit,
            opt(r.alice_op),
            opt(r.alice_cm_basis),
            opt(r.alice_cm_outcome),
            opt(r.bob_outcome),
            opt(r.eve_alice_guess),
            opt(r.eve_bob_guess),
            u8::from(r.attacked),
            u8::from(r.revealed),
        )?;
    }
    Ok(())
}
