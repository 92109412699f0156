//! Individual eavesdropping strategies.
//!
//! Eve acts on the traveling qubit at two points: on the forward path between
//! Bob and Alice, and on the backward path between Alice and Bob. Her hooks see
//! only the [`StateVector`]; the preparation basis, Bob's bit and Alice's
//! choices never reach them.

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{QkdError, Result};
use crate::qsim::{discriminate_collapse, measure, Basis, Gate, StateVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AttackKind {
    None,
    /// Intercept and resend.
    Ir,
    /// Non-orthogonal ancilla attack.
    Nort,
    /// Double CNOT.
    Dcnot,
    /// Double CNOT followed by Eve's own random spin flips.
    DcnotStar,
}

impl AttackKind {
    pub fn name(self) -> &'static str {
        match self {
            AttackKind::None => "none",
            AttackKind::Ir => "ir",
            AttackKind::Nort => "nort",
            AttackKind::Dcnot => "dcnot",
            AttackKind::DcnotStar => "dcnot-star",
        }
    }
}

impl fmt::Display for AttackKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AttackKind {
    type Err = QkdError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(AttackKind::None),
            "ir" => Ok(AttackKind::Ir),
            "nort" => Ok(AttackKind::Nort),
            "dcnot" => Ok(AttackKind::Dcnot),
            "dcnot-star" | "dcnotstar" | "dcnot*" => Ok(AttackKind::DcnotStar),
            other => Err(QkdError::InvalidConfig(format!("unknown attack '{other}'"))),
        }
    }
}

/// Attack selection plus its knobs. Parameters irrelevant to `kind` are ignored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackParams {
    pub kind: AttackKind,
    /// Fraction of attacked rounds.
    pub xi: f64,
    /// Forward ancilla angle (NORT).
    pub x: f64,
    /// Backward ancilla angle (NORT).
    pub x_prime: f64,
    /// Backward flip probability (DCNOT*).
    pub chi: f64,
}

impl Default for AttackParams {
    fn default() -> Self {
        Self {
            kind: AttackKind::None,
            xi: 1.0,
            x: FRAC_PI_2,
            x_prime: FRAC_PI_2,
            chi: 0.0,
        }
    }
}

impl AttackParams {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn ir(xi: f64) -> Self {
        Self {
            kind: AttackKind::Ir,
            xi,
            ..Self::default()
        }
    }

    pub fn nort(xi: f64, x: f64, x_prime: f64) -> Self {
        Self {
            kind: AttackKind::Nort,
            xi,
            x,
            x_prime,
            ..Self::default()
        }
    }

    pub fn dcnot(xi: f64) -> Self {
        Self {
            kind: AttackKind::Dcnot,
            xi,
            ..Self::default()
        }
    }

    pub fn dcnot_star(xi: f64, chi: f64) -> Self {
        Self {
            kind: AttackKind::DcnotStar,
            xi,
            chi,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.xi) {
            return Err(QkdError::InvalidConfig(format!(
                "xi = {} outside [0, 1]",
                self.xi
            )));
        }
        if self.kind == AttackKind::Nort {
            for (name, v) in [("x", self.x), ("x'", self.x_prime)] {
                if !(0.0..=FRAC_PI_2).contains(&v) {
                    return Err(QkdError::InvalidConfig(format!(
                        "{name} = {v} outside [0, pi/2]"
                    )));
                }
            }
        }
        if self.kind == AttackKind::DcnotStar && !(0.0..=0.5).contains(&self.chi) {
            return Err(QkdError::InvalidConfig(format!(
                "chi = {} outside [0, 0.5]",
                self.chi
            )));
        }
        Ok(())
    }

    /// Builds a fresh strategy for these parameters.
    pub fn strategy(&self) -> Result<Box<dyn AttackStrategy>> {
        self.validate()?;
        Ok(match self.kind {
            AttackKind::None => Box::new(NoAttack),
            AttackKind::Ir => Box::new(ir_attack(self)),
            AttackKind::Nort => Box::new(nort_attack(self)),
            AttackKind::Dcnot | AttackKind::DcnotStar => Box::new(dcnot_attack(self)),
        })
    }
}

/// What happened to the qubit after the forward path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Path {
    /// Measured at the far end (LM05 control mode, BB84 receiver).
    Consumed,
    /// Encoded by Alice and sent back to Bob.
    Returned,
}

/// Eve's guesses for one round. For a returned qubit `alice` estimates
/// Alice's operation and `bob` estimates Bob's decoded key bit; for a
/// consumed qubit both estimate the forward bit.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EveGuesses {
    pub alice: Option<u8>,
    pub bob: Option<u8>,
}

/// Eavesdropper hooks. One instance is driven round by round; all per-round
/// scratch is reset by [`AttackStrategy::begin_round`].
pub trait AttackStrategy: Send {
    /// Starts a round and decides whether it is attacked.
    fn begin_round(&mut self, rng: &mut dyn RngCore) -> bool;

    fn on_forward(&mut self, state: StateVector, rng: &mut dyn RngCore) -> Result<StateVector>;

    fn on_backward(&mut self, state: StateVector, rng: &mut dyn RngCore) -> Result<StateVector>;

    /// Eve's final measurements on whatever she holds.
    fn finalize(
        &mut self,
        state: &StateVector,
        path: Path,
        rng: &mut dyn RngCore,
    ) -> Result<EveGuesses>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct NoAttack;

impl AttackStrategy for NoAttack {
    fn begin_round(&mut self, _rng: &mut dyn RngCore) -> bool {
        false
    }

    fn on_forward(&mut self, state: StateVector, _rng: &mut dyn RngCore) -> Result<StateVector> {
        Ok(state)
    }

    fn on_backward(&mut self, state: StateVector, _rng: &mut dyn RngCore) -> Result<StateVector> {
        Ok(state)
    }

    fn finalize(&mut self, _: &StateVector, _: Path, _: &mut dyn RngCore) -> Result<EveGuesses> {
        Ok(EveGuesses::default())
    }
}

fn attacked(xi: f64, rng: &mut dyn RngCore) -> bool {
    // Draw unconditionally so the stream layout does not depend on xi edge cases.
    let u: f64 = rng.gen();
    u < xi
}

/// Intercept and resend: measure in a random basis on the way out, measure
/// again in the same basis on the way back.
#[derive(Debug, Clone)]
pub struct InterceptResend {
    xi: f64,
    active: bool,
    basis: Basis,
    forward: u8,
    backward: Option<u8>,
}

pub fn ir_attack(params: &AttackParams) -> InterceptResend {
    InterceptResend {
        xi: params.xi,
        active: false,
        basis: Basis::Z,
        forward: 0,
        backward: None,
    }
}

impl AttackStrategy for InterceptResend {
    fn begin_round(&mut self, rng: &mut dyn RngCore) -> bool {
        self.active = attacked(self.xi, rng);
        self.basis = Basis::random(rng);
        self.backward = None;
        self.active
    }

    fn on_forward(&mut self, state: StateVector, rng: &mut dyn RngCore) -> Result<StateVector> {
        if !self.active {
            return Ok(state);
        }
        let (bit, post) = measure(&state, 0, self.basis, rng)?;
        self.forward = bit;
        Ok(post)
    }

    fn on_backward(&mut self, state: StateVector, rng: &mut dyn RngCore) -> Result<StateVector> {
        if !self.active {
            return Ok(state);
        }
        let (bit, post) = measure(&state, 0, self.basis, rng)?;
        self.backward = Some(bit);
        Ok(post)
    }

    fn finalize(&mut self, _: &StateVector, path: Path, _: &mut dyn RngCore) -> Result<EveGuesses> {
        if !self.active {
            return Ok(EveGuesses::default());
        }
        Ok(match (path, self.backward) {
            (Path::Returned, Some(back)) => {
                let op = self.forward ^ back;
                EveGuesses {
                    alice: Some(op),
                    bob: Some(op),
                }
            }
            _ => EveGuesses {
                alice: Some(self.forward),
                bob: Some(self.forward),
            },
        })
    }
}

/// Non-orthogonal attack in the symmetric `D = 0` family.
///
/// Eve aligns with Z or X at random, entangles a fresh ancilla on each path
/// through a controlled rotation, and reads both ancillae with minimum-error
/// measurements.
#[derive(Debug, Clone)]
pub struct NonOrthogonal {
    xi: f64,
    x: f64,
    x_prime: f64,
    active: bool,
    align: Basis,
    forward_wire: Option<usize>,
    backward_wire: Option<usize>,
}

pub fn nort_attack(params: &AttackParams) -> NonOrthogonal {
    NonOrthogonal {
        xi: params.xi,
        x: params.x,
        x_prime: params.x_prime,
        active: false,
        align: Basis::Z,
        forward_wire: None,
        backward_wire: None,
    }
}

impl NonOrthogonal {
    fn entangle(&self, state: StateVector, angle: f64) -> Result<(StateVector, usize)> {
        let mut s = state;
        let anc = s.append_ancilla()?;
        let rot = Gate::AncillaRotation {
            angle,
            control: 0,
            target: anc,
        };
        if self.align == Basis::X {
            s = s
                .apply(Gate::Hadamard(0))?
                .apply(rot)?
                .apply(Gate::Hadamard(0))?;
        } else {
            s = s.apply(rot)?;
        }
        Ok((s, anc))
    }
}

impl AttackStrategy for NonOrthogonal {
    fn begin_round(&mut self, rng: &mut dyn RngCore) -> bool {
        self.active = attacked(self.xi, rng);
        self.align = Basis::random(rng);
        self.forward_wire = None;
        self.backward_wire = None;
        self.active
    }

    fn on_forward(&mut self, state: StateVector, _rng: &mut dyn RngCore) -> Result<StateVector> {
        if !self.active {
            return Ok(state);
        }
        let (s, w) = self.entangle(state, self.x)?;
        self.forward_wire = Some(w);
        Ok(s)
    }

    fn on_backward(&mut self, state: StateVector, _rng: &mut dyn RngCore) -> Result<StateVector> {
        if !self.active {
            return Ok(state);
        }
        let (s, w) = self.entangle(state, self.x_prime)?;
        self.backward_wire = Some(w);
        Ok(s)
    }

    fn finalize(
        &mut self,
        state: &StateVector,
        path: Path,
        rng: &mut dyn RngCore,
    ) -> Result<EveGuesses> {
        let Some(fw) = self.forward_wire.filter(|_| self.active) else {
            return Ok(EveGuesses::default());
        };
        let (g, rest) = discriminate_collapse(state, fw, self.x, rng)?;
        match (path, self.backward_wire) {
            (Path::Returned, Some(bw)) => {
                let (r, _) = discriminate_collapse(&rest, bw, self.x_prime, rng)?;
                Ok(EveGuesses {
                    alice: Some(g ^ r),
                    bob: Some(g ^ r),
                })
            }
            _ => Ok(EveGuesses {
                alice: Some(g),
                bob: Some(g),
            }),
        }
    }
}

/// Double CNOT, optionally followed by Eve's own spin flip with probability `chi`.
#[derive(Debug, Clone)]
pub struct DoubleCnot {
    xi: f64,
    chi: f64,
    star: bool,
    active: bool,
    ancilla: Option<usize>,
    flipped: u8,
}

pub fn dcnot_attack(params: &AttackParams) -> DoubleCnot {
    DoubleCnot {
        xi: params.xi,
        chi: params.chi,
        star: params.kind == AttackKind::DcnotStar,
        active: false,
        ancilla: None,
        flipped: 0,
    }
}

impl AttackStrategy for DoubleCnot {
    fn begin_round(&mut self, rng: &mut dyn RngCore) -> bool {
        self.active = attacked(self.xi, rng);
        self.ancilla = None;
        self.flipped = 0;
        self.active
    }

    fn on_forward(&mut self, state: StateVector, _rng: &mut dyn RngCore) -> Result<StateVector> {
        if !self.active {
            return Ok(state);
        }
        let mut s = state;
        let anc = s.append_ancilla()?;
        self.ancilla = Some(anc);
        s.apply(Gate::Cnot {
            control: 0,
            target: anc,
        })
    }

    fn on_backward(&mut self, state: StateVector, rng: &mut dyn RngCore) -> Result<StateVector> {
        let Some(anc) = self.ancilla.filter(|_| self.active) else {
            return Ok(state);
        };
        let mut s = state.apply(Gate::Cnot {
            control: 0,
            target: anc,
        })?;
        if self.star {
            let u: f64 = rng.gen();
            if u < self.chi {
                self.flipped = 1;
                s = s.apply(Gate::SpinFlip(0))?;
            }
        }
        Ok(s)
    }

    fn finalize(
        &mut self,
        state: &StateVector,
        path: Path,
        rng: &mut dyn RngCore,
    ) -> Result<EveGuesses> {
        let Some(anc) = self.ancilla.filter(|_| self.active) else {
            return Ok(EveGuesses::default());
        };
        let (m, _) = measure(state, anc, Basis::Z, rng)?;
        Ok(match path {
            Path::Returned => EveGuesses {
                alice: Some(m),
                bob: Some(m ^ self.flipped),
            },
            Path::Consumed => EveGuesses {
                alice: Some(m),
                bob: Some(m),
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qsim::prepare;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    #[test]
    fn parse_kinds() {
        assert_eq!("IR".parse::<AttackKind>().unwrap(), AttackKind::Ir);
        assert_eq!(
            "dcnot*".parse::<AttackKind>().unwrap(),
            AttackKind::DcnotStar
        );
        assert!("trojan".parse::<AttackKind>().is_err());
    }

    #[test]
    fn validation_ranges() {
        assert!(AttackParams::ir(2.0).validate().is_err());
        assert!(AttackParams::ir(-0.1).validate().is_err());
        assert!(AttackParams::nort(1.0, 1.7, FRAC_PI_2).validate().is_err());
        assert!(AttackParams::dcnot_star(1.0, 0.6).validate().is_err());
        // chi is ignored for plain DCNOT.
        let p = AttackParams {
            chi: 0.9,
            ..AttackParams::dcnot(1.0)
        };
        assert!(p.validate().is_ok());
    }

    #[test]
    fn dcnot_leaves_returned_state_untouched() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for b in Basis::ALL {
            for bit in 0..2u8 {
                for op in 0..2u8 {
                    let mut a = dcnot_attack(&AttackParams::dcnot(1.0));
                    assert!(a.begin_round(&mut rng));
                    let mut s = a.on_forward(prepare(b, bit), &mut rng).unwrap();
                    if op == 1 {
                        s = s.apply(Gate::SpinFlip(0)).unwrap();
                    }
                    s = a.on_backward(s, &mut rng).unwrap();
                    // Ancilla holds |op> exactly and the qubit is what Bob expects.
                    let (out, _) = measure(&s, 0, b, &mut rng).unwrap();
                    assert_eq!(out, bit ^ op);
                    let g = a.finalize(&s, Path::Returned, &mut rng).unwrap();
                    assert_eq!(g.alice, Some(op));
                }
            }
        }
    }

    #[test]
    fn ir_copies_encoding_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..500 {
            let mut a = ir_attack(&AttackParams::ir(1.0));
            a.begin_round(&mut rng);
            let op = rng.gen_range(0..2u8);
            let mut s = a
                .on_forward(prepare(Basis::random(&mut rng), 1), &mut rng)
                .unwrap();
            if op == 1 {
                s = s.apply(Gate::SpinFlip(0)).unwrap();
            }
            s = a.on_backward(s, &mut rng).unwrap();
            let g = a.finalize(&s, Path::Returned, &mut rng).unwrap();
            assert_eq!(g.alice, Some(op));
        }
    }

    #[test]
    fn unattacked_rounds_leave_no_guess() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for p in [
            AttackParams::ir(0.0),
            AttackParams::nort(0.0, PI / 3.0, FRAC_PI_2),
            AttackParams::dcnot(0.0),
        ] {
            let mut a = p.strategy().unwrap();
            assert!(!a.begin_round(&mut rng));
            let s0 = prepare(Basis::X, 1);
            let s = a.on_forward(s0, &mut rng).unwrap();
            let s = a.on_backward(s, &mut rng).unwrap();
            assert_eq!(s, s0);
            assert_eq!(
                a.finalize(&s, Path::Returned, &mut rng).unwrap(),
                EveGuesses::default()
            );
        }
    }

    #[test]
    fn nort_with_zero_angle_is_transparent() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut a = nort_attack(&AttackParams::nort(1.0, 0.0, 0.0));
        for b in Basis::ALL {
            a.begin_round(&mut rng);
            let s = a.on_forward(prepare(b, 1), &mut rng).unwrap();
            for _ in 0..50 {
                assert_eq!(measure(&s, 0, b, &mut rng).unwrap().0, 1);
            }
        }
    }
}
