//! Minimal dense state-vector simulator.
//!
//! A register holds at most [`MAX_WIRES`] qubits: the traveling qubit on wire 0
//! and up to two eavesdropper ancillae. Wire `w` is bit `w` of the amplitude
//! index, so appending an ancilla never reorders existing amplitudes.
//!
//! All gates used by the protocol and attacks are real, so real-basis
//! projective measurements parametrised by a single angle cover both the
//! protocol bases and the minimum-error discrimination measurement.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4};

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{QkdError, Result};

pub const MAX_WIRES: usize = 3;
const MAX_DIM: usize = 1 << MAX_WIRES;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Measurement basis of the protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Basis {
    Z,
    X,
}

impl Basis {
    pub const ALL: [Basis; 2] = [Basis::Z, Basis::X];

    /// Rotation angle of the basis relative to the computational one.
    /// The outcome-0 vector is `(cos a, sin a)`.
    pub fn angle(self) -> f64 {
        match self {
            Basis::Z => 0.0,
            Basis::X => FRAC_PI_4,
        }
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Basis {
        if rng.gen::<bool>() {
            Basis::X
        } else {
            Basis::Z
        }
    }

    pub fn index(self) -> usize {
        match self {
            Basis::Z => 0,
            Basis::X => 1,
        }
    }
}

impl std::fmt::Display for Basis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Basis::Z => f.write_str("Z"),
            Basis::X => f.write_str("X"),
        }
    }
}

/// Quantum gates acting on one or two wires.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gate {
    Identity(usize),
    PauliX(usize),
    PauliZ(usize),
    /// `iY = ZX`; maps each of the four protocol states to an orthogonal one.
    SpinFlip(usize),
    Hadamard(usize),
    Cnot {
        control: usize,
        target: usize,
    },
    /// Controlled real reflection of an ancilla: the target is left alone
    /// when the control is 0 and hit by `[[cos x, sin x], [sin x, -cos x]]`
    /// when it is 1. Starting from `|0>`
    /// the two ancilla states are `|0>` and `cos x|0> + sin x|1>`, with
    /// overlap `cos x`. At `x = pi/2` this is exactly a CNOT.
    AncillaRotation {
        angle: f64,
        control: usize,
        target: usize,
    },
}

type Mat2 = [[f64; 2]; 2];
type Mat4 = [[f64; 4]; 4];

impl Gate {
    fn wires(&self) -> (usize, Option<usize>) {
        match *self {
            Gate::Identity(w)
            | Gate::PauliX(w)
            | Gate::PauliZ(w)
            | Gate::SpinFlip(w)
            | Gate::Hadamard(w) => (w, None),
            Gate::Cnot { control, target }
            | Gate::AncillaRotation {
                control, target, ..
            } => (control, Some(target)),
        }
    }

    fn single_matrix(&self) -> Option<Mat2> {
        let h = FRAC_1_SQRT_2;
        match self {
            Gate::Identity(_) => Some([[1.0, 0.0], [0.0, 1.0]]),
            Gate::PauliX(_) => Some([[0.0, 1.0], [1.0, 0.0]]),
            Gate::PauliZ(_) => Some([[1.0, 0.0], [0.0, -1.0]]),
            Gate::SpinFlip(_) => Some([[0.0, 1.0], [-1.0, 0.0]]),
            Gate::Hadamard(_) => Some([[h, h], [h, -h]]),
            _ => None,
        }
    }

    /// Local unitary of the gate. One-wire gates give a 2x2 matrix embedded
    /// in the top-left block; two-wire gates are indexed by
    /// `2 * control_bit + target_bit`.
    pub fn local_matrix(&self) -> Vec<Vec<f64>> {
        if let Some(m) = self.single_matrix() {
            return m.iter().map(|r| r.to_vec()).collect();
        }
        let m = match *self {
            Gate::Cnot { .. } => controlled([[0.0, 1.0], [1.0, 0.0]]),
            Gate::AncillaRotation { angle, .. } => controlled(reflection(angle)),
            _ => unreachable!(),
        };
        m.iter().map(|r| r.to_vec()).collect()
    }
}

fn reflection(x: f64) -> Mat2 {
    let (s, c) = x.sin_cos();
    [[c, s], [s, -c]]
}

fn controlled(u: Mat2) -> Mat4 {
    [
        [1.0, 0.0, 0.0, 0.0],
        [0.0, 1.0, 0.0, 0.0],
        [0.0, 0.0, u[0][0], u[0][1]],
        [0.0, 0.0, u[1][0], u[1][1]],
    ]
}

/// Pure state of a register of `num_wires` qubits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateVector {
    amps: [Complex64; MAX_DIM],
    num_wires: usize,
}

impl StateVector {
    /// `|0...0>` on `num_wires` wires.
    pub fn zero(num_wires: usize) -> Result<Self> {
        if num_wires == 0 || num_wires > MAX_WIRES {
            return Err(QkdError::RegisterFull { max: MAX_WIRES });
        }
        let mut amps = [ZERO; MAX_DIM];
        amps[0] = ONE;
        Ok(Self { amps, num_wires })
    }

    /// Builds a state from explicit amplitudes, normalising them.
    pub fn from_amplitudes(amplitudes: &[Complex64]) -> Result<Self> {
        let n = amplitudes.len();
        if !n.is_power_of_two() || !(2..=MAX_DIM).contains(&n) {
            return Err(QkdError::InvalidConfig(format!(
                "amplitude vector of length {n} is not 2^k for 1 <= k <= {MAX_WIRES}"
            )));
        }
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(QkdError::InvalidConfig("zero vector".into()));
        }
        let mut amps = [ZERO; MAX_DIM];
        for (dst, src) in amps.iter_mut().zip(amplitudes) {
            *dst = src / norm;
        }
        Ok(Self {
            amps,
            num_wires: n.trailing_zeros() as usize,
        })
    }

    pub fn num_wires(&self) -> usize {
        self.num_wires
    }

    fn dim(&self) -> usize {
        1 << self.num_wires
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps[..self.dim()]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes().iter().map(|a| a.norm_sqr()).sum()
    }

    /// `<self|other>`; both registers must have the same width.
    pub fn inner(&self, other: &StateVector) -> Complex64 {
        assert_eq!(self.num_wires, other.num_wires, "register width mismatch");
        self.amplitudes()
            .iter()
            .zip(other.amplitudes())
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// Equality up to global phase.
    pub fn approx_eq_up_to_phase(&self, other: &StateVector, tol: f64) -> bool {
        self.num_wires == other.num_wires && (self.inner(other).norm() - 1.0).abs() <= tol
    }

    /// Appends a fresh `|0>` ancilla as the new highest wire and returns its index.
    pub fn append_ancilla(&mut self) -> Result<usize> {
        if self.num_wires >= MAX_WIRES {
            return Err(QkdError::RegisterFull { max: MAX_WIRES });
        }
        // The new wire is the top bit, so amplitudes with it set are all zero.
        let w = self.num_wires;
        self.num_wires += 1;
        Ok(w)
    }

    fn check_wire(&self, wire: usize) -> Result<()> {
        if wire >= self.num_wires {
            Err(QkdError::WireOutOfRange {
                wire,
                num_wires: self.num_wires,
            })
        } else {
            Ok(())
        }
    }

    /// Returns `U|self>`.
    pub fn apply(&self, gate: Gate) -> Result<StateVector> {
        let (a, b) = gate.wires();
        self.check_wire(a)?;
        if let Some(b) = b {
            self.check_wire(b)?;
            if a == b {
                return Err(QkdError::InvalidConfig(
                    "control and target coincide".into(),
                ));
            }
        }
        let mut out = *self;
        if let Some(m) = gate.single_matrix() {
            out.apply_single(a, &m);
        } else {
            let m = match gate {
                Gate::Cnot { .. } => controlled([[0.0, 1.0], [1.0, 0.0]]),
                Gate::AncillaRotation { angle, .. } => controlled(reflection(angle)),
                _ => unreachable!(),
            };
            out.apply_pair(a, b.unwrap(), &m);
        }
        Ok(out)
    }

    fn apply_single(&mut self, wire: usize, m: &Mat2) {
        let bit = 1 << wire;
        for i in 0..self.dim() {
            if i & bit == 0 {
                let (a0, a1) = (self.amps[i], self.amps[i | bit]);
                self.amps[i] = a0 * m[0][0] + a1 * m[0][1];
                self.amps[i | bit] = a0 * m[1][0] + a1 * m[1][1];
            }
        }
    }

    fn apply_pair(&mut self, hi: usize, lo: usize, m: &Mat4) {
        let (bh, bl) = (1 << hi, 1 << lo);
        for i in 0..self.dim() {
            if i & (bh | bl) == 0 {
                let idx = [i, i | bl, i | bh, i | bh | bl];
                let v = idx.map(|k| self.amps[k]);
                for (r, &k) in idx.iter().enumerate() {
                    self.amps[k] = (0..4).map(|c| v[c] * m[r][c]).sum();
                }
            }
        }
    }

    /// Probability of outcome 0 when `wire` is measured in the real basis
    /// `{(cos a, sin a), (-sin a, cos a)}`.
    pub fn prob_zero_along(&self, wire: usize, angle: f64) -> Result<f64> {
        self.check_wire(wire)?;
        let (s, c) = angle.sin_cos();
        let bit = 1 << wire;
        let p = (0..self.dim())
            .filter(|i| i & bit == 0)
            .map(|i| (self.amps[i] * c + self.amps[i | bit] * s).norm_sqr())
            .sum::<f64>();
        Ok(p.clamp(0.0, 1.0))
    }

    /// Projective measurement of `wire` in the real basis at `angle`.
    /// Returns the outcome and the normalised post-measurement state.
    pub fn measure_along<R: Rng + ?Sized>(
        &self,
        wire: usize,
        angle: f64,
        rng: &mut R,
    ) -> Result<(u8, StateVector)> {
        let p0 = self.prob_zero_along(wire, angle)?;
        let outcome = u8::from(rng.gen::<f64>() >= p0);
        let (s, c) = angle.sin_cos();
        // Outcome vector in the computational basis of the wire.
        let v = if outcome == 0 { [c, s] } else { [-s, c] };
        let p = if outcome == 0 { p0 } else { 1.0 - p0 };
        let scale = 1.0 / p.sqrt();
        let bit = 1 << wire;
        let mut out = *self;
        for i in (0..self.dim()).filter(|i| i & bit == 0) {
            let proj = (self.amps[i] * v[0] + self.amps[i | bit] * v[1]) * scale;
            out.amps[i] = proj * v[0];
            out.amps[i | bit] = proj * v[1];
        }
        Ok((outcome, out))
    }
}

/// One-wire protocol state: bit 0 maps to `|0>` / `|+>`, bit 1 to `|1>` / `|->`.
pub fn prepare(basis: Basis, bit: u8) -> StateVector {
    let h = FRAC_1_SQRT_2;
    let amps = match (basis, bit & 1) {
        (Basis::Z, 0) => [ONE, ZERO],
        (Basis::Z, _) => [ZERO, ONE],
        (Basis::X, 0) => [Complex64::new(h, 0.0), Complex64::new(h, 0.0)],
        (Basis::X, _) => [Complex64::new(h, 0.0), Complex64::new(-h, 0.0)],
    };
    let mut full = [ZERO; MAX_DIM];
    full[..2].copy_from_slice(&amps);
    StateVector {
        amps: full,
        num_wires: 1,
    }
}

pub fn apply(state: &StateVector, gate: Gate) -> Result<StateVector> {
    state.apply(gate)
}

pub fn measure<R: Rng + ?Sized>(
    state: &StateVector,
    wire: usize,
    basis: Basis,
    rng: &mut R,
) -> Result<(u8, StateVector)> {
    state.measure_along(wire, basis.angle(), rng)
}

/// Angle of the minimum-error measurement for the ancilla pair `|0>`,
/// `cos x|0> + sin x|1>`: the outcome vectors sit at `x/2 -+ pi/4`,
/// symmetric about the two states.
pub fn helstrom_angle(x: f64) -> f64 {
    0.5 * x - FRAC_PI_4
}

/// Minimum-error error probability for two pure states with overlap `cos x`.
pub fn helstrom_error(x: f64) -> f64 {
    0.5 * (1.0 - x.sin())
}

/// Minimum-error guess of which ancilla state (`0` for `|0>`, `1` for the
/// rotated one) `wire` holds.
pub fn discriminate<R: Rng + ?Sized>(
    state: &StateVector,
    wire: usize,
    x: f64,
    rng: &mut R,
) -> Result<u8> {
    Ok(discriminate_collapse(state, wire, x, rng)?.0)
}

/// As [`discriminate`], also returning the post-measurement state so that
/// further measurements on other wires stay correlated with this one.
pub fn discriminate_collapse<R: Rng + ?Sized>(
    state: &StateVector,
    wire: usize,
    x: f64,
    rng: &mut R,
) -> Result<(u8, StateVector)> {
    if !(0.0..=FRAC_PI_2).contains(&x) {
        return Err(QkdError::InvalidAngle(x));
    }
    state.measure_along(wire, helstrom_angle(x), rng)
}
