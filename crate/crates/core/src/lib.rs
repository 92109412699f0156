//! Simulation and analysis toolkit for the two-way deterministic QKD protocol
//! LM05, with BB84 as the one-way baseline.
//!
//! The crate is organised bottom-up:
//!
//! * [`qsim`]: a tiny dense state-vector simulator (at most three wires).
//! * [`protocol`]: round-level state machines for LM05 and BB84, plus QBER tallies.
//! * [`attacks`]: individual eavesdropping strategies (IR, NORT, DCNOT, DCNOT*).
//! * [`infotheory`]: closed-form mutual information, secrecy capacities and thresholds.
//! * [`photonics`]: weak-coherent-pulse analysis (beam splitting, photon-number splitting).
//! * [`montecarlo`]: chunked, reproducible batch runner with analytic comparison.
//! * [`cli`]: the `qkd2way` command-line front end.

pub mod attacks;
pub mod cli;
pub mod error;
pub mod infotheory;
pub mod montecarlo;
pub mod numeric;
pub mod photonics;
pub mod protocol;
pub mod qsim;

pub use error::{QkdError, Result};
