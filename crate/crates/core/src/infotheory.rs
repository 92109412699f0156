//! Closed-form information accounting: binary entropy, Eve's information
//! curves per attack, Csiszár–Körner secrecy capacities and security thresholds.
//!
//! Every curve is a function of the control-mode QBER `q1`. Attacks that act
//! on a fraction `xi` of the rounds have `q1 = xi / 4`, so their domain is
//! `[0, 1/4]`.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{QkdError, Result};
use crate::numeric::bisect;

/// Bisection tolerance on `q1`.
pub const THRESHOLD_TOL: f64 = 1e-6;
/// Capacities within this distance of zero at the domain edge count as zero.
const EDGE_TOL: f64 = 1e-12;

/// `-p log2 p - (1-p) log2 (1-p)`, with `0 log2 0 = 0`.
pub fn binary_entropy(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(QkdError::InvalidProbability(p));
    }
    Ok(h2(p))
}

fn xlog2x(p: f64) -> f64 {
    if p <= 0.0 {
        0.0
    } else {
        p * p.log2()
    }
}

fn h2(p: f64) -> f64 {
    -xlog2x(p) - xlog2x(1.0 - p)
}

/// Eve-information curve families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EveCurve {
    /// Intercept and resend against LM05.
    Ir,
    /// Non-orthogonal attack against LM05 with orthogonal backward ancillae.
    Nort,
    /// DCNOT* against LM05.
    DcnotStar,
    /// Generic individual-attack bound from the fidelity/entropy lemma.
    Generic,
    /// Intercept and resend against BB84.
    Bb84Ir,
    /// Optimal individual attack against BB84.
    Bb84Opt,
}

impl EveCurve {
    pub const ALL: [EveCurve; 6] = [
        EveCurve::Ir,
        EveCurve::Nort,
        EveCurve::DcnotStar,
        EveCurve::Generic,
        EveCurve::Bb84Ir,
        EveCurve::Bb84Opt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EveCurve::Ir => "ir",
            EveCurve::Nort => "nort",
            EveCurve::DcnotStar => "dcnot-star",
            EveCurve::Generic => "generic",
            EveCurve::Bb84Ir => "bb84-ir",
            EveCurve::Bb84Opt => "bb84-opt",
        }
    }

    /// Largest admissible `q1`.
    pub fn domain_max(self) -> f64 {
        match self {
            EveCurve::Ir | EveCurve::Nort | EveCurve::DcnotStar => 0.25,
            EveCurve::Generic | EveCurve::Bb84Ir | EveCurve::Bb84Opt => 0.5,
        }
    }

    /// BB84 has a single QBER, so its mutual information always follows `q1`.
    pub fn is_bb84(self) -> bool {
        matches!(self, EveCurve::Bb84Ir | EveCurve::Bb84Opt)
    }
}

impl fmt::Display for EveCurve {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EveCurve {
    type Err = QkdError;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.to_ascii_lowercase().replace('_', "-");
        EveCurve::ALL
            .into_iter()
            .find(|c| c.name() == key)
            .or(match key.as_str() {
                "dcnot" | "dcnot*" | "dcnotstar" => Some(EveCurve::DcnotStar),
                _ => None,
            })
            .ok_or_else(|| QkdError::InvalidConfig(format!("unknown curve '{s}'")))
    }
}

/// Relation between `Q_AB` and `q1` used to compute `I_AB`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum NoiseModel {
    /// `Q_AB = q1`.
    Identified,
    /// `Q_AB` fixed, independent of `q1`.
    Fixed(f64),
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            NoiseModel::Fixed(v) if !(0.0..=0.5).contains(&v) => Err(QkdError::InvalidConfig(
                format!("fixed Q_AB = {v} outside [0, 0.5]"),
            )),
            _ => Ok(()),
        }
    }

    pub fn q_ab(&self, q1: f64) -> f64 {
        match *self {
            NoiseModel::Identified => q1,
            NoiseModel::Fixed(v) => v,
        }
    }
}

impl FromStr for NoiseModel {
    type Err = QkdError;

    /// `identified` or `fixed:<value>`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let model = if s == "identified" {
            NoiseModel::Identified
        } else if let Some(v) = s.strip_prefix("fixed:") {
            let v: f64 = v
                .parse()
                .map_err(|_| QkdError::InvalidConfig(format!("bad fixed Q_AB '{v}'")))?;
            NoiseModel::Fixed(v)
        } else {
            return Err(QkdError::InvalidConfig(format!(
                "unknown noise model '{s}'"
            )));
        };
        model.validate()?;
        Ok(model)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Reconciliation {
    Direct,
    Reverse,
}

/// Unclamped generic bound `-(1-q) log2(1-q) - q log2(q/3)`.
pub fn generic_bound_unclamped(q1: f64) -> f64 {
    let q_term = if q1 <= 0.0 {
        0.0
    } else {
        q1 * (q1 / 3.0).log2()
    };
    -xlog2x(1.0 - q1) - q_term
}

/// `sin x` of the NORT ancilla angle that produces control-mode QBER `q1`.
fn nort_sin_x(q1: f64) -> f64 {
    let cos_x = 1.0 - 4.0 * q1;
    (1.0 - cos_x * cos_x).max(0.0).sqrt()
}

fn check_domain(curve: EveCurve, q1: f64) -> Result<()> {
    let max = curve.domain_max();
    if !(0.0..=max).contains(&q1) || q1.is_nan() {
        return Err(QkdError::OutOfDomain {
            curve: curve.name(),
            q1,
            max,
        });
    }
    Ok(())
}

/// Eve's information `(I_AE, I_BE)` in bits per symbol at control-mode QBER `q1`.
pub fn eve_curves(curve: EveCurve, q1: f64) -> Result<(f64, f64)> {
    check_domain(curve, q1)?;
    let (ae, be) = match curve {
        EveCurve::Ir => {
            let xi = 4.0 * q1;
            (xi, (1.0 - h2(0.25)) * xi)
        }
        EveCurve::Nort => {
            let s = nort_sin_x(q1);
            (1.0 - h2(0.5 * (1.0 - s)), 1.0 - h2(0.25 * (2.0 - s)))
        }
        EveCurve::DcnotStar => (4.0 * q1, 4.0 * q1),
        EveCurve::Generic => {
            let b = generic_bound_unclamped(q1).min(1.0);
            (b, b)
        }
        EveCurve::Bb84Ir => (2.0 * q1, 2.0 * q1),
        EveCurve::Bb84Opt => {
            let i = 1.0 - h2(0.5 + (q1 * (1.0 - q1)).sqrt());
            (i, i)
        }
    };
    Ok((ae.clamp(0.0, 1.0), be.clamp(0.0, 1.0)))
}

/// Mutual informations and secrecy capacities at one `q1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InfoPoint {
    pub q1: f64,
    pub i_ab: f64,
    pub i_ae: f64,
    pub i_be: f64,
    pub c_dr: f64,
    pub c_rr: f64,
}

impl InfoPoint {
    pub fn capacity(&self, rec: Reconciliation) -> f64 {
        match rec {
            Reconciliation::Direct => self.c_dr,
            Reconciliation::Reverse => self.c_rr,
        }
    }

    /// At least one secrecy capacity is positive.
    pub fn is_secure(&self) -> bool {
        self.c_dr > 0.0 || self.c_rr > 0.0
    }
}

/// Evaluates `I_AB` under `model` and Eve's curves at `q1`.
///
/// BB84 curves ignore `model`: with one QBER, `Q_AB` is `q1`.
pub fn secrecy(q1: f64, curve: EveCurve, model: NoiseModel) -> Result<InfoPoint> {
    model.validate()?;
    let (i_ae, i_be) = eve_curves(curve, q1)?;
    let q_ab = if curve.is_bb84() { q1 } else { model.q_ab(q1) };
    let i_ab = 1.0 - h2(q_ab);
    Ok(InfoPoint {
        q1,
        i_ab,
        i_ae,
        i_be,
        c_dr: i_ab - i_ae,
        c_rr: i_ab - i_be,
    })
}

/// Result of a threshold search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Threshold {
    /// The capacity crosses zero strictly inside the domain.
    Crossing(f64),
    /// The capacity stays non-negative up to the domain edge.
    WholeDomain(f64),
}

impl Threshold {
    pub fn value(&self) -> f64 {
        match *self {
            Threshold::Crossing(q) | Threshold::WholeDomain(q) => q,
        }
    }
}

/// `q1` at which the selected secrecy capacity reaches zero.
pub fn threshold(curve: EveCurve, rec: Reconciliation, model: NoiseModel) -> Result<Threshold> {
    let cap = |q: f64| secrecy(q, curve, model).map(|p| p.capacity(rec));
    let max = curve.domain_max();
    let c0 = cap(0.0)?;
    if c0 <= 0.0 {
        return Err(QkdError::InvalidConfig(format!(
            "capacity of {curve} is not positive at q1 = 0"
        )));
    }
    let c_max = cap(max)?;
    if c_max >= -EDGE_TOL {
        return Ok(Threshold::WholeDomain(max));
    }
    // The capacity functions are continuous; domain errors cannot occur inside [0, max].
    let f = |q: f64| cap(q).unwrap_or(f64::NAN);
    bisect(f, 0.0, max, THRESHOLD_TOL)
        .map(Threshold::Crossing)
        .ok_or(QkdError::NoCrossing { lo: 0.0, hi: max })
}

/// `q1` beyond which the generic bound grants Eve a full bit.
pub fn generic_full_information_point() -> f64 {
    bisect(|q| generic_bound_unclamped(q) - 1.0, 0.01, 0.5, 1e-12)
        .expect("generic bound crosses one bit inside (0.01, 0.5)")
}

/// One row of the threshold table: LM05 DR, LM05 RR, BB84. `Err` cells
/// carry the reason the entry does not exist.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdRow {
    pub attack: &'static str,
    pub cells: [std::result::Result<Threshold, &'static str>; 3],
}

/// Thresholds for every attack against LM05 (DR, RR) and BB84 under `model`.
pub fn threshold_table(model: NoiseModel) -> Result<Vec<ThresholdRow>> {
    use Reconciliation::{Direct, Reverse};
    let t = |c, r| threshold(c, r, model);
    Ok(vec![
        ThresholdRow {
            attack: "IR",
            cells: [
                Ok(t(EveCurve::Ir, Direct)?),
                Ok(t(EveCurve::Ir, Reverse)?),
                Ok(t(EveCurve::Bb84Ir, Direct)?),
            ],
        },
        ThresholdRow {
            attack: "NORT",
            cells: [
                Ok(t(EveCurve::Nort, Direct)?),
                Ok(t(EveCurve::Nort, Reverse)?),
                Ok(t(EveCurve::Bb84Opt, Direct)?),
            ],
        },
        ThresholdRow {
            attack: "DCNOT*",
            cells: [
                Ok(t(EveCurve::DcnotStar, Direct)?),
                Ok(t(EveCurve::DcnotStar, Reverse)?),
                Err("two-way attack, no BB84 analogue"),
            ],
        },
        ThresholdRow {
            attack: "Generic",
            cells: [
                Ok(t(EveCurve::Generic, Direct)?),
                Err("bound refers to Alice's encoding only"),
                Ok(t(EveCurve::Generic, Direct)?),
            ],
        },
    ])
}

pub const CURVE_CSV_HEADER: &str = "q1,I_AB,I_AE,I_BE,C_DR,C_RR";

/// Samples a curve on `[0, domain_max]` with spacing `step`. The last
/// point is the domain edge.
pub fn curve_points(curve: EveCurve, model: NoiseModel, step: f64) -> Result<Vec<InfoPoint>> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(QkdError::InvalidConfig(format!(
            "grid step {step} must be positive"
        )));
    }
    let max = curve.domain_max();
    let n = (max / step - 1e-9).ceil() as usize;
    (0..=n)
        .map(|i| secrecy(((i as f64) * step).min(max), curve, model))
        .collect()
}

pub fn write_curve_csv<W: Write>(out: &mut W, points: &[InfoPoint]) -> Result<()> {
    writeln!(out, "{CURVE_CSV_HEADER}")?;
    for p in points {
        writeln!(
            out,
            "{:.6},{:.9},{:.9},{:.9},{:.9},{:.9}",
            p.q1, p.i_ab, p.i_ae, p.i_be, p.c_dr, p.c_rr
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn entropy_values() {
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0).unwrap(), 0.0);
        assert!((binary_entropy(0.5).unwrap() - 1.0).abs() < 1e-15);
        assert!((binary_entropy(0.25).unwrap() - 0.811278).abs() < 1e-6);
        assert_eq!(binary_entropy(1.5), Err(QkdError::InvalidProbability(1.5)));
        assert!(binary_entropy(-0.01).is_err());
    }

    #[test]
    fn entropy_matches_natural_log_form() {
        // Independent route: nats divided by ln 2.
        for p in [0.01, 0.1, 0.25, 0.3, 0.77] {
            let nats = -p * f64::ln(p) - (1.0 - p) * f64::ln(1.0 - p);
            assert!((binary_entropy(p).unwrap() - nats / std::f64::consts::LN_2).abs() < 1e-14);
        }
    }

    #[test]
    fn ir_endpoint() {
        let (ae, be) = eve_curves(EveCurve::Ir, 0.25).unwrap();
        assert!((ae - 1.0).abs() < 1e-15);
        assert!((be - 0.188722).abs() < 1e-6);
    }

    #[test]
    fn dcnot_star_linear() {
        assert_eq!(eve_curves(EveCurve::DcnotStar, 0.125).unwrap(), (0.5, 0.5));
    }

    #[test]
    fn generic_saturates_near_189() {
        assert!((generic_bound_unclamped(0.189) - 1.0).abs() < 2e-3);
        assert_eq!(eve_curves(EveCurve::Generic, 0.3).unwrap(), (1.0, 1.0));
        assert!((generic_full_information_point() - 0.189).abs() < 5e-4);
    }

    #[test]
    fn nort_identity_at_ten_percent() {
        let (ae, _) = eve_curves(EveCurve::Nort, 0.10).unwrap();
        assert!((ae - (1.0 - h2(0.10))).abs() < 1e-9);
    }

    #[test]
    fn domain_errors() {
        assert!(eve_curves(EveCurve::Ir, 0.26).is_err());
        assert!(eve_curves(EveCurve::Nort, -0.01).is_err());
        assert!(eve_curves(EveCurve::Generic, 0.5).is_ok());
        assert!(eve_curves(EveCurve::Bb84Opt, 0.51).is_err());
    }

    #[test]
    fn zero_noise_point() {
        for c in EveCurve::ALL {
            let p = secrecy(0.0, c, NoiseModel::Identified).unwrap();
            assert_eq!((p.i_ab, p.i_ae, p.i_be), (1.0, 0.0, 0.0), "{c}");
            assert_eq!((p.c_dr, p.c_rr), (1.0, 1.0));
        }
    }

    #[test]
    fn dcnot_fixed_zero_model() {
        let p = secrecy(0.25, EveCurve::DcnotStar, NoiseModel::Fixed(0.0)).unwrap();
        assert_eq!(
            (p.i_ab, p.i_ae, p.i_be, p.c_dr, p.c_rr),
            (1.0, 1.0, 1.0, 0.0, 0.0)
        );
        let t = threshold(
            EveCurve::DcnotStar,
            Reconciliation::Direct,
            NoiseModel::Fixed(0.0),
        );
        assert_eq!(t.unwrap(), Threshold::WholeDomain(0.25));
    }

    #[test]
    fn conclusion_scenario() {
        let m = NoiseModel::Fixed(0.0);
        let bb = secrecy(0.15, EveCurve::Bb84Opt, m).unwrap();
        assert!(!bb.is_secure());
        let lm = secrecy(0.15, EveCurve::Nort, m).unwrap();
        assert!(lm.c_dr > 0.0);
    }

    #[test]
    fn parse_models() {
        assert_eq!(
            "identified".parse::<NoiseModel>().unwrap(),
            NoiseModel::Identified
        );
        assert_eq!(
            "fixed:0.05".parse::<NoiseModel>().unwrap(),
            NoiseModel::Fixed(0.05)
        );
        assert!("fixed:0.7".parse::<NoiseModel>().is_err());
        assert!("gaussian".parse::<NoiseModel>().is_err());
    }

    #[test]
    fn grid_covers_domain() {
        let pts = curve_points(EveCurve::Ir, NoiseModel::Identified, 0.001).unwrap();
        assert_eq!(pts.len(), 251);
        assert_eq!(pts.last().unwrap().q1, 0.25);
        let pts = curve_points(EveCurve::Generic, NoiseModel::Identified, 0.3).unwrap();
        assert_eq!(
            pts.iter().map(|p| p.q1).collect::<Vec<_>>(),
            vec![0.0, 0.3, 0.5]
        );
        assert!(curve_points(EveCurve::Ir, NoiseModel::Identified, 0.0).is_err());
    }
}
