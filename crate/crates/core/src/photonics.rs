//! Zero-QBER attacks on weak-coherent-pulse sources.
//!
//! Poisson photon statistics, beam-splitting (BS) leakage and secure gain,
//! photon-number-splitting (PNS) security margins, per-distance optimisation
//! of the mean photon number, and the BB84/LM05 crossover distance.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{QkdError, Result};
use crate::numeric::{bisect, golden_section_max};
use crate::protocol::Protocol;

/// Mean-photon-number bracket for the optimiser.
pub const MU_BRACKET: (f64, f64) = (1e-5, 2.0);
pub const MU_TOL: f64 = 1e-7;
/// Distance tolerance of the crossover search, km.
pub const CROSSOVER_TOL_KM: f64 = 0.01;

/// Photonic link parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkBudget {
    /// Mean photon number per pulse.
    pub mu: f64,
    /// Channel length, km.
    pub length_km: f64,
    /// Detector efficiency.
    pub eta_d: f64,
    /// Transmission of Bob's box.
    pub gamma_b: f64,
    /// Transmission of Alice's box.
    pub gamma_a: f64,
    /// Fiber loss coefficient in `Gamma_QC = 10^(-atten L)`.
    pub atten: f64,
}

impl Default for LinkBudget {
    fn default() -> Self {
        Self {
            mu: 0.1,
            length_km: 0.0,
            eta_d: 0.12,
            gamma_b: 0.4,
            gamma_a: 0.45,
            atten: 0.02,
        }
    }
}

impl LinkBudget {
    pub fn with_mu(self, mu: f64) -> Self {
        Self { mu, ..self }
    }

    pub fn at(self, length_km: f64) -> Self {
        Self { length_km, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(QkdError::InvalidConfig(format!(
                    "{name} = {v} outside [0, 1]"
                )))
            }
        };
        unit("eta_d", self.eta_d)?;
        unit("gamma_b", self.gamma_b)?;
        unit("gamma_a", self.gamma_a)?;
        if self.mu.is_nan() || self.mu <= 0.0 {
            return Err(QkdError::InvalidConfig(format!(
                "mu = {} must be positive",
                self.mu
            )));
        }
        if self.length_km.is_nan()
            || self.length_km < 0.0
            || self.atten.is_nan()
            || self.atten < 0.0
        {
            return Err(QkdError::InvalidConfig(
                "length and attenuation must be non-negative".into(),
            ));
        }
        Ok(())
    }

    /// Channel transmission `10^(-atten L)`.
    pub fn channel_transmission(&self) -> f64 {
        10f64.powf(-self.atten * self.length_km)
    }

    /// End-to-end transmission seen by Bob's detectors (excluding `eta_d`).
    pub fn total_transmission(&self, protocol: Protocol) -> f64 {
        let qc = self.channel_transmission();
        match protocol {
            Protocol::Bb84 => qc * self.gamma_b,
            // Two passes through the fiber and through Alice's box.
            Protocol::Lm05 => qc * qc * self.gamma_b * self.gamma_a * self.gamma_a,
        }
    }
}

/// `mu^n e^-mu / n!`.
pub fn poisson_pmf(n: u32, mu: f64) -> f64 {
    let ln_fact: f64 = (1..=n).map(|k| f64::from(k).ln()).sum();
    (f64::from(n) * mu.ln() - mu - ln_fact).exp()
}

/// `P(N >= k)`, summed term by term so small `mu` keeps full precision.
fn poisson_tail(k: u32, mu: f64) -> f64 {
    let mut term = poisson_pmf(k, mu);
    let mut sum = 0.0;
    let mut n = k;
    while term > sum * 1e-18 && n < k + 400 {
        sum += term;
        n += 1;
        term *= mu / f64::from(n);
    }
    sum
}

/// Eve's information per pulse under the beam-splitting attack.
pub fn bs_eve_info(protocol: Protocol, mu: f64) -> f64 {
    match protocol {
        Protocol::Bb84 => mu.min(1.0),
        Protocol::Lm05 => {
            let p = -(-0.5 * mu).exp_m1();
            p * p
        }
    }
}

/// Success probability of the two-beam-splitter attack on LM05 with
/// reflectivities `r1` (forward) and `r2` (backward).
pub fn bs12_success(r1: f64, r2: f64, mu: f64) -> f64 {
    (-(-r1 * mu).exp_m1()) * (-(-r2 * (1.0 - r1) * mu).exp_m1())
}

/// Probability that at least one photon of a pulse reaches Bob's detectors.
pub fn raw_gain(protocol: Protocol, budget: &LinkBudget) -> f64 {
    let t = budget.total_transmission(protocol);
    -(-budget.mu * budget.eta_d * t).exp_m1()
}

pub fn secure_gain(protocol: Protocol, budget: &LinkBudget) -> f64 {
    raw_gain(protocol, budget) * (1.0 - bs_eve_info(protocol, budget.mu))
}

/// Probability of a pulse Eve can exploit with a PNS attack: two or more
/// photons for BB84; for LM05 three or more, less the half of the
/// three-photon pulses where her measurement is inconclusive.
pub fn pns_probability(protocol: Protocol, mu: f64) -> f64 {
    match protocol {
        Protocol::Bb84 => poisson_tail(2, mu),
        Protocol::Lm05 => poisson_tail(3, mu) - 0.5 * poisson_pmf(3, mu),
    }
}

/// Security margin `G_raw - P_PNS`; positive means secure.
pub fn pns_margin(protocol: Protocol, budget: &LinkBudget) -> f64 {
    raw_gain(protocol, budget) - pns_probability(protocol, budget.mu)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Objective {
    SecureGain,
    PnsMargin,
}

impl Objective {
    pub fn name(self) -> &'static str {
        match self {
            Objective::SecureGain => "secure_gain",
            Objective::PnsMargin => "pns_margin",
        }
    }

    pub fn eval(self, protocol: Protocol, budget: &LinkBudget) -> f64 {
        match self {
            Objective::SecureGain => secure_gain(protocol, budget),
            Objective::PnsMargin => pns_margin(protocol, budget),
        }
    }
}

/// Objective value at the optimal `mu` for one distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainPoint {
    pub length_km: f64,
    pub mu_star: f64,
    pub value: f64,
}

/// Maximises `objective` over `mu` in [`MU_BRACKET`] at distance `length_km`.
pub fn optimize_mu(
    objective: Objective,
    protocol: Protocol,
    budget: &LinkBudget,
    length_km: f64,
) -> GainPoint {
    let b = budget.at(length_km);
    let (mu_star, value) = golden_section_max(
        |mu| objective.eval(protocol, &b.with_mu(mu)),
        MU_BRACKET.0,
        MU_BRACKET.1,
        MU_TOL,
    );
    GainPoint {
        length_km,
        mu_star,
        value,
    }
}

/// Distance where the optimised LM05 PNS margin drops below the BB84 one,
/// searched in `[lo, hi]`.
pub fn crossover_distance_in(budget: &LinkBudget, lo: f64, hi: f64) -> Result<f64> {
    let diff = |l: f64| {
        optimize_mu(Objective::PnsMargin, Protocol::Lm05, budget, l).value
            - optimize_mu(Objective::PnsMargin, Protocol::Bb84, budget, l).value
    };
    if !(diff(lo) > 0.0 && diff(hi) < 0.0) {
        return Err(QkdError::NoCrossing { lo, hi });
    }
    bisect(diff, lo, hi, CROSSOVER_TOL_KM).ok_or(QkdError::NoCrossing { lo, hi })
}

/// Crossover for `budget` in `[0, 100]` km.
pub fn crossover_distance_for(budget: &LinkBudget) -> Result<f64> {
    crossover_distance_in(budget, 0.0, 100.0)
}

/// Crossover with the default link budget.
pub fn crossover_distance() -> Result<f64> {
    crossover_distance_for(&LinkBudget::default())
}

pub const GAIN_CSV_HEADER: &str = "L_km,mu_star,value,log10_value,protocol,objective";

/// One CSV row per (distance, protocol). `log10_value` is empty when the value is not positive.
pub fn write_gain_csv<W: Write>(
    out: &mut W,
    objective: Objective,
    rows: &[(Protocol, GainPoint)],
) -> Result<()> {
    writeln!(out, "{GAIN_CSV_HEADER}")?;
    for (p, g) in rows {
        let log = if g.value > 0.0 {
            format!("{:.6}", g.value.log10())
        } else {
            String::new()
        };
        writeln!(
            out,
            "{:.4},{:.7},{:.9e},{},{},{}",
            g.length_km,
            g.mu_star,
            g.value,
            log,
            p,
            objective.name()
        )?;
    }
    Ok(())
}

/// Optimised curves for both protocols on the grid `lmin..=lmax` step `lstep`.
pub fn distance_sweep(
    objective: Objective,
    budget: &LinkBudget,
    lmin: f64,
    lmax: f64,
    lstep: f64,
) -> Result<Vec<(Protocol, GainPoint)>> {
    if lstep.is_nan() || lstep <= 0.0 || lmin < 0.0 || lmax < lmin {
        return Err(QkdError::InvalidConfig(format!(
            "bad distance grid {lmin}..{lmax} step {lstep}"
        )));
    }
    let n = ((lmax - lmin) / lstep + 1e-9).floor() as usize;
    let mut rows = Vec::with_capacity(2 * (n + 1));
    for i in 0..=n {
        let l = lmin + i as f64 * lstep;
        for p in [Protocol::Bb84, Protocol::Lm05] {
            rows.push((p, optimize_mu(objective, p, budget, l)));
        }
    }
    Ok(rows)
}
