use proptest::prelude::*;
use qkd2way::infotheory::{
    binary_entropy, eve_curves, secrecy, threshold, EveCurve, NoiseModel, Reconciliation, Threshold,
};

fn entropy_oracle(p: f64) -> f64 {
    if p == 0.0 || p == 1.0 {
        return 0.0;
    }
    -(p * p.log2() + (1.0 - p) * (1.0 - p).log2())
}

fn curve_strategy() -> impl Strategy<Value = EveCurve> {
    proptest::sample::select(EveCurve::ALL.to_vec())
}

proptest! {
    #[test]
    fn entropy_matches_oracle_and_is_symmetric(p in 0.0..=1.0f64) {
        let h = binary_entropy(p).unwrap();
        prop_assert!((h - entropy_oracle(p)).abs() < 1e-12);
        prop_assert!((h - binary_entropy(1.0 - p).unwrap()).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&h));
    }

    #[test]
    fn informations_stay_in_unit_interval(curve in curve_strategy(), f in 0.0..=1.0f64) {
        let q = f * curve.domain_max();
        let p = secrecy(q, curve, NoiseModel::Identified).unwrap();
        for v in [p.i_ab, p.i_ae, p.i_be] {
            prop_assert!((0.0..=1.0).contains(&v), "{:?} at {}: {}", curve, q, v);
        }
        prop_assert!((p.c_dr - (p.i_ab - p.i_ae)).abs() < 1e-15);
        prop_assert!((p.c_rr - (p.i_ab - p.i_be)).abs() < 1e-15);
    }

    #[test]
    fn curves_are_monotone(curve in curve_strategy(), a in 0.0..=1.0f64, b in 0.0..=1.0f64) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let m = curve.domain_max();
        let p = secrecy(lo * m, curve, NoiseModel::Identified).unwrap();
        let q = secrecy(hi * m, curve, NoiseModel::Identified).unwrap();
        prop_assert!(q.i_ab <= p.i_ab + 1e-12);
        prop_assert!(q.i_ae >= p.i_ae - 1e-12);
        prop_assert!(q.i_be >= p.i_be - 1e-12);
    }

    #[test]
    fn generic_bound_dominates_nort(q in 0.0..=0.1f64) {
        let (g, _) = eve_curves(EveCurve::Generic, q).unwrap();
        let (n, _) = eve_curves(EveCurve::Nort, q).unwrap();
        prop_assert!(g >= n - 1e-12, "q = {}: generic {} < nort {}", q, g, n);
    }

    #[test]
    fn out_of_domain_is_rejected(curve in curve_strategy(), over in 1e-6..1.0f64) {
        prop_assert!(secrecy(curve.domain_max() + over, curve, NoiseModel::Identified).is_err());
        prop_assert!(secrecy(-over, curve, NoiseModel::Identified).is_err());
    }
}

#[test]
fn capacity_sign_flips_at_crossing_thresholds() {
    let m = NoiseModel::Identified;
    for curve in EveCurve::ALL {
        for rec in [Reconciliation::Direct, Reconciliation::Reverse] {
            let Ok(Threshold::Crossing(t)) = threshold(curve, rec, m) else {
                continue;
            };
            let below = secrecy(t - 1e-4, curve, m).unwrap().capacity(rec);
            let above = secrecy(t + 1e-4, curve, m).unwrap().capacity(rec);
            assert!(below > 0.0 && above < 0.0, "{curve:?} {rec:?} at {t}");
        }
    }
}

#[test]
fn fixed_noise_model_lowers_thresholds_as_noise_grows() {
    let mut prev = f64::INFINITY;
    for v in [0.0, 0.02, 0.05, 0.08] {
        let t = threshold(EveCurve::Ir, Reconciliation::Direct, NoiseModel::Fixed(v))
            .unwrap()
            .value();
        assert!(t <= prev + 1e-9, "noise {v}: {t} > {prev}");
        prev = t;
    }
}
