//! Scalar root finding and one-dimensional maximisation.

/// Maximum bisection steps; 200 halvings exhaust f64 resolution on any bracket we use.
pub const MAX_BISECTION_ITERS: usize = 200;

/// Finds a root of `f` in `[lo, hi]` by bisection.
///
/// Requires `f(lo)` and `f(hi)` to have opposite signs (or one of them to be
/// exactly zero). Returns `None` when the bracket does not straddle a root.
/// Stops once the bracket is narrower than `tol`.
pub fn bisect<F>(mut f: F, mut lo: f64, mut hi: f64, tol: f64) -> Option<f64>
where
    F: FnMut(f64) -> f64,
{
    let mut f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo == 0.0 {
        return Some(lo);
    }
    if f_hi == 0.0 {
        return Some(hi);
    }
    if f_lo.signum() == f_hi.signum() || f_lo.is_nan() || f_hi.is_nan() {
        return None;
    }
    for _ in 0..MAX_BISECTION_ITERS {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= tol {
            return Some(mid);
        }
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return Some(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section search for the maximum of a unimodal `f` on `[lo, hi]`.
///
/// Returns `(argmax, max)`. The bracket endpoints are also compared so a
/// monotone objective reports its boundary maximum.
pub fn golden_section_max<F>(mut f: F, lo: f64, hi: f64, tol: f64) -> (f64, f64)
where
    F: FnMut(f64) -> f64,
{
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    let mid = 0.5 * (a + b);
    let mut best = (mid, f(mid));
    for x in [lo, hi] {
        let fx = f(x);
        if fx > best.1 {
            best = (x, fx);
        }
    }
    best
}
