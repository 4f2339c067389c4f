//! Golden-section line search.

/// Golden ratio conjugate, the bracket shrink factor per step.
const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Maximises `f` on `[lo, hi]` by golden-section search and returns the
/// best point evaluated together with its value.
///
/// The bracket shrinks until its width is at most `tol`. Both interval
/// endpoints are evaluated as well, so a maximum sitting exactly on the
/// boundary is returned exactly rather than `tol` short of it; acquisition
/// surfaces peak on the box boundary all the time. For functions that are
/// not unimodal along the segment this is a local search; callers restart
/// it from multiple points.
pub fn golden_section_max(f: impl Fn(f64) -> f64, lo: f64, hi: f64, tol: f64) -> (f64, f64) {
    assert!(
        lo.is_finite() && hi.is_finite() && lo <= hi,
        "invalid bracket [{lo}, {hi}]"
    );
    assert!(tol > 0.0, "tolerance must be positive, got {tol}");

    let mut best = (lo, f(lo));
    let hi_value = f(hi);
    if hi_value > best.1 {
        best = (hi, hi_value);
    }
    if hi - lo <= tol {
        return best;
    }

    let mut a = lo;
    let mut b = hi;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);

    // The bracket shrinks by INV_PHI per iteration, so this terminates in
    // about log(width / tol) / log(1 / INV_PHI) steps; the explicit cap
    // only guards against a degenerate tol underflowing the loop.
    for _ in 0..500 {
        if fc > best.1 {
            best = (c, fc);
        }
        if fd > best.1 {
            best = (d, fd);
        }
        if b - a <= tol {
            break;
        }
        if fc >= fd {
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
    best
}
