//! One-dimensional searches used by the Legendre transforms.

/// Root of a nondecreasing `f` on `[lo, hi]` with `f(lo) ≤ 0 ≤ f(hi)`, by bisection.
pub fn bisect_increasing(mut f: impl FnMut(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Maximizer and maximum of a concave `g` on `[lo, hi]` by golden-section search.
///
/// Stops when the bracket is narrower than `x_tol`. Endpoints are compared
/// at the end so a boundary maximum is returned exactly.
pub fn golden_section_max(
    mut g: impl FnMut(f64) -> f64,
    lo: f64,
    hi: f64,
    x_tol: f64,
) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut gc = g(c);
    let mut gd = g(d);
    while b - a > x_tol {
        if gc >= gd {
            b = d;
            d = c;
            gd = gc;
            c = b - INV_PHI * (b - a);
            gc = g(c);
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + INV_PHI * (b - a);
            gd = g(d);
        }
    }
    let mut best = if gc >= gd { (c, gc) } else { (d, gd) };
    for x in [lo, hi] {
        let gx = g(x);
        if gx > best.1 {
            best = (x, gx);
        }
    }
    best
}
