//! Bracketed root finding for monotone functions.

const MAX_ITERS: usize = 200;

/// Finds `x` in `[lo, hi]` with `f(x) = target`, assuming `f(lo) <= target <= f(hi)`.
///
/// Halves the bracket until its width reaches floating-point resolution. The
/// function need only be continuous; for a strictly increasing `f` the root
/// is unique.
pub fn bisect_increasing<F>(f: F, mut lo: f64, mut hi: f64, target: f64) -> f64
where
    F: Fn(f64) -> f64,
{
    debug_assert!(lo <= hi);
    for _ in 0..MAX_ITERS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let residual = f(mid) - target;
        if residual == 0.0 {
            return mid;
        }
        if residual < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
