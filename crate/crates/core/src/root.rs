//! Bracketed root search for monotone nonincreasing functions that may jump.

use crate::error::Result;

/// One evaluated point: abscissa, residual and the payload produced with it.
#[derive(Debug, Clone)]
pub(crate) struct Sample<T> {
    pub x: f64,
    pub f: f64,
    pub data: T,
}

#[derive(Debug, Clone)]
pub(crate) enum RootOutcome<T> {
    /// Residual within tolerance.
    Converged(Sample<T>),
    /// Bracket collapsed onto a discontinuity: `lo.f > 0 > hi.f`.
    Jump { lo: Sample<T>, hi: Sample<T> },
}

/// Finds a zero of a nonincreasing `eval` on `[lo.x, hi.x]` given
/// `lo.f >= 0 >= hi.f`, by regula falsi (Illinois variant) with a bisection
/// step every third iteration or whenever the secant leaves the bracket.
///
/// Stops when `|f| <= f_tol` or the bracket is narrower than `x_tol`.
pub(crate) fn find_root<T, F>(
    mut lo: Sample<T>,
    mut hi: Sample<T>,
    f_tol: f64,
    x_tol: f64,
    max_iter: usize,
    mut eval: F,
) -> Result<RootOutcome<T>>
where
    F: FnMut(f64) -> Result<(f64, T)>,
{
    if lo.f.abs() <= f_tol {
        return Ok(RootOutcome::Converged(lo));
    }
    if hi.f.abs() <= f_tol {
        return Ok(RootOutcome::Converged(hi));
    }
    debug_assert!(lo.f > 0.0 && hi.f < 0.0);
    let (mut flo, mut fhi) = (lo.f, hi.f);
    let mut last_side = 0i8;
    for iter in 0..max_iter {
        if hi.x - lo.x <= x_tol {
            break;
        }
        let secant = (lo.x * fhi - hi.x * flo) / (fhi - flo);
        let mid = 0.5 * (lo.x + hi.x);
        // every third step, or when the secant stalls, fall back to bisection
        let bisect = iter % 3 == 2 || !(secant > lo.x && secant < hi.x);
        let x = if bisect { mid } else { secant };
        if x <= lo.x || x >= hi.x {
            break;
        }
        let (f, data) = eval(x)?;
        let s = Sample { x, f, data };
        if f.abs() <= f_tol {
            return Ok(RootOutcome::Converged(s));
        }
        if f > 0.0 {
            lo = s;
            flo = f;
            if last_side == 1 {
                fhi *= 0.5;
            }
            last_side = 1;
        } else {
            hi = s;
            fhi = f;
            if last_side == -1 {
                flo *= 0.5;
            }
            last_side = -1;
        }
    }
    Ok(RootOutcome::Jump { lo, hi })
}
