//! Scalar numerical kernels shared by the analysis modules: adaptive Simpson
//! quadrature, golden-section refinement of grid extrema and bisection.

/// Grid resolution used for every outer extremum scan.
pub const EXTREMUM_GRID: usize = 2048;
/// Abscissa tolerance of the golden-section refinement.
pub const GOLDEN_TOL: f64 = 1e-10;

const MAX_SIMPSON_DEPTH: u32 = 48;
const INV_PHI: f64 = 0.618_033_988_749_894_9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Extremum {
    Sup,
    Inf,
}

/// Adaptive Simpson integration of `f` on `[a, b]` to absolute tolerance `tol`.
///
/// Evaluation errors of `f` abort the integration.
pub fn adaptive_simpson<E>(
    f: &impl Fn(f64) -> Result<f64, E>,
    a: f64,
    b: f64,
    tol: f64,
) -> Result<f64, E> {
    if a == b {
        return Ok(0.0);
    }
    let fa = f(a)?;
    let fb = f(b)?;
    let m = 0.5 * (a + b);
    let fm = f(m)?;
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, MAX_SIMPSON_DEPTH)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<E>(
    f: &impl Fn(f64) -> Result<f64, E>,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> Result<f64, E> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm)?;
    let frm = f(rm)?;
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return Ok(left + right + delta / 15.0);
    }
    Ok(simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)?
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?)
}

/// Golden-section search for the extremum of a unimodal `f` on `[lo, hi]`.
/// Returns `(argument, value)` of the best point evaluated.
pub fn golden_section<E>(
    f: &impl Fn(f64) -> Result<f64, E>,
    mut lo: f64,
    mut hi: f64,
    mode: Extremum,
    tol: f64,
) -> Result<(f64, f64), E> {
    let better = |a: f64, b: f64| match mode {
        Extremum::Sup => a > b,
        Extremum::Inf => a < b,
    };
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    let (mut best_x, mut best_f) = if better(f2, f1) { (x2, f2) } else { (x1, f1) };
    while hi - lo > tol {
        if better(f1, f2) || f1 == f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1)?;
            if better(f1, best_f) {
                best_x = x1;
                best_f = f1;
            }
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2)?;
            if better(f2, best_f) {
                best_x = x2;
                best_f = f2;
            }
        }
    }
    Ok((best_x, best_f))
}

/// Extremum of `f` over `[lo, hi]`: a uniform grid of `EXTREMUM_GRID` cells
/// locates the best node, golden-section search refines it inside the two
/// adjacent cells. The returned value is never worse than the best grid node.
pub fn grid_extremum<E>(
    f: &impl Fn(f64) -> Result<f64, E>,
    lo: f64,
    hi: f64,
    mode: Extremum,
) -> Result<(f64, f64), E> {
    if hi <= lo {
        let v = f(lo)?;
        return Ok((lo, v));
    }
    let n = EXTREMUM_GRID;
    let step = (hi - lo) / n as f64;
    let mut best = (lo, f(lo)?);
    let better = |a: f64, b: f64| match mode {
        Extremum::Sup => a > b,
        Extremum::Inf => a < b,
    };
    let mut best_i = 0;
    for i in 1..=n {
        let x = if i == n { hi } else { lo + step * i as f64 };
        let v = f(x)?;
        if better(v, best.1) {
            best = (x, v);
            best_i = i;
        }
    }
    let a = if best_i == 0 { lo } else { lo + step * (best_i - 1) as f64 };
    let b = if best_i == n { hi } else { lo + step * (best_i + 1) as f64 };
    let refined = golden_section(f, a, b.min(hi), mode, GOLDEN_TOL)?;
    if better(refined.1, best.1) {
        best = refined;
    }
    Ok(best)
}

/// Bisection for a sign change of `f` on `[lo, hi]`. Stops once
/// `|f(mid)| < ftol` and the bracket reaches machine resolution, or `f(mid)`
/// vanishes exactly.
///
/// Returns `None` when the endpoints do not bracket a root.
pub fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, ftol: f64) -> Option<f64> {
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Some(lo);
    }
    if fhi == 0.0 {
        return Some(hi);
    }
    if flo.signum() == fhi.signum() {
        return None;
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Some(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
        if fm.abs() < ftol && hi - lo <= 4.0 * f64::EPSILON * mid.abs().max(f64::MIN_POSITIVE) {
            break;
        }
    }
    let mid = 0.5 * (lo + hi);
    Some(mid)
}
