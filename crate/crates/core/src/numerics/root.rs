use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct Bisection {
    pub root: f64,
    pub iterations: usize,
}

/// Bisection on a sign-changing bracket until its width is at most `tol`.
pub fn bisect<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, tol: f64) -> Result<Bisection> {
    let (mut lo, mut hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(Bisection { root: lo, iterations: 0 });
    }
    if fhi == 0.0 {
        return Ok(Bisection { root: hi, iterations: 0 });
    }
    if !(flo.signum() != fhi.signum()) || flo.is_nan() || fhi.is_nan() {
        return Err(Error::BadBracket { lo, hi });
    }
    let mut iterations = 0;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        iterations += 1;
        if fm == 0.0 {
            return Ok(Bisection { root: mid, iterations });
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(Bisection {
        root: 0.5 * (lo + hi),
        iterations,
    })
}

/// Largest SNR-plus-one `g` for which `sqrt(2 g ln g / (2g - 2 - ln g)) < 2`,
/// i.e. the root of `2 g ln g = 4 (2 g - 2 - ln g)` above `g = 1`.
pub fn relay_convexity_threshold() -> f64 {
    let h = |g: f64| 2.0 * g * g.ln() - 4.0 * (2.0 * g - 2.0 - g.ln());
    bisect(h, 2.0, 1000.0, 1e-12).expect("bracket straddles the root").root
}
