use crate::error::{Error, Result};

/// Principal branch `W0(x)` for `x >= 0`, by Halley iteration on `w e^w = x`.
pub fn lambert_w0(x: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::Domain(format!("lambert_w0 needs x >= 0, got {x}")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x.is_infinite() {
        return Ok(f64::INFINITY);
    }
    let mut w: f64 = if x < 3.0 {
        x.ln_1p() * (1.0 - 0.25 * x.ln_1p() / (1.0 + x.ln_1p()))
    } else {
        let l1 = x.ln();
        let l2 = l1.ln();
        l1 - l2 + l2 / l1
    };
    for _ in 0..64 {
        let ew = w.exp();
        let f = w * ew - x;
        let wp1 = w + 1.0;
        let step = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1));
        let next = w - step;
        if (next - w).abs() <= 4.0 * f64::EPSILON * next.abs().max(f64::MIN_POSITIVE) {
            return Ok(next);
        }
        w = next;
    }
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn newton_oracle(x: f64) -> f64 {
        let mut w: f64 = 0.5;
        for _ in 0..100 {
            w -= (w * w.exp() - x) / ((w + 1.0) * w.exp());
        }
        w
    }

    #[test]
    fn known_values() {
        assert_eq!(lambert_w0(0.0).unwrap(), 0.0);
        assert!((lambert_w0(std::f64::consts::E).unwrap() - 1.0).abs() < 1e-15);
        let w1 = lambert_w0(1.0).unwrap();
        assert!((w1 - newton_oracle(1.0)).abs() < 1e-15);
        assert!((w1 - 0.567_143_290_409_783_8).abs() < 1e-15);
        assert!(lambert_w0(-0.1).is_err());
    }

    #[test]
    fn self_consistency_on_log_grid() {
        for k in 0..=600 {
            let x = 10f64.powf(-6.0 + 12.0 * k as f64 / 600.0);
            let w = lambert_w0(x).unwrap();
            assert!((w * w.exp() - x).abs() <= 1e-10 * x.max(1.0), "x={x}");
        }
    }
}
