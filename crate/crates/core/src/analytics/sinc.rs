//! Infimum of `±sin(x)/x` over a half-line `[a, inf)`.
//!
//! The stationary points of `sin(x)/x` solve `tan x = x`; the k-th one lies in
//! `(k pi, k pi + pi/2)` and is located by bisection on the sign of the
//! derivative numerator `x cos x - sin x`. Between stationary points the
//! function is monotone, so the infimum is the smaller of the endpoint value and
//! the deepest admissible stationary value. Magnitudes at stationary points are
//! bounded by the envelope `1/x`, which ends the enumeration.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Orientation of the sinc function: `Plus` is `sin(x)/x`, `Minus` is `sin(x)/(-x)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SincSign {
    Plus,
    Minus,
}

impl SincSign {
    fn factor(self) -> f64 {
        match self {
            SincSign::Plus => 1.0,
            SincSign::Minus => -1.0,
        }
    }
}

/// Beyond this point the stationary points cannot be resolved in binary64; the
/// envelope value `-1/a` (a valid lower estimate) is returned instead.
const RESOLVABLE_LIMIT: f64 = 1e15;

fn stationary_point(k: f64) -> f64 {
    let mut lo = k * PI;
    let mut hi = lo + FRAC_PI_2;
    let g = |x: f64| x * x.cos() - x.sin();
    let g_lo = g(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if (g(mid) > 0.0) == (g_lo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `inf_{x >= a} sign * sin(x) / x` for `a > 0`. The result lies in `[-1/a, 1)`
/// and is `> -1`.
pub fn inf_sinc(a: f64, sign: SincSign) -> Result<f64> {
    if !(a.is_finite() && a > 0.0) {
        return Err(Error::InvalidArgument(format!("inf_sinc needs a finite a > 0, got {a}")));
    }
    if a > RESOLVABLE_LIMIT {
        return Ok(-1.0 / a);
    }
    let s = sign.factor();
    let mut best = s * a.sin() / a;
    let mut k = (a / PI).floor().max(1.0);
    loop {
        // sin has sign (-1)^k on (k pi, k pi + pi/2); only negative extrema can lower the infimum
        let parity = if k % 2.0 == 0.0 { 1.0 } else { -1.0 };
        if s * parity < 0.0 {
            let x = stationary_point(k);
            if x >= a {
                best = best.min(s * x.sin() / x);
            }
        }
        k += 1.0;
        if best < 0.0 && 1.0 / (k * PI) <= -best {
            break;
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    // tan x = x roots and sinc values from a 30-digit root finder
    const MIN_PAST_TWO_PI: f64 = -0.091_325_202_823_057_67;
    const NEG_MIN_PAST_TWO_PI: f64 = -0.128_374_553_525_899_14;

    #[test]
    fn known_values_at_two_pi() {
        let a = 2.0 * PI;
        let plus = inf_sinc(a, SincSign::Plus).unwrap();
        let minus = inf_sinc(a, SincSign::Minus).unwrap();
        assert!((plus - MIN_PAST_TWO_PI).abs() < 1e-14, "{plus}");
        assert!((minus - NEG_MIN_PAST_TWO_PI).abs() < 1e-14, "{minus}");
        let x = stationary_point(3.0);
        assert!((x - 10.904_121_659_428_9).abs() < 1e-12);
        let x = stationary_point(2.0);
        assert!((x - 7.725_251_836_937_707).abs() < 1e-12);
    }

    #[test]
    fn large_argument_within_envelope() {
        for sign in [SincSign::Plus, SincSign::Minus] {
            let v = inf_sinc(1000.0, sign).unwrap();
            assert!((-0.001..=0.0).contains(&v), "{v}");
        }
        assert_eq!(inf_sinc(1e20, SincSign::Plus).unwrap(), -1e-20);
    }

    #[test]
    fn endpoint_can_be_the_infimum() {
        // a just past the first minimum of sin x / x (x ~ 4.4934): the function rises from a,
        // so the infimum is attained at the endpoint
        let a = 4.6;
        let v = inf_sinc(a, SincSign::Plus).unwrap();
        assert_eq!(v, a.sin() / a);
    }

    #[test]
    fn small_a_uses_first_extremum() {
        // sin x / x on [0.1, inf): global minimum at the first root of tan x = x
        let v = inf_sinc(0.1, SincSign::Plus).unwrap();
        assert!((v - (-0.217_233_628_211_221_6)).abs() < 1e-14, "{v}");
        // -sin x / x on [0.1, inf): the endpoint value is close to -1
        let v = inf_sinc(0.1, SincSign::Minus).unwrap();
        assert_eq!(v, -(0.1f64.sin()) / 0.1);
        assert!(v > -1.0);
    }

    #[test]
    fn rejects_non_positive() {
        assert!(inf_sinc(0.0, SincSign::Plus).is_err());
        assert!(inf_sinc(-1.0, SincSign::Minus).is_err());
        assert!(inf_sinc(f64::NAN, SincSign::Minus).is_err());
    }
}
