//! Phase terms `sin z / z` and `(1 - cos z) / z` for `z = 2 omega T`.
//!
//! `z` is carried as a double-double (the rounding residue of the square root
//! and of the product is kept) and reduced modulo `2 pi` against a three-part
//! constant, so the per-mode moments stay accurate for large frequencies.
//! Small phases use the Taylor series of `1 - sin z / z`.

use std::f64::consts::PI;

const TWO_PI_HI: f64 = std::f64::consts::TAU;
const TWO_PI_MID: f64 = 2.4492935982947064e-16;
const TWO_PI_LO: f64 = -5.989539619436679e-33;

/// Below this phase `1 - sinc` is taken from its Taylor series.
const SERIES_CUTOFF: f64 = 1.0;

/// Unevaluated sum `hi + lo` with `|lo| <= ulp(hi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoubleDouble {
    pub hi: f64,
    pub lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> DoubleDouble {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    DoubleDouble { hi: s, lo: err }
}

#[inline]
fn two_prod(a: f64, b: f64) -> DoubleDouble {
    let p = a * b;
    DoubleDouble { hi: p, lo: a.mul_add(b, -p) }
}

/// `2 T sqrt(abs_lambda)` as a double-double.
pub fn doubled_phase(abs_lambda: f64, horizon: f64) -> DoubleDouble {
    let w = abs_lambda.sqrt();
    if w == 0.0 || !w.is_finite() {
        return DoubleDouble { hi: 2.0 * w * horizon, lo: 0.0 };
    }
    // abs_lambda = w^2 + r exactly up to the fma rounding, sqrt residue r / (2w)
    let w_lo = (-w).mul_add(w, abs_lambda) / (2.0 * w);
    let prod = two_prod(2.0 * w, horizon);
    two_sum(prod.hi, prod.lo + 2.0 * w_lo * horizon)
}

/// Reduces `z` to `(-pi, pi]` modulo `2 pi`.
pub fn reduce_two_pi(z: DoubleDouble) -> DoubleDouble {
    if z.hi.abs() <= PI {
        return z;
    }
    let k = (z.hi / TWO_PI_HI).round();
    let p = two_prod(k, TWO_PI_HI);
    // Sterbenz: z.hi and p agree to within a factor of two for k != 0
    let r0 = z.hi - p.hi;
    let tail = z.lo - p.lo - k * TWO_PI_MID - k * TWO_PI_LO;
    two_sum(r0, tail)
}

/// `(sin z, cos z)` of a double-double argument.
pub fn sin_cos(z: DoubleDouble) -> (f64, f64) {
    if z.hi.abs() > 2f64.powi(50) {
        return z.hi.sin_cos();
    }
    let r = reduce_two_pi(z);
    let (s, c) = r.hi.sin_cos();
    (s + r.lo * c, c - r.lo * s)
}

/// `1 - sin z / z` by its alternating Taylor series; accurate for `|z| <= 1`.
fn one_minus_sinc_series(z: f64) -> f64 {
    // coefficients (-1)^(k+1) / (2k+1)!, k = 1..8
    const C: [f64; 8] = [
        1.0 / 6.0,
        -1.0 / 120.0,
        1.0 / 5040.0,
        -1.0 / 362_880.0,
        1.0 / 39_916_800.0,
        -1.0 / 6_227_020_800.0,
        1.0 / 1_307_674_368_000.0,
        -1.0 / 355_687_428_096_000.0,
    ];
    let z2 = z * z;
    let mut acc = 0.0;
    for &c in C.iter().rev() {
        acc = acc * z2 + c;
    }
    acc * z2
}

/// The three factors the per-mode moments are built from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseTerms {
    /// `sin z / z`
    pub sinc: f64,
    /// `1 - sin z / z`
    pub one_minus_sinc: f64,
    /// `1 + sin z / z`
    pub one_plus_sinc: f64,
    /// `(1 - cos z) / z`
    pub one_minus_cos_over_z: f64,
}

pub fn phase_terms(z: DoubleDouble) -> PhaseTerms {
    let zh = z.hi;
    if zh == 0.0 {
        return PhaseTerms { sinc: 1.0, one_minus_sinc: 0.0, one_plus_sinc: 2.0, one_minus_cos_over_z: 0.0 };
    }
    if zh.abs() <= SERIES_CUTOFF {
        let oms = one_minus_sinc_series(zh);
        let half = (0.5 * zh).sin();
        return PhaseTerms {
            sinc: 1.0 - oms,
            one_minus_sinc: oms,
            one_plus_sinc: 2.0 - oms,
            one_minus_cos_over_z: 2.0 * half * half / zh,
        };
    }
    let (s, _) = sin_cos(z);
    let sinc = s / zh;
    // 1 - cos z = 2 sin^2(z/2), with z/2 halved exactly
    let (half, _) = sin_cos(DoubleDouble { hi: 0.5 * z.hi, lo: 0.5 * z.lo });
    PhaseTerms {
        sinc,
        one_minus_sinc: 1.0 - sinc,
        one_plus_sinc: 1.0 + sinc,
        one_minus_cos_over_z: 2.0 * half * half / zh,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dd(x: f64) -> DoubleDouble {
        DoubleDouble { hi: x, lo: 0.0 }
    }

    #[test]
    fn series_matches_direct_form_in_the_overlap() {
        for &z in &[0.3, 0.7, 1.0] {
            let direct = 1.0 - f64::sin(z) / z;
            assert!((one_minus_sinc_series(z) - direct).abs() < 1e-15, "z = {z}");
        }
    }

    #[test]
    fn series_is_accurate_for_tiny_phase() {
        let z: f64 = 1e-6;
        // leading terms z^2/6 - z^4/120
        let expected = z * z / 6.0 - z.powi(4) / 120.0;
        let got = one_minus_sinc_series(z);
        assert!(((got - expected) / expected).abs() < 1e-15);
        let t = phase_terms(dd(z));
        assert!(((t.one_minus_cos_over_z - z / 2.0) / (z / 2.0)).abs() < 1e-12);
    }

    #[test]
    fn reduction_of_exact_multiples_of_two_pi() {
        // hi + lo represents 2 pi m to ~1e-32 relative, so sin must vanish to rounding
        for m in [1.0, 7.0, 1e3, 123_457.0, 1e6, 3e7] {
            let p = two_prod(TWO_PI_HI, m);
            let z = two_sum(p.hi, p.lo + TWO_PI_MID * m);
            let (s, c) = sin_cos(z);
            assert!(s.abs() < 1e-15, "m = {m}: sin = {s}");
            assert!((c - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn agrees_with_libm_for_moderate_arguments() {
        let mut x = 3.3;
        while x < 1e4 {
            let (s, c) = sin_cos(dd(x));
            assert!((s - x.sin()).abs() < 4e-16 * x.max(1.0), "x = {x}");
            assert!((c - x.cos()).abs() < 4e-16 * x.max(1.0), "x = {x}");
            x *= 1.37;
        }
    }

    #[test]
    fn doubled_phase_keeps_sqrt_residue() {
        let lambda = std::f64::consts::PI * std::f64::consts::PI;
        let z = doubled_phase(lambda, 1.0);
        assert!((z.hi - 2.0 * std::f64::consts::PI).abs() < 1e-15);
        let big = doubled_phase(4e16, 1.0);
        assert_eq!(big.hi, 4e8);
        assert_eq!(big.lo, 0.0);
    }

    #[test]
    fn phase_terms_consistent() {
        for &z in &[1.5, 2.0, 10.0, 1e5, 3.7e8] {
            let t = phase_terms(dd(z));
            assert!((t.one_minus_sinc + t.one_plus_sinc - 2.0).abs() < 1e-15);
            assert!(t.one_minus_cos_over_z >= 0.0);
            assert!((t.one_minus_cos_over_z - (1.0 - z.cos()) / z).abs() < 1e-14);
        }
    }
}
