//! Enclosures of the infinite series behind the exact moments.
//!
//! Every infinite sum is returned as a [`SeriesValue`]: a point value together
//! with a rigorous bracket `[lower, upper]`. Power-law sums `sum n^q` use an
//! Euler-Maclaurin remainder (the summand is completely monotone, so the
//! remainder after the last Bernoulli term is bounded by the first omitted
//! term) intersected with the integral-comparison bracket. Other tails are
//! summed explicitly until a caller-supplied remainder bracket is tight enough.

use serde::{Deserialize, Serialize};

/// Absolute floor of the series tolerance.
pub const ABS_TOL: f64 = 1e-12;
/// Relative series tolerance.
pub const REL_TOL: f64 = 1e-10;
/// Terms summed explicitly before an oscillatory or custom tail gives up on the tolerance.
pub const MAX_EXPLICIT_TERMS: u64 = 10_000_000;

pub fn tolerance(value: f64) -> f64 {
    ABS_TOL.max(REL_TOL * value.abs())
}

/// A series value with a bracket known to contain the exact sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesValue {
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
}

impl SeriesValue {
    pub fn exact(value: f64) -> Self {
        Self { value, lower: value, upper: value }
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn scale(self, k: f64) -> Self {
        let (a, b) = (self.lower * k, self.upper * k);
        Self { value: self.value * k, lower: a.min(b), upper: a.max(b) }
    }

    /// Widens the bracket by a relative rounding allowance.
    pub(crate) fn with_rounding(self, terms: u64) -> Self {
        let slack = (terms as f64 + 4.0) * f64::EPSILON * self.value.abs();
        Self { value: self.value, lower: self.lower - slack, upper: self.upper + slack }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }
}

impl std::ops::Add for SeriesValue {
    type Output = Self;

    fn add(self, other: Self) -> Self {
        Self {
            value: self.value + other.value,
            lower: self.lower + other.lower,
            upper: self.upper + other.upper,
        }
    }
}

/// Compensated (Neumaier) summation.
#[derive(Debug, Default, Clone, Copy)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// `int_a^inf x^q dx` for `q < -1`.
pub fn power_integral(a: f64, q: f64) -> f64 {
    a.powf(q + 1.0) / (-q - 1.0)
}

/// Bernoulli numbers `B_2 .. B_10` divided by the matching factorials.
const BERNOULLI_OVER_FACTORIAL: [f64; 5] = [
    1.0 / 6.0 / 2.0,
    -1.0 / 30.0 / 24.0,
    1.0 / 42.0 / 720.0,
    -1.0 / 30.0 / 40_320.0,
    5.0 / 66.0 / 3_628_800.0,
];

/// `m`-th derivative of `x^q` at `a`.
fn power_derivative(a: f64, q: f64, m: u32) -> f64 {
    let mut coeff = 1.0;
    for j in 0..m {
        coeff *= q - j as f64;
    }
    coeff * a.powf(q - m as f64)
}

/// `sum_{n >= start} n^q` for `q < -1`, `start >= 1`.
pub fn power_tail(q: f64, start: u64) -> SeriesValue {
    debug_assert!(q < -1.0 && start >= 1);
    // Euler-Maclaurin needs |q| small against the expansion point
    let em_start = start.max((4.0 * q.abs() + 32.0).ceil() as u64);
    let mut partial = CompensatedSum::default();
    let mut n = start;
    while n < em_start {
        let term = (n as f64).powf(q);
        partial.add(term);
        n += 1;
        if term <= 1e-20 * partial.value() {
            // the rest is negligible; bracket it by integral comparison
            let next = (n as f64).powf(q);
            let lo = power_integral(n as f64, q);
            let hi = next + lo;
            let s = partial.value();
            return SeriesValue { value: s + 0.5 * (lo + hi), lower: s + lo, upper: s + hi }
                .with_rounding(n - start);
        }
    }
    let a = em_start as f64;
    let f_a = a.powf(q);
    let integral = power_integral(a, q);
    let mut remainder = integral + 0.5 * f_a;
    for (k, coeff) in BERNOULLI_OVER_FACTORIAL.iter().take(4).enumerate() {
        remainder -= coeff * power_derivative(a, q, 2 * k as u32 + 1);
    }
    let next = (BERNOULLI_OVER_FACTORIAL[4] * power_derivative(a, q, 9)).abs();
    let lower = (remainder - next).max(integral);
    let upper = (remainder + next).min(integral + f_a);
    let s = partial.value();
    SeriesValue { value: s + remainder, lower: s + lower, upper: s + upper }.with_rounding(n - start + 8)
}

/// Sums `term(n)` for `n >= start` explicitly until the bracket `remainder(n)`
/// on `sum_{m >= n} term(m)` is narrower than `tolerance(max(|sum|, scale))`,
/// or the term budget runs out (the bracket is then reported as is).
pub fn sum_with_remainder<T, R>(start: u64, term: T, remainder: R, scale: f64, max_terms: u64) -> SeriesValue
where
    T: Fn(u64) -> f64,
    R: Fn(u64) -> (f64, f64),
{
    let mut acc = CompensatedSum::default();
    let mut n = start;
    let mut check_every = 16u64;
    loop {
        let (lo, hi) = remainder(n);
        let s = acc.value();
        let mid = 0.5 * (lo + hi);
        if hi - lo <= tolerance((s + mid).abs().max(scale)) || n - start >= max_terms {
            return SeriesValue { value: s + mid, lower: s + lo, upper: s + hi }.with_rounding(n - start);
        }
        for _ in 0..check_every {
            acc.add(term(n));
            n += 1;
        }
        check_every = (check_every * 2).min(4096);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn basel_series() {
        let s = power_tail(-2.0, 1);
        assert!((s.value - PI * PI / 6.0).abs() < 1e-15, "{s:?}");
        assert!(s.contains(PI * PI / 6.0));
        assert!(s.width() < 1e-13);
    }

    #[test]
    fn zeta_three_and_tail() {
        let zeta3 = 1.202_056_903_159_594_3;
        let s = power_tail(-3.0, 1);
        assert!((s.value - zeta3).abs() < 1e-15);
        let tail = power_tail(-3.0, 11);
        let head: f64 = (1..=10).map(|n| (n as f64).powi(-3)).sum();
        assert!((tail.value - (zeta3 - head)).abs() < 1e-15);
    }

    #[test]
    fn slowly_convergent_exponent() {
        // zeta(1.1) = 10.584448464950809826...
        let s = power_tail(-1.1, 1);
        assert!((s.value - 10.584_448_464_950_81).abs() < 1e-11, "{s:?}");
        assert!(s.width() < 1e-9);
    }

    #[test]
    fn steep_exponent_terminates_early() {
        let s = power_tail(-80.0, 1);
        assert!((s.value - 1.0).abs() < 1e-15);
        let s = power_tail(-80.0, 3);
        assert!((s.value - 3f64.powf(-80.0)).abs() < 1e-40);
    }

    #[test]
    fn explicit_sum_matches_power_tail() {
        let q = -2.5;
        let explicit = sum_with_remainder(
            5,
            |n| (n as f64).powf(q),
            |n| {
                let lo = power_integral(n as f64, q);
                (lo, lo + (n as f64).powf(q))
            },
            0.0,
            MAX_EXPLICIT_TERMS,
        );
        let em = power_tail(q, 5);
        assert!((explicit.value - em.value).abs() <= explicit.width() + em.width());
        assert!(explicit.width() <= tolerance(explicit.value) * 1.01);
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut s = CompensatedSum::default();
        s.add(1.0);
        for _ in 0..1000 {
            s.add(1e-17);
        }
        assert!((s.value() - (1.0 + 1e-14)).abs() < 1e-16);
    }
}
