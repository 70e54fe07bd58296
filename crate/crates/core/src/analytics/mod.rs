//! Closed-form Gaussian law of the Galerkin solutions and the lower bounds on
//! their weak errors.
//!
//! Per mode `n` the pair `(<e_n, X^1>, <|lambda_n|^(1/2) e_n, X^2>)` is a
//! centred bivariate Gaussian, independent across modes. With
//! `k_n = mu_n^2 / |lambda_n|`, `z = 2 omega_n T`, `h = k_n T / 2`:
//!
//! ```text
//! var1 = h (1 - sin z / z)
//! var2 = h (1 + sin z / z)
//! cov  = h (1 - cos z) / z
//! ```
//!
//! so `var1 + var2 = k_n T`. Everything else here is a sum over modes of these
//! three numbers.

mod bounds;
pub mod series;
mod sinc;
pub mod trig;

pub use bounds::{
    bound_delta, bound_exp, bound_inf, bound_laplacian, certify_bounds, exp_chain, exp_chains, exp_error_lower, series_upper,
    tail_sum_lower, tail_upper_bound, BoundCertificate, BoundSource, ExpChain,
};
pub use series::SeriesValue;
pub use sinc::{inf_sinc, SincSign};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{GalerkinLevel, ModeIndex, ModeSet, NoiseWeights, SpectralModel};
use series::{power_integral, power_tail, sum_with_remainder, CompensatedSum, MAX_EXPLICIT_TERMS};
use trig::{doubled_phase, phase_terms, PhaseTerms};

/// Which part of `X = (X^1, X^2)` a moment or test function refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Component {
    /// `X^1`, measured in `H_0` (index `i = 1`).
    Displacement,
    /// `X^2`, measured in `H_{-1/2}` (index `i = 2`).
    Velocity,
    /// The pair, measured in `H_0 x H_{-1/2}`.
    Both,
}

impl Component {
    pub fn from_index(i: u8) -> Result<Self> {
        match i {
            1 => Ok(Component::Displacement),
            2 => Ok(Component::Velocity),
            _ => Err(Error::InvalidArgument(format!("component index must be 1 or 2, got {i}"))),
        }
    }

    pub fn index(self) -> Option<u8> {
        match self {
            Component::Displacement => Some(1),
            Component::Velocity => Some(2),
            Component::Both => None,
        }
    }

    /// Orientation of `sin(x) / ((-1)^i x)`.
    pub fn sinc_sign(self) -> Option<SincSign> {
        match self {
            Component::Displacement => Some(SincSign::Minus),
            Component::Velocity => Some(SincSign::Plus),
            Component::Both => None,
        }
    }

    fn single(self, what: &str) -> Result<Self> {
        match self {
            Component::Both => Err(Error::InvalidArgument(format!("{what} needs component 1 or 2"))),
            c => Ok(c),
        }
    }
}

/// Covariance data of one mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeMoments {
    pub var1: f64,
    pub var2: f64,
    pub cov: f64,
}

impl ModeMoments {
    pub const ZERO: ModeMoments = ModeMoments { var1: 0.0, var2: 0.0, cov: 0.0 };

    fn from_phase(k: f64, horizon: f64, t: &PhaseTerms) -> Self {
        let h = 0.5 * k * horizon;
        Self { var1: h * t.one_minus_sinc, var2: h * t.one_plus_sinc, cov: h * t.one_minus_cos_over_z }
    }

    /// Clamps `cov^2 <= var1 var2` when the violation is within 16 ulps; larger
    /// violations are reported as a numeric fault.
    fn checked(mut self) -> Result<Self> {
        let det = self.var1 * self.var2;
        let c2 = self.cov * self.cov;
        if c2 > det {
            if c2 - det <= 16.0 * f64::EPSILON * det {
                self.cov = self.cov.signum() * det.sqrt();
            } else {
                return Err(Error::NumericFault(format!(
                    "mode covariance not positive semidefinite: cov^2 = {c2:e} > var1 var2 = {det:e}"
                )));
            }
        }
        Ok(self)
    }

    pub fn variance(&self, component: Component) -> f64 {
        match component {
            Component::Displacement => self.var1,
            Component::Velocity => self.var2,
            Component::Both => self.var1 + self.var2,
        }
    }

    /// Lower-triangular square root `(l11, l21, l22)` of `[[var1, cov], [cov, var2]]`.
    pub fn cholesky(&self) -> (f64, f64, f64) {
        if self.var1 <= 0.0 {
            return (0.0, 0.0, self.var2.max(0.0).sqrt());
        }
        let l11 = self.var1.sqrt();
        let l21 = self.cov / l11;
        let l22 = (self.var2 - l21 * l21).max(0.0).sqrt();
        (l11, l21, l22)
    }
}

fn phase(model: &SpectralModel, n: u64) -> PhaseTerms {
    phase_terms(doubled_phase(model.abs_eigenvalue(n), model.horizon()))
}

fn raw_moments(model: &SpectralModel, n: u64) -> ModeMoments {
    ModeMoments::from_phase(model.mode_weight(n), model.horizon(), &phase(model, n))
}

/// Per-mode covariance data; zero when the mode is outside the retained set.
pub fn mode_moments(model: &SpectralModel, n: ModeIndex, in_set: bool) -> Result<ModeMoments> {
    if !in_set {
        return Ok(ModeMoments::ZERO);
    }
    raw_moments(model, n.get()).checked()
}

/// Moments of modes `1..=level`.
pub fn level_moments(model: &SpectralModel, level: GalerkinLevel) -> Result<Vec<ModeMoments>> {
    (1..=level.get() as u64).map(|n| raw_moments(model, n).checked()).collect()
}

/// Covariance operator of `X^{I_N}` in orthonormal coordinates: mode `n` maps
/// `(v_n, w_n)` to `(var1 v_n + cov w_n, cov v_n + var2 w_n)`.
pub fn apply_covariance_operator(
    model: &SpectralModel,
    level: GalerkinLevel,
    v: &[f64],
    w: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = level.get();
    for len in [v.len(), w.len()] {
        if len != n {
            return Err(Error::LengthMismatch { expected: n, got: len });
        }
    }
    let moments = level_moments(model, level)?;
    let first = moments.iter().zip(v.iter().zip(w)).map(|(m, (a, b))| m.var1 * a + m.cov * b).collect();
    let second = moments.iter().zip(v.iter().zip(w)).map(|(m, (a, b))| m.cov * a + m.var2 * b).collect();
    Ok((first, second))
}

fn mode_term(model: &SpectralModel, n: u64, component: Component) -> f64 {
    match component {
        Component::Both => model.horizon() * model.mode_weight(n),
        c => raw_moments(model, n).variance(c),
    }
}

fn finite_sum(model: &SpectralModel, from: u64, to_inclusive: u64, component: Component) -> f64 {
    let mut acc = CompensatedSum::default();
    for n in from..=to_inclusive {
        acc.add(mode_term(model, n, component));
    }
    acc.value()
}

/// `T sum_{n >= start} k_n`.
fn total_tail(model: &SpectralModel, start: u64) -> SeriesValue {
    let t = model.horizon();
    match model.weights() {
        NoiseWeights::PowerLaw { weight_exponent } => {
            let q = model.p() * weight_exponent;
            power_tail(q, start).scale(t * model.c().powf(*weight_exponent))
        }
        NoiseWeights::Custom(w) => {
            let (c, p) = (model.c(), model.p());
            let (inf2, sup2) = (w.inf_abs() * w.inf_abs(), w.sup_abs() * w.sup_abs());
            sum_with_remainder(
                start,
                |n| t * model.mode_weight(n),
                |n| {
                    let integral = power_integral(n as f64, -p);
                    (t * inf2 * integral / c, t * sup2 * ((n as f64).powf(-p) + integral) / c)
                },
                0.0,
                MAX_EXPLICIT_TERMS,
            )
        }
    }
}

/// Envelope `A n^r` of `|k_n / (2 omega_n)|`.
fn oscillation_envelope(model: &SpectralModel) -> (f64, f64) {
    let (c, p) = (model.c(), model.p());
    match model.weights() {
        NoiseWeights::PowerLaw { weight_exponent } => {
            (c.powf(*weight_exponent) / (2.0 * c.sqrt()), p * weight_exponent - 0.5 * p)
        }
        NoiseWeights::Custom(w) => (w.sup_abs() * w.sup_abs() / (2.0 * c.powf(1.5)), -1.5 * p),
    }
}

/// `1 / |sin(a / 2)|` when the oscillating terms are `b_n sin(a n)` with `b_n`
/// decreasing, i.e. power-law weights with `p = 2`. Partial sums of `sin(a n)`
/// are then bounded by this factor, so the tail from `n` is at most `b_n` times it.
fn dirichlet_factor(model: &SpectralModel) -> Option<f64> {
    if !(model.is_power_law() && model.p() == 2.0) {
        return None;
    }
    let s = (model.horizon() * model.c().sqrt()).sin().abs();
    (s > 1e-6).then(|| 1.0 / s)
}

/// Prefix length after which the phase exceeds the Taylor cutoff.
const MAX_SMALL_PHASE_PREFIX: u64 = 1_000_000;

/// `sum_{n >= start}` of the per-mode contribution of `component`.
fn tail_sum(model: &SpectralModel, start: u64, component: Component) -> SeriesValue {
    if component == Component::Both {
        return total_tail(model, start);
    }
    // small phases: sum var_i directly, the split form would cancel
    let mut split = start;
    while split - start < MAX_SMALL_PHASE_PREFIX && doubled_phase(model.abs_eigenvalue(split), model.horizon()).hi <= 1.0
    {
        split += 1;
    }
    let prefix = if split > start { finite_sum(model, start, split - 1, component) } else { 0.0 };

    let main = total_tail(model, split).scale(0.5);
    let t = model.horizon();
    let (amp, r) = oscillation_envelope(model);
    let dirichlet = dirichlet_factor(model);
    let oscillation = sum_with_remainder(
        split,
        |n| t * model.mode_weight(n) * phase(model, n).sinc,
        |n| {
            let x = n as f64;
            let mut b = amp * (x.powf(r) + power_integral(x, r));
            if let Some(f) = dirichlet {
                b = b.min(amp * x.powf(r) * f);
            }
            (-b, b)
        },
        main.value,
        MAX_EXPLICIT_TERMS,
    );
    let sign = if component == Component::Displacement { -0.5 } else { 0.5 };
    SeriesValue::exact(prefix) + main + oscillation.scale(sign)
}

/// `E ||X^{I,i}||^2` (or of the pair) over a set of modes.
pub fn component_second_moment(model: &SpectralModel, set: ModeSet, component: Component) -> SeriesValue {
    match set {
        ModeSet::FirstN(level) => SeriesValue::exact(finite_sum(model, 1, level.get() as u64, component)),
        ModeSet::All => tail_sum(model, 1, component),
    }
}

/// `E ||X^I||^2 = T sum_{n in I} mu_n^2 / |lambda_n|`.
pub fn total_second_moment(model: &SpectralModel, set: ModeSet) -> SeriesValue {
    component_second_moment(model, set, Component::Both)
}

/// `E ||X^H||^2 - E ||X^{I_N}||^2`, the second-moment mass of the modes `n > N`.
pub fn gap_exact(model: &SpectralModel, level: GalerkinLevel, component: Component) -> SeriesValue {
    tail_sum(model, level.get() as u64 + 1, component)
}

/// [`gap_exact`] at each of `levels`, evaluating the infinite tail only once.
pub fn gap_profile(model: &SpectralModel, levels: &[GalerkinLevel], component: Component) -> Vec<SeriesValue> {
    let Some(&top) = levels.iter().max() else {
        return Vec::new();
    };
    let tail = gap_exact(model, top, component);
    levels.iter().map(|&l| tail + SeriesValue::exact(gap_between(model, l, top, component))).collect()
}

/// `E ||X^{I_M}||^2 - E ||X^{I_N}||^2` for `N <= M`, a finite sum.
pub fn gap_between(model: &SpectralModel, coarse: GalerkinLevel, fine: GalerkinLevel, component: Component) -> f64 {
    if fine <= coarse {
        return 0.0;
    }
    finite_sum(model, coarse.get() as u64 + 1, fine.get() as u64, component)
}

/// `sum_{from <= n <= to} log(1 + 2 var_i(n))`.
fn log_factor_sum(model: &SpectralModel, from: u64, to_inclusive: u64, component: Component) -> f64 {
    let mut acc = CompensatedSum::default();
    for n in from..=to_inclusive {
        acc.add((2.0 * raw_moments(model, n).variance(component)).ln_1p());
    }
    acc.value()
}

/// Modes summed explicitly before the log-factor tail is bracketed.
const LOG_TAIL_SPLIT: u64 = 4096;

/// Bracket of `sum_{n >= start} log(1 + 2 var_i(n))`, using
/// `2v - 2v^2 <= log(1 + 2v) <= 2v` on the tail.
fn log_factor_tail(model: &SpectralModel, start: u64, component: Component) -> SeriesValue {
    let split = start.max(LOG_TAIL_SPLIT);
    let head = if split > start { log_factor_sum(model, start, split - 1, component) } else { 0.0 };
    let v = tail_sum(model, split, component);
    // var_i(n) <= k_n T, and k_n T is non-increasing past `split` for both weight rules
    let vmax = match model.weights() {
        NoiseWeights::PowerLaw { .. } => model.horizon() * model.mode_weight(split),
        NoiseWeights::Custom(w) => {
            model.horizon() * w.sup_abs() * w.sup_abs() / model.abs_eigenvalue(split)
        }
    };
    let lower = 2.0 * v.lower - 2.0 * vmax * v.upper;
    let upper = 2.0 * v.upper;
    SeriesValue { value: head + 2.0 * v.value - vmax * v.value, lower: head + lower, upper: head + upper }
}

/// `E exp(-||X^{I,i}||^2) = prod_{n in I} (1 + 2 var_i(n))^(-1/2)`.
pub fn phi_expectation(model: &SpectralModel, set: ModeSet, component: Component) -> Result<SeriesValue> {
    let component = component.single("phi_expectation")?;
    Ok(match set {
        ModeSet::FirstN(level) => {
            SeriesValue::exact((-0.5 * log_factor_sum(model, 1, level.get() as u64, component)).exp())
        }
        ModeSet::All => {
            let l = log_factor_tail(model, 1, component);
            SeriesValue { value: (-0.5 * l.value).exp(), lower: (-0.5 * l.upper).exp(), upper: (-0.5 * l.lower).exp() }
        }
    })
}

/// Exact signed weak error `E phi_i(X^{I_N}) - E phi_i(X^H)` of the test
/// function `phi_i(v_1, v_2) = exp(-||v_i||^2)`.
pub fn phi_weak_error(model: &SpectralModel, level: GalerkinLevel, component: Component) -> Result<SeriesValue> {
    let component = component.single("phi_weak_error")?;
    let coarse = (-0.5 * log_factor_sum(model, 1, level.get() as u64, component)).exp();
    let tail = log_factor_tail(model, level.get() as u64 + 1, component);
    let f = |l: f64| coarse * -(-0.5 * l).exp_m1();
    Ok(SeriesValue { value: f(tail.value), lower: f(tail.lower), upper: f(tail.upper) })
}

/// `E phi_i(X^{I_N}) - E phi_i(X^{I_M})` for `N <= M`.
pub fn phi_difference(
    model: &SpectralModel,
    coarse: GalerkinLevel,
    fine: GalerkinLevel,
    component: Component,
) -> Result<f64> {
    let component = component.single("phi_difference")?;
    if fine <= coarse {
        return Ok(0.0);
    }
    let head = (-0.5 * log_factor_sum(model, 1, coarse.get() as u64, component)).exp();
    let between = log_factor_sum(model, coarse.get() as u64 + 1, fine.get() as u64, component);
    Ok(head * -(-0.5 * between).exp_m1())
}
