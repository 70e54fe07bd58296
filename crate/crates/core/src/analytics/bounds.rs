//! Analytic lower bounds on the error gaps and their certification against
//! the exact values.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{component_second_moment, gap_exact, gap_profile, inf_sinc, phi_weak_error, Component, SeriesValue};
use crate::analytics::series::power_tail;
use crate::error::{Error, Result};
use crate::model::{GalerkinLevel, ModeSet, NoiseWeights, SpectralModel};

fn decay_exponent(p: f64, delta: f64) -> Result<f64> {
    if !(p.is_finite() && p > 0.0 && delta.is_finite()) {
        return Err(Error::InvalidArgument(format!("need finite p > 0 and finite delta (p = {p}, delta = {delta})")));
    }
    let q = p * (2.0 * delta - 1.0);
    if !(delta < 0.5 - 0.5 / p && q < -1.0) {
        return Err(Error::InvalidArgument(format!(
            "delta < 1/2 - 1/(2p) violated (p = {p}, delta = {delta})"
        )));
    }
    Ok(q)
}

fn positive_level(level: GalerkinLevel) -> Result<f64> {
    match level.get() {
        0 => Err(Error::InvalidArgument("bounds are stated for N >= 1".into())),
        n => Ok(n as f64),
    }
}

/// `N^(q+1) / ((-q-1) 2^(-q-1))` with `q = p (2 delta - 1)`: a lower bound on
/// `sum_{n > N} n^q`.
pub fn tail_sum_lower(p: f64, delta: f64, level: GalerkinLevel) -> Result<f64> {
    let q = decay_exponent(p, delta)?;
    Ok(tail_lower_for_exponent(q, positive_level(level)?))
}

fn tail_lower_for_exponent(q: f64, n: f64) -> f64 {
    let a = -q - 1.0;
    n.powf(q + 1.0) / (a * 2f64.powf(a))
}

/// `q / (q + 1)`: an upper bound on `sum_{n >= 1} n^q`.
pub fn series_upper(p: f64, delta: f64) -> Result<f64> {
    let q = decay_exponent(p, delta)?;
    Ok(q / (q + 1.0))
}

fn power_law(model: &SpectralModel, what: &'static str) -> Result<(f64, f64)> {
    match (model.weight_exponent(), model.decay_exponent()) {
        (Some(e), Some(q)) => Ok((e, q)),
        _ => Err(Error::RequiresPowerLaw(what)),
    }
}

/// `T inf|mu|^2 N^(1-p) / (c (p-1) 2^(p-1))`, valid for any weights with `p > 1`.
pub fn bound_inf(model: &SpectralModel, level: GalerkinLevel) -> Result<f64> {
    let p = model.p();
    if !(p > 1.0) {
        return Err(Error::InvalidArgument(format!("bound_inf needs p > 1 (p = {p})")));
    }
    let n = positive_level(level)?;
    let inf = model.inf_abs_weight();
    Ok(model.horizon() * inf * inf * n.powf(1.0 - p) / (model.c() * (p - 1.0) * 2f64.powf(p - 1.0)))
}

/// `T c^(2 delta - 1) tail_sum_lower(p, delta, N)`.
pub fn bound_delta(model: &SpectralModel, level: GalerkinLevel) -> Result<f64> {
    let (e, q) = power_law(model, "bound_delta")?;
    Ok(model.horizon() * model.c().powf(e) * tail_lower_for_exponent(q, positive_level(level)?))
}

/// `gap_i(N) / exp(6 E||X^{H,i}||^2)`, the exact-moment form of the
/// exponential-test-function lower bound.
pub fn exp_error_lower(model: &SpectralModel, level: GalerkinLevel, component: Component) -> Result<f64> {
    if component == Component::Both {
        return Err(Error::InvalidArgument("exp_error_lower needs component 1 or 2".into()));
    }
    let gap = gap_exact(model, level, component).value;
    let full = component_second_moment(model, ModeSet::All, component).value;
    Ok(gap / (6.0 * full).exp())
}

fn sinc_factor(model: &SpectralModel, component: Component) -> Result<f64> {
    let sign = component
        .sinc_sign()
        .ok_or_else(|| Error::InvalidArgument("the sinc factor needs component 1 or 2".into()))?;
    Ok(1.0 + inf_sinc(2.0 * model.c().sqrt() * model.horizon(), sign)?)
}

/// Closed-form lower bound on `E phi_i(X^{I_N}) - E phi_i(X^H)` for power-law weights.
pub fn bound_exp(model: &SpectralModel, level: GalerkinLevel, component: Component) -> Result<f64> {
    let (e, q) = power_law(model, "bound_exp")?;
    let n = positive_level(level)?;
    let factor = sinc_factor(model, component)?;
    let tck = model.horizon() * model.c().powf(e);
    Ok(factor * tck * 2f64.powf(q) * n.powf(q + 1.0) / ((-q - 1.0) * (6.0 * q * tck / (q + 1.0)).exp()))
}

/// The exponential-test-function bound written out for `lambda_n = -pi^2 n^2`.
pub fn bound_laplacian(delta: f64, horizon: f64, level: GalerkinLevel, component: Component) -> Result<f64> {
    if !(delta.is_finite() && delta < 0.25) {
        return Err(Error::InvalidArgument(format!("delta < 1/4 violated (delta = {delta})")));
    }
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::InvalidArgument(format!("T > 0 violated (T = {horizon})")));
    }
    let n = positive_level(level)?;
    let sign = component
        .sinc_sign()
        .ok_or_else(|| Error::InvalidArgument("bound_laplacian needs component 1 or 2".into()))?;
    let factor = 1.0 + inf_sinc(2.0 * PI * horizon, sign)?;
    let e = 2.0 * delta - 1.0;
    let numerator = horizon * (4.0 * PI * PI).powf(e) * n.powf(4.0 * delta - 1.0);
    let exponent = 12.0 * e * horizon * PI.powf(4.0 * delta - 2.0) / (4.0 * delta - 1.0);
    Ok(factor * numerator / ((1.0 - 4.0 * delta) * exponent.exp()))
}

/// The three members of the component-gap inequality chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpChain {
    /// `E||X^{H,i}||^2 - E||X^{I_N,i}||^2`.
    pub gap: SeriesValue,
    /// `(1 + inf sinc) (T c^(2 delta - 1) / 2) sum_{n > N} n^q`.
    pub middle: SeriesValue,
    /// `(1 + inf sinc) T c^(2 delta - 1) 2^q N^(q+1) / (-q-1)`.
    pub lower: f64,
}

impl ExpChain {
    pub fn holds(&self) -> bool {
        self.gap.value >= self.middle.value && self.middle.value >= self.lower && self.lower > 0.0
    }
}

pub fn exp_chain(model: &SpectralModel, level: GalerkinLevel, component: Component) -> Result<ExpChain> {
    Ok(exp_chains(model, &[level], component)?[0])
}

/// [`exp_chain`] at each of `levels`, sharing one evaluation of the gap tail.
pub fn exp_chains(model: &SpectralModel, levels: &[GalerkinLevel], component: Component) -> Result<Vec<ExpChain>> {
    let (e, q) = power_law(model, "exp_chain")?;
    let factor = sinc_factor(model, component)?;
    let half_tck = 0.5 * model.horizon() * model.c().powf(e);
    let ns = levels.iter().map(|&l| positive_level(l)).collect::<Result<Vec<_>>>()?;
    let gaps = gap_profile(model, levels, component);
    Ok(levels
        .iter()
        .zip(ns)
        .zip(gaps)
        .map(|((level, n), gap)| {
            let middle = power_tail(q, level.get() as u64 + 1).scale(factor * half_tck);
            let lower = factor * 2.0 * half_tck * 2f64.powf(q) * n.powf(q + 1.0) / (-q - 1.0);
            ExpChain { gap, middle, lower }
        })
        .collect())
}

/// Integral upper bound on `E||X^H||^2 - E||X^{I_M}||^2`.
pub fn tail_upper_bound(model: &SpectralModel, level: GalerkinLevel) -> Result<f64> {
    let m = positive_level(level)?;
    let t = model.horizon();
    Ok(match model.weights() {
        NoiseWeights::PowerLaw { weight_exponent } => {
            let q = model.p() * weight_exponent;
            t * model.c().powf(*weight_exponent) * m.powf(q + 1.0) / (-q - 1.0)
        }
        NoiseWeights::Custom(w) => {
            let p = model.p();
            t * w.sup_abs() * w.sup_abs() * m.powf(1.0 - p) / (model.c() * (p - 1.0))
        }
    })
}

/// Which inequality a certificate checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundSource {
    /// Norm gap against the power-law closed form.
    Delta,
    /// Norm gap against the infimum-weight closed form.
    Inf,
    /// Component gap against the sinc-weighted tail sum.
    ChainMiddle(u8),
    /// Component gap against the closed form of the chain.
    ChainLower(u8),
    /// Exact `phi_i` weak error against the exact-moment bound.
    ExpMoment(u8),
    /// Exact `phi_i` weak error against the closed-form bound.
    ExpBound(u8),
}

/// A checked inequality `exact_value >= bound_value`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundCertificate {
    pub level: GalerkinLevel,
    pub exact_value: f64,
    pub bound_value: f64,
    pub satisfied: bool,
    pub source: BoundSource,
}

impl BoundCertificate {
    fn new(level: GalerkinLevel, exact_value: f64, bound_value: f64, source: BoundSource) -> Self {
        Self { level, exact_value, bound_value, satisfied: exact_value >= bound_value, source }
    }
}

/// Every bound applicable to `model` at level `N >= 1`, checked against exact values.
pub fn certify_bounds(model: &SpectralModel, level: GalerkinLevel) -> Result<Vec<BoundCertificate>> {
    positive_level(level)?;
    let mut out = Vec::new();
    let gap = gap_exact(model, level, Component::Both).value;
    if model.is_power_law() {
        out.push(BoundCertificate::new(level, gap, bound_delta(model, level)?, BoundSource::Delta));
    }
    if model.p() > 1.0 && model.inf_abs_weight() > 0.0 {
        out.push(BoundCertificate::new(level, gap, bound_inf(model, level)?, BoundSource::Inf));
    }
    for component in [Component::Displacement, Component::Velocity] {
        let i = component.index().unwrap_or_default();
        let weak = phi_weak_error(model, level, component)?.value;
        out.push(BoundCertificate::new(
            level,
            weak,
            exp_error_lower(model, level, component)?,
            BoundSource::ExpMoment(i),
        ));
        if model.is_power_law() {
            let chain = exp_chain(model, level, component)?;
            out.push(BoundCertificate::new(level, chain.gap.value, chain.middle.value, BoundSource::ChainMiddle(i)));
            out.push(BoundCertificate::new(level, chain.middle.value, chain.lower, BoundSource::ChainLower(i)));
            out.push(BoundCertificate::new(level, weak, bound_exp(model, level, component)?, BoundSource::ExpBound(i)));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_model, CustomWeights};

    fn laplacian() -> SpectralModel {
        build_model(PI * PI, 2.0, 0.0, 1.0).unwrap()
    }

    fn lvl(n: usize) -> GalerkinLevel {
        GalerkinLevel(n)
    }

    #[test]
    fn tail_sum_lower_examples() {
        assert!((tail_sum_lower(2.0, 0.0, lvl(1)).unwrap() - 0.5).abs() < 1e-16);
        assert!((tail_sum_lower(2.0, 0.0, lvl(10)).unwrap() - 0.05).abs() < 1e-16);
        assert!(tail_sum_lower(2.0, 0.25, lvl(1)).is_err());
        assert!(tail_sum_lower(0.0, -1.0, lvl(1)).is_err());
        assert!(tail_sum_lower(2.0, 0.0, lvl(0)).is_err());
    }

    #[test]
    fn series_upper_examples() {
        assert_eq!(series_upper(2.0, 0.0).unwrap(), 2.0);
        assert_eq!(series_upper(4.0, 0.25).unwrap(), 2.0);
        assert!(series_upper(2.0, 0.3).is_err());
    }

    #[test]
    fn laplacian_bound_values() {
        let model = laplacian();
        let expected = 1.0 / (2.0 * PI * PI);
        assert!((bound_delta(&model, lvl(1)).unwrap() - expected).abs() < 1e-16);
        assert!((bound_inf(&model, lvl(1)).unwrap() - expected).abs() < 1e-16);
        // (1 - 0.128374553525899) (1/pi^2) (1/4) exp(-12/pi^2)
        let b = bound_exp(&model, lvl(1), Component::Displacement).unwrap();
        assert!((b - 0.006_545_327_663_234_41).abs() < 1e-15, "{b}");
        // (1/12 - 1/(2 pi^2)) / exp(1/2)
        let e = exp_error_lower(&model, lvl(1), Component::Displacement).unwrap();
        assert!((e - 0.019_817_019_463_993_45).abs() < 1e-13, "{e}");
    }

    #[test]
    fn bound_inf_rejects_p_at_most_one() {
        let model = build_model(1.0, 1.0, -0.5, 1.0).unwrap();
        assert!(bound_inf(&model, lvl(1)).is_err());
    }

    #[test]
    fn power_law_only_bounds_reject_custom_weights() {
        let model = SpectralModel::with_weights(1.0, 2.0, 1.0, CustomWeights::constant(1.0).unwrap()).unwrap();
        assert_eq!(bound_delta(&model, lvl(1)), Err(Error::RequiresPowerLaw("bound_delta")));
        assert!(bound_exp(&model, lvl(1), Component::Velocity).is_err());
        assert!(bound_inf(&model, lvl(3)).is_ok());
    }

    #[test]
    fn bound_delta_is_scaled_tail_sum_lower() {
        for (c, p, delta, t) in [(2.0, 3.0, 0.1, 0.5), (0.7, 1.5, -0.4, 2.0)] {
            let model = build_model(c, p, delta, t).unwrap();
            for n in [1usize, 5, 40] {
                let lhs = bound_delta(&model, lvl(n)).unwrap();
                let rhs = t * c.powf(2.0 * delta - 1.0) * tail_sum_lower(p, delta, lvl(n)).unwrap();
                assert!((lhs - rhs).abs() <= 1e-14 * rhs);
            }
        }
    }

    #[test]
    fn laplacian_specialisation_matches() {
        for delta in [0.0, -0.3, 0.2] {
            let model = build_model(PI * PI, 2.0, delta, 1.3).unwrap();
            for n in 1..=32 {
                for comp in [Component::Displacement, Component::Velocity] {
                    let a = bound_exp(&model, lvl(n), comp).unwrap();
                    let b = bound_laplacian(delta, 1.3, lvl(n), comp).unwrap();
                    assert!(((a - b) / b).abs() < 1e-12, "delta={delta} n={n}");
                }
            }
        }
        assert!(bound_laplacian(0.25, 1.0, lvl(1), Component::Velocity).is_err());
    }

    #[test]
    fn certificates_hold_for_laplacian() {
        let model = laplacian();
        for n in 1..=16 {
            for cert in certify_bounds(&model, lvl(n)).unwrap() {
                assert!(cert.satisfied, "{cert:?}");
                assert_eq!(cert.satisfied, cert.exact_value >= cert.bound_value);
            }
        }
    }

    #[test]
    fn tail_upper_bound_dominates_gap() {
        let model = build_model(3.0, 1.7, -0.2, 0.8).unwrap();
        for m in [1usize, 8, 100] {
            let gap = gap_exact(&model, lvl(m), Component::Both);
            assert!(gap.upper <= tail_upper_bound(&model, lvl(m)).unwrap());
        }
    }
}
