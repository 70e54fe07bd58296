//! Log-log rate fits and the two-sided rate sandwich
//! `c_low |lambda_N|^(-eta) <= err(N) <= C_high |lambda_N|^(eps - eta)`.

use serde::{Deserialize, Serialize};

use crate::analytics::{gap_exact, Component};
use crate::error::{Error, Result};
use crate::model::{GalerkinLevel, SpectralModel};
use crate::montecarlo::WeakErrorReport;

/// Least-squares line through `(ln x, ln y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn fit_loglog(xs: &[f64], ys: &[f64]) -> Result<LogLogFit> {
    if xs.len() != ys.len() {
        return Err(Error::LengthMismatch { expected: xs.len(), got: ys.len() });
    }
    if xs.len() < 2 {
        return Err(Error::InvalidArgument(format!("a fit needs at least 2 points (got {})", xs.len())));
    }
    if let Some(v) = xs.iter().chain(ys).find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(Error::InvalidArgument(format!("log-log fit needs finite positive values (got {v})")));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ly.iter().map(|y| (y - my) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("log-log fit needs at least two distinct x values".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = lx.iter().zip(&ly).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let r_squared = if syy == 0.0 { 1.0 } else { (1.0 - ss_res / syy).clamp(0.0, 1.0) };
    Ok(LogLogFit { slope, intercept, r_squared })
}

/// An error value known to within `+- tolerance`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorPoint {
    pub value: f64,
    pub tolerance: f64,
}

impl ErrorPoint {
    pub fn exact(value: f64) -> Self {
        Self { value, tolerance: 0.0 }
    }

    /// Monte Carlo point with tolerance `3 SE + truncation bias bound`.
    pub fn from_report(report: &WeakErrorReport) -> Self {
        Self {
            value: report.estimate.mean,
            tolerance: 3.0 * report.estimate.std_error + report.truncation_bias_bound,
        }
    }
}

/// Exact norm gaps at the given levels; the tolerance is the series bracket width.
pub fn exact_gap_points(model: &SpectralModel, levels: &[GalerkinLevel]) -> Vec<ErrorPoint> {
    levels
        .iter()
        .map(|&n| {
            let g = gap_exact(model, n, Component::Both);
            ErrorPoint { value: g.value, tolerance: (g.upper - g.value).max(g.value - g.lower) }
        })
        .collect()
}

/// `N_0 2^j` for `j < count`.
pub fn dyadic_levels(first: usize, count: u32) -> Vec<GalerkinLevel> {
    (0..count).map(|j| GalerkinLevel(first << j)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sandwich {
    pub c_low: f64,
    pub c_high: f64,
    pub epsilon: f64,
    /// Both inequalities hold at every level and `c_low > 0`.
    pub holds: bool,
}

/// Sandwich constants over a contiguous part of the level range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RangeConstants {
    pub first_level: GalerkinLevel,
    pub last_level: GalerkinLevel,
    pub c_low: f64,
    pub c_high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub levels: Vec<GalerkinLevel>,
    /// `|lambda_N| = c N^p`.
    pub lambda_values: Vec<f64>,
    pub errors: Vec<f64>,
    pub tolerances: Vec<f64>,
    /// Fit of the errors against `|lambda_N|`; absent for a single level.
    pub lambda_fit: Option<LogLogFit>,
    /// Fit of the errors against `N`.
    pub level_fit: Option<LogLogFit>,
    pub eta_expected: f64,
    pub sandwich: Sandwich,
    /// Sandwich constants over the lower and the upper half of the levels.
    pub halves: Vec<RangeConstants>,
    /// `max / min` of `err(N) |lambda_N|^eta`.
    pub weighted_spread: f64,
}

/// Relative mismatch accepted between the supplied `eta` and the model's own.
const ETA_TOLERANCE: f64 = 1e-9;

fn range_constants(lambdas: &[f64], points: &[ErrorPoint], eta: f64, epsilon: f64) -> (f64, f64) {
    let c_low = lambdas.iter().zip(points).map(|(l, e)| (e.value - e.tolerance) * l.powf(eta)).fold(f64::INFINITY, f64::min);
    let c_high = lambdas
        .iter()
        .zip(points)
        .map(|(l, e)| (e.value + e.tolerance) * l.powf(eta - epsilon))
        .fold(f64::NEG_INFINITY, f64::max);
    (c_low, c_high)
}

pub fn certify_sandwich(
    model: &SpectralModel,
    eta: f64,
    levels: &[GalerkinLevel],
    errors: &[ErrorPoint],
    epsilon: f64,
) -> Result<RateReport> {
    let model_eta = model.eta().ok_or(Error::RequiresPowerLaw("certify_sandwich"))?;
    if !((eta - model_eta).abs() <= ETA_TOLERANCE * eta.abs().max(1.0)) {
        return Err(Error::InvalidArgument(format!("eta = {eta} is inconsistent with the model (eta = {model_eta})")));
    }
    if !(epsilon.is_finite() && epsilon >= 0.0) {
        return Err(Error::InvalidArgument(format!("epsilon must be finite and >= 0 (got {epsilon})")));
    }
    if levels.is_empty() {
        return Err(Error::InvalidArgument("no levels given".into()));
    }
    if errors.len() != levels.len() {
        return Err(Error::LengthMismatch { expected: levels.len(), got: errors.len() });
    }
    if levels[0].get() == 0 || levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("levels must be positive and strictly increasing".into()));
    }
    if let Some(e) = errors.iter().find(|e| !(e.value.is_finite() && e.value > 0.0 && e.tolerance >= 0.0)) {
        return Err(Error::InvalidArgument(format!("errors must be positive with tolerance >= 0 (got {e:?})")));
    }

    let lambdas: Vec<f64> = levels.iter().map(|n| model.abs_eigenvalue(n.get() as u64)).collect();
    let values: Vec<f64> = errors.iter().map(|e| e.value).collect();
    let (lambda_fit, level_fit) = if levels.len() >= 2 {
        let ns: Vec<f64> = levels.iter().map(|n| n.get() as f64).collect();
        (Some(fit_loglog(&lambdas, &values)?), Some(fit_loglog(&ns, &values)?))
    } else {
        (None, None)
    };

    let (c_low, c_high) = range_constants(&lambdas, errors, eta, epsilon);
    let holds = c_low > 0.0
        && lambdas.iter().zip(errors).all(|(l, e)| {
            c_low * l.powf(-eta) <= (e.value - e.tolerance) * (1.0 + 4.0 * f64::EPSILON)
                && (e.value + e.tolerance) <= c_high * l.powf(epsilon - eta) * (1.0 + 4.0 * f64::EPSILON)
        });

    let mid = levels.len().div_ceil(2);
    let halves = [(0, mid), (mid, levels.len())]
        .into_iter()
        .filter(|(a, b)| a < b)
        .map(|(a, b)| {
            let (lo, hi) = range_constants(&lambdas[a..b], &errors[a..b], eta, epsilon);
            RangeConstants { first_level: levels[a], last_level: levels[b - 1], c_low: lo, c_high: hi }
        })
        .collect();

    let weighted: Vec<f64> = lambdas.iter().zip(&values).map(|(l, v)| v * l.powf(eta)).collect();
    let max = weighted.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = weighted.iter().cloned().fold(f64::INFINITY, f64::min);

    Ok(RateReport {
        levels: levels.to_vec(),
        lambda_values: lambdas,
        errors: values,
        tolerances: errors.iter().map(|e| e.tolerance).collect(),
        lambda_fit,
        level_fit,
        eta_expected: eta,
        sandwich: Sandwich { c_low, c_high, epsilon, holds },
        halves,
        weighted_spread: max / min,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_model, eta_to_model};
    use std::f64::consts::PI;

    #[test]
    fn exact_power_law() {
        let xs = [1.0, 2.0, 4.0, 8.0, 16.0];
        let ys: Vec<f64> = xs.iter().map(|x| 1.0 / x).collect();
        let fit = fit_loglog(&xs, &ys).unwrap();
        assert!((fit.slope + 1.0).abs() < 1e-14);
        assert!(fit.intercept.abs() < 1e-14);
        assert_eq!(fit.r_squared, 1.0);
    }

    #[test]
    fn constant_values() {
        let fit = fit_loglog(&[1.0, 3.0, 9.0], &[2.0, 2.0, 2.0]).unwrap();
        assert_eq!(fit.slope, 0.0);
        assert!((fit.intercept - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn fit_rejects_bad_input() {
        assert!(fit_loglog(&[1.0], &[1.0]).is_err());
        assert!(fit_loglog(&[1.0, 2.0], &[1.0, 0.0]).is_err());
        assert!(fit_loglog(&[1.0, -2.0], &[1.0, 1.0]).is_err());
        assert!(fit_loglog(&[2.0, 2.0], &[1.0, 3.0]).is_err());
        assert!(fit_loglog(&[1.0, 2.0], &[1.0]).is_err());
    }

    #[test]
    fn laplacian_gap_slope() {
        let model = build_model(PI * PI, 2.0, 0.0, 1.0).unwrap();
        let levels = dyadic_levels(64, 7);
        assert_eq!(levels.last().unwrap().get(), 4096);
        let pts = exact_gap_points(&model, &levels);
        let ns: Vec<f64> = levels.iter().map(|n| n.get() as f64).collect();
        let ys: Vec<f64> = pts.iter().map(|p| p.value).collect();
        let fit = fit_loglog(&ns, &ys).unwrap();
        assert!((-1.03..=-0.97).contains(&fit.slope), "{fit:?}");
    }

    #[test]
    fn laplacian_sandwich() {
        let model = eta_to_model(0.5, PI * PI, 1.0).unwrap();
        let levels = dyadic_levels(64, 7);
        let pts = exact_gap_points(&model, &levels);
        let r = certify_sandwich(&model, 0.5, &levels, &pts, 0.1).unwrap();
        // gap(N) >= bound_delta(N) gives err * lambda^(1/2) >= 1 / (2 pi)
        assert!(r.sandwich.c_low >= 1.0 / (2.0 * PI));
        assert!(r.sandwich.holds);
        assert!(r.weighted_spread <= 2.0);
        assert_eq!(r.halves.len(), 2);
        let slope = r.lambda_fit.unwrap().slope;
        assert!((slope + 0.5).abs() <= 0.025, "{slope}");
    }

    #[test]
    fn single_level_is_degenerate_but_legal() {
        let model = eta_to_model(0.5, 1.0, 1.0).unwrap();
        let r = certify_sandwich(&model, 0.5, &[GalerkinLevel(3)], &[ErrorPoint::exact(0.1)], 0.0).unwrap();
        assert!(r.sandwich.holds);
        assert!(r.lambda_fit.is_none());
        assert_eq!(r.weighted_spread, 1.0);
    }

    #[test]
    fn sandwich_rejects_bad_input() {
        let model = eta_to_model(0.5, 1.0, 1.0).unwrap();
        let pts = [ErrorPoint::exact(0.1), ErrorPoint::exact(0.05)];
        let lv = [GalerkinLevel(1), GalerkinLevel(2)];
        assert!(certify_sandwich(&model, 0.4, &lv, &pts, 0.1).is_err());
        assert!(certify_sandwich(&model, 0.5, &[], &[], 0.1).is_err());
        assert!(certify_sandwich(&model, 0.5, &[GalerkinLevel(2), GalerkinLevel(1)], &pts, 0.1).is_err());
        assert!(certify_sandwich(&model, 0.5, &lv, &pts[..1], 0.1).is_err());
        assert!(certify_sandwich(&model, 0.5, &lv, &[ErrorPoint::exact(0.0), pts[1]], 0.1).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn slope_recovery(
                a in 1e-3f64..1e3,
                b in -3.0f64..1.0,
                noise in proptest::collection::vec(-1e-3f64..1e-3, 6..10),
            ) {
                let xs: Vec<f64> = (0..noise.len()).map(|j| 8.0 * 2f64.powi(j as i32)).collect();
                let ys: Vec<f64> = xs.iter().zip(&noise).map(|(x, u)| a * x.powf(b) * (1.0 + u)).collect();
                let fit = fit_loglog(&xs, &ys).unwrap();
                prop_assert!((fit.slope - b).abs() <= 5e-3);
            }

            #[test]
            fn rescaling_x_changes_only_the_intercept(
                k in 1e-3f64..1e3,
                ys in proptest::collection::vec(1e-6f64..1e6, 4..8),
            ) {
                let xs: Vec<f64> = (1..=ys.len()).map(|j| j as f64 * 1.7).collect();
                let scaled: Vec<f64> = xs.iter().map(|x| k * x).collect();
                let a = fit_loglog(&xs, &ys).unwrap();
                let b = fit_loglog(&scaled, &ys).unwrap();
                prop_assert!((a.slope - b.slope).abs() <= 1e-9 * a.slope.abs().max(1.0));
                prop_assert!((a.r_squared - b.r_squared).abs() <= 1e-9);
            }

            #[test]
            fn scaling_errors_scales_constants(k in 1e-3f64..1e3, eta in 0.1f64..2.0) {
                let model = eta_to_model(eta, 2.0, 1.0).unwrap();
                let levels = dyadic_levels(4, 5);
                let pts = exact_gap_points(&model, &levels);
                let scaled: Vec<ErrorPoint> = pts.iter().map(|p| ErrorPoint { value: k * p.value, tolerance: k * p.tolerance }).collect();
                let a = certify_sandwich(&model, eta, &levels, &pts, 0.05).unwrap();
                let b = certify_sandwich(&model, eta, &levels, &scaled, 0.05).unwrap();
                prop_assert!((b.sandwich.c_low / a.sandwich.c_low - k).abs() <= 1e-12 * k);
                prop_assert!((b.sandwich.c_high / a.sandwich.c_high - k).abs() <= 1e-12 * k);
                prop_assert!((b.lambda_fit.unwrap().slope - a.lambda_fit.unwrap().slope).abs() <= 1e-12);
            }

            #[test]
            fn gap_rate_matches_model(c in 0.1f64..100.0, p in 0.5f64..4.0, slack in 0.05f64..1.5) {
                let model = build_model(c, p, 0.5 - 0.5 / p - slack, 1.0).unwrap();
                let levels = dyadic_levels(64, 7);
                let pts = exact_gap_points(&model, &levels);
                let eta = model.eta().unwrap();
                let r = certify_sandwich(&model, eta, &levels, &pts, 0.0).unwrap();
                let q = model.decay_exponent().unwrap();
                prop_assert!((r.level_fit.unwrap().slope - (q + 1.0)).abs() <= 0.05);
                prop_assert!((r.lambda_fit.unwrap().slope + eta).abs() <= 0.05 / p);
            }
        }
    }
}
