//! The four experiment commands.

use serde_json::{json, Value};
use wavelab::analytics::{
    bound_delta, bound_exp, bound_inf, exp_chains, exp_error_lower, gap_profile, mode_moments, phi_weak_error,
    total_second_moment, Component,
};
use wavelab::model::{ModeIndex, ModeSet, SpectralModel};
use wavelab::montecarlo::{
    choose_reference_level, estimate_mode_moments, estimate_weak_error_coupled, matching_lower_bound,
    EstimatorConfig, TestFunction, WeakErrorReport,
};
use wavelab::ratefit::{certify_sandwich, exact_gap_points, ErrorPoint};
use wavelab::sampler::PathOracle;
use wavelab::GalerkinLevel;

use crate::config::{RateSource, RunConfig};
use crate::output::{loglog_svg, Cell, PlotSeries, Table};
use crate::CliError;

/// Result of one command before it is written out.
pub struct CommandOutput {
    pub name: &'static str,
    pub table: Table,
    /// Command-specific report members besides the table rows.
    pub extra: Value,
    pub tolerances: Value,
    /// Certification failures; non-empty means exit code 3.
    pub failures: Vec<String>,
    pub svg: Option<String>,
}

/// Monte Carlo results are certified at this many standard errors.
const MC_NUM_SE: f64 = 3.0;
/// Oracle discrepancies beyond this many standard errors are flagged.
const ORACLE_NUM_SE: f64 = 4.0;

pub fn exact(cfg: &RunConfig) -> Result<CommandOutput, CliError> {
    let model = cfg.model()?;
    let levels = cfg.levels()?;
    let mut table = Table::new(&[
        "N",
        "lambda_N",
        "second_moment",
        "gap",
        "gap_1",
        "gap_2",
        "bound_delta",
        "bound_inf",
        "chain_lower_1",
        "chain_lower_2",
        "phi_error_1",
        "phi_error_2",
        "exp_error_lower_1",
        "exp_error_lower_2",
        "bound_exp_1",
        "bound_exp_2",
        "delta_ok",
        "inf_ok",
        "chain_1_ok",
        "chain_2_ok",
        "exp_1_ok",
        "exp_2_ok",
    ]);
    let mut failures = Vec::new();
    let components = [Component::Displacement, Component::Velocity];
    let gaps = gap_profile(&model, &levels, Component::Both);
    let chains = [exp_chains(&model, &levels, components[0])?, exp_chains(&model, &levels, components[1])?];
    for (k, &level) in levels.iter().enumerate() {
        let n = level.get();
        let gap = gaps[k].value;
        let b_delta = bound_delta(&model, level)?;
        let b_inf = (model.p() > 1.0 && model.inf_abs_weight() > 0.0).then(|| bound_inf(&model, level)).transpose()?;
        let mut per = Vec::new();
        for (i, c) in components.into_iter().enumerate() {
            let chain = chains[i][k];
            let phi = phi_weak_error(&model, level, c)?.value;
            let lower = exp_error_lower(&model, level, c)?;
            let closed = bound_exp(&model, level, c)?;
            per.push((chain, phi, lower, closed));
        }
        let delta_ok = gap >= b_delta;
        let inf_ok = b_inf.map(|b| gap >= b);
        let chain_ok: Vec<bool> = per.iter().map(|p| p.0.holds()).collect();
        let exp_ok: Vec<bool> = per.iter().map(|p| p.1 >= p.2 && p.1 >= p.3 && p.3 > 0.0).collect();
        for (name, ok) in [
            ("delta", delta_ok),
            ("inf", inf_ok.unwrap_or(true)),
            ("chain_1", chain_ok[0]),
            ("chain_2", chain_ok[1]),
            ("exp_1", exp_ok[0]),
            ("exp_2", exp_ok[1]),
        ] {
            if !ok {
                failures.push(format!("N = {n}: bound {name} violated"));
            }
        }
        table.push(vec![
            n.into(),
            model.abs_eigenvalue(n as u64).into(),
            total_second_moment(&model, ModeSet::FirstN(level)).value.into(),
            gap.into(),
            per[0].0.gap.value.into(),
            per[1].0.gap.value.into(),
            b_delta.into(),
            b_inf.into(),
            per[0].0.lower.into(),
            per[1].0.lower.into(),
            per[0].1.into(),
            per[1].1.into(),
            per[0].2.into(),
            per[1].2.into(),
            per[0].3.into(),
            per[1].3.into(),
            delta_ok.into(),
            inf_ok.map_or(Cell::Missing, Cell::Bool),
            chain_ok[0].into(),
            chain_ok[1].into(),
            exp_ok[0].into(),
            exp_ok[1].into(),
        ]);
    }
    let all = total_second_moment(&model, ModeSet::All);
    Ok(CommandOutput {
        name: "exact",
        table,
        extra: json!({ "second_moment_all": all }),
        tolerances: json!({ "series_abs": wavelab::analytics::series::ABS_TOL, "series_rel": wavelab::analytics::series::REL_TOL }),
        failures,
        svg: None,
    })
}

fn run_mc(
    model: &SpectralModel,
    cfg: &RunConfig,
    level: GalerkinLevel,
    f: TestFunction,
) -> Result<WeakErrorReport, CliError> {
    let fraction = cfg.target_bias_fraction()?;
    let reference = match cfg.reference_level {
        Some(m) if m <= level.get() => {
            return Err(CliError::Config(format!("reference_level {m} must exceed every level (N = {})", level.get())))
        }
        Some(m) => GalerkinLevel(m),
        None => choose_reference_level(model, level, fraction, matching_lower_bound(model, level, f)?)?,
    };
    let est = EstimatorConfig {
        num_samples: cfg.num_samples()?,
        seed: cfg.seed(),
        reference_level: reference,
        target_bias_fraction: fraction,
    };
    Ok(estimate_weak_error_coupled(model, level, f, &est)?)
}

pub fn mc(cfg: &RunConfig) -> Result<CommandOutput, CliError> {
    let model = cfg.model()?;
    let levels = cfg.levels()?;
    let functions = cfg.test_functions()?;
    cfg.num_samples()?;
    let mut table = Table::new(&[
        "N",
        "M",
        "test_function",
        "mean",
        "std_error",
        "n",
        "ci_low",
        "ci_high",
        "exact_value",
        "z_exact",
        "lower_bound",
        "truncation_bias_bound",
        "certified_value",
        "certified",
    ]);
    let mut failures = Vec::new();
    for &level in &levels {
        for &f in &functions {
            let r = run_mc(&model, cfg, level, f)?;
            let e = r.estimate;
            if !r.bound_certified() {
                failures.push(format!(
                    "N = {}, {}: mean - 3 SE - bias = {:e} < lower bound {:e}",
                    level.get(),
                    f.name(),
                    r.certified_value(),
                    r.lower_bound
                ));
            }
            table.push(vec![
                level.get().into(),
                r.reference_level.get().into(),
                f.name().into(),
                e.mean.into(),
                e.std_error.into(),
                e.n.into(),
                (e.mean - MC_NUM_SE * e.std_error).into(),
                (e.mean + MC_NUM_SE * e.std_error).into(),
                r.exact_value.into(),
                r.exact_value.map(|v| e.z_score(v)).into(),
                r.lower_bound.into(),
                r.truncation_bias_bound.into(),
                r.certified_value().into(),
                r.bound_certified().into(),
            ]);
        }
    }
    Ok(CommandOutput {
        name: "mc",
        table,
        extra: json!({}),
        tolerances: json!({ "num_standard_errors": MC_NUM_SE, "target_bias_fraction": cfg.target_bias_fraction()? }),
        failures,
        svg: None,
    })
}

pub fn rates(cfg: &RunConfig, plot: bool) -> Result<CommandOutput, CliError> {
    let model = cfg.model()?;
    let levels = cfg.levels()?;
    let epsilon = cfg.epsilon()?;
    let slope_tol = cfg.slope_tolerance()?;
    let eta = model.eta().ok_or_else(|| CliError::Config("rates need power-law weights".into()))?;
    let source = cfg.source.unwrap_or_default();
    let points: Vec<ErrorPoint> = match source {
        RateSource::Exact => exact_gap_points(&model, &levels),
        RateSource::Synthetic => {
            let errors = cfg.errors.as_ref().ok_or_else(|| CliError::Config("synthetic rates need errors".into()))?;
            if errors.len() != levels.len() {
                return Err(CliError::Config(format!("{} errors for {} levels", errors.len(), levels.len())));
            }
            errors.iter().map(|&e| ErrorPoint::exact(e)).collect()
        }
        RateSource::Mc => {
            let f = cfg.test_functions.as_ref().and_then(|v| v.first().copied()).unwrap_or(TestFunction::NormSq);
            levels
                .iter()
                .map(|&n| run_mc(&model, cfg, n, f).map(|r| ErrorPoint::from_report(&r)))
                .collect::<Result<_, _>>()?
        }
    };
    let report = certify_sandwich(&model, eta, &levels, &points, epsilon)?;
    let expected_level_slope = model.decay_exponent().map(|q| q + 1.0).unwrap_or(f64::NAN);

    let mut failures = Vec::new();
    if let Some(fit) = report.level_fit {
        if (fit.slope - expected_level_slope).abs() > slope_tol {
            failures.push(format!("slope {} differs from {} by more than {slope_tol}", fit.slope, expected_level_slope));
        }
    }
    if !report.sandwich.holds {
        failures.push(format!("rate sandwich not certified (c_low = {:e})", report.sandwich.c_low));
    }

    let mut table = Table::new(&["N", "lambda_N", "error", "tolerance", "weighted_error", "lower_envelope", "upper_envelope"]);
    for (k, level) in levels.iter().enumerate() {
        let l = report.lambda_values[k];
        table.push(vec![
            level.get().into(),
            l.into(),
            report.errors[k].into(),
            report.tolerances[k].into(),
            (report.errors[k] * l.powf(eta)).into(),
            (report.sandwich.c_low * l.powf(-eta)).into(),
            (report.sandwich.c_high * l.powf(epsilon - eta)).into(),
        ]);
    }

    let svg = plot.then(|| {
        let lower: Vec<f64> = report.lambda_values.iter().map(|l| report.sandwich.c_low * l.powf(-eta)).collect();
        let upper: Vec<f64> = report.lambda_values.iter().map(|l| report.sandwich.c_high * l.powf(epsilon - eta)).collect();
        loglog_svg(
            "Weak error against |lambda_N|",
            "|lambda_N|",
            "error",
            &[
                PlotSeries { label: "error", colour: "#1f77b4", xs: &report.lambda_values, ys: &report.errors, line: false },
                PlotSeries { label: "lower envelope", colour: "#2ca02c", xs: &report.lambda_values, ys: &lower, line: true },
                PlotSeries { label: "upper envelope", colour: "#d62728", xs: &report.lambda_values, ys: &upper, line: true },
            ],
        )
    });

    Ok(CommandOutput {
        name: "rates",
        table,
        extra: json!({
            "source": source,
            "expected_level_slope": expected_level_slope,
            "expected_lambda_slope": -eta,
            "report": report,
        }),
        tolerances: json!({ "slope_tolerance": slope_tol, "epsilon": epsilon }),
        failures,
        svg,
    })
}

pub fn oracle(cfg: &RunConfig) -> Result<CommandOutput, CliError> {
    let model = cfg.model()?;
    let mode = cfg.mode()?;
    let steps = cfg.steps()?;
    let paths = cfg.num_paths()?;
    let exact = mode_moments(&model, ModeIndex::new(mode as u64)?, true)?;
    let oracle = PathOracle::new(&model, GalerkinLevel(mode), steps)?;
    let est = estimate_mode_moments(paths, cfg.seed(), |s| oracle.mode(s, mode).unwrap_or((f64::NAN, f64::NAN)))?;

    let mut table = Table::new(&["quantity", "closed_form", "estimate", "std_error", "z_score", "within_4se"]);
    let mut failures = Vec::new();
    for (name, target, e) in [("var1", exact.var1, est.var1), ("var2", exact.var2, est.var2), ("cov", exact.cov, est.cov)] {
        let ok = e.within(target, ORACLE_NUM_SE);
        if !ok {
            failures.push(format!("{name}: z = {:.2} beyond {ORACLE_NUM_SE} standard errors", e.z_score(target)));
        }
        table.push(vec![name.into(), target.into(), e.mean.into(), e.std_error.into(), e.z_score(target).into(), ok.into()]);
    }
    Ok(CommandOutput {
        name: "oracle",
        table,
        extra: json!({ "mode": mode, "steps": steps, "num_paths": paths }),
        tolerances: json!({ "num_standard_errors": ORACLE_NUM_SE }),
        failures,
        svg: None,
    })
}
