//! Coupled Monte Carlo estimation of weak errors.
//!
//! Sample `j` uses stream `(seed, j)`. Samples are processed in batches of
//! [`BATCH_SIZE`] on the current rayon pool; every batch is accumulated
//! sequentially and the batch results are merged in index order, so estimates
//! are bit-identical for any number of worker threads.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytics::{
    bound_delta, bound_exp, bound_inf, exp_error_lower, gap_between, phi_difference, tail_upper_bound, Component,
};
use crate::error::{Error, Result};
use crate::model::{GalerkinLevel, SpectralModel};
use crate::sampler::{GalerkinSample, RandomStream, Sampler};

pub const BATCH_SIZE: u64 = 4096;

/// Offset separating the coarse streams of the independent estimator from the fine ones.
const INDEPENDENT_STREAM_OFFSET: u64 = 1 << 63;

/// Sample mean with its standard error `s / sqrt(n)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    pub n: u64,
}

impl Estimate {
    /// `(mean - target) / std_error`.
    pub fn z_score(&self, target: f64) -> f64 {
        (self.mean - target) / self.std_error
    }

    pub fn within(&self, target: f64, num_se: f64) -> bool {
        (self.mean - target).abs() <= num_se * self.std_error
    }

    /// Sample variance `s^2`.
    pub fn sample_variance(&self) -> f64 {
        self.std_error * self.std_error * self.n as f64
    }
}

/// Welford accumulator; merged with Chan's update.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MeanAccumulator {
    count: u64,
    mean: f64,
    m2: f64,
}

impl MeanAccumulator {
    #[inline]
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&mut self, other: &MeanAccumulator) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n = (self.count + other.count) as f64;
        let d = other.mean - self.mean;
        let wa = self.count as f64 / n;
        let wb = other.count as f64 / n;
        self.mean = wa * self.mean + wb * other.mean;
        self.m2 += other.m2 + d * d * self.count as f64 * wb;
        self.count += other.count;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn estimate(&self) -> Estimate {
        let std_error = if self.count >= 2 {
            (self.m2 / (self.count - 1) as f64 / self.count as f64).sqrt()
        } else {
            f64::NAN
        };
        Estimate { mean: self.mean, std_error, n: self.count }
    }
}

/// Means of the `dims` values `f(j, out)` writes for sample indices `j < num_samples`.
pub fn estimate_means<F>(num_samples: u64, dims: usize, f: F) -> Vec<Estimate>
where
    F: Fn(u64, &mut [f64]) + Sync,
{
    let batches = num_samples.div_ceil(BATCH_SIZE);
    let partial: Vec<Vec<MeanAccumulator>> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut acc = vec![MeanAccumulator::default(); dims];
            let mut out = vec![0.0; dims];
            for j in b * BATCH_SIZE..((b + 1) * BATCH_SIZE).min(num_samples) {
                f(j, &mut out);
                for (a, &v) in acc.iter_mut().zip(&out) {
                    a.push(v);
                }
            }
            acc
        })
        .collect();
    let mut total = vec![MeanAccumulator::default(); dims];
    for batch in &partial {
        for (t, a) in total.iter_mut().zip(batch) {
            t.merge(a);
        }
    }
    total.iter().map(MeanAccumulator::estimate).collect()
}

/// Functional whose expectation is estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TestFunction {
    #[serde(rename = "norm_sq")]
    NormSq,
    #[serde(rename = "phi_1")]
    Phi1,
    #[serde(rename = "phi_2")]
    Phi2,
}

impl TestFunction {
    pub const ALL: [TestFunction; 3] = [TestFunction::NormSq, TestFunction::Phi1, TestFunction::Phi2];

    pub fn name(self) -> &'static str {
        match self {
            TestFunction::NormSq => "norm_sq",
            TestFunction::Phi1 => "phi_1",
            TestFunction::Phi2 => "phi_2",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown test function {s:?} (norm_sq, phi_1, phi_2)")))
    }

    /// Component whose squared norm the functional reads.
    pub fn component(self) -> Component {
        match self {
            TestFunction::NormSq => Component::Both,
            TestFunction::Phi1 => Component::Displacement,
            TestFunction::Phi2 => Component::Velocity,
        }
    }

    /// Value on a sample whose component norms are `(|x|^2, |y|^2)`.
    fn eval(self, sx: f64, sy: f64) -> f64 {
        match self {
            TestFunction::NormSq => sx + sy,
            TestFunction::Phi1 => (-sx).exp(),
            TestFunction::Phi2 => (-sy).exp(),
        }
    }

    /// The signed error `f(coarse) - f(fine)` for `phi_i` and `f(fine) - f(coarse)`
    /// for the norm, both non-negative in expectation.
    fn coupled_difference(self, coarse: (f64, f64), fine: (f64, f64)) -> f64 {
        match self {
            TestFunction::NormSq => (fine.0 - coarse.0) + (fine.1 - coarse.1),
            TestFunction::Phi1 => (-coarse.0).exp() * -(-(fine.0 - coarse.0)).exp_m1(),
            TestFunction::Phi2 => (-coarse.1).exp() * -(-(fine.1 - coarse.1)).exp_m1(),
        }
    }
}

/// `exp(-||v_i||^2)` of one component of a sample.
pub fn phi(sample: &GalerkinSample, component: Component) -> Result<f64> {
    match component {
        Component::Both => Err(Error::InvalidArgument("phi needs component 1 or 2".into())),
        c => Ok((-sample.norm_sq(c)).exp()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub num_samples: u64,
    pub seed: u64,
    pub reference_level: GalerkinLevel,
    pub target_bias_fraction: f64,
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_samples < 2 {
            return Err(Error::InvalidArgument(format!("num_samples >= 2 required (got {})", self.num_samples)));
        }
        if self.reference_level.get() < 1 {
            return Err(Error::InvalidArgument("reference level M >= 1 required".into()));
        }
        if !(self.target_bias_fraction > 0.0 && self.target_bias_fraction < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "target_bias_fraction must lie in (0, 1) (got {})",
                self.target_bias_fraction
            )));
        }
        Ok(())
    }
}

/// Coupled estimate of the weak error at level `N` with `X^H` replaced by `X^{I_M}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeakErrorReport {
    pub level: GalerkinLevel,
    pub reference_level: GalerkinLevel,
    pub test_function: TestFunction,
    pub estimate: Estimate,
    /// Exact value of the estimated level-`N` versus level-`M` difference.
    pub exact_value: Option<f64>,
    pub lower_bound: f64,
    /// Upper bound on the (non-negative) error of replacing `X^H` by `X^{I_M}`.
    pub truncation_bias_bound: f64,
}

impl WeakErrorReport {
    /// `mean - 3 SE - truncation_bias_bound`.
    pub fn certified_value(&self) -> f64 {
        self.estimate.mean - 3.0 * self.estimate.std_error - self.truncation_bias_bound
    }

    pub fn bound_certified(&self) -> bool {
        self.certified_value() >= self.lower_bound
    }
}

fn check_levels(coarse: GalerkinLevel, cfg: &EstimatorConfig) -> Result<()> {
    cfg.validate()?;
    if coarse.get() < 1 {
        return Err(Error::InvalidArgument("weak errors are estimated for N >= 1".into()));
    }
    if coarse >= cfg.reference_level {
        return Err(Error::InvalidArgument(format!(
            "N < M required (N = {}, M = {})",
            coarse.get(),
            cfg.reference_level.get()
        )));
    }
    Ok(())
}

fn component_norms(sampler: &Sampler, stream: RandomStream, coarse: usize) -> ((f64, f64), (f64, f64)) {
    let (mut sx, mut sy) = (0.0, 0.0);
    let mut head = (0.0, 0.0);
    let mut n = 0;
    sampler.for_each_mode(stream, |x, y| {
        if n == coarse {
            head = (sx, sy);
        }
        sx += x * x;
        sy += y * y;
        n += 1;
    });
    if n == coarse {
        head = (sx, sy);
    }
    (head, (sx, sy))
}

/// Analytic lower bound matching a test function.
pub fn matching_lower_bound(model: &SpectralModel, level: GalerkinLevel, f: TestFunction) -> Result<f64> {
    match (f, model.is_power_law()) {
        (TestFunction::NormSq, true) => bound_delta(model, level),
        (TestFunction::NormSq, false) => bound_inf(model, level),
        (_, true) => bound_exp(model, level, f.component()),
        (_, false) => exp_error_lower(model, level, f.component()),
    }
}

pub fn estimate_weak_error_coupled(
    model: &SpectralModel,
    level: GalerkinLevel,
    f: TestFunction,
    cfg: &EstimatorConfig,
) -> Result<WeakErrorReport> {
    check_levels(level, cfg)?;
    let fine = cfg.reference_level;
    let sampler = Sampler::new(model, fine)?;
    let est = estimate_means(cfg.num_samples, 1, |j, out| {
        let (head, all) = component_norms(&sampler, RandomStream::new(cfg.seed, j), level.get());
        out[0] = f.coupled_difference(head, all);
    })[0];
    let exact_value = match f {
        TestFunction::NormSq => gap_between(model, level, fine, Component::Both),
        _ => phi_difference(model, level, fine, f.component())?,
    };
    Ok(WeakErrorReport {
        level,
        reference_level: fine,
        test_function: f,
        estimate: est,
        exact_value: Some(exact_value),
        lower_bound: matching_lower_bound(model, level, f)?,
        truncation_bias_bound: tail_upper_bound(model, fine)?,
    })
}

/// Same target as the coupled estimator, but the coarse and fine solutions are
/// drawn from independent streams.
pub fn estimate_weak_error_independent(
    model: &SpectralModel,
    level: GalerkinLevel,
    f: TestFunction,
    cfg: &EstimatorConfig,
) -> Result<Estimate> {
    check_levels(level, cfg)?;
    let coarse = Sampler::new(model, level)?;
    let fine = Sampler::new(model, cfg.reference_level)?;
    let norms = |s: &Sampler, stream: RandomStream| {
        let (mut sx, mut sy) = (0.0, 0.0);
        s.for_each_mode(stream, |x, y| {
            sx += x * x;
            sy += y * y;
        });
        (sx, sy)
    };
    Ok(estimate_means(cfg.num_samples, 1, |j, out| {
        let a = norms(&coarse, RandomStream::new(cfg.seed, INDEPENDENT_STREAM_OFFSET + j));
        let b = norms(&fine, RandomStream::new(cfg.seed, j));
        out[0] = match f {
            TestFunction::NormSq => f.eval(b.0, b.1) - f.eval(a.0, a.1),
            _ => f.eval(a.0, a.1) - f.eval(b.0, b.1),
        };
    })[0])
}

/// Plain estimate of `E f(X^{I_N})`.
pub fn estimate_expectation(
    model: &SpectralModel,
    level: GalerkinLevel,
    f: TestFunction,
    num_samples: u64,
    seed: u64,
) -> Result<Estimate> {
    if num_samples < 2 {
        return Err(Error::InvalidArgument(format!("num_samples >= 2 required (got {num_samples})")));
    }
    let sampler = Sampler::new(model, level)?;
    Ok(estimate_means(num_samples, 1, |j, out| {
        let (_, (sx, sy)) = component_norms(&sampler, RandomStream::new(seed, j), 0);
        out[0] = f.eval(sx, sy);
    })[0])
}

/// Empirical second moments `(E x^2, E y^2, E xy)` of one mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeMomentEstimates {
    pub var1: Estimate,
    pub var2: Estimate,
    pub cov: Estimate,
}

/// Second moments of the pairs `draw(stream_j)`, `j < num_samples`.
pub fn estimate_mode_moments<D>(num_samples: u64, seed: u64, draw: D) -> Result<ModeMomentEstimates>
where
    D: Fn(RandomStream) -> (f64, f64) + Sync,
{
    if num_samples < 2 {
        return Err(Error::InvalidArgument(format!("num_samples >= 2 required (got {num_samples})")));
    }
    let e = estimate_means(num_samples, 3, |j, out| {
        let (x, y) = draw(RandomStream::new(seed, j));
        out[0] = x * x;
        out[1] = y * y;
        out[2] = x * y;
    });
    Ok(ModeMomentEstimates { var1: e[0], var2: e[1], cov: e[2] })
}

/// Largest reference level tried by [`choose_reference_level`].
const MAX_REFERENCE_LEVEL: usize = 1 << 40;

/// Smallest `M = 2^k N`, `k >= 1`, whose tail bound is at most `fraction * scale`.
pub fn choose_reference_level(
    model: &SpectralModel,
    level: GalerkinLevel,
    target_bias_fraction: f64,
    scale: f64,
) -> Result<GalerkinLevel> {
    if !(target_bias_fraction > 0.0 && target_bias_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "target_bias_fraction must lie in (0, 1) (got {target_bias_fraction})"
        )));
    }
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::InvalidArgument(format!("scale must be positive (got {scale})")));
    }
    if level.get() < 1 {
        return Err(Error::InvalidArgument("reference levels are chosen for N >= 1".into()));
    }
    let target = target_bias_fraction * scale;
    let mut m = level.get() * 2;
    while m <= MAX_REFERENCE_LEVEL {
        if tail_upper_bound(model, GalerkinLevel(m))? <= target {
            return Ok(GalerkinLevel(m));
        }
        m *= 2;
    }
    Err(Error::InvalidArgument(format!("no reference level up to {MAX_REFERENCE_LEVEL} meets the bias target {target:e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytics::total_second_moment;
    use crate::model::{build_model, ModeSet};
    use std::f64::consts::PI;

    fn laplacian() -> SpectralModel {
        build_model(PI * PI, 2.0, 0.0, 1.0).unwrap()
    }

    fn cfg(num_samples: u64, m: usize) -> EstimatorConfig {
        EstimatorConfig { num_samples, seed: 2024, reference_level: GalerkinLevel(m), target_bias_fraction: 0.01 }
    }

    #[test]
    fn phi_examples() {
        assert_eq!(phi(&GalerkinSample::empty(), Component::Displacement).unwrap(), 1.0);
        let s = GalerkinSample { x: vec![1.0], y: vec![0.5], level: GalerkinLevel(1) };
        assert!((phi(&s, Component::Displacement).unwrap() - (-1f64).exp()).abs() < 1e-16);
        assert!((phi(&s, Component::Velocity).unwrap() - (-0.25f64).exp()).abs() < 1e-16);
        assert!(phi(&s, Component::Both).is_err());
    }

    #[test]
    fn accumulator_matches_two_pass() {
        let xs: Vec<f64> = (0..1000).map(|k| ((k * 37) % 101) as f64 * 0.1 + 1e6).collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
        let mut a = MeanAccumulator::default();
        let mut b = MeanAccumulator::default();
        for (i, &x) in xs.iter().enumerate() {
            if i < 313 {
                a.push(x);
            } else {
                b.push(x);
            }
        }
        a.merge(&b);
        let e = a.estimate();
        assert!((e.mean - mean).abs() < 1e-9);
        assert!((e.sample_variance() - var).abs() < 1e-8 * var);
        assert_eq!(e.n, 1000);
    }

    #[test]
    fn test_function_names_round_trip() {
        for f in TestFunction::ALL {
            assert_eq!(TestFunction::parse(f.name()).unwrap(), f);
            assert_eq!(serde_json::to_string(&f).unwrap(), format!("\"{}\"", f.name()));
        }
        assert!(TestFunction::parse("phi_3").is_err());
    }

    #[test]
    fn config_validation() {
        let model = laplacian();
        let f = TestFunction::NormSq;
        assert!(estimate_weak_error_coupled(&model, GalerkinLevel(4), f, &cfg(1, 8)).is_err());
        assert!(estimate_weak_error_coupled(&model, GalerkinLevel(8), f, &cfg(10, 8)).is_err());
        assert!(estimate_weak_error_coupled(&model, GalerkinLevel(0), f, &cfg(10, 8)).is_err());
        let mut bad = cfg(10, 8);
        bad.target_bias_fraction = 1.0;
        assert!(estimate_weak_error_coupled(&model, GalerkinLevel(2), f, &bad).is_err());
    }

    #[test]
    fn coupled_difference_vanishes_at_equal_levels() {
        let sampler = Sampler::new(&laplacian(), GalerkinLevel(6)).unwrap();
        for j in 0..50 {
            let (head, all) = component_norms(&sampler, RandomStream::new(1, j), 6);
            assert_eq!(head, all);
            for f in TestFunction::ALL {
                assert_eq!(f.coupled_difference(head, all), 0.0);
            }
        }
    }

    #[test]
    fn coupled_norm_gap_matches_exact() {
        let model = laplacian();
        let r = estimate_weak_error_coupled(&model, GalerkinLevel(4), TestFunction::NormSq, &cfg(20_000, 128)).unwrap();
        let exact = r.exact_value.unwrap();
        assert!(r.estimate.within(exact, 4.0), "{r:?}");
        assert!(r.truncation_bias_bound >= 0.0);
    }

    #[test]
    fn coupled_phi_matches_exact() {
        let model = build_model(1.0, 2.0, 0.0, 1.0).unwrap();
        for f in [TestFunction::Phi1, TestFunction::Phi2] {
            let r = estimate_weak_error_coupled(&model, GalerkinLevel(2), f, &cfg(20_000, 64)).unwrap();
            assert!(r.estimate.within(r.exact_value.unwrap(), 4.0), "{r:?}");
        }
    }

    #[test]
    fn coupling_reduces_variance() {
        let model = laplacian();
        let c = cfg(20_000, 64);
        let coupled = estimate_weak_error_coupled(&model, GalerkinLevel(4), TestFunction::NormSq, &c).unwrap();
        let independent = estimate_weak_error_independent(&model, GalerkinLevel(4), TestFunction::NormSq, &c).unwrap();
        assert!(coupled.estimate.std_error < independent.std_error);
        assert!(independent.within(coupled.exact_value.unwrap(), 4.0));
    }

    #[test]
    fn expectation_matches_second_moment() {
        let model = laplacian();
        let e = estimate_expectation(&model, GalerkinLevel(8), TestFunction::NormSq, 20_000, 3).unwrap();
        let exact = total_second_moment(&model, ModeSet::from(8)).value;
        assert!(e.within(exact, 4.0));
    }

    #[test]
    fn estimates_do_not_depend_on_thread_count() {
        let model = laplacian();
        let c = cfg(3 * BATCH_SIZE + 17, 32);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(|| {
                estimate_weak_error_coupled(&model, GalerkinLevel(3), TestFunction::Phi2, &c).unwrap()
            })
        };
        let a = run(1);
        let b = run(4);
        assert_eq!(a.estimate.mean.to_bits(), b.estimate.mean.to_bits());
        assert_eq!(a.estimate.std_error.to_bits(), b.estimate.std_error.to_bits());
    }

    #[test]
    fn reference_level_examples() {
        let model = laplacian();
        let scale = bound_delta(&model, GalerkinLevel(4)).unwrap();
        assert!((scale - 1.0 / (8.0 * PI * PI)).abs() < 1e-16);
        let m = choose_reference_level(&model, GalerkinLevel(4), 0.01, scale).unwrap();
        assert_eq!(m, GalerkinLevel(1024));
        assert_eq!(choose_reference_level(&model, GalerkinLevel(4), 0.99, 1e6).unwrap(), GalerkinLevel(8));
        assert!(choose_reference_level(&model, GalerkinLevel(4), 0.0, 1.0).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn chosen_reference_level_meets_target(
                c in 0.1f64..50.0,
                p in 1.1f64..4.0,
                slack in 0.01f64..1.0,
                n in 1usize..64,
                fraction in 0.001f64..0.999,
            ) {
                let model = build_model(c, p, 0.5 - 0.5 / p - slack, 1.0).unwrap();
                let scale = bound_delta(&model, GalerkinLevel(n)).unwrap();
                let m = choose_reference_level(&model, GalerkinLevel(n), fraction, scale).unwrap();
                prop_assert!(m.get() >= 2 * n && m.get().is_multiple_of(n) && (m.get() / n).is_power_of_two());
                prop_assert!(tail_upper_bound(&model, m).unwrap() <= fraction * scale);
                if m.get() > 2 * n {
                    prop_assert!(tail_upper_bound(&model, GalerkinLevel(m.get() / 2)).unwrap() > fraction * scale);
                }
            }

            #[test]
            fn phi_lies_in_unit_interval(xs in proptest::collection::vec(-1e3f64..1e3, 0..20)) {
                let level = GalerkinLevel(xs.len());
                let s = GalerkinSample { y: xs.clone(), x: xs, level };
                let v = phi(&s, Component::Displacement).unwrap();
                prop_assert!(v > 0.0 || s.norm_sq(Component::Displacement) > 700.0);
                prop_assert!(v <= 1.0);
            }
        }
    }
}
