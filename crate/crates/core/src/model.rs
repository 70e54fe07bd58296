//! Spectral model of the linear wave operator and the noise.
//!
//! Modes are indexed by `n = 1, 2, ...` with eigenvalues `lambda_n = -c n^p`
//! (strictly decreasing) and noise weights `mu_n = |lambda_n|^delta`. The
//! trace condition `sum_n mu_n^2 / |lambda_n| < inf` holds iff
//! `p (2 delta - 1) < -1`, which is checked on construction. All checks are
//! strict floating-point comparisons without slack.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One-based index of an eigenmode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ModeIndex(u64);

impl ModeIndex {
    pub fn new(n: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("mode index must be >= 1".into()));
        }
        Ok(Self(n))
    }

    pub fn get(self) -> u64 {
        self.0
    }
}

/// Number of retained modes `N`; the retained set is `{1, ..., N}` and `N = 0`
/// is the empty set.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GalerkinLevel(pub usize);

impl GalerkinLevel {
    pub fn get(self) -> usize {
        self.0
    }

    /// Whether mode `n` belongs to the retained set.
    pub fn contains(self, n: u64) -> bool {
        n >= 1 && n <= self.0 as u64
    }
}

impl From<usize> for GalerkinLevel {
    fn from(n: usize) -> Self {
        Self(n)
    }
}

/// A set of modes: the first `N` or all of them.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeSet {
    FirstN(GalerkinLevel),
    All,
}

impl From<usize> for ModeSet {
    fn from(n: usize) -> Self {
        ModeSet::FirstN(GalerkinLevel(n))
    }
}

type WeightFn = dyn Fn(u64) -> f64 + Send + Sync;

/// Explicit noise weights `n -> mu_n` with declared bounds on `|mu_n|`.
///
/// The bounds are trusted: tail enclosures of the series are built from them.
#[derive(Clone)]
pub struct CustomWeights {
    weight: Arc<WeightFn>,
    inf_abs: f64,
    sup_abs: f64,
}

impl CustomWeights {
    pub fn new<F>(weight: F, inf_abs: f64, sup_abs: f64) -> Result<Self>
    where
        F: Fn(u64) -> f64 + Send + Sync + 'static,
    {
        if !(inf_abs.is_finite() && sup_abs.is_finite() && inf_abs >= 0.0 && sup_abs >= inf_abs && sup_abs > 0.0) {
            return Err(Error::InvalidModel(format!(
                "custom weights need 0 <= inf|mu| <= sup|mu| < inf with sup|mu| > 0, got [{inf_abs}, {sup_abs}]"
            )));
        }
        Ok(Self { weight: Arc::new(weight), inf_abs, sup_abs })
    }

    /// Constant weights `|mu_n| = mu`.
    pub fn constant(mu: f64) -> Result<Self> {
        Self::new(move |_| mu, mu.abs(), mu.abs())
    }

    pub fn inf_abs(&self) -> f64 {
        self.inf_abs
    }

    pub fn sup_abs(&self) -> f64 {
        self.sup_abs
    }
}

impl fmt::Debug for CustomWeights {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomWeights")
            .field("inf_abs", &self.inf_abs)
            .field("sup_abs", &self.sup_abs)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone)]
pub enum NoiseWeights {
    /// `|mu_n| = |lambda_n|^delta`, stored through `weight_exponent = 2 delta - 1`.
    PowerLaw { weight_exponent: f64 },
    Custom(CustomWeights),
}

/// Validated spectral model; immutable after construction.
#[derive(Debug, Clone)]
pub struct SpectralModel {
    c: f64,
    p: f64,
    horizon: f64,
    weights: NoiseWeights,
}

/// Flat parameter record used for configuration files and reports.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub c: f64,
    pub p: f64,
    pub delta: f64,
    #[serde(rename = "T")]
    pub t: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
}

fn check_common(c: f64, p: f64, t: f64) -> Result<()> {
    for (name, v) in [("c", c), ("p", p), ("T", t)] {
        if !v.is_finite() {
            return Err(Error::InvalidModel(format!("{name} must be finite, got {v}")));
        }
        if v <= 0.0 {
            return Err(Error::InvalidModel(format!("{name} > 0 violated ({name} = {v})")));
        }
    }
    Ok(())
}

/// Builds the power-law model `lambda_n = -c n^p`, `mu_n = (c n^p)^delta` with horizon `t`.
pub fn build_model(c: f64, p: f64, delta: f64, t: f64) -> Result<SpectralModel> {
    if !delta.is_finite() {
        return Err(Error::InvalidModel(format!("delta must be finite, got {delta}")));
    }
    check_common(c, p, t)?;
    let threshold = 0.5 - 0.5 / p;
    if !(delta < threshold) {
        return Err(Error::InvalidModel(format!(
            "trace condition delta < 1/2 - 1/(2p) violated (delta = {delta}, 1/2 - 1/(2p) = {threshold})"
        )));
    }
    let weight_exponent = 2.0 * delta - 1.0;
    if !(p * weight_exponent < -1.0) {
        return Err(Error::InvalidModel(format!(
            "trace condition p(2 delta - 1) < -1 violated (p(2 delta - 1) = {})",
            p * weight_exponent
        )));
    }
    Ok(SpectralModel { c, p, horizon: t, weights: NoiseWeights::PowerLaw { weight_exponent } })
}

/// Model with `p = 1/eta`, `delta = 1/2 - eta`, for which the squared-norm
/// error gap decays like `|lambda_N|^(-eta)`.
///
/// `2 delta - 1 = -2 eta` is stored exactly, so `p (2 delta - 1) = -2` up to
/// one rounding of `1/eta` for every representable `eta`.
pub fn eta_to_model(eta: f64, c: f64, t: f64) -> Result<SpectralModel> {
    if !(eta.is_finite() && eta > 0.0) {
        return Err(Error::InvalidModel(format!("eta > 0 violated (eta = {eta})")));
    }
    let p = 1.0 / eta;
    if !p.is_finite() {
        return Err(Error::InvalidModel(format!("p = 1/eta overflows for eta = {eta}")));
    }
    check_common(c, p, t)?;
    let weight_exponent = -2.0 * eta;
    if !(p * weight_exponent < -1.0) {
        return Err(Error::InvalidModel(format!(
            "trace condition p(2 delta - 1) < -1 violated (p(2 delta - 1) = {})",
            p * weight_exponent
        )));
    }
    Ok(SpectralModel { c, p, horizon: t, weights: NoiseWeights::PowerLaw { weight_exponent } })
}

impl SpectralModel {
    /// Model with explicit weights. Bounded weights are summable only for `p > 1`.
    pub fn with_weights(c: f64, p: f64, t: f64, weights: CustomWeights) -> Result<Self> {
        check_common(c, p, t)?;
        if !(p > 1.0) {
            return Err(Error::InvalidModel(format!(
                "bounded custom weights need p > 1 for the trace condition (p = {p})"
            )));
        }
        Ok(Self { c, p, horizon: t, weights: NoiseWeights::Custom(weights) })
    }

    pub fn from_params(params: &ModelParams) -> Result<Self> {
        match params.eta {
            Some(eta) => eta_to_model(eta, params.c, params.t),
            None => build_model(params.c, params.p, params.delta, params.t),
        }
    }

    /// Parameter record; `None` for custom weights.
    pub fn params(&self) -> Option<ModelParams> {
        self.delta().map(|delta| ModelParams { c: self.c, p: self.p, delta, t: self.horizon, eta: None })
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// Time horizon `T`.
    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn weights(&self) -> &NoiseWeights {
        &self.weights
    }

    pub fn is_power_law(&self) -> bool {
        matches!(self.weights, NoiseWeights::PowerLaw { .. })
    }

    /// `2 delta - 1` for power-law weights.
    pub fn weight_exponent(&self) -> Option<f64> {
        match self.weights {
            NoiseWeights::PowerLaw { weight_exponent } => Some(weight_exponent),
            NoiseWeights::Custom(_) => None,
        }
    }

    pub fn delta(&self) -> Option<f64> {
        self.weight_exponent().map(|e| 0.5 + 0.5 * e)
    }

    /// Exponent `q = p (2 delta - 1) < -1` of `n` in `mu_n^2 / |lambda_n| = c^(2 delta - 1) n^q`.
    pub fn decay_exponent(&self) -> Option<f64> {
        self.weight_exponent().map(|e| self.p * e)
    }

    /// Exponent `eta = -(q + 1) / p` with `gap(N) ~ |lambda_N|^(-eta)`.
    pub fn eta(&self) -> Option<f64> {
        self.decay_exponent().map(|q| -(q + 1.0) / self.p)
    }

    /// `|lambda_n| = c n^p`.
    pub fn abs_eigenvalue(&self, n: u64) -> f64 {
        self.c * (n as f64).powf(self.p)
    }

    /// `lambda_n = -c n^p`.
    pub fn eigenvalue(&self, n: u64) -> f64 {
        -self.abs_eigenvalue(n)
    }

    /// Frequency `omega_n = |lambda_n|^(1/2)`.
    pub fn frequency(&self, n: u64) -> f64 {
        self.abs_eigenvalue(n).sqrt()
    }

    pub fn noise_weight(&self, n: u64) -> f64 {
        match &self.weights {
            NoiseWeights::PowerLaw { weight_exponent } => self.abs_eigenvalue(n).powf(0.5 + 0.5 * weight_exponent),
            NoiseWeights::Custom(w) => (w.weight)(n),
        }
    }

    /// `mu_n^2 / |lambda_n|`, the mode's share of `E||X||^2` per unit time.
    pub fn mode_weight(&self, n: u64) -> f64 {
        match &self.weights {
            NoiseWeights::PowerLaw { weight_exponent } => self.abs_eigenvalue(n).powf(*weight_exponent),
            NoiseWeights::Custom(w) => {
                let mu = (w.weight)(n);
                mu * mu / self.abs_eigenvalue(n)
            }
        }
    }

    /// `inf_n |mu_n|`: `c^delta` for `delta >= 0`, zero for `delta < 0`.
    pub fn inf_abs_weight(&self) -> f64 {
        match &self.weights {
            NoiseWeights::PowerLaw { weight_exponent } => {
                let delta = 0.5 + 0.5 * weight_exponent;
                if delta >= 0.0 {
                    self.c.powf(delta)
                } else {
                    0.0
                }
            }
            NoiseWeights::Custom(w) => w.inf_abs,
        }
    }
}
