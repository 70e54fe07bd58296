//! Path oracle: the stochastic convolutions
//!
//! ```text
//! x_n = (mu_n / omega_n) int_0^T sin(omega_n (T - s)) d beta_n(s)
//! y_n = (mu_n / omega_n) int_0^T cos(omega_n (T - s)) d beta_n(s)
//! ```
//!
//! approximated by left-point sums over `K` uniform steps, with both sums
//! driven by the same Brownian increments. Mode `n` reads variates
//! `(n-1) K .. n K` of the stream.

use super::{GalerkinSample, RandomStream};
use crate::error::{Error, Result};
use crate::model::{GalerkinLevel, SpectralModel};

/// Table entries above which the oracle refuses to precompute its integrands.
const MAX_TABLE: usize = 1 << 26;

#[derive(Debug, Clone)]
pub struct PathOracle {
    level: GalerkinLevel,
    steps: usize,
    /// Per mode, `(mu / omega) sqrt(T / K) (sin, cos)(omega (T - s_k))`.
    weights: Vec<Vec<(f64, f64)>>,
}

impl PathOracle {
    pub fn new(model: &SpectralModel, level: GalerkinLevel, steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(Error::InvalidArgument("the oracle needs K >= 1 time steps".into()));
        }
        if level.get().saturating_mul(steps) > MAX_TABLE {
            return Err(Error::InvalidArgument(format!(
                "oracle table of {} x {steps} entries is too large",
                level.get()
            )));
        }
        let t = model.horizon();
        let sqrt_dt = (t / steps as f64).sqrt();
        let weights = (1..=level.get() as u64)
            .map(|n| {
                let omega = model.frequency(n);
                let amp = model.noise_weight(n) / omega * sqrt_dt;
                (0..steps)
                    .map(|k| {
                        let (s, c) = (omega * t * (steps - k) as f64 / steps as f64).sin_cos();
                        (amp * s, amp * c)
                    })
                    .collect()
            })
            .collect();
        Ok(Self { level, steps, weights })
    }

    pub fn level(&self) -> GalerkinLevel {
        self.level
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// `(x_n, y_n)` of mode `n` (one-based) only.
    pub fn mode(&self, stream: RandomStream, n: usize) -> Result<(f64, f64)> {
        if n == 0 || n > self.level.get() {
            return Err(Error::InvalidArgument(format!("mode {n} outside 1..={}", self.level.get())));
        }
        let mut src = stream.normals();
        src.seek(((n - 1) * self.steps) as u64);
        let (mut x, mut y) = (0.0, 0.0);
        for &(a, b) in &self.weights[n - 1] {
            let z = src.next_normal();
            x += a * z;
            y += b * z;
        }
        Ok((x, y))
    }

    pub fn sample(&self, stream: RandomStream) -> GalerkinSample {
        let mut src = stream.normals();
        let (x, y) = self
            .weights
            .iter()
            .map(|table| {
                let (mut x, mut y) = (0.0, 0.0);
                for &(a, b) in table {
                    let z = src.next_normal();
                    x += a * z;
                    y += b * z;
                }
                (x, y)
            })
            .unzip();
        GalerkinSample { x, y, level: self.level }
    }
}

pub fn sample_path_oracle(
    model: &SpectralModel,
    level: GalerkinLevel,
    steps: usize,
    stream: RandomStream,
) -> Result<GalerkinSample> {
    Ok(PathOracle::new(model, level, steps)?.sample(stream))
}
