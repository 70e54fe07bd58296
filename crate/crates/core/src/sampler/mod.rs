//! Exact sampling of the Galerkin solutions in orthonormal coordinates.
//!
//! Mode `n` draws `(x_n, y_n) = L_n (z_1, z_2)` with `L_n` the Cholesky factor
//! of its 2x2 covariance and `z_1, z_2` the variates `2(n-1)` and `2n-1` of
//! the stream. A level-`M` sample restricted to its first `N` modes is
//! therefore bit-identical to the level-`N` sample of the same stream, which
//! realizes the coupling `X^{I_N} = P_{I_N} X^{I_M}`.

mod oracle;
mod rng;

pub use oracle::{sample_path_oracle, PathOracle};
pub use rng::{inverse_normal_cdf, NormalSource, RandomStream};

use serde::{Deserialize, Serialize};

use crate::analytics::{level_moments, Component};
use crate::error::{Error, Result};
use crate::model::{GalerkinLevel, SpectralModel};

/// Coordinates `x_n = <e_n, X^1>` and `y_n = <|lambda_n|^(1/2) e_n, X^2>_{H_{-1/2}}`
/// for `n = 1..=level`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GalerkinSample {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub level: GalerkinLevel,
}

impl GalerkinSample {
    pub fn empty() -> Self {
        Self { x: Vec::new(), y: Vec::new(), level: GalerkinLevel(0) }
    }

    /// Squared norm of one component, or of the pair.
    pub fn norm_sq(&self, component: Component) -> f64 {
        let sq = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>();
        match component {
            Component::Displacement => sq(&self.x),
            Component::Velocity => sq(&self.y),
            Component::Both => sq(&self.x) + sq(&self.y),
        }
    }
}

/// First `N` coordinates of `sample`.
pub fn project(sample: &GalerkinSample, level: GalerkinLevel) -> Result<GalerkinSample> {
    let n = level.get();
    if n > sample.level.get() {
        return Err(Error::InvalidArgument(format!(
            "cannot project a level-{} sample to level {n}",
            sample.level.get()
        )));
    }
    Ok(GalerkinSample { x: sample.x[..n].to_vec(), y: sample.y[..n].to_vec(), level })
}

/// Exact sampler for one model and level, with the per-mode factors precomputed.
#[derive(Debug, Clone)]
pub struct Sampler {
    level: GalerkinLevel,
    factors: Vec<(f64, f64, f64)>,
}

impl Sampler {
    pub fn new(model: &SpectralModel, level: GalerkinLevel) -> Result<Self> {
        let factors = level_moments(model, level)?.iter().map(|m| m.cholesky()).collect();
        Ok(Self { level, factors })
    }

    pub fn level(&self) -> GalerkinLevel {
        self.level
    }

    /// Calls `visit(x_n, y_n)` for `n = 1..=level` in order.
    #[inline]
    pub fn for_each_mode(&self, stream: RandomStream, mut visit: impl FnMut(f64, f64)) {
        let mut src = stream.normals();
        for &(l11, l21, l22) in &self.factors {
            let z1 = src.next_normal();
            let z2 = src.next_normal();
            visit(l11 * z1, l21 * z1 + l22 * z2);
        }
    }

    pub fn sample(&self, stream: RandomStream) -> GalerkinSample {
        let n = self.level.get();
        let mut out = GalerkinSample { x: Vec::with_capacity(n), y: Vec::with_capacity(n), level: self.level };
        self.for_each_mode(stream, |x, y| {
            out.x.push(x);
            out.y.push(y);
        });
        out
    }
}

pub fn sample_exact(model: &SpectralModel, level: GalerkinLevel, stream: RandomStream) -> Result<GalerkinSample> {
    Ok(Sampler::new(model, level)?.sample(stream))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytics::total_second_moment;
    use crate::model::build_model;
    use std::f64::consts::PI;

    fn laplacian() -> SpectralModel {
        build_model(PI * PI, 2.0, 0.0, 1.0).unwrap()
    }

    #[test]
    fn empty_level() {
        let s = sample_exact(&laplacian(), GalerkinLevel(0), RandomStream::new(1, 2)).unwrap();
        assert_eq!(s, GalerkinSample::empty());
        assert_eq!(s.norm_sq(Component::Both), 0.0);
    }

    #[test]
    fn deterministic() {
        let a = sample_exact(&laplacian(), GalerkinLevel(64), RandomStream::new(5, 9)).unwrap();
        let b = sample_exact(&laplacian(), GalerkinLevel(64), RandomStream::new(5, 9)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.x.len(), 64);
    }

    #[test]
    fn projection_rules() {
        let s = sample_exact(&laplacian(), GalerkinLevel(20), RandomStream::new(3, 1)).unwrap();
        assert_eq!(project(&s, GalerkinLevel(20)).unwrap(), s);
        assert_eq!(project(&s, GalerkinLevel(0)).unwrap(), GalerkinSample::empty());
        assert!(project(&s, GalerkinLevel(21)).is_err());
        let head = project(&s, GalerkinLevel(7)).unwrap();
        let rest: f64 = s.x[7..].iter().chain(&s.y[7..]).map(|a| a * a).sum();
        let total = s.norm_sq(Component::Both);
        assert!((head.norm_sq(Component::Both) + rest - total).abs() <= 1e-15 * total);
    }

    #[test]
    fn level_one_moments_match_closed_form() {
        let sampler = Sampler::new(&laplacian(), GalerkinLevel(1)).unwrap();
        let n = 100_000u64;
        let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
        let (mut qxx, mut qyy) = (0.0, 0.0);
        for j in 0..n {
            sampler.for_each_mode(RandomStream::new(42, j), |x, y| {
                sxx += x * x;
                syy += y * y;
                sxy += x * y;
                qxx += x.powi(4);
                qyy += y.powi(4);
            });
        }
        let nf = n as f64;
        let v = 1.0 / (2.0 * PI * PI);
        let se = |s2: f64, s4: f64| ((s4 / nf - (s2 / nf).powi(2)) / nf).sqrt();
        assert!((sxx / nf - v).abs() < 3.0 * se(sxx, qxx));
        assert!((syy / nf - v).abs() < 3.0 * se(syy, qyy));
        // independent components: Var(xy) = v^2
        assert!((sxy / nf).abs() < 3.0 * v / nf.sqrt());
    }

    #[test]
    fn mean_norm_matches_second_moment() {
        let model = build_model(2.0, 1.5, -0.3, 0.6).unwrap();
        let level = GalerkinLevel(16);
        let sampler = Sampler::new(&model, level).unwrap();
        let n = 50_000u64;
        let (mut s, mut s2) = (0.0, 0.0);
        for j in 0..n {
            let v = sampler.sample(RandomStream::new(8, j)).norm_sq(Component::Both);
            s += v;
            s2 += v * v;
        }
        let nf = n as f64;
        let mean = s / nf;
        let se = ((s2 / nf - mean * mean) / nf).sqrt();
        let exact = total_second_moment(&model, crate::model::ModeSet::FirstN(level)).value;
        assert!((mean - exact).abs() < 4.0 * se, "{mean} vs {exact} (se {se})");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn nesting(seed in any::<u64>(), stream in any::<u64>(), m in 0usize..80, n_frac in 0.0f64..=1.0) {
                let model = laplacian();
                let n = (m as f64 * n_frac) as usize;
                let s = RandomStream::new(seed, stream);
                let fine = sample_exact(&model, GalerkinLevel(m), s).unwrap();
                let coarse = sample_exact(&model, GalerkinLevel(n), s).unwrap();
                prop_assert_eq!(project(&fine, GalerkinLevel(n)).unwrap(), coarse);
            }
        }
    }
}
