use super::{DataSampler, Dataset};
use crate::basis::shifted_legendre;
use crate::error::{Error, Result};
use crate::rng::McRng;
use rand::Rng;
use rand_distr::StandardNormal;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

/// An alternative with a known first non-vanishing score component.
#[derive(Clone)]
pub struct AlternativeSpec {
    /// `K`: index of the first component with non-zero mean.
    pub k: usize,
    /// `C_P = E_P l_K`.
    pub c_p: f64,
    pub sampler: Arc<dyn DataSampler>,
    /// Optional declared rate `r_n` for the centered `l_K` tail.
    pub rate: Option<Arc<dyn Fn(u64) -> f64 + Send + Sync>>,
}

impl fmt::Debug for AlternativeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AlternativeSpec")
            .field("k", &self.k)
            .field("c_p", &self.c_p)
            .field("rate", &self.rate.is_some())
            .finish()
    }
}

impl AlternativeSpec {
    pub fn new(k: usize, c_p: f64, sampler: Arc<dyn DataSampler>) -> Result<Self> {
        if k == 0 {
            return Err(Error::IndexOutOfRange {
                index: 0,
                max: usize::MAX,
            });
        }
        if !(c_p.is_finite() && c_p != 0.0) {
            return Err(Error::InvalidArgument(format!(
                "C_P must be finite and non-zero, got {c_p}"
            )));
        }
        Ok(Self {
            k,
            c_p,
            sampler,
            rate: None,
        })
    }

    pub fn with_rate(mut self, rate: impl Fn(u64) -> f64 + Send + Sync + 'static) -> Self {
        self.rate = Some(Arc::new(rate));
        self
    }

    /// Density `1 + a b_j(x)` on [0, 1]: `K = j`, `C_P = a`.
    pub fn contamination(j: usize, amplitude: f64) -> Result<Self> {
        let sampler = ContaminatedUniform::new(j, amplitude)?;
        Self::new(j, amplitude, Arc::new(sampler))
    }

    /// Pairs `y = x + σε` with standard normal `x, ε`.
    ///
    /// `K = 1` and `C_P` is the Spearman correlation `(6/π) asin(ρ/2)`
    /// with `ρ = 1/sqrt(1 + σ²)`.
    pub fn noisy_linear(noise_sd: f64) -> Result<Self> {
        let sampler = NoisyLinearPairs::new(noise_sd)?;
        let rho = 1.0 / (1.0 + noise_sd * noise_sd).sqrt();
        Self::new(1, 6.0 / PI * (0.5 * rho).asin(), Arc::new(sampler))
    }
}

/// Density `1 + a b_j(x)` on [0, 1], sampled by rejection.
#[derive(Debug, Clone, Copy)]
pub struct ContaminatedUniform {
    component: usize,
    amplitude: f64,
    envelope: f64,
}

const DENSITY_GRID: usize = 20_000;

impl ContaminatedUniform {
    pub fn new(component: usize, amplitude: f64) -> Result<Self> {
        if component == 0 {
            return Err(Error::IndexOutOfRange {
                index: 0,
                max: usize::MAX,
            });
        }
        if !amplitude.is_finite() {
            return Err(Error::InvalidArgument(format!("amplitude {amplitude}")));
        }
        let min = (0..=DENSITY_GRID)
            .map(|i| 1.0 + amplitude * shifted_legendre(component, i as f64 / DENSITY_GRID as f64))
            .fold(f64::INFINITY, f64::min);
        if min < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "1 + {amplitude}·b_{component}(x) is negative (minimum {min:.4})"
            )));
        }
        Ok(Self {
            component,
            amplitude,
            envelope: 1.0 + amplitude.abs() * ((2 * component + 1) as f64).sqrt(),
        })
    }

    pub fn draw(&self, rng: &mut McRng) -> f64 {
        loop {
            let x: f64 = rng.random();
            let accept =
                (1.0 + self.amplitude * shifted_legendre(self.component, x)) / self.envelope;
            if rng.random::<f64>() < accept {
                return x;
            }
        }
    }
}

impl DataSampler for ContaminatedUniform {
    fn sample(&self, n: usize, rng: &mut McRng) -> Dataset {
        Dataset::Univariate((0..n).map(|_| self.draw(rng)).collect())
    }
}

/// `x ~ N(0, 1)`, `y = x + σ ε`.
#[derive(Debug, Clone, Copy)]
pub struct NoisyLinearPairs {
    noise_sd: f64,
}

impl NoisyLinearPairs {
    pub fn new(noise_sd: f64) -> Result<Self> {
        if !(noise_sd.is_finite() && noise_sd >= 0.0) {
            return Err(Error::InvalidArgument(format!("noise sd {noise_sd}")));
        }
        Ok(Self { noise_sd })
    }
}

impl DataSampler for NoisyLinearPairs {
    fn sample(&self, n: usize, rng: &mut McRng) -> Dataset {
        Dataset::Pairs(
            (0..n)
                .map(|_| {
                    let x: f64 = rng.sample(StandardNormal);
                    let e: f64 = rng.sample(StandardNormal);
                    (x, x + self.noise_sd * e)
                })
                .collect(),
        )
    }
}
