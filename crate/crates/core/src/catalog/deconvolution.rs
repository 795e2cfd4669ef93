//! Simple null hypothesis about the signal density when only `Y = X + ε`
//! is observed and the noise density `h` is known.
//!
//! Scores come from the perturbation family `f_θ = f_0 (1 + Σ θ_j b_j(F_0))`:
//!
//! ```text
//! l_j(y) = ∫ b_j(F_0(s)) f_0(s) h(y - s) ds / ∫ f_0(s) h(y - s) ds
//! ```

use super::{DataSampler, Dataset};
use crate::basis::shifted_legendre_into;
use crate::error::{Error, Result};
use crate::quadrature::adaptive_simpson;
use crate::rng::McRng;
use crate::statistics::{
    check_null_mean, estimate_second_moment, nt_statistic, MeanVector, NormalizingMatrix,
    Provenance,
};
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use std::collections::BTreeMap;
use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::sync::{Arc, Mutex};

/// Null density `f_0` of the unobserved signal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NullDensity {
    Uniform { lower: f64, upper: f64 },
    Normal { mean: f64, sd: f64 },
}

impl Default for NullDensity {
    fn default() -> Self {
        NullDensity::Uniform {
            lower: 0.0,
            upper: 1.0,
        }
    }
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z * FRAC_1_SQRT_2)
}

fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

impl NullDensity {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            NullDensity::Uniform { lower, upper } => {
                lower.is_finite() && upper.is_finite() && lower < upper
            }
            NullDensity::Normal { mean, sd } => mean.is_finite() && sd.is_finite() && sd > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "invalid null density {self:?}"
            )))
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        match *self {
            NullDensity::Uniform { lower, upper } => {
                if (lower..=upper).contains(&x) {
                    1.0 / (upper - lower)
                } else {
                    0.0
                }
            }
            NullDensity::Normal { mean, sd } => std_normal_pdf((x - mean) / sd) / sd,
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            NullDensity::Uniform { lower, upper } => {
                ((x - lower) / (upper - lower)).clamp(0.0, 1.0)
            }
            NullDensity::Normal { mean, sd } => std_normal_cdf((x - mean) / sd),
        }
    }

    pub fn support(&self) -> (f64, f64) {
        match *self {
            NullDensity::Uniform { lower, upper } => (lower, upper),
            NullDensity::Normal { .. } => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    pub fn sample(&self, rng: &mut McRng) -> f64 {
        match *self {
            NullDensity::Uniform { lower, upper } => lower + (upper - lower) * rng.random::<f64>(),
            NullDensity::Normal { mean, sd } => mean + sd * rng.sample::<f64, _>(StandardNormal),
        }
    }
}

/// Known noise density `h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseDensity {
    Gaussian { sd: f64 },
}

impl Default for NoiseDensity {
    fn default() -> Self {
        NoiseDensity::Gaussian { sd: 0.25 }
    }
}

/// Integration half-width in noise standard deviations.
const HALF_WIDTH_SDS: f64 = 8.0;

impl NoiseDensity {
    pub fn validate(&self) -> Result<()> {
        match *self {
            NoiseDensity::Gaussian { sd } if sd.is_finite() && sd > 0.0 => Ok(()),
            _ => Err(Error::InvalidArgument(format!(
                "invalid noise density {self:?}"
            ))),
        }
    }

    pub fn pdf(&self, e: f64) -> f64 {
        match *self {
            NoiseDensity::Gaussian { sd } => std_normal_pdf(e / sd) / sd,
        }
    }

    pub fn half_width(&self) -> f64 {
        match *self {
            NoiseDensity::Gaussian { sd } => HALF_WIDTH_SDS * sd,
        }
    }

    pub fn sample(&self, rng: &mut McRng) -> f64 {
        match *self {
            NoiseDensity::Gaussian { sd } => sd * rng.sample::<f64, _>(StandardNormal),
        }
    }
}

/// Absolute quadrature tolerance, relative to the denominator once it
/// drops below one.
pub const QUAD_TOL: f64 = 1e-9;
const MIN_DENOMINATOR: f64 = 1e-300;

/// `l_1(y), ..., l_k(y)` written to `out` (length `k`).
pub fn deconvolution_scores(
    y: f64,
    null: &NullDensity,
    noise: &NoiseDensity,
    out: &mut [f64],
) -> Result<()> {
    let k = out.len();
    let (lo_s, hi_s) = null.support();
    let w = noise.half_width();
    let lo = (y - w).max(lo_s);
    let hi = (y + w).min(hi_s);
    if !(lo < hi) {
        return Err(Error::VanishingDenominator(0.0));
    }
    let weight = |s: f64| null.pdf(s) * noise.pdf(y - s);
    let coarse = (hi - lo) / 6.0 * (weight(lo) + 4.0 * weight(0.5 * (lo + hi)) + weight(hi));
    let tol = QUAD_TOL * coarse.clamp(MIN_DENOMINATOR, 1.0);
    let integrals = adaptive_simpson(
        |s, v: &mut [f64]| {
            let wt = weight(s);
            v[0] = wt;
            shifted_legendre_into(null.cdf(s), &mut v[1..]);
            v[1..].iter_mut().for_each(|x| *x *= wt);
        },
        lo,
        hi,
        k + 1,
        tol,
    )?;
    let den = integrals[0];
    if !(den > MIN_DENOMINATOR) {
        return Err(Error::VanishingDenominator(den));
    }
    for (o, num) in out.iter_mut().zip(&integrals[1..]) {
        *o = num / den;
    }
    Ok(())
}

/// Single score component `l_j(y)`, `j >= 1`.
pub fn deconvolution_score(
    y: f64,
    j: usize,
    null: &NullDensity,
    noise: &NoiseDensity,
) -> Result<f64> {
    if j == 0 {
        return Err(Error::IndexOutOfRange {
            index: 0,
            max: usize::MAX,
        });
    }
    let mut out = vec![0.0; j];
    deconvolution_scores(y, null, noise, &mut out)?;
    Ok(out[j - 1])
}

/// Draws `X + ε` with `X ~ f_0`.
#[derive(Debug, Clone, Copy)]
pub struct DeconvolutionNullSampler {
    null: NullDensity,
    noise: NoiseDensity,
}

impl DeconvolutionNullSampler {
    pub fn new(null: NullDensity, noise: NoiseDensity) -> Self {
        Self { null, noise }
    }

    pub fn draw(&self, rng: &mut McRng) -> f64 {
        self.null.sample(rng) + self.noise.sample(rng)
    }
}

impl DataSampler for DeconvolutionNullSampler {
    fn sample(&self, n: usize, rng: &mut McRng) -> Dataset {
        Dataset::Univariate((0..n).map(|_| self.draw(rng)).collect())
    }
}

pub const DEFAULT_MOMENT_DRAWS: usize = 20_000;
pub const DEFAULT_MOMENT_SEED: u64 = 0x6465_636f;

type Matrices = Arc<Result<Vec<Result<NormalizingMatrix>>>>;

/// Deconvolution test parameters plus lazily estimated normalizing matrices.
///
/// The scores have no closed-form covariance. For a series of length `d`,
/// `E_0 l lᵀ` is estimated once by simulation (fixed seed) in dimension `d`
/// and `L_k` is the inverse of its leading `k × k` block. Each `d` has its
/// own estimate, so results never depend on which sample sizes came first.
#[derive(Debug, Clone)]
pub struct DeconvolutionModel {
    null: NullDensity,
    noise: NoiseDensity,
    draws: usize,
    seed: u64,
    cache: Arc<Mutex<BTreeMap<usize, Matrices>>>,
}

impl DeconvolutionModel {
    pub fn new(null: NullDensity, noise: NoiseDensity) -> Result<Self> {
        null.validate()?;
        noise.validate()?;
        Ok(Self {
            null,
            noise,
            draws: DEFAULT_MOMENT_DRAWS,
            seed: DEFAULT_MOMENT_SEED,
            cache: Arc::default(),
        })
    }

    /// Number of null draws and seed for the second-moment estimate.
    pub fn with_moment_draws(mut self, draws: usize, seed: u64) -> Self {
        self.draws = draws;
        self.seed = seed;
        self.cache = Arc::default();
        self
    }

    pub fn null(&self) -> NullDensity {
        self.null
    }

    pub fn noise(&self) -> NoiseDensity {
        self.noise
    }

    fn estimate(&self, d: usize) -> Result<Vec<Result<NormalizingMatrix>>> {
        let sampler = DeconvolutionNullSampler::new(self.null, self.noise);
        let (null, noise) = (self.null, self.noise);
        let basis = (d, move |y: &f64, out: &mut [f64]| {
            if deconvolution_scores(*y, &null, &noise, out).is_err() {
                out.fill(f64::NAN);
            }
        });
        let draw = move |rng: &mut McRng| sampler.draw(rng);
        let (moment, mean) = estimate_second_moment(&draw, &basis, self.draws, self.seed)?;
        check_null_mean(&moment, &mean, self.draws)?;
        // high-degree scores are strongly smoothed by the noise, so large
        // blocks may be singular while the small ones are fine
        Ok((1..=d)
            .map(|k| {
                let block: DMatrix<f64> = moment.view((0, 0), (k, k)).into_owned();
                NormalizingMatrix::from_second_moment(&block, Provenance::EstimatedFromNullSampler)
            })
            .collect())
    }

    fn matrices(&self, d: usize) -> Matrices {
        if let Some(m) = self.cache.lock().expect("cache lock").get(&d) {
            return m.clone();
        }
        // computed without holding the lock: the estimate itself runs on
        // the thread pool, and a racing duplicate gives identical values
        let fresh = Arc::new(self.estimate(d));
        self.cache
            .lock()
            .expect("cache lock")
            .entry(d)
            .or_insert(fresh)
            .clone()
    }

    /// `L_k` for a series of length `d`.
    pub fn normalizing_matrix(&self, k: usize, d: usize) -> Result<NormalizingMatrix> {
        if k == 0 || k > d {
            return Err(Error::IndexOutOfRange { index: k, max: d });
        }
        match self.matrices(d).as_ref() {
            Ok(ls) => ls[k - 1].clone(),
            Err(e) => Err(e.clone()),
        }
    }

    /// Estimate the matrices for dimension `d` ahead of parallel use.
    pub fn prepare(&self, d: usize) {
        self.matrices(d);
    }

    pub(super) fn series(&self, data: &[f64], d: usize) -> Result<Vec<f64>> {
        let n = data.len();
        let mut sums = vec![0.0; d];
        let mut buf = vec![0.0; d];
        for &y in data {
            if !y.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "non-finite observation {y}"
                )));
            }
            deconvolution_scores(y, &self.null, &self.noise, &mut buf)?;
            sums.iter_mut().zip(&buf).for_each(|(s, v)| *s += v);
        }
        let mean = MeanVector::new(sums.into_iter().map(|s| s / n as f64).collect(), n)?;
        let ls = self.matrices(d);
        let ls = ls.as_ref().as_ref().map_err(Clone::clone)?;
        (1..=d)
            .map(|k| {
                let l = ls[k - 1].as_ref().map_err(Clone::clone)?;
                nt_statistic(&mean.truncated(k), l)
            })
            .collect()
    }
}
