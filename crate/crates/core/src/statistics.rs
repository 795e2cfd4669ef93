//! Quadratic-form statistics of Neyman's type.
//!
//! Given per-observation score vectors `l(Y_i) ∈ R^k`, the statistics here
//! are all of the form `n · l̄ L l̄ᵀ` for the mean score `l̄` and a symmetric
//! positive-definite normalizing matrix `L`. With `L = I` this is the
//! simplified (SNT) form, with `L = (E_0 l lᵀ)^{-1}` the NT form, and with
//! estimated scores and a surrogate `L_k` the generalized (GNT) form.

use crate::error::{Error, Result};
use crate::rng::{substream, McRng, Purpose};
use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

/// A score vector function `l = (l_1, ..., l_k)` on observations of type `O`.
pub trait ScoreBasis<O: ?Sized>: Send + Sync {
    fn dim(&self) -> usize;
    /// Writes `l_1(obs), ..., l_k(obs)` into `out` (length `dim()`).
    fn eval(&self, obs: &O, out: &mut [f64]);
}

impl<O: ?Sized, F> ScoreBasis<O> for (usize, F)
where
    F: Fn(&O, &mut [f64]) + Send + Sync,
{
    fn dim(&self) -> usize {
        self.0
    }
    fn eval(&self, obs: &O, out: &mut [f64]) {
        (self.1)(obs, out)
    }
}

/// Draws single observations from a null distribution `P_0`.
pub trait NullSampler<O>: Send + Sync {
    fn draw(&self, rng: &mut McRng) -> O;
}

impl<O, F> NullSampler<O> for F
where
    F: Fn(&mut McRng) -> O + Send + Sync,
{
    fn draw(&self, rng: &mut McRng) -> O {
        self(rng)
    }
}

/// Sample mean `l̄` of the score vectors together with the sample size.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanVector {
    means: Vec<f64>,
    n: usize,
}

impl MeanVector {
    pub fn new(means: Vec<f64>, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptySample);
        }
        if let Some(j) = means.iter().position(|m| !m.is_finite()) {
            return Err(Error::NonFiniteScore {
                observation: 0,
                component: j + 1,
            });
        }
        Ok(Self { means, n })
    }

    /// Mean of per-observation rows; every row must have the same length.
    pub fn from_scores<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let first = rows.first().ok_or(Error::EmptySample)?;
        let k = first.as_ref().len();
        let mut sums = vec![0.0; k];
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != k {
                return Err(Error::DimensionMismatch {
                    expected: k,
                    got: row.len(),
                });
            }
            for (j, (s, v)) in sums.iter_mut().zip(row).enumerate() {
                if !v.is_finite() {
                    return Err(Error::NonFiniteScore {
                        observation: i + 1,
                        component: j + 1,
                    });
                }
                *s += v;
            }
        }
        let n = rows.len();
        Ok(Self {
            means: sums.into_iter().map(|s| s / n as f64).collect(),
            n,
        })
    }

    /// Evaluate `basis` on every observation and average.
    pub fn from_observations<O, B: ScoreBasis<O> + ?Sized>(
        basis: &B,
        observations: &[O],
    ) -> Result<Self> {
        if observations.is_empty() {
            return Err(Error::EmptySample);
        }
        let k = basis.dim();
        let mut sums = vec![0.0; k];
        let mut buf = vec![0.0; k];
        for (i, obs) in observations.iter().enumerate() {
            basis.eval(obs, &mut buf);
            for (j, (s, v)) in sums.iter_mut().zip(&buf).enumerate() {
                if !v.is_finite() {
                    return Err(Error::NonFiniteScore {
                        observation: i + 1,
                        component: j + 1,
                    });
                }
                *s += v;
            }
        }
        let n = observations.len();
        Ok(Self {
            means: sums.into_iter().map(|s| s / n as f64).collect(),
            n,
        })
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.means.len()
    }

    /// First `k` components.
    pub fn truncated(&self, k: usize) -> Self {
        Self {
            means: self.means[..k.min(self.means.len())].to_vec(),
            n: self.n,
        }
    }
}

/// `T_m = Σ_{j<=m} n l̄_j²` for `m = 1..=k`.
pub fn snt_series(mean: &MeanVector) -> Vec<f64> {
    let n = mean.n as f64;
    let mut acc = 0.0;
    mean.means
        .iter()
        .map(|m| {
            let z = n.sqrt() * m;
            acc += z * z;
            acc
        })
        .collect()
}

/// The SNT series from raw per-observation score rows.
pub fn snt_statistic<R: AsRef<[f64]>>(scores: &[R]) -> Result<Vec<f64>> {
    let first = scores.first().ok_or(Error::EmptySample)?;
    let k = first.as_ref().len();
    let mut sums = vec![0.0; k];
    for (i, row) in scores.iter().enumerate() {
        let row = row.as_ref();
        if row.len() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                got: row.len(),
            });
        }
        for (j, (s, v)) in sums.iter_mut().zip(row).enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFiniteScore {
                    observation: i + 1,
                    component: j + 1,
                });
            }
            *s += v;
        }
    }
    let root_n = (scores.len() as f64).sqrt();
    let mut acc = 0.0;
    Ok(sums
        .into_iter()
        .map(|s| {
            let z = s / root_n;
            acc += z * z;
            acc
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    AnalyticIdentity,
    EstimatedFromNullSampler,
    UserSupplied,
}

/// Relative tolerance for the symmetry check.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Largest admissible condition number when inverting a second-moment matrix.
pub const MAX_CONDITION: f64 = 1e10;

/// Symmetric positive-definite `L` with its eigenvalues in non-increasing order.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizingMatrix {
    entries: DMatrix<f64>,
    eigenvalues: Vec<f64>,
    provenance: Provenance,
}

impl NormalizingMatrix {
    pub fn identity(k: usize) -> Self {
        Self {
            entries: DMatrix::identity(k, k),
            eigenvalues: vec![1.0; k],
            provenance: Provenance::AnalyticIdentity,
        }
    }

    /// Validate symmetry and positive definiteness of a given matrix.
    pub fn new(entries: DMatrix<f64>, provenance: Provenance) -> Result<Self> {
        let eigenvalues = ordered_eigenvalues(&entries)?;
        let smallest = eigenvalues.last().copied().unwrap_or(0.0);
        if !(smallest > 0.0) {
            return Err(Error::NotPositiveDefinite(smallest));
        }
        Ok(Self {
            entries,
            eigenvalues,
            provenance,
        })
    }

    /// `L = M^{-1}` for a second-moment matrix `M`, inverted through its
    /// eigendecomposition. Fails when `λ_min(M) < λ_max(M) / 1e10`.
    pub fn from_second_moment(moment: &DMatrix<f64>, provenance: Provenance) -> Result<Self> {
        check_symmetric(moment)?;
        let eig = SymmetricEigen::new(moment.clone());
        let largest = eig
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        let smallest = eig
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        if !(largest > 0.0) || !(smallest >= largest / MAX_CONDITION) {
            return Err(Error::Singular { smallest, largest });
        }
        let inv_diag = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l));
        let inv = &eig.eigenvectors * inv_diag * eig.eigenvectors.transpose();
        let sym = (&inv + inv.transpose()) * 0.5;
        let mut eigenvalues: Vec<f64> = eig.eigenvalues.iter().map(|l| 1.0 / l).collect();
        eigenvalues.sort_by(|a, b| b.total_cmp(a));
        Ok(Self {
            entries: sym,
            eigenvalues,
            provenance,
        })
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// `λ_1 >= ... >= λ_k`.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn smallest_eigenvalue(&self) -> f64 {
        *self.eigenvalues.last().expect("non-empty matrix")
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    /// `c · L` for `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "scale {c} must be positive"
            )));
        }
        Ok(Self {
            entries: &self.entries * c,
            eigenvalues: self.eigenvalues.iter().map(|l| l * c).collect(),
            provenance: self.provenance,
        })
    }
}

fn check_symmetric(m: &DMatrix<f64>) -> Result<()> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            got: m.ncols(),
        });
    }
    let scale = m
        .iter()
        .fold(0.0f64, |acc, v| acc.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            let gap = (m[(i, j)] - m[(j, i)]).abs();
            if !(gap <= SYMMETRY_TOL * scale) {
                return Err(Error::NotSymmetric {
                    row: i,
                    col: j,
                    gap,
                });
            }
        }
    }
    Ok(())
}

/// Eigenvalues of a symmetric matrix sorted non-increasing.
pub fn ordered_eigenvalues(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    check_symmetric(m)?;
    let mut ev: Vec<f64> = SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .copied()
        .collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    Ok(ev)
}

/// `x L xᵀ` accumulated in row-major order.
fn quadratic_form(x: &[f64], l: &DMatrix<f64>) -> f64 {
    let mut total = 0.0;
    for (i, xi) in x.iter().enumerate() {
        let mut row = 0.0;
        for (j, xj) in x.iter().enumerate() {
            row += l[(i, j)] * xj;
        }
        total += xi * row;
    }
    total
}

/// NT statistic `n · l̄ L l̄ᵀ`.
pub fn nt_statistic(mean: &MeanVector, l: &NormalizingMatrix) -> Result<f64> {
    if mean.dim() != l.dim() {
        return Err(Error::DimensionMismatch {
            expected: l.dim(),
            got: mean.dim(),
        });
    }
    if !(l.smallest_eigenvalue() > 0.0) {
        return Err(Error::NotPositiveDefinite(l.smallest_eigenvalue()));
    }
    Ok(mean.n() as f64 * quadratic_form(mean.means(), l.entries()))
}

/// GNT statistic from estimated per-observation scores `l*_i`.
///
/// Evaluated as `n · l̄* L_k l̄*ᵀ`, the same arithmetic as [`nt_statistic`], so
/// plugging in exact scores reproduces the NT value bit for bit.
pub fn gnt_statistic<R: AsRef<[f64]>>(
    estimated_scores: &[R],
    l: &NormalizingMatrix,
) -> Result<f64> {
    let mean = MeanVector::from_scores(estimated_scores)?;
    nt_statistic(&mean, l)
}

/// Minimum draws accepted by [`estimate_normalizing_matrix`] is `10 k²`.
pub fn required_draws(k: usize) -> usize {
    10 * k * k
}

const BLOCK: usize = 4096;

/// Monte Carlo estimate of `E_0[l(Y) l(Y)ᵀ]` and of `E_0 l(Y)`.
///
/// Draws are split into fixed blocks, each with its own substream, and the
/// block sums are reduced in block order: the result is the same for any
/// number of worker threads.
pub fn estimate_second_moment<O, S, B>(
    sampler: &S,
    basis: &B,
    draws: usize,
    seed: u64,
) -> Result<(DMatrix<f64>, Vec<f64>)>
where
    S: NullSampler<O> + ?Sized,
    B: ScoreBasis<O> + ?Sized,
{
    let k = basis.dim();
    if draws < required_draws(k) || draws < 2 {
        return Err(Error::TooFewDraws {
            draws,
            required: required_draws(k).max(2),
        });
    }
    let blocks = draws.div_ceil(BLOCK);
    let partials: Vec<Result<(Vec<f64>, Vec<f64>)>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = substream(seed, Purpose::NormalizingMatrix, b as u64);
            let count = BLOCK.min(draws - b * BLOCK);
            let mut sum = vec![0.0; k];
            let mut outer = vec![0.0; k * k];
            let mut buf = vec![0.0; k];
            for i in 0..count {
                let obs = sampler.draw(&mut rng);
                basis.eval(&obs, &mut buf);
                if let Some(j) = buf.iter().position(|v| !v.is_finite()) {
                    return Err(Error::NonFiniteScore {
                        observation: b * BLOCK + i + 1,
                        component: j + 1,
                    });
                }
                for r in 0..k {
                    sum[r] += buf[r];
                    for c in r..k {
                        outer[r * k + c] += buf[r] * buf[c];
                    }
                }
            }
            Ok((sum, outer))
        })
        .collect();
    let mut sum = vec![0.0; k];
    let mut outer = vec![0.0; k * k];
    for part in partials {
        let (s, o) = part?;
        sum.iter_mut().zip(&s).for_each(|(a, b)| *a += b);
        outer.iter_mut().zip(&o).for_each(|(a, b)| *a += b);
    }
    let d = draws as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / d).collect();
    let moment = DMatrix::from_fn(k, k, |r, c| {
        let (a, b) = if r <= c { (r, c) } else { (c, r) };
        outer[a * k + b] / d
    });
    Ok((moment, mean))
}

/// Standard errors allowed for `|E_0 l_j|` in the null-mean check.
pub const NULL_MEAN_GATE: f64 = 4.0;

/// `L = (E_0[l lᵀ])^{-1}` estimated from `draws` null observations.
///
/// Rejects basis/sampler pairs whose empirical score mean sits more than
/// four standard errors from zero, and second-moment matrices that are
/// singular up to the condition threshold.
pub fn estimate_normalizing_matrix<O, S, B>(
    sampler: &S,
    basis: &B,
    draws: usize,
    seed: u64,
) -> Result<NormalizingMatrix>
where
    S: NullSampler<O> + ?Sized,
    B: ScoreBasis<O> + ?Sized,
{
    let (moment, mean) = estimate_second_moment(sampler, basis, draws, seed)?;
    check_null_mean(&moment, &mean, draws)?;
    NormalizingMatrix::from_second_moment(&moment, Provenance::EstimatedFromNullSampler)
}

pub(crate) fn check_null_mean(moment: &DMatrix<f64>, mean: &[f64], draws: usize) -> Result<()> {
    for (j, &m) in mean.iter().enumerate() {
        let var = (moment[(j, j)] - m * m).max(0.0) * draws as f64 / (draws as f64 - 1.0);
        let se = (var / draws as f64).sqrt();
        if !(m.abs() <= NULL_MEAN_GATE * se) {
            return Err(Error::NonZeroNullMean {
                component: j + 1,
                mean: m,
                standard_error: se,
            });
        }
    }
    Ok(())
}
