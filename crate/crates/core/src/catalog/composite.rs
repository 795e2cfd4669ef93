//! Composite parametric null `f ∈ {f(·; β)}` with nuisance `β ∈ R^q`.
//!
//! Scores `b_j(F(X; β̂))` are taken at the maximum likelihood fit and the
//! quadratic form uses `I + R(β̂)` with
//! `R = I_βᵀ (I_ββ - I_β I_βᵀ)^{-1} I_β`, the inverse of the asymptotic
//! covariance `I - I_βᵀ I_ββ^{-1} I_β` of the estimated scores.

use super::{DataSampler, Dataset};
use crate::basis::shifted_legendre_into;
use crate::error::{Error, Result};
use crate::quadrature::GaussLegendre;
use crate::rng::{substream, McRng, Purpose};
use crate::statistics::{gnt_statistic, NormalizingMatrix, Provenance};
use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use std::f64::consts::{FRAC_1_SQRT_2, PI};

/// Parametric null families with closed-form maximum likelihood fits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Family {
    /// `N(μ, sd²)` with known `sd`; `β = (μ)`.
    NormalLocation { sd: f64 },
    /// `N(μ, σ²)`; `β = (μ, σ)`.
    NormalLocationScale,
    /// Rate `λ`; `β = (λ)`.
    Exponential,
    /// Fully specified `N(mean, sd²)`, no nuisance parameter.
    FixedNormal { mean: f64, sd: f64 },
}

fn phi(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

fn big_phi(z: f64) -> f64 {
    0.5 * erfc(-z * FRAC_1_SQRT_2)
}

impl Family {
    pub fn q(&self) -> usize {
        match self {
            Family::NormalLocation { .. } | Family::Exponential => 1,
            Family::NormalLocationScale => 2,
            Family::FixedNormal { .. } => 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Family::NormalLocation { sd } => sd.is_finite() && sd > 0.0,
            Family::FixedNormal { mean, sd } => mean.is_finite() && sd.is_finite() && sd > 0.0,
            _ => true,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid family {self:?}")))
        }
    }

    /// `(location, scale)` of a normal member.
    fn normal_params(&self, beta: &[f64]) -> (f64, f64) {
        match *self {
            Family::NormalLocation { sd } => (beta[0], sd),
            Family::NormalLocationScale => (beta[0], beta[1]),
            Family::FixedNormal { mean, sd } => (mean, sd),
            Family::Exponential => unreachable!(),
        }
    }

    pub fn check_beta(&self, beta: &[f64]) -> Result<()> {
        if beta.len() != self.q() {
            return Err(Error::DimensionMismatch {
                expected: self.q(),
                got: beta.len(),
            });
        }
        let ok = beta.iter().all(|b| b.is_finite())
            && match self {
                Family::NormalLocationScale => beta[1] > 0.0,
                Family::Exponential => beta[0] > 0.0,
                _ => true,
            };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "parameter {beta:?} outside the family {self:?}"
            )))
        }
    }

    pub fn reference_beta(&self) -> Vec<f64> {
        match self {
            Family::NormalLocation { .. } => vec![0.0],
            Family::NormalLocationScale => vec![0.0, 1.0],
            Family::Exponential => vec![1.0],
            Family::FixedNormal { .. } => vec![],
        }
    }

    pub fn cdf(&self, x: f64, beta: &[f64]) -> f64 {
        match self {
            Family::Exponential => {
                if x <= 0.0 {
                    0.0
                } else {
                    -(-beta[0] * x).exp_m1()
                }
            }
            _ => {
                let (m, s) = self.normal_params(beta);
                big_phi((x - m) / s)
            }
        }
    }

    pub fn log_density(&self, x: f64, beta: &[f64]) -> f64 {
        match self {
            Family::Exponential => {
                if x < 0.0 {
                    f64::NEG_INFINITY
                } else {
                    beta[0].ln() - beta[0] * x
                }
            }
            _ => {
                let (m, s) = self.normal_params(beta);
                let z = (x - m) / s;
                -0.5 * z * z - s.ln() - 0.5 * (2.0 * PI).ln()
            }
        }
    }

    pub fn sample(&self, beta: &[f64], rng: &mut McRng) -> f64 {
        match self {
            Family::Exponential => -(1.0 - rng.random::<f64>()).ln() / beta[0],
            _ => {
                let (m, s) = self.normal_params(beta);
                m + s * rng.sample::<f64, _>(StandardNormal)
            }
        }
    }

    /// Closed-form maximum likelihood estimate.
    pub fn fit(&self, data: &[f64]) -> Result<Vec<f64>> {
        if data.is_empty() {
            return Err(Error::EmptySample);
        }
        if let Some(x) = data.iter().find(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "non-finite observation {x}"
            )));
        }
        let n = data.len() as f64;
        let mean = data.iter().sum::<f64>() / n;
        let beta = match self {
            Family::NormalLocation { .. } => vec![mean],
            Family::NormalLocationScale => {
                let var = data.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
                if !(var > 0.0) {
                    return Err(Error::MleFailure("sample variance is zero".into()));
                }
                vec![mean, var.sqrt()]
            }
            Family::Exponential => {
                if data.iter().any(|&x| x < 0.0) {
                    return Err(Error::MleFailure(
                        "negative observation under an exponential family".into(),
                    ));
                }
                if !(mean > 0.0) {
                    return Err(Error::MleFailure("sample mean is zero".into()));
                }
                vec![1.0 / mean]
            }
            Family::FixedNormal { .. } => vec![],
        };
        Ok(beta)
    }

    /// Quadrature nodes and weights for `E_β g(X)`.
    fn expectation_nodes(&self, beta: &[f64]) -> Vec<(f64, f64)> {
        let gl = GaussLegendre::new(16);
        let mut nodes = Vec::new();
        match self {
            Family::Exponential => {
                // t = λx on [0, 45]
                for p in 0..45 {
                    for (t, w) in gl.on_interval(p as f64, p as f64 + 1.0) {
                        nodes.push((t / beta[0], w * (-t).exp()));
                    }
                }
            }
            _ => {
                let (m, s) = self.normal_params(beta);
                for p in -10..10 {
                    for (z, w) in gl.on_interval(p as f64, p as f64 + 1.0) {
                        nodes.push((m + s * z, w * phi(z)));
                    }
                }
            }
        }
        nodes
    }
}

/// How the information blocks are computed.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InformationMethod {
    #[default]
    Quadrature,
    MonteCarlo {
        draws: usize,
        seed: u64,
    },
}

pub const FALLBACK_DRAWS: usize = 100_000;

/// Which middle factor `R(β)` uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RForm {
    /// `I_βᵀ (I_ββ - I_β I_βᵀ)^{-1} I_β`.
    #[default]
    Inverse,
    /// `I_βᵀ (I_ββ - I_β I_βᵀ) I_β`, no inverse.
    AsPrinted,
}

/// `I_β` (q × k) and `I_ββ` (q × q) at some β.
#[derive(Debug, Clone, PartialEq)]
pub struct Information {
    pub i_beta: DMatrix<f64>,
    pub i_beta_beta: DMatrix<f64>,
}

fn step(b: f64, rel: f64) -> f64 {
    rel * b.abs().max(1.0)
}

/// Accumulates `-∂_β b_j(F(x; β))` and `-∂²_β log f(x; β)` at one `x`.
fn add_derivatives(
    family: &Family,
    beta: &[f64],
    x: f64,
    w: f64,
    k: usize,
    info: &mut Information,
    buf: &mut [Vec<f64>; 2],
) {
    let q = beta.len();
    let mut b = beta.to_vec();
    for t in 0..q {
        let h = step(beta[t], 1e-5);
        b[t] = beta[t] + h;
        shifted_legendre_into(family.cdf(x, &b), &mut buf[0][..k]);
        b[t] = beta[t] - h;
        shifted_legendre_into(family.cdf(x, &b), &mut buf[1][..k]);
        b[t] = beta[t];
        for j in 0..k {
            info.i_beta[(t, j)] -= w * (buf[0][j] - buf[1][j]) / (2.0 * h);
        }
    }
    let lf = |b: &[f64]| family.log_density(x, b);
    for t in 0..q {
        let ht = step(beta[t], 1e-4);
        for u in t..q {
            let hu = step(beta[u], 1e-4);
            let d2 = if t == u {
                b[t] = beta[t] + ht;
                let fp = lf(&b);
                b[t] = beta[t] - ht;
                let fm = lf(&b);
                b[t] = beta[t];
                (fp - 2.0 * lf(&b) + fm) / (ht * ht)
            } else {
                let mut corner = |st: f64, su: f64| {
                    b[t] = beta[t] + st * ht;
                    b[u] = beta[u] + su * hu;
                    let v = lf(&b);
                    b[t] = beta[t];
                    b[u] = beta[u];
                    v
                };
                (corner(1.0, 1.0) - corner(1.0, -1.0) - corner(-1.0, 1.0) + corner(-1.0, -1.0))
                    / (4.0 * ht * hu)
            };
            info.i_beta_beta[(t, u)] -= w * d2;
            if t != u {
                info.i_beta_beta[(u, t)] -= w * d2;
            }
        }
    }
}

/// Information blocks for the first `k` score components at `beta`.
pub fn information(
    family: &Family,
    beta: &[f64],
    k: usize,
    method: InformationMethod,
) -> Result<Information> {
    family.check_beta(beta)?;
    let q = family.q();
    let mut info = Information {
        i_beta: DMatrix::zeros(q, k),
        i_beta_beta: DMatrix::zeros(q, q),
    };
    if q == 0 {
        return Ok(info);
    }
    let mut buf = [vec![0.0; k], vec![0.0; k]];
    match method {
        InformationMethod::Quadrature => {
            for (x, w) in family.expectation_nodes(beta) {
                add_derivatives(family, beta, x, w, k, &mut info, &mut buf);
            }
        }
        InformationMethod::MonteCarlo { draws, seed } => {
            if draws < 2 {
                return Err(Error::TooFewDraws { draws, required: 2 });
            }
            let mut rng = substream(seed, Purpose::NormalizingMatrix, 0);
            let w = 1.0 / draws as f64;
            for _ in 0..draws {
                let x = family.sample(beta, &mut rng);
                add_derivatives(family, beta, x, w, k, &mut info, &mut buf);
            }
        }
    }
    if info
        .i_beta
        .iter()
        .chain(info.i_beta_beta.iter())
        .any(|v| !v.is_finite())
    {
        return Err(Error::SingularInformation);
    }
    Ok(info)
}

/// `R(β)` restricted to the first `k` components.
pub fn r_matrix(info: &Information, k: usize, form: RForm) -> Result<DMatrix<f64>> {
    let q = info.i_beta.nrows();
    if k > info.i_beta.ncols() {
        return Err(Error::DimensionMismatch {
            expected: info.i_beta.ncols(),
            got: k,
        });
    }
    if q == 0 {
        return Ok(DMatrix::zeros(k, k));
    }
    let a = info.i_beta.columns(0, k).into_owned();
    let c = &info.i_beta_beta - &a * a.transpose();
    let c = (&c + c.transpose()) * 0.5;
    let eig = SymmetricEigen::new(c.clone());
    let min = eig.eigenvalues.min();
    let max = eig.eigenvalues.max();
    if !(min > 1e-10 * max.abs().max(1e-300)) {
        return Err(Error::SingularInformation);
    }
    let middle = match form {
        RForm::Inverse => {
            let inv = DMatrix::from_diagonal(&eig.eigenvalues.map(|v| 1.0 / v));
            &eig.eigenvectors * inv * eig.eigenvectors.transpose()
        }
        RForm::AsPrinted => c,
    };
    Ok(a.transpose() * middle * a)
}

fn estimated_scores(data: &[f64], family: &Family, beta: &[f64], k: usize) -> Vec<Vec<f64>> {
    data.iter()
        .map(|&x| {
            let mut row = vec![0.0; k];
            shifted_legendre_into(family.cdf(x, beta), &mut row);
            row
        })
        .collect()
}

fn w_from(rows: &[Vec<f64>], info: &Information, k: usize, form: RForm) -> Result<f64> {
    let r = r_matrix(info, k, form)?;
    let m = DMatrix::identity(k, k) + r;
    let m = (&m + m.transpose()) * 0.5;
    let l = NormalizingMatrix::new(m, Provenance::UserSupplied)?;
    let truncated: Vec<&[f64]> = rows.iter().map(|r| &r[..k]).collect();
    gnt_statistic(&truncated, &l)
}

/// `W_k(β̂) = n Yᵀ (I + R(β̂)) Y` with `Y = n^{-1} Σ b(F(X_i; β̂))`.
pub fn composite_score_statistic(
    data: &[f64],
    family: &Family,
    k: usize,
    beta_hat: &[f64],
) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptySample);
    }
    let info = information(family, beta_hat, k, InformationMethod::Quadrature)?;
    w_from(
        &estimated_scores(data, family, beta_hat, k),
        &info,
        k,
        RForm::Inverse,
    )
}

/// Composite test settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositeModel {
    pub family: Family,
    #[serde(default)]
    pub r_form: RForm,
    #[serde(default)]
    pub information: InformationMethod,
    /// Parameter used by the null sampler; the family reference point if unset.
    #[serde(default)]
    pub sampling_beta: Option<Vec<f64>>,
}

impl CompositeModel {
    pub fn new(family: Family) -> Result<Self> {
        family.validate()?;
        Ok(Self {
            family,
            r_form: RForm::Inverse,
            information: InformationMethod::Quadrature,
            sampling_beta: None,
        })
    }

    pub fn with_r_form(mut self, form: RForm) -> Self {
        self.r_form = form;
        self
    }

    pub fn with_information(mut self, method: InformationMethod) -> Self {
        self.information = method;
        self
    }

    pub fn with_sampling_beta(mut self, beta: Vec<f64>) -> Result<Self> {
        self.family.check_beta(&beta)?;
        self.sampling_beta = Some(beta);
        Ok(self)
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn sampling_beta(&self) -> Vec<f64> {
        self.sampling_beta
            .clone()
            .unwrap_or_else(|| self.family.reference_beta())
    }
}

/// `W_1, ..., W_d` from one fit and one set of information blocks.
pub fn composite_series(data: &[f64], model: &CompositeModel, d: usize) -> Result<Vec<f64>> {
    if data.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "composite test needs n >= 2, got {}",
            data.len()
        )));
    }
    let beta = model.family.fit(data)?;
    let info = information(&model.family, &beta, d, model.information)?;
    let rows = estimated_scores(data, &model.family, &beta, d);
    (1..=d)
        .map(|k| w_from(&rows, &info, k, model.r_form))
        .collect()
}

/// i.i.d. draws from one family member.
#[derive(Debug, Clone)]
pub struct FamilySampler {
    family: Family,
    beta: Vec<f64>,
}

impl FamilySampler {
    pub fn new(family: Family, beta: Vec<f64>) -> Self {
        Self { family, beta }
    }
}

impl DataSampler for FamilySampler {
    fn sample(&self, n: usize, rng: &mut McRng) -> Dataset {
        Dataset::Univariate(
            (0..n)
                .map(|_| self.family.sample(&self.beta, rng))
                .collect(),
        )
    }
}
