//! Ready-to-run data-driven tests.
//!
//! A [`TestSpec`] bundles the score construction for one testing problem with
//! a penalty schedule and a dimension budget. [`TestSpec::evaluate`] turns a
//! dataset into the statistic series `T_1..T_{d(n)}` and applies the selection
//! rule; [`TestSpec::null_sampler`] provides data under the null hypothesis
//! for Monte Carlo calibration.

mod alternative;
mod composite;
mod deconvolution;
mod rank;
mod uniformity;

pub use alternative::{AlternativeSpec, ContaminatedUniform, NoisyLinearPairs};
pub use composite::{
    composite_score_statistic, composite_series, information, r_matrix, CompositeModel, Family,
    FamilySampler, Information, InformationMethod, RForm, FALLBACK_DRAWS,
};
pub use deconvolution::{
    deconvolution_score, deconvolution_scores, DeconvolutionModel, DeconvolutionNullSampler,
    NoiseDensity, NullDensity, DEFAULT_MOMENT_DRAWS, DEFAULT_MOMENT_SEED,
};
pub use rank::{average_ranks, independence_rank_test, rank_transform, IndependentPairs};
pub use uniformity::{uniformity_test, UniformSampler};

use crate::basis::OrthonormalBasis;
use crate::error::{Error, Result};
use crate::rng::McRng;
use crate::selection::{select_dimension, DimensionBudget, PenaltySchedule, SelectionOutcome};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

/// Observations fed to a test.
#[derive(Debug, Clone, PartialEq)]
pub enum Dataset {
    Univariate(Vec<f64>),
    Pairs(Vec<(f64, f64)>),
}

impl Dataset {
    pub fn len(&self) -> usize {
        match self {
            Dataset::Univariate(v) => v.len(),
            Dataset::Pairs(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn as_univariate(&self) -> Result<&[f64]> {
        match self {
            Dataset::Univariate(v) => Ok(v),
            Dataset::Pairs(_) => Err(Error::InvalidArgument(
                "expected univariate data, got pairs".into(),
            )),
        }
    }

    pub fn as_pairs(&self) -> Result<&[(f64, f64)]> {
        match self {
            Dataset::Pairs(v) => Ok(v),
            Dataset::Univariate(_) => Err(Error::InvalidArgument(
                "expected (x, y) pairs, got univariate data".into(),
            )),
        }
    }
}

/// Generates whole datasets of a given size.
pub trait DataSampler: Send + Sync {
    fn sample(&self, n: usize, rng: &mut McRng) -> Dataset;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    Uniformity,
    IndependenceRank,
    DeconvolutionSimple,
    CompositeParametric,
}

impl fmt::Display for TestKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TestKind::Uniformity => "uniformity",
            TestKind::IndependenceRank => "independence",
            TestKind::DeconvolutionSimple => "deconvolution",
            TestKind::CompositeParametric => "composite",
        })
    }
}

impl FromStr for TestKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniformity" => Ok(TestKind::Uniformity),
            "independence" | "independence_rank" => Ok(TestKind::IndependenceRank),
            "deconvolution" | "deconvolution_simple" => Ok(TestKind::DeconvolutionSimple),
            "composite" | "composite_parametric" => Ok(TestKind::CompositeParametric),
            other => Err(Error::InvalidArgument(format!(
                "unknown test kind `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
enum Model {
    Plain,
    Deconvolution(Arc<DeconvolutionModel>),
    Composite(CompositeModel),
}

/// One concrete data-driven test.
#[derive(Debug, Clone)]
pub struct TestSpec {
    kind: TestKind,
    basis: OrthonormalBasis,
    penalty: PenaltySchedule,
    budget: DimensionBudget,
    model: Model,
}

/// Selection result of a single test evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub n: usize,
    /// `d(n)` used for the series.
    pub dimension: usize,
    pub selection: SelectionOutcome,
    pub warnings: Vec<String>,
}

impl TestOutcome {
    pub fn selected(&self) -> usize {
        self.selection.selected
    }

    pub fn statistic(&self) -> f64 {
        self.selection.statistic
    }
}

impl TestSpec {
    fn with_model(kind: TestKind, model: Model) -> Self {
        let budget = DimensionBudget::default();
        Self {
            kind,
            basis: OrthonormalBasis::legendre(budget.cap),
            penalty: PenaltySchedule::Schwarz,
            budget,
            model,
        }
    }

    /// Neyman's smooth test of uniformity on [0, 1] with Legendre scores.
    pub fn uniformity() -> Self {
        Self::with_model(TestKind::Uniformity, Model::Plain)
    }

    /// Rank test of independence with scores `b_j(u) b_j(v)`.
    pub fn independence() -> Self {
        Self::with_model(TestKind::IndependenceRank, Model::Plain)
    }

    /// Simple-hypothesis test for the signal density under additive noise.
    pub fn deconvolution(model: DeconvolutionModel) -> Self {
        Self::with_model(
            TestKind::DeconvolutionSimple,
            Model::Deconvolution(Arc::new(model)),
        )
    }

    /// Composite parametric hypothesis with estimated nuisance parameters.
    pub fn composite(model: CompositeModel) -> Self {
        Self::with_model(TestKind::CompositeParametric, Model::Composite(model))
    }

    pub fn with_penalty(mut self, penalty: PenaltySchedule) -> Self {
        self.penalty = penalty;
        self
    }

    /// Replace the budget; the cap may not exceed the basis degree.
    pub fn with_budget(mut self, budget: DimensionBudget) -> Result<Self> {
        if budget.cap > self.basis.max_degree() {
            if self.basis.kind() == crate::basis::BasisKind::LegendreShifted {
                self.basis = OrthonormalBasis::legendre(budget.cap);
            } else {
                return Err(Error::InvalidArgument(format!(
                    "budget cap {} exceeds basis degree {}",
                    budget.cap,
                    self.basis.max_degree()
                )));
            }
        }
        self.budget = budget;
        Ok(self)
    }

    pub fn kind(&self) -> TestKind {
        self.kind
    }

    pub fn basis(&self) -> &OrthonormalBasis {
        &self.basis
    }

    pub fn penalty(&self) -> &PenaltySchedule {
        &self.penalty
    }

    pub fn budget(&self) -> &DimensionBudget {
        &self.budget
    }

    pub fn composite_model(&self) -> Option<&CompositeModel> {
        match &self.model {
            Model::Composite(m) => Some(m),
            _ => None,
        }
    }

    /// Copy of a composite spec whose null sampler draws at `beta`.
    pub fn with_sampling_beta(&self, beta: Vec<f64>) -> Result<Self> {
        match &self.model {
            Model::Composite(m) => {
                let mut spec = self.clone();
                spec.model = Model::Composite(m.clone().with_sampling_beta(beta)?);
                Ok(spec)
            }
            _ => Err(Error::InvalidArgument(
                "sampling parameters apply to composite tests only".into(),
            )),
        }
    }

    /// The statistic series `T_1, ..., T_{d(n)}` for `data`.
    pub fn series(&self, data: &Dataset) -> Result<(Vec<f64>, Vec<String>)> {
        let n = data.len();
        if n == 0 {
            return Err(Error::EmptySample);
        }
        let d = self.budget.d(n as u64);
        match (&self.model, self.kind) {
            (Model::Plain, TestKind::Uniformity) => Ok((
                uniformity::series(&self.basis, data.as_univariate()?, d)?,
                Vec::new(),
            )),
            (Model::Plain, TestKind::IndependenceRank) => {
                rank::series(&self.basis, data.as_pairs()?, d)
            }
            (Model::Deconvolution(m), _) => Ok((m.series(data.as_univariate()?, d)?, Vec::new())),
            (Model::Composite(m), _) => {
                Ok((composite_series(data.as_univariate()?, m, d)?, Vec::new()))
            }
            _ => unreachable!("test kind and model are set together"),
        }
    }

    /// Warm per-dimension caches for sample size `n` before parallel use.
    pub fn prepare(&self, n: usize) {
        if let Model::Deconvolution(m) = &self.model {
            m.prepare(self.budget.d(n as u64));
        }
    }

    pub fn evaluate(&self, data: &Dataset) -> Result<TestOutcome> {
        let (series, warnings) = self.series(data)?;
        let n = data.len();
        let selection = select_dimension(&series, &self.penalty, n as u64)?;
        Ok(TestOutcome {
            n,
            dimension: series.len(),
            selection,
            warnings,
        })
    }

    /// Data generator for the null hypothesis of this test.
    pub fn null_sampler(&self) -> Arc<dyn DataSampler> {
        match (&self.model, self.kind) {
            (Model::Plain, TestKind::Uniformity) => Arc::new(UniformSampler),
            (Model::Plain, _) => Arc::new(IndependentPairs),
            (Model::Deconvolution(m), _) => {
                Arc::new(DeconvolutionNullSampler::new(m.null(), m.noise()))
            }
            (Model::Composite(m), _) => Arc::new(FamilySampler::new(m.family(), m.sampling_beta())),
        }
    }
}
