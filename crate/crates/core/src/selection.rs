//! Penalized choice of the model dimension.
//!
//! `S = min{k <= d(n) : T_k - π(k,n) >= T_j - π(j,n) for all j <= d(n)}`,
//! plus finite-grid checks of the contracts a penalty schedule must satisfy
//! for the data-driven statistic `T_S` to behave.

use crate::basis::sup_norm_bound;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

/// Dimension penalty `π(k, n)`.
#[derive(Debug, Clone, PartialEq)]
pub enum PenaltySchedule {
    /// `k log n`
    Schwarz,
    /// `2k`, constant in `n`
    Linear2k,
    /// Tabulated values keyed by `(k, n)`.
    Table(PenaltyTable),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyKind {
    Schwarz,
    Linear2k,
    UserTable,
}

/// Penalty values `π(k, n)` read from a `k,n,pi` table.
///
/// Lookups for an `n` that is not tabulated use the row with the largest
/// tabulated `n' <= n` for the same `k`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PenaltyTable {
    rows: BTreeMap<usize, BTreeMap<u64, f64>>,
}

impl PenaltyTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, k: usize, n: u64, pi: f64) {
        self.rows.entry(k).or_default().insert(n, pi);
    }

    pub fn from_fn(
        ks: impl IntoIterator<Item = usize>,
        ns: &[u64],
        f: impl Fn(usize, u64) -> f64,
    ) -> Self {
        let mut t = Self::new();
        for k in ks {
            for &n in ns {
                t.insert(k, n, f(k, n));
            }
        }
        t
    }

    pub fn len(&self) -> usize {
        self.rows.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn get(&self, k: usize, n: u64) -> Option<f64> {
        self.rows.get(&k)?.range(..=n).next_back().map(|(_, &v)| v)
    }
}

/// `k · ln n`; requires `n >= 2`.
pub fn schwarz_penalty(k: usize, n: u64) -> Result<f64> {
    if n < 2 {
        return Err(Error::InvalidPenalty(format!(
            "Schwarz penalty needs n >= 2, got {n}"
        )));
    }
    Ok(k as f64 * (n as f64).ln())
}

impl PenaltySchedule {
    pub fn kind(&self) -> PenaltyKind {
        match self {
            PenaltySchedule::Schwarz => PenaltyKind::Schwarz,
            PenaltySchedule::Linear2k => PenaltyKind::Linear2k,
            PenaltySchedule::Table(_) => PenaltyKind::UserTable,
        }
    }

    pub fn value(&self, k: usize, n: u64) -> Result<f64> {
        if k == 0 {
            return Err(Error::InvalidPenalty("dimension index starts at 1".into()));
        }
        match self {
            PenaltySchedule::Schwarz => schwarz_penalty(k, n),
            PenaltySchedule::Linear2k => Ok(2.0 * k as f64),
            PenaltySchedule::Table(t) => t.get(k, n).ok_or_else(|| {
                Error::InvalidPenalty(format!("no table entry for k = {k}, n <= {n}"))
            }),
        }
    }

    /// `Δ(k, n) = π(k, n) - π(1, n)`.
    pub fn delta(&self, k: usize, n: u64) -> Result<f64> {
        Ok(self.value(k, n)? - self.value(1, n)?)
    }
}

impl fmt::Display for PenaltySchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PenaltySchedule::Schwarz => write!(f, "schwarz"),
            PenaltySchedule::Linear2k => write!(f, "linear2k"),
            PenaltySchedule::Table(t) => write!(f, "table({} entries)", t.len()),
        }
    }
}

/// Largest admissible model dimension `d(n)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BudgetRule {
    /// `max(2, ⌊n^{1/4}⌋)`
    FourthRoot,
    Fixed(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DimensionBudget {
    pub rule: BudgetRule,
    pub cap: usize,
}

/// Cap of the default budget.
pub const DEFAULT_CAP: usize = 12;

impl Default for DimensionBudget {
    fn default() -> Self {
        Self {
            rule: BudgetRule::FourthRoot,
            cap: DEFAULT_CAP,
        }
    }
}

/// `⌊n^{1/4}⌋` in exact integer arithmetic.
pub fn fourth_root_floor(n: u64) -> u64 {
    let mut r = (n as f64).powf(0.25).floor() as u64;
    while (r + 1).checked_pow(4).is_some_and(|p| p <= n) {
        r += 1;
    }
    while r > 0 && r.checked_pow(4).is_none_or(|p| p > n) {
        r -= 1;
    }
    r
}

impl DimensionBudget {
    pub fn fixed(d: usize) -> Self {
        Self {
            rule: BudgetRule::Fixed(d),
            cap: d,
        }
    }

    pub fn with_cap(mut self, cap: usize) -> Self {
        self.cap = cap;
        self
    }

    pub fn d(&self, n: u64) -> usize {
        let raw = match self.rule {
            BudgetRule::FourthRoot => (fourth_root_floor(n) as usize).max(2),
            BudgetRule::Fixed(d) => d,
        };
        raw.min(self.cap).max(1)
    }
}

/// Result of the selection rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionOutcome {
    /// Selected dimension `S` (1-based).
    pub selected: usize,
    pub series: Vec<f64>,
    pub penalties: Vec<f64>,
    pub penalized: Vec<f64>,
    /// `T_S`
    pub statistic: f64,
}

/// Apply the selection rule to `T_1, ..., T_d` at sample size `n`.
///
/// Ties resolve to the smallest index; the comparison is exact.
pub fn select_dimension(
    series: &[f64],
    penalty: &PenaltySchedule,
    n: u64,
) -> Result<SelectionOutcome> {
    if series.is_empty() {
        return Err(Error::InvalidArgument("empty statistic series".into()));
    }
    let penalties = (1..=series.len())
        .map(|k| penalty.value(k, n))
        .collect::<Result<Vec<_>>>()?;
    let penalized: Vec<f64> = series.iter().zip(&penalties).map(|(t, p)| t - p).collect();
    if let Some(i) = penalized.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinitePenalized(i + 1));
    }
    let mut best = 0;
    for (i, v) in penalized.iter().enumerate().skip(1) {
        if *v > penalized[best] {
            best = i;
        }
    }
    Ok(SelectionOutcome {
        selected: best + 1,
        statistic: series[best],
        series: series.to_vec(),
        penalties,
        penalized,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Pass/fail per condition plus non-fatal warnings.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub checks: Vec<CheckResult>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }

    fn push(&mut self, name: &str, failure: Option<String>, ok: impl Into<String>) {
        self.checks.push(CheckResult {
            name: name.into(),
            passed: failure.is_none(),
            detail: failure.unwrap_or_else(|| ok.into()),
        });
    }
}

pub const CHECK_MONOTONE: &str = "strict_monotonicity_in_k";
pub const CHECK_DIVERGENCE: &str = "divergent_increments";
pub const CHECK_EIGEN_RATIO: &str = "vanishing_penalty_eigenvalue_ratio";
pub const CHECK_SANDWICH: &str = "sandwich";
pub const CHECK_LOWER_RATIO: &str = "vanishing_lower_envelope_ratio";
pub const CHECK_PENALTY_RATIO: &str = "vanishing_penalty_ratio";

fn sorted_grid(grid: &[u64]) -> Vec<u64> {
    let mut g = grid.to_vec();
    g.sort_unstable();
    g.dedup();
    g
}

fn ratio_sup(
    penalty: impl Fn(usize, u64) -> Result<f64>,
    upto: usize,
    n: u64,
    smallest_eigenvalue: &dyn Fn(usize) -> f64,
) -> Result<f64> {
    (1..=upto.max(1)).try_fold(f64::NEG_INFINITY, |acc, k| {
        Ok(acc.max(penalty(k, n)? / (n as f64 * smallest_eigenvalue(k))))
    })
}

fn strictly_decreasing(name: &str, grid: &[u64], values: &[f64]) -> Option<String> {
    for i in 1..values.len() {
        if !(values[i] < values[i - 1]) {
            return Some(format!(
                "{name} does not decrease from n = {} ({}) to n = {} ({})",
                grid[i - 1],
                values[i - 1],
                grid[i],
                values[i]
            ));
        }
    }
    None
}

/// Check a penalty against the selection-rule contract on a grid of `n`.
///
/// `smallest_eigenvalue(k)` supplies `λ_k^{(k)}`, the smallest eigenvalue of
/// the `k`-dimensional normalizing matrix. Limits are checked as trends: the
/// increments `Δ(j, n)` must be non-decreasing along the grid and end strictly
/// above where they start, and `sup_k π(k,n) / (n λ_k^{(k)})` must strictly
/// decrease.
pub fn validate_penalty(
    penalty: &PenaltySchedule,
    budget: &DimensionBudget,
    smallest_eigenvalue: &dyn Fn(usize) -> f64,
    n_grid: &[u64],
) -> ValidationReport {
    let grid = sorted_grid(n_grid);
    let mut report = ValidationReport::default();
    if grid.len() < 3 {
        report.push(
            CHECK_MONOTONE,
            Some(format!(
                "grid needs at least 3 distinct points, got {}",
                grid.len()
            )),
            "",
        );
        return report;
    }

    let monotone = grid.iter().find_map(|&n| {
        let d = budget.d(n);
        let mut prev = match penalty.value(1, n) {
            Ok(v) => v,
            Err(e) => return Some(e.to_string()),
        };
        for k in 2..=d {
            match penalty.value(k, n) {
                Ok(v) if v > prev => prev = v,
                Ok(v) => {
                    return Some(format!(
                        "π({k}, {n}) = {v} is not above π({}, {n}) = {prev}",
                        k - 1
                    ))
                }
                Err(e) => return Some(e.to_string()),
            }
        }
        None
    });
    report.push(
        CHECK_MONOTONE,
        monotone,
        "π(1,n) < π(2,n) < ... < π(d(n),n) on the grid",
    );

    let d_min = budget.d(grid[0]);
    let divergence = (2..=d_min).find_map(|j| {
        let deltas: Vec<f64> = match grid
            .iter()
            .map(|&n| penalty.delta(j, n))
            .collect::<Result<_>>()
        {
            Ok(d) => d,
            Err(e) => return Some(e.to_string()),
        };
        if deltas.windows(2).any(|w| w[1] < w[0]) {
            return Some(format!("Δ({j}, n) decreases along the grid: {deltas:?}"));
        }
        if !(deltas[deltas.len() - 1] > deltas[0]) {
            return Some(format!(
                "Δ({j}, n) does not grow along the grid: {deltas:?}"
            ));
        }
        None
    });
    let divergence = if d_min < 2 {
        Some("budget allows a single dimension; increments are undefined".to_string())
    } else {
        divergence
    };
    report.push(
        CHECK_DIVERGENCE,
        divergence,
        "Δ(j,n) non-decreasing and growing for every j >= 2",
    );

    let ratios: Result<Vec<f64>> = grid
        .iter()
        .map(|&n| {
            ratio_sup(
                |k, n| penalty.value(k, n),
                budget.d(n),
                n,
                smallest_eigenvalue,
            )
        })
        .collect();
    let ratio_failure = match &ratios {
        Ok(r) => strictly_decreasing("sup_k π(k,n)/(n λ_k)", &grid, r),
        Err(e) => Some(e.to_string()),
    };
    report.push(
        CHECK_EIGEN_RATIO,
        ratio_failure,
        format!("{:?}", ratios.unwrap_or_default()),
    );

    for &n in &grid {
        for k in 2..=budget.d(n) {
            if let Ok(delta) = penalty.delta(k, n) {
                if delta < 2.0 * k as f64 {
                    report.warnings.push(format!(
                        "Δ({k}, {n}) = {delta:.4} < 2k = {}: the bounded-selection guarantee does not apply at this n",
                        2 * k
                    ));
                }
            }
        }
    }
    report
}

type Envelope = Arc<dyn Fn(usize, u64) -> f64 + Send + Sync>;
type Growth = Arc<dyn Fn(u64) -> usize + Send + Sync>;

/// Envelopes `s(k,n) <= Δ(k,n) <= t(k,n)` and growth sequences `u_n`, `m_n`.
#[derive(Clone)]
pub struct ProperWeightSpec {
    pub lower: Envelope,
    pub upper: Envelope,
    pub u: Growth,
    pub m: Growth,
}

impl fmt::Debug for ProperWeightSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ProperWeightSpec { .. }")
    }
}

impl ProperWeightSpec {
    pub fn new(
        lower: impl Fn(usize, u64) -> f64 + Send + Sync + 'static,
        upper: impl Fn(usize, u64) -> f64 + Send + Sync + 'static,
        u: impl Fn(u64) -> usize + Send + Sync + 'static,
        m: impl Fn(u64) -> usize + Send + Sync + 'static,
    ) -> Self {
        Self {
            lower: Arc::new(lower),
            upper: Arc::new(upper),
            u: Arc::new(u),
            m: Arc::new(m),
        }
    }

    /// `s(k,n) = sqrt(2k)`, `t(k,n) = sqrt(n) / M(k)` with the Legendre
    /// envelope, and `u_n = m_n = d(n)` for the given budget.
    pub fn prohorov_defaults(budget: DimensionBudget) -> Self {
        Self::new(
            |k, _| (2.0 * k as f64).sqrt(),
            |k, n| (n as f64).sqrt() / sup_norm_bound(k),
            move |n| budget.d(n),
            move |n| budget.d(n),
        )
    }
}

/// Check the proper-weight conditions on a grid of `(k, n)` points.
///
/// The sandwich is checked pointwise for `k >= 2` (at `k = 1` the increment
/// is identically zero). The two vanishing ratios are checked as strict
/// decrease over the distinct `n` in the grid. Each failing check reports its
/// first violation.
pub fn check_proper_weight(
    spec: &ProperWeightSpec,
    penalty: &PenaltySchedule,
    grid: &[(usize, u64)],
    smallest_eigenvalue: &dyn Fn(usize) -> f64,
) -> ValidationReport {
    let mut report = ValidationReport::default();
    if grid.is_empty() {
        report.push(CHECK_SANDWICH, Some("empty grid".into()), "");
        return report;
    }
    let mut points = grid.to_vec();
    points.sort_unstable_by_key(|&(k, n)| (n, k));
    let sandwich = points.iter().filter(|(k, _)| *k >= 2).find_map(|&(k, n)| {
        let delta = match penalty.delta(k, n) {
            Ok(d) => d,
            Err(e) => return Some(e.to_string()),
        };
        let s = (spec.lower)(k, n);
        let t = (spec.upper)(k, n);
        if !(s <= delta) {
            Some(format!(
                "lower envelope s({k}, {n}) = {s} exceeds Δ = {delta}"
            ))
        } else if !(delta <= t) {
            Some(format!(
                "Δ({k}, {n}) = {delta} exceeds upper envelope t = {t}"
            ))
        } else {
            None
        }
    });
    report.push(
        CHECK_SANDWICH,
        sandwich,
        "s(k,n) <= Δ(k,n) <= t(k,n) for k >= 2",
    );

    let ns = sorted_grid(&points.iter().map(|&(_, n)| n).collect::<Vec<_>>());
    let lower_ratios: Vec<f64> = ns
        .iter()
        .map(|&n| {
            ratio_sup(
                |k, n| Ok((spec.lower)(k, n)),
                (spec.u)(n),
                n,
                smallest_eigenvalue,
            )
            .unwrap_or(f64::NAN)
        })
        .collect();
    report.push(
        CHECK_LOWER_RATIO,
        strictly_decreasing("sup_{k<=u_n} s(k,n)/(n λ_k)", &ns, &lower_ratios),
        format!("{lower_ratios:?}"),
    );

    let penalty_ratios: Result<Vec<f64>> = ns
        .iter()
        .map(|&n| {
            ratio_sup(
                |k, n| penalty.value(k, n),
                (spec.m)(n),
                n,
                smallest_eigenvalue,
            )
        })
        .collect();
    let failure = match &penalty_ratios {
        Ok(r) => strictly_decreasing("sup_{k<=m_n} π(k,n)/(n λ_k)", &ns, r),
        Err(e) => Some(e.to_string()),
    };
    report.push(
        CHECK_PENALTY_RATIO,
        failure,
        format!("{:?}", penalty_ratios.unwrap_or_default()),
    );
    report
}
