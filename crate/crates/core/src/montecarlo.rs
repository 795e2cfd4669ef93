//! Null calibration, power curves and empirical consistency probes.
//!
//! Replication `r` of any simulation draws from
//! `substream(derive_seed(seed, n), purpose, r)`, so aggregates depend only
//! on the configuration and never on the number of worker threads.

use crate::catalog::{AlternativeSpec, DataSampler, TestSpec};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, substream, McRng, Purpose};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

pub const MIN_REPLICATIONS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloConfig {
    pub replications: usize,
    pub seed: u64,
    pub n_grid: Vec<usize>,
    pub alpha: f64,
}

impl MonteCarloConfig {
    pub fn new(replications: usize, seed: u64, n_grid: Vec<usize>, alpha: f64) -> Result<Self> {
        let config = Self {
            replications,
            seed,
            n_grid,
            alpha,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications < MIN_REPLICATIONS {
            return Err(Error::InvalidArgument(format!(
                "replications must be at least {MIN_REPLICATIONS}, got {}",
                self.replications
            )));
        }
        if self.n_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument(
                "n_grid must be strictly increasing".into(),
            ));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        Ok(())
    }
}

/// Empirical null distribution of `(S, T_S)` at one sample size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub n: usize,
    pub replications: usize,
    pub seed: u64,
    pub alpha: f64,
    pub critical_value: f64,
    /// Simulated `T_S`, ascending.
    pub statistics: Vec<f64>,
    /// `selection_counts[s - 1]` replications selected `S = s`.
    pub selection_counts: Vec<usize>,
}

impl CalibrationResult {
    /// Share of replications with `S >= k`.
    pub fn selected_at_least(&self, k: usize) -> f64 {
        let hits: usize = self.selection_counts.iter().skip(k.saturating_sub(1)).sum();
        hits as f64 / self.replications as f64
    }

    pub fn p_value(&self, observed: f64) -> f64 {
        p_value(observed, self)
    }
}

/// The `⌈(1 - α) reps⌉`-th order statistic of ascending `sorted`.
pub fn critical_value(sorted: &[f64], alpha: f64) -> f64 {
    let reps = sorted.len();
    // the small slack keeps e.g. 0.95 · 2000 from rounding up to 1901
    let idx = ((1.0 - alpha) * reps as f64 - 1e-9).ceil() as usize;
    sorted[idx.clamp(1, reps) - 1]
}

/// `(1 + #{simulated >= observed}) / (reps + 1)`.
pub fn p_value(observed: f64, calibration: &CalibrationResult) -> f64 {
    let sims = &calibration.statistics;
    let below = sims.partition_point(|&t| t < observed);
    (1 + sims.len() - below) as f64 / (sims.len() + 1) as f64
}

/// `(S, T_S)` for each replication, in replication order.
fn simulate(
    spec: &TestSpec,
    sampler: &dyn DataSampler,
    n: usize,
    reps: usize,
    seed: u64,
    purpose: Purpose,
) -> Result<Vec<(usize, f64)>> {
    spec.prepare(n);
    let results: Vec<Result<(usize, f64)>> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = substream(seed, purpose, r as u64);
            let data = sampler.sample(n, &mut rng);
            spec.evaluate(&data).map(|o| (o.selected(), o.statistic()))
        })
        .collect();
    results
        .into_iter()
        .enumerate()
        .map(|(index, r)| {
            r.map_err(|e| Error::Replication {
                index,
                source: Box::new(e),
            })
        })
        .collect()
}

fn seed_for(seed: u64, n: usize) -> u64 {
    derive_seed(seed, n as u64)
}

/// Null distribution of `T_S` at sample size `n`.
pub fn null_distribution(
    spec: &TestSpec,
    n: usize,
    config: &MonteCarloConfig,
) -> Result<CalibrationResult> {
    config.validate()?;
    let sampler = spec.null_sampler();
    let sims = simulate(
        spec,
        sampler.as_ref(),
        n,
        config.replications,
        seed_for(config.seed, n),
        Purpose::Calibration,
    )?;
    let d = spec.budget().d(n as u64);
    let mut counts = vec![0usize; d];
    for &(s, _) in &sims {
        counts[s - 1] += 1;
    }
    let mut statistics: Vec<f64> = sims.into_iter().map(|(_, t)| t).collect();
    statistics.sort_by(f64::total_cmp);
    Ok(CalibrationResult {
        n,
        replications: config.replications,
        seed: config.seed,
        alpha: config.alpha,
        critical_value: critical_value(&statistics, config.alpha),
        statistics,
        selection_counts: counts,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerPoint {
    pub n: usize,
    pub critical_value: f64,
    pub rejection_rate: f64,
    /// Binomial standard error of the rate.
    pub standard_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerCurve {
    pub alpha: f64,
    pub replications: usize,
    pub seed: u64,
    pub points: Vec<PowerPoint>,
}

impl PowerCurve {
    pub fn rates(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.rejection_rate).collect()
    }
}

/// Rejection rate `P(T_S > c_α)` under `alternative` along `config.n_grid`.
///
/// The critical value comes from a calibration run; the alternative data
/// use a separate stream.
pub fn power_curve(
    spec: &TestSpec,
    alternative: &AlternativeSpec,
    config: &MonteCarloConfig,
) -> Result<PowerCurve> {
    power_curve_with(spec, alternative.sampler.as_ref(), config)
}

/// [`power_curve`] for an arbitrary data generator, e.g. the null sampler.
pub fn power_curve_with(
    spec: &TestSpec,
    sampler: &dyn DataSampler,
    config: &MonteCarloConfig,
) -> Result<PowerCurve> {
    config.validate()?;
    let mut points = Vec::with_capacity(config.n_grid.len());
    for &n in &config.n_grid {
        let cal = null_distribution(spec, n, config)?;
        let sims = simulate(
            spec,
            sampler,
            n,
            config.replications,
            seed_for(config.seed, n),
            Purpose::Evaluation,
        )?;
        let rejected = sims
            .iter()
            .filter(|&&(_, t)| t > cal.critical_value)
            .count();
        let rate = rejected as f64 / config.replications as f64;
        points.push(PowerPoint {
            n,
            critical_value: cal.critical_value,
            rejection_rate: rate,
            standard_error: (rate * (1.0 - rate) / config.replications as f64).sqrt(),
        });
    }
    Ok(PowerCurve {
        alpha: config.alpha,
        replications: config.replications,
        seed: config.seed,
        points,
    })
}

/// Engineering thresholds for [`consistency_probe`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeThresholds {
    /// Required `P(S >= K)` at the largest `n`.
    pub min_final_probability: f64,
}

impl Default for ProbeThresholds {
    fn default() -> Self {
        Self {
            min_final_probability: 0.8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbePoint {
    pub n: usize,
    pub p_selected_at_least_k: f64,
    pub median_statistic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub k: usize,
    pub thresholds: ProbeThresholds,
    pub points: Vec<ProbePoint>,
    pub probability_non_decreasing: bool,
    pub median_non_decreasing: bool,
    pub passed: bool,
}

fn median(sorted: &[f64]) -> f64 {
    let m = sorted.len();
    if m % 2 == 1 {
        sorted[m / 2]
    } else {
        0.5 * (sorted[m / 2 - 1] + sorted[m / 2])
    }
}

/// Empirical `P(S >= K)` and median `T_S` under the alternative along the grid.
pub fn consistency_probe(
    spec: &TestSpec,
    alternative: &AlternativeSpec,
    config: &MonteCarloConfig,
    thresholds: ProbeThresholds,
) -> Result<ConsistencyReport> {
    config.validate()?;
    let k = alternative.k;
    let mut points = Vec::with_capacity(config.n_grid.len());
    for &n in &config.n_grid {
        let sims = simulate(
            spec,
            alternative.sampler.as_ref(),
            n,
            config.replications,
            seed_for(config.seed, n),
            Purpose::Probe,
        )?;
        let hits = sims.iter().filter(|&&(s, _)| s >= k).count();
        let mut stats: Vec<f64> = sims.iter().map(|&(_, t)| t).collect();
        stats.sort_by(f64::total_cmp);
        points.push(ProbePoint {
            n,
            p_selected_at_least_k: hits as f64 / config.replications as f64,
            median_statistic: median(&stats),
        });
    }
    let probability_non_decreasing = points
        .windows(2)
        .all(|w| w[1].p_selected_at_least_k >= w[0].p_selected_at_least_k);
    let median_non_decreasing = points
        .windows(2)
        .all(|w| w[1].median_statistic >= w[0].median_statistic);
    let final_ok = points
        .last()
        .is_some_and(|p| p.p_selected_at_least_k > thresholds.min_final_probability);
    Ok(ConsistencyReport {
        k,
        thresholds,
        points,
        probability_non_decreasing,
        median_non_decreasing,
        passed: probability_non_decreasing && median_non_decreasing && final_ok,
    })
}

/// Bounded i.i.d. scalar generator with known mean and variance.
#[derive(Clone)]
pub struct BoundedSampler {
    pub draw: Arc<dyn Fn(&mut McRng) -> f64 + Send + Sync>,
    pub mean: f64,
    pub variance: f64,
    /// Bound on `|Z - mean|`.
    pub bound: f64,
}

impl std::fmt::Debug for BoundedSampler {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BoundedSampler")
            .field("mean", &self.mean)
            .field("variance", &self.variance)
            .field("bound", &self.bound)
            .finish()
    }
}

impl BoundedSampler {
    /// ±1 with equal probability.
    pub fn rademacher() -> Self {
        Self {
            draw: Arc::new(|rng: &mut McRng| {
                if rand::Rng::random::<bool>(rng) {
                    1.0
                } else {
                    -1.0
                }
            }),
            mean: 0.0,
            variance: 1.0,
            bound: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailPoint {
    pub n: usize,
    /// Empirical `P(|mean - μ| >= y)`.
    pub empirical_tail: f64,
    /// `1 / r_n = exp(-n y² / (2σ))`.
    pub reference_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailRateReport {
    pub y: f64,
    pub replications: usize,
    pub points: Vec<TailPoint>,
    /// Each step along the grid at least halves the empirical tail.
    pub passed: bool,
}

/// Empirical tail of the sample mean of a bounded variable.
///
/// The reference rate uses `σ = sqrt(variance)` in `exp(n y² / (2σ))`.
pub fn tail_rate_probe(
    sampler: &BoundedSampler,
    y: f64,
    n_grid: &[usize],
    replications: usize,
    seed: u64,
) -> Result<TailRateReport> {
    if !(y >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "deviation y must be non-negative, got {y}"
        )));
    }
    let sigma = sampler.variance.sqrt();
    let mut points = Vec::with_capacity(n_grid.len());
    for &n in n_grid {
        let s = seed_for(seed, n);
        let hits: usize = (0..replications)
            .into_par_iter()
            .map(|r| {
                let mut rng = substream(s, Purpose::Probe, r as u64);
                let sum: f64 = (0..n).map(|_| (sampler.draw)(&mut rng)).sum();
                usize::from((sum / n as f64 - sampler.mean).abs() >= y)
            })
            .sum();
        points.push(TailPoint {
            n,
            empirical_tail: hits as f64 / replications as f64,
            reference_rate: (-(n as f64) * y * y / (2.0 * sigma)).exp(),
        });
    }
    let passed = points
        .windows(2)
        .all(|w| w[1].empirical_tail <= 0.5 * w[0].empirical_tail);
    Ok(TailRateReport {
        y,
        replications,
        points,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::UniformSampler;

    fn config(reps: usize, grid: Vec<usize>) -> MonteCarloConfig {
        MonteCarloConfig::new(reps, 2024, grid, 0.05).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(MonteCarloConfig::new(99, 0, vec![10], 0.05).is_err());
        assert!(MonteCarloConfig::new(100, 0, vec![20, 10], 0.05).is_err());
        assert!(MonteCarloConfig::new(100, 0, vec![10], 1.0).is_err());
    }

    #[test]
    fn bookkeeping_and_determinism() {
        let spec = TestSpec::uniformity();
        let c = config(100, vec![50]);
        let a = null_distribution(&spec, 50, &c).unwrap();
        assert_eq!(a.statistics.len(), 100);
        assert_eq!(a.selection_counts.iter().sum::<usize>(), 100);
        assert!(a.statistics.windows(2).all(|w| w[0] <= w[1]));
        let b = null_distribution(&spec, 50, &c).unwrap();
        assert_eq!(a, b);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let single = pool.install(|| null_distribution(&spec, 50, &c).unwrap());
        assert_eq!(a, single);
    }

    #[test]
    fn critical_value_order_statistic() {
        let sorted: Vec<f64> = (1..=2000).map(f64::from).collect();
        assert_eq!(critical_value(&sorted, 0.05), 1900.0);
        let sorted: Vec<f64> = (1..=101).map(f64::from).collect();
        assert_eq!(critical_value(&sorted, 0.05), 96.0);
    }

    #[test]
    fn p_value_conventions() {
        let cal = CalibrationResult {
            n: 10,
            replications: 101,
            seed: 0,
            alpha: 0.05,
            critical_value: 0.0,
            statistics: (1..=101).map(f64::from).collect(),
            selection_counts: vec![101],
        };
        assert_eq!(p_value(1e9, &cal), 1.0 / 102.0);
        assert_eq!(p_value(0.0, &cal), 1.0);
        assert!((p_value(51.0, &cal) - 0.5).abs() <= 1.0 / 101.0);
    }

    #[test]
    fn replication_error_carries_index() {
        struct Bad;
        impl DataSampler for Bad {
            fn sample(&self, n: usize, _: &mut McRng) -> crate::catalog::Dataset {
                crate::catalog::Dataset::Univariate(vec![2.0; n])
            }
        }
        let err =
            power_curve_with(&TestSpec::uniformity(), &Bad, &config(100, vec![20])).unwrap_err();
        assert!(matches!(err, Error::Replication { index: 0, .. }));
    }

    #[test]
    fn null_as_alternative_holds_size() {
        let c = config(2000, vec![100, 400]);
        let curve = power_curve_with(&TestSpec::uniformity(), &UniformSampler, &c).unwrap();
        let se = (0.05f64 * 0.95 / 2000.0).sqrt();
        for p in &curve.points {
            assert!((p.rejection_rate - 0.05).abs() <= 3.0 * se, "{p:?}");
        }
    }

    #[test]
    fn consistency_probe_verdicts() {
        let c = config(300, vec![100, 400]);
        let spec = TestSpec::uniformity();
        let k1 = AlternativeSpec::contamination(1, 0.3).unwrap();
        let r = consistency_probe(&spec, &k1, &c, ProbeThresholds::default()).unwrap();
        assert!(r.points.iter().all(|p| p.p_selected_at_least_k == 1.0));
        let null_alt = AlternativeSpec::new(2, 0.3, Arc::new(UniformSampler)).unwrap();
        let r = consistency_probe(&spec, &null_alt, &c, ProbeThresholds::default()).unwrap();
        assert!(!r.passed);
        assert!(r.points.iter().all(|p| p.p_selected_at_least_k < 0.2));
    }

    #[test]
    fn tail_probe_edges() {
        let rad = BoundedSampler::rademacher();
        let zero = tail_rate_probe(&rad, 0.0, &[4, 8], 1000, 1).unwrap();
        assert!(zero.points.iter().all(|p| p.empirical_tail == 1.0));
        let far = tail_rate_probe(&rad, 1.5, &[4, 8], 1000, 1).unwrap();
        assert!(far.points.iter().all(|p| p.empirical_tail == 0.0));
        assert!(far.passed);
        assert!(tail_rate_probe(&rad, -1.0, &[4], 100, 1).is_err());
    }
}
