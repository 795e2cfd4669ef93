use super::{DataSampler, Dataset, TestOutcome, TestSpec};
use crate::basis::OrthonormalBasis;
use crate::error::{Error, Result};
use crate::rng::McRng;
use crate::statistics::{snt_series, MeanVector};
use rand::Rng;

/// Ranks `1..=n` of `values`, tied groups receiving their average rank.
/// The flag reports whether any tie was found.
pub fn average_ranks(values: &[f64]) -> Result<(Vec<f64>, bool)> {
    if values.is_empty() {
        return Err(Error::EmptySample);
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "non-finite value {v} cannot be ranked"
        )));
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut ties = false;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        ties |= end - start > 1;
        // positions start..end hold ranks start+1..=end
        let avg = 0.5 * ((start + 1) + end) as f64;
        for &i in &order[start..end] {
            ranks[i] = avg;
        }
        start = end;
    }
    Ok((ranks, ties))
}

/// `(R_i - 1/2) / n` for the 1-based index `i`.
pub fn rank_transform(values: &[f64], i: usize) -> Result<f64> {
    let (ranks, _) = average_ranks(values)?;
    if i == 0 || i > values.len() {
        return Err(Error::IndexOutOfRange {
            index: i,
            max: values.len(),
        });
    }
    Ok((ranks[i - 1] - 0.5) / values.len() as f64)
}

fn transformed(values: &[f64]) -> Result<(Vec<f64>, bool)> {
    let n = values.len() as f64;
    let (ranks, ties) = average_ranks(values)?;
    Ok((ranks.into_iter().map(|r| (r - 0.5) / n).collect(), ties))
}

pub(super) fn series(
    basis: &OrthonormalBasis,
    pairs: &[(f64, f64)],
    d: usize,
) -> Result<(Vec<f64>, Vec<String>)> {
    if pairs.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "independence test needs at least 2 pairs, got {}",
            pairs.len()
        )));
    }
    let xs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let (u, ties_x) = transformed(&xs)?;
    let (v, ties_y) = transformed(&ys)?;
    let mut warnings = Vec::new();
    if ties_x || ties_y {
        warnings.push("ties present; average ranks used".to_string());
    }
    let mut sums = vec![0.0; d];
    let mut bu = vec![0.0; d];
    let mut bv = vec![0.0; d];
    for (&a, &b) in u.iter().zip(&v) {
        basis.eval_into(a, &mut bu);
        basis.eval_into(b, &mut bv);
        for j in 0..d {
            sums[j] += bu[j] * bv[j];
        }
    }
    let n = pairs.len();
    let mean = MeanVector::new(sums.into_iter().map(|s| s / n as f64).collect(), n)?;
    Ok((snt_series(&mean), warnings))
}

/// Rank-based data-driven test of independence of X and Y.
pub fn independence_rank_test(pairs: &[(f64, f64)], spec: &TestSpec) -> Result<TestOutcome> {
    spec.evaluate(&Dataset::Pairs(pairs.to_vec()))
}

/// Independent U(0, 1) coordinates. Any continuous product law gives the
/// same rank distribution.
#[derive(Debug, Clone, Copy, Default)]
pub struct IndependentPairs;

impl DataSampler for IndependentPairs {
    fn sample(&self, n: usize, rng: &mut McRng) -> Dataset {
        Dataset::Pairs(
            (0..n)
                .map(|_| (rng.random::<f64>(), rng.random::<f64>()))
                .collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn ranks_with_ties() {
        let (r, ties) = average_ranks(&[3.0, 1.0, 3.0, 2.0]).unwrap();
        assert_eq!(r, vec![3.5, 1.0, 3.5, 2.0]);
        assert!(ties);
        assert_abs_diff_eq!(rank_transform(&[3.0, 1.0, 2.0], 1).unwrap(), 2.5 / 3.0);
        assert!(rank_transform(&[1.0], 2).is_err());
    }

    #[test]
    fn spec_rank_examples() {
        assert_eq!(rank_transform(&[7.0], 1).unwrap(), 0.5);
        let sorted: Vec<f64> = (0..9).map(f64::from).collect();
        assert_abs_diff_eq!(rank_transform(&sorted, 9).unwrap(), 8.5 / 9.0);
    }

    #[test]
    fn perfect_dependence() {
        let n = 50;
        let pairs: Vec<(f64, f64)> = (0..n).map(|i| (i as f64, i as f64)).collect();
        let out = independence_rank_test(&pairs, &TestSpec::independence()).unwrap();
        // oracle: (n^{-1/2} Σ b_1(u_i)²)² with b_1 written out
        let s: f64 = (1..=n)
            .map(|i| {
                let u = (i as f64 - 0.5) / n as f64;
                3.0 * (2.0 * u - 1.0).powi(2)
            })
            .sum();
        assert_abs_diff_eq!(out.selection.series[0], s * s / n as f64, epsilon = 1e-9);
        assert!(out.selection.series[0] > 40.0);
    }

    #[test]
    fn two_reversed_pairs() {
        let out =
            independence_rank_test(&[(1.0, 2.0), (2.0, 1.0)], &TestSpec::independence()).unwrap();
        assert_abs_diff_eq!(out.selection.series[0], 1.125, epsilon = 1e-12);
    }

    #[test]
    fn ties_warn() {
        let pairs = vec![(1.0, 2.0), (1.0, 3.0), (2.0, 1.0)];
        let out = independence_rank_test(&pairs, &TestSpec::independence()).unwrap();
        assert_eq!(out.warnings.len(), 1);
        assert!(independence_rank_test(&pairs[..1], &TestSpec::independence()).is_err());
    }

    proptest! {
        #[test]
        fn monotone_transform_invariance(pairs in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 2..50)) {
            let spec = TestSpec::independence();
            let a = independence_rank_test(&pairs, &spec).unwrap();
            let mapped: Vec<(f64, f64)> = pairs.iter().map(|&(x, y)| (x.exp(), y * y * y + 2.0 * y)).collect();
            let b = independence_rank_test(&mapped, &spec).unwrap();
            prop_assert_eq!(a.selection.series, b.selection.series);
        }
    }
}
