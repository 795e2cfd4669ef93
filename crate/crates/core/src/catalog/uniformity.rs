use super::{DataSampler, Dataset, TestOutcome, TestSpec};
use crate::basis::OrthonormalBasis;
use crate::error::{Error, Result};
use crate::rng::McRng;
use crate::statistics::{snt_series, MeanVector};
use rand::Rng;

pub(super) fn series(basis: &OrthonormalBasis, data: &[f64], d: usize) -> Result<Vec<f64>> {
    if data.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "uniformity test needs n >= 2, got {}",
            data.len()
        )));
    }
    if let Some(&x) = data.iter().find(|x| !(0.0..=1.0).contains(*x)) {
        return Err(Error::OutsideUnitInterval(x));
    }
    let mut sums = vec![0.0; d];
    let mut buf = vec![0.0; d];
    for &x in data {
        basis.eval_into(x, &mut buf);
        sums.iter_mut().zip(&buf).for_each(|(s, v)| *s += v);
    }
    let n = data.len();
    let mean = MeanVector::new(sums.into_iter().map(|s| s / n as f64).collect(), n)?;
    Ok(snt_series(&mean))
}

/// Data-driven smooth test of uniformity for data in [0, 1].
pub fn uniformity_test(data: &[f64], spec: &TestSpec) -> Result<TestOutcome> {
    spec.evaluate(&Dataset::Univariate(data.to_vec()))
}

/// i.i.d. U(0, 1).
#[derive(Debug, Clone, Copy, Default)]
pub struct UniformSampler;

impl DataSampler for UniformSampler {
    fn sample(&self, n: usize, rng: &mut McRng) -> Dataset {
        Dataset::Univariate((0..n).map(|_| rng.random::<f64>()).collect())
    }
}
