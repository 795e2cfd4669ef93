//! Orthonormal function systems on [0, 1].
//!
//! The shifted Legendre family `b_j(x) = sqrt(2j + 1) P_j(2x - 1)` is the
//! workhorse: it is orthonormal on [0, 1] and orthogonal to the constants, so
//! `E b_j(U) = 0` and `E b_i(U) b_j(U) = δ_ij` for a uniform `U`.

use crate::error::{Error, Result};
use crate::quadrature::GaussLegendre;
use std::fmt;
use std::sync::Arc;

/// A user-provided component function on [0, 1].
pub type BasisFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisKind {
    LegendreShifted,
    UserSupplied,
}

/// Tolerance for the quadrature orthonormality check of user bases.
pub const ORTHONORMALITY_TOL: f64 = 1e-10;
const CHECK_NODES: usize = 128;

#[derive(Clone)]
pub struct OrthonormalBasis {
    kind: BasisKind,
    max_degree: usize,
    user: Option<Arc<[BasisFn]>>,
}

impl fmt::Debug for OrthonormalBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OrthonormalBasis")
            .field("kind", &self.kind)
            .field("max_degree", &self.max_degree)
            .finish()
    }
}

impl OrthonormalBasis {
    pub fn legendre(max_degree: usize) -> Self {
        assert!(max_degree >= 1, "max_degree must be positive");
        Self {
            kind: BasisKind::LegendreShifted,
            max_degree,
            user: None,
        }
    }

    /// Wrap user functions `b_1, ..., b_m`.
    ///
    /// The Gram matrix (including the constant function) is computed by a
    /// 128-node Gauss–Legendre rule; any entry off by more than
    /// [`ORTHONORMALITY_TOL`] is a hard error.
    pub fn user_supplied(funcs: Vec<BasisFn>) -> Result<Self> {
        if funcs.is_empty() {
            return Err(Error::InvalidArgument("empty user basis".into()));
        }
        let rule = GaussLegendre::new(CHECK_NODES);
        let points: Vec<(f64, f64)> = rule.on_interval(0.0, 1.0).collect();
        let values: Vec<Vec<f64>> = funcs
            .iter()
            .map(|f| points.iter().map(|&(x, _)| f(x)).collect())
            .collect();
        for (i, vi) in values.iter().enumerate() {
            let mean: f64 = vi.iter().zip(&points).map(|(v, (_, w))| v * w).sum();
            if !(mean.abs() <= ORTHONORMALITY_TOL) {
                return Err(Error::NotOrthonormal {
                    row: i + 1,
                    col: 0,
                    value: mean,
                });
            }
            for (j, vj) in values.iter().enumerate().skip(i) {
                let g: f64 = vi
                    .iter()
                    .zip(vj)
                    .zip(&points)
                    .map(|((a, b), (_, w))| a * b * w)
                    .sum();
                let target = if i == j { 1.0 } else { 0.0 };
                if !((g - target).abs() <= ORTHONORMALITY_TOL) {
                    return Err(Error::NotOrthonormal {
                        row: i + 1,
                        col: j + 1,
                        value: g,
                    });
                }
            }
        }
        Ok(Self {
            kind: BasisKind::UserSupplied,
            max_degree: funcs.len(),
            user: Some(funcs.into()),
        })
    }

    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    /// `b_j(x)` with range checks on both arguments.
    pub fn eval(&self, j: usize, x: f64) -> Result<f64> {
        if j == 0 || j > self.max_degree {
            return Err(Error::IndexOutOfRange {
                index: j,
                max: self.max_degree,
            });
        }
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::OutsideUnitInterval(x));
        }
        Ok(match &self.user {
            None => shifted_legendre(j, x),
            Some(funcs) => funcs[j - 1](x),
        })
    }

    /// Fill `out[i]` with `b_{i+1}(x)` for `i < out.len()`.
    ///
    /// Unchecked hot path for the statistics; callers guarantee
    /// `out.len() <= max_degree` and `x` in [0, 1].
    pub fn eval_into(&self, x: f64, out: &mut [f64]) {
        debug_assert!(out.len() <= self.max_degree);
        match &self.user {
            None => shifted_legendre_into(x, out),
            Some(funcs) => {
                for (o, f) in out.iter_mut().zip(funcs.iter()) {
                    *o = f(x);
                }
            }
        }
    }
}

/// Normalized shifted Legendre polynomial of degree `j` at `x`.
pub fn shifted_legendre(j: usize, x: f64) -> f64 {
    if j == 0 {
        return 1.0;
    }
    let t = 2.0 * x - 1.0;
    let mut p_prev = 1.0;
    let mut p = t;
    for m in 1..j {
        let mf = m as f64;
        let next = ((2.0 * mf + 1.0) * t * p - mf * p_prev) / (mf + 1.0);
        p_prev = p;
        p = next;
    }
    (2.0 * j as f64 + 1.0).sqrt() * p
}

/// `out[i] = b_{i+1}(x)` by one pass of the three-term recurrence.
pub fn shifted_legendre_into(x: f64, out: &mut [f64]) {
    let t = 2.0 * x - 1.0;
    let mut p_prev = 1.0;
    let mut p = t;
    for (i, o) in out.iter_mut().enumerate() {
        let j = i + 1;
        if j > 1 {
            let m = (j - 1) as f64;
            let next = ((2.0 * m + 1.0) * t * p - m * p_prev) / (m + 1.0);
            p_prev = p;
            p = next;
        }
        *o = (2.0 * j as f64 + 1.0).sqrt() * p;
    }
}

/// Envelope `M(k)` for the Euclidean norm of `(b_1, ..., b_k)`.
///
/// For `k >= 2` this is the closed form `sqrt((k - 1)(k + 3))` used in the
/// uniformity consistency argument. At `k = 1` that form vanishes, so the
/// actual sup of `|b_1|`, which is `sqrt(3)`, is returned instead.
///
/// Note the closed form sits below the exact sup, see [`legendre_envelope`].
pub fn sup_norm_bound(k: usize) -> f64 {
    match k {
        0 => 0.0,
        1 => 3f64.sqrt(),
        _ => (((k - 1) * (k + 3)) as f64).sqrt(),
    }
}

/// Exact sup over [0, 1] of `sqrt(b_1^2 + ... + b_k^2)`.
///
/// Each `|b_j|` peaks at `x = 1` with value `sqrt(2j + 1)`, and the sum of
/// `2j + 1` over `j <= k` is `k(k + 2)`.
pub fn legendre_envelope(k: usize) -> f64 {
    ((k * (k + 2)) as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn degree_one_and_two_values() {
        let b = OrthonormalBasis::legendre(10);
        assert_abs_diff_eq!(b.eval(1, 1.0).unwrap(), 3f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(b.eval(1, 0.5).unwrap(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(
            b.eval(2, 0.5).unwrap(),
            -(5f64.sqrt()) / 2.0,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(b.eval(2, 0.0).unwrap(), 5f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn range_errors() {
        let b = OrthonormalBasis::legendre(4);
        assert_eq!(
            b.eval(0, 0.5),
            Err(Error::IndexOutOfRange { index: 0, max: 4 })
        );
        assert_eq!(
            b.eval(5, 0.5),
            Err(Error::IndexOutOfRange { index: 5, max: 4 })
        );
        assert_eq!(b.eval(1, 1.5), Err(Error::OutsideUnitInterval(1.5)));
        assert!(b.eval(1, f64::NAN).is_err());
    }

    #[test]
    fn sup_norm_bound_values() {
        assert_abs_diff_eq!(sup_norm_bound(1), 3f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(sup_norm_bound(2), 5f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(sup_norm_bound(3), 12f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn numeric_sup_of_first_component() {
        let sup = (0..=10_000)
            .map(|i| shifted_legendre(1, i as f64 / 10_000.0).abs())
            .fold(0.0, f64::max);
        assert_abs_diff_eq!(sup, sup_norm_bound(1), epsilon = 1e-12);
    }

    #[test]
    fn gram_matrix_is_identity() {
        let rule = GaussLegendre::new(64);
        let mut vals = vec![0.0; 10];
        let mut gram = [[0.0; 10]; 10];
        let mut means = [0.0; 10];
        for (x, w) in rule.on_interval(0.0, 1.0) {
            shifted_legendre_into(x, &mut vals);
            for i in 0..10 {
                means[i] += w * vals[i];
                for j in 0..10 {
                    gram[i][j] += w * vals[i] * vals[j];
                }
            }
        }
        for i in 0..10 {
            assert_abs_diff_eq!(means[i], 0.0, epsilon = 1e-10);
            for j in 0..10 {
                let target = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(gram[i][j], target, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn recurrence_matches_explicit_low_degrees() {
        let mut out = [0.0; 2];
        for i in 0..=1000 {
            let x = i as f64 / 1000.0;
            let b1 = 3f64.sqrt() * (2.0 * x - 1.0);
            let b2 = 5f64.sqrt() * (6.0 * x * x - 6.0 * x + 1.0);
            assert_abs_diff_eq!(shifted_legendre(1, x), b1, epsilon = 1e-12);
            assert_abs_diff_eq!(shifted_legendre(2, x), b2, epsilon = 1e-12);
            shifted_legendre_into(x, &mut out);
            assert_abs_diff_eq!(out[0], b1, epsilon = 1e-12);
            assert_abs_diff_eq!(out[1], b2, epsilon = 1e-12);
        }
    }

    #[test]
    fn vector_and_scalar_evaluation_agree() {
        let mut out = [0.0; 12];
        for i in 0..=100 {
            let x = i as f64 / 100.0;
            shifted_legendre_into(x, &mut out);
            for (j, &v) in out.iter().enumerate() {
                assert_abs_diff_eq!(v, shifted_legendre(j + 1, x), epsilon = 1e-12);
            }
        }
    }

    fn grid_sup_of_squared_norm(k: usize) -> f64 {
        let mut out = vec![0.0; k];
        (0..=10_000)
            .map(|i| {
                shifted_legendre_into(i as f64 / 10_000.0, &mut out);
                out.iter().map(|v| v * v).sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn squared_norm_sup_is_k_times_k_plus_two() {
        for k in 2..=8 {
            let sup = grid_sup_of_squared_norm(k);
            assert!(sup <= legendre_envelope(k).powi(2) + 1e-6, "k = {k}: {sup}");
            assert_abs_diff_eq!(sup, (k * (k + 2)) as f64, epsilon = 1e-9);
        }
    }

    // The closed-form envelope falls short of the attained sup by exactly 3
    // (attained at x = 1), so it is not a true a.e. bound on the score norm.
    #[test]
    fn closed_form_envelope_gap_is_three() {
        for k in 2..=8 {
            let sup = grid_sup_of_squared_norm(k);
            assert_abs_diff_eq!(sup - sup_norm_bound(k).powi(2), 3.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn user_basis_accepts_legendre_and_rejects_duplicates() {
        let fs: Vec<BasisFn> = (1..=3)
            .map(|j| Arc::new(move |x: f64| shifted_legendre(j, x)) as BasisFn)
            .collect();
        let b = OrthonormalBasis::user_supplied(fs).unwrap();
        assert_eq!(b.kind(), BasisKind::UserSupplied);
        assert_abs_diff_eq!(
            b.eval(2, 0.3).unwrap(),
            shifted_legendre(2, 0.3),
            epsilon = 1e-15
        );

        let dup: Vec<BasisFn> = vec![
            Arc::new(|x: f64| shifted_legendre(1, x)),
            Arc::new(|x: f64| shifted_legendre(1, x)),
        ];
        assert!(matches!(
            OrthonormalBasis::user_supplied(dup),
            Err(Error::NotOrthonormal { row: 1, col: 2, .. })
        ));

        let not_centered: Vec<BasisFn> = vec![Arc::new(|_| 1.0)];
        assert!(matches!(
            OrthonormalBasis::user_supplied(not_centered),
            Err(Error::NotOrthonormal { col: 0, .. })
        ));
    }

    #[test]
    fn cosine_basis_passes_user_check() {
        let fs: Vec<BasisFn> = (1..=4)
            .map(|j| {
                Arc::new(move |x: f64| 2f64.sqrt() * (std::f64::consts::PI * j as f64 * x).cos())
                    as BasisFn
            })
            .collect();
        assert!(OrthonormalBasis::user_supplied(fs).is_ok());
    }
}
