//! Large-deviation majorants for the null quadratic form.
//!
//! The Prohorov bound controls `P(‖n^{-1/2} Σ Z_i‖ >= y)` for bounded i.i.d.
//! vectors with identity covariance; P-type majorants generalize its shape to
//! `C1 φ1(k) φ2(λ) y^{k-1} exp(-y²/C2)`.

use crate::error::{Error, Result};
use statrs::function::gamma::ln_gamma;
use std::fmt;
use std::sync::Arc;

pub const PROHOROV_CONSTANT: f64 = 150_210.0;

/// `(150210 / Γ(k/2)) (y²/2)^{(k-1)/2} exp{-(y²/2)(1 - η)}` without any
/// window check.
pub fn prohorov_bound_eta(k: usize, y: f64, eta: f64) -> f64 {
    let half_sq = 0.5 * y * y;
    // (y²/2)^0 = 1 at k = 1, including y = 0
    let power = if k == 1 {
        0.0
    } else {
        0.5 * (k as f64 - 1.0) * half_sq.ln()
    };
    (PROHOROV_CONSTANT.ln() - ln_gamma(0.5 * k as f64) + power - half_sq * (1.0 - eta)).exp()
}

/// Validity window `[sqrt(2k), sqrt(n) / M]` on the norm scale `y`.
pub fn prohorov_window(k: usize, n: u64, envelope: f64) -> (f64, f64) {
    ((2.0 * k as f64).sqrt(), (n as f64).sqrt() / envelope)
}

/// Prohorov bound at the worst case `η = M y / sqrt(n)`.
///
/// Requires `2k <= y² <= n / M²`; outside that window the inequality is not
/// available and [`Error::OutsideWindow`] is returned.
pub fn prohorov_bound(k: usize, y: f64, n: u64, envelope: f64) -> Result<f64> {
    let (lower, upper) = prohorov_window(k, n, envelope);
    // endpoints count as inside despite rounding in the square roots
    let slack = 1e-12;
    if !(y >= lower * (1.0 - slack) && y <= upper * (1.0 + slack)) {
        return Err(Error::OutsideWindow { k, y, lower, upper });
    }
    let eta = envelope * y / (n as f64).sqrt();
    Ok(prohorov_bound_eta(k, y, eta))
}

type Window = Arc<dyn Fn(usize, u64) -> (f64, f64) + Send + Sync>;

/// Constants and shape functions of a P-type majorant.
#[derive(Clone)]
pub struct MajorantParams {
    c1: f64,
    c2: f64,
    phi1: Arc<dyn Fn(usize) -> f64 + Send + Sync>,
    phi2: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
    window: Window,
}

impl fmt::Debug for MajorantParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MajorantParams")
            .field("c1", &self.c1)
            .field("c2", &self.c2)
            .finish_non_exhaustive()
    }
}

impl MajorantParams {
    pub fn new(
        c1: f64,
        c2: f64,
        phi1: impl Fn(usize) -> f64 + Send + Sync + 'static,
        phi2: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        window: impl Fn(usize, u64) -> (f64, f64) + Send + Sync + 'static,
    ) -> Result<Self> {
        if !(c1 > 0.0 && c2 > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "majorant constants must be positive (C1 = {c1}, C2 = {c2})"
            )));
        }
        Ok(Self {
            c1,
            c2,
            phi1: Arc::new(phi1),
            phi2: Arc::new(phi2),
            window: Arc::new(window),
        })
    }

    /// The Prohorov bound with `η` held fixed, written in P-type form:
    /// `C1 = 150210`, `φ1(k) = 2^{-(k-1)/2} / Γ(k/2)`, `φ2 ≡ 1`,
    /// `C2 = 2 / (1 - η)`, on the window `[sqrt(2k), sqrt(n) / M(k)]`.
    pub fn prohorov(eta: f64, envelope: fn(usize) -> f64) -> Result<Self> {
        if !(0.0..1.0).contains(&eta) {
            return Err(Error::InvalidArgument(format!(
                "eta = {eta} must lie in [0, 1)"
            )));
        }
        Self::new(
            PROHOROV_CONSTANT,
            2.0 / (1.0 - eta),
            |k| (-(k as f64 - 1.0) * 0.5 * std::f64::consts::LN_2 - ln_gamma(0.5 * k as f64)).exp(),
            |_| 1.0,
            move |k, n| prohorov_window(k, n, envelope(k)),
        )
    }

    pub fn c1(&self) -> f64 {
        self.c1
    }

    pub fn c2(&self) -> f64 {
        self.c2
    }

    pub fn with_c1(&self, c1: f64) -> Result<Self> {
        if !(c1 > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "C1 = {c1} must be positive"
            )));
        }
        Ok(Self { c1, ..self.clone() })
    }

    pub fn window(&self, k: usize, n: u64) -> (f64, f64) {
        (self.window)(k, n)
    }
}

/// `C1 φ1(k) φ2(λ) y^{k-1} exp(-y²/C2)` for `y` inside the window.
pub fn ptype_majorant(
    params: &MajorantParams,
    k: usize,
    y: f64,
    n: u64,
    eigenvalues: &[f64],
) -> Result<f64> {
    if eigenvalues.len() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            got: eigenvalues.len(),
        });
    }
    let (lower, upper) = params.window(k, n);
    if !(lower <= y && y <= upper) {
        return Err(Error::OutsideWindow { k, y, lower, upper });
    }
    let power = if k == 1 { 1.0 } else { y.powi(k as i32 - 1) };
    Ok(params.c1
        * (params.phi1)(k)
        * (params.phi2)(eigenvalues)
        * power
        * (-y * y / params.c2).exp())
}

/// A majorant `φ(k; y)` at sample size `n`.
pub trait Majorant {
    fn value(&self, k: usize, y: f64, n: u64) -> Result<f64>;
}

/// The Prohorov bound with `η = M(k) y / sqrt(n)`.
#[derive(Debug, Clone, Copy)]
pub struct ProhorovMajorant {
    pub envelope: fn(usize) -> f64,
}

impl Majorant for ProhorovMajorant {
    fn value(&self, k: usize, y: f64, n: u64) -> Result<f64> {
        prohorov_bound(k, y, n, (self.envelope)(k))
    }
}

/// A P-type majorant with eigenvalues supplied per dimension.
#[derive(Clone)]
pub struct PTypeMajorant {
    pub params: MajorantParams,
    pub eigenvalues: Arc<dyn Fn(usize) -> Vec<f64> + Send + Sync>,
}

impl Majorant for PTypeMajorant {
    fn value(&self, k: usize, y: f64, n: u64) -> Result<f64> {
        ptype_majorant(&self.params, k, y, n, &(self.eigenvalues)(k))
    }
}

/// `Σ_{k=start}^{cap} φ(k; s(k, n))`.
pub fn b2_tail_sum(
    majorant: &dyn Majorant,
    start: usize,
    cap: usize,
    lower: &dyn Fn(usize, u64) -> f64,
    n: u64,
) -> Result<f64> {
    if start == 0 || start > cap {
        return Err(Error::InvalidArgument(format!(
            "tail sum needs 1 <= start <= cap, got start = {start}, cap = {cap}"
        )));
    }
    (start..=cap).try_fold(0.0, |acc, k| Ok(acc + majorant.value(k, lower(k, n), n)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::sup_norm_bound;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use std::f64::consts::PI;

    #[test]
    fn limit_term_at_k1() {
        let v = prohorov_bound_eta(1, 2f64.sqrt(), 0.0);
        let expected = 150_210.0 / PI.sqrt() * (-1.0f64).exp();
        assert_relative_eq!(v, expected, max_relative = 1e-12);
        assert_relative_eq!(v, 31_176.6, max_relative = 1e-5);
    }

    #[test]
    fn calculator_value_k2() {
        let m = 5f64.sqrt();
        let v = prohorov_bound(2, 4.0, 1_000_000, m).unwrap();
        // Γ(1) = 1, (16/2)^{1/2} = sqrt(8)
        let expected = 150_210.0 * 8f64.sqrt() * (-8.0 * (1.0 - m * 4.0 / 1000.0)).exp();
        assert_relative_eq!(v, expected, max_relative = 1e-12);
    }

    #[test]
    fn window_violation() {
        assert!(matches!(
            prohorov_bound(2, 1.0, 1000, 5f64.sqrt()),
            Err(Error::OutsideWindow { k: 2, .. })
        ));
        // upper side: y² M² > n
        assert!(matches!(
            prohorov_bound(1, 30.0, 100, 3f64.sqrt()),
            Err(Error::OutsideWindow { .. })
        ));
    }

    #[test]
    fn ptype_direct_value() {
        let p =
            MajorantParams::new(1.0, 2.0, |_| 1.0, |_| 1.0, |_, _| (0.0, f64::INFINITY)).unwrap();
        let v = ptype_majorant(&p, 1, 3.0, 100, &[1.0]).unwrap();
        assert_relative_eq!(v, (-4.5f64).exp(), max_relative = 1e-14);
        assert_abs_diff_eq!(v, 0.011109, epsilon = 1e-6);
    }

    #[test]
    fn ptype_specializes_to_prohorov() {
        let n = 1_000_000;
        for k in 1..=6 {
            let (lower, _) = prohorov_window(k, n, sup_norm_bound(k));
            let eta = sup_norm_bound(k) * lower / (n as f64).sqrt();
            let params = MajorantParams::prohorov(eta, sup_norm_bound).unwrap();
            let p = ptype_majorant(&params, k, lower, n, &vec![1.0; k]).unwrap();
            let direct = prohorov_bound(k, lower, n, sup_norm_bound(k)).unwrap();
            assert_relative_eq!(p, direct, max_relative = 1e-12);
        }
    }

    #[test]
    fn ptype_window_excludes_zero() {
        let params = MajorantParams::prohorov(0.0, sup_norm_bound).unwrap();
        assert!(matches!(
            ptype_majorant(&params, 3, 0.0, 1000, &[1.0; 3]),
            Err(Error::OutsideWindow { k: 3, .. })
        ));
    }

    #[test]
    fn ptype_is_linear_in_c1() {
        let p = MajorantParams::new(
            1.3,
            2.5,
            |k| k as f64,
            |l| l.iter().sum(),
            |_, _| (0.0, 100.0),
        )
        .unwrap();
        let q = p.with_c1(2.6).unwrap();
        for k in 1..=4 {
            let ev = vec![0.7; k];
            for y in [0.5, 1.0, 2.0, 3.7] {
                let a = ptype_majorant(&p, k, y, 10, &ev).unwrap();
                let b = ptype_majorant(&q, k, y, 10, &ev).unwrap();
                assert_eq!(b, 2.0 * a);
            }
        }
    }

    #[test]
    fn invalid_constants() {
        assert!(MajorantParams::new(0.0, 1.0, |_| 1.0, |_| 1.0, |_, _| (0.0, 1.0)).is_err());
        assert!(MajorantParams::new(1.0, -1.0, |_| 1.0, |_| 1.0, |_, _| (0.0, 1.0)).is_err());
    }

    #[test]
    fn tail_sum_single_term_and_bound() {
        let maj = ProhorovMajorant {
            envelope: sup_norm_bound,
        };
        let s = |k: usize, _: u64| (2.0 * k as f64).sqrt();
        let n = 1_000_000;
        let single = b2_tail_sum(&maj, 5, 5, &s, n).unwrap();
        assert_eq!(single, maj.value(5, s(5, n), n).unwrap());

        // Terms decreasing in y at fixed k are not guaranteed across k, so
        // use a majorant that is monotone in k by construction.
        let decreasing = PTypeMajorant {
            params: MajorantParams::new(
                1.0,
                2.0,
                |k| 0.5f64.powi(k as i32),
                |_| 1.0,
                |_, _| (0.0, 10.0),
            )
            .unwrap(),
            eigenvalues: Arc::new(|k| vec![1.0; k]),
        };
        let one = |_: usize, _: u64| 1.0;
        let total = b2_tail_sum(&decreasing, 2, 9, &one, n).unwrap();
        let first = decreasing.value(2, 1.0, n).unwrap();
        assert!(total <= 8.0 * first);
    }

    #[test]
    fn tail_sum_prohorov_instantiation() {
        let maj = ProhorovMajorant {
            envelope: sup_norm_bound,
        };
        let n = 1_000_000u64;
        let s = |k: usize, _: u64| (2.0 * k as f64).sqrt();
        let got = b2_tail_sum(&maj, 4, 12, &s, n).unwrap();
        // independent summation with y² = 2k written out term by term
        let oracle: f64 = (4..=12)
            .map(|k| {
                let kf = k as f64;
                let m = (((k - 1) * (k + 3)) as f64).sqrt();
                let y = (2.0 * kf).sqrt();
                let gamma = statrs::function::gamma::gamma(kf / 2.0);
                150_210.0 / gamma * kf.powf((kf - 1.0) / 2.0) * (-kf * (1.0 - m * y / 1000.0)).exp()
            })
            .sum();
        assert!(got.is_finite());
        assert_relative_eq!(got, oracle, max_relative = 1e-10);
    }

    #[test]
    fn bound_decreases_where_log_derivative_is_negative() {
        let n = 5000u64;
        for k in 1..=3 {
            let m = sup_norm_bound(k);
            let (lo, hi) = prohorov_window(k, n, m);
            let steps = 400;
            let ys: Vec<f64> = (0..=steps)
                .map(|i| lo + (hi - lo) * i as f64 / steps as f64)
                .collect();
            let sqrt_n = (n as f64).sqrt();
            for w in ys.windows(2) {
                let dlog = |y: f64| (k as f64 - 1.0) / y - y + 1.5 * m * y * y / sqrt_n;
                if dlog(w[0]) < 0.0 && dlog(w[1]) < 0.0 {
                    let a = prohorov_bound(k, w[0], n, m).unwrap();
                    let b = prohorov_bound(k, w[1], n, m).unwrap();
                    assert!(b < a, "k = {k}: {} -> {}", w[0], w[1]);
                }
            }
        }
    }
}
