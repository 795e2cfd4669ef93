//! Gauss–Legendre rules and vector-valued adaptive Simpson integration.

use crate::error::{Error, Result};
use std::f64::consts::PI;

/// Gauss–Legendre nodes and weights on an interval.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// `points`-node rule on [-1, 1]; nodes from Newton iteration on P_n.
    pub fn new(points: usize) -> Self {
        assert!(points >= 1, "need at least one node");
        let n = points;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            // Tricomi initial guess
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let step = p / d;
                x -= step;
                if step.abs() < 1e-16 {
                    let (_, d) = legendre_with_derivative(n, x);
                    dp = d;
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes and weights mapped to [a, b].
    pub fn on_interval(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + half * x, half * w))
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        self.on_interval(a, b).map(|(x, w)| w * f(x)).sum()
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let dp = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, dp)
}

const MAX_DEPTH: u32 = 48;

/// Adaptive Simpson integration of a vector-valued integrand.
///
/// `f(x, out)` writes `dim` values. Subdivision continues until every
/// component meets the Lyness criterion `|S2 - S1| <= 15 tol`.
pub fn adaptive_simpson<F>(f: F, a: f64, b: f64, dim: usize, tol: f64) -> Result<Vec<f64>>
where
    F: Fn(f64, &mut [f64]),
{
    let mut fa = vec![0.0; dim];
    let mut fm = vec![0.0; dim];
    let mut fb = vec![0.0; dim];
    let m = 0.5 * (a + b);
    f(a, &mut fa);
    f(m, &mut fm);
    f(b, &mut fb);
    let whole = simpson(a, b, &fa, &fm, &fb);
    let mut acc = vec![0.0; dim];
    let mut integrator = Simpson { f: &f, dim };
    integrator.recurse(a, b, &fa, &fm, &fb, &whole, tol, MAX_DEPTH, &mut acc)?;
    Ok(acc)
}

/// Scalar convenience wrapper around [`adaptive_simpson`].
pub fn adaptive_simpson_scalar<F>(f: F, a: f64, b: f64, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    adaptive_simpson(|x, out| out[0] = f(x), a, b, 1, tol).map(|v| v[0])
}

fn simpson_into(a: f64, b: f64, fa: &[f64], fm: &[f64], fb: &[f64], out: &mut [f64]) {
    let h = (b - a) / 6.0;
    for i in 0..out.len() {
        out[i] = h * (fa[i] + 4.0 * fm[i] + fb[i]);
    }
}

fn simpson(a: f64, b: f64, fa: &[f64], fm: &[f64], fb: &[f64]) -> Vec<f64> {
    let h = (b - a) / 6.0;
    fa.iter()
        .zip(fm)
        .zip(fb)
        .map(|((&x, &y), &z)| h * (x + 4.0 * y + z))
        .collect()
}

struct Simpson<'a, F> {
    f: &'a F,
    dim: usize,
}

impl<F: Fn(f64, &mut [f64])> Simpson<'_, F> {
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        &mut self,
        a: f64,
        b: f64,
        fa: &[f64],
        fm: &[f64],
        fb: &[f64],
        whole: &[f64],
        tol: f64,
        depth: u32,
        acc: &mut [f64],
    ) -> Result<()> {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let d = self.dim;
        let mut scratch = vec![0.0; 4 * d];
        let (flm, rest) = scratch.split_at_mut(d);
        let (frm, rest) = rest.split_at_mut(d);
        let (left, right) = rest.split_at_mut(d);
        (self.f)(lm, flm);
        (self.f)(rm, frm);
        simpson_into(a, m, fa, flm, fm, left);
        simpson_into(m, b, fm, frm, fb, right);
        let converged = (0..self.dim).all(|i| (left[i] + right[i] - whole[i]).abs() <= 15.0 * tol);
        if converged {
            for i in 0..self.dim {
                let s2 = left[i] + right[i];
                acc[i] += s2 + (s2 - whole[i]) / 15.0;
            }
            return Ok(());
        }
        if depth == 0 || !(m > a && b > m) {
            return Err(Error::QuadratureNonConvergence { lower: a, upper: b });
        }
        self.recurse(a, m, fa, flm, fm, left, 0.5 * tol, depth - 1, acc)?;
        self.recurse(m, b, fm, frm, fb, right, 0.5 * tol, depth - 1, acc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let rule = GaussLegendre::new(8);
        // exact for degree <= 15
        let v = rule.integrate(0.0, 2.0, |x| x.powi(15));
        assert_abs_diff_eq!(v, 2f64.powi(16) / 16.0, epsilon = 1e-9);
        let w: f64 = rule.on_interval(-1.0, 1.0).map(|(_, w)| w).sum();
        assert_abs_diff_eq!(w, 2.0, epsilon = 1e-14);
    }

    #[test]
    fn odd_rule_has_zero_node() {
        let rule = GaussLegendre::new(5);
        assert_eq!(rule.len(), 5);
        let v = rule.integrate(-1.0, 1.0, |x| x * x);
        assert_abs_diff_eq!(v, 2.0 / 3.0, epsilon = 1e-14);
    }

    #[test]
    fn adaptive_simpson_matches_closed_forms() {
        let v = adaptive_simpson_scalar(|x| x.exp(), 0.0, 1.0, 1e-12).unwrap();
        assert_abs_diff_eq!(v, std::f64::consts::E - 1.0, epsilon = 1e-11);
        let g = adaptive_simpson_scalar(|x| (-0.5 * x * x).exp(), -8.0, 8.0, 1e-12).unwrap();
        assert_abs_diff_eq!(g, (2.0 * PI).sqrt(), epsilon = 1e-10);
    }

    #[test]
    fn adaptive_simpson_vector_components() {
        let v = adaptive_simpson(
            |x, out| {
                out[0] = x.sin();
                out[1] = x * x;
            },
            0.0,
            PI,
            2,
            1e-12,
        )
        .unwrap();
        assert_abs_diff_eq!(v[0], 2.0, epsilon = 1e-10);
        assert_abs_diff_eq!(v[1], PI.powi(3) / 3.0, epsilon = 1e-10);
    }

    #[test]
    fn adaptive_simpson_reports_non_convergence() {
        let err = adaptive_simpson_scalar(|x| 1.0 / x.abs().sqrt().max(1e-300), -1.0, 1.0, 0.0);
        assert!(matches!(err, Err(Error::QuadratureNonConvergence { .. })));
    }
}
