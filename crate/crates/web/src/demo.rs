//! The demo's operations as plain functions returning JSON text, so they run
//! and test natively as well as in the browser.

use ntgof::basis::{legendre_envelope, shifted_legendre, sup_norm_bound};
use ntgof::catalog::{ContaminatedUniform, DataSampler, TestSpec};
use ntgof::majorant::{prohorov_bound, prohorov_window};
use ntgof::montecarlo::{null_distribution, MonteCarloConfig};
use ntgof::rng::{substream, Purpose};
use serde_json::json;
use statrs::distribution::{ChiSquared, ContinuousCDF};

pub const MAX_COMPONENT: usize = 12;
const HISTOGRAM_BINS: usize = 20;

fn grid(a: f64, b: f64, points: usize) -> Vec<f64> {
    let m = points.max(2) - 1;
    (0..=m).map(|i| a + (b - a) * i as f64 / m as f64).collect()
}

/// `b_1..b_k` sampled at `points` equally spaced abscissae of [0, 1].
pub fn basis_curves(k: usize, points: usize) -> Result<String, String> {
    if k == 0 || k > MAX_COMPONENT {
        return Err(format!("k must lie in 1..={MAX_COMPONENT}, got {k}"));
    }
    let x = grid(0.0, 1.0, points);
    let curves: Vec<Vec<f64>> = (1..=k)
        .map(|j| x.iter().map(|&t| shifted_legendre(j, t)).collect())
        .collect();
    Ok(json!({ "x": x, "curves": curves }).to_string())
}

/// Draws `n` points from `1 + a b_j(x)`, runs the uniformity test on them and
/// calibrates the p-value with `replications` null samples.
pub fn uniformity_explorer(
    n: usize,
    component: usize,
    amplitude: f64,
    seed: u64,
    replications: usize,
) -> Result<String, String> {
    if component == 0 || component > MAX_COMPONENT {
        return Err(format!(
            "component must lie in 1..={MAX_COMPONENT}, got {component}"
        ));
    }
    let sampler = ContaminatedUniform::new(component, amplitude).map_err(|e| e.to_string())?;
    let data = sampler.sample(n, &mut substream(seed, Purpose::Data, 0));
    let spec = TestSpec::uniformity();
    let outcome = spec.evaluate(&data).map_err(|e| e.to_string())?;
    let config =
        MonteCarloConfig::new(replications, seed, vec![n], 0.05).map_err(|e| e.to_string())?;
    let cal = null_distribution(&spec, n, &config).map_err(|e| e.to_string())?;

    let mut histogram = vec![0usize; HISTOGRAM_BINS];
    for &x in data.as_univariate().map_err(|e| e.to_string())? {
        histogram[((x * HISTOGRAM_BINS as f64) as usize).min(HISTOGRAM_BINS - 1)] += 1;
    }
    let sel = &outcome.selection;
    Ok(json!({
        "n": n,
        "dimension": outcome.dimension,
        "selected": sel.selected,
        "statistic": sel.statistic,
        "series": sel.series,
        "penalized": sel.penalized,
        "critical_value": cal.critical_value,
        "p_value": cal.p_value(sel.statistic),
        "histogram": histogram,
    })
    .to_string())
}

/// Prohorov bound across its window for both envelopes, next to the
/// chi-square tail `P(χ²_k >= y²)` it is meant to dominate.
pub fn prohorov_curve(k: usize, n: u64, points: usize) -> Result<String, String> {
    if k == 0 || k > MAX_COMPONENT {
        return Err(format!("k must lie in 1..={MAX_COMPONENT}, got {k}"));
    }
    let chi = ChiSquared::new(k as f64).map_err(|e| e.to_string())?;
    let mut lines = Vec::new();
    for (name, m) in [
        ("sup_norm_bound", sup_norm_bound(k)),
        ("legendre_envelope", legendre_envelope(k)),
    ] {
        let (lo, hi) = prohorov_window(k, n, m);
        if hi < lo {
            lines.push(
                json!({ "envelope": name, "m": m, "window": [lo, hi], "y": [], "bound": [] }),
            );
            continue;
        }
        let y = grid(lo, hi, points);
        let bound = y
            .iter()
            .map(|&v| prohorov_bound(k, v, n, m).map_err(|e| e.to_string()))
            .collect::<Result<Vec<f64>, String>>()?;
        lines.push(json!({ "envelope": name, "m": m, "window": [lo, hi], "y": y, "bound": bound }));
    }
    let lo = (2.0 * k as f64).sqrt();
    let hi = lines
        .iter()
        .filter_map(|l| l["window"][1].as_f64())
        .fold(lo, f64::max);
    let y = grid(lo, hi, points);
    let tail: Vec<f64> = y.iter().map(|&v| chi.sf(v * v)).collect();
    Ok(
        json!({ "k": k, "n": n, "bounds": lines, "chi_square": { "y": y, "tail": tail } })
            .to_string(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    #[test]
    fn curves_have_requested_shape() {
        let v: Value = serde_json::from_str(&basis_curves(3, 11).unwrap()).unwrap();
        assert_eq!(v["x"].as_array().unwrap().len(), 11);
        assert_eq!(v["curves"].as_array().unwrap().len(), 3);
        // b_1(1) = sqrt(3)
        assert!((v["curves"][0][10].as_f64().unwrap() - 3f64.sqrt()).abs() < 1e-12);
        assert!(basis_curves(0, 5).is_err());
    }
}
