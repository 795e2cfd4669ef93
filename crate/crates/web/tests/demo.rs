use ntgof_web::demo::{basis_curves, prohorov_curve, uniformity_explorer};
use serde_json::Value;

fn parse(s: Result<String, String>) -> Value {
    serde_json::from_str(&s.unwrap()).unwrap()
}

#[test]
fn basis_curves_are_orthonormal_on_the_grid() {
    let v = parse(basis_curves(4, 4001));
    let curves = v["curves"].as_array().unwrap();
    let m = v["x"].as_array().unwrap().len() as f64 - 1.0;
    for a in curves {
        for b in curves {
            let a: Vec<f64> = a
                .as_array()
                .unwrap()
                .iter()
                .map(|x| x.as_f64().unwrap())
                .collect();
            let b: Vec<f64> = b
                .as_array()
                .unwrap()
                .iter()
                .map(|x| x.as_f64().unwrap())
                .collect();
            // trapezoid rule
            let s: f64 = (0..a.len())
                .map(|i| a[i] * b[i] * if i == 0 || i == a.len() - 1 { 0.5 } else { 1.0 })
                .sum::<f64>()
                / m;
            assert!(s.abs() < 1e-5 || (s - 1.0).abs() < 1e-5, "{s}");
        }
    }
}

#[test]
fn strong_contamination_is_rejected() {
    let v = parse(uniformity_explorer(1000, 2, 0.3, 4, 300));
    assert!(v["p_value"].as_f64().unwrap() <= 0.05);
    assert_eq!(
        v["histogram"]
            .as_array()
            .unwrap()
            .iter()
            .map(|c| c.as_u64().unwrap())
            .sum::<u64>(),
        1000
    );
    assert!(v["selected"].as_u64().unwrap() >= 2);
}

#[test]
fn null_run_is_reproducible() {
    let a = uniformity_explorer(300, 1, 0.0, 11, 200).unwrap();
    assert_eq!(a, uniformity_explorer(300, 1, 0.0, 11, 200).unwrap());
    let v: Value = serde_json::from_str(&a).unwrap();
    let p = v["p_value"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&p));
}

#[test]
fn explorer_rejects_bad_arguments() {
    assert!(uniformity_explorer(100, 0, 0.1, 1, 200).is_err());
    assert!(uniformity_explorer(100, 2, 2.0, 1, 200).is_err());
    assert!(uniformity_explorer(100, 2, 0.1, 1, 10).is_err());
    assert!(uniformity_explorer(1, 2, 0.1, 1, 200).is_err());
}

#[test]
fn prohorov_bound_dips_inside_the_window() {
    // with η = M y / sqrt(n) the exponent turns back up past y = 2 sqrt(n) / (3M)
    let v = parse(prohorov_curve(2, 5000, 50));
    for b in v["bounds"].as_array().unwrap() {
        let bound: Vec<f64> = b["bound"]
            .as_array()
            .unwrap()
            .iter()
            .map(|x| x.as_f64().unwrap())
            .collect();
        let m = b["m"].as_f64().unwrap();
        let y: Vec<f64> = b["y"]
            .as_array()
            .unwrap()
            .iter()
            .map(|x| x.as_f64().unwrap())
            .collect();
        assert_eq!(bound.len(), 50);
        let turn = 2.0 * 5000f64.sqrt() / (3.0 * m);
        for i in 1..50 {
            if y[i] <= turn {
                assert!(bound[i] <= bound[i - 1]);
            }
        }
        assert!(bound.iter().cloned().fold(f64::INFINITY, f64::min) < 1.0);
    }
    let tail = v["chi_square"]["tail"].as_array().unwrap();
    assert!(tail[0].as_f64().unwrap() < 1.0);
}

#[test]
fn empty_window_is_reported_not_an_error() {
    // sqrt(n)/M < sqrt(2k) for tiny n
    let v = parse(prohorov_curve(3, 4, 10));
    assert!(v["bounds"]
        .as_array()
        .unwrap()
        .iter()
        .all(|b| b["y"].as_array().unwrap().is_empty()));
}
