//! wasm-bindgen bindings for the browser demo in `www/`.

pub mod demo;

use wasm_bindgen::prelude::*;

fn js(r: Result<String, String>) -> Result<String, JsError> {
    r.map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = basisCurves)]
pub fn basis_curves(k: usize, points: usize) -> Result<String, JsError> {
    js(demo::basis_curves(k, points))
}

#[wasm_bindgen(js_name = uniformityExplorer)]
pub fn uniformity_explorer(
    n: usize,
    component: usize,
    amplitude: f64,
    seed: u32,
    replications: usize,
) -> Result<String, JsError> {
    js(demo::uniformity_explorer(
        n,
        component,
        amplitude,
        u64::from(seed),
        replications,
    ))
}

#[wasm_bindgen(js_name = prohorovCurve)]
pub fn prohorov_curve(k: usize, n: u32, points: usize) -> Result<String, JsError> {
    js(demo::prohorov_curve(k, u64::from(n), points))
}
