//! Browser bindings for the demo page in `www/`. Every export returns a JSON
//! string; failures surface as JS exceptions.

use dgcca::linalg;
use dgcca::nuisance::SelectionConfig;
use dgcca::signal;
use dgcca::simulation::{self, Design, EstimatorConfig, ParamChoice, SetupId, SetupSpec};
use dgcca::{evaluation, Result};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

fn to_js(r: Result<Value>) -> std::result::Result<String, JsError> {
    r.map(|v| v.to_string()).map_err(|e| JsError::new(&e.to_string()))
}

/// Population stage-1 root and view PVEs across canonical angles.
pub fn pve_curve(setup: &str, step_deg: f64) -> Result<Value> {
    let id = SetupId::parse(setup)?;
    if !(step_deg >= 1.0 && step_deg <= 45.0) {
        return Err(dgcca::Error::Config(format!("step {step_deg} outside [1, 45]")));
    }
    let mut points = Vec::new();
    let mut theta = step_deg;
    while theta < 90.0 {
        // Population quantities do not depend on p or n; keep them small.
        let d = Design::new(SetupSpec::new(id, theta, 40, 1.0, 20, 1)?)?;
        points.push(json!({
            "theta": theta,
            "alpha": d.truth.alphas.first().map(|a| a.alpha),
            "pve_c": d.truth.pve_view_c,
        }));
        theta += step_deg;
    }
    Ok(json!({ "setup": id.as_str(), "points": points }))
}

fn spec(setup: &str, theta: f64, p1: usize, n: usize, sigma2: f64, seed: u64) -> Result<SetupSpec> {
    SetupSpec::new(SetupId::parse(setup)?, theta, p1, sigma2, n, seed)
}

/// One simulated dataset, decomposed with true or selected parameters.
pub fn simulate_decompose(setup: &str, theta: f64, p1: usize, n: usize, sigma2: f64, seed: u64, select: bool) -> Result<Value> {
    let design = Design::new(spec(setup, theta, p1, n, sigma2, seed)?)?;
    let (ds, truth) = design.generate(0)?;
    let params = if select {
        ParamChoice::Select(SelectionConfig { sign_bootstrap: 300, rank_bootstrap: 100, ..SelectionConfig::default() })
    } else {
        ParamChoice::Truth
    };
    let cfg = EstimatorConfig { params, ..EstimatorConfig::default() };
    let res = simulation::fit(&ds, &truth, &cfg, seed)?;
    let views: Vec<Value> = res
        .views
        .iter()
        .enumerate()
        .map(|(k, v)| {
            let x = &truth.x[k];
            json!({
                "p": v.x_hat.nrows(),
                "pve_c_true": truth.pve_view_c[k],
                "pve_c": v.pve_view_c,
                "err_x": simulation::rel_err(&v.x_hat, x, x),
                "err_c": simulation::rel_err(&v.c_hat, &truth.c[k], x),
                "err_d": simulation::rel_err(&v.d_hat, &truth.d[k], x),
            })
        })
        .collect();
    let d_hats: Vec<_> = res.views.iter().map(|v| &v.d_hat).collect();
    Ok(json!({
        "views": views,
        "rho1": evaluation::rho1(&d_hats, None).ok(),
        "params": res.params,
        "params_match_truth": simulation::params_match(&res.params, &truth.params),
    }))
}

/// Sample eigenvalues of one noisy view with the selected rank and the
/// soft threshold on the eigenvalue scale.
pub fn spectrum(setup: &str, theta: f64, p1: usize, n: usize, sigma2: f64, seed: u64, view: usize) -> Result<Value> {
    let (ds, _) = simulation::generate(&spec(setup, theta, p1, n, sigma2, seed)?)?;
    let y = &ds
        .views
        .get(view)
        .ok_or_else(|| dgcca::Error::Config(format!("view {view} out of range (0..{})", ds.k())))?
        .values;
    let nf = y.ncols() as f64;
    let eig: Vec<f64> = linalg::singular_values(y).iter().take(40).map(|s| s * s / nf).collect();
    let est = signal::recover_view(y, None, None)?;
    Ok(json!({
        "eigenvalues": eig,
        "rank": est.rank,
        "threshold": est.tau * est.tau / nf,
        "shrunk": est.eigenvalues,
    }))
}

#[wasm_bindgen(js_name = pveCurve)]
pub fn pve_curve_js(setup: &str, step_deg: f64) -> std::result::Result<String, JsError> {
    to_js(pve_curve(setup, step_deg))
}

#[wasm_bindgen(js_name = simulateDecompose)]
pub fn simulate_decompose_js(
    setup: &str,
    theta: f64,
    p1: usize,
    n: usize,
    sigma2: f64,
    seed: u32,
    select: bool,
) -> std::result::Result<String, JsError> {
    to_js(simulate_decompose(setup, theta, p1, n, sigma2, seed as u64, select))
}

#[wasm_bindgen(js_name = spectrum)]
pub fn spectrum_js(setup: &str, theta: f64, p1: usize, n: usize, sigma2: f64, seed: u32, view: usize) -> std::result::Result<String, JsError> {
    to_js(spectrum(setup, theta, p1, n, sigma2, seed as u64, view))
}
