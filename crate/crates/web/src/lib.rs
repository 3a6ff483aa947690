//! WebAssembly bindings for the static page in `www/`. Every export returns
//! a JSON string; the page parses it and draws.

use bvtrack::harness::{self, parse_config};
use bvtrack::wave_curves::solve_riemann;
use bvtrack::{Family, FluxModel, Mat2, StateVec};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

/// Segments beyond this many are left out of the x-t diagram.
pub const MAX_DRAWN_SEGMENTS: usize = 20_000;

fn model(name: &str) -> Result<FluxModel, String> {
    FluxModel::builtin(name).ok_or_else(|| format!("unknown model {name:?}"))
}

pub fn feedback_json(k: [f64; 4], lambdas: Option<(f64, f64)>, model_name: &str) -> Result<String, String> {
    let m = model(model_name)?;
    let analysis = harness::analyze(&Mat2::new(k[0], k[1], k[2], k[3]), &m, lambdas, 0.05);
    serde_json::to_string(&analysis).map_err(|e| e.to_string())
}

pub fn riemann_json(model_name: &str, ul: [f64; 2], ur: [f64; 2]) -> Result<String, String> {
    let m = model(model_name)?;
    let (ul, ur) = (StateVec::new(ul[0], ul[1]), StateVec::new(ur[0], ur[1]));
    let sol = solve_riemann(&m, ul, ur).map_err(|e| e.to_string())?;
    let mid = sol.middle_state;
    let speeds = |k: Family, a: StateVec, b: StateVec| -> Result<[f64; 2], String> {
        let e = |u| m.lambda(k, u).map_err(|e| e.to_string());
        Ok([e(a)?, e(b)?])
    };
    let value = json!({
        "sigma": [sol.sigma(Family::One), sol.sigma(Family::Two)],
        "middle": [mid.u1(), mid.u2()],
        "speeds1": speeds(Family::One, ul, mid)?,
        "speeds2": speeds(Family::Two, mid, ur)?,
    });
    Ok(value.to_string())
}

pub fn simulate_json(model_name: &str, a: f64, h: f64, t_final: f64, amplitude: f64, mode: u32) -> Result<String, String> {
    let config = parse_config(&format!(
        "model = {model_name:?}\na = {a}\nh = {h}\nt_final = {t_final}\n\
         [initial_data]\nkind = \"sine\"\namplitude = {amplitude}\ncells = {cells}\nmode = {mode}\ndirection = [1.0, 1.0]\n",
        cells = ((1.0 / h).round() as usize).max(1),
    ))
    .map_err(|e| e.to_string())?;
    let sim = harness::simulate(&config).map_err(|e| e.to_string())?;
    let series: Vec<Value> = sim
        .series
        .iter()
        .map(|r| json!([r.values.t, r.values.v, r.values.q, r.values.j, r.values.tv_star, r.front_count]))
        .collect();
    let segments = &sim.result.trajectory.segments;
    let drawn: Vec<Value> = segments
        .iter()
        .take(MAX_DRAWN_SEGMENTS)
        .map(|s| json!([s.t0, s.x0, s.t1.min(sim.result.end_values.t), s.x1(), s.family.number(), s.sigma]))
        .collect();
    let value = json!({
        "summary": sim.summary,
        "series": series,
        "segments": drawn,
        "truncated": segments.len() > MAX_DRAWN_SEGMENTS,
    });
    Ok(value.to_string())
}

fn js(r: Result<String, String>) -> Result<String, JsError> {
    r.map_err(|e| JsError::new(&e))
}

/// ρ values, the dissipativity condition and the linear root check for `K`.
/// Non-finite `lambda1` means: use the model speeds at the origin.
#[wasm_bindgen]
pub fn analyze_feedback(a11: f64, a12: f64, a21: f64, a22: f64, lambda1: f64, lambda2: f64, model: &str) -> Result<String, JsError> {
    let lambdas = (lambda1.is_finite() && lambda2.is_finite()).then_some((lambda1, lambda2));
    js(feedback_json([a11, a12, a21, a22], lambdas, model))
}

#[wasm_bindgen]
pub fn riemann(model: &str, ul1: f64, ul2: f64, ur1: f64, ur2: f64) -> Result<String, JsError> {
    js(riemann_json(model, [ul1, ul2], [ur1, ur2]))
}

/// Sine data of the given amplitude resolved at `h`, feedback `K = a·[1 1; 1 1]`.
#[wasm_bindgen]
pub fn simulate(model: &str, a: f64, h: f64, t_final: f64, amplitude: f64, mode: u32) -> Result<String, JsError> {
    js(simulate_json(model, a, h, t_final, amplitude, mode))
}
