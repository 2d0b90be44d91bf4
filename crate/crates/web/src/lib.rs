//! Browser bindings for the static demo page in `www/`.
//!
//! Each export takes plain numbers and returns a JSON string, so the page
//! needs no glue beyond `JSON.parse`.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use sidecode::decoders::{ConditionalModel, DecodeResult};
use sidecode::polar::{self, PolarMode, ZMethod};
use sidecode::sim::{self, BoundReport, BoundSet};
use sidecode::source::{seeded_rng, JointSourceLaw};
use sidecode::FieldSpec;

/// Keeps exact construction interactive in the browser.
const MAX_K: usize = 6;

#[derive(Serialize)]
struct Profile {
    n: usize,
    z: Vec<f64>,
    h: Vec<f64>,
    frozen: Vec<bool>,
    threshold: f64,
    rate: f64,
    sc_bound: f64,
    conditional_entropy: f64,
}

#[derive(Serialize)]
struct Trial {
    x: Vec<u8>,
    y: Vec<u8>,
    c1: Vec<u8>,
    sc: Vec<u8>,
    ssc: Vec<u8>,
    sc_ok: bool,
    ssc_ok: bool,
}

#[derive(Serialize)]
struct Verification<'a> {
    instance: String,
    satisfied: usize,
    total: usize,
    reports: &'a [BoundReport],
}

fn law(p: u32, theta: f64, k: usize) -> Result<JointSourceLaw, String> {
    if k > MAX_K {
        return Err(format!("k must be at most {MAX_K} here"));
    }
    let field = FieldSpec::new(p).map_err(|e| e.to_string())?;
    JointSourceLaw::symmetric(field, theta).map_err(|e| e.to_string())
}

pub fn profile_json(p: u32, theta: f64, k: usize, beta: f64) -> Result<String, String> {
    let law = law(p, theta, k)?;
    let (code, stats) = polar::construct(&law, k, beta, ZMethod::Exact).map_err(|e| e.to_string())?;
    serde_json::to_string(&Profile {
        n: code.n(),
        z: stats.z,
        h: stats.h,
        frozen: code.frozen().to_vec(),
        threshold: code.threshold(),
        rate: code.rate(),
        sc_bound: code.sc_error_bound(),
        conditional_entropy: law.conditional_entropy(),
    })
    .map_err(|e| e.to_string())
}

pub fn trial_json(p: u32, theta: f64, k: usize, beta: f64, seed: u64) -> Result<String, String> {
    let law = law(p, theta, k)?;
    let (code, _) = polar::construct(&law, k, beta, ZMethod::Exact).map_err(|e| e.to_string())?;
    let (x, y) = polar::sample_trial(&law, code.n(), &mut seeded_rng(seed, 0));
    let c1 = polar::polar_encode(&code, &x).map_err(|e| e.to_string())?;
    let run = |mode| -> Result<Vec<u8>, String> {
        let r: DecodeResult = polar::polar_decode(&code, &law, &c1, &y, mode).map_err(|e| e.to_string())?;
        Ok(r.x_hat.unwrap_or_default())
    };
    let sc = run(PolarMode::Sc)?;
    let ssc = run(PolarMode::Ssc { seed })?;
    serde_json::to_string(&Trial {
        sc_ok: sc == x,
        ssc_ok: ssc == x,
        x,
        y,
        c1,
        sc,
        ssc,
    })
    .map_err(|e| e.to_string())
}

pub fn verify_json(seed: u64) -> Result<String, String> {
    let inst = sim::random_instance(seed, 0).map_err(|e| e.to_string())?;
    let model: &ConditionalModel = &inst.model;
    let reports = sim::check_bounds(model, BoundSet::default()).map_err(|e| e.to_string())?;
    serde_json::to_string(&Verification {
        instance: inst.description,
        satisfied: reports.iter().filter(|r| r.satisfied == Some(true)).count(),
        total: reports.len(),
        reports: &reports,
    })
    .map_err(|e| e.to_string())
}

/// Exact Z and H for every index of a length-2^k polar code.
#[wasm_bindgen]
pub fn polar_profile(p: u32, theta: f64, k: usize, beta: f64) -> Result<String, JsValue> {
    profile_json(p, theta, k, beta).map_err(|e| JsValue::from_str(&e))
}

/// One sample, encode and SC/SSC decode round.
#[wasm_bindgen]
pub fn polar_trial(p: u32, theta: f64, k: usize, beta: f64, seed: u64) -> Result<String, JsValue> {
    trial_json(p, theta, k, beta, seed).map_err(|e| JsValue::from_str(&e))
}

/// Bound checks on the random instance drawn from `seed`.
#[wasm_bindgen]
pub fn verify_instance(seed: u64) -> Result<String, JsValue> {
    verify_json(seed).map_err(|e| JsValue::from_str(&e))
}
