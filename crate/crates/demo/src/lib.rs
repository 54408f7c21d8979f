//! WebAssembly bindings behind `www/index.html`.
//!
//! Each operation takes plain numbers and returns a JSON string, so the page
//! needs no generated TypeScript types. The `*_json` functions are the same
//! operations for native callers and tests.

use nepv::dense::extract_nepv_solutions;
use nepv::invit::{hybrid_solve, ii_solve, HybridConfig, IiConfig};
use nepv::linalg::fix_phase;
use nepv::opdet::build_deltas_with_cap;
use nepv::problems::{gen_pde, gen_random, random_start, PdeSpec};
use nepv::resinv::{ri_solve, ris_solve, IterationResult, RiConfig};
use nepv::{build_mep, count_solutions, random_g, Classification, C64};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Keeps the dense path small enough for a browser tab.
const DEMO_ENTRY_CAP: u128 = 4_000_000;

#[derive(Serialize)]
struct Point {
    re: f64,
    im: f64,
    class: &'static str,
    residual: f64,
}

#[derive(Serialize)]
struct Spectrum {
    n: usize,
    m: usize,
    bezout: u64,
    points: Vec<Point>,
}

#[derive(Serialize)]
struct Trace {
    method: &'static str,
    converged: bool,
    lambda: [f64; 2],
    residuals: Vec<f64>,
    error: Option<String>,
}

#[derive(Serialize)]
struct PdeSolution {
    grid: Vec<f64>,
    u: Vec<f64>,
    lambda: [f64; 2],
    residual: f64,
    converged: bool,
    iterations: usize,
    residuals: Vec<f64>,
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("demo payloads are serializable")
}

fn class_name(c: Classification) -> &'static str {
    match c {
        Classification::True => "true",
        Classification::Spurious => "spurious",
        Classification::NonSymmetric => "non-symmetric",
    }
}

/// Every eigenvalue of the linearized problem for a seeded random instance,
/// labeled by classification.
pub fn spectrum_json(n: usize, m: usize, seed: u64) -> Result<String, String> {
    let (p, g) = gen_random(n, m, seed).map_err(|e| e.to_string())?;
    let mep = build_mep(&p, &g).map_err(|e| e.to_string())?;
    let ds = build_deltas_with_cap(&mep, DEMO_ENTRY_CAP).map_err(|e| e.to_string())?;
    let sol = extract_nepv_solutions(&p, &mep, &ds).map_err(|e| e.to_string())?;
    let points = sol
        .records
        .iter()
        .map(|r| Point {
            re: r.lambda.re,
            im: r.lambda.im,
            class: class_name(r.classification),
            residual: r.residual,
        })
        .collect();
    Ok(to_json(&Spectrum {
        n,
        m,
        bezout: count_solutions(n, m).map_err(|e| e.to_string())?,
        points,
    }))
}

fn trace(method: &'static str, r: IterationResult) -> Trace {
    Trace {
        method,
        converged: r.converged,
        lambda: [r.lambda.re, r.lambda.im],
        residuals: r.history.iter().map(|h| h.residual).collect(),
        error: None,
    }
}

/// Residual histories of RI, RIS and II from the same shift and start on a
/// seeded random instance with one nonlinear term.
pub fn convergence_json(n: usize, seed: u64, sigma_re: f64, sigma_im: f64, max_iter: usize) -> Result<String, String> {
    let (p, g) = gen_random(n, 1, seed).map_err(|e| e.to_string())?;
    let mep = build_mep(&p, &g).map_err(|e| e.to_string())?;
    let sigma = C64::new(sigma_re, sigma_im);
    let x0 = random_start(n, seed);
    let mut cfg = RiConfig::new(sigma, x0.clone());
    cfg.max_iter = max_iter;
    let mut ii = IiConfig::new(sigma, x0);
    ii.max_iter = max_iter;
    let mut traces = Vec::new();
    for (name, run) in [
        ("RI", ri_solve(&mep, &cfg)),
        ("RIS", ris_solve(&mep, &cfg)),
        ("II", ii_solve(&mep, &ii)),
    ] {
        traces.push(match run {
            Ok(r) => trace(name, r),
            Err(e) => Trace {
                method: name,
                converged: false,
                lambda: [f64::NAN, f64::NAN],
                residuals: vec![],
                error: Some(e.to_string()),
            },
        });
    }
    Ok(to_json(&traces))
}

/// Hybrid solve of the boundary value problem on `n` interior nodes.
pub fn pde_json(n: usize, gamma: f64, sigma: f64, k_switch: usize, x0_seed: u64) -> Result<String, String> {
    let spec = PdeSpec { gamma, ..PdeSpec::with_n(n) };
    let p = gen_pde(&spec).map_err(|e| e.to_string())?;
    let mep = build_mep(&p, &random_g(n, 1, 1)).map_err(|e| e.to_string())?;
    let cfg = HybridConfig {
        ii: IiConfig::new(C64::new(sigma, 0.0), random_start(n, x0_seed)),
        k_switch,
        ris_max_iter: 100,
        ris_tol: 1e-12,
    };
    let r = hybrid_solve(&mep, &cfg).map_err(|e| e.to_string())?;
    let mut x = r.x.clone();
    fix_phase(&mut x);
    let peak = x.iter().map(|z| z.norm()).fold(0.0, f64::max);
    Ok(to_json(&PdeSolution {
        grid: spec.grid(),
        u: x.iter().map(|z| z.re / peak).collect(),
        lambda: [r.lambda.re, r.lambda.im],
        residual: r.residual,
        converged: r.converged,
        iterations: r.iterations,
        residuals: r.history.iter().map(|h| h.residual).collect(),
    }))
}

#[wasm_bindgen]
pub fn spectrum(n: usize, m: usize, seed: u32) -> Result<String, JsValue> {
    spectrum_json(n, m, seed as u64).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn convergence(n: usize, seed: u32, sigma_re: f64, sigma_im: f64, max_iter: usize) -> Result<String, JsValue> {
    convergence_json(n, seed as u64, sigma_re, sigma_im, max_iter).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn pde(n: usize, gamma: f64, sigma: f64, k_switch: usize, x0_seed: u32) -> Result<String, JsValue> {
    pde_json(n, gamma, sigma, k_switch, x0_seed as u64).map_err(|e| JsValue::from_str(&e))
}
