//! Browser demo bindings: a thin JSON facade over the core crate for the
//! static page in `www/`. Three interactive operations are exposed:
//! path simulation, theoretical spectrum curves, and a pointwise Holder
//! sweep along the simulated path.
//!
//! All exported functions return JSON strings so the JS side needs no
//! generated classes; the plain `*_impl` functions compile and run on
//! native targets, which is where they are unit tested.

use jumpfrac::error::Result;
use jumpfrac::expr::{parse_expr, Expr};
use jumpfrac::model::{Hypothesis, JumpKind, ModelSpec};
use jumpfrac::points::{approx_rate_scaled, observation_depth, PointSystem};
use jumpfrac::regularity::{estimate_holder, theoretical_exponent, HolderFlag, DEFAULT_H_CAP};
use jumpfrac::rng::{derive_seed, SplitMix64};
use jumpfrac::sde::{simulate_path, SamplePath, SimulationConfig};
use jumpfrac::spectrum::{local_spectrum, CurveFlag, IntervalContext};
use serde::Serialize;
use wasm_bindgen::prelude::*;

fn build_model(sigma: &str, b: &str, beta_tilde: &str) -> Result<ModelSpec> {
    let sigma = if sigma.trim().eq_ignore_ascii_case("zero") || sigma.trim().is_empty() {
        None
    } else {
        Some(parse_expr(sigma)?)
    };
    let beta = parse_expr(beta_tilde)?;
    let band = scan_band(&beta)?;
    let model = ModelSpec {
        sigma,
        b: if b.trim().is_empty() {
            Expr::Num(0.0)
        } else {
            parse_expr(b)?
        },
        jump: JumpKind::BuiltinStableLike { beta_tilde: beta },
        beta_band: band,
        hypothesis: Hypothesis::None,
        x0: 0.0,
    };
    model.validate()?;
    Ok(model)
}

fn scan_band(beta: &Expr) -> Result<(f64, f64)> {
    let mut mn = f64::INFINITY;
    let mut mx = f64::NEG_INFINITY;
    for i in 0..=2048 {
        let x = -10.0 + 20.0 * i as f64 / 2048.0;
        let v = beta.eval(x)?;
        mn = mn.min(v);
        mx = mx.max(v);
    }
    if !(mn > 0.0 && mx < 2.0) {
        return Err(jumpfrac::Error::invalid(format!(
            "beta_tilde range [{mn:.3}, {mx:.3}] must stay inside (0, 2)"
        )));
    }
    Ok((mn, mx))
}

fn run_simulation(model: &ModelSpec, z_min: f64, seed: u64) -> Result<(PointSystem, SamplePath)> {
    let cfg = SimulationConfig {
        z_min,
        seed: derive_seed(seed, "path", 0),
        ..Default::default()
    };
    let ps = PointSystem::sample(cfg.horizon, z_min, derive_seed(seed, "points", 0))?;
    let path = simulate_path(model, &ps, &cfg)?;
    Ok((ps, path))
}

#[derive(Serialize)]
struct JumpOut {
    t: f64,
    size: f64,
}

#[derive(Serialize)]
struct PathOut {
    t: Vec<f64>,
    m: Vec<f64>,
    x: Vec<f64>,
    y: Vec<f64>,
    z: Vec<f64>,
    beta: Vec<f64>,
    jumps: Vec<JumpOut>,
    n_jumps: usize,
    beta0: f64,
}

pub fn simulate_json_impl(
    sigma: &str,
    b: &str,
    beta_tilde: &str,
    z_min: f64,
    seed: u32,
) -> Result<String> {
    let model = build_model(sigma, b, beta_tilde)?;
    let (_ps, path) = run_simulation(&model, z_min, seed as u64)?;
    // downsample for plotting, always keeping jump nodes
    let n = path.len();
    let stride = (n / 4096).max(1);
    let mut out = PathOut {
        t: Vec::new(),
        m: Vec::new(),
        x: Vec::new(),
        y: Vec::new(),
        z: Vec::new(),
        beta: Vec::new(),
        jumps: Vec::new(),
        n_jumps: 0,
        beta0: model.local_index(model.x0)?,
    };
    for i in 0..n {
        let jump = path.is_jump(i);
        if jump {
            out.n_jumps += 1;
            if path.jump_marks()[i].abs() > 1e-3 {
                out.jumps.push(JumpOut {
                    t: path.times()[i],
                    size: path.jump_marks()[i],
                });
            }
        }
        if i % stride == 0 || jump || i == n - 1 {
            out.t.push(path.times()[i]);
            out.m.push(path.values()[i]);
            out.x.push(path.component_x()[i]);
            out.y.push(path.component_y()[i]);
            out.z.push(path.component_z()[i]);
            out.beta.push(model.local_index(path.values()[i])?);
        }
    }
    Ok(serde_json::to_string(&out).expect("path serializes"))
}

#[derive(Serialize)]
struct SpectrumOut {
    h: Vec<f64>,
    d: Vec<Option<f64>>,
    flag: Vec<String>,
    gamma_sup: f64,
    gamma_inf: f64,
    sigma_zero: bool,
}

pub fn spectrum_json_impl(
    sigma: &str,
    b: &str,
    beta_tilde: &str,
    z_min: f64,
    seed: u32,
    h_steps: usize,
) -> Result<String> {
    let model = build_model(sigma, b, beta_tilde)?;
    let (ps, path) = run_simulation(&model, z_min, seed as u64)?;
    let mut beta_samples = Vec::with_capacity(2049);
    for k in 0..=2048 {
        let t = k as f64 / 2048.0;
        beta_samples.push(model.local_index(path.value_at(t))?);
    }
    let mut beta_jump_values = Vec::new();
    for e in ps.events().iter().take(512) {
        let i = path.index_at(e.t);
        beta_jump_values.push(model.local_index(path.values()[i])?);
    }
    let ictx = IntervalContext {
        sigma_zero: model.sigma_zero(),
        beta_samples,
        beta_jump_values,
    };
    let steps = h_steps.clamp(16, 2048);
    let h_hi = (1.2 / ictx.gamma_inf()).min(2.5);
    let mut out = SpectrumOut {
        h: Vec::with_capacity(steps),
        d: Vec::with_capacity(steps),
        flag: Vec::with_capacity(steps),
        gamma_sup: ictx.gamma_sup(),
        gamma_inf: ictx.gamma_inf(),
        sigma_zero: ictx.sigma_zero,
    };
    for k in 0..steps {
        let h = h_hi * k as f64 / (steps - 1) as f64;
        let v = local_spectrum(&ictx, h)?;
        out.h.push(h);
        out.d.push(if v.d.is_finite() { Some(v.d) } else { None });
        out.flag.push(
            match v.flag {
                CurveFlag::Ok => {
                    if v.d.is_finite() {
                        "ok"
                    } else {
                        "neginf"
                    }
                }
                CurveFlag::Undefined => "undefined",
                CurveFlag::Empty => "empty",
            }
            .to_string(),
        );
    }
    Ok(serde_json::to_string(&out).expect("spectrum serializes"))
}

#[derive(Serialize)]
struct HolderOut {
    t: Vec<f64>,
    h_hat: Vec<f64>,
    h_theory: Vec<f64>,
    delta_hat: Vec<f64>,
    beta_t: Vec<f64>,
}

pub fn holder_json_impl(
    sigma: &str,
    b: &str,
    beta_tilde: &str,
    z_min: f64,
    seed: u32,
    n_points: usize,
) -> Result<String> {
    let model = build_model(sigma, b, beta_tilde)?;
    let (ps, path) = run_simulation(&model, z_min, seed as u64)?;
    let n_points = n_points.clamp(4, 400);
    let mut rng = SplitMix64::new(derive_seed(seed as u64, "holder-times", 0));
    let mut out = HolderOut {
        t: Vec::new(),
        h_hat: Vec::new(),
        h_theory: Vec::new(),
        delta_hat: Vec::new(),
        beta_t: Vec::new(),
    };
    let margin = 2f64.powi(-6);
    let mut attempts = 0;
    while out.t.len() < n_points && attempts < n_points * 50 {
        attempts += 1;
        let t = margin + rng.next_f64() * (1.0 - 2.0 * margin);
        let est = estimate_holder(&path, t, (6, 11), DEFAULT_H_CAP)?;
        if est.flag == HolderFlag::AtJump {
            continue;
        }
        let rate = approx_rate_scaled(&ps, t, observation_depth(z_min), 16.0)?;
        let beta_t = model.local_index(path.value_at(t))?;
        out.t.push(t);
        out.h_hat.push(est.h_hat);
        out.h_theory.push(theoretical_exponent(
            beta_t,
            rate.delta_hat,
            model.sigma_zero(),
        ));
        out.delta_hat.push(rate.delta_hat);
        out.beta_t.push(beta_t);
    }
    Ok(serde_json::to_string(&out).expect("holder serializes"))
}

fn to_js<T>(r: Result<T>) -> std::result::Result<T, JsValue> {
    r.map_err(|e| JsValue::from_str(&e.to_string()))
}

/// Simulate one path and return plot-ready JSON
/// (`{t, m, x, y, z, beta, jumps, n_jumps, beta0}`).
#[wasm_bindgen]
pub fn simulate_json(
    sigma: &str,
    b: &str,
    beta_tilde: &str,
    z_min: f64,
    seed: u32,
) -> std::result::Result<String, JsValue> {
    to_js(simulate_json_impl(sigma, b, beta_tilde, z_min, seed))
}

/// Theoretical local multifractal spectrum along a simulated trajectory
/// (`{h, d, flag, gamma_sup, gamma_inf, sigma_zero}`).
#[wasm_bindgen]
pub fn spectrum_json(
    sigma: &str,
    b: &str,
    beta_tilde: &str,
    z_min: f64,
    seed: u32,
    h_steps: usize,
) -> std::result::Result<String, JsValue> {
    to_js(spectrum_json_impl(
        sigma, b, beta_tilde, z_min, seed, h_steps,
    ))
}

/// Pointwise Holder estimates vs the closed-form exponent at random
/// continuity times (`{t, h_hat, h_theory, delta_hat, beta_t}`).
#[wasm_bindgen]
pub fn holder_json(
    sigma: &str,
    b: &str,
    beta_tilde: &str,
    z_min: f64,
    seed: u32,
    n_points: usize,
) -> std::result::Result<String, JsValue> {
    to_js(holder_json_impl(
        sigma, b, beta_tilde, z_min, seed, n_points,
    ))
}
