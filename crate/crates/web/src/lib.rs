//! Browser bindings for the demo page in `www/`.
//!
//! Each export returns a flat `Float64Array` of rows so that the page can
//! draw it without any JS-side parsing. The plain-Rust functions behind the
//! exports are public for native tests.

use nonmarkov::quadrature::QuadratureConfig;
use nonmarkov::quantifiers::n1;
use nonmarkov::response::{propagate_means_series, ModelParams};
use nonmarkov::spectral::SpectralDensity;
use wasm_bindgen::prelude::*;

/// Upper bound on grid sizes requested from the page.
pub const MAX_POINTS: usize = 2000;

fn grid(lo: f64, hi: f64, steps: usize, log: bool) -> Result<Vec<f64>, String> {
    if !(2..=MAX_POINTS).contains(&steps) {
        return Err(format!("steps must lie in 2..={MAX_POINTS}, got {steps}"));
    }
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(format!("need finite bounds with lo < hi, got [{lo}, {hi}]"));
    }
    if log && lo <= 0.0 {
        return Err("log spacing needs a positive lower bound".into());
    }
    Ok((0..steps)
        .map(|i| {
            let s = i as f64 / (steps - 1) as f64;
            if log {
                lo * (hi / lo).powf(s)
            } else {
                lo + s * (hi - lo)
            }
        })
        .collect())
}

fn unit_params(beta: f64) -> ModelParams {
    ModelParams {
        beta,
        ..ModelParams::default()
    }
}

/// Rows `(D, n1_qq, n1_qp, n1_pp)` for an Ohmic bath over a log grid of `D`.
pub fn ohmic_n1_rows(d_min: f64, d_max: f64, steps: usize) -> Result<Vec<f64>, String> {
    let cfg = QuadratureConfig::default();
    let mut out = Vec::with_capacity(4 * steps);
    for d in grid(d_min, d_max, steps, true)? {
        let sd = SpectralDensity::ohmic(d).map_err(|e| e.to_string())?;
        let m = n1(&unit_params(1.0), &sd, &cfg).map_err(|e| format!("D = {d}: {e}"))?;
        out.extend([d, m[0][0], m[0][1], m[1][1]]);
    }
    Ok(out)
}

/// Rows `(Γ, n1_qq, n1_qp, n1_pp)` for a peaked bath over a log grid of
/// widths.
pub fn peaked_n1_rows(d: f64, center: f64, g_min: f64, g_max: f64, steps: usize) -> Result<Vec<f64>, String> {
    let cfg = QuadratureConfig::default();
    let mut out = Vec::with_capacity(4 * steps);
    for g in grid(g_min, g_max, steps, true)? {
        let sd = SpectralDensity::peaked_any_width(d, g, center).map_err(|e| e.to_string())?;
        let m = n1(&unit_params(1.0), &sd, &cfg).map_err(|e| format!("Γ = {g}: {e}"))?;
        out.extend([g, m[0][0], m[0][1], m[1][1]]);
    }
    Ok(out)
}

/// Rows `(t, ⟨q⟩, ⟨p⟩)` after a kick `(a_q, a_p)`. `kind` is `"ohmic"` or
/// `"peaked"`; `gamma` and `center` are ignored for Ohmic baths.
#[allow(clippy::too_many_arguments)]
pub fn mean_rows(
    kind: &str,
    d: f64,
    gamma: f64,
    center: f64,
    a_q: f64,
    a_p: f64,
    t_max: f64,
    points: usize,
) -> Result<Vec<f64>, String> {
    let sd = match kind {
        "ohmic" => SpectralDensity::ohmic(d),
        "peaked" => SpectralDensity::peaked_any_width(d, gamma, center),
        other => return Err(format!("unknown density `{other}`")),
    }
    .map_err(|e| e.to_string())?;
    let times = grid(0.0, t_max, points, false)?;
    let means = propagate_means_series(&unit_params(1.0), &sd, a_q, a_p, &times, &QuadratureConfig::default())
        .map_err(|e| e.to_string())?;
    Ok(times
        .iter()
        .zip(means)
        .flat_map(|(&t, (q, p))| [t, q, p])
        .collect())
}

#[wasm_bindgen(js_name = ohmicN1Curve)]
pub fn ohmic_n1_curve(d_min: f64, d_max: f64, steps: usize) -> Result<Vec<f64>, JsValue> {
    ohmic_n1_rows(d_min, d_max, steps).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = peakedN1Curve)]
pub fn peaked_n1_curve(d: f64, center: f64, g_min: f64, g_max: f64, steps: usize) -> Result<Vec<f64>, JsValue> {
    peaked_n1_rows(d, center, g_min, g_max, steps).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = meanTrace)]
#[allow(clippy::too_many_arguments)]
pub fn mean_trace(
    kind: &str,
    d: f64,
    gamma: f64,
    center: f64,
    a_q: f64,
    a_p: f64,
    t_max: f64,
    points: usize,
) -> Result<Vec<f64>, JsValue> {
    mean_rows(kind, d, gamma, center, a_q, a_p, t_max, points).map_err(|e| JsValue::from_str(&e))
}
