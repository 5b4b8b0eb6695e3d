//! Browser bindings for the precoding simulator. Every export returns a JSON
//! (or CSV) string so the page can stay plain JavaScript.

use qpl_core::baseline::{unaware_precoder, wf_infinite, PrecodingResult};
use qpl_core::channel::{draw_channel, gamma_from_snr_db, ChannelConfig};
use qpl_core::experiment::{run_experiment, PartialConfig};
use qpl_core::heuristic::{four_candidates, heuristic_precode, HeuristicConfig};
use qpl_core::metrics::{mse_closed_form, per_ue_sinr};
use qpl_core::quantizer::QuantizerSpec;
use qpl_core::sphere::sphere_precode;
use qpl_core::Complex64;
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

fn js(e: qpl_core::Error) -> JsError {
    JsError::new(&e.to_string())
}

fn pair(z: Complex64) -> Value {
    json!([z.re, z.im])
}

/// Designed quantizer for the given per-entry variance, the cell of
/// `re + j·im`, and the four refinement candidates around it.
#[wasm_bindgen]
pub fn quantizer_view(levels: usize, variance: f64, re: f64, im: f64) -> Result<String, JsError> {
    let spec = QuantizerSpec::designed(levels, variance).map_err(js)?;
    let w = Complex64::new(re, im);
    let out = json!({
        "step": spec.step(),
        "bits": spec.bits(),
        "labels": spec.labels(),
        "thresholds": spec.thresholds(),
        "quantized": pair(spec.quantize_scalar(w)),
        "candidates": four_candidates(&spec, w).into_iter().map(pair).collect::<Vec<_>>(),
    });
    Ok(out.to_string())
}

fn summarize(r: &PrecodingResult, h: &qpl_core::CMat, n0: f64) -> Value {
    let p_hat = r.effective();
    let sinr = per_ue_sinr(h, &p_hat, n0);
    json!({
        "scheme": r.scheme.name(),
        "sum_rate": sinr.iter().map(|s| (1.0 + s).log2()).sum::<f64>(),
        "sinr": sinr,
        "mse": mse_closed_form(h, &p_hat, &r.beta, n0),
        "transmit_power": r.transmit_power(),
        "alpha": r.alpha,
        "sphere_nodes": r.sphere.as_ref().map(|d| d.total_nodes),
    })
}

/// Draw one channel with equal per-UE SNR and precode it with every
/// scheme. Power budget and noise power are both one.
#[wasm_bindgen]
pub fn precode_realization(
    m: usize,
    k: usize,
    levels: usize,
    snr_db: f64,
    seed: u32,
) -> Result<String, JsError> {
    let (q, n0) = (1.0, 1.0);
    let gamma = gamma_from_snr_db(&vec![snr_db; k], n0, q);
    let state = draw_channel(&ChannelConfig::new(m, gamma, n0, q), seed.into()).map_err(js)?;
    let h = &state.h;
    let spec = QuantizerSpec::designed(levels, q / (k * m) as f64).map_err(js)?;
    let results = [
        wf_infinite(h, q, n0),
        unaware_precoder(h, q, n0, &spec),
        heuristic_precode(h, q, n0, &spec, &HeuristicConfig::default()).map(|(r, _)| r),
        sphere_precode(h, q, n0, &spec, &Default::default()),
    ];
    let mut rows = Vec::with_capacity(results.len());
    for r in results {
        rows.push(summarize(&r.map_err(js)?, h, n0));
    }
    Ok(json!({ "step": spec.step(), "schemes": rows }).to_string())
}

/// Run a Monte-Carlo experiment from a flat JSON config and return its CSV.
/// Wall times are reported as zero.
#[wasm_bindgen]
pub fn sum_rate_curve(config_json: &str) -> Result<String, JsError> {
    let mut partial = PartialConfig::from_json(config_json).map_err(js)?;
    partial.timing = Some(false);
    let cfg = partial.resolve().map_err(js)?;
    Ok(run_experiment(&cfg).map_err(js)?.to_csv())
}
