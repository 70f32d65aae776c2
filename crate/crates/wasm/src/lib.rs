//! Browser bindings: each export takes JSON text and returns a JSON report,
//! or throws the error message as a string.

use oneshot_core::coding::{best_permutation_search, theorem4_bound, MessageEnsemble, SearchMode};
use oneshot_core::dequantizer::{dequantize_report, DequantizeMode};
use oneshot_core::json::{self, ChannelJson, EnsembleJson, StateJson};
use oneshot_core::types::hsw_rate_curve;
use oneshot_core::Error;
use serde_json::json;
use wasm_bindgen::prelude::*;

fn fail(e: Error) -> JsValue {
    JsValue::from_str(&e.to_string())
}

/// Exhaustive permutation average for a map complementary to a CQ channel
/// and a Schmidt-form state, with the smoothed bound.
pub fn dequantize_json(channel: &str, state: &str, eps: f64, eps_prime: f64) -> Result<String, Error> {
    let tbar = json::parse::<ChannelJson>(channel)?.to_channel()?;
    let rho = json::parse::<StateJson>(state)?.to_state()?;
    let report = dequantize_report(&tbar, &rho, DequantizeMode::Exhaustive, eps, eps_prime)?;
    Ok(serde_json::to_string(&report).expect("report serializes"))
}

/// Best permutation code over every permutation of the input alphabet.
pub fn code_sim_json(channel: &str, weights: &[f64], eps: f64) -> Result<String, Error> {
    let t = json::parse::<ChannelJson>(channel)?.to_channel()?;
    let ens = MessageEnsemble::new(weights.to_vec())?;
    let found = best_permutation_search(&t, &ens, SearchMode::Exhaustive)?;
    let bound = theorem4_bound(&t, &ens, eps)?;
    let out = json!({
        "p_e": found.p_e,
        "mean_p_e": found.mean_p_e,
        "examined": found.examined,
        "cycle_notation": found.code.permutation.cycle_notation(),
        "margin": bound.value - 2.0 * found.p_e,
        "bound": bound,
    });
    Ok(out.to_string())
}

/// Rate curve for `n = 1..=n_max`.
pub fn hsw_rate_json(ensemble: &str, n_max: usize, eps: f64, p_e: f64) -> Result<String, Error> {
    let ens = json::parse::<EnsembleJson>(ensemble)?.to_ensemble()?;
    let curve = hsw_rate_curve(&ens, n_max, eps, p_e)?;
    Ok(serde_json::to_string(&curve).expect("curve serializes"))
}

#[wasm_bindgen]
pub fn dequantize(channel: &str, state: &str, eps: f64, eps_prime: f64) -> Result<String, JsValue> {
    dequantize_json(channel, state, eps, eps_prime).map_err(fail)
}

#[wasm_bindgen]
pub fn code_sim(channel: &str, weights: &[f64], eps: f64) -> Result<String, JsValue> {
    code_sim_json(channel, weights, eps).map_err(fail)
}

#[wasm_bindgen]
pub fn hsw_rate(ensemble: &str, n_max: usize, eps: f64, p_e: f64) -> Result<String, JsValue> {
    hsw_rate_json(ensemble, n_max, eps, p_e).map_err(fail)
}
