use oneshot_wasm::{code_sim_json, dequantize_json, hsw_rate_json};

const CHANNEL: &str = include_str!("../../cli/data/channel_d3.json");
const STATE: &str = include_str!("../../cli/data/state_d3.json");
const CQ: &str = include_str!("../../cli/data/cq_d3.json");
const BB84: &str = include_str!("../../cli/data/bb84.json");

#[test]
fn dequantize_margin_is_nonnegative() {
    let v: serde_json::Value = serde_json::from_str(&dequantize_json(CHANNEL, STATE, 0.0, 0.0).unwrap()).unwrap();
    assert!(v["margin"].as_f64().unwrap() >= -1e-8);
}

#[test]
fn code_sim_stays_under_bound() {
    let v: serde_json::Value = serde_json::from_str(&code_sim_json(CQ, &[0.6, 0.4], 0.0).unwrap()).unwrap();
    assert_eq!(v["examined"], 6);
    assert!(v["margin"].as_f64().unwrap() >= -1e-8);
}

#[test]
fn rate_curve_has_one_row_per_n() {
    let v: serde_json::Value = serde_json::from_str(&hsw_rate_json(BB84, 3, 0.01, 0.3).unwrap()).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 3);
}

#[test]
fn errors_surface_as_messages() {
    let e = code_sim_json("{", &[1.0], 0.0).unwrap_err();
    assert!(e.to_string().contains("line 1"));
}
