//! Browser bindings for the static demo page: element radiation patterns,
//! median secrecy rate against transmit power, and the per-pose
//! secrecy-rate map of one scenario.
//!
//! The `*_json` functions hold the logic and run natively; the exported
//! wrappers only convert errors for JavaScript.

use std::f64::consts::PI;

use rasec::channel::{RadiationPattern, Scenario};
use rasec::config::{override_field, PatternForm, ScenarioConfig};
use rasec::experiment::median;
use rasec::optimizer::{run_two_stage, solve_fixed_pose, Baseline};
use rasec::Result;
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

/// Floor for plotted gains, dBi.
pub const GAIN_FLOOR_DB: f64 = -40.0;

fn parse_doc(config_json: &str) -> Result<Value> {
    let doc: Value = serde_json::from_str(config_json)?;
    ScenarioConfig::from_value(&doc)?;
    Ok(doc)
}

/// Off-boresight angles in degrees, `points` samples over `[−90°, 90°]`.
#[wasm_bindgen]
pub fn pattern_angles(points: usize) -> Vec<f64> {
    let n = points.max(2);
    (0..n)
        .map(|i| -90.0 + 180.0 * i as f64 / (n - 1) as f64)
        .collect()
}

/// Element gain in dBi along the principal cut.
pub fn pattern_gains(p: u32, form: &str, points: usize) -> Result<Vec<f64>> {
    let form: PatternForm = serde_json::from_value(Value::from(form))?;
    let pattern = RadiationPattern::new(p, form);
    Ok(pattern_angles(points)
        .into_iter()
        .map(|deg| {
            let a = deg * PI / 180.0;
            let g = pattern.element_gain(a.abs(), a);
            if g > 0.0 {
                (10.0 * g.log10()).max(GAIN_FLOOR_DB)
            } else {
                GAIN_FLOOR_DB
            }
        })
        .collect())
}

/// Median secrecy rate (infeasible counted as zero) per scheme and
/// transmit power: `{"values": [...], "series": [{"name", "median"}]}`.
pub fn sr_vs_pt_json(
    config_json: &str,
    p_t_dbm: &[f64],
    seeds: u32,
    schemes: &str,
) -> Result<String> {
    let doc = parse_doc(config_json)?;
    let schemes: Vec<Baseline> = schemes
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(str::parse)
        .collect::<Result<_>>()?;
    let mut series = Vec::new();
    for b in &schemes {
        let mut medians = Vec::with_capacity(p_t_dbm.len());
        for &v in p_t_dbm {
            let mut d = doc.clone();
            override_field(&mut d, "P_t_dBm", v)?;
            let cfg = ScenarioConfig::from_value(&d)?;
            let rates: Vec<f64> = (0..seeds as u64)
                .map(|s| {
                    Scenario::new(&cfg, s)
                        .and_then(|sc| run_two_stage(&sc, *b))
                        .map_or(0.0, |sol| sol.metrics.r_s)
                })
                .collect();
            medians.push(median(&rates));
        }
        series.push(json!({ "name": b.name(), "median": medians }));
    }
    Ok(json!({ "values": p_t_dbm, "series": series }).to_string())
}

/// Secrecy rate at every candidate pose, rotation-major; infeasible poses
/// are `null`. Also names the nominal pose and the two-stage choice.
pub fn pose_sr_map_json(config_json: &str, seed: u32) -> Result<String> {
    let cfg = ScenarioConfig::from_value(&parse_doc(config_json)?)?;
    let sc = Scenario::new(&cfg, seed as u64)?;
    let rates: Vec<Option<f64>> = (0..sc.pose_count())
        .map(|i| solve_fixed_pose(&sc, i).ok().map(|s| s.metrics.r_s))
        .collect();
    let chosen = run_two_stage(&sc, Baseline::Proposed)
        .ok()
        .map(|s| s.pose_index);
    Ok(json!({
        "rotations": sc.rotations.len(),
        "origins": sc.origins.len(),
        "rs": rates,
        "nominal": sc.nominal_pose(),
        "chosen": chosen,
    })
    .to_string())
}

fn js(e: rasec::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// Pattern form is `printed`, `conventional` or `isotropic`.
#[wasm_bindgen]
pub fn pattern_curve(p: u32, form: &str, points: usize) -> Result<Vec<f64>, JsError> {
    pattern_gains(p, form, points).map_err(js)
}

/// Schemes are comma-separated names such as `proposed,no-tris-opt`.
#[wasm_bindgen]
pub fn sr_vs_pt(
    config_json: &str,
    p_t_dbm: Vec<f64>,
    seeds: u32,
    schemes: &str,
) -> Result<String, JsError> {
    sr_vs_pt_json(config_json, &p_t_dbm, seeds, schemes).map_err(js)
}

#[wasm_bindgen]
pub fn pose_sr_map(config_json: &str, seed: u32) -> Result<String, JsError> {
    pose_sr_map_json(config_json, seed).map_err(js)
}
