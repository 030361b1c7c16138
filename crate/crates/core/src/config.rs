//! Scenario configuration: strict JSON schema, presets, unit conversion.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

/// Rounded so that half a wavelength at 2.4 GHz is exactly 0.0625 m.
pub const SPEED_OF_LIGHT: f64 = 3.0e8;

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PatternForm {
    /// `G0·cos^{2p}(φ′)` on the forward hemisphere.
    Printed,
    /// `G0·cos^{2p}(θ′)` on the forward hemisphere.
    Conventional,
    /// Unit gain everywhere.
    Isotropic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PoseStrategy {
    Exhaustive,
    Merged,
}

/// Which reflection coefficient weights the communication-leakage paths
/// seen by the radar receiver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LeakageCoefficient {
    /// Target coefficient on every path.
    Target,
    /// Each path's own coefficient.
    PerPath,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub episodes: usize,
    pub steps_per_episode: usize,
    /// Transitions stored before updates start.
    pub warmup: usize,
    pub batch: usize,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub tau: f64,
    pub buffer: usize,
    pub discount: f64,
    pub noise_std: f64,
    pub noise_decay: f64,
    pub hidden: usize,
    /// Stop early once the windowed mean reward moves less than this
    /// between consecutive windows; 0 disables.
    pub stability_tol: f64,
    pub stability_window: usize,
    /// Largest gradient norm applied in one update; 0 disables clipping.
    pub grad_clip: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            episodes: 500,
            steps_per_episode: 10,
            warmup: 128,
            batch: 128,
            actor_lr: 0.01,
            critic_lr: 0.002,
            tau: 0.001,
            buffer: 5000,
            discount: 0.95,
            noise_std: 0.1,
            noise_decay: 0.999,
            hidden: 64,
            stability_tol: 0.0,
            stability_window: 50,
            grad_clip: 10.0,
        }
    }
}

/// Raw document form. Every field optional; unknown keys rejected.
#[allow(non_snake_case)]
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDocument {
    pub preset: Option<String>,
    #[serde(rename = "A")]
    pub a: Option<usize>,
    #[serde(rename = "N_R")]
    pub n_r: Option<usize>,
    #[serde(rename = "A_t")]
    pub a_t: Option<usize>,
    #[serde(rename = "A_r")]
    pub a_r: Option<usize>,
    #[serde(rename = "A_b")]
    pub a_b: Option<usize>,
    #[serde(rename = "A_e")]
    pub a_e: Option<usize>,
    #[serde(rename = "M")]
    pub m: Option<usize>,
    #[serde(rename = "N")]
    pub n: Option<usize>,
    #[serde(rename = "Q_hat")]
    pub q_hat: Option<usize>,
    #[serde(rename = "L_b")]
    pub l_b: Option<usize>,
    #[serde(rename = "L_e")]
    pub l_e: Option<usize>,
    #[serde(rename = "L_r")]
    pub l_r: Option<usize>,
    #[serde(rename = "B")]
    pub layers: Option<usize>,
    #[serde(rename = "Upsilon_c")]
    pub upsilon_c: Option<usize>,
    #[serde(rename = "Upsilon_r")]
    pub upsilon_r: Option<usize>,
    #[serde(rename = "Upsilon_a")]
    pub upsilon_a: Option<usize>,
    pub carrier_GHz: Option<f64>,
    pub P_t_dBm: Option<f64>,
    pub P_RIS_dBm: Option<f64>,
    pub sigma_b2_dBm: Option<f64>,
    pub sigma_e2_dBm: Option<f64>,
    pub sigma_I2_dBm: Option<f64>,
    pub sigma_r2_dBm: Option<f64>,
    pub d_bs_rx: Option<f64>,
    pub d_bs_ris: Option<f64>,
    pub d_rx_ris: Option<f64>,
    pub eve_position: Option<[f64; 3]>,
    pub layer_gap: Option<f64>,
    pub ris_bob_distance: Option<f64>,
    pub path_gain_dB_per_decade: Option<f64>,
    pub p: Option<u32>,
    pub pattern: Option<PatternForm>,
    pub eta: Option<f64>,
    pub beta_max: Option<f64>,
    pub rho0: Option<f64>,
    pub clutter_rel_dB: Option<f64>,
    pub g_I_dB: Option<f64>,
    pub theta_3dB_deg: Option<f64>,
    pub phi_3dB_deg: Option<f64>,
    pub Gamma_theta_deg: Option<f64>,
    pub Gamma_phi_deg: Option<f64>,
    pub Gamma_r_dB: Option<f64>,
    pub min_spacing: Option<f64>,
    pub scatter_half_width_deg: Option<f64>,
    pub gamma_range_deg: Option<[f64; 2]>,
    pub alpha_range_deg: Option<[f64; 2]>,
    pub beta_range_deg: Option<[f64; 2]>,
    pub origin_half_span: Option<[f64; 2]>,
    pub pose_strategy: Option<PoseStrategy>,
    pub leakage_coefficient: Option<LeakageCoefficient>,
    pub alternating_iterations: Option<usize>,
    pub train: Option<TrainDocument>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainDocument {
    pub episodes: Option<usize>,
    pub steps_per_episode: Option<usize>,
    pub warmup: Option<usize>,
    pub batch: Option<usize>,
    pub actor_lr: Option<f64>,
    pub critic_lr: Option<f64>,
    pub tau: Option<f64>,
    pub buffer: Option<usize>,
    pub discount: Option<f64>,
    pub noise_std: Option<f64>,
    pub noise_decay: Option<f64>,
    pub hidden: Option<usize>,
    pub stability_tol: Option<f64>,
    pub stability_window: Option<usize>,
    pub grad_clip: Option<f64>,
}

/// Fully resolved scenario; all powers in watts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub a: usize,
    pub n_r: usize,
    pub a_t: usize,
    pub a_r: usize,
    pub a_b: usize,
    pub a_e: usize,
    pub m: usize,
    pub n: usize,
    pub q_hat: usize,
    pub l_b: usize,
    pub l_e: usize,
    pub l_r: usize,
    pub layers: usize,
    pub upsilon_c: usize,
    pub upsilon_r: usize,
    pub upsilon_a: usize,
    pub carrier_hz: f64,
    pub p_t: f64,
    pub p_ris: f64,
    pub sigma_b2: f64,
    pub sigma_e2: f64,
    pub sigma_i2: f64,
    pub sigma_r2: f64,
    pub d_bs_rx: f64,
    pub d_bs_ris: f64,
    pub d_rx_ris: f64,
    pub eve_position: [f64; 3],
    pub layer_gap: f64,
    pub ris_bob_distance: f64,
    pub path_gain_db_per_decade: f64,
    pub p: u32,
    pub pattern: PatternForm,
    pub eta: f64,
    pub beta_max: f64,
    pub rho0: f64,
    pub clutter_rel_db: f64,
    pub g_i: f64,
    pub theta_3db: f64,
    pub phi_3db: f64,
    pub gamma_theta: f64,
    pub gamma_phi: f64,
    /// Explicit sensing threshold (linear); overrides the beamwidth rule.
    pub gamma_r_override: Option<f64>,
    pub min_spacing: f64,
    pub scatter_half_width: f64,
    pub gamma_range: [f64; 2],
    pub alpha_range: [f64; 2],
    pub beta_range: [f64; 2],
    pub origin_half_span: [f64; 2],
    pub pose_strategy: PoseStrategy,
    pub leakage_coefficient: LeakageCoefficient,
    pub alternating_iterations: usize,
    pub train: TrainConfig,
}

impl ScenarioConfig {
    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_hz
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let doc: ConfigDocument =
            serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        Self::from_document(&doc)
    }

    pub fn from_value(v: &Value) -> Result<Self> {
        let doc: ConfigDocument =
            serde_json::from_value(v.clone()).map_err(|e| Error::Config(e.to_string()))?;
        Self::from_document(&doc)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    pub fn paper() -> Self {
        Self::from_document(&ConfigDocument::default()).expect("paper defaults are valid")
    }

    pub fn desk() -> Self {
        Self::from_document(&ConfigDocument {
            preset: Some("desk".into()),
            ..Default::default()
        })
        .expect("desk defaults are valid")
    }

    pub fn from_document(doc: &ConfigDocument) -> Result<Self> {
        let desk = match doc.preset.as_deref() {
            None | Some("paper") => false,
            Some("desk") => true,
            Some(other) => return Err(Error::Config(format!("preset: unknown value {other:?}"))),
        };
        let pick = |v: Option<usize>, paper: usize, small: usize| {
            v.unwrap_or(if desk { small } else { paper })
        };
        let carrier_hz = doc.carrier_GHz.unwrap_or(2.4) * 1e9;
        let lambda = SPEED_OF_LIGHT / carrier_hz;
        let td = doc.train.clone().unwrap_or_default();
        let tdef = TrainConfig::default();
        let gamma_r_override = doc.Gamma_r_dB.map(db_to_linear);
        let cfg = Self {
            a: pick(doc.a, 10, 4),
            n_r: pick(doc.n_r, 64, 8),
            a_t: pick(doc.a_t, 100, 8),
            a_r: pick(doc.a_r, 100, 8),
            a_b: doc.a_b.unwrap_or(1),
            a_e: doc.a_e.unwrap_or(1),
            m: pick(doc.m, 225, 9),
            n: pick(doc.n, 512, 16),
            q_hat: pick(doc.q_hat, 100, 16),
            l_b: doc.l_b.unwrap_or(3),
            l_e: doc.l_e.unwrap_or(3),
            l_r: doc.l_r.unwrap_or(3),
            layers: doc.layers.unwrap_or(3),
            upsilon_c: doc.upsilon_c.unwrap_or(1),
            upsilon_r: doc.upsilon_r.unwrap_or(1),
            upsilon_a: doc.upsilon_a.unwrap_or(1),
            carrier_hz,
            p_t: dbm_to_watts(doc.P_t_dBm.unwrap_or(40.0)),
            p_ris: dbm_to_watts(doc.P_RIS_dBm.unwrap_or(-10.0)),
            sigma_b2: dbm_to_watts(doc.sigma_b2_dBm.unwrap_or(-80.0)),
            sigma_e2: dbm_to_watts(doc.sigma_e2_dBm.unwrap_or(-80.0)),
            sigma_i2: dbm_to_watts(doc.sigma_I2_dBm.unwrap_or(-90.0)),
            sigma_r2: dbm_to_watts(doc.sigma_r2_dBm.unwrap_or(-90.0)),
            d_bs_rx: doc.d_bs_rx.unwrap_or(2000.0),
            d_bs_ris: doc.d_bs_ris.unwrap_or(3000.0),
            d_rx_ris: doc.d_rx_ris.unwrap_or(1500.0),
            eve_position: doc.eve_position.unwrap_or([10.0, 2900.0, 10.0]),
            layer_gap: doc.layer_gap.unwrap_or(0.03),
            ris_bob_distance: doc.ris_bob_distance.unwrap_or(20.0),
            path_gain_db_per_decade: doc.path_gain_dB_per_decade.unwrap_or(20.03),
            p: doc.p.unwrap_or(1),
            pattern: doc.pattern.unwrap_or(PatternForm::Printed),
            eta: doc.eta.unwrap_or(0.8),
            beta_max: doc.beta_max.unwrap_or(10.0),
            rho0: doc.rho0.unwrap_or(30.0),
            clutter_rel_db: doc.clutter_rel_dB.unwrap_or(-10.0),
            g_i: db_to_linear(doc.g_I_dB.unwrap_or(-130.0)),
            theta_3db: doc.theta_3dB_deg.unwrap_or(10.0).to_radians(),
            phi_3db: doc.phi_3dB_deg.unwrap_or(10.0).to_radians(),
            gamma_theta: doc.Gamma_theta_deg.unwrap_or(20.0).to_radians(),
            gamma_phi: doc.Gamma_phi_deg.unwrap_or(20.0).to_radians(),
            gamma_r_override,
            min_spacing: doc.min_spacing.unwrap_or(lambda / 2.0),
            scatter_half_width: doc.scatter_half_width_deg.unwrap_or(40.0).to_radians(),
            gamma_range: deg2(doc.gamma_range_deg.unwrap_or([-90.0, 90.0])),
            alpha_range: deg2(doc.alpha_range_deg.unwrap_or([-45.0, 45.0])),
            beta_range: deg2(doc.beta_range_deg.unwrap_or([-45.0, 45.0])),
            origin_half_span: doc.origin_half_span.unwrap_or([0.5, 0.5]),
            pose_strategy: doc.pose_strategy.unwrap_or(PoseStrategy::Exhaustive),
            leakage_coefficient: doc
                .leakage_coefficient
                .unwrap_or(LeakageCoefficient::Target),
            alternating_iterations: doc.alternating_iterations.unwrap_or(0),
            train: TrainConfig {
                episodes: td.episodes.unwrap_or(tdef.episodes),
                steps_per_episode: td.steps_per_episode.unwrap_or(tdef.steps_per_episode),
                warmup: td.warmup.unwrap_or(tdef.warmup),
                batch: td.batch.unwrap_or(tdef.batch),
                actor_lr: td.actor_lr.unwrap_or(tdef.actor_lr),
                critic_lr: td.critic_lr.unwrap_or(tdef.critic_lr),
                tau: td.tau.unwrap_or(tdef.tau),
                buffer: td.buffer.unwrap_or(tdef.buffer),
                discount: td.discount.unwrap_or(tdef.discount),
                noise_std: td.noise_std.unwrap_or(tdef.noise_std),
                noise_decay: td.noise_decay.unwrap_or(tdef.noise_decay),
                hidden: td.hidden.unwrap_or(tdef.hidden),
                stability_tol: td.stability_tol.unwrap_or(tdef.stability_tol),
                stability_window: td.stability_window.unwrap_or(tdef.stability_window),
                grad_clip: td.grad_clip.unwrap_or(tdef.grad_clip),
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        let positive_counts = [
            ("A", self.a),
            ("N_R", self.n_r),
            ("A_t", self.a_t),
            ("A_r", self.a_r),
            ("A_b", self.a_b),
            ("A_e", self.a_e),
            ("M", self.m),
            ("N", self.n),
            ("Q_hat", self.q_hat),
            ("L_b", self.l_b),
            ("L_e", self.l_e),
            ("L_r", self.l_r),
            ("B", self.layers),
            ("Upsilon_c", self.upsilon_c),
            ("Upsilon_r", self.upsilon_r),
            ("Upsilon_a", self.upsilon_a),
        ];
        for (name, v) in positive_counts {
            if v == 0 {
                return Err(Error::Config(format!("{name}: must be at least 1")));
            }
        }
        let positive_reals = [
            ("carrier_GHz", self.carrier_hz),
            ("P_t_dBm", self.p_t),
            ("P_RIS_dBm", self.p_ris),
            ("sigma_b2_dBm", self.sigma_b2),
            ("sigma_e2_dBm", self.sigma_e2),
            ("sigma_I2_dBm", self.sigma_i2),
            ("sigma_r2_dBm", self.sigma_r2),
            ("d_bs_rx", self.d_bs_rx),
            ("d_bs_ris", self.d_bs_ris),
            ("d_rx_ris", self.d_rx_ris),
            ("layer_gap", self.layer_gap),
            ("ris_bob_distance", self.ris_bob_distance),
            ("eta", self.eta),
            ("beta_max", self.beta_max),
            ("rho0", self.rho0),
            ("theta_3dB_deg", self.theta_3db),
            ("phi_3dB_deg", self.phi_3db),
            ("Gamma_theta_deg", self.gamma_theta),
            ("Gamma_phi_deg", self.gamma_phi),
        ];
        for (name, v) in positive_reals {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!(
                    "{name}: must be positive and finite"
                )));
            }
        }
        if self.a > self.q_hat {
            return Err(Error::Config(format!(
                "A: {} exceeds Q_hat = {}",
                self.a, self.q_hat
            )));
        }
        if self.a_t <= self.a_b {
            return Err(Error::Config(
                "A_t: must exceed A_b so artificial noise has a null space".into(),
            ));
        }
        if self.eta > 1.0 {
            return Err(Error::Config("eta: loss factor must lie in (0, 1]".into()));
        }
        if self.upsilon_c > self.a || self.upsilon_r > self.a {
            return Err(Error::Config("Upsilon_c/Upsilon_r: cannot exceed A".into()));
        }
        if self.upsilon_a > self.a_t - self.a_b {
            return Err(Error::Config("Upsilon_a: cannot exceed A_t - A_b".into()));
        }
        if !(self.min_spacing >= 0.0) {
            return Err(Error::Config("min_spacing: must be nonnegative".into()));
        }
        let tri = |a: f64, b: f64, c: f64| a + b > c && a + c > b && b + c > a;
        if !tri(self.d_bs_rx, self.d_bs_ris, self.d_rx_ris) {
            return Err(Error::Config(
                "d_bs_rx/d_bs_ris/d_rx_ris: distances do not form a triangle".into(),
            ));
        }
        let t = &self.train;
        if !(t.tau > 0.0 && t.tau <= 1.0) {
            return Err(Error::Config("train.tau: must lie in (0, 1]".into()));
        }
        if !(t.actor_lr > 0.0 && t.critic_lr > 0.0) {
            return Err(Error::Config(
                "train.actor_lr/critic_lr: must be positive".into(),
            ));
        }
        if t.batch == 0 || t.buffer < t.batch || t.hidden == 0 || t.steps_per_episode == 0 {
            return Err(Error::Config("train: batch, buffer, hidden and steps_per_episode must be positive with buffer >= batch".into()));
        }
        if !(0.0..=1.0).contains(&t.discount) {
            return Err(Error::Config("train.discount: must lie in [0, 1]".into()));
        }
        Ok(())
    }

    /// Sensing SINR threshold: explicit override, else the beamwidth rule.
    pub fn gamma_r(&self) -> f64 {
        self.gamma_r_override.unwrap_or_else(|| {
            crate::signal::sensing_threshold(
                self.theta_3db,
                self.phi_3db,
                self.gamma_theta,
                self.gamma_phi,
            )
        })
    }
}

fn deg2(v: [f64; 2]) -> [f64; 2] {
    [v[0].to_radians(), v[1].to_radians()]
}

/// Raw JSON document, for sweeps that override one key at a time.
pub fn read_document(path: &std::path::Path) -> Result<Value> {
    serde_json::from_str(&std::fs::read_to_string(path)?).map_err(|e| Error::Config(e.to_string()))
}

/// Sets `key` in a JSON config document, creating the object if needed.
/// Integral values are stored as integers so count fields accept them.
pub fn override_field(doc: &mut Value, key: &str, value: f64) -> Result<()> {
    if !doc.is_object() {
        *doc = Value::Object(Default::default());
    }
    let v = if value.fract() == 0.0 && value.abs() < 1e15 {
        if value >= 0.0 {
            Value::from(value as u64)
        } else {
            Value::from(value as i64)
        }
    } else {
        Value::from(value)
    };
    doc.as_object_mut()
        .expect("object")
        .insert(key.to_string(), v);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_paper_values() {
        let c = ScenarioConfig::from_json_str("{}").unwrap();
        assert_eq!(
            (c.a, c.n_r, c.a_t, c.a_r, c.m, c.n, c.q_hat),
            (10, 64, 100, 100, 225, 512, 100)
        );
        assert!((c.p_t - 10.0).abs() < 1e-12);
        assert!((c.p_ris - 1e-4).abs() < 1e-18);
        assert!((c.sigma_b2 - 1e-11).abs() < 1e-24);
        assert!((c.sigma_r2 - 1e-12).abs() < 1e-25);
    }

    #[test]
    fn dbm_conversion() {
        let c = ScenarioConfig::from_json_str(r#"{"P_t_dBm": 30}"#).unwrap();
        assert_eq!(c.p_t, 1.0);
    }

    #[test]
    fn rejects_zero_and_unknown() {
        let e = ScenarioConfig::from_json_str(r#"{"A": 0}"#).unwrap_err();
        assert!(e.to_string().contains("A:"), "{e}");
        let e = ScenarioConfig::from_json_str(r#"{"P_t_dbm": 30}"#).unwrap_err();
        assert!(e.to_string().contains("P_t_dbm"), "{e}");
    }

    #[test]
    fn desk_preset() {
        let c = ScenarioConfig::desk();
        assert_eq!(
            (c.n, c.m, c.q_hat, c.a, c.n_r, c.a_t, c.a_r, c.layers),
            (16, 9, 16, 4, 8, 8, 8, 3)
        );
    }

    #[test]
    fn override_integral_value() {
        let mut v = serde_json::json!({"preset": "desk"});
        override_field(&mut v, "B", 1.0).unwrap();
        assert_eq!(ScenarioConfig::from_value(&v).unwrap().layers, 1);
    }
}
