//! Performance functionals at the active pose: Bob/Eve/radar SINRs, secrecy
//! rate, DOA accuracy, RIS drive power and the constraint audit.

use serde::{Deserialize, Serialize};

use crate::channel::{ChannelRealization, PoseChannels};
use crate::config::{LeakageCoefficient, ScenarioConfig};
use crate::error::{Error, Result};
use crate::geometry::AntennaLayout;
use crate::numerics::{dot, norm_sqr, CMatrix, C64, ZERO};

#[derive(Debug, Clone, PartialEq)]
pub struct BeamformerSet {
    /// `Q̂ × Υ_c`, power share already applied.
    pub w_c: CMatrix,
    /// `Q̂ × Υ_r`, power share already applied.
    pub w_r: CMatrix,
    /// `A_t × Υ_a`.
    pub w_a: CMatrix,
    pub u_b: Vec<C64>,
    pub u_e: Vec<C64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerSplit {
    pub alpha: f64,
    pub rho0: f64,
    pub p_t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub sigma_b2: f64,
    pub sigma_e2: f64,
    pub sigma_i2: f64,
    pub sigma_r2: f64,
}

impl NoiseConfig {
    pub fn from_config(cfg: &ScenarioConfig) -> Self {
        Self {
            sigma_b2: cfg.sigma_b2,
            sigma_e2: cfg.sigma_e2,
            sigma_i2: cfg.sigma_i2,
            sigma_r2: cfg.sigma_r2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensingSpec {
    pub theta_3db: f64,
    pub phi_3db: f64,
    pub gamma_theta: f64,
    pub gamma_phi: f64,
    pub gamma_r: f64,
}

impl SensingSpec {
    pub fn from_config(cfg: &ScenarioConfig) -> Self {
        Self {
            theta_3db: cfg.theta_3db,
            phi_3db: cfg.phi_3db,
            gamma_theta: cfg.gamma_theta,
            gamma_phi: cfg.gamma_phi,
            gamma_r: cfg.gamma_r(),
        }
    }
}

/// Everything fixed at the active pose apart from the beamformers.
#[derive(Debug, Clone, Copy)]
pub struct LinkView<'a> {
    pub bs: &'a PoseChannels,
    pub layout: &'a AntennaLayout,
    /// Zeroth RIS layer to Bob, `N_R × A_b`.
    pub cascade: &'a CMatrix,
    pub channels: &'a ChannelRealization,
    /// Whether the active RIS layer injects thermal noise at Bob.
    pub ris_thermal: bool,
    pub leakage: LeakageCoefficient,
}

/// Signal, interference and noise powers of one receiver.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SinrParts {
    pub signal: f64,
    pub interference: f64,
    pub noise: f64,
}

impl SinrParts {
    pub fn sinr(&self) -> f64 {
        self.signal / (self.interference + self.noise)
    }
}

/// `F·W`: rows of unselected sites zeroed.
pub fn apply_layout(layout: &AntennaLayout, w: &CMatrix) -> CMatrix {
    CMatrix::from_fn(w.rows(), w.cols(), |q, k| {
        if layout.mask[q] {
            w[(q, k)]
        } else {
            ZERO
        }
    })
}

/// `Σ_k |vᴴ w_k|²` over the columns of `w`.
pub fn projected_power(v: &[C64], w: &CMatrix) -> f64 {
    w.columns().iter().map(|c| dot(v, c).norm_sqr()).sum()
}

/// Masked version of [`projected_power`]: `Σ_k |vᴴ F w_k|²`.
fn masked_power(v: &[C64], layout: &AntennaLayout, w: &CMatrix) -> f64 {
    (0..w.cols())
        .map(|k| {
            let mut acc = ZERO;
            for q in 0..w.rows() {
                if layout.mask[q] {
                    acc += v[q].conj() * w[(q, k)];
                }
            }
            acc.norm_sqr()
        })
        .sum()
}

/// Effective BS-side channel toward Bob, `G·B·u_b` (length `Q̂`).
pub fn bob_effective(view: &LinkView, u_b: &[C64]) -> Vec<C64> {
    let bu = view.cascade.matvec(u_b);
    view.bs.g.matvec(&bu)
}

pub fn bob_parts(
    view: &LinkView,
    beams: &BeamformerSet,
    split: &PowerSplit,
    noise: &NoiseConfig,
) -> SinrParts {
    let h = bob_effective(view, &beams.u_b);
    let ap = split.alpha * split.p_t;
    let signal = ap * masked_power(&h, view.layout, &beams.w_c);
    let radar = ap * masked_power(&h, view.layout, &beams.w_r);
    let rx_side = view.cascade.matvec(&beams.u_b);
    let an = (1.0 - split.alpha)
        * split.p_t
        * projected_power(&view.channels.g_b.matvec(&rx_side), &beams.w_a);
    let thermal = if view.ris_thermal {
        noise.sigma_i2 * norm_sqr(&view.channels.last_layer().matvec(&beams.u_b))
    } else {
        0.0
    };
    SinrParts {
        signal,
        interference: radar + an,
        noise: thermal + noise.sigma_b2,
    }
}

pub fn eve_parts(
    view: &LinkView,
    beams: &BeamformerSet,
    split: &PowerSplit,
    noise: &NoiseConfig,
) -> SinrParts {
    let h = view.bs.e.matvec(&beams.u_e);
    let ap = split.alpha * split.p_t;
    let signal = ap * masked_power(&h, view.layout, &beams.w_c);
    let radar = ap * masked_power(&h, view.layout, &beams.w_r);
    let an = (1.0 - split.alpha)
        * split.p_t
        * projected_power(&view.channels.g_e.matvec(&beams.u_e), &beams.w_a);
    SinrParts {
        signal,
        interference: radar + an,
        noise: noise.sigma_e2,
    }
}

pub fn sinr_bob(
    view: &LinkView,
    beams: &BeamformerSet,
    split: &PowerSplit,
    noise: &NoiseConfig,
) -> f64 {
    bob_parts(view, beams, split, noise).sinr()
}

pub fn sinr_eve(
    view: &LinkView,
    beams: &BeamformerSet,
    split: &PowerSplit,
    noise: &NoiseConfig,
) -> f64 {
    eve_parts(view, beams, split, noise).sinr()
}

pub fn secrecy_rate(sinr_u: f64, sinr_e: f64) -> f64 {
    ((1.0 + sinr_u).log2() - (1.0 + sinr_e).log2()).max(0.0)
}

/// Radar echo powers: desired, clutter, leakage plus noise, self-interference.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RadarParts {
    pub target: f64,
    pub clutter: f64,
    pub leakage: f64,
    pub self_interference: f64,
}

impl RadarParts {
    pub fn sinr(&self) -> f64 {
        self.target / (self.clutter + self.leakage + self.self_interference)
    }
}

/// `‖Σ_l c_l g_{r,l} (t_lᴴ W)‖_F²` where the row `t_lᴴ W` is formed by
/// `row(l, k)`.
fn echo_power(
    c: &[C64],
    g_r: &[Vec<C64>],
    w_cols: usize,
    row: impl Fn(usize, usize) -> C64,
) -> f64 {
    let a_r = g_r.first().map_or(0, Vec::len);
    let mut total = 0.0;
    for k in 0..w_cols {
        let mut acc = vec![ZERO; a_r];
        for (l, gl) in g_r.iter().enumerate() {
            let s = c[l] * row(l, k);
            for (a, g) in acc.iter_mut().zip(gl) {
                *a += g * s;
            }
        }
        total += norm_sqr(&acc);
    }
    total
}

/// `g_lᴴ F w_k` for BS-side target path `l`.
fn bs_row<'a>(view: &'a LinkView, w: &'a CMatrix) -> impl Fn(usize, usize) -> C64 + 'a {
    move |l, k| {
        let g = &view.bs.target[l];
        let mut acc = ZERO;
        for q in 0..w.rows() {
            if view.layout.mask[q] {
                acc += g[q].conj() * w[(q, k)];
            }
        }
        acc
    }
}

fn rx_row<'a>(view: &'a LinkView, w: &'a CMatrix) -> impl Fn(usize, usize) -> C64 + 'a {
    move |l, k| {
        let g = &view.channels.sensing.g_t[l];
        (0..w.rows()).map(|t| g[t].conj() * w[(t, k)]).sum()
    }
}

pub fn radar_parts(
    view: &LinkView,
    beams: &BeamformerSet,
    split: &PowerSplit,
    noise: &NoiseConfig,
) -> RadarParts {
    let s = &view.channels.sensing;
    let l_r = s.rho.len();
    let ap = split.alpha * split.p_t;
    let jp = (1.0 - split.alpha) * split.p_t;
    let g_r = &s.g_r;
    let only = |l0: usize| -> Vec<C64> {
        (0..l_r)
            .map(|l| if l == l0 { s.rho[l] } else { ZERO })
            .collect()
    };
    let clutter: Vec<C64> = (0..l_r)
        .map(|l| if l == 0 { ZERO } else { s.rho[l] })
        .collect();
    let leak: Vec<C64> = match view.leakage {
        LeakageCoefficient::Target => vec![s.rho[0]; l_r],
        LeakageCoefficient::PerPath => s.rho.clone(),
    };
    let target = ap * echo_power(&only(0), g_r, beams.w_r.cols(), bs_row(view, &beams.w_r))
        + jp * echo_power(&only(0), g_r, beams.w_a.cols(), rx_row(view, &beams.w_a));
    let clutter = ap * echo_power(&clutter, g_r, beams.w_r.cols(), bs_row(view, &beams.w_r))
        + jp * echo_power(&clutter, g_r, beams.w_a.cols(), rx_row(view, &beams.w_a));
    let a_r = g_r.first().map_or(0, Vec::len) as f64;
    let leakage = ap * echo_power(&leak, g_r, beams.w_c.cols(), bs_row(view, &beams.w_c))
        + a_r * noise.sigma_r2;
    let self_interference =
        view.channels.g_i * view.channels.h_i.matmul(&beams.w_a).frobenius_norm_sqr();
    RadarParts {
        target,
        clutter,
        leakage,
        self_interference,
    }
}

pub fn sinr_radar(
    view: &LinkView,
    beams: &BeamformerSet,
    split: &PowerSplit,
    noise: &NoiseConfig,
) -> f64 {
    radar_parts(view, beams, split, noise).sinr()
}

/// Linear SINR needed so both DOA errors meet their thresholds, using the
/// beamwidth rule exactly as stated (without the factor 2 of the error formula).
pub fn sensing_threshold(theta_3db: f64, phi_3db: f64, gamma_theta: f64, gamma_phi: f64) -> f64 {
    let t = (theta_3db / (1.6 * gamma_theta)).powi(2);
    let p = (phi_3db / (1.6 * gamma_phi)).powi(2);
    t.max(p)
}

/// DOA root-mean-square error for beamwidth `bw` at radar SINR `sinr`.
pub fn doa_rmmse(bw: f64, sinr: f64) -> Result<f64> {
    if !(sinr > 0.0) {
        return Err(Error::Contract(format!(
            "DOA error needs positive SINR, got {sinr}"
        )));
    }
    Ok(bw / (1.6 * (2.0 * sinr).sqrt()))
}

/// `(ε_θ, ε_φ, Γ_r)`.
pub fn doa_rmmse_and_threshold(spec: &SensingSpec, sinr_r: f64) -> Result<(f64, f64, f64)> {
    Ok((
        doa_rmmse(spec.theta_3db, sinr_r)?,
        doa_rmmse(spec.phi_3db, sinr_r)?,
        sensing_threshold(
            spec.theta_3db,
            spec.phi_3db,
            spec.gamma_theta,
            spec.gamma_phi,
        ),
    ))
}

/// Per-element incident power at the active layer, `diag(B̂ᴴGᴴF·WWᴴ·FGB̂)`,
/// summed over the communication and sensing streams (unit symbol power).
pub fn active_incident_power(
    g: &CMatrix,
    layout: &AntennaLayout,
    passive: &CMatrix,
    beams: &BeamformerSet,
) -> Vec<f64> {
    let n = passive.cols();
    let mut d = vec![0.0; n];
    for w in [&beams.w_c, &beams.w_r] {
        let fw = apply_layout(layout, w);
        let at_ris = g.adjoint().matmul(&fw);
        let incident = passive.adjoint().matmul(&at_ris);
        for i in 0..n {
            for k in 0..incident.cols() {
                d[i] += incident[(i, k)].norm_sqr();
            }
        }
    }
    d
}

/// Drive power of the active layer given its per-element incident power.
pub fn drive_power_from_incident(
    active: &[C64],
    incident: &[f64],
    split: &PowerSplit,
    sigma_r2: f64,
) -> f64 {
    active
        .iter()
        .zip(incident)
        .map(|(t, d)| t.norm_sqr() * (split.alpha * split.p_t * d + sigma_r2))
        .sum()
}

#[allow(clippy::too_many_arguments)]
pub fn ris_drive_power(
    g: &CMatrix,
    layout: &AntennaLayout,
    passive: &CMatrix,
    active: &[C64],
    beams: &BeamformerSet,
    split: &PowerSplit,
    sigma_r2: f64,
) -> f64 {
    let d = active_incident_power(g, layout, passive, beams);
    drive_power_from_incident(active, &d, split, sigma_r2)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintCheck {
    pub name: String,
    /// Signed residual; for inequalities positive means violated.
    pub residual: f64,
    pub applicable: bool,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AuditReport {
    pub checks: Vec<ConstraintCheck>,
}

impl AuditReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass || !c.applicable)
    }

    pub fn get(&self, name: &str) -> Option<&ConstraintCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> Vec<&str> {
        self.checks
            .iter()
            .filter(|c| c.applicable && !c.pass)
            .map(|c| c.name.as_str())
            .collect()
    }

    fn push(&mut self, name: &str, residual: f64, applicable: bool, pass: bool) {
        self.checks.push(ConstraintCheck {
            name: name.into(),
            residual,
            applicable,
            pass,
        });
    }
}

pub const EQUALITY_TOL: f64 = 1e-6;
pub const NULL_SPACE_TOL: f64 = 1e-9;

/// Inputs to [`audit_constraints`] that are not part of the link view.
#[derive(Debug, Clone, Copy)]
pub struct AuditInputs<'a> {
    pub required_antennas: usize,
    pub site_coords: &'a [[f64; 3]],
    pub min_spacing: f64,
    /// `None` when the scenario has no RIS drive budget to check.
    pub drive_power: Option<f64>,
    pub p_ris: f64,
    pub active_amplitudes: &'a [f64],
    pub beta_max: f64,
    pub gamma_r: f64,
    /// Whether the sensing receiver transmits artificial noise.
    pub jamming: bool,
    /// Whether the radar threshold is enforced.
    pub sensing: bool,
}

pub fn audit_constraints(
    view: &LinkView,
    beams: &BeamformerSet,
    split: &PowerSplit,
    noise: &NoiseConfig,
    inputs: &AuditInputs,
) -> AuditReport {
    let mut r = AuditReport::default();
    let rel = |x: f64| x.abs() <= EQUALITY_TOL;
    let c1 = apply_layout(view.layout, &beams.w_c).frobenius_norm_sqr()
        + apply_layout(view.layout, &beams.w_r).frobenius_norm_sqr()
        - 1.0;
    r.push("C1", c1, true, rel(c1));
    let c2 = beams.w_a.frobenius_norm_sqr() - 1.0;
    r.push("C2", c2, inputs.jamming, rel(c2));
    let c3 = norm_sqr(&beams.u_b) - 1.0;
    r.push("C3", c3, true, rel(c3));
    let c4 = norm_sqr(&beams.u_e) - 1.0;
    r.push("C4", c4, true, rel(c4));

    let sinr_r = sinr_radar(view, beams, split, noise);
    let c5 = inputs.gamma_r - sinr_r;
    r.push("C5", c5, inputs.sensing, c5 <= 1e-9 * inputs.gamma_r);

    let rx = view.channels.g_b.matvec(&view.cascade.matvec(&beams.u_b));
    let leak = projected_power(&rx, &beams.w_a).sqrt();
    let scale = (norm_sqr(&rx) * beams.w_a.frobenius_norm_sqr()).sqrt();
    let c6 = if scale > 0.0 { leak / scale } else { 0.0 };
    r.push("C6", c6, inputs.jamming, c6 < NULL_SPACE_TOL);

    let count = view.layout.count();
    r.push(
        "C7",
        count as f64 - inputs.required_antennas as f64,
        true,
        count == inputs.required_antennas,
    );

    let sites: Vec<[f64; 3]> = view
        .layout
        .indices()
        .iter()
        .map(|&q| inputs.site_coords[q])
        .collect();
    let mut min_gap = f64::INFINITY;
    for i in 0..sites.len() {
        for j in i + 1..sites.len() {
            min_gap = min_gap.min(crate::geometry::distance(sites[i], sites[j]));
        }
    }
    let c8 = inputs.min_spacing - min_gap;
    r.push(
        "C8",
        if c8.is_finite() {
            c8
        } else {
            -inputs.min_spacing
        },
        true,
        c8 <= 1e-12,
    );

    match inputs.drive_power {
        Some(p) => {
            let amp_ok = inputs
                .active_amplitudes
                .iter()
                .all(|&b| (0.0..=inputs.beta_max).contains(&b));
            r.push("C9", p - inputs.p_ris, true, p <= inputs.p_ris && amp_ok);
        }
        None => r.push("C9", 0.0, false, true),
    }

    let c10 = if inputs.gamma_r > 0.0 {
        sinr_r / inputs.gamma_r - 1.0
    } else {
        0.0
    };
    r.push(
        "C10",
        c10,
        inputs.sensing && inputs.jamming,
        c10.abs() < 1e-9,
    );
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn secrecy_examples() {
        assert!((secrecy_rate(3.0, 1.0) - 1.0).abs() < 1e-15);
        assert_eq!(secrecy_rate(2.0, 2.0), 0.0);
        assert_eq!(secrecy_rate(1.0, 5.0), 0.0);
    }

    #[test]
    fn doa_examples() {
        let e = doa_rmmse(0.1, 50.0).unwrap();
        assert!((e - 0.00625).abs() < 1e-15);
        let g = sensing_threshold(0.1, 0.1, 0.01, 0.01);
        assert!((g - 39.0625).abs() < 1e-9);
        assert!(doa_rmmse(0.1, 0.0).is_err());
    }

    #[test]
    fn threshold_leaves_factor_two() {
        let (bw, gt) = (0.2, 0.01);
        let g = sensing_threshold(bw, bw, gt, gt);
        let e = doa_rmmse(bw, g).unwrap();
        assert!((e - gt / 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn drive_power_scaling() {
        let active = vec![C64::new(1.0, 0.0); 4];
        let split = PowerSplit {
            alpha: 1.0,
            p_t: 1.0,
            rho0: 0.0,
        };
        assert!((drive_power_from_incident(&active, &[0.0; 4], &split, 0.5) - 2.0).abs() < 1e-15);
        let d = [1.0, 2.0, 0.5, 0.0];
        let p1 = drive_power_from_incident(&active, &d, &split, 0.1);
        let doubled: Vec<C64> = active.iter().map(|z| z * 2.0).collect();
        let p2 = drive_power_from_incident(&doubled, &d, &split, 0.1);
        assert!((p2 - 4.0 * p1).abs() < 1e-12);
        assert_eq!(drive_power_from_incident(&[ZERO; 4], &d, &split, 0.1), 0.0);
    }
}
