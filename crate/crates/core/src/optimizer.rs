//! Two-stage closed-form optimizer: pose search, MRT with phase-alignment
//! antenna selection, transmitting-RIS design, MMSE receivers, sensing and
//! artificial-noise precoders, and power allocation.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::channel::{identity_coefficients, PoseChannels, RisConfiguration, Scenario};
use crate::config::{PoseStrategy, ScenarioConfig};
use crate::error::{Error, Result};
use crate::geometry::{AntennaLayout, Pose};
use crate::numerics::{
    dot, fix_phase, generalized_eig_topk, hermitian_eig, norm, norm_sqr, normalized,
    null_space_projector, solve_hpd, CMatrix, C64, ZERO,
};
use crate::parallel::{par_map, worker_count};
use crate::signal::{
    self, active_incident_power, apply_layout, audit_constraints, drive_power_from_incident,
    AuditInputs, AuditReport, BeamformerSet, LinkView, NoiseConfig, PowerSplit, SensingSpec,
};

/// Which parts of the design are frozen or removed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Baseline {
    Proposed,
    /// Rotation fixed at the nominal orientation; translation searched.
    NoRotation,
    /// Translation fixed at the nominal origin; rotation searched.
    NoPosition,
    /// Nominal pose only.
    NoPoseAdjustment,
    /// RIS phases left at their defaults.
    NoTrisOpt,
    /// RIS layers bypassed: the last hop carries the signal unamplified.
    NoRis,
    /// Nominal pose with the `A` sites nearest the array centre.
    Fpa,
    /// Sensing receiver silent (`α = 1`, no artificial noise).
    SingleBs,
}

impl Baseline {
    pub const ALL: [Baseline; 8] = [
        Baseline::Proposed,
        Baseline::NoRotation,
        Baseline::NoPosition,
        Baseline::NoPoseAdjustment,
        Baseline::NoTrisOpt,
        Baseline::NoRis,
        Baseline::Fpa,
        Baseline::SingleBs,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Baseline::Proposed => "proposed",
            Baseline::NoRotation => "no-rotation",
            Baseline::NoPosition => "no-position",
            Baseline::NoPoseAdjustment => "no-pose-adjustment",
            Baseline::NoTrisOpt => "no-tris-opt",
            Baseline::NoRis => "no-ris",
            Baseline::Fpa => "fpa",
            Baseline::SingleBs => "single-bs",
        }
    }

    fn jamming(&self) -> bool {
        *self != Baseline::SingleBs
    }

    fn uses_ris(&self) -> bool {
        *self != Baseline::NoRis
    }
}

impl fmt::Display for Baseline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Baseline {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase();
        let b = match key.as_str() {
            "proposed" => Baseline::Proposed,
            "no-rotation" => Baseline::NoRotation,
            "no-position" => Baseline::NoPosition,
            "no-pose-adjustment" | "no-pose" => Baseline::NoPoseAdjustment,
            "no-tris-opt" | "no-t-ris-optimization" | "no-tris-optimization" => Baseline::NoTrisOpt,
            "no-ris" => Baseline::NoRis,
            "fpa" | "fixed-position-antenna" => Baseline::Fpa,
            "single-bs" => Baseline::SingleBs,
            _ => return Err(Error::Config(format!("baseline: unknown value {s:?}"))),
        };
        Ok(b)
    }
}

/// Flat pose indices the baseline may choose from.
pub fn candidate_poses(sc: &Scenario, baseline: Baseline) -> Vec<usize> {
    let (n0, m0) = (sc.nominal_rotation(), sc.nominal_origin());
    let (nr, nm) = (sc.rotations.len(), sc.origins.len());
    match baseline {
        Baseline::NoRotation => (0..nm).map(|m| sc.pose_index(n0, m)).collect(),
        Baseline::NoPosition => (0..nr).map(|n| sc.pose_index(n, m0)).collect(),
        Baseline::NoPoseAdjustment | Baseline::Fpa => vec![sc.pose_index(n0, m0)],
        _ => (0..sc.pose_count()).collect(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoseSearchResult {
    /// Position of the winner within the candidate list.
    pub winner: usize,
    pub objective: f64,
    /// Per-candidate scores.
    pub scores: Vec<f64>,
    /// `Q̂ × Υ_c`, each column with squared norm `1/Υ_c`.
    pub precoder: CMatrix,
}

fn argmax_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

fn stream_precoder(psi: &CMatrix, streams: usize) -> Result<CMatrix> {
    let n = psi.rows();
    let eig = generalized_eig_topk(psi, &CMatrix::identity(n), streams)?;
    let s = 1.0 / (streams as f64).sqrt();
    let cols: Vec<Vec<C64>> = eig
        .vectors
        .iter()
        .map(|v| v.iter().map(|z| z * s).collect())
        .collect();
    Ok(CMatrix::from_columns(n, &cols))
}

/// Pose search over per-pose effective channels `k = G·B·u_b`.
///
/// Each per-pose matrix `kkᴴ` is rank one, so the exhaustive score of a pose
/// is its top eigenvalue `‖k‖²` scaled by `1/Υ_c`.
pub fn pose_search_vectors(
    vectors: &[Vec<C64>],
    streams: usize,
    strategy: PoseStrategy,
) -> Result<PoseSearchResult> {
    if vectors.is_empty() {
        return Err(Error::Contract(
            "pose search needs at least one pose".into(),
        ));
    }
    if streams == 0 {
        return Err(Error::Contract(
            "at least one communication stream is required".into(),
        ));
    }
    let q = vectors[0].len();
    match strategy {
        PoseStrategy::Exhaustive => {
            let scores: Vec<f64> = vectors
                .iter()
                .map(|k| norm_sqr(k) / streams as f64)
                .collect();
            let winner = argmax_first(&scores);
            let precoder = stream_precoder(&CMatrix::outer(&vectors[winner]), streams)?;
            Ok(PoseSearchResult {
                winner,
                objective: scores[winner],
                scores,
                precoder,
            })
        }
        PoseStrategy::Merged => {
            let mut psi = CMatrix::zeros(q, q);
            for k in vectors {
                for i in 0..q {
                    let ki = k[i];
                    for j in 0..q {
                        psi[(i, j)] += ki * k[j].conj();
                    }
                }
            }
            // normalize before the eigen-solve; the argmax is scale-free
            let s = psi.max_abs();
            let psi = if s > 0.0 {
                psi.scale_real(1.0 / s)
            } else {
                psi
            };
            let precoder = stream_precoder(&psi, streams)?;
            let cols = precoder.columns();
            let scores: Vec<f64> = vectors
                .iter()
                .map(|k| cols.iter().map(|w| dot(w, k).norm_sqr()).sum())
                .collect();
            let winner = argmax_first(&scores);
            Ok(PoseSearchResult {
                winner,
                objective: scores[winner],
                scores,
                precoder,
            })
        }
    }
}

/// Pose search over `candidates` for the RIS-side vector `bu = B·u_b`.
pub fn pose_search(
    sc: &Scenario,
    candidates: &[usize],
    bu: &[C64],
    streams: usize,
    strategy: PoseStrategy,
) -> Result<(usize, PoseSearchResult)> {
    let vectors = par_map(candidates.len(), worker_count(), |i| {
        sc.bob_vector(candidates[i], bu)
    });
    let res = pose_search_vectors(&vectors, streams, strategy)?;
    Ok((candidates[res.winner], res))
}

/// `w = g / (√Υ_c ‖g‖)`.
pub fn mrt_precoder(g: &[C64], streams: usize) -> Result<Vec<C64>> {
    let n = norm(g);
    if !(n > 0.0) {
        return Err(Error::Contract(
            "MRT needs a nonzero effective channel".into(),
        ));
    }
    let s = 1.0 / ((streams as f64).sqrt() * n);
    Ok(g.iter().map(|z| z * s).collect())
}

/// Top-`a` sites by `|g_q|²`; ties go to the lower index.
pub fn select_antennas(g: &[C64], a: usize) -> Result<AntennaLayout> {
    if a > g.len() {
        return Err(Error::Contract(format!(
            "cannot select {a} of {} sites",
            g.len()
        )));
    }
    let mut idx: Vec<usize> = (0..g.len()).collect();
    idx.sort_by(|&i, &j| g[j].norm_sqr().total_cmp(&g[i].norm_sqr()).then(i.cmp(&j)));
    idx.truncate(a);
    AntennaLayout::from_indices(g.len(), &idx)
}

/// `F g / (√Υ_c ‖F g‖)`.
pub fn renormalize_precoder(layout: &AntennaLayout, g: &[C64], streams: usize) -> Result<Vec<C64>> {
    let masked: Vec<C64> = g
        .iter()
        .zip(&layout.mask)
        .map(|(z, &m)| if m { *z } else { ZERO })
        .collect();
    if !(norm(&masked) > 0.0) {
        return Err(Error::Contract("all selected sites have zero gain".into()));
    }
    mrt_precoder(&masked, streams)
}

/// Passive-layer phases focusing the incident field on element `zeta` of
/// each next layer. Returns the `B − 1` unit-modulus vectors and the field
/// incident on the last layer.
pub fn tpris_phase_stack(
    incident: &[C64],
    couplings: &[CMatrix],
    eta: f64,
    zeta: usize,
) -> (Vec<Vec<C64>>, Vec<C64>) {
    let mut v = incident.to_vec();
    let mut out = Vec::new();
    for b in couplings.iter().take(couplings.len().saturating_sub(1)) {
        let theta: Vec<C64> = v
            .iter()
            .enumerate()
            .map(|(i, z)| {
                if z.norm() == 0.0 {
                    C64::new(1.0, 0.0)
                } else {
                    C64::from_polar(1.0, z.arg() - b[(i, zeta)].arg())
                }
            })
            .collect();
        // v ← η Bᴴ Θᴴ v
        let shaped: Vec<C64> = v
            .iter()
            .zip(&theta)
            .map(|(z, t)| t.conj() * z * eta)
            .collect();
        v = b.adjoint_matvec(&shaped);
        out.push(theta);
    }
    (out, v)
}

/// Leakage-based active-layer coefficients: top generalized eigenvector of
/// `(ggᴴ, diag(d) + σ_r²/(αP_t)·I)` with `g_n = z_n·conj(c_n)`, unit norm.
pub fn taris_phase_leakage(
    z: &[C64],
    c: &[C64],
    incident_power: &[f64],
    noise_ratio: f64,
) -> Result<Vec<C64>> {
    let g: Vec<C64> = z.iter().zip(c).map(|(a, b)| a * b.conj()).collect();
    let n = g.len();
    let d: Vec<f64> = incident_power.iter().map(|x| x + noise_ratio).collect();
    let scale = d.iter().cloned().fold(0.0, f64::max);
    if !(scale > 0.0) {
        return Err(Error::Contract("leakage denominator vanishes".into()));
    }
    let gs = norm(&g);
    if !(gs > 0.0) {
        return Ok(vec![C64::new(1.0 / (n as f64).sqrt(), 0.0); n]);
    }
    let gn: Vec<C64> = g.iter().map(|x| x / gs).collect();
    let eig = generalized_eig_topk(
        &CMatrix::outer(&gn),
        &CMatrix::from_real_diag(&d.iter().map(|x| x / scale).collect::<Vec<_>>()),
        1,
    )?;
    Ok(eig.vectors.into_iter().next().expect("one vector"))
}

/// `U⁻¹h` normalized, where `U` is the receiver's interference-plus-noise
/// covariance including the desired stream.
pub fn mmse_receiver(covariance: &CMatrix, desired: &[C64]) -> Result<Vec<C64>> {
    let x = solve_hpd(covariance, desired)?;
    let mut u =
        normalized(&x).ok_or_else(|| Error::Contract("MMSE receiver for a zero channel".into()))?;
    fix_phase(&mut u);
    Ok(u)
}

fn regularize(m: &CMatrix) -> CMatrix {
    let n = m.rows();
    let eps = 1e-9 * m.trace().re.abs().max(f64::MIN_POSITIVE) / n as f64;
    &m.hermitian_part() + &CMatrix::identity(n).scale_real(eps)
}

/// Top-`streams` generalized eigenvectors of `(A₁ + A₄ − Γ_r A₆, A₃ + εI)`,
/// each column scaled to `1/Υ_r` power.
pub fn sensing_precoder(
    a1: &CMatrix,
    a3: &CMatrix,
    a4: &CMatrix,
    a6: &CMatrix,
    gamma_r: f64,
    streams: usize,
) -> Result<CMatrix> {
    let c = &(a1 + a4) - &a6.scale_real(gamma_r);
    let s = c.max_abs().max(f64::MIN_POSITIVE);
    let eig = generalized_eig_topk(&c.scale_real(1.0 / s), &regularize(a3), streams)?;
    let k = 1.0 / (streams as f64).sqrt();
    let cols: Vec<Vec<C64>> = eig
        .vectors
        .iter()
        .map(|v| v.iter().map(|z| z * k).collect())
        .collect();
    Ok(CMatrix::from_columns(a1.rows(), &cols))
}

/// Top-`streams` generalized eigenvectors of `(A₂, Γ_r(A₇+A₈) − A₅ + εI)`
/// in the coordinates of `basis`, mapped back and normalized to unit trace.
pub fn an_precoder(
    a2: &CMatrix,
    a5: &CMatrix,
    a7: &CMatrix,
    a8: &CMatrix,
    gamma_r: f64,
    basis: &CMatrix,
    streams: usize,
) -> Result<CMatrix> {
    let den = regularize(&(&(a7 + a8).scale_real(gamma_r) - a5));
    let s = den.max_abs().max(f64::MIN_POSITIVE);
    let cs = a2.max_abs().max(f64::MIN_POSITIVE);
    let eig = generalized_eig_topk(&a2.scale_real(1.0 / cs), &den.scale_real(1.0 / s), streams)
        .map_err(|e| match e {
            Error::NotPositiveDefinite { eigenvalue } => Error::Infeasible(format!(
                "artificial-noise denominator is indefinite (eigenvalue {eigenvalue:.3e})"
            )),
            other => other,
        })?;
    let k = 1.0 / (streams as f64).sqrt();
    let cols: Vec<Vec<C64>> = eig
        .vectors
        .iter()
        .map(|v| {
            let w = basis.matvec(v);
            let n = norm(&w);
            w.iter().map(|z| z * (k / n)).collect()
        })
        .collect();
    Ok(CMatrix::from_columns(basis.rows(), &cols))
}

/// Orthonormal basis of the range of a projector.
pub fn projector_basis(p: &CMatrix) -> Result<CMatrix> {
    let eig = hermitian_eig(p)?;
    let cols: Vec<Vec<C64>> = eig
        .values
        .iter()
        .zip(&eig.vectors)
        .filter(|(v, _)| **v > 0.5)
        .map(|(_, x)| x.clone())
        .collect();
    if cols.is_empty() {
        return Err(Error::Infeasible(
            "no artificial-noise subspace: Bob's channel spans the Rx array".into(),
        ));
    }
    Ok(CMatrix::from_columns(p.rows(), &cols))
}

/// Every power-scaled term of the three SINRs for unit-trace precoders.
/// Each field already includes `P_t` where the link carries transmit power.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PowerCoefficients {
    pub bob_c: f64,
    pub bob_r: f64,
    pub bob_a: f64,
    pub bob_noise: f64,
    pub eve_c: f64,
    pub eve_r: f64,
    pub eve_a: f64,
    pub eve_noise: f64,
    /// Target echo from the sensing beam.
    pub d4: f64,
    /// Target echo from artificial noise.
    pub d5: f64,
    /// Clutter from the sensing beam.
    pub d6: f64,
    /// Clutter from artificial noise.
    pub d7: f64,
    /// Residual self-interference.
    pub d8: f64,
    /// Communication leakage into the radar receiver.
    pub j6: f64,
    pub radar_noise: f64,
}

impl PowerCoefficients {
    pub fn from_parts(
        view: &LinkView,
        unit: &BeamformerSet,
        p_t: f64,
        noise: &NoiseConfig,
    ) -> Self {
        let full = PowerSplit {
            alpha: 1.0,
            rho0: 0.0,
            p_t,
        };
        let none = PowerSplit {
            alpha: 0.0,
            rho0: 0.0,
            p_t,
        };
        let b1 = signal::bob_parts(view, unit, &full, noise);
        let b0 = signal::bob_parts(view, unit, &none, noise);
        let e1 = signal::eve_parts(view, unit, &full, noise);
        let e0 = signal::eve_parts(view, unit, &none, noise);
        let r1 = signal::radar_parts(view, unit, &full, noise);
        let r0 = signal::radar_parts(view, unit, &none, noise);
        let a_r = view.channels.sensing.g_r.first().map_or(0, Vec::len) as f64;
        let radar_noise = a_r * noise.sigma_r2;
        Self {
            bob_c: b1.signal,
            bob_r: b1.interference,
            bob_a: b0.interference,
            bob_noise: b1.noise,
            eve_c: e1.signal,
            eve_r: e1.interference,
            eve_a: e0.interference,
            eve_noise: e1.noise,
            d4: r1.target,
            d5: r0.target,
            d6: r1.clutter,
            d7: r0.clutter,
            d8: r1.self_interference,
            j6: r1.leakage - radar_noise,
            radar_noise,
        }
    }

    pub fn sinr_u(&self, alpha: f64, rho0: f64) -> f64 {
        alpha * (1.0 - rho0) * self.bob_c
            / (alpha * rho0 * self.bob_r + (1.0 - alpha) * self.bob_a + self.bob_noise)
    }

    pub fn sinr_e(&self, alpha: f64, rho0: f64) -> f64 {
        alpha * (1.0 - rho0) * self.eve_c
            / (alpha * rho0 * self.eve_r + (1.0 - alpha) * self.eve_a + self.eve_noise)
    }

    pub fn sinr_r(&self, alpha: f64, rho0: f64) -> f64 {
        let num = alpha * rho0 * self.d4 + (1.0 - alpha) * self.d5;
        let den = alpha * rho0 * self.d6
            + (1.0 - alpha) * self.d7
            + self.d8
            + alpha * (1.0 - rho0) * self.j6
            + self.radar_noise;
        num / den
    }

    /// `(1 + SINR_u) / (1 + SINR_e)`.
    pub fn objective(&self, alpha: f64, rho0: f64) -> f64 {
        (1.0 + self.sinr_u(alpha, rho0)) / (1.0 + self.sinr_e(alpha, rho0))
    }

    /// The `α` that puts the radar constraint at equality for a given
    /// communication/sensing split, when it lies in `[0, 1]`.
    pub fn alpha_at_equality(&self, rho0: f64, gamma_r: f64) -> Option<f64> {
        let num = gamma_r * (self.d7 + self.d8 + self.radar_noise) - self.d5;
        let den = rho0 * (self.d4 - gamma_r * self.d6 + gamma_r * self.j6) - self.d5
            + gamma_r * self.d7
            - gamma_r * self.j6;
        let scale = self.d4.abs() + self.d5.abs() + gamma_r * (self.d6 + self.d7 + self.j6).abs();
        if !(den.abs() > 1e-12 * scale) {
            return None;
        }
        let a = num / den;
        (0.0..=1.0).contains(&a).then_some(a)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub alpha: f64,
    pub rho0: f64,
    pub objective: f64,
}

const RHO_GRID: usize = 1000;

fn golden_max(lo: f64, hi: f64, f: impl Fn(f64) -> f64) -> (f64, f64) {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..60 {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = f(x1);
        }
    }
    if f1 >= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Chooses `(α, ϱ₀)` by sweeping `ϱ₀`, setting `α` from the radar equality,
/// and refining the best cell by golden-section search.
pub fn allocate_power(k: &PowerCoefficients, gamma_r: f64) -> Result<Allocation> {
    let eval = |rho: f64| -> Option<(f64, f64)> {
        let a = k.alpha_at_equality(rho, gamma_r)?;
        let v = k.objective(a, rho);
        v.is_finite().then_some((a, v))
    };
    let mut best: Option<Allocation> = None;
    for i in 0..=RHO_GRID {
        let rho = i as f64 / RHO_GRID as f64;
        if let Some((alpha, objective)) = eval(rho) {
            if best.is_none_or(|b| objective > b.objective) {
                best = Some(Allocation {
                    alpha,
                    rho0: rho,
                    objective,
                });
            }
        }
    }
    let Some(mut best) = best else {
        return Err(Error::Infeasible(format!(
            "no power split meets the radar threshold {gamma_r:.4e}: best radar SINR with all BS power on sensing {:.4e}, with all power on jamming {:.4e}",
            k.sinr_r(1.0, 1.0),
            k.sinr_r(0.0, 0.0)
        )));
    };
    let h = 1.0 / RHO_GRID as f64;
    let (lo, hi) = ((best.rho0 - h).max(0.0), (best.rho0 + h).min(1.0));
    let (rho, v) = golden_max(lo, hi, |r| eval(r).map_or(f64::NEG_INFINITY, |x| x.1));
    if v > best.objective {
        if let Some((alpha, objective)) = eval(rho) {
            best = Allocation {
                alpha,
                rho0: rho,
                objective,
            };
        }
    }
    Ok(best)
}

/// Split with the sensing receiver silent: `α = 1`, `ϱ₀` chosen on the grid
/// subject to the radar threshold.
pub fn allocate_power_single_bs(k: &PowerCoefficients, gamma_r: f64) -> Result<Allocation> {
    let mut best: Option<Allocation> = None;
    for i in 0..=RHO_GRID {
        let rho = i as f64 / RHO_GRID as f64;
        if k.sinr_r(1.0, rho) < gamma_r {
            continue;
        }
        let objective = k.objective(1.0, rho);
        if best.is_none_or(|b| objective > b.objective) {
            best = Some(Allocation {
                alpha: 1.0,
                rho0: rho,
                objective,
            });
        }
    }
    best.ok_or_else(|| {
        Error::Infeasible(format!(
            "radar SINR {:.4e} at full sensing power is below {gamma_r:.4e}",
            k.sinr_r(1.0, 1.0)
        ))
    })
}

/// How the power split is chosen inside [`solve_at_pose`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PowerPolicy {
    Optimize,
    /// Use the given split when it meets the radar threshold, otherwise the
    /// equality `α` at the given `ϱ₀`.
    Requested {
        alpha: f64,
        rho0: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Metrics {
    pub sinr_u: f64,
    pub sinr_e: f64,
    pub sinr_r: f64,
    pub r_b: f64,
    pub r_e: f64,
    pub r_s: f64,
    pub eps_theta: f64,
    pub eps_phi: f64,
}

#[derive(Debug, Clone)]
pub struct TwoStageSolution {
    pub baseline: Baseline,
    pub pose_index: usize,
    pub pose: Pose,
    pub pose_objective: f64,
    pub layout: AntennaLayout,
    pub beams: BeamformerSet,
    pub ris: RisConfiguration,
    /// Zeroth RIS layer to Bob.
    pub cascade: CMatrix,
    pub split: PowerSplit,
    pub metrics: Metrics,
    pub audit: AuditReport,
    pub drive_power: Option<f64>,
}

/// Split in force when the precoders are designed: the initialization
/// `α = 1`, at which the Rx echo terms of the jamming pencil vanish.
const DESIGN_ALPHA: f64 = 1.0;

/// Fixed pieces shared by the stages at one pose.
struct Stage<'a> {
    sc: &'a Scenario,
    cfg: &'a ScenarioConfig,
    baseline: Baseline,
    pose_index: usize,
    bs: PoseChannels,
    layout: AntennaLayout,
    noise: NoiseConfig,
    gamma_r: f64,
}

impl Stage<'_> {
    fn view<'b>(&'b self, cascade: &'b CMatrix) -> LinkView<'b> {
        LinkView {
            bs: &self.bs,
            layout: &self.layout,
            cascade,
            channels: &self.sc.channels,
            ris_thermal: self.baseline.uses_ris(),
            leakage: self.cfg.leakage_coefficient,
        }
    }

    fn selected(&self) -> Vec<usize> {
        self.layout.indices()
    }

    fn restrict(&self, v: &[C64]) -> Vec<C64> {
        self.selected().iter().map(|&q| v[q]).collect()
    }

    fn expand(&self, cols: &CMatrix) -> CMatrix {
        let idx = self.selected();
        let mut out = CMatrix::zeros(self.layout.len(), cols.cols());
        for (r, &q) in idx.iter().enumerate() {
            for k in 0..cols.cols() {
                out[(q, k)] = cols[(r, k)];
            }
        }
        out
    }

    /// Unit-trace sensing precoder on the selected sites.
    fn sensing(&self, cascade: &CMatrix, u_b: &[C64], u_e: &[C64]) -> Result<CMatrix> {
        let ch = &self.sc.channels;
        let s = &ch.sensing;
        let e = self.restrict(&self.bs.e.matvec(u_e));
        let h = self.restrict(&self.bs.g.matvec(&cascade.matvec(u_b)));
        let t: Vec<Vec<C64>> = self.bs.target.iter().map(|g| self.restrict(g)).collect();
        let a1 = CMatrix::outer(&e);
        let a3 = CMatrix::outer(&h);
        let a4 = CMatrix::outer(&t[0]).scale_real(s.rho[0].norm_sqr() * norm_sqr(&s.g_r[0]));
        let n = t[0].len();
        let a_r = s.g_r[0].len();
        let mut k6 = CMatrix::zeros(a_r, n);
        for l in 1..s.rho.len() {
            for i in 0..a_r {
                let c = s.rho[l] * s.g_r[l][i];
                for j in 0..n {
                    k6[(i, j)] += c * t[l][j].conj();
                }
            }
        }
        let a6 = k6.adjoint().matmul(&k6);
        let w = sensing_precoder(&a1, &a3, &a4, &a6, self.gamma_r, self.cfg.upsilon_r)?;
        Ok(self.expand(&w))
    }

    /// Unit-trace artificial-noise precoder in the null space of `G_b·B`,
    /// designed at split `alpha`. The common `(1−α)P_t` factor of the
    /// numerator is dropped since it does not move the eigenvectors.
    fn jamming(&self, cascade: &CMatrix, u_e: &[C64], alpha: f64) -> Result<CMatrix> {
        let ch = &self.sc.channels;
        let s = &ch.sensing;
        let p = null_space_projector(&ch.g_b.matmul(cascade))?;
        let q = projector_basis(&p)?;
        let r = q.cols();
        let pt = (1.0 - alpha) * self.cfg.p_t;
        let a2 = CMatrix::outer(&q.adjoint_matvec(&ch.g_e.matvec(u_e))).scale_real(self.cfg.p_t);
        let b0 = q.adjoint_matvec(&s.g_t[0]);
        let a5 = CMatrix::outer(&b0).scale_real(pt * s.rho[0].norm_sqr() * norm_sqr(&s.g_r[0]));
        let a_r = s.g_r[0].len();
        let mut k7 = CMatrix::zeros(a_r, r);
        for l in 1..s.rho.len() {
            let bl = q.adjoint_matvec(&s.g_t[l]);
            for i in 0..a_r {
                let c = s.rho[l] * s.g_r[l][i];
                for j in 0..r {
                    k7[(i, j)] += c * bl[j].conj();
                }
            }
        }
        let a7 = k7.adjoint().matmul(&k7).scale_real(pt);
        let hq = ch.h_i.matmul(&q);
        let a8 = hq.adjoint().matmul(&hq).scale_real(ch.g_i);
        an_precoder(&a2, &a5, &a7, &a8, self.gamma_r, &q, self.cfg.upsilon_a)
    }

    fn unit_beams(
        &self,
        w_c: &CMatrix,
        w_r: CMatrix,
        w_a: CMatrix,
        u_b: &[C64],
        u_e: &[C64],
    ) -> BeamformerSet {
        BeamformerSet {
            w_c: w_c.clone(),
            w_r,
            w_a,
            u_b: u_b.to_vec(),
            u_e: u_e.to_vec(),
        }
    }

    fn allocate(&self, k: &PowerCoefficients, policy: PowerPolicy) -> Result<Allocation> {
        if !self.baseline.jamming() {
            return match policy {
                PowerPolicy::Optimize => allocate_power_single_bs(k, self.gamma_r),
                PowerPolicy::Requested { rho0, .. } => {
                    if k.sinr_r(1.0, rho0) >= self.gamma_r {
                        Ok(Allocation {
                            alpha: 1.0,
                            rho0,
                            objective: k.objective(1.0, rho0),
                        })
                    } else {
                        Err(Error::Infeasible(
                            "requested split misses the radar threshold".into(),
                        ))
                    }
                }
            };
        }
        match policy {
            PowerPolicy::Optimize => allocate_power(k, self.gamma_r),
            PowerPolicy::Requested { alpha, rho0 } => {
                if k.sinr_r(alpha, rho0) >= self.gamma_r {
                    return Ok(Allocation {
                        alpha,
                        rho0,
                        objective: k.objective(alpha, rho0),
                    });
                }
                k.alpha_at_equality(rho0, self.gamma_r)
                    .map(|a| Allocation {
                        alpha: a,
                        rho0,
                        objective: k.objective(a, rho0),
                    })
                    .ok_or_else(|| {
                        Error::Infeasible("requested split misses the radar threshold".into())
                    })
            }
        }
    }

    /// Sensing and jamming precoders followed by the power split.
    fn sensing_stage(
        &self,
        w_c: &CMatrix,
        cascade: &CMatrix,
        u_b: &[C64],
        u_e: &[C64],
        policy: PowerPolicy,
    ) -> Result<(BeamformerSet, Allocation)> {
        let w_r = self
            .sensing(cascade, u_b, u_e)
            .map_err(|e| label("sensing precoder", e))?;
        let w_a = if self.baseline.jamming() {
            self.jamming(cascade, u_e, DESIGN_ALPHA)
                .map_err(|e| label("artificial-noise precoder", e))?
        } else {
            CMatrix::zeros(self.cfg.a_t, self.cfg.upsilon_a)
        };
        let unit = self.unit_beams(w_c, w_r, w_a, u_b, u_e);
        let k =
            PowerCoefficients::from_parts(&self.view(cascade), &unit, self.cfg.p_t, &self.noise);
        let alloc = self
            .allocate(&k, policy)
            .map_err(|e| label("power allocation", e))?;
        Ok((unit, alloc))
    }

    fn scaled(&self, unit: &BeamformerSet, alloc: &Allocation) -> BeamformerSet {
        BeamformerSet {
            w_c: unit.w_c.scale_real((1.0 - alloc.rho0).sqrt()),
            w_r: unit.w_r.scale_real(alloc.rho0.sqrt()),
            w_a: unit.w_a.clone(),
            u_b: unit.u_b.clone(),
            u_e: unit.u_e.clone(),
        }
    }

    fn split(&self, alloc: &Allocation) -> PowerSplit {
        PowerSplit {
            alpha: alloc.alpha,
            rho0: alloc.rho0,
            p_t: self.cfg.p_t,
        }
    }

    fn passive_product(&self, ris: &RisConfiguration) -> Result<CMatrix> {
        ris.passive_cascade(&self.sc.channels.ris_layers)
    }

    fn drive(
        &self,
        ris: &RisConfiguration,
        beams: &BeamformerSet,
        split: &PowerSplit,
    ) -> Result<f64> {
        let passive = self.passive_product(ris)?;
        let d = active_incident_power(&self.bs.g, &self.layout, &passive, beams);
        Ok(drive_power_from_incident(
            ris.active(),
            &d,
            split,
            self.noise.sigma_r2,
        ))
    }

    /// Scales the active layer to the largest gain allowed by the drive
    /// budget and the amplitude cap.
    fn fit_drive(
        &self,
        ris: &mut RisConfiguration,
        beams: &BeamformerSet,
        split: &PowerSplit,
    ) -> Result<()> {
        let p = self.drive(ris, beams, split)?;
        let peak = ris.amplitudes().into_iter().fold(0.0, f64::max);
        if !(p > 0.0) || !(peak > 0.0) {
            return Ok(());
        }
        let s = (self.cfg.p_ris / p).sqrt().min(self.cfg.beta_max / peak) * (1.0 - 1e-12);
        for z in ris.layers.last_mut().expect("layer") {
            *z *= s;
        }
        Ok(())
    }

    fn design_ris(
        &self,
        beams: &BeamformerSet,
        split: &PowerSplit,
        u_b: &[C64],
    ) -> Result<RisConfiguration> {
        let cfg = self.cfg;
        let ch = &self.sc.channels;
        let mut ris = RisConfiguration {
            layers: identity_coefficients(cfg.layers, cfg.n_r),
            eta: cfg.eta,
            beta_max: cfg.beta_max,
            p_ris: cfg.p_ris,
        };
        match self.baseline {
            Baseline::NoRis => return Ok(ris),
            // phases stay at zero; only the gain follows the budget
            Baseline::NoTrisOpt => {}
            _ => {
                let fw = apply_layout(&self.layout, &beams.w_c).column(0);
                let incident = self.bs.g.adjoint_matvec(&fw);
                let (passive, z) = tpris_phase_stack(&incident, &ch.ris_layers, cfg.eta, ch.zeta);
                for (b, theta) in passive.into_iter().enumerate() {
                    ris.layers[b] = theta;
                }
                let passive = self.passive_product(&ris)?;
                let d = active_incident_power(&self.bs.g, &self.layout, &passive, beams);
                let c = ch.last_layer().matvec(u_b);
                let ap = split.alpha * split.p_t;
                let ratio = if ap > 0.0 {
                    self.noise.sigma_r2 / ap
                } else {
                    1.0
                };
                let theta = taris_phase_leakage(&z, &c, &d, ratio)
                    .map_err(|e| label("active RIS design", e))?;
                *ris.layers.last_mut().expect("layer") = theta;
            }
        }
        self.fit_drive(&mut ris, beams, split)?;
        Ok(ris)
    }

    fn cascade_of(&self, ris: &RisConfiguration) -> Result<CMatrix> {
        if self.baseline.uses_ris() {
            ris.cascade(&self.sc.channels.ris_layers)
        } else {
            Ok(self.sc.channels.direct_hop.clone())
        }
    }

    fn receivers(
        &self,
        beams: &BeamformerSet,
        split: &PowerSplit,
        cascade: &CMatrix,
    ) -> Result<(Vec<C64>, Vec<C64>)> {
        let ch = &self.sc.channels;
        let ap = split.alpha * split.p_t;
        let jp = (1.0 - split.alpha) * split.p_t;
        let fwc = apply_layout(&self.layout, &beams.w_c);
        let fwr = apply_layout(&self.layout, &beams.w_r);

        // Bob: effective BS→Bob channel Bᴴ Gᴴ (A_b × Q̂)
        let hb = cascade.adjoint().matmul(&self.bs.g.adjoint());
        let a_b = cascade.cols();
        let mut ub = CMatrix::identity(a_b).scale_real(self.noise.sigma_b2);
        for w in fwc.columns().iter().chain(fwr.columns().iter()) {
            ub = &ub + &CMatrix::outer(&hb.matvec(w)).scale_real(ap);
        }
        let ab = cascade.adjoint().matmul(&ch.g_b.adjoint());
        for w in beams.w_a.columns() {
            ub = &ub + &CMatrix::outer(&ab.matvec(&w)).scale_real(jp);
        }
        if self.baseline.uses_ris() {
            let last = ch.last_layer();
            ub = &ub + &last.adjoint().matmul(last).scale_real(self.noise.sigma_i2);
        }
        let u_b = mmse_receiver(&ub.hermitian_part(), &hb.matvec(&fwc.column(0)))
            .map_err(|e| label("Bob receiver", e))?;

        let he = self.bs.e.adjoint();
        let a_e = self.bs.e.cols();
        let mut ue = CMatrix::identity(a_e).scale_real(self.noise.sigma_e2);
        for w in fwc.columns().iter().chain(fwr.columns().iter()) {
            ue = &ue + &CMatrix::outer(&he.matvec(w)).scale_real(ap);
        }
        let ae = ch.g_e.adjoint();
        for w in beams.w_a.columns() {
            ue = &ue + &CMatrix::outer(&ae.matvec(&w)).scale_real(jp);
        }
        let u_e = mmse_receiver(&ue.hermitian_part(), &he.matvec(&fwc.column(0)))
            .map_err(|e| label("Eve receiver", e))?;
        Ok((u_b, u_e))
    }

    fn metrics(&self, beams: &BeamformerSet, split: &PowerSplit, cascade: &CMatrix) -> Metrics {
        evaluate_metrics(
            &self.view(cascade),
            beams,
            split,
            &self.noise,
            &SensingSpec::from_config(self.cfg),
        )
    }

    /// Stages after the communication precoder is fixed.
    fn finish(
        &self,
        w_c: &CMatrix,
        pose_objective: f64,
        policy: PowerPolicy,
    ) -> Result<TwoStageSolution> {
        let cfg = self.cfg;
        let ch = &self.sc.channels;
        let init = CMatrix::from_fn(cfg.n_r, cfg.a_b, |_, _| C64::new(cfg.eta, 0.0));
        let init = if self.baseline.uses_ris() {
            init
        } else {
            ch.direct_hop.clone()
        };
        let u_b0 = vec![C64::new(1.0 / (cfg.a_b as f64).sqrt(), 0.0); cfg.a_b];
        let u_e0 = vec![C64::new(1.0 / (cfg.a_e as f64).sqrt(), 0.0); cfg.a_e];

        let (unit, alloc) = self.sensing_stage(w_c, &init, &u_b0, &u_e0, policy)?;
        let split = self.split(&alloc);
        let beams = self.scaled(&unit, &alloc);
        let ris = self.design_ris(&beams, &split, &u_b0)?;
        let cascade = self.cascade_of(&ris)?;
        let (u_b, u_e) = self.receivers(&beams, &split, &cascade)?;

        // refresh sensing, jamming and power against the final RIS and receivers
        let (unit, alloc) = self.sensing_stage(w_c, &cascade, &u_b, &u_e, policy)?;
        let split = self.split(&alloc);
        let mut beams = self.scaled(&unit, &alloc);
        let mut ris = ris;
        if self.baseline.uses_ris() {
            self.fit_drive(&mut ris, &beams, &split)?;
        }
        let cascade = self.cascade_of(&ris)?;
        let (u_b, u_e) = self.receivers(&beams, &split, &cascade)?;
        beams.u_b = u_b;
        beams.u_e = u_e;

        let drive_power = if self.baseline.uses_ris() {
            Some(self.drive(&ris, &beams, &split)?)
        } else {
            None
        };
        let metrics = self.metrics(&beams, &split, &cascade);
        let pose = self.sc.pose(self.pose_index);
        let amps = ris.amplitudes();
        let audit = audit_constraints(
            &self.view(&cascade),
            &beams,
            &split,
            &self.noise,
            &AuditInputs {
                required_antennas: cfg.a,
                site_coords: &pose.site_coords,
                min_spacing: cfg.min_spacing,
                drive_power,
                p_ris: cfg.p_ris,
                active_amplitudes: &amps,
                beta_max: cfg.beta_max,
                gamma_r: self.gamma_r,
                jamming: self.baseline.jamming(),
                sensing: true,
            },
        );
        Ok(TwoStageSolution {
            baseline: self.baseline,
            pose_index: self.pose_index,
            pose,
            pose_objective,
            layout: self.layout.clone(),
            beams,
            ris,
            cascade,
            split,
            metrics,
            audit,
            drive_power,
        })
    }
}

fn label(stage: &str, e: Error) -> Error {
    match e {
        Error::Infeasible(m) => Error::Infeasible(format!("{stage}: {m}")),
        other => other,
    }
}

/// Rates and DOA errors of an assembled solution.
pub fn evaluate_metrics(
    view: &LinkView,
    beams: &BeamformerSet,
    split: &PowerSplit,
    noise: &NoiseConfig,
    spec: &SensingSpec,
) -> Metrics {
    let sinr_u = signal::sinr_bob(view, beams, split, noise);
    let sinr_e = signal::sinr_eve(view, beams, split, noise);
    let sinr_r = signal::sinr_radar(view, beams, split, noise);
    let r_b = (1.0 + sinr_u).log2();
    let r_e = (1.0 + sinr_e).log2();
    let (eps_theta, eps_phi) = match signal::doa_rmmse_and_threshold(spec, sinr_r) {
        Ok((t, p, _)) => (t, p),
        Err(_) => (f64::INFINITY, f64::INFINITY),
    };
    Metrics {
        sinr_u,
        sinr_e,
        sinr_r,
        r_b,
        r_e,
        r_s: signal::secrecy_rate(sinr_u, sinr_e),
        eps_theta,
        eps_phi,
    }
}

fn stage<'a>(
    sc: &'a Scenario,
    baseline: Baseline,
    pose_index: usize,
    layout: AntennaLayout,
) -> Stage<'a> {
    Stage {
        sc,
        cfg: &sc.config,
        baseline,
        pose_index,
        bs: sc.compute_pose_channels(pose_index),
        layout,
        noise: NoiseConfig::from_config(&sc.config),
        gamma_r: sc.config.gamma_r(),
    }
}

/// RIS-side vector `B·u_b` used by the first stage.
fn initial_bu(sc: &Scenario, baseline: Baseline) -> Vec<C64> {
    let cfg = &sc.config;
    let u = C64::new(1.0 / (cfg.a_b as f64).sqrt(), 0.0);
    if baseline.uses_ris() {
        vec![C64::new(cfg.eta, 0.0) * u * cfg.a_b as f64; cfg.n_r]
    } else {
        sc.channels.direct_hop.matvec(&vec![u; cfg.a_b])
    }
}

/// Runs the whole pipeline for one scenario.
pub fn run_two_stage(sc: &Scenario, baseline: Baseline) -> Result<TwoStageSolution> {
    let cfg = &sc.config;
    let candidates = candidate_poses(sc, baseline);
    let mut bu = initial_bu(sc, baseline);
    let mut best: Option<TwoStageSolution> = None;
    for _ in 0..=cfg.alternating_iterations {
        let (pose_index, search) =
            pose_search(sc, &candidates, &bu, cfg.upsilon_c, cfg.pose_strategy)?;
        let g = sc.bob_vector(pose_index, &bu);
        let layout = if baseline == Baseline::Fpa {
            AntennaLayout::contiguous(&sc.grid, cfg.a)?
        } else {
            select_antennas(&g, cfg.a)?
        };
        let w = renormalize_precoder(&layout, &g, cfg.upsilon_c)?;
        let w_c = CMatrix::from_columns(g.len(), &vec![w; cfg.upsilon_c]);
        let sol = stage(sc, baseline, pose_index, layout).finish(
            &w_c,
            search.objective,
            PowerPolicy::Optimize,
        )?;
        let improved = best
            .as_ref()
            .is_none_or(|b| sol.metrics.r_s > b.metrics.r_s + 1e-4);
        bu = sol.cascade.matvec(&sol.beams.u_b);
        if best.is_none()
            || best
                .as_ref()
                .is_some_and(|b| sol.metrics.r_s > b.metrics.r_s)
        {
            best = Some(sol);
        }
        if !improved {
            break;
        }
    }
    Ok(best.expect("at least one pass"))
}

/// Inner solvers at a chosen pose and layout, as used by the learning agents.
pub fn solve_at_pose(
    sc: &Scenario,
    pose_index: usize,
    layout: &AntennaLayout,
    policy: PowerPolicy,
) -> Result<TwoStageSolution> {
    let cfg = &sc.config;
    let bu = initial_bu(sc, Baseline::Proposed);
    let g = sc.bob_vector(pose_index, &bu);
    let w = renormalize_precoder(layout, &g, cfg.upsilon_c)?;
    let w_c = CMatrix::from_columns(g.len(), &vec![w; cfg.upsilon_c]);
    let objective = norm_sqr(&g) / cfg.upsilon_c as f64;
    stage(sc, Baseline::Proposed, pose_index, layout.clone()).finish(&w_c, objective, policy)
}

/// Inner solvers at one pose with the layout selected there; used for
/// per-pose secrecy-rate maps.
pub fn solve_fixed_pose(sc: &Scenario, pose_index: usize) -> Result<TwoStageSolution> {
    let bu = initial_bu(sc, Baseline::Proposed);
    let layout = select_antennas(&sc.bob_vector(pose_index, &bu), sc.config.a)?;
    solve_at_pose(sc, pose_index, &layout, PowerPolicy::Optimize)
}
