//! Channel synthesis: element patterns, steering vectors, BS-side channels,
//! sensing geometry, and the multi-layer transmitting RIS cascade.

use std::f64::consts::PI;
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::config::{PatternForm, ScenarioConfig};
use crate::error::{Error, Result};
use crate::geometry::{
    self, add, distance, dot3, norm3, pose_coordinates, scale, sub, ArrayPlaneGrid, Pose,
    RotationAngles, Vec3,
};
use crate::numerics::{solve_hpd, CMatrix, C64, ZERO};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadiationPattern {
    pub p: u32,
    pub form: PatternForm,
}

impl RadiationPattern {
    pub fn new(p: u32, form: PatternForm) -> Self {
        Self { p, form }
    }

    pub fn peak_gain(&self) -> f64 {
        match self.form {
            PatternForm::Isotropic => 1.0,
            _ => 2.0 * (2.0 * self.p as f64 + 1.0),
        }
    }

    /// Linear gain for local elevation `theta` (from boresight) and azimuth `phi`.
    pub fn element_gain(&self, theta: f64, phi: f64) -> f64 {
        match self.form {
            PatternForm::Isotropic => 1.0,
            _ if !(0.0..PI / 2.0).contains(&theta) => 0.0,
            PatternForm::Printed => self.peak_gain() * phi.cos().powi(2 * self.p as i32),
            PatternForm::Conventional => self.peak_gain() * theta.cos().powi(2 * self.p as i32),
        }
    }

    /// Gain toward global unit direction `u` for an element rotated by `rot`.
    pub fn gain_toward(&self, rot: &[[f64; 3]; 3], u: Vec3) -> f64 {
        let (theta, phi) = local_angles(rot, u);
        self.element_gain(theta, phi)
    }
}

/// Elevation and azimuth of `u` in the element frame of a rotated array.
///
/// The frame axes are the rotated images of x̂, −ẑ and ŷ; the last is the
/// array plane normal, so the unrotated boresight faces +y.
pub fn local_angles(rot: &[[f64; 3]; 3], u: Vec3) -> (f64, f64) {
    let col = |j: usize| [rot[0][j], rot[1][j], rot[2][j]];
    let e1 = col(0);
    let e2 = scale(col(2), -1.0);
    let e3 = col(1);
    let u = scale(u, 1.0 / norm3(u));
    let (x, y, z) = (dot3(u, e1), dot3(u, e2), dot3(u, e3));
    let theta = z.clamp(-1.0, 1.0).acos();
    let phi = if x.hypot(y) < 1e-12 { 0.0 } else { y.atan2(x) };
    (theta, phi)
}

/// Unit pointing vector for elevation `theta` (from +z) and azimuth `phi`.
pub fn direction(theta: f64, phi: f64) -> Vec3 {
    [
        theta.sin() * phi.cos(),
        theta.sin() * phi.sin(),
        theta.cos(),
    ]
}

/// Inverse of [`direction`] for any nonzero vector.
pub fn angles_of(v: Vec3) -> (f64, f64) {
    let n = norm3(v);
    ((v[2] / n).clamp(-1.0, 1.0).acos(), v[1].atan2(v[0]))
}

/// Plane-wave phase profile over arbitrary element positions.
pub fn steering_at(positions: &[Vec3], u: Vec3, lambda: f64) -> Vec<C64> {
    let k = 2.0 * PI / lambda;
    positions
        .iter()
        .map(|&t| C64::from_polar(1.0, k * dot3(u, t)))
        .collect()
}

pub fn steering_vector(pose: &Pose, theta: f64, phi: f64, lambda: f64) -> Vec<C64> {
    steering_at(&pose.site_coords, direction(theta, phi), lambda)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Path {
    pub theta: f64,
    pub phi: f64,
}

impl Path {
    pub fn toward(v: Vec3) -> Self {
        let (theta, phi) = angles_of(v);
        Self { theta, phi }
    }

    pub fn unit(&self) -> Vec3 {
        direction(self.theta, self.phi)
    }
}

/// Per-path element gains for a pose.
pub fn path_gains(pose: &Pose, paths: &[Path], pattern: &RadiationPattern) -> Vec<f64> {
    let rot = pose.rotation();
    paths
        .iter()
        .map(|p| pattern.gain_toward(&rot, p.unit()))
        .collect()
}

/// `Ĝᴴ H` with `Ĝ` rows `√ς_ι a_ιᵀ`; `coeffs` is `L × K`, output `Q̂ × K`.
pub fn assemble_bs_channel(
    pose: &Pose,
    paths: &[Path],
    coeffs: &CMatrix,
    pattern: &RadiationPattern,
    lambda: f64,
) -> Result<CMatrix> {
    if paths.is_empty() {
        return Err(Error::Contract("channel needs at least one path".into()));
    }
    if coeffs.rows() != paths.len() {
        return Err(Error::Dimension(format!(
            "{} paths but {} coefficient rows",
            paths.len(),
            coeffs.rows()
        )));
    }
    let gains = path_gains(pose, paths, pattern);
    let q = pose.site_coords.len();
    let mut g = CMatrix::zeros(q, coeffs.cols());
    for (l, path) in paths.iter().enumerate() {
        if gains[l] == 0.0 {
            continue;
        }
        let amp = gains[l].sqrt();
        let a = steering_at(&pose.site_coords, path.unit(), lambda);
        for (qi, aq) in a.iter().enumerate() {
            let w = aq.conj() * amp;
            for k in 0..coeffs.cols() {
                g[(qi, k)] += w * coeffs[(l, k)];
            }
        }
    }
    Ok(g)
}

/// `Ĝᴴ·c` for a single column of path coefficients, without forming `Ĝᴴ H`.
pub fn bs_effective_vector(
    pose: &Pose,
    paths: &[Path],
    coeffs: &[C64],
    pattern: &RadiationPattern,
    lambda: f64,
) -> Vec<C64> {
    let gains = path_gains(pose, paths, pattern);
    let mut out = vec![ZERO; pose.site_coords.len()];
    for (l, path) in paths.iter().enumerate() {
        if gains[l] == 0.0 {
            continue;
        }
        let w = coeffs[l] * gains[l].sqrt();
        for (o, a) in out
            .iter_mut()
            .zip(steering_at(&pose.site_coords, path.unit(), lambda))
        {
            *o += a.conj() * w;
        }
    }
    out
}

/// `Π_b η·diag(θ_b)·B_b`, left to right in layer order.
pub fn ris_cascade(eta: f64, coefficients: &[Vec<C64>], layers: &[CMatrix]) -> Result<CMatrix> {
    if layers.is_empty() {
        return Err(Error::Contract("cascade needs at least one layer".into()));
    }
    if coefficients.len() != layers.len() {
        return Err(Error::Dimension(format!(
            "{} phase vectors for {} layers",
            coefficients.len(),
            layers.len()
        )));
    }
    let mut acc: Option<CMatrix> = None;
    for (b, (theta, layer)) in coefficients.iter().zip(layers).enumerate() {
        if theta.len() != layer.rows() {
            return Err(Error::Dimension(format!(
                "layer {b}: {} coefficients for a {}-row coupling matrix",
                theta.len(),
                layer.rows()
            )));
        }
        // diag(θ)·B_b scales row i by θ_i
        let stage = CMatrix::from_fn(layer.rows(), layer.cols(), |i, k| {
            theta[i] * layer[(i, k)] * eta
        });
        acc = Some(match acc {
            None => stage,
            Some(prev) => {
                if prev.cols() != stage.rows() {
                    return Err(Error::Dimension(format!(
                        "layer {b}: cascade has {} columns, layer expects {}",
                        prev.cols(),
                        stage.rows()
                    )));
                }
                &prev * &stage
            }
        });
    }
    Ok(acc.expect("nonempty"))
}

/// Per-layer RIS settings. Layers `0..B−1` are passive (unit modulus),
/// the last is active (amplitude in `[0, β_max]`).
#[derive(Debug, Clone, PartialEq)]
pub struct RisConfiguration {
    pub layers: Vec<Vec<C64>>,
    pub eta: f64,
    pub beta_max: f64,
    pub p_ris: f64,
}

impl RisConfiguration {
    pub fn active(&self) -> &[C64] {
        self.layers.last().expect("at least one layer")
    }

    pub fn passive(&self) -> &[Vec<C64>] {
        &self.layers[..self.layers.len() - 1]
    }

    pub fn phases(&self, b: usize) -> Vec<f64> {
        self.layers[b]
            .iter()
            .map(|z| z.arg().rem_euclid(2.0 * PI))
            .collect()
    }

    pub fn amplitudes(&self) -> Vec<f64> {
        self.active().iter().map(|z| z.norm()).collect()
    }

    pub fn cascade(&self, coupling: &[CMatrix]) -> Result<CMatrix> {
        ris_cascade(self.eta, &self.layers, coupling)
    }

    /// Product of the passive stages only (identity when there are none).
    pub fn passive_cascade(&self, coupling: &[CMatrix]) -> Result<CMatrix> {
        let n = coupling[0].rows();
        if self.layers.len() == 1 {
            return Ok(CMatrix::identity(n));
        }
        let k = self.layers.len() - 1;
        ris_cascade(self.eta, &self.layers[..k], &coupling[..k])
    }
}

/// Path angles plus deterministic amplitudes for the radar geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct SensingGeometry {
    /// BS-side directions; path 0 points at the target.
    pub bs_paths: Vec<Path>,
    pub bs_amplitude: f64,
    /// Target→Rx receive responses `g_{r,l}` (length `A_r`).
    pub g_r: Vec<Vec<C64>>,
    /// Rx→target transmit responses `g_{t,l}` (length `A_t`).
    pub g_t: Vec<Vec<C64>>,
    pub rho: Vec<C64>,
}

/// Every random and geometric channel object for one scenario draw.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub lambda: f64,
    pub bs: Vec3,
    pub ris: Vec3,
    pub rx: Vec3,
    pub eve: Vec3,
    pub bob: Vec3,
    pub bs_ris_paths: Vec<Path>,
    /// `L_b × N_R`, large-scale gain included.
    pub h_r: CMatrix,
    pub bs_eve_paths: Vec<Path>,
    /// `L_e × A_e`.
    pub h_e: CMatrix,
    pub sensing: SensingGeometry,
    /// `A_r × A_t`.
    pub h_i: CMatrix,
    pub g_i: f64,
    /// Rx→first RIS layer, `A_t × N_R`.
    pub g_b: CMatrix,
    /// Rx→Eve, `A_t × A_e`.
    pub g_e: CMatrix,
    /// Inter-layer couplings `N_R × N_R`, then last layer→Bob `N_R × A_b`.
    pub ris_layers: Vec<CMatrix>,
    /// Centre element index of each RIS layer grid.
    pub zeta: usize,
    /// Stand-in for the cascade when no RIS is deployed, `N_R × A_b`:
    /// `G` times it is a direct BS→Bob channel over the same paths.
    pub direct_hop: CMatrix,
}

impl ChannelRealization {
    pub fn last_layer(&self) -> &CMatrix {
        self.ris_layers.last().expect("at least one layer")
    }
}

/// BS-side channels at one pose.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseChannels {
    /// BS→first RIS layer, `Q̂ × N_R`.
    pub g: CMatrix,
    /// BS→Eve, `Q̂ × A_e`.
    pub e: CMatrix,
    /// BS→target paths `g_{n,m,l}`, each length `Q̂`.
    pub target: Vec<Vec<C64>>,
}

/// Large-scale linear gain at distance `d` metres.
pub fn large_scale_gain(db_per_decade: f64, d: f64) -> f64 {
    10f64.powf(-db_per_decade * d.log10() / 10.0)
}

/// Named sub-stream of a seeded generator; adding a new stream never
/// perturbs existing ones.
pub fn substream(seed: u64, name: &str) -> ChaCha8Rng {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(h);
    rng
}

pub fn complex_gaussian(rng: &mut impl Rng, variance: f64) -> C64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re * s, im * s)
}

fn gaussian_matrix(rng: &mut impl Rng, rows: usize, cols: usize, variance: f64) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| complex_gaussian(rng, variance))
}

/// LoS direction first, then `count − 1` directions drawn in a sector around it.
fn sector_paths(rng: &mut impl Rng, los: Vec3, count: usize, half_width: f64) -> Vec<Path> {
    let base = Path::toward(los);
    let mut out = vec![base];
    for _ in 1..count {
        let dphi = rng.random_range(-half_width..=half_width);
        let dtheta = rng.random_range(-half_width / 2.0..=half_width / 2.0);
        let theta = (base.theta + dtheta).clamp(1e-3, PI - 1e-3);
        out.push(Path {
            theta,
            phi: base.phi + dphi,
        });
    }
    out
}

/// Uniform linear array along x, pitch λ/2, centred at `center`.
pub fn ula_positions(center: Vec3, count: usize, lambda: f64) -> Vec<Vec3> {
    let c0 = (count as f64 - 1.0) / 2.0;
    (0..count)
        .map(|k| add(center, [(k as f64 - c0) * lambda / 2.0, 0.0, 0.0]))
        .collect()
}

/// Element positions of one RIS layer.
pub fn ris_layer_positions(center: Vec3, count: usize, lambda: f64) -> Result<Vec<Vec3>> {
    let grid = ArrayPlaneGrid::with_count(count, lambda / 2.0)?;
    Ok(grid.sites.iter().map(|&s| add(center, s)).collect())
}

/// Spherical-wave coupling `(λ/4πr)·e^{−j2πr/λ}` between two element sets.
pub fn near_field_coupling(from: &[Vec3], to: &[Vec3], lambda: f64) -> CMatrix {
    CMatrix::from_fn(from.len(), to.len(), |i, k| {
        let r = distance(from[i], to[k]);
        C64::from_polar(lambda / (4.0 * PI * r), -2.0 * PI * r / lambda)
    })
}

/// Multipath channel from a ULA transmitter: `Σ_ι conj(a_ι)·h_ιᵀ`, `A_t × K`.
fn ula_multipath(
    rng: &mut impl Rng,
    positions: &[Vec3],
    paths: &[Path],
    receivers: usize,
    gain: f64,
    lambda: f64,
) -> CMatrix {
    let mut out = CMatrix::zeros(positions.len(), receivers);
    for p in paths {
        let a = steering_at(positions, p.unit(), lambda);
        let h: Vec<C64> = (0..receivers)
            .map(|_| complex_gaussian(rng, gain))
            .collect();
        for (t, at) in a.iter().enumerate() {
            for (k, hk) in h.iter().enumerate() {
                out[(t, k)] += at.conj() * hk;
            }
        }
    }
    out
}

/// Scene layout: BS at the origin, RIS on +y, Rx placed from the three
/// pairwise distances, Bob behind the last RIS layer.
pub fn scene_positions(cfg: &ScenarioConfig) -> (Vec3, Vec3, Vec3, Vec3) {
    let bs = [0.0; 3];
    let ris = [0.0, cfg.d_bs_ris, 0.0];
    let y =
        (cfg.d_bs_rx.powi(2) - cfg.d_rx_ris.powi(2) + cfg.d_bs_ris.powi(2)) / (2.0 * cfg.d_bs_ris);
    let x = (cfg.d_bs_rx.powi(2) - y * y).max(0.0).sqrt();
    let rx = [x, y, 0.0];
    let last = cfg.d_bs_ris + (cfg.layers as f64 - 1.0) * cfg.layer_gap;
    let bob = [0.0, last + cfg.ris_bob_distance, 0.0];
    (bs, ris, rx, bob)
}

pub fn synthesize_scenario(cfg: &ScenarioConfig, seed: u64) -> Result<ChannelRealization> {
    let lambda = cfg.wavelength();
    let (bs, ris, rx, bob) = scene_positions(cfg);
    let eve = cfg.eve_position;
    let pl = |d: f64| large_scale_gain(cfg.path_gain_db_per_decade, d);
    for (name, d) in [("BS-Eve", distance(bs, eve)), ("Rx-Eve", distance(rx, eve))] {
        if !(d > 0.0) {
            return Err(Error::Config(format!("{name} distance is zero")));
        }
    }
    let hw = cfg.scatter_half_width;

    let mut rng = substream(seed, "bs-ris");
    let bs_ris_paths = sector_paths(&mut rng, sub(ris, bs), cfg.l_b, hw);
    let h_r = gaussian_matrix(&mut rng, cfg.l_b, cfg.n_r, pl(distance(bs, ris)));

    let mut rng = substream(seed, "bs-eve");
    let bs_eve_paths = sector_paths(&mut rng, sub(eve, bs), cfg.l_e, hw);
    let h_e = gaussian_matrix(&mut rng, cfg.l_e, cfg.a_e, pl(distance(bs, eve)));

    let mut rng = substream(seed, "sensing");
    let bs_paths = sector_paths(&mut rng, sub(eve, bs), cfg.l_r, hw);
    let rx_paths = sector_paths(&mut rng, sub(eve, rx), cfg.l_r, hw);
    let rx_rx = ula_positions(rx, cfg.a_r, lambda);
    let rx_tx = ula_positions(rx, cfg.a_t, lambda);
    let rx_amp = pl(distance(rx, eve)).sqrt();
    let g_r = rx_paths
        .iter()
        .map(|p| {
            steering_at(&rx_rx, p.unit(), lambda)
                .into_iter()
                .map(|z| z * rx_amp)
                .collect()
        })
        .collect();
    let g_t = rx_paths
        .iter()
        .map(|p| {
            steering_at(&rx_tx, p.unit(), lambda)
                .into_iter()
                .map(|z| z.conj() * rx_amp)
                .collect()
        })
        .collect();
    let clutter_var = cfg.rho0.powi(2) * 10f64.powf(cfg.clutter_rel_db / 10.0);
    let mut rho = vec![C64::new(cfg.rho0, 0.0)];
    for _ in 1..cfg.l_r {
        rho.push(complex_gaussian(&mut rng, clutter_var));
    }
    let sensing = SensingGeometry {
        bs_paths,
        bs_amplitude: pl(distance(bs, eve)).sqrt(),
        g_r,
        g_t,
        rho,
    };

    let mut rng = substream(seed, "self-interference");
    let h_i = gaussian_matrix(&mut rng, cfg.a_r, cfg.a_t, 1.0);

    let mut rng = substream(seed, "rx-bob");
    let paths = sector_paths(&mut rng, sub(ris, rx), cfg.l_b, hw);
    let g_b = ula_multipath(
        &mut rng,
        &rx_tx,
        &paths,
        cfg.n_r,
        pl(distance(rx, ris)),
        lambda,
    );

    let mut rng = substream(seed, "rx-eve");
    let paths = sector_paths(&mut rng, sub(eve, rx), cfg.l_e, hw);
    let g_e = ula_multipath(
        &mut rng,
        &rx_tx,
        &paths,
        cfg.a_e,
        pl(distance(rx, eve)),
        lambda,
    );

    let mut ris_layers = Vec::with_capacity(cfg.layers);
    let layer_pos = |b: usize| {
        ris_layer_positions(
            add(ris, [0.0, b as f64 * cfg.layer_gap, 0.0]),
            cfg.n_r,
            lambda,
        )
    };
    for b in 0..cfg.layers - 1 {
        ris_layers.push(near_field_coupling(
            &layer_pos(b)?,
            &layer_pos(b + 1)?,
            lambda,
        ));
    }
    let last = layer_pos(cfg.layers - 1)?;
    let bob_ants = ula_positions(bob, cfg.a_b, lambda);
    ris_layers.push(CMatrix::from_fn(cfg.n_r, cfg.a_b, |i, k| {
        let r = distance(last[i], bob_ants[k]);
        C64::from_polar(pl(r).sqrt(), -2.0 * PI * r / lambda)
    }));
    let zeta = ArrayPlaneGrid::with_count(cfg.n_r, lambda / 2.0)?.center_index();

    let mut rng = substream(seed, "bs-bob");
    let h_d = gaussian_matrix(&mut rng, cfg.l_b, cfg.a_b, pl(distance(bs, bob)));
    let direct_hop = right_inverse_apply(&h_r, &h_d)?;

    Ok(ChannelRealization {
        lambda,
        bs,
        ris,
        rx,
        eve,
        bob,
        bs_ris_paths,
        h_r,
        bs_eve_paths,
        h_e,
        sensing,
        h_i,
        g_i: cfg.g_i,
        g_b,
        g_e,
        ris_layers,
        zeta,
        direct_hop,
    })
}

/// `Hᴴ(HHᴴ)⁻¹·X` for a wide full-row-rank `H`, so that `H` times the
/// result is `X`.
fn right_inverse_apply(h: &CMatrix, x: &CMatrix) -> Result<CMatrix> {
    let gram = h.matmul(&h.adjoint());
    let cols = x
        .columns()
        .iter()
        .map(|c| solve_hpd(&gram, c).map(|y| h.adjoint_matvec(&y)))
        .collect::<Result<Vec<_>>>()?;
    Ok(CMatrix::from_columns(h.cols(), &cols))
}

/// A synthesized scenario together with its pose grid.
#[derive(Debug)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub seed: u64,
    pub grid: ArrayPlaneGrid,
    pub rotations: Vec<RotationAngles>,
    pub origins: Vec<Vec3>,
    pub pattern: RadiationPattern,
    pub channels: ChannelRealization,
    cache: Vec<OnceLock<PoseChannels>>,
}

impl Scenario {
    pub fn new(config: &ScenarioConfig, seed: u64) -> Result<Self> {
        let lambda = config.wavelength();
        let grid = ArrayPlaneGrid::with_count(config.q_hat, lambda / 2.0)?;
        let rotations = geometry::rotation_set(
            geometry::split_three(config.n),
            config.gamma_range,
            config.alpha_range,
            config.beta_range,
        );
        let (mx, mz) = geometry::near_square(config.m);
        let origins = geometry::origin_set([0.0; 3], [mx, mz], config.origin_half_span);
        let channels = synthesize_scenario(config, seed)?;
        let pattern = RadiationPattern::new(config.p, config.pattern);
        let cache = (0..rotations.len() * origins.len())
            .map(|_| OnceLock::new())
            .collect();
        Ok(Self {
            config: config.clone(),
            seed,
            grid,
            rotations,
            origins,
            pattern,
            channels,
            cache,
        })
    }

    pub fn pose_count(&self) -> usize {
        self.rotations.len() * self.origins.len()
    }

    pub fn pose_index(&self, n: usize, m: usize) -> usize {
        n * self.origins.len() + m
    }

    pub fn pose(&self, idx: usize) -> Pose {
        let n = idx / self.origins.len();
        let m = idx % self.origins.len();
        let mut p = pose_coordinates(&self.grid, self.rotations[n], self.origins[m]);
        p.n = n;
        p.m = m;
        p
    }

    /// Rotation closest to identity.
    pub fn nominal_rotation(&self) -> usize {
        argmin(
            self.rotations
                .iter()
                .map(|r| r.alpha.abs() + r.beta.abs() + r.gamma.abs()),
        )
    }

    /// Origin closest to the lattice centre.
    pub fn nominal_origin(&self) -> usize {
        argmin(self.origins.iter().map(|&o| norm3(o)))
    }

    pub fn nominal_pose(&self) -> usize {
        self.pose_index(self.nominal_rotation(), self.nominal_origin())
    }

    pub fn compute_pose_channels(&self, idx: usize) -> PoseChannels {
        let pose = self.pose(idx);
        let ch = &self.channels;
        let g = assemble_bs_channel(&pose, &ch.bs_ris_paths, &ch.h_r, &self.pattern, ch.lambda)
            .expect("valid paths");
        let e = assemble_bs_channel(&pose, &ch.bs_eve_paths, &ch.h_e, &self.pattern, ch.lambda)
            .expect("valid paths");
        let amp = CMatrix::from_fn(1, 1, |_, _| C64::new(ch.sensing.bs_amplitude, 0.0));
        let target = ch
            .sensing
            .bs_paths
            .iter()
            .map(|p| {
                assemble_bs_channel(
                    &pose,
                    std::slice::from_ref(p),
                    &amp,
                    &self.pattern,
                    ch.lambda,
                )
                .expect("valid path")
                .column(0)
            })
            .collect();
        PoseChannels { g, e, target }
    }

    /// `G·v` at pose `idx` for an `N_R`-vector `v`.
    pub fn bob_vector(&self, idx: usize, v: &[C64]) -> Vec<C64> {
        let ch = &self.channels;
        let c = ch.h_r.matvec(v);
        bs_effective_vector(
            &self.pose(idx),
            &ch.bs_ris_paths,
            &c,
            &self.pattern,
            ch.lambda,
        )
    }

    /// Memoized [`Self::compute_pose_channels`].
    pub fn pose_channels(&self, idx: usize) -> &PoseChannels {
        self.cache[idx].get_or_init(|| self.compute_pose_channels(idx))
    }
}

fn argmin(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::INFINITY);
    for (i, v) in values.enumerate() {
        if v < best.1 - 1e-15 {
            best = (i, v);
        }
    }
    best.0
}

/// Unit-modulus zero-phase coefficients for every layer.
pub fn identity_coefficients(layers: usize, n_r: usize) -> Vec<Vec<C64>> {
    vec![vec![C64::new(1.0, 0.0); n_r]; layers]
}

pub fn zero_vector(n: usize) -> Vec<C64> {
    vec![ZERO; n]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ArrayPlaneGrid;

    #[test]
    fn pattern_examples() {
        let p0 = RadiationPattern::new(0, PatternForm::Printed);
        assert_eq!(p0.element_gain(0.3, 1.0), 2.0);
        let p1 = RadiationPattern::new(1, PatternForm::Printed);
        assert!((p1.element_gain(0.0, PI / 3.0) - 1.5).abs() < 1e-12);
        assert_eq!(p1.element_gain(PI / 2.0, 0.0), 0.0);
    }

    #[test]
    fn steering_examples() {
        let lambda = 0.125;
        let pose = pose_coordinates(
            &ArrayPlaneGrid {
                sites: vec![[0.0; 3], [lambda / 2.0, 0.0, 0.0]],
                pitch: lambda / 2.0,
                cols: 2,
            },
            RotationAngles::IDENTITY,
            [0.0; 3],
        );
        let a = steering_vector(&pose, PI / 2.0, PI / 2.0, lambda);
        assert!(
            (a[0] - C64::new(1.0, 0.0)).norm() < 1e-12
                && (a[1] - C64::new(1.0, 0.0)).norm() < 1e-12
        );
        let a = steering_vector(&pose, PI / 2.0, 0.0, lambda);
        assert!((a[1] - C64::new(-1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn boresight_faces_plus_y() {
        let rot = RotationAngles::IDENTITY.matrix();
        let (theta, _) = local_angles(&rot, [0.0, 1.0, 0.0]);
        assert!(theta.abs() < 1e-12);
        let (theta, _) = local_angles(&rot, [0.0, -1.0, 0.0]);
        assert!((theta - PI).abs() < 1e-12);
    }

    #[test]
    fn cascade_examples() {
        let b0 = CMatrix::identity(2);
        let one = vec![vec![C64::new(1.0, 0.0); 2]];
        assert_eq!(ris_cascade(1.0, &one, std::slice::from_ref(&b0)).unwrap(), b0);
        let two = identity_coefficients(2, 2);
        let b = ris_cascade(0.5, &two, &[b0.clone(), b0.clone()]).unwrap();
        assert!((&b - &CMatrix::identity(2).scale_real(0.25)).frobenius_norm() < 1e-15);
        let bad = ris_cascade(1.0, &two, &[b0, CMatrix::identity(3)]).unwrap_err();
        assert!(bad.to_string().contains("layer 1"), "{bad}");
    }

    #[test]
    fn large_scale_law() {
        let g1 = large_scale_gain(20.03, 100.0);
        let g2 = large_scale_gain(20.03, 200.0);
        assert!((10.0 * (g1 / g2).log10() - 20.03 * 2f64.log10()).abs() < 1e-9);
    }

    #[test]
    fn scenario_is_deterministic() {
        let cfg = ScenarioConfig::desk();
        let a = synthesize_scenario(&cfg, 7).unwrap();
        let b = synthesize_scenario(&cfg, 7).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.h_r, synthesize_scenario(&cfg, 8).unwrap().h_r);
        assert_eq!(a.bs_ris_paths.len(), 3);
        assert_eq!(a.ris_layers.len(), cfg.layers);
        assert_eq!(
            (a.ris_layers[2].rows(), a.ris_layers[2].cols()),
            (cfg.n_r, cfg.a_b)
        );
    }

    #[test]
    fn scene_distances_match_config() {
        let cfg = ScenarioConfig::paper();
        let (bs, ris, rx, _) = scene_positions(&cfg);
        assert!((distance(bs, rx) - 2000.0).abs() < 1e-6);
        assert!((distance(bs, ris) - 3000.0).abs() < 1e-6);
        assert!((distance(rx, ris) - 1500.0).abs() < 1e-6);
    }
}
