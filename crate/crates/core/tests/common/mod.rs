//! Shared helpers for the integration tests: desk solutions and
//! symbol-level Monte Carlo oracles for the three SINR evaluators.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rasec::channel::{PoseChannels, Scenario};
use rasec::config::ScenarioConfig;
use rasec::numerics::{CMatrix, C64};
use rasec::optimizer::{run_two_stage, Baseline, TwoStageSolution};
use rasec::signal::{LinkView, NoiseConfig};

pub struct Solved {
    pub sc: Scenario,
    pub sol: TwoStageSolution,
    pub bs: PoseChannels,
}

impl Solved {
    pub fn new(cfg: &ScenarioConfig, seed: u64, baseline: Baseline) -> Self {
        let sc = Scenario::new(cfg, seed).expect("scenario");
        let sol = run_two_stage(&sc, baseline).expect("two-stage solution");
        let bs = sc.compute_pose_channels(sol.pose_index);
        Self { sc, sol, bs }
    }

    pub fn view(&self) -> LinkView<'_> {
        LinkView {
            bs: &self.bs,
            layout: &self.sol.layout,
            cascade: &self.sol.cascade,
            channels: &self.sc.channels,
            ris_thermal: self.sol.baseline != Baseline::NoRis,
            leakage: self.sc.config.leakage_coefficient,
        }
    }

    pub fn noise(&self) -> NoiseConfig {
        NoiseConfig::from_config(&self.sc.config)
    }
}

/// Unit-power QPSK symbol.
pub fn qpsk(rng: &mut impl Rng) -> C64 {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let re = if rng.random::<bool>() { h } else { -h };
    let im = if rng.random::<bool>() { h } else { -h };
    C64::new(re, im)
}

pub fn awgn(rng: &mut impl Rng, variance: f64) -> C64 {
    let s = (variance / 2.0).sqrt();
    C64::new(
        s * rng.sample::<f64, _>(StandardNormal),
        s * rng.sample::<f64, _>(StandardNormal),
    )
}

fn symbols(rng: &mut impl Rng, n: usize) -> Vec<C64> {
    (0..n).map(|_| qpsk(rng)).collect()
}

/// `aᴴ b`.
fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn mat_vec(m: &CMatrix, v: &[C64]) -> Vec<C64> {
    (0..m.rows())
        .map(|i| (0..m.cols()).map(|k| m[(i, k)] * v[k]).sum())
        .collect()
}

/// `mᴴ v`.
fn adj_vec(m: &CMatrix, v: &[C64]) -> Vec<C64> {
    (0..m.cols())
        .map(|k| (0..m.rows()).map(|i| m[(i, k)].conj() * v[i]).sum())
        .collect()
}

/// Transmitted BS sample `F·W·s` with unselected sites silent.
fn masked_tx(mask: &[bool], w: &CMatrix, s: &[C64], amp: f64) -> Vec<C64> {
    let x = mat_vec(w, s);
    x.iter()
        .zip(mask)
        .map(|(z, &m)| if m { z * amp } else { C64::new(0.0, 0.0) })
        .collect()
}

/// Empirical SINR at Bob: the received scalar is split into the
/// communication part and everything else, each averaged over `draws`.
pub fn mc_bob(s: &Solved, draws: usize, seed: u64) -> f64 {
    let (sol, ch) = (&s.sol, &s.sc.channels);
    let split = sol.split;
    let (ap, jp) = (
        (split.alpha * split.p_t).sqrt(),
        ((1.0 - split.alpha) * split.p_t).sqrt(),
    );
    let noise = s.noise();
    let b = &sol.beams;
    let mask = &sol.layout.mask;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut sig, mut rest) = (0.0, 0.0);
    for _ in 0..draws {
        let xc = masked_tx(mask, &b.w_c, &symbols(&mut rng, b.w_c.cols()), ap);
        let xr = masked_tx(mask, &b.w_r, &symbols(&mut rng, b.w_r.cols()), ap);
        let sa = symbols(&mut rng, b.w_a.cols());
        let xa: Vec<C64> = mat_vec(&b.w_a, &sa).into_iter().map(|z| z * jp).collect();
        // BS → first RIS layer → cascade → Bob antennas
        let to_bob = |x: &[C64]| adj_vec(&sol.cascade, &adj_vec(&s.bs.g, x));
        let desired = inner(&b.u_b, &to_bob(&xc));
        let radar = inner(&b.u_b, &to_bob(&xr));
        let an = inner(&b.u_b, &adj_vec(&sol.cascade, &adj_vec(&ch.g_b, &xa)));
        let thermal = if sol.baseline != Baseline::NoRis {
            let n_i: Vec<C64> = (0..ch.last_layer().rows())
                .map(|_| awgn(&mut rng, noise.sigma_i2))
                .collect();
            inner(&b.u_b, &adj_vec(ch.last_layer(), &n_i))
        } else {
            C64::new(0.0, 0.0)
        };
        let n_b: Vec<C64> = (0..b.u_b.len())
            .map(|_| awgn(&mut rng, noise.sigma_b2))
            .collect();
        let other = radar + an + thermal + inner(&b.u_b, &n_b);
        sig += desired.norm_sqr();
        rest += other.norm_sqr();
    }
    sig / rest
}

pub fn mc_eve(s: &Solved, draws: usize, seed: u64) -> f64 {
    let (sol, ch) = (&s.sol, &s.sc.channels);
    let split = sol.split;
    let (ap, jp) = (
        (split.alpha * split.p_t).sqrt(),
        ((1.0 - split.alpha) * split.p_t).sqrt(),
    );
    let noise = s.noise();
    let b = &sol.beams;
    let mask = &sol.layout.mask;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut sig, mut rest) = (0.0, 0.0);
    for _ in 0..draws {
        let xc = masked_tx(mask, &b.w_c, &symbols(&mut rng, b.w_c.cols()), ap);
        let xr = masked_tx(mask, &b.w_r, &symbols(&mut rng, b.w_r.cols()), ap);
        let sa = symbols(&mut rng, b.w_a.cols());
        let xa: Vec<C64> = mat_vec(&b.w_a, &sa).into_iter().map(|z| z * jp).collect();
        let desired = inner(&b.u_e, &adj_vec(&s.bs.e, &xc));
        let radar = inner(&b.u_e, &adj_vec(&s.bs.e, &xr));
        let an = inner(&b.u_e, &adj_vec(&ch.g_e, &xa));
        let n_e: Vec<C64> = (0..b.u_e.len())
            .map(|_| awgn(&mut rng, noise.sigma_e2))
            .collect();
        sig += desired.norm_sqr();
        rest += (radar + an + inner(&b.u_e, &n_e)).norm_sqr();
    }
    sig / rest
}

/// Empirical radar SINR. The echo of the sensing and jamming streams off
/// path 0 is the target; the same streams off the other paths are clutter;
/// the communication stream echoes (with the configured leakage
/// coefficients) plus receiver noise form the leakage group; the jamming
/// stream through the self-interference channel is the last group. Each
/// group's energy is averaged separately.
pub fn mc_radar(s: &Solved, draws: usize, seed: u64) -> f64 {
    let (sol, ch) = (&s.sol, &s.sc.channels);
    let sens = &ch.sensing;
    let split = sol.split;
    let (ap, jp) = (
        (split.alpha * split.p_t).sqrt(),
        ((1.0 - split.alpha) * split.p_t).sqrt(),
    );
    let noise = s.noise();
    let b = &sol.beams;
    let mask = &sol.layout.mask;
    let l_r = sens.rho.len();
    let a_r = sens.g_r[0].len();
    let leak: Vec<C64> = match s.sc.config.leakage_coefficient {
        rasec::config::LeakageCoefficient::Target => vec![sens.rho[0]; l_r],
        rasec::config::LeakageCoefficient::PerPath => sens.rho.clone(),
    };
    let gi = ch.g_i.sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut target, mut clutter, mut leakage, mut si) = (0.0, 0.0, 0.0, 0.0);
    let energy = |v: &[C64]| v.iter().map(|z| z.norm_sqr()).sum::<f64>();
    for _ in 0..draws {
        let xc = masked_tx(mask, &b.w_c, &symbols(&mut rng, b.w_c.cols()), ap);
        let xr = masked_tx(mask, &b.w_r, &symbols(&mut rng, b.w_r.cols()), ap);
        let sa = symbols(&mut rng, b.w_a.cols());
        let xa_unit = mat_vec(&b.w_a, &sa);
        let xa: Vec<C64> = xa_unit.iter().map(|z| z * jp).collect();
        let mut y_t = vec![C64::new(0.0, 0.0); a_r];
        let mut y_c = y_t.clone();
        let mut y_l: Vec<C64> = (0..a_r).map(|_| awgn(&mut rng, noise.sigma_r2)).collect();
        for l in 0..l_r {
            let sensed = inner(&s.bs.target[l], &xr) + inner(&sens.g_t[l], &xa);
            let comm = inner(&s.bs.target[l], &xc);
            let dst = if l == 0 { &mut y_t } else { &mut y_c };
            for (a, g) in dst.iter_mut().zip(&sens.g_r[l]) {
                *a += g * sens.rho[l] * sensed;
            }
            for (a, g) in y_l.iter_mut().zip(&sens.g_r[l]) {
                *a += g * leak[l] * comm;
            }
        }
        let y_si: Vec<C64> = mat_vec(&ch.h_i, &xa_unit)
            .into_iter()
            .map(|z| z * gi)
            .collect();
        target += energy(&y_t);
        clutter += energy(&y_c);
        leakage += energy(&y_l);
        si += energy(&y_si);
    }
    target / (clutter + leakage + si)
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}
