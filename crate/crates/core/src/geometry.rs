//! Pose grid of the rotatable array, site rotation, and antenna layouts.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = [f64; 3];

pub fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

pub fn dot3(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn norm3(a: Vec3) -> f64 {
    dot3(a, a).sqrt()
}

pub fn distance(a: Vec3, b: Vec3) -> f64 {
    norm3(sub(a, b))
}

/// Candidate antenna sites on the array plane (y = 0).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayPlaneGrid {
    pub sites: Vec<Vec3>,
    pub pitch: f64,
    /// Columns along x; sites are stored row-major with z rows.
    pub cols: usize,
}

impl ArrayPlaneGrid {
    /// `cols × rows` sites centred on the origin, row-major over z.
    pub fn uniform(cols: usize, rows: usize, pitch: f64) -> Self {
        let x0 = (cols as f64 - 1.0) / 2.0;
        let z0 = (rows as f64 - 1.0) / 2.0;
        let mut sites = Vec::with_capacity(cols * rows);
        for r in 0..rows {
            for c in 0..cols {
                sites.push([(c as f64 - x0) * pitch, 0.0, (r as f64 - z0) * pitch]);
            }
        }
        Self { sites, pitch, cols }
    }

    /// Near-square grid holding exactly `count` sites.
    pub fn with_count(count: usize, pitch: f64) -> Result<Self> {
        if count == 0 {
            return Err(Error::Config("array grid needs at least one site".into()));
        }
        let (cols, rows) = near_square(count);
        Ok(Self::uniform(cols, rows, pitch))
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    /// Index of the site closest to the grid centre (lowest index on ties).
    pub fn center_index(&self) -> usize {
        let mut best = 0;
        for (i, s) in self.sites.iter().enumerate() {
            if norm3(*s) < norm3(self.sites[best]) - 1e-12 {
                best = i;
            }
        }
        best
    }
}

/// Factor `n = cols × rows` with `cols ≥ rows` as close to square as possible.
pub fn near_square(n: usize) -> (usize, usize) {
    let mut rows = (n as f64).sqrt().floor() as usize;
    while rows > 1 && !n.is_multiple_of(rows) {
        rows -= 1;
    }
    let rows = rows.max(1);
    (n / rows, rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotationAngles {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl RotationAngles {
    pub const IDENTITY: Self = Self {
        alpha: 0.0,
        beta: 0.0,
        gamma: 0.0,
    };

    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Self {
        Self { alpha, beta, gamma }
    }

    pub fn is_identity(&self) -> bool {
        self.alpha == 0.0 && self.beta == 0.0 && self.gamma == 0.0
    }

    /// Row-major rotation matrix mapping plane coordinates to rotated ones.
    pub fn matrix(&self) -> [[f64; 3]; 3] {
        let (sa, ca) = self.alpha.sin_cos();
        let (sb, cb) = self.beta.sin_cos();
        let (sg, cg) = self.gamma.sin_cos();
        [
            [cb * cg, cb * sg, -sb],
            [sa * sb * cg - ca * sg, sa * sb * sg + ca * cg, sa * cb],
            [ca * sb * cg + sa * sg, ca * sb * sg - sa * cg, ca * cb],
        ]
    }
}

pub fn mat_vec3(m: &[[f64; 3]; 3], v: Vec3) -> Vec3 {
    [dot3(m[0], v), dot3(m[1], v), dot3(m[2], v)]
}

/// Rotates a plane site. The y component of `t` is carried through the
/// full 3D rotation so the map stays rigid for any input.
pub fn rotate_point(angles: &RotationAngles, t: Vec3) -> Vec3 {
    mat_vec3(&angles.matrix(), t)
}

/// One (rotation, translation) configuration of the array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub n: usize,
    pub m: usize,
    pub angles: RotationAngles,
    pub origin: Vec3,
    pub site_coords: Vec<Vec3>,
}

impl Pose {
    pub fn rotation(&self) -> [[f64; 3]; 3] {
        self.angles.matrix()
    }
}

pub fn pose_coordinates(grid: &ArrayPlaneGrid, angles: RotationAngles, origin: Vec3) -> Pose {
    let r = angles.matrix();
    let site_coords = grid
        .sites
        .iter()
        .map(|&t| add(origin, mat_vec3(&r, t)))
        .collect();
    Pose {
        n: 0,
        m: 0,
        angles,
        origin,
        site_coords,
    }
}

/// All `N·M` poses, rotation-major.
pub fn enumerate_pose_grid(
    grid: &ArrayPlaneGrid,
    rotations: &[RotationAngles],
    origins: &[Vec3],
) -> Result<Vec<Pose>> {
    if rotations.is_empty() {
        return Err(Error::Config("rotation set is empty".into()));
    }
    if origins.is_empty() {
        return Err(Error::Config("origin set is empty".into()));
    }
    if grid.is_empty() {
        return Err(Error::Config("array grid is empty".into()));
    }
    let mut poses = Vec::with_capacity(rotations.len() * origins.len());
    for (n, &angles) in rotations.iter().enumerate() {
        for (m, &origin) in origins.iter().enumerate() {
            let mut p = pose_coordinates(grid, angles, origin);
            p.n = n;
            p.m = m;
            poses.push(p);
        }
    }
    Ok(poses)
}

/// `count` points `lo + i·(hi − lo)/count`; includes `lo`, excludes `hi`.
pub fn half_open_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|i| lo + i as f64 * (hi - lo) / count as f64)
        .collect()
}

/// `count` evenly spaced points covering `[lo, hi]`; a single point sits at the midpoint.
pub fn closed_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..count)
        .map(|i| lo + i as f64 * (hi - lo) / (count - 1) as f64)
        .collect()
}

/// Angle grid over `[lo, hi)` that contains zero when the range is symmetric:
/// cell starts for even counts, cell centres for odd counts.
pub fn angle_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let step = (hi - lo) / count as f64;
    let shift = if count % 2 == 1 { 0.5 } else { 0.0 };
    (0..count).map(|i| lo + (i as f64 + shift) * step).collect()
}

/// Splits `n` into three per-axis counts `[γ, α, β]`, as even as possible.
pub fn split_three(n: usize) -> [usize; 3] {
    let mut counts = [1usize; 3];
    let mut rest = n;
    let mut primes = Vec::new();
    let mut p = 2;
    while rest > 1 {
        while rest.is_multiple_of(p) {
            primes.push(p);
            rest /= p;
        }
        p += 1;
    }
    primes.sort_unstable_by(|a, b| b.cmp(a));
    for prime in primes {
        let mut slot = 0;
        for i in 1..3 {
            if counts[i] < counts[slot] {
                slot = i;
            }
        }
        counts[slot] *= prime;
    }
    counts
}

/// Discrete rotation set: product of [`angle_grid`]s, γ outermost, β innermost.
pub fn rotation_set(
    counts: [usize; 3],
    gamma: [f64; 2],
    alpha: [f64; 2],
    beta: [f64; 2],
) -> Vec<RotationAngles> {
    let gs = angle_grid(gamma[0], gamma[1], counts[0]);
    let al = angle_grid(alpha[0], alpha[1], counts[1]);
    let be = angle_grid(beta[0], beta[1], counts[2]);
    let mut out = Vec::with_capacity(gs.len() * al.len() * be.len());
    for &g in &gs {
        for &a in &al {
            for &b in &be {
                out.push(RotationAngles::new(a, b, g));
            }
        }
    }
    out
}

/// Translation lattice on the x–z plane around `center`, x outermost.
pub fn origin_set(center: Vec3, counts: [usize; 2], half_span: [f64; 2]) -> Vec<Vec3> {
    let xs = closed_grid(-half_span[0], half_span[0], counts[0]);
    let zs = closed_grid(-half_span[1], half_span[1], counts[1]);
    let mut out = Vec::with_capacity(xs.len() * zs.len());
    for &x in &xs {
        for &z in &zs {
            out.push(add(center, [x, 0.0, z]));
        }
    }
    out
}

/// Selected sites on the grid.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AntennaLayout {
    pub mask: Vec<bool>,
}

impl AntennaLayout {
    pub fn full(q: usize) -> Self {
        Self {
            mask: vec![true; q],
        }
    }

    pub fn from_indices(q: usize, idx: &[usize]) -> Result<Self> {
        let mut mask = vec![false; q];
        for &i in idx {
            if i >= q {
                return Err(Error::Contract(format!("site {i} outside grid of {q}")));
            }
            if mask[i] {
                return Err(Error::Contract(format!("site {i} selected twice")));
            }
            mask[i] = true;
        }
        Ok(Self { mask })
    }

    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&f| f).count()
    }

    pub fn indices(&self) -> Vec<usize> {
        self.mask
            .iter()
            .enumerate()
            .filter_map(|(i, &f)| f.then_some(i))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.mask.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mask.is_empty()
    }

    /// The `a` sites nearest the grid centre, lowest index on ties.
    pub fn contiguous(grid: &ArrayPlaneGrid, a: usize) -> Result<Self> {
        if a > grid.len() {
            return Err(Error::Config(format!(
                "cannot select {a} of {} sites",
                grid.len()
            )));
        }
        let mut order: Vec<usize> = (0..grid.len()).collect();
        order.sort_by(|&i, &j| {
            norm3(grid.sites[i])
                .partial_cmp(&norm3(grid.sites[j]))
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(i.cmp(&j))
        });
        Self::from_indices(grid.len(), &order[..a])
    }
}

pub fn min_spacing_ok(pose: &Pose, layout: &AntennaLayout, d: f64) -> bool {
    let idx = layout.indices();
    for (k, &i) in idx.iter().enumerate() {
        for &j in &idx[k + 1..] {
            // relative slack absorbs rounding in the rotated coordinates
            if distance(pose.site_coords[i], pose.site_coords[j]) < d * (1.0 - 1e-12) {
                return false;
            }
        }
    }
    true
}

pub const MAX_EXACT_SITES: usize = 62;

/// `Σ f_q 2^q`, exact for up to [`MAX_EXACT_SITES`] sites.
pub fn layout_encode(layout: &AntennaLayout) -> Result<u64> {
    if layout.len() > MAX_EXACT_SITES {
        return Err(Error::Contract(format!(
            "{} sites exceed exact encoding range ({MAX_EXACT_SITES}); use layout_encode_normalized",
            layout.len()
        )));
    }
    Ok(layout
        .mask
        .iter()
        .enumerate()
        .filter(|(_, &f)| f)
        .map(|(q, _)| 1u64 << q)
        .sum())
}

pub fn layout_decode(code: u64, q: usize) -> Result<AntennaLayout> {
    if q > MAX_EXACT_SITES {
        return Err(Error::Contract(format!(
            "{q} sites exceed exact encoding range"
        )));
    }
    if q < 64 && code >> q != 0 {
        return Err(Error::Contract(format!(
            "code {code} has bits beyond {q} sites"
        )));
    }
    Ok(AntennaLayout {
        mask: (0..q).map(|i| code >> i & 1 == 1).collect(),
    })
}

/// `Σ f_q 2^q / 2^Q̂` in double precision; lossy for large grids.
pub fn layout_encode_normalized(layout: &AntennaLayout) -> f64 {
    let q = layout.len() as i32;
    layout
        .mask
        .iter()
        .enumerate()
        .filter(|(_, &f)| f)
        .map(|(i, _)| 2f64.powi(i as i32 - q))
        .sum()
}
