//! Dense complex linear algebra used by every closed-form subproblem.
//!
//! Everything here is small (n ≤ a few hundred) and pure: a row-major
//! [`CMatrix`], a cyclic Jacobi eigensolver for Hermitian matrices, the
//! Cholesky-whitened generalized Rayleigh quotient, and the orthogonal
//! projector onto the complement of a column space.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

const JACOBI_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 100;
const HERMITIAN_TOL: f64 = 1e-10;
const PD_TOL: f64 = 1e-12;
const PROJECTOR_MAX_COND: f64 = 1e12;

/// Dense complex matrix, row-major.
#[derive(Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl fmt::Debug for CMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CMatrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            write!(f, "  ")?;
            for c in 0..self.cols {
                let z = self[(r, c)];
                write!(f, "{:+.4e}{:+.4e}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from row-major entries; fails if the count is off or
    /// any entry is non-finite.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "expected {} entries for {rows}x{cols}, got {}",
                rows * cols,
                data.len()
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("matrix entries".into()));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_real_diag(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, &v) in d.iter().enumerate() {
            m[(i, i)] = C64::new(v, 0.0);
        }
        m
    }

    pub fn from_diag(d: &[C64]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, &v) in d.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn column_vector(v: &[C64]) -> Self {
        Self {
            rows: v.len(),
            cols: 1,
            data: v.to_vec(),
        }
    }

    pub fn from_columns(rows: usize, columns: &[Vec<C64>]) -> Self {
        let mut m = Self::zeros(rows, columns.len());
        for (c, col) in columns.iter().enumerate() {
            assert_eq!(col.len(), rows, "column {c} has wrong length");
            for (r, &v) in col.iter().enumerate() {
                m[(r, c)] = v;
            }
        }
        m
    }

    /// `v vᴴ`.
    pub fn outer(v: &[C64]) -> Self {
        Self::from_fn(v.len(), v.len(), |r, c| v[r] * v[c].conj())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn column(&self, c: usize) -> Vec<C64> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    pub fn row(&self, r: usize) -> &[C64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn columns(&self) -> Vec<Vec<C64>> {
        (0..self.cols).map(|c| self.column(c)).collect()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)])
    }

    pub fn conj(&self) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn matmul(&self, other: &CMatrix) -> CMatrix {
        assert_eq!(
            self.cols, other.rows,
            "matmul shape mismatch: {}x{} * {}x{}",
            self.rows, self.cols, other.rows, other.cols
        );
        let mut out = CMatrix::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            let out_row = &mut out.data[r * other.cols..(r + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[r * self.cols + k];
                if a == ZERO {
                    continue;
                }
                let other_row = &other.data[k * other.cols..(k + 1) * other.cols];
                for (o, b) in out_row.iter_mut().zip(other_row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(self.cols, v.len(), "matvec shape mismatch");
        (0..self.rows).map(|r| dot_u(self.row(r), v)).collect()
    }

    /// `selfᴴ v`.
    pub fn adjoint_matvec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(self.rows, v.len(), "adjoint_matvec shape mismatch");
        let mut out = vec![ZERO; self.cols];
        for (r, &x) in v.iter().enumerate() {
            for (c, o) in out.iter_mut().enumerate() {
                *o += self[(r, c)].conj() * x;
            }
        }
        out
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn frobenius_norm_sqr(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        if !self.is_square() {
            return false;
        }
        let scale = self.max_abs();
        for r in 0..self.rows {
            for c in r..self.cols {
                if (self[(r, c)] - self[(c, r)].conj()).norm() > tol * scale {
                    return false;
                }
            }
        }
        true
    }

    /// `(A + Aᴴ)/2`, removing rounding asymmetry.
    pub fn hermitian_part(&self) -> CMatrix {
        assert!(self.is_square());
        CMatrix::from_fn(self.rows, self.cols, |r, c| {
            (self[(r, c)] + self[(c, r)].conj()) * 0.5
        })
    }

    /// Principal submatrix on `idx`.
    pub fn submatrix(&self, idx: &[usize]) -> CMatrix {
        CMatrix::from_fn(idx.len(), idx.len(), |r, c| self[(idx[r], idx[c])])
    }

    /// Rows `idx`, all columns.
    pub fn select_rows(&self, idx: &[usize]) -> CMatrix {
        CMatrix::from_fn(idx.len(), self.cols, |r, c| self[(idx[r], c)])
    }

    /// Quadratic form `vᴴ A v` (real part; exact for Hermitian A).
    pub fn quad_form(&self, v: &[C64]) -> f64 {
        dot(v, &self.matvec(v)).re
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = C64;
    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        debug_assert!(r < self.rows && c < self.cols);
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[r * self.cols + c]
    }
}

impl Add for &CMatrix {
    type Output = CMatrix;
    fn add(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(
            (self.rows, self.cols),
            (rhs.rows, rhs.cols),
            "add shape mismatch"
        );
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

impl Sub for &CMatrix {
    type Output = CMatrix;
    fn sub(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(
            (self.rows, self.cols),
            (rhs.rows, rhs.cols),
            "sub shape mismatch"
        );
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

impl Mul for &CMatrix {
    type Output = CMatrix;
    fn mul(self, rhs: &CMatrix) -> CMatrix {
        self.matmul(rhs)
    }
}

/// `aᴴ b`.
pub fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// `aᵀ b` (no conjugation).
pub fn dot_u(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(v: &[C64]) -> f64 {
    norm_sqr(v).sqrt()
}

pub fn norm_sqr(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

pub fn normalized(v: &[C64]) -> Option<Vec<C64>> {
    let n = norm(v);
    if n == 0.0 || !n.is_finite() {
        return None;
    }
    Some(v.iter().map(|z| z / n).collect())
}

/// Rotates `v` so its largest-magnitude entry is real positive.
pub fn fix_phase(v: &mut [C64]) {
    let mut best = 0;
    let mut best_mag = -1.0;
    for (i, z) in v.iter().enumerate() {
        // small slack so near-ties resolve to the lower index deterministically
        if z.norm() > best_mag * (1.0 + 1e-12) {
            best = i;
            best_mag = z.norm();
        }
    }
    if best_mag <= 0.0 {
        return;
    }
    let phase = v[best].conj() / best_mag;
    for z in v.iter_mut() {
        *z *= phase;
    }
    v[best] = C64::new(v[best].re, 0.0);
}

/// Eigen-decomposition of a Hermitian matrix, values descending.
#[derive(Debug, Clone)]
pub struct EigenResult {
    pub values: Vec<f64>,
    /// Unit-norm eigenvectors, one per value.
    pub vectors: Vec<Vec<C64>>,
}

impl EigenResult {
    pub fn vector_matrix(&self) -> CMatrix {
        let n = self.vectors.first().map_or(0, Vec::len);
        CMatrix::from_columns(n, &self.vectors)
    }

    pub fn reconstruct(&self) -> CMatrix {
        let v = self.vector_matrix();
        let lam = CMatrix::from_real_diag(&self.values);
        &(&v * &lam) * &v.adjoint()
    }
}

fn check_hermitian(h: &CMatrix, what: &str) -> Result<()> {
    if !h.is_square() {
        return Err(Error::Contract(format!(
            "{what}: matrix is {}x{}, expected square",
            h.rows, h.cols
        )));
    }
    if !h.is_finite() {
        return Err(Error::NonFinite(what.into()));
    }
    let scale = h.max_abs();
    for r in 0..h.rows {
        for c in r..h.cols {
            let gap = (h[(r, c)] - h[(c, r)].conj()).norm();
            if gap > HERMITIAN_TOL * scale {
                return Err(Error::Contract(format!(
                    "{what}: not Hermitian at ({r},{c}), |a_rc - conj(a_cr)| = {gap:.3e}"
                )));
            }
        }
    }
    Ok(())
}

/// Full spectrum of a Hermitian matrix by cyclic Jacobi rotations.
///
/// Sweeps run in fixed (p, q) order, so identical input gives identical
/// output. Vectors are phase-normalized with [`fix_phase`].
pub fn hermitian_eig(h: &CMatrix) -> Result<EigenResult> {
    check_hermitian(h, "hermitian_eig")?;
    let n = h.rows;
    let mut a = h.hermitian_part();
    let mut v = CMatrix::identity(n);
    let total = a.frobenius_norm();
    if n == 0 {
        return Ok(EigenResult {
            values: vec![],
            vectors: vec![],
        });
    }

    let off_norm = |a: &CMatrix| -> f64 {
        let mut s = 0.0;
        for r in 0..n {
            for c in 0..n {
                if r != c {
                    s += a[(r, c)].norm_sqr();
                }
            }
        }
        s.sqrt()
    };

    let threshold = JACOBI_TOL * total;
    for _sweep in 0..JACOBI_MAX_SWEEPS {
        if total == 0.0 || off_norm(&a) <= threshold {
            break;
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                let b = a[(p, q)];
                let mag = b.norm();
                if mag <= total * 1e-18 {
                    continue;
                }
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                let tau = (aqq - app) / (2.0 * mag);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                let e = b / mag; // e^{iφ}
                let se = e * s; // s e^{iφ}
                let sec = e.conj() * s; // s e^{-iφ}

                // A ← A U  (columns p, q)
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = akp * c - akq * sec;
                    a[(k, q)] = akp * se + akq * c;
                }
                // A ← Uᴴ A  (rows p, q)
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = apk * c - aqk * se;
                    a[(q, k)] = apk * sec + aqk * c;
                }
                a[(p, q)] = ZERO;
                a[(q, p)] = ZERO;
                a[(p, p)] = C64::new(a[(p, p)].re, 0.0);
                a[(q, q)] = C64::new(a[(q, q)].re, 0.0);
                // V ← V U
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp * c - vkq * sec;
                    v[(k, q)] = vkp * se + vkq * c;
                }
            }
        }
    }
    if off_norm(&a) > threshold.max(1e-9 * total) {
        return Err(Error::NoConvergence(format!(
            "Jacobi did not converge in {JACOBI_MAX_SWEEPS} sweeps (off-diagonal {:.3e})",
            off_norm(&a)
        )));
    }

    let mut pairs: Vec<(f64, Vec<C64>)> = (0..n)
        .map(|i| {
            let mut col = v.column(i);
            fix_phase(&mut col);
            (a[(i, i)].re, col)
        })
        .collect();
    pairs.sort_by(|x, y| {
        y.0.partial_cmp(&x.0)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| lexicographic(&x.1, &y.1))
    });
    let (values, vectors) = pairs.into_iter().unzip();
    Ok(EigenResult { values, vectors })
}

fn lexicographic(a: &[C64], b: &[C64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        let o = y.re.partial_cmp(&x.re).unwrap_or(std::cmp::Ordering::Equal);
        if o != std::cmp::Ordering::Equal {
            return o;
        }
        let o = y.im.partial_cmp(&x.im).unwrap_or(std::cmp::Ordering::Equal);
        if o != std::cmp::Ordering::Equal {
            return o;
        }
    }
    std::cmp::Ordering::Equal
}

/// Lower-triangular `L` with `D = L Lᴴ`.
pub fn cholesky(d: &CMatrix) -> Result<CMatrix> {
    check_hermitian(d, "cholesky")?;
    let n = d.rows;
    let mut l = CMatrix::zeros(n, n);
    let scale = (0..n).map(|i| d[(i, i)].re.abs()).fold(0.0, f64::max);
    for j in 0..n {
        let mut diag = d[(j, j)].re;
        for k in 0..j {
            diag -= l[(j, k)].norm_sqr();
        }
        if !(diag > PD_TOL * scale * 1e-3) {
            return Err(Error::NotPositiveDefinite {
                eigenvalue: smallest_eigenvalue(d),
            });
        }
        let ljj = diag.sqrt();
        l[(j, j)] = C64::new(ljj, 0.0);
        for i in j + 1..n {
            let mut s = d[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = s / ljj;
        }
    }
    Ok(l)
}

fn smallest_eigenvalue(d: &CMatrix) -> f64 {
    hermitian_eig(d)
        .ok()
        .and_then(|e| e.values.last().copied())
        .unwrap_or(f64::NAN)
}

/// Solves `L y = b` for lower-triangular `L`.
pub fn forward_substitute(l: &CMatrix, b: &[C64]) -> Vec<C64> {
    let n = l.rows;
    let mut y = vec![ZERO; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[(i, k)] * y[k];
        }
        y[i] = s / l[(i, i)];
    }
    y
}

/// Solves `Lᴴ x = y` for lower-triangular `L`.
pub fn backward_substitute_adjoint(l: &CMatrix, y: &[C64]) -> Vec<C64> {
    let n = l.rows;
    let mut x = vec![ZERO; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l[(k, i)].conj() * x[k];
        }
        x[i] = s / l[(i, i)].conj();
    }
    x
}

/// Solves `D x = b` for Hermitian positive-definite `D`.
pub fn solve_hpd(d: &CMatrix, b: &[C64]) -> Result<Vec<C64>> {
    let l = cholesky(d)?;
    Ok(backward_substitute_adjoint(&l, &forward_substitute(&l, b)))
}

/// Top generalized eigenpairs of the pencil `(C, D)`.
#[derive(Debug, Clone)]
pub struct GeneralizedEig {
    /// Quotients `xᴴCx / xᴴDx`, descending.
    pub quotients: Vec<f64>,
    /// Unit-norm maximizers.
    pub vectors: Vec<Vec<C64>>,
}

/// Greedy maximizers of `xᴴCx / xᴴDx`, computed by whitening with
/// `D = L Lᴴ` and diagonalizing `L⁻¹ C L⁻ᴴ`.
pub fn generalized_eig_topk(c: &CMatrix, d: &CMatrix, k: usize) -> Result<GeneralizedEig> {
    check_hermitian(c, "generalized_eig_topk: C")?;
    check_hermitian(d, "generalized_eig_topk: D")?;
    if c.rows != d.rows {
        return Err(Error::Dimension(format!(
            "C is {}x{}, D is {}x{}",
            c.rows, c.cols, d.rows, d.cols
        )));
    }
    let n = c.rows;
    if k > n {
        return Err(Error::Contract(format!(
            "requested {k} vectors from a {n}-dimensional pencil"
        )));
    }
    let d_eig = hermitian_eig(d)?;
    let top = d_eig.values.first().copied().unwrap_or(0.0);
    let bottom = d_eig.values.last().copied().unwrap_or(0.0);
    if !(bottom > PD_TOL * top.abs().max(f64::MIN_POSITIVE)) {
        return Err(Error::NotPositiveDefinite { eigenvalue: bottom });
    }
    // scale-free whitening keeps tiny physical magnitudes well conditioned
    let scale = 1.0 / top;
    let l = cholesky(&d.scale_real(scale))?;
    let cs = c.scale_real(scale);
    // M = L⁻¹ C L⁻ᴴ, built column by column
    let mut x = CMatrix::zeros(n, n); // L⁻¹ C
    for j in 0..n {
        let col = forward_substitute(&l, &cs.column(j));
        for i in 0..n {
            x[(i, j)] = col[i];
        }
    }
    let xa = x.adjoint(); // C L⁻ᴴ ... adjoint gives (L⁻¹C)ᴴ = C L⁻ᴴ
    let mut m = CMatrix::zeros(n, n);
    for j in 0..n {
        // column j of L⁻¹ (C L⁻ᴴ)
        let col = forward_substitute(&l, &xa.column(j));
        for i in 0..n {
            m[(i, j)] = col[i];
        }
    }
    let m = m.hermitian_part();
    let eig = hermitian_eig(&m)?;
    let mut quotients = Vec::with_capacity(k);
    let mut vectors = Vec::with_capacity(k);
    for y in eig.vectors.iter().take(k) {
        let raw = backward_substitute_adjoint(&l, y);
        let mut v = normalized(&raw)
            .ok_or_else(|| Error::NoConvergence("degenerate generalized eigenvector".into()))?;
        fix_phase(&mut v);
        quotients.push(rayleigh_quotient(c, d, &v));
        vectors.push(v);
    }
    Ok(GeneralizedEig { quotients, vectors })
}

/// `xᴴCx / xᴴDx`.
pub fn rayleigh_quotient(c: &CMatrix, d: &CMatrix, x: &[C64]) -> f64 {
    c.quad_form(x) / d.quad_form(x)
}

/// Orthogonal projector onto the complement of `range(H)`:
/// `I − H (HᴴH)⁻¹ Hᴴ`.
pub fn null_space_projector(h: &CMatrix) -> Result<CMatrix> {
    let n = h.rows;
    let k = h.cols;
    if k == 0 {
        return Ok(CMatrix::identity(n));
    }
    if k > n {
        return Err(Error::RankDeficient(format!(
            "{n}x{k} matrix cannot have full column rank"
        )));
    }
    let gram = (&h.adjoint() * h).hermitian_part();
    let eig = hermitian_eig(&gram)?;
    let top = eig.values[0];
    let bottom = *eig.values.last().unwrap();
    if !(top > 0.0) || bottom <= top / PROJECTOR_MAX_COND {
        return Err(Error::RankDeficient(format!(
            "HᴴH condition number {:.3e} exceeds {PROJECTOR_MAX_COND:.0e}",
            if bottom > 0.0 {
                top / bottom
            } else {
                f64::INFINITY
            }
        )));
    }
    // H (HᴴH)⁻¹ Hᴴ = Q Qᴴ with Q = H L⁻ᴴ, HᴴH = L Lᴴ
    let scale = 1.0 / top;
    let l = cholesky(&gram.scale_real(scale))?;
    let mut q = CMatrix::zeros(n, k);
    for r in 0..n {
        // row r of H L⁻ᴴ: solve L conj(row)ᵀ = conj(h_r)ᵀ
        let hr: Vec<C64> = h.row(r).iter().map(|z| z.conj() * scale.sqrt()).collect();
        let y = forward_substitute(&l, &hr);
        for c in 0..k {
            q[(r, c)] = y[c].conj();
        }
    }
    let proj = &q * &q.adjoint();
    Ok((&CMatrix::identity(n) - &proj).hermitian_part())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn random_hermitian(n: usize, rng: &mut impl Rng) -> CMatrix {
        let a = CMatrix::from_fn(n, n, |_, _| {
            C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        (&a + &a.adjoint()).scale_real(0.5)
    }

    fn random_hpd(n: usize, rng: &mut impl Rng) -> CMatrix {
        let a = CMatrix::from_fn(n, n, |_, _| {
            C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        &(&a * &a.adjoint()) + &CMatrix::identity(n).scale_real(0.1)
    }

    #[test]
    fn identity_spectrum() {
        let e = hermitian_eig(&CMatrix::identity(3)).unwrap();
        for v in &e.values {
            assert!((v - 1.0).abs() < 1e-14);
        }
        let vm = e.vector_matrix();
        let g = &vm.adjoint() * &vm;
        assert!((&g - &CMatrix::identity(3)).frobenius_norm() < 1e-12);
    }

    #[test]
    fn diagonal_spectrum_and_basis() {
        let e = hermitian_eig(&CMatrix::from_real_diag(&[2.0, 5.0, -1.0])).unwrap();
        assert_eq!(e.values, vec![5.0, 2.0, -1.0]);
        assert!((e.vectors[0][1] - ONE).norm() < 1e-14);
        assert!((e.vectors[1][0] - ONE).norm() < 1e-14);
        assert!((e.vectors[2][2] - ONE).norm() < 1e-14);
    }

    #[test]
    fn rejects_non_square_and_non_hermitian() {
        assert!(matches!(
            hermitian_eig(&CMatrix::zeros(2, 3)),
            Err(Error::Contract(_))
        ));
        let mut m = CMatrix::identity(2);
        m[(0, 1)] = C64::new(0.0, 1.0);
        assert!(matches!(hermitian_eig(&m), Err(Error::Contract(_))));
    }

    #[test]
    fn deterministic_output() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = random_hermitian(7, &mut rng);
        let a = hermitian_eig(&h).unwrap();
        let b = hermitian_eig(&h).unwrap();
        assert_eq!(a.values, b.values);
        assert_eq!(a.vectors, b.vectors);
    }

    #[test]
    fn reconstruction_and_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [2, 5, 16, 33] {
            let h = random_hermitian(n, &mut rng);
            let e = hermitian_eig(&h).unwrap();
            let err = (&e.reconstruct() - &h).frobenius_norm() / h.frobenius_norm();
            assert!(err < 1e-8, "n={n} err={err}");
            let tr: f64 = e.values.iter().sum();
            assert!((tr - h.trace().re).abs() <= 1e-8 * h.frobenius_norm());
            assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn tiny_scale_matrices_converge() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = random_hermitian(6, &mut rng).scale_real(1e-14);
        let e = hermitian_eig(&h).unwrap();
        let err = (&e.reconstruct() - &h).frobenius_norm() / h.frobenius_norm();
        assert!(err < 1e-8);
    }

    #[test]
    fn generalized_identity_denominator() {
        let c = CMatrix::from_real_diag(&[2.0, 1.0]);
        let g = generalized_eig_topk(&c, &CMatrix::identity(2), 1).unwrap();
        assert!((g.quotients[0] - 2.0).abs() < 1e-12);
        assert!((g.vectors[0][0] - ONE).norm() < 1e-12);
    }

    #[test]
    fn generalized_prefers_smallest_denominator() {
        let d = CMatrix::from_real_diag(&[1.0, 4.0]);
        let g = generalized_eig_topk(&CMatrix::identity(2), &d, 1).unwrap();
        assert!((g.quotients[0] - 1.0).abs() < 1e-12);
        assert!((g.vectors[0][0] - ONE).norm() < 1e-12);
    }

    #[test]
    fn generalized_rejects_indefinite() {
        let d = CMatrix::from_real_diag(&[1.0, -0.5]);
        match generalized_eig_topk(&CMatrix::identity(2), &d, 1) {
            Err(Error::NotPositiveDefinite { eigenvalue }) => {
                assert!((eigenvalue + 0.5).abs() < 1e-12)
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn generalized_scaling_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let c = random_hermitian(5, &mut rng);
        let d = random_hpd(5, &mut rng);
        let a = generalized_eig_topk(&c, &d, 2).unwrap();
        let b = generalized_eig_topk(&c.scale_real(3.5), &d, 2).unwrap();
        for i in 0..2 {
            assert!(
                (b.quotients[i] - 3.5 * a.quotients[i]).abs()
                    < 1e-9 * b.quotients[i].abs().max(1.0)
            );
            let overlap = dot(&a.vectors[i], &b.vectors[i]).norm();
            assert!((overlap - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn projector_axis_and_full_range() {
        let e1 = CMatrix::column_vector(&[ONE, ZERO, ZERO]);
        let p = null_space_projector(&e1).unwrap();
        assert!((&p - &CMatrix::from_real_diag(&[0.0, 1.0, 1.0])).frobenius_norm() < 1e-14);

        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let h = random_hpd(4, &mut rng);
        let p = null_space_projector(&h).unwrap();
        assert!(p.frobenius_norm() < 1e-9);
    }

    #[test]
    fn projector_rejects_rank_deficient() {
        let col = vec![ONE, C64::new(0.0, 2.0), ZERO];
        let h = CMatrix::from_columns(3, &[col.clone(), col.iter().map(|z| z * 2.0).collect()]);
        assert!(matches!(
            null_space_projector(&h),
            Err(Error::RankDeficient(_))
        ));
    }

    #[test]
    fn hpd_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let d = random_hpd(6, &mut rng);
        let b: Vec<C64> = (0..6).map(|i| C64::new(i as f64, 1.0 - i as f64)).collect();
        let x = solve_hpd(&d, &b).unwrap();
        let r = d.matvec(&x);
        for (ri, bi) in r.iter().zip(&b) {
            assert!((ri - bi).norm() < 1e-10);
        }
    }
}
