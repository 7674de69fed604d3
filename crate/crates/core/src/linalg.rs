//! Dense symmetric linear algebra.
//!
//! Everything in the solver lives in `S^n`, the space of real symmetric
//! matrices with the trace inner product `<A, B> = tr(AB)`. [`SymMat`] is the
//! carrier type; [`SpectralDecomp`] is a sorted eigendecomposition from which
//! both PSD projections of a matrix are read off.

use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SdpError};

/// Dense real symmetric matrix.
///
/// Construction symmetrizes by averaging `(A + Aᵀ)/2`, so every value of this
/// type is exactly symmetric.
#[derive(Clone, Debug, PartialEq)]
pub struct SymMat(DMatrix<f64>);

impl SymMat {
    /// Builds a symmetric matrix from a square, finite input.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(SdpError::dim(format!(
                "expected a square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(SdpError::domain("matrix has non-finite entries"));
        }
        Ok(Self::symmetrize(m))
    }

    /// Symmetrizes without validation. Callers guarantee a square input.
    pub(crate) fn symmetrize(mut m: DMatrix<f64>) -> Self {
        let n = m.nrows();
        for j in 0..n {
            for i in (j + 1)..n {
                let v = 0.5 * (m[(i, j)] + m[(j, i)]);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        SymMat(m)
    }

    pub fn zeros(n: usize) -> Self {
        SymMat(DMatrix::zeros(n, n))
    }

    pub fn identity(n: usize) -> Self {
        SymMat(DMatrix::identity(n, n))
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        SymMat(DMatrix::from_diagonal(&DVector::from_column_slice(d)))
    }

    /// Builds from a closure evaluated on the lower triangle and mirrored.
    pub fn from_lower_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = DMatrix::zeros(n, n);
        for j in 0..n {
            for i in j..n {
                let v = f(i, j);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        SymMat(m)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    /// Trace inner product `<self, other>`.
    pub fn inner(&self, other: &SymMat) -> f64 {
        self.0.dot(&other.0)
    }

    pub fn norm_fro(&self) -> f64 {
        self.0.norm()
    }

    /// Spectral norm, the largest eigenvalue magnitude.
    pub fn norm2(&self) -> f64 {
        spectral_norm(&self.0)
    }

    pub fn scale(&self, t: f64) -> SymMat {
        SymMat(&self.0 * t)
    }

    /// Entrywise product with a symmetric weight matrix.
    pub fn hadamard(&self, weights: &DMatrix<f64>) -> SymMat {
        debug_assert_eq!(weights.shape(), self.0.shape());
        SymMat::symmetrize(self.0.component_mul(weights))
    }

    /// `Qᵀ A Q`.
    pub fn congruence_t(&self, q: &DMatrix<f64>) -> SymMat {
        SymMat::symmetrize(q.transpose() * &self.0 * q)
    }

    /// `Q A Qᵀ`.
    pub fn congruence(&self, q: &DMatrix<f64>) -> SymMat {
        SymMat::symmetrize(q * &self.0 * q.transpose())
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// Sub-block `[r0..r0+nr, c0..c0+nc]` as an owned dense matrix.
    pub fn block(&self, r0: usize, c0: usize, nr: usize, nc: usize) -> DMatrix<f64> {
        self.0.view((r0, c0), (nr, nc)).into_owned()
    }
}

impl Add for &SymMat {
    type Output = SymMat;
    fn add(self, rhs: &SymMat) -> SymMat {
        SymMat(&self.0 + &rhs.0)
    }
}

impl Sub for &SymMat {
    type Output = SymMat;
    fn sub(self, rhs: &SymMat) -> SymMat {
        SymMat(&self.0 - &rhs.0)
    }
}

impl Add for SymMat {
    type Output = SymMat;
    fn add(self, rhs: SymMat) -> SymMat {
        SymMat(self.0 + rhs.0)
    }
}

impl Sub for SymMat {
    type Output = SymMat;
    fn sub(self, rhs: SymMat) -> SymMat {
        SymMat(self.0 - rhs.0)
    }
}

impl AddAssign<&SymMat> for SymMat {
    fn add_assign(&mut self, rhs: &SymMat) {
        self.0 += &rhs.0;
    }
}

impl SubAssign<&SymMat> for SymMat {
    fn sub_assign(&mut self, rhs: &SymMat) {
        self.0 -= &rhs.0;
    }
}

impl Mul<f64> for &SymMat {
    type Output = SymMat;
    fn mul(self, rhs: f64) -> SymMat {
        SymMat(&self.0 * rhs)
    }
}

impl Neg for &SymMat {
    type Output = SymMat;
    fn neg(self) -> SymMat {
        SymMat(-&self.0)
    }
}

impl Serialize for SymMat {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = (0..self.dim())
            .map(|i| self.0.row(i).iter().copied().collect())
            .collect();
        rows.serialize(s)
    }
}

impl<'de> Deserialize<'de> for SymMat {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows: Vec<Vec<f64>> = Vec::deserialize(d)?;
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(serde::de::Error::custom("matrix rows must all have length n"));
        }
        let m = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
        SymMat::new(m).map_err(serde::de::Error::custom)
    }
}

/// Length of `svec` for an `n x n` symmetric matrix.
pub fn svec_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Symmetric vectorization: lower triangle in column-major order, off-diagonal
/// entries scaled by √2 so that `svec(A)·svec(B) = <A, B>`.
pub fn svec(a: &SymMat) -> DVector<f64> {
    let n = a.dim();
    let mut v = DVector::zeros(svec_len(n));
    let mut k = 0;
    for j in 0..n {
        v[k] = a.0[(j, j)];
        k += 1;
        for i in (j + 1)..n {
            v[k] = a.0[(i, j)] * std::f64::consts::SQRT_2;
            k += 1;
        }
    }
    v
}

/// Inverse of [`svec`].
pub fn smat(v: &DVector<f64>, n: usize) -> Result<SymMat> {
    if v.len() != svec_len(n) {
        return Err(SdpError::dim(format!(
            "svec of length {} does not match n = {n}",
            v.len()
        )));
    }
    let mut m = DMatrix::zeros(n, n);
    let mut k = 0;
    for j in 0..n {
        m[(j, j)] = v[k];
        k += 1;
        for i in (j + 1)..n {
            let x = v[k] * std::f64::consts::FRAC_1_SQRT_2;
            m[(i, j)] = x;
            m[(j, i)] = x;
            k += 1;
        }
    }
    Ok(SymMat(m))
}

/// Symmetric matrix whose `svec` is the `k`-th standard basis vector.
pub fn svec_basis(n: usize, k: usize) -> SymMat {
    let mut e = DVector::zeros(svec_len(n));
    e[k] = 1.0;
    smat(&e, n).expect("length matches by construction")
}

/// Sorted eigendecomposition `A = Q diag(λ) Qᵀ`, eigenvalues descending.
#[derive(Clone, Debug)]
pub struct SpectralDecomp {
    pub q: DMatrix<f64>,
    pub lambda: DVector<f64>,
}

impl SpectralDecomp {
    pub fn dim(&self) -> usize {
        self.lambda.len()
    }

    /// `Q diag(f(λ)) Qᵀ`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> SymMat {
        let n = self.dim();
        let mut scaled = self.q.clone();
        for j in 0..n {
            let w = f(self.lambda[j]);
            scaled.column_mut(j).scale_mut(w);
        }
        SymMat::symmetrize(scaled * self.q.transpose())
    }

    pub fn reconstruct(&self) -> SymMat {
        self.reconstruct_with(|l| l)
    }

    /// Projection onto the PSD cone, `Q diag(max(λ, 0)) Qᵀ`.
    pub fn psd_part(&self) -> SymMat {
        self.partial_outer(|l| l > 0.0, |l| l)
    }

    /// `Π(−A) = Q diag(max(−λ, 0)) Qᵀ`.
    pub fn nsd_part(&self) -> SymMat {
        self.partial_outer(|l| l < 0.0, |l| -l)
    }

    fn partial_outer(&self, keep: impl Fn(f64) -> bool, w: impl Fn(f64) -> f64) -> SymMat {
        let n = self.dim();
        let cols: Vec<usize> = (0..n).filter(|&j| keep(self.lambda[j])).collect();
        if cols.is_empty() {
            return SymMat::zeros(n);
        }
        let mut v = DMatrix::zeros(n, cols.len());
        let mut vw = DMatrix::zeros(n, cols.len());
        for (c, &j) in cols.iter().enumerate() {
            v.set_column(c, &self.q.column(j));
            vw.set_column(c, &(self.q.column(j) * w(self.lambda[j])));
        }
        SymMat::symmetrize(vw * v.transpose())
    }

    pub fn max_abs_eigenvalue(&self) -> f64 {
        self.lambda.iter().fold(0.0_f64, |a, l| a.max(l.abs()))
    }

    pub fn min_abs_eigenvalue(&self) -> f64 {
        self.lambda.iter().fold(f64::INFINITY, |a, l| a.min(l.abs()))
    }

    /// Counts of eigenvalues above `tau·max(1, |λ|max)` and below its negative.
    pub fn inertia(&self, tau: f64) -> (usize, usize) {
        let thr = tau * self.max_abs_eigenvalue().max(1.0);
        let pos = self.lambda.iter().filter(|&&l| l > thr).count();
        let neg = self.lambda.iter().filter(|&&l| l < -thr).count();
        (pos, neg)
    }
}

const EIG_EPS: f64 = f64::EPSILON;
const EIG_MAX_SWEEPS: usize = 10_000;

/// Symmetric eigendecomposition with eigenvalues sorted descending.
///
/// Eigenvector signs are normalized so the largest-magnitude component of each
/// column is positive. Diagonal inputs are decomposed exactly (permutation `Q`).
pub fn eig_sym(a: &SymMat) -> Result<SpectralDecomp> {
    let n = a.dim();
    if !a.is_finite() {
        return Err(SdpError::domain("eig_sym: input has non-finite entries"));
    }
    if n == 0 {
        return Ok(SpectralDecomp {
            q: DMatrix::zeros(0, 0),
            lambda: DVector::zeros(0),
        });
    }

    let (q, lambda) = if is_diagonal(&a.0) {
        (DMatrix::identity(n, n), a.0.diagonal())
    } else {
        let eig = SymmetricEigen::try_new(a.0.clone(), EIG_EPS, EIG_MAX_SWEEPS).ok_or_else(|| {
            SdpError::numerical(format!(
                "eigen-iteration did not converge (n = {n}, ‖A‖_F = {:.3e}, max|a_ij| = {:.3e})",
                a.norm_fro(),
                a.0.amax()
            ))
        })?;
        (eig.eigenvectors, eig.eigenvalues)
    };

    // Stable sort keeps the reduction's order among ties.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| lambda[j].total_cmp(&lambda[i]));

    let mut qs = DMatrix::zeros(n, n);
    let mut ls = DVector::zeros(n);
    for (c, &j) in order.iter().enumerate() {
        ls[c] = lambda[j];
        let col = q.column(j);
        let pivot = col.iamax();
        let sign = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
        qs.set_column(c, &(col * sign));
    }
    Ok(SpectralDecomp { q: qs, lambda: ls })
}

fn is_diagonal(m: &DMatrix<f64>) -> bool {
    let n = m.nrows();
    (0..n).all(|j| (0..n).all(|i| i == j || m[(i, j)] == 0.0))
}

/// Orthogonal projection onto the PSD cone.
pub fn psd_project(a: &SymMat) -> Result<SymMat> {
    Ok(eig_sym(a)?.psd_part())
}

/// Spectral norm (largest singular value) of a general dense matrix.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().singular_values().max()
}

/// Numerical rank at threshold `tau·σ_max`.
pub fn numerical_rank(m: &DMatrix<f64>, tau: f64) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.clone().singular_values();
    let smax = sv.max();
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > tau * smax).count()
}

/// Orthonormal basis of the null space of `m` (columns), threshold `tau·σ_max`.
pub fn null_space(m: &DMatrix<f64>, tau: f64) -> DMatrix<f64> {
    let ncols = m.ncols();
    if ncols == 0 {
        return DMatrix::zeros(0, 0);
    }
    if m.nrows() == 0 {
        return DMatrix::identity(ncols, ncols);
    }
    // Work on the Gram-free square form so V is always ncols x ncols.
    let square = if m.nrows() < ncols {
        let mut padded = DMatrix::zeros(ncols, ncols);
        padded.view_mut((0, 0), m.shape()).copy_from(m);
        padded
    } else {
        m.clone()
    };
    let svd = square.svd(false, true);
    let v_t = svd.v_t.expect("requested V");
    let smax = svd.singular_values.max();
    let thr = tau * smax;
    let null_rows: Vec<usize> = (0..ncols)
        .filter(|&k| smax == 0.0 || svd.singular_values[k] <= thr)
        .collect();
    let mut basis = DMatrix::zeros(ncols, null_rows.len());
    for (c, &k) in null_rows.iter().enumerate() {
        basis.set_column(c, &v_t.row(k).transpose());
    }
    basis
}

/// Strategy for [`sylvester_solve_with`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SylvesterMethod {
    /// Kronecker-sum system for small blocks, spectral route above.
    Auto,
    /// Dense Cholesky solve of `((−Zs) ⊕ Zx) vec(W) = vec(Zo)`.
    Kronecker,
    /// Diagonalize both blocks and divide by eigenvalue gaps.
    Spectral,
}

/// Unknown count up to which [`SylvesterMethod::Auto`] uses the Kronecker route.
pub const KRONECKER_MAX_UNKNOWNS: usize = 256;
const SYLVESTER_MAX_COND: f64 = 1e14;

/// Solves `W·Zx − Zs·W = Zo` for `W ∈ R^{(n−r)×r}` with `Zx ≻ 0`, `Zs ≺ 0`.
pub fn sylvester_solve(zx: &SymMat, zs: &SymMat, zo: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    sylvester_solve_with(zx, zs, zo, SylvesterMethod::Auto)
}

pub fn sylvester_solve_with(
    zx: &SymMat,
    zs: &SymMat,
    zo: &DMatrix<f64>,
    method: SylvesterMethod,
) -> Result<DMatrix<f64>> {
    let r = zx.dim();
    let s = zs.dim();
    if zo.shape() != (s, r) {
        return Err(SdpError::dim(format!(
            "Sylvester right-hand side is {:?}, expected ({s}, {r})",
            zo.shape()
        )));
    }
    if r == 0 || s == 0 {
        return Ok(DMatrix::zeros(s, r));
    }
    let ex = eig_sym(zx)?;
    let es = eig_sym(zs)?;
    let x_min = ex.lambda[r - 1];
    let x_max = ex.lambda[0];
    let s_max = es.lambda[0];
    let s_min = es.lambda[s - 1];
    if x_min <= 0.0 {
        return Err(SdpError::domain(format!(
            "Sylvester: Zx must be positive definite (λ_min = {x_min:.3e})"
        )));
    }
    if s_max >= 0.0 {
        return Err(SdpError::domain(format!(
            "Sylvester: Zs must be negative definite (λ_max = {s_max:.3e})"
        )));
    }
    // The Kronecker sum is symmetric, so its condition number is exact here.
    let cond = (x_max - s_min) / (x_min - s_max);
    if cond > SYLVESTER_MAX_COND {
        return Err(SdpError::numerical(format!(
            "Sylvester: Kronecker-sum condition {cond:.3e} exceeds {SYLVESTER_MAX_COND:.0e}"
        )));
    }

    let use_kron = match method {
        SylvesterMethod::Kronecker => true,
        SylvesterMethod::Spectral => false,
        SylvesterMethod::Auto => r * s <= KRONECKER_MAX_UNKNOWNS,
    };
    if use_kron {
        sylvester_kronecker(zx, zs, zo)
    } else {
        Ok(sylvester_spectral(&ex, &es, zo))
    }
}

fn sylvester_kronecker(zx: &SymMat, zs: &SymMat, zo: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let r = zx.dim();
    let s = zs.dim();
    let dim = r * s;
    // vec(W Zx) = (Zx ⊗ I_s) vec(W), vec(−Zs W) = (I_r ⊗ −Zs) vec(W); column-major.
    let mut k = DMatrix::zeros(dim, dim);
    for a in 0..r {
        for b in 0..r {
            let x = zx.get(b, a);
            if x != 0.0 {
                for i in 0..s {
                    k[(a * s + i, b * s + i)] += x;
                }
            }
        }
        for i in 0..s {
            for j in 0..s {
                k[(a * s + i, a * s + j)] -= zs.get(i, j);
            }
        }
    }
    let rhs = DVector::from_column_slice(zo.as_slice());
    let chol = k
        .cholesky()
        .ok_or_else(|| SdpError::numerical("Sylvester: Kronecker-sum matrix not positive definite"))?;
    let w = chol.solve(&rhs);
    Ok(DMatrix::from_column_slice(s, r, w.as_slice()))
}

fn sylvester_spectral(ex: &SpectralDecomp, es: &SpectralDecomp, zo: &DMatrix<f64>) -> DMatrix<f64> {
    let rotated = es.q.transpose() * zo * &ex.q;
    let gaps = DMatrix::from_fn(rotated.nrows(), rotated.ncols(), |i, j| {
        ex.lambda[j] - es.lambda[i]
    });
    let w_rot = rotated.component_div(&gaps);
    &es.q * w_rot * ex.q.transpose()
}

const PADE_ORDER: usize = 8;

/// Matrix exponential of a skew-symmetric matrix.
///
/// Scaling and squaring around a diagonal Padé approximant of order 8; the
/// scaled argument has 1-norm at most 1/2.
pub fn skew_exp(w: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = w.nrows();
    if w.ncols() != n {
        return Err(SdpError::dim("skew_exp: matrix must be square"));
    }
    let asym = (w + w.transpose()).norm();
    if asym > 1e-12 * w.norm().max(1.0) {
        return Err(SdpError::domain(format!(
            "skew_exp: input is not skew-symmetric (‖W + Wᵀ‖_F = {asym:.3e})"
        )));
    }
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let norm1 = (0..n)
        .map(|j| w.column(j).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let mut squarings = 0u32;
    if norm1 > 0.5 {
        squarings = (norm1 / 0.5).log2().ceil() as u32;
    }
    let a = w / 2f64.powi(squarings as i32);

    // c_k = (2m − k)! m! / ((2m)! k! (m − k)!), computed recursively.
    let m = PADE_ORDER;
    let mut coeffs = vec![1.0_f64; m + 1];
    for k in 1..=m {
        coeffs[k] = coeffs[k - 1] * ((m - k + 1) as f64) / (((2 * m - k + 1) * k) as f64);
    }
    let id = DMatrix::<f64>::identity(n, n);
    let mut num = &id * coeffs[0];
    let mut den = &id * coeffs[0];
    let mut power = id.clone();
    for (k, &c) in coeffs.iter().enumerate().skip(1) {
        power = &power * &a;
        num += &power * c;
        if k % 2 == 0 {
            den += &power * c;
        } else {
            den -= &power * c;
        }
    }
    let mut r = den
        .lu()
        .solve(&num)
        .ok_or_else(|| SdpError::numerical("skew_exp: singular Padé denominator"))?;
    for _ in 0..squarings {
        r = &r * &r;
    }
    Ok(r)
}
