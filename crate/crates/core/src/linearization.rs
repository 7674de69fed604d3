//! Local linearization of the fixed-point map around a limit point `Z⋆`.
//!
//! With `Z⋆ = Q diag(λ) Qᵀ`, `λ` sorted descending and `λ_r > 0 > λ_{r+1}`,
//! the Fréchet derivative of `Π` at `Z⋆` is `H ↦ Q(Ω∘(QᵀHQ))Qᵀ` where
//!
//! ```text
//!   Ω = [ E_r  Θᵀ ]      Θ_ij = λ_j / (λ_j − λ_{r+i})
//!       [ Θ    0  ]
//! ```
//!
//! and the map linearizes to `M(H) = P(Ω⊥∘H) + P⊥(Ω∘H)`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Result, SdpError};
use crate::linalg::{eig_sym, null_space, smat, svec, svec_len, SpectralDecomp, SymMat};
use crate::problem::ConstraintKernel;

/// `build_omega` refuses eigenvalues with `|λ| ≤ NONSINGULAR_TOL·max|λ|`.
pub const NONSINGULAR_TOL: f64 = 1e-12;
/// Eigenvalues with `|λ| < SINGULAR_GATE·max|λ|` form the β block.
pub const SINGULAR_GATE: f64 = 1e-8;
const FIX_NULL_TOL: f64 = 1e-9;
const POWER_TOL: f64 = 1e-13;
const POWER_MAX_ITER: usize = 100_000;
const POWER_SEED: u64 = 0x5eed;

#[derive(Clone, Debug)]
pub struct OmegaStructure {
    pub r: usize,
    pub q: DMatrix<f64>,
    pub lambda: DVector<f64>,
    pub omega: DMatrix<f64>,
    /// `(n−r) × r`.
    pub theta: DMatrix<f64>,
}

impl OmegaStructure {
    pub fn n(&self) -> usize {
        self.lambda.len()
    }

    pub fn omega_perp(&self) -> DMatrix<f64> {
        self.omega.map(|w| 1.0 - w)
    }

    pub fn theta_perp(&self) -> DMatrix<f64> {
        self.theta.map(|t| 1.0 - t)
    }

    /// `Π(Z⋆)`.
    pub fn psd_star(&self) -> SymMat {
        self.decomp().psd_part()
    }

    pub fn decomp(&self) -> SpectralDecomp {
        SpectralDecomp {
            q: self.q.clone(),
            lambda: self.lambda.clone(),
        }
    }

    /// `QᵀHQ`.
    pub fn rotate_in(&self, h: &SymMat) -> SymMat {
        h.congruence_t(&self.q)
    }

    /// `Q H̃ Qᵀ`.
    pub fn rotate_out(&self, h: &SymMat) -> SymMat {
        h.congruence(&self.q)
    }

    /// `Q(Ω∘(QᵀHQ))Qᵀ`, the Fréchet derivative of `Π` at `Z⋆` along `H`.
    pub fn omega_apply(&self, h: &SymMat) -> SymMat {
        self.rotate_out(&self.rotate_in(h).hadamard(&self.omega))
    }

    /// `Q(Ω⊥∘(QᵀHQ))Qᵀ`.
    pub fn omega_perp_apply(&self, h: &SymMat) -> SymMat {
        self.rotate_out(&self.rotate_in(h).hadamard(&self.omega_perp()))
    }

    /// The off-diagonal block `(QᵀHQ)_O`, of size `(n−r) × r`.
    pub fn off_block(&self, h: &SymMat) -> DMatrix<f64> {
        let n = self.n();
        self.rotate_in(h).block(self.r, 0, n - self.r, self.r)
    }
}

/// Number of positive eigenvalues, refusing anything within `tol·max|λ|` of 0.
pub fn nonsingular_split(decomp: &SpectralDecomp, tol: f64) -> Result<usize> {
    let scale = decomp.max_abs_eigenvalue();
    let thr = tol * scale;
    if let Some(i) = decomp.lambda.iter().position(|l| l.abs() <= thr) {
        return Err(SdpError::domain(format!(
            "Z is numerically singular: |λ_{}| = {:.3e} <= {tol:.0e}·max|λ| = {thr:.3e}; \
             use the directional-derivative path",
            i + 1,
            decomp.lambda[i].abs()
        )));
    }
    Ok(decomp.lambda.iter().filter(|&&l| l > 0.0).count())
}

pub fn build_omega(decomp: &SpectralDecomp) -> Result<OmegaStructure> {
    let n = decomp.dim();
    if n == 0 {
        return Err(SdpError::dim("empty decomposition"));
    }
    let r = nonsingular_split(decomp, NONSINGULAR_TOL)?;
    let lam = &decomp.lambda;
    let theta = DMatrix::from_fn(n - r, r, |i, j| lam[j] / (lam[j] - lam[r + i]));
    let mut omega = DMatrix::zeros(n, n);
    for j in 0..n {
        for i in 0..n {
            omega[(i, j)] = match (i < r, j < r) {
                (true, true) => 1.0,
                (false, false) => 0.0,
                (false, true) => theta[(i - r, j)],
                (true, false) => theta[(j - r, i)],
            };
        }
    }
    Ok(OmegaStructure {
        r,
        q: decomp.q.clone(),
        lambda: lam.clone(),
        omega,
        theta,
    })
}

/// `M(H) = P(Ω⊥∘H) + P⊥(Ω∘H)`.
pub fn apply_m(os: &OmegaStructure, kernel: &ConstraintKernel, h: &SymMat) -> SymMat {
    let ht = os.rotate_in(h);
    let a = os.rotate_out(&ht.hadamard(&os.omega));
    let b = os.rotate_out(&ht.hadamard(&os.omega_perp()));
    // P(b) + P⊥(a) = a + P(b − a)
    &a + &kernel.project_range(&(&b - &a))
}

/// `M*(G) = Ω⊥∘(PG) + Ω∘(P⊥G)`.
pub fn apply_m_adjoint(os: &OmegaStructure, kernel: &ConstraintKernel, g: &SymMat) -> SymMat {
    let pg = kernel.project_range(g);
    let ng = g - &pg;
    &os.omega_perp_apply(&pg) + &os.omega_apply(&ng)
}

/// Both sides of
/// `‖H‖² − ‖M(H)‖² = ‖P(Ω∘H)‖² + ‖P⊥(Ω⊥∘H)‖² + 4<Θ∘H_O, Θ⊥∘H_O>`.
pub fn energy_m(os: &OmegaStructure, kernel: &ConstraintKernel, h: &SymMat) -> (f64, f64) {
    let lhs = h.norm_fro().powi(2) - apply_m(os, kernel, h).norm_fro().powi(2);
    let a = kernel.project_range(&os.omega_apply(h));
    let b = kernel.project_null(&os.omega_perp_apply(h));
    let ho = os.off_block(h);
    let cross = ho.component_mul(&os.theta).dot(&ho.component_mul(&os.theta_perp()));
    (lhs, a.norm_fro().powi(2) + b.norm_fro().powi(2) + 4.0 * cross)
}

/// `Ψ = (Id − 2P)(Π(Z) − Π(Z⋆) − Q(Ω∘Qᵀ(Z − Z⋆)Q)Qᵀ)`.
pub fn psi_residual(
    os: &OmegaStructure,
    kernel: &ConstraintKernel,
    z: &SymMat,
    zstar: &SymMat,
) -> Result<SymMat> {
    if z.dim() != os.n() || zstar.dim() != os.n() {
        return Err(SdpError::dim("psi_residual: dimension mismatch"));
    }
    let h = z - zstar;
    let remainder = &(&eig_sym(z)?.psd_part() - &os.psd_star()) - &os.omega_apply(&h);
    let p = kernel.project_range(&remainder);
    Ok(&remainder - &p.scale(2.0))
}

fn random_unit(n: usize, seed: u64) -> SymMat {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = DVector::from_iterator(
        svec_len(n),
        (0..svec_len(n)).map(|_| rng.sample::<f64, _>(StandardNormal)),
    );
    let v = &v / v.norm();
    smat(&v, n).expect("length matches")
}

/// Largest singular value of a linear operator on `S^n` by power iteration
/// on `T*T`.
pub fn power_norm(
    n: usize,
    apply: impl Fn(&SymMat) -> SymMat,
    adjoint: impl Fn(&SymMat) -> SymMat,
) -> Result<f64> {
    let mut v = random_unit(n, POWER_SEED);
    let mut prev = f64::NAN;
    for _ in 0..POWER_MAX_ITER {
        let w = adjoint(&apply(&v));
        let rq = v.inner(&w);
        if (rq - prev).abs() < POWER_TOL * rq.abs().max(1e-300) || rq == 0.0 {
            return Ok(rq.max(0.0).sqrt());
        }
        let nw = w.norm_fro();
        if nw == 0.0 {
            return Ok(0.0);
        }
        prev = rq;
        v = w.scale(1.0 / nw);
    }
    let last = v.inner(&adjoint(&apply(&v)));
    Err(SdpError::numerical(format!(
        "power iteration did not settle in {POWER_MAX_ITER} steps (last estimates {:.15e}, {:.15e})",
        prev.max(0.0).sqrt(),
        last.max(0.0).sqrt()
    )))
}

/// `‖M‖_op`.
pub fn op_norm_m(os: &OmegaStructure, kernel: &ConstraintKernel) -> Result<f64> {
    power_norm(
        os.n(),
        |h| apply_m(os, kernel, h),
        |g| apply_m_adjoint(os, kernel, g),
    )
}

/// Orthonormal basis of `Fix(M)`.
#[derive(Clone, Debug)]
pub struct FixSubspace {
    pub basis: Vec<SymMat>,
}

impl FixSubspace {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// `Π_Fix(H)`.
    pub fn project(&self, h: &SymMat) -> SymMat {
        let mut out = SymMat::zeros(h.dim());
        for b in &self.basis {
            out += &b.scale(b.inner(h));
        }
        out
    }
}

/// `Fix(M)` from its block characterization in `Q⋆` coordinates: `H_O = 0`,
/// `Q[H_X 0; 0 0]Qᵀ ∈ N(A)` and `Q[0 0; 0 H_S]Qᵀ ∈ R(A*)`.
pub fn fix_basis(os: &OmegaStructure, kernel: &ConstraintKernel) -> Result<FixSubspace> {
    let n = os.n();
    let r = os.r;
    let s = n - r;
    let rb = kernel.basis();
    let m = rb.ncols();
    if kernel.n() != n {
        return Err(SdpError::dim("fix_basis: kernel and structure sizes differ"));
    }
    let qx = os.q.columns(0, r).into_owned();
    let qs = os.q.columns(r, s).into_owned();
    let range_elems: Vec<SymMat> = (0..m)
        .map(|j| smat(&rb.column(j).into_owned(), n).expect("basis column length"))
        .collect();
    let mut basis = Vec::new();

    // X family: blocks orthogonal to every Q_Xᵀ G_j Q_X.
    if r > 0 {
        let tr = svec_len(r);
        let mut rows = DMatrix::zeros(m, tr);
        for (j, g) in range_elems.iter().enumerate() {
            rows.set_row(j, &svec(&g.congruence_t(&qx)).transpose());
        }
        let ns = null_space(&rows, FIX_NULL_TOL);
        for c in 0..ns.ncols() {
            let bx = smat(&ns.column(c).into_owned(), r)?;
            let mut full = DMatrix::zeros(n, n);
            full.view_mut((0, 0), (r, r)).copy_from(bx.as_matrix());
            basis.push(SymMat::symmetrize(full).congruence(&os.q));
        }
    }

    // S family: range elements whose X and O blocks vanish.
    if s > 0 && m > 0 {
        let tr = svec_len(r);
        let mut cols = DMatrix::zeros(tr + r * s, m);
        for (j, g) in range_elems.iter().enumerate() {
            let gx = svec(&g.congruence_t(&qx));
            let go = qs.transpose() * g.as_matrix() * &qx;
            for k in 0..tr {
                cols[(k, j)] = gx[k];
            }
            for (k, v) in go.iter().enumerate() {
                cols[(tr + k, j)] = v * std::f64::consts::SQRT_2;
            }
        }
        let ns = null_space(&cols, FIX_NULL_TOL);
        let mut blocks = Vec::new();
        for c in 0..ns.ncols() {
            let v = rb * ns.column(c);
            let h = smat(&v, n)?;
            blocks.push(svec(&h.congruence_t(&qs)));
        }
        if !blocks.is_empty() {
            // Re-orthonormalize the cleaned S blocks.
            let stack = DMatrix::from_columns(&blocks);
            let svd = stack.svd(true, false);
            let u = svd.u.expect("requested U");
            let smax = svd.singular_values.max();
            for c in 0..svd.singular_values.len() {
                if svd.singular_values[c] > FIX_NULL_TOL * smax {
                    let bs = smat(&u.column(c).into_owned(), s)?;
                    let mut full = DMatrix::zeros(n, n);
                    full.view_mut((r, r), (s, s)).copy_from(bs.as_matrix());
                    basis.push(SymMat::symmetrize(full).congruence(&os.q));
                }
            }
        }
    }
    Ok(FixSubspace { basis })
}

/// `‖M − Π_Fix‖_op`, required to be below 1.
pub fn op_norm_m_minus_fix(
    os: &OmegaStructure,
    kernel: &ConstraintKernel,
    fix: &FixSubspace,
) -> Result<f64> {
    let v = power_norm(
        os.n(),
        |h| &apply_m(os, kernel, h) - &fix.project(h),
        |g| &apply_m_adjoint(os, kernel, g) - &fix.project(g),
    )?;
    if v >= 1.0 - 1e-8 {
        return Err(SdpError::numerical(format!(
            "‖M − Π_Fix‖ = {v:.12} is not below 1 − 1e-8"
        )));
    }
    Ok(v)
}

/// Directional derivative data of `Π` at a possibly singular `Z⋆`, with index
/// blocks α (positive), β (numerically zero) and γ (negative).
#[derive(Clone, Debug)]
pub struct DirectionalStructure {
    pub q: DMatrix<f64>,
    pub lambda: DVector<f64>,
    /// |α|
    pub r: usize,
    /// |γ|
    pub s: usize,
    /// `s × r`, `Θ̃_ij = λ_j / (λ_j − λ_{n−s+i})`.
    pub theta: DMatrix<f64>,
}

impl DirectionalStructure {
    pub fn n(&self) -> usize {
        self.lambda.len()
    }

    pub fn beta(&self) -> usize {
        self.n() - self.r - self.s
    }
}

pub fn build_directional(decomp: &SpectralDecomp) -> Result<DirectionalStructure> {
    build_directional_with_gate(decomp, SINGULAR_GATE)
}

pub fn build_directional_with_gate(decomp: &SpectralDecomp, gate: f64) -> Result<DirectionalStructure> {
    let n = decomp.dim();
    if n == 0 {
        return Err(SdpError::dim("empty decomposition"));
    }
    let thr = gate * decomp.max_abs_eigenvalue();
    let lam = &decomp.lambda;
    let r = lam.iter().filter(|&&l| l > thr).count();
    let s = lam.iter().filter(|&&l| l < -thr).count();
    let theta = DMatrix::from_fn(s, r, |i, j| lam[j] / (lam[j] - lam[n - s + i]));
    Ok(DirectionalStructure {
        q: decomp.q.clone(),
        lambda: lam.clone(),
        r,
        s,
        theta,
    })
}

/// `Π'(Z⋆; H)`: α rows and columns copied, γα weighted by `Θ̃`, `Π` on the ββ
/// block, and γβ, γγ zeroed.
pub fn directional_derivative(ds: &DirectionalStructure, h: &SymMat) -> Result<SymMat> {
    let n = ds.n();
    if h.dim() != n {
        return Err(SdpError::dim("directional_derivative: dimension mismatch"));
    }
    let (r, s, b) = (ds.r, ds.s, ds.beta());
    let ht = h.congruence_t(&ds.q);
    let mut d = DMatrix::zeros(n, n);
    d.view_mut((0, 0), (r + b, r))
        .copy_from(&ht.block(0, 0, r + b, r));
    d.view_mut((0, r), (r, b)).copy_from(&ht.block(0, r, r, b));
    let ga = ht.block(r + b, 0, s, r).component_mul(&ds.theta);
    d.view_mut((r + b, 0), (s, r)).copy_from(&ga);
    d.view_mut((0, r + b), (r, s)).copy_from(&ga.transpose());
    if b > 0 {
        let hbb = SymMat::symmetrize(ht.block(r, r, b, b));
        let pbb = eig_sym(&hbb)?.psd_part();
        d.view_mut((r, r), (b, b)).copy_from(pbb.as_matrix());
    }
    Ok(SymMat::symmetrize(d).congruence(&ds.q))
}

/// `M̃(H) = P(H − D(H)) + P⊥(D(H))`.
pub fn apply_m_tilde(
    ds: &DirectionalStructure,
    kernel: &ConstraintKernel,
    h: &SymMat,
) -> Result<SymMat> {
    let d = directional_derivative(ds, h)?;
    let p = kernel.project_range(&(h - &d.scale(2.0)));
    Ok(&d + &p)
}

/// Both sides of `‖H‖² − ‖M̃(H)‖² = ‖P D‖² + ‖P⊥(H − D)‖² + 4<Θ̃∘H_γα, Θ̃⊥∘H_γα>`
/// with `D = Π'(Z⋆; H)`.
pub fn energy_m_tilde(
    ds: &DirectionalStructure,
    kernel: &ConstraintKernel,
    h: &SymMat,
) -> Result<(f64, f64)> {
    let d = directional_derivative(ds, h)?;
    let mt = &d + &kernel.project_range(&(h - &d.scale(2.0)));
    let lhs = h.norm_fro().powi(2) - mt.norm_fro().powi(2);
    let n = ds.n();
    let hga = h.congruence_t(&ds.q).block(n - ds.s, 0, ds.s, ds.r);
    let tp = ds.theta.map(|t| 1.0 - t);
    let cross = hga.component_mul(&ds.theta).dot(&hga.component_mul(&tp));
    let rhs = kernel.project_range(&d).norm_fro().powi(2)
        + kernel.project_null(&(h - &d)).norm_fro().powi(2)
        + 4.0 * cross;
    Ok((lhs, rhs))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RhoNdEstimate {
    /// Largest `‖M̃(H)‖_F` found over unit `H`; a lower bound on `ρ_ND`.
    pub value: f64,
    pub samples: usize,
}

const ASCENT_MAX_STEPS: usize = 20_000;
const ASCENT_FD_STEP: f64 = 1e-6;

/// Sampled lower bound on `ρ_ND = sup_{‖H‖_F = 1} ‖M̃(H)‖_F`.
///
/// Each sample starts from a random unit direction and climbs `‖M̃(H)‖²` on
/// the sphere with central-difference gradients: the normalized gradient is
/// taken as the next point (a power step when `M̃` is linear), falling back to
/// a halving line search along the tangent part whenever that fails to
/// increase the objective. This is an estimate, not a certificate.
pub fn rho_nd_estimate(
    ds: &DirectionalStructure,
    kernel: &ConstraintKernel,
    samples: usize,
    seed: u64,
) -> Result<RhoNdEstimate> {
    if samples == 0 {
        return Err(SdpError::domain("rho_nd_estimate needs at least one sample"));
    }
    let n = ds.n();
    let t = svec_len(n);
    let f = |v: &DVector<f64>| -> Result<f64> {
        let h = smat(v, n)?;
        Ok(apply_m_tilde(ds, kernel, &h)?.norm_fro().powi(2))
    };
    let grad = |v: &DVector<f64>| -> Result<DVector<f64>> {
        let mut g = DVector::zeros(t);
        let mut w = v.clone();
        for k in 0..t {
            let orig = w[k];
            w[k] = orig + ASCENT_FD_STEP;
            let up = f(&w)?;
            w[k] = orig - ASCENT_FD_STEP;
            let down = f(&w)?;
            w[k] = orig;
            g[k] = (up - down) / (2.0 * ASCENT_FD_STEP);
        }
        Ok(g)
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = 0.0_f64;
    for _ in 0..samples {
        let mut v = DVector::from_iterator(t, (0..t).map(|_| rng.sample::<f64, _>(StandardNormal)));
        v /= v.norm();
        let mut fv = f(&v)?;
        for _ in 0..ASCENT_MAX_STEPS {
            let g = grad(&v)?;
            let gn = g.norm();
            if gn == 0.0 {
                break;
            }
            let mut next = &g / gn;
            let mut fnext = f(&next)?;
            if fnext <= fv {
                let tangent = &g - &v * g.dot(&v);
                let tn = tangent.norm();
                if tn <= 1e-14 * gn {
                    break;
                }
                let u = tangent / tn;
                let mut step = 1.0;
                let mut found = false;
                for _ in 0..40 {
                    let cand = &v + &u * step;
                    let cand = &cand / cand.norm();
                    let fc = f(&cand)?;
                    if fc > fv {
                        next = cand;
                        fnext = fc;
                        found = true;
                        break;
                    }
                    step *= 0.5;
                }
                if !found {
                    break;
                }
            }
            let gain = fnext - fv;
            v = next;
            fv = fnext;
            if gain <= 1e-15 * fv.max(1e-300) {
                break;
            }
        }
        best = best.max(fv.sqrt());
    }
    Ok(RhoNdEstimate {
        value: best,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::psd_project;
    use crate::problem::{generate_planted, Degeneracy, PlantedSpec, SdpProblem};

    fn random_sym(n: usize, rng: &mut ChaCha8Rng) -> SymMat {
        let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
        SymMat::symmetrize(g)
    }

    fn dense_operator(n: usize, f: impl Fn(&SymMat) -> SymMat) -> DMatrix<f64> {
        let t = svec_len(n);
        let mut m = DMatrix::zeros(t, t);
        for k in 0..t {
            m.set_column(k, &svec(&f(&crate::linalg::svec_basis(n, k))));
        }
        m
    }

    fn structure_for(n: usize, m: usize, r: usize, seed: u64, d: Degeneracy) -> (SdpProblem, ConstraintKernel, OmegaStructure) {
        let (p, c) = generate_planted(&PlantedSpec::new(n, m, r, seed).with_degeneracy(d)).unwrap();
        let k = ConstraintKernel::new(&p).unwrap();
        let os = build_omega(&eig_sym(&c.zstar(1.0)).unwrap()).unwrap();
        (p, k, os)
    }

    #[test]
    fn omega_two_by_two() {
        let os = build_omega(&eig_sym(&SymMat::from_diagonal(&[2.0, -1.0])).unwrap()).unwrap();
        assert_eq!(os.r, 1);
        assert!((os.theta[(0, 0)] - 2.0 / 3.0).abs() < 1e-15);
        let expect = DMatrix::from_row_slice(2, 2, &[1.0, 2.0 / 3.0, 2.0 / 3.0, 0.0]);
        assert!((&os.omega - expect).norm() < 1e-15);

        let os = build_omega(&eig_sym(&SymMat::from_diagonal(&[1.0, 1.0, -1.0])).unwrap()).unwrap();
        assert_eq!(os.r, 2);
        assert_eq!(os.theta.as_slice(), &[0.5, 0.5]);
    }

    #[test]
    fn omega_rejects_singular() {
        let d = eig_sym(&SymMat::from_diagonal(&[1.0, 0.0, -1.0])).unwrap();
        assert!(matches!(build_omega(&d), Err(SdpError::Domain(_))));
    }

    #[test]
    fn frechet_derivative_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..5 {
            let z = random_sym(6, &mut rng);
            let os = build_omega(&eig_sym(&z).unwrap()).unwrap();
            let h = random_sym(6, &mut rng);
            let pz = psd_project(&z).unwrap();
            let dh = os.omega_apply(&h);
            let mut prev = f64::INFINITY;
            for t in [1e-2, 1e-3, 1e-4, 1e-5] {
                let zt = &z + &h.scale(t);
                let err = (&(&psd_project(&zt).unwrap() - &pz) - &dh.scale(t)).norm2() / t;
                assert!(err < prev.max(1e-9));
                prev = err;
            }
            assert!(prev < 1e-4);
        }
    }

    #[test]
    fn full_range_reduces_to_hadamard() {
        // m = n(n+1)/2: P = Id and M(H) = Ω⊥∘H.
        let n = 3;
        let a: Vec<SymMat> = (0..svec_len(n)).map(|k| crate::linalg::svec_basis(n, k)).collect();
        let p = SdpProblem::new(SymMat::identity(n), a, DVector::zeros(svec_len(n))).unwrap();
        let k = ConstraintKernel::new(&p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let os = build_omega(&eig_sym(&random_sym(n, &mut rng)).unwrap()).unwrap();
        let h = random_sym(n, &mut rng);
        let mh = apply_m(&os, &k, &h);
        assert!((&mh - &os.omega_perp_apply(&h)).norm_fro() <= 1e-12);
        let norm = op_norm_m(&os, &k).unwrap();
        assert!((norm - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn adjoint_and_firm_nonexpansiveness() {
        let (_, k, os) = structure_for(6, 9, 2, 3, Degeneracy::None);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let h = random_sym(6, &mut rng);
            let g = random_sym(6, &mut rng);
            let lhs = apply_m(&os, &k, &h).inner(&g);
            let rhs = h.inner(&apply_m_adjoint(&os, &k, &g));
            assert!((lhs - rhs).abs() <= 1e-12 * h.norm_fro() * g.norm_fro());
            let mh = apply_m(&os, &k, &h);
            assert!(mh.inner(&h) >= mh.norm_fro().powi(2) - 1e-10 * h.norm_fro().powi(2));
            // linearity
            let comb = apply_m(&os, &k, &(&h.scale(2.0) + &g));
            let sep = &mh.scale(2.0) + &apply_m(&os, &k, &g);
            assert!((&comb - &sep).norm_fro() <= 1e-12 * comb.norm_fro().max(1.0));
        }
    }

    #[test]
    fn op_norm_matches_dense_oracle() {
        for (d, r) in [(Degeneracy::None, 2), (Degeneracy::PrimalNdFail, 2)] {
            let (_, k, os) = structure_for(6, 12, r, 5, d);
            let dense = dense_operator(6, |h| apply_m(&os, &k, h));
            let oracle = dense.clone().singular_values().max();
            let est = op_norm_m(&os, &k).unwrap();
            assert!((est - oracle).abs() <= 1e-8, "{est} vs {oracle}");
            assert!(est <= 1.0 + 1e-9);
            let fix = fix_basis(&os, &k).unwrap();
            let proj = dense_operator(6, |h| fix.project(h));
            let oracle = (dense - proj).singular_values().max();
            let est = op_norm_m_minus_fix(&os, &k, &fix).unwrap();
            assert!((est - oracle).abs() <= 1e-8, "{est} vs {oracle}");
        }
    }

    #[test]
    fn fix_subspace_nd_is_trivial() {
        let (_, k, os) = structure_for(8, 16, 3, 6, Degeneracy::None);
        let fix = fix_basis(&os, &k).unwrap();
        assert_eq!(fix.dim(), 0);
        let a = op_norm_m(&os, &k).unwrap();
        let b = op_norm_m_minus_fix(&os, &k, &fix).unwrap();
        assert!((a - b).abs() <= 1e-9);
        assert!(a < 1.0);
    }

    #[test]
    fn fix_subspace_degenerate() {
        let (p, k, os) = structure_for(8, 16, 3, 7, Degeneracy::PrimalNdFail);
        let fix = fix_basis(&os, &k).unwrap();
        assert!(fix.dim() >= 1);
        for (i, b) in fix.basis.iter().enumerate() {
            let mb = apply_m(&os, &k, b);
            assert!((&mb - b).norm_fro() <= 1e-9);
            assert!(os.off_block(b).norm() <= 1e-9);
            let bt = os.rotate_in(b);
            let mut xb = DMatrix::zeros(8, 8);
            xb.view_mut((0, 0), (3, 3)).copy_from(&bt.block(0, 0, 3, 3));
            let xb = SymMat::symmetrize(xb).congruence(&os.q);
            assert!(p.apply_a(&xb).unwrap().norm() <= 1e-9);
            let mut sb = DMatrix::zeros(8, 8);
            sb.view_mut((3, 3), (5, 5)).copy_from(&bt.block(3, 3, 5, 5));
            let sb = SymMat::symmetrize(sb).congruence(&os.q);
            assert!(k.project_null(&sb).norm_fro() <= 1e-9);
            for (j, c) in fix.basis.iter().enumerate() {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((b.inner(c) - want).abs() <= 1e-10);
            }
            let res = &apply_m(&os, &k, b) - &fix.project(b);
            assert!((&res - b).norm_fro() <= 1e-9 || res.norm_fro() <= 1e-9);
            assert!((&mb - &fix.project(b)).norm_fro() <= 1e-9);
        }
        let v = op_norm_m_minus_fix(&os, &k, &fix).unwrap();
        assert!(v < 1.0 - 1e-8);
    }

    #[test]
    fn fix_projector_is_orthogonal() {
        let (_, k, os) = structure_for(7, 12, 3, 8, Degeneracy::PrimalNdFail);
        let fix = fix_basis(&os, &k).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let h = random_sym(7, &mut rng);
        let g = random_sym(7, &mut rng);
        let ph = fix.project(&h);
        assert!((&fix.project(&ph) - &ph).norm_fro() <= 1e-10 * h.norm_fro());
        assert!((ph.inner(&g) - h.inner(&fix.project(&g))).abs() <= 1e-10 * h.norm_fro() * g.norm_fro());
    }

    #[test]
    fn fix_without_constraints() {
        let p = SdpProblem::new(SymMat::identity(4), vec![], DVector::zeros(0)).unwrap();
        let k = ConstraintKernel::new(&p).unwrap();
        let os = build_omega(&eig_sym(&SymMat::from_diagonal(&[3.0, 2.0, 1.0, -1.0])).unwrap()).unwrap();
        assert_eq!(fix_basis(&os, &k).unwrap().dim(), 6);
    }

    #[test]
    fn psi_zero_at_reference_and_block_diagonal() {
        let (_, k, os) = structure_for(6, 9, 2, 10, Degeneracy::None);
        let zs = os.decomp().reconstruct();
        assert!(psi_residual(&os, &k, &zs, &zs).unwrap().norm_fro() <= 1e-12);

        let d = build_omega(&eig_sym(&SymMat::from_diagonal(&[2.0, 1.0, -1.0, -3.0])).unwrap()).unwrap();
        let p = SdpProblem::new(SymMat::identity(4), vec![SymMat::identity(4)], DVector::from_vec(vec![1.0])).unwrap();
        let k = ConstraintKernel::new(&p).unwrap();
        let zs = SymMat::from_diagonal(&[2.0, 1.0, -1.0, -3.0]);
        let mut h = DMatrix::zeros(4, 4);
        h[(0, 1)] = 0.3;
        h[(1, 0)] = 0.3;
        h[(2, 3)] = -0.4;
        h[(3, 2)] = -0.4;
        h[(0, 0)] = 0.2;
        let h = SymMat::symmetrize(h);
        let psi = psi_residual(&d, &k, &(&zs + &h), &zs).unwrap();
        assert!(psi.norm_fro() <= 1e-12 * h.norm_fro());
    }

    #[test]
    fn directional_derivative_blocks() {
        let ds = build_directional(&eig_sym(&SymMat::from_diagonal(&[1.0, 0.0, 0.0, -1.0])).unwrap()).unwrap();
        assert_eq!((ds.r, ds.beta(), ds.s), (1, 2, 1));
        let mut h = DMatrix::zeros(4, 4);
        h[(1, 1)] = 1.0;
        h[(2, 2)] = 2.0;
        h[(1, 2)] = 0.5;
        h[(2, 1)] = 0.5;
        let h = SymMat::symmetrize(h);
        assert!((&directional_derivative(&ds, &h).unwrap() - &h).norm_fro() <= 1e-15);
        let neg = h.scale(-1.0);
        assert!(directional_derivative(&ds, &neg).unwrap().norm_fro() <= 1e-15);
    }

    #[test]
    fn directional_derivative_finite_differences() {
        let zs = SymMat::from_diagonal(&[1.0, 0.0, -1.0]);
        let ds = build_directional(&eig_sym(&zs).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            let h = random_sym(3, &mut rng);
            let d = directional_derivative(&ds, &h).unwrap();
            let pz = psd_project(&zs).unwrap();
            let mut errs = Vec::new();
            for t in [1e-2, 1e-3, 1e-4, 1e-5] {
                let e = (&(&psd_project(&(&zs + &h.scale(t))).unwrap() - &pz) - &d.scale(t)).norm_fro() / t;
                errs.push(e);
            }
            assert!(errs[3] < 1e-3 && errs[3] <= errs[0]);
            let d2 = directional_derivative(&ds, &h.scale(2.5)).unwrap();
            assert!((&d2 - &d.scale(2.5)).norm_fro() <= 1e-12 * d.norm_fro().max(1.0));
        }
    }

    #[test]
    fn rho_nd_reduces_to_op_norm_when_nonsingular() {
        let (_, k, os) = structure_for(4, 5, 2, 12, Degeneracy::None);
        let ds = build_directional(&os.decomp()).unwrap();
        assert_eq!(ds.beta(), 0);
        let est = rho_nd_estimate(&ds, &k, 2, 1).unwrap();
        let norm = op_norm_m(&os, &k).unwrap();
        assert!((est.value - norm).abs() <= 1e-6, "{} vs {norm}", est.value);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let h = random_sym(4, &mut rng);
        let a = apply_m_tilde(&ds, &k, &h).unwrap();
        assert!((&a - &apply_m(&os, &k, &h)).norm_fro() <= 1e-12 * h.norm_fro());
    }

    #[test]
    fn m_tilde_is_nonexpansive_and_homogeneous() {
        let p = generate_planted(&PlantedSpec::new(3, 2, 1, 14)).unwrap().0;
        let k = ConstraintKernel::new(&p).unwrap();
        let ds = build_directional(&eig_sym(&SymMat::from_diagonal(&[1.0, 0.0, -1.0])).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        for _ in 0..50 {
            let h = random_sym(3, &mut rng);
            let mh = apply_m_tilde(&ds, &k, &h).unwrap();
            assert!(mh.norm_fro() <= h.norm_fro() + 1e-10);
            let m2 = apply_m_tilde(&ds, &k, &h.scale(2.0)).unwrap();
            assert!((&m2 - &mh.scale(2.0)).norm_fro() <= 1e-12 * mh.norm_fro().max(1.0));
        }
        let est = rho_nd_estimate(&ds, &k, 4, 3).unwrap();
        assert!(est.value <= 1.0 + 1e-10 && est.value > 0.0);
        assert_eq!(est.samples, 4);
    }
}
