//! Iterative elimination for `Π(Z + H)` and error-bound measurements.
//!
//! Working in the eigenbasis of a nonsingular `Z`, the perturbed matrix is
//! split as `[Zx Zoᵀ; Zo Zs]` with `Zx ≻ 0`, `Zs ≺ 0`. Each step solves
//! `W_O·Zx − Zs·W_O = Zo`, conjugates by `exp(W)` with
//! `W = [0 −W_Oᵀ; W_O 0]`, and accumulates the rotation in `Y`. Once the
//! off-diagonal block is gone, `Π(Z + H) = Y[Zx 0; 0 0]Yᵀ`.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Result, SdpError};
use crate::linalg::{eig_sym, skew_exp, spectral_norm, sylvester_solve, SymMat};
use crate::linearization::{build_omega, nonsingular_split, NONSINGULAR_TOL};

const ELIM_TOL: f64 = 1e-13;
const ELIM_MAX_ITER: usize = 60;
const HO_ZERO: f64 = 1e-14;

#[derive(Clone, Debug)]
pub struct EliminationState {
    pub ell: usize,
    pub zx: SymMat,
    pub zs: SymMat,
    /// `(n−r) × r`.
    pub zo: DMatrix<f64>,
    /// Accumulated orthogonal rotation.
    pub y: DMatrix<f64>,
    /// `Y[Zx 0; 0 0]Yᵀ`.
    pub v: SymMat,
    /// `‖Z⁰‖₂` of the starting block matrix.
    pub norm_z0: f64,
}

impl EliminationState {
    /// Starts from a block matrix `Z⁰` in the working basis, with split `r`.
    pub fn new(z0: &SymMat, r: usize) -> Result<Self> {
        let n = z0.dim();
        if r > n {
            return Err(SdpError::dim(format!("split r = {r} exceeds n = {n}")));
        }
        let y = DMatrix::identity(n, n);
        let mut st = EliminationState {
            ell: 0,
            zx: SymMat::zeros(r),
            zs: SymMat::zeros(n - r),
            zo: DMatrix::zeros(n - r, r),
            y,
            v: SymMat::zeros(n),
            norm_z0: z0.norm2(),
        };
        st.load_blocks(z0);
        Ok(st)
    }

    pub fn n(&self) -> usize {
        self.y.nrows()
    }

    pub fn r(&self) -> usize {
        self.zx.dim()
    }

    /// The current block matrix `[Zx Zoᵀ; Zo Zs]`.
    pub fn block_matrix(&self) -> SymMat {
        let n = self.n();
        let r = self.r();
        let mut m = DMatrix::zeros(n, n);
        m.view_mut((0, 0), (r, r)).copy_from(self.zx.as_matrix());
        m.view_mut((r, r), (n - r, n - r)).copy_from(self.zs.as_matrix());
        m.view_mut((r, 0), (n - r, r)).copy_from(&self.zo);
        m.view_mut((0, r), (r, n - r)).copy_from(&self.zo.transpose());
        SymMat::symmetrize(m)
    }

    /// `η = √min(r, n−r) / (λ_min(Zx) − λ_max(Zs))`.
    pub fn eta(&self) -> Result<f64> {
        let (xmin, smax) = self.block_extremes()?;
        let d = (self.r().min(self.n() - self.r()) as f64).sqrt();
        Ok(d / (xmin - smax))
    }

    /// `κ = (4/9)η⁴‖Z⁰‖³ + (4/3)η³‖Z⁰‖² + (13/3)η²‖Z⁰‖ + 4η`.
    pub fn kappa(&self, eta: f64) -> f64 {
        let z = self.norm_z0;
        4.0 / 9.0 * eta.powi(4) * z.powi(3)
            + 4.0 / 3.0 * eta.powi(3) * z.powi(2)
            + 13.0 / 3.0 * eta.powi(2) * z
            + 4.0 * eta
    }

    fn block_extremes(&self) -> Result<(f64, f64)> {
        let xmin = if self.r() > 0 {
            eig_sym(&self.zx)?.lambda[self.r() - 1]
        } else {
            f64::INFINITY
        };
        let smax = if self.n() > self.r() {
            eig_sym(&self.zs)?.lambda[0]
        } else {
            f64::NEG_INFINITY
        };
        Ok((xmin, smax))
    }

    fn load_blocks(&mut self, z: &SymMat) {
        let n = z.dim();
        let r = self.r();
        self.zx = SymMat::symmetrize(z.block(0, 0, r, r));
        self.zs = SymMat::symmetrize(z.block(r, r, n - r, n - r));
        self.zo = z.block(r, 0, n - r, r);
        let mut lead = DMatrix::zeros(n, n);
        lead.view_mut((0, 0), (r, r)).copy_from(self.zx.as_matrix());
        self.v = SymMat::symmetrize(&self.y * lead * self.y.transpose());
    }
}

/// One elimination step, refusing when `‖Zo‖₂ > 3/(4η)` or the blocks have
/// lost definiteness.
pub fn eliminate_step(state: &EliminationState) -> Result<EliminationState> {
    let n = state.n();
    let r = state.r();
    let (xmin, smax) = state.block_extremes()?;
    if !(xmin > 0.0 && smax < 0.0) {
        return Err(SdpError::PerturbationTooLarge(format!(
            "blocks lost definiteness at step {}: λ_min(Zx) = {xmin:.3e}, λ_max(Zs) = {smax:.3e}",
            state.ell
        )));
    }
    let eta = state.eta()?;
    let zo_norm = spectral_norm(&state.zo);
    if zo_norm > 0.75 / eta {
        return Err(SdpError::PerturbationTooLarge(format!(
            "‖Zo‖₂ = {zo_norm:.3e} exceeds 3/(4η) = {:.3e} at step {}",
            0.75 / eta,
            state.ell
        )));
    }
    let mut next = state.clone();
    next.ell += 1;
    if zo_norm == 0.0 {
        return Ok(next);
    }
    let wo = sylvester_solve(&state.zx, &state.zs, &state.zo)?;
    let mut w = DMatrix::zeros(n, n);
    w.view_mut((r, 0), (n - r, r)).copy_from(&wo);
    w.view_mut((0, r), (r, n - r)).copy_from(&(-wo.transpose()));
    let e = skew_exp(&w)?;
    let z_new = state.block_matrix().congruence_t(&e);
    next.y = &state.y * &e;
    next.load_blocks(&z_new);

    let new_norm = spectral_norm(&next.zo);
    let bound = state.kappa(eta) * zo_norm * zo_norm + 64.0 * f64::EPSILON * state.norm_z0;
    if new_norm > bound {
        return Err(SdpError::numerical(format!(
            "off-block decay violated at step {}: ‖Zo'‖₂ = {new_norm:.3e} > κ‖Zo‖₂² = {bound:.3e}",
            state.ell
        )));
    }
    Ok(next)
}

/// Result of [`run_elimination`].
#[derive(Clone, Debug)]
pub struct EliminationResult {
    /// Approximation of `Π(Z + H)` in the original coordinates.
    pub projection: SymMat,
    pub iterations: usize,
    pub final_off_norm: f64,
    /// `‖Zo[ℓ]‖_F` for ℓ = 0, 1, …
    pub off_history: Vec<f64>,
    /// `η_ℓ` for each step taken.
    pub eta_history: Vec<f64>,
}

/// `Π(Z + H)` by iterative elimination in the eigenbasis of `Z`.
pub fn run_elimination(z: &SymMat, h: &SymMat) -> Result<EliminationResult> {
    if z.dim() != h.dim() {
        return Err(SdpError::dim("run_elimination: Z and H differ in size"));
    }
    let d = eig_sym(z)?;
    let r = nonsingular_split(&d, NONSINGULAR_TOL)?;
    let z0 = (z + h).congruence_t(&d.q);
    let tol = ELIM_TOL * (z + h).norm_fro().max(1.0);
    let mut st = EliminationState::new(&z0, r)?;
    let mut off = vec![st.zo.norm()];
    let mut etas = Vec::new();
    while st.zo.norm() > tol {
        if st.ell >= ELIM_MAX_ITER {
            return Err(SdpError::numerical(format!(
                "elimination did not converge in {ELIM_MAX_ITER} steps; ‖Zo‖_F history {off:?}"
            )));
        }
        etas.push(st.eta()?);
        st = eliminate_step(&st)?;
        off.push(st.zo.norm());
    }
    Ok(EliminationResult {
        projection: st.v.congruence(&d.q),
        iterations: st.ell,
        final_off_norm: st.zo.norm(),
        off_history: off,
        eta_history: etas,
    })
}

/// Measurements of the first-order remainder of `Π` around `Z`.
///
/// `lhs` and `ho_norms` use the spectral norm; `refined_ratios` is `None`
/// where `H̃_O` vanishes to rounding, i.e. `‖H̃_O‖₂ ≤ 1e-14·‖H‖₂`.
#[derive(Clone, Debug, Serialize)]
pub struct EbReport {
    pub scales: Vec<f64>,
    pub lhs: Vec<f64>,
    pub ho_norms: Vec<f64>,
    pub h_norms: Vec<f64>,
    pub refined_ratios: Vec<Option<f64>>,
    pub classic_ratios: Vec<f64>,
}

impl EbReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,lhs,ho_norm,refined_ratio,classic_ratio\n");
        for i in 0..self.scales.len() {
            let refined = self.refined_ratios[i]
                .map(|v| format!("{v:e}"))
                .unwrap_or_default();
            let _ = writeln!(
                out,
                "{:e},{:e},{:e},{},{:e}",
                self.scales[i], self.lhs[i], self.ho_norms[i], refined, self.classic_ratios[i]
            );
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Least-squares slope of `ln lhs` against `ln t`.
    pub fn loglog_slope(&self) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self
            .scales
            .iter()
            .zip(&self.lhs)
            .filter(|(_, &l)| l > 0.0)
            .map(|(&t, &l)| (t.ln(), l.ln()))
            .collect();
        if pts.len() < 2 {
            return None;
        }
        let k = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        Some(sxy / sxx)
    }

    /// max/min of the defined refined ratios.
    pub fn refined_spread(&self) -> Option<f64> {
        let v: Vec<f64> = self.refined_ratios.iter().flatten().copied().collect();
        if v.is_empty() {
            return None;
        }
        let hi = v.iter().copied().fold(f64::MIN, f64::max);
        let lo = v.iter().copied().fold(f64::MAX, f64::min);
        Some(hi / lo)
    }
}

/// Scans `t ↦ H(t)` for the given scales, measuring
/// `‖Π(Z+H(t)) − Π(Z) − Q(Ω∘H̃)Qᵀ‖₂` through the eigendecomposition path.
pub fn eb_scan_family(
    z: &SymMat,
    scales: &[f64],
    h_of: impl Fn(f64) -> SymMat,
) -> Result<EbReport> {
    let d = eig_sym(z)?;
    let os = build_omega(&d)?;
    let pz = os.psd_star();
    let mut rep = EbReport {
        scales: scales.to_vec(),
        lhs: Vec::new(),
        ho_norms: Vec::new(),
        h_norms: Vec::new(),
        refined_ratios: Vec::new(),
        classic_ratios: Vec::new(),
    };
    for &t in scales {
        let h = h_of(t);
        if h.dim() != z.dim() {
            return Err(SdpError::dim("eb_scan: H and Z differ in size"));
        }
        let ph = eig_sym(&(z + &h))?.psd_part();
        let lhs = (&(&ph - &pz) - &os.omega_apply(&h)).norm2();
        let ho = spectral_norm(&os.off_block(&h));
        let hn = h.norm2();
        rep.lhs.push(lhs);
        rep.ho_norms.push(ho);
        rep.h_norms.push(hn);
        rep.refined_ratios
            .push(if ho > HO_ZERO * hn && hn > 0.0 { Some(lhs / (ho * hn)) } else { None });
        rep.classic_ratios.push(if hn > 0.0 { lhs / (hn * hn) } else { 0.0 });
    }
    Ok(rep)
}

/// [`eb_scan_family`] along the ray `t·H`.
pub fn eb_scan(z: &SymMat, h: &SymMat, scales: &[f64]) -> Result<EbReport> {
    eb_scan_family(z, scales, |t| h.scale(t))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SylvesterDeviation {
    /// `‖W₀ − Θ₀∘H_O‖₂`.
    pub deviation: f64,
    /// `2nd/(λ_r − λ_{r+1})² · ‖H_O‖₂ · (‖H_X‖₂ + ‖H_S‖₂)`.
    pub bound: f64,
}

/// Deviation of the first Sylvester solution from its linear prediction
/// `Θ₀∘H_O`, `Θ₀_ij = 1/(λ_j − λ_{r+i})`, in the eigenbasis of `Z`.
pub fn first_sylvester_deviation(z: &SymMat, h: &SymMat) -> Result<SylvesterDeviation> {
    let n = z.dim();
    if h.dim() != n {
        return Err(SdpError::dim("first_sylvester_deviation: size mismatch"));
    }
    let dz = eig_sym(z)?;
    let r = nonsingular_split(&dz, NONSINGULAR_TOL)?;
    if r == 0 || r == n {
        return Err(SdpError::domain("Z must have both positive and negative eigenvalues"));
    }
    let lam = &dz.lambda;
    let ht = h.congruence_t(&dz.q);
    let hx = ht.block(0, 0, r, r);
    let hs = ht.block(r, r, n - r, n - r);
    let ho = ht.block(r, 0, n - r, r);
    let gap = lam[r - 1] - lam[r];
    let dd = (r.min(n - r) as f64).sqrt();
    let hxs = spectral_norm(&hx) + spectral_norm(&hs);
    let limit = gap / (2.0 * n as f64 * dd);
    if hxs > limit {
        return Err(SdpError::domain(format!(
            "‖H_X‖₂ + ‖H_S‖₂ = {hxs:.3e} exceeds (λ_r − λ_(r+1))/(2nd) = {limit:.3e}"
        )));
    }
    let zx = SymMat::symmetrize(DMatrix::from_diagonal(&lam.rows(0, r).into_owned()) + &hx);
    let zs = SymMat::symmetrize(DMatrix::from_diagonal(&lam.rows(r, n - r).into_owned()) + &hs);
    let w0 = sylvester_solve(&zx, &zs, &ho)?;
    let theta0 = DMatrix::from_fn(n - r, r, |i, j| 1.0 / (lam[j] - lam[r + i]));
    let deviation = spectral_norm(&(w0 - theta0.component_mul(&ho)));
    let bound = 2.0 * n as f64 * dd / (gap * gap) * spectral_norm(&ho) * hxs;
    if deviation > bound * (1.0 + 1e-10) + 1e-15 * spectral_norm(&ho) {
        return Err(SdpError::numerical(format!(
            "first Sylvester deviation {deviation:.3e} exceeds its bound {bound:.3e}"
        )));
    }
    Ok(SylvesterDeviation { deviation, bound })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::psd_project;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn random_sym(n: usize, rng: &mut ChaCha8Rng) -> SymMat {
        SymMat::symmetrize(DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal)))
    }

    fn random_orthogonal(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal)).qr().q()
    }

    /// `Q diag(λ) Qᵀ` with `r` eigenvalues in `[gap, gap+2]` and the rest in
    /// `[−gap−2, −gap]`.
    fn gapped(n: usize, r: usize, gap: f64, rng: &mut ChaCha8Rng) -> SymMat {
        let d: Vec<f64> = (0..n)
            .map(|i| {
                let v = gap + rng.random_range(0.0..2.0);
                if i < r { v } else { -v }
            })
            .collect();
        SymMat::from_diagonal(&d).congruence(&random_orthogonal(n, rng))
    }

    #[test]
    fn zero_off_block_step_is_identity() {
        let z0 = SymMat::from_diagonal(&[2.0, 1.0, -3.0]);
        let st = EliminationState::new(&z0, 2).unwrap();
        let next = eliminate_step(&st).unwrap();
        assert_eq!(next.ell, 1);
        assert_eq!(next.block_matrix(), st.block_matrix());
        assert_eq!(next.y, st.y);
    }

    #[test]
    fn scalar_step_by_hand() {
        let z0 = SymMat::new(DMatrix::from_row_slice(2, 2, &[2.0, 0.1, 0.1, -3.0])).unwrap();
        let st = EliminationState::new(&z0, 1).unwrap();
        let next = eliminate_step(&st).unwrap();
        let w = 0.02_f64;
        let (c, s) = (w.cos(), w.sin());
        // exp([0 −w; w 0]) = [c −s; s c]
        let e = DMatrix::from_row_slice(2, 2, &[c, -s, s, c]);
        let by_hand = e.transpose() * z0.as_matrix() * &e;
        assert!((next.y.clone() - &e).norm() < 1e-15);
        assert!((next.zo[(0, 0)] - by_hand[(1, 0)]).abs() < 1e-15);
        assert!(next.zo[(0, 0)].abs() < 1e-3);
    }

    #[test]
    fn one_step_decay_matches_coefficient() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 6;
        let r = 3;
        let mut d: Vec<f64> = (0..n).map(|i| if i < r { 1.0 + i as f64 } else { -1.0 - i as f64 }).collect();
        d.sort_by(|a, b| b.total_cmp(a));
        let mut z0 = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(d));
        let mut zo = DMatrix::from_fn(n - r, r, |_, _| rng.sample::<f64, _>(StandardNormal));
        zo *= 1e-2 / spectral_norm(&zo);
        z0.view_mut((r, 0), (n - r, r)).copy_from(&zo);
        z0.view_mut((0, r), (r, n - r)).copy_from(&zo.transpose());
        let st = EliminationState::new(&SymMat::new(z0).unwrap(), r).unwrap();
        let eta = st.eta().unwrap();
        let next = eliminate_step(&st).unwrap();
        assert!(spectral_norm(&next.zo) <= st.kappa(eta) * 1e-4);
    }

    #[test]
    fn elimination_trivial_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let z = gapped(5, 2, 0.5, &mut rng);
        let res = run_elimination(&z, &SymMat::zeros(5)).unwrap();
        assert_eq!(res.iterations, 0);
        assert!((&res.projection - &psd_project(&z).unwrap()).norm_fro() <= 1e-12);

        // block-diagonal perturbation in Z's eigenbasis
        let d = eig_sym(&z).unwrap();
        let mut hb = DMatrix::zeros(5, 5);
        hb[(0, 1)] = 0.05;
        hb[(1, 0)] = 0.05;
        hb[(3, 4)] = 0.02;
        hb[(4, 3)] = 0.02;
        hb[(2, 2)] = 0.1;
        let h = SymMat::symmetrize(hb).congruence(&d.q);
        let res = run_elimination(&z, &h).unwrap();
        assert_eq!(res.iterations, 0);
        let oracle = psd_project(&(&z + &h)).unwrap();
        assert!((&res.projection - &oracle).norm_fro() <= 1e-12 * oracle.norm_fro().max(1.0));
    }

    #[test]
    fn elimination_matches_eigen_projection() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..30 {
            let n = rng.random_range(4..9);
            let r = rng.random_range(1..n);
            let z = gapped(n, r, 0.5, &mut rng);
            let mut h = random_sym(n, &mut rng);
            h = h.scale(0.05 / h.norm2());
            let res = run_elimination(&z, &h).unwrap();
            let zh = &z + &h;
            let oracle = psd_project(&zh).unwrap();
            assert!((&res.projection - &oracle).norm_fro() <= 1e-9 * zh.norm_fro().max(1.0));
            assert!(res.iterations <= 6);
            // quadratic decay
            for w in res.off_history.windows(2) {
                assert!(w[1] <= w[0]);
            }
            let eta0 = res.eta_history[0];
            for &e in &res.eta_history {
                assert!(e >= 2.0 * eta0 / 3.0 && e <= 2.0 * eta0);
            }
        }
    }

    #[test]
    fn elimination_invariants() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let z = gapped(6, 3, 0.5, &mut rng);
        let mut h = random_sym(6, &mut rng);
        h = h.scale(0.1 / h.norm2());
        let d = eig_sym(&z).unwrap();
        let z0 = (&z + &h).congruence_t(&d.q);
        let eig0 = eig_sym(&z0).unwrap().lambda;
        let mut st = EliminationState::new(&z0, 3).unwrap();
        for _ in 0..4 {
            st = eliminate_step(&st).unwrap();
            let orth = (st.y.transpose() * &st.y - DMatrix::identity(6, 6)).norm();
            assert!(orth <= 1e-10);
            let conj = z0.congruence_t(&st.y);
            assert!((&conj - &st.block_matrix()).norm_fro() <= 1e-9);
            let eig = eig_sym(&st.block_matrix()).unwrap().lambda;
            assert!((eig - &eig0).norm() <= 1e-10);
        }
    }

    #[test]
    fn elimination_refuses_large_perturbation() {
        let z = SymMat::from_diagonal(&[1.0, -1.0]);
        let h = SymMat::new(DMatrix::from_row_slice(2, 2, &[0.0, 5.0, 5.0, 0.0])).unwrap();
        assert!(matches!(run_elimination(&z, &h), Err(SdpError::PerturbationTooLarge(_))));
        let singular = SymMat::from_diagonal(&[1.0, 0.0]);
        assert!(matches!(run_elimination(&singular, &h), Err(SdpError::Domain(_))));
    }

    #[test]
    fn eb_scan_block_diagonal_is_exact() {
        let z = SymMat::from_diagonal(&[2.0, 1.0, -1.0, -2.0]);
        let mut hb = DMatrix::zeros(4, 4);
        hb[(0, 1)] = 1.0;
        hb[(1, 0)] = 1.0;
        hb[(2, 2)] = 0.5;
        hb[(3, 2)] = -0.3;
        hb[(2, 3)] = -0.3;
        let h = SymMat::symmetrize(hb);
        let rep = eb_scan(&z, &h, &[1e-1, 1e-2, 1e-3, 1e-4]).unwrap();
        for (&l, r) in rep.lhs.iter().zip(&rep.refined_ratios) {
            assert!(l <= 1e-12 * z.norm2());
            assert!(r.is_none());
        }
        assert!(rep.to_csv().lines().count() == 5);
    }

    #[test]
    fn eb_scan_generic_bounded_ratio() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let z = gapped(5, 2, 0.5, &mut rng);
        let h = random_sym(5, &mut rng);
        let rep = eb_scan(&z, &h, &[1e-1, 1e-2, 1e-3, 1e-4]).unwrap();
        assert!(rep.refined_spread().unwrap() <= 10.0);
    }

    #[test]
    fn sylvester_deviation_cases() {
        let z = SymMat::from_diagonal(&[2.0, 1.0, -1.0, -3.0]);
        let mut hb = DMatrix::zeros(4, 4);
        hb[(2, 0)] = 0.01;
        hb[(0, 2)] = 0.01;
        hb[(3, 1)] = -0.02;
        hb[(1, 3)] = -0.02;
        let ho_only = SymMat::symmetrize(hb.clone());
        let dev = first_sylvester_deviation(&z, &ho_only).unwrap();
        assert!(dev.deviation <= 1e-12);

        let mut diag = DMatrix::zeros(4, 4);
        diag[(0, 0)] = 0.01;
        diag[(3, 3)] = -0.01;
        let dev = first_sylvester_deviation(&z, &SymMat::symmetrize(diag.clone())).unwrap();
        assert_eq!(dev.deviation, 0.0);

        let both = SymMat::symmetrize(hb + diag);
        let dev = first_sylvester_deviation(&z, &both).unwrap();
        assert!(dev.deviation <= dev.bound && dev.deviation > 0.0);

        let big = SymMat::from_diagonal(&[1.0, 0.0, 0.0, 0.0]);
        assert!(matches!(first_sylvester_deviation(&z, &big), Err(SdpError::Domain(_))));
    }
}
