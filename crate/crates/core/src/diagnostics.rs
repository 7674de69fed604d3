//! Strict complementarity, nondegeneracy, face projections, rank
//! identification, rate fits and backward-error terms.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::admm::{self, AdmmMap, IterationRecord, SolveOutput, SolverConfig};
use crate::error::{Result, SdpError};
use crate::linalg::{eig_sym, null_space, numerical_rank, svec, svec_basis, svec_len, SpectralDecomp, SymMat};
use crate::problem::{ConstraintKernel, SdpProblem};

pub const DEFAULT_TAU: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplementarityReport {
    pub n: usize,
    pub r: usize,
    pub s: usize,
    pub lam_min_abs_z: f64,
    /// `min(λ_r, −λ_{r+1})`.
    pub eigengap: f64,
    pub sc_holds: bool,
}

pub fn sc_check(zstar: &SymMat, tau: f64) -> Result<ComplementarityReport> {
    Ok(sc_check_decomp(&eig_sym(zstar)?, tau))
}

pub fn sc_check_decomp(d: &SpectralDecomp, tau: f64) -> ComplementarityReport {
    let n = d.dim();
    let (r, s) = d.inertia(tau);
    let lam = &d.lambda;
    let upper = if r > 0 { lam[r - 1] } else { f64::INFINITY };
    let lower = if r < n { -lam[r] } else { f64::INFINITY };
    ComplementarityReport {
        n,
        r,
        s,
        lam_min_abs_z: d.min_abs_eigenvalue(),
        eigengap: upper.min(lower),
        sc_holds: r + s == n,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NondegeneracyReport {
    pub r: usize,
    pub s: usize,
    pub rank_w1: usize,
    pub rank_w2: usize,
    pub rank_joint: usize,
    pub dual_rank_w1: usize,
    pub dual_rank_w2: usize,
    pub dual_rank_joint: usize,
    pub primal_nd: bool,
    pub dual_nd: bool,
}

/// Columns `svec(Q_B E Q_Bᵀ)` over an orthonormal basis `E` of `S^k`, where
/// `Q_B` holds `k` columns of `q` starting at `start`.
fn face_basis(q: &DMatrix<f64>, start: usize, k: usize) -> DMatrix<f64> {
    let n = q.nrows();
    let qb = q.columns(start, k).into_owned();
    let cols: Vec<DVector<f64>> = (0..svec_len(k))
        .map(|e| svec(&svec_basis(k, e).congruence(&qb)))
        .collect();
    if cols.is_empty() {
        DMatrix::zeros(svec_len(n), 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

fn hcat(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(a.nrows(), a.ncols() + b.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((0, a.ncols()), b.shape()).copy_from(b);
    out
}

fn rank_or_zero(m: &DMatrix<f64>, tau: f64) -> usize {
    if m.ncols() == 0 {
        0
    } else {
        numerical_rank(m, tau)
    }
}

/// Rank test for `N_X⋆ ∩ R(A*) = {0}` (primal) and `N_S⋆ ∩ N(A) = {0}`
/// (dual): the intersection is trivial iff
/// `rank W₁ + rank W₂ = rank [W₁ W₂]`.
pub fn nd_check(p: &SdpProblem, d: &SpectralDecomp, tau: f64) -> Result<NondegeneracyReport> {
    let n = p.n();
    if d.dim() != n {
        return Err(SdpError::dim(format!(
            "decomposition is {}x{}, problem has n = {n}",
            d.dim(),
            d.dim()
        )));
    }
    let (r, s) = d.inertia(tau);

    let w1 = p.svec_matrix().transpose();
    let w2 = face_basis(&d.q, r, n - r);
    let rank_w1 = rank_or_zero(&w1, tau);
    let rank_w2 = rank_or_zero(&w2, tau);
    let rank_joint = rank_or_zero(&hcat(&w1, &w2), tau);

    let null_a = null_space(p.svec_matrix(), 1e-10);
    let dw1 = if p.m() == 0 {
        DMatrix::identity(svec_len(n), svec_len(n))
    } else {
        null_a
    };
    let dw2 = face_basis(&d.q, 0, n - s);
    let dual_rank_w1 = rank_or_zero(&dw1, tau);
    let dual_rank_w2 = rank_or_zero(&dw2, tau);
    let dual_rank_joint = rank_or_zero(&hcat(&dw1, &dw2), tau);

    Ok(NondegeneracyReport {
        r,
        s,
        rank_w1,
        rank_w2,
        rank_joint,
        dual_rank_w1,
        dual_rank_w2,
        dual_rank_joint,
        primal_nd: rank_w1 + rank_w2 == rank_joint,
        dual_nd: dual_rank_w1 + dual_rank_w2 == dual_rank_joint,
    })
}

/// Block geometry of the faces at `Z⋆ = Q diag(λ) Qᵀ`, with `r` positive and
/// `s` negative eigenvalues. `T_S⋆` leaves out the leading `r×r` block and
/// `T_X⋆` the trailing `s×s` block; when `r + s < n` the middle indices ride
/// with the opposite side on each.
#[derive(Clone, Debug)]
pub struct FaceSplit {
    pub q: DMatrix<f64>,
    pub r: usize,
    pub s: usize,
}

impl FaceSplit {
    pub fn new(d: &SpectralDecomp, tau: f64) -> Self {
        let (r, s) = d.inertia(tau);
        FaceSplit { q: d.q.clone(), r, s }
    }

    pub fn n(&self) -> usize {
        self.q.nrows()
    }

    fn keep(&self, x: &SymMat, r0: usize, k: usize, inside: bool) -> SymMat {
        let n = self.n();
        let mut t = x.congruence_t(&self.q).into_matrix();
        for j in 0..n {
            for i in 0..n {
                let in_block = (r0..r0 + k).contains(&i) && (r0..r0 + k).contains(&j);
                if in_block != inside {
                    t[(i, j)] = 0.0;
                }
            }
        }
        SymMat::symmetrize(t).congruence(&self.q)
    }

    /// `Π_{T_S⋆}(X)`.
    pub fn project_ts(&self, x: &SymMat) -> SymMat {
        self.keep(x, 0, self.r, false)
    }

    /// `Π_{N_S⋆}(X)`.
    pub fn project_ns(&self, x: &SymMat) -> SymMat {
        self.keep(x, 0, self.r, true)
    }

    /// `Π_{T_X⋆}(S)`.
    pub fn project_tx(&self, s: &SymMat) -> SymMat {
        self.keep(s, self.n() - self.s, self.s, false)
    }

    /// `Π_{N_X⋆}(S)`.
    pub fn project_nx(&self, s: &SymMat) -> SymMat {
        self.keep(s, self.n() - self.s, self.s, true)
    }

    /// `(QᵀHQ)_O`, rows after `r`, columns up to `r`.
    pub fn off_block(&self, h: &SymMat) -> DMatrix<f64> {
        let n = self.n();
        let qx = self.q.columns(0, self.r);
        let qs = self.q.columns(self.r, n - self.r);
        qs.transpose() * h.as_matrix() * qx
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FaceNorms {
    /// `‖Π_{T_S⋆}(X)‖_F`.
    pub ts_x: f64,
    /// `‖Π_{T_X⋆}(σS)‖_F`.
    pub tx_s: f64,
    /// `‖H_O‖_F` for `H = X − σS − Z⋆`.
    pub h_o: f64,
    pub sc_holds: bool,
}

/// Face-projection norms of `(X, σS)` relative to `Z⋆`.
pub fn face_projections(
    d: &SpectralDecomp,
    x: &SymMat,
    s: &SymMat,
    sigma: f64,
    tau: f64,
) -> Result<FaceNorms> {
    let n = d.dim();
    if x.dim() != n || s.dim() != n {
        return Err(SdpError::dim("face_projections: dimension mismatch"));
    }
    let split = FaceSplit::new(d, tau);
    let ss = s.scale(sigma);
    // Qᵀ Z⋆ Q is diagonal, so H_O only sees X − σS.
    let h_o = split.off_block(&(x - &ss)).norm();
    Ok(FaceNorms {
        ts_x: split.project_ts(x).norm_fro(),
        tx_s: split.project_tx(&ss).norm_fro(),
        h_o,
        sc_holds: split.r + split.s == n,
    })
}

/// First iteration from which both ranks stay at the final values.
pub fn rank_trace(records: &[IterationRecord], fin: &ComplementarityReport) -> Option<usize> {
    let mut k_id = None;
    for rec in records.iter().rev() {
        if rec.rank_x == fin.r && rec.rank_s == fin.s {
            k_id = Some(rec.k);
        } else {
            break;
        }
    }
    k_id
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub sequence_name: String,
    /// Half-open index range `[start, end)` into the fitted sequence.
    pub start: usize,
    pub end: usize,
    pub rho_hat: f64,
    pub r2: f64,
}

pub const MIN_FIT_WINDOW: usize = 10;

/// Fits `values[k] ≈ c·ρ^k` on the trailing `window` entries.
pub fn rate_fit(values: &[f64], window: usize) -> Result<RateFit> {
    if window > values.len() {
        return Err(SdpError::domain(format!(
            "window {window} exceeds sequence length {}",
            values.len()
        )));
    }
    rate_fit_range(values, values.len() - window, values.len(), "values")
}

pub fn rate_fit_range(values: &[f64], start: usize, end: usize, name: &str) -> Result<RateFit> {
    if end > values.len() || start > end {
        return Err(SdpError::domain("fit range out of bounds"));
    }
    let w = end - start;
    if w < MIN_FIT_WINDOW {
        return Err(SdpError::domain(format!(
            "fit window needs at least {MIN_FIT_WINDOW} points, got {w}"
        )));
    }
    let seg = &values[start..end];
    if let Some(i) = seg.iter().position(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(SdpError::domain(format!(
            "value {} at index {} is not positive",
            seg[i],
            start + i
        )));
    }
    let ys: Vec<f64> = seg.iter().map(|v| v.ln()).collect();
    let k = w as f64;
    let mx = (k - 1.0) / 2.0;
    let my = ys.iter().sum::<f64>() / k;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (i, y) in ys.iter().enumerate() {
        let dx = i as f64 - mx;
        sxy += dx * (y - my);
        sxx += dx * dx;
    }
    let slope = sxy / sxx;
    let sst: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let sse: f64 = ys
        .iter()
        .enumerate()
        .map(|(i, y)| (y - (my + slope * (i as f64 - mx))).powi(2))
        .sum();
    let r2 = if sst == 0.0 { 1.0 } else { 1.0 - sse / sst };
    Ok(RateFit {
        sequence_name: name.to_string(),
        start,
        end,
        rho_hat: slope.exp(),
        r2,
    })
}

/// Fit window on `values`: entries from `first` on, cut where the sequence
/// first drops to `floor` or below, then the trailing `frac` of what is left
/// (at least [`MIN_FIT_WINDOW`] entries).
pub fn tail_window(values: &[f64], first: usize, floor: f64, frac: f64) -> Option<(usize, usize)> {
    if first >= values.len() {
        return None;
    }
    let end = values[first..]
        .iter()
        .position(|&v| !(v > floor))
        .map(|i| first + i)
        .unwrap_or(values.len());
    let span = end.saturating_sub(first);
    if span < MIN_FIT_WINDOW {
        return None;
    }
    let w = ((span as f64 * frac).ceil() as usize).clamp(MIN_FIT_WINDOW, span);
    Some((end - w, end))
}

/// Right-hand-side terms of the regularized backward-error bound for KKT,
/// with `X̃ = A†b`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BackwardErrorTerms {
    /// `‖P(X − X̃)‖_F`
    pub primal_range: f64,
    /// `‖P⊥(σS − σC)‖_F`
    pub dual_null: f64,
    /// `|<X, σC> + <X̃, σS> − <X̃, σC>|`
    pub gap: f64,
    /// `[−λ_min(X)]₊`
    pub x_neg: f64,
    /// `[−λ_min(σS)]₊`
    pub s_neg: f64,
    /// `‖Π_{T_S⋆}(X)‖_F`
    pub x_face: f64,
    /// `‖Π_{T_X⋆}(σS)‖_F`
    pub s_face: f64,
}

impl BackwardErrorTerms {
    pub fn as_list(&self) -> [(&'static str, f64); 7] {
        [
            ("primal_range", self.primal_range),
            ("dual_null", self.dual_null),
            ("gap", self.gap),
            ("x_neg", self.x_neg),
            ("s_neg", self.s_neg),
            ("x_face", self.x_face),
            ("s_face", self.s_face),
        ]
    }

    pub fn max(&self) -> f64 {
        self.as_list().iter().map(|t| t.1).fold(0.0, f64::max)
    }
}

pub fn backward_error_terms(
    p: &SdpProblem,
    kernel: &ConstraintKernel,
    d: &SpectralDecomp,
    x: &SymMat,
    s: &SymMat,
    sigma: f64,
    tau: f64,
) -> Result<BackwardErrorTerms> {
    let n = p.n();
    if x.dim() != n || s.dim() != n || d.dim() != n {
        return Err(SdpError::dim("backward_error_terms: dimension mismatch"));
    }
    let xt = kernel.pinv_b();
    let ss = s.scale(sigma);
    let sc = p.c().scale(sigma);
    let split = FaceSplit::new(d, tau);
    let lmin_x = eig_sym(x)?.lambda[n - 1];
    let lmin_s = eig_sym(&ss)?.lambda[n - 1];
    Ok(BackwardErrorTerms {
        primal_range: kernel.project_range(&(x - xt)).norm_fro(),
        dual_null: kernel.project_null(&(&ss - &sc)).norm_fro(),
        gap: (x.inner(&sc) + xt.inner(&ss) - xt.inner(&sc)).abs(),
        x_neg: (-lmin_x).max(0.0),
        s_neg: (-lmin_s).max(0.0),
        x_face: split.project_ts(x).norm_fro(),
        s_face: split.project_tx(&ss).norm_fro(),
    })
}

/// A stand-in for the limit point: the final iterate pushed further along the
/// map until its step length stops shrinking.
pub fn refine_limit(
    p: &SdpProblem,
    kernel: &ConstraintKernel,
    sigma: f64,
    z_final: &SymMat,
) -> Result<(SymMat, f64)> {
    let map = AdmmMap::new(p, kernel, sigma);
    admm::polish(&map, kernel, z_final, 1e-15, 200_000)
}

/// Per-iteration measurements of a replayed run against a reference `Z⋆`.
#[derive(Clone, Debug, Default, Serialize)]
pub struct RunAnalysis {
    pub k: Vec<usize>,
    /// `‖Z^k − Z⋆‖_F`
    pub h_norm: Vec<f64>,
    /// `‖H_O^k‖_F`
    pub h_o_norm: Vec<f64>,
    /// `‖Π_{T_S⋆}(X^k)‖_F`
    pub ts_x: Vec<f64>,
    /// `‖Π_{T_X⋆}(σS^k)‖_F`
    pub tx_s: Vec<f64>,
    /// `‖Z^k − Z^{k−1}‖_F`
    pub z_diff: Vec<f64>,
    /// Relative gap of the Z-difference identity evaluated at `Z^{k−1}`.
    pub zdiff_gap: Vec<f64>,
    /// `‖Z^{k−1} − Z̄‖² − ‖Z^k − Z^{k−1}‖² − ‖Z^k − Z̄‖²` against the final
    /// iterate `Z̄`; nonnegative up to rounding for a firmly nonexpansive
    /// step toward a fixed point.
    pub fejer_margin: Vec<f64>,
}

/// Replays the solve (deterministic for a fixed configuration) and records
/// distances to the reference `zstar` and, for the Fejér margin, to the final
/// iterate `z_final` of the original run.
pub fn analyze_run(
    p: &SdpProblem,
    kernel: &ConstraintKernel,
    cfg: &SolverConfig,
    zstar: &SymMat,
    z_final: &SymMat,
    tau: f64,
) -> Result<(SolveOutput, RunAnalysis)> {
    let dstar = eig_sym(zstar)?;
    let split = FaceSplit::new(&dstar, tau);
    let map = AdmmMap::new(p, kernel, cfg.sigma);
    let mut an = RunAnalysis::default();
    let mut prev_decomp: Option<SpectralDecomp> = None;
    let z0 = cfg.initial_z(p.n())?;
    let d0 = eig_sym(&z0)?;
    let mut err: Option<SdpError> = None;
    let out = admm::solve_with(p, kernel, cfg, |v| {
        let dprev = prev_decomp.take().unwrap_or_else(|| d0.clone());
        let zd = admm::z_difference_with(p, kernel, &map, v.z_prev, &dprev);
        let h = v.z - zstar;
        let f_now = (v.z - z_final).norm_fro();
        let f_prev = (v.z_prev - z_final).norm_fro();
        let step = (v.z - v.z_prev).norm_fro();
        let x = v.decomp.psd_part();
        let ss = v.decomp.nsd_part();
        an.k.push(v.k);
        an.h_norm.push(h.norm_fro());
        an.h_o_norm.push(split.off_block(&h).norm());
        an.ts_x.push(split.project_ts(&x).norm_fro());
        an.tx_s.push(split.project_tx(&ss).norm_fro());
        an.z_diff.push(step);
        an.zdiff_gap.push(zd.gap);
        an.fejer_margin.push(f_prev * f_prev - step * step - f_now * f_now);
        prev_decomp = Some(v.decomp.clone());
        if !zd.gap.is_finite() && err.is_none() {
            err = Some(SdpError::numerical("non-finite Z-difference gap"));
        }
    })?;
    if let Some(e) = err {
        return Err(e);
    }
    Ok((out, an))
}
