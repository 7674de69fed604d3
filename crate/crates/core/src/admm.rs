//! ADMM in three-step and one-step fixed-point form.
//!
//! Three-step:
//!
//! ```text
//!   y⁺ = (AA*)⁻¹(b/σ − A(X/σ + S − C))
//!   S⁺ = Π(C − A*y⁺ − X/σ)
//!   X⁺ = X + σ(S⁺ + A*y⁺ − C)
//! ```
//!
//! One-step, on `Z = X − σS`:
//!
//! ```text
//!   Z⁺ = P(Z − 2Π(Z)) + Π(Z) + A†b + σP(C) − σC
//! ```
//!
//! with `X = Π(Z)` and `σS = Π(−Z)`.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SdpError};
use crate::linalg::{eig_sym, SpectralDecomp, SymMat};
use crate::problem::{ConstraintKernel, SdpProblem};

/// Initial iterate `Z⁰`.
#[derive(Clone, Debug)]
pub enum Init {
    Zero,
    /// Symmetrized standard Gaussian from ChaCha8 seeded with the value.
    Gaussian(u64),
    Explicit(SymMat),
}

#[derive(Clone, Debug)]
pub struct SolverConfig {
    pub sigma: f64,
    pub max_iter: usize,
    pub tol_rmax: f64,
    pub time_limit_secs: Option<f64>,
    /// Emit a record every `trace_every` iterations (the last one always).
    pub trace_every: usize,
    pub init: Init,
    /// Relative threshold for the ranks in [`IterationRecord`].
    pub rank_tau: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            sigma: 1.0,
            max_iter: 200_000,
            tol_rmax: 1e-10,
            time_limit_secs: None,
            trace_every: 1,
            init: Init::Gaussian(0),
            rank_tau: 1e-8,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(SdpError::domain(format!("sigma must be positive, got {}", self.sigma)));
        }
        if !(self.tol_rmax > 0.0) {
            return Err(SdpError::domain(format!(
                "tol_rmax must be positive, got {}",
                self.tol_rmax
            )));
        }
        if self.trace_every == 0 {
            return Err(SdpError::domain("trace_every must be at least 1"));
        }
        if !(self.rank_tau > 0.0) {
            return Err(SdpError::domain("rank_tau must be positive"));
        }
        Ok(())
    }

    pub fn initial_z(&self, n: usize) -> Result<SymMat> {
        match &self.init {
            Init::Zero => Ok(SymMat::zeros(n)),
            Init::Gaussian(seed) => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let data: Vec<f64> = (0..n * n)
                    .map(|_| rng.sample::<f64, _>(StandardNormal))
                    .collect();
                Ok(SymMat::symmetrize(DMatrix::from_vec(n, n, data)))
            }
            Init::Explicit(z) => {
                if z.dim() != n {
                    return Err(SdpError::dim(format!(
                        "explicit Z0 is {}x{}, expected {n}x{n}",
                        z.dim(),
                        z.dim()
                    )));
                }
                Ok(z.clone())
            }
        }
    }
}

/// The one-step map with its constant term `A†b + σP(C) − σC` cached.
#[derive(Clone, Debug)]
pub struct AdmmMap {
    sigma: f64,
    constant: SymMat,
}

impl AdmmMap {
    pub fn new(p: &SdpProblem, kernel: &ConstraintKernel, sigma: f64) -> Self {
        let pc = kernel.project_range(p.c());
        let constant = &(kernel.pinv_b() + &pc.scale(sigma)) - &p.c().scale(sigma);
        AdmmMap { sigma, constant }
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Applies the map given the spectral decomposition of `z`.
    pub fn step_decomposed(
        &self,
        kernel: &ConstraintKernel,
        z: &SymMat,
        decomp: &SpectralDecomp,
    ) -> SymMat {
        let x = decomp.psd_part();
        let inner = z - &x.scale(2.0);
        let mut out = kernel.project_range(&inner);
        out += &x;
        out += &self.constant;
        out
    }

    pub fn step(&self, kernel: &ConstraintKernel, z: &SymMat) -> Result<SymMat> {
        let d = eig_sym(z)?;
        Ok(self.step_decomposed(kernel, z, &d))
    }
}

/// One application of the fixed-point map.
pub fn step_fixed_point(
    p: &SdpProblem,
    kernel: &ConstraintKernel,
    sigma: f64,
    z: &SymMat,
) -> Result<SymMat> {
    check_dim(p, z, "Z")?;
    AdmmMap::new(p, kernel, sigma).step(kernel, z)
}

/// `y = (AA*)⁻¹(b/σ − A(X/σ + S − C))`.
pub fn recover_y(
    p: &SdpProblem,
    kernel: &ConstraintKernel,
    sigma: f64,
    x: &SymMat,
    s: &SymMat,
) -> Result<DVector<f64>> {
    let inner = &(&x.scale(1.0 / sigma) + s) - p.c();
    let rhs = p.b() / sigma - p.apply_a(&inner)?;
    Ok(kernel.gram_solve(&rhs))
}

/// One classical three-step update; returns `(y⁺, S⁺, X⁺)`.
pub fn step_three(
    p: &SdpProblem,
    kernel: &ConstraintKernel,
    sigma: f64,
    x: &SymMat,
    s: &SymMat,
) -> Result<(DVector<f64>, SymMat, SymMat)> {
    check_dim(p, x, "X")?;
    check_dim(p, s, "S")?;
    let y = recover_y(p, kernel, sigma, x, s)?;
    let aty = p.apply_at(&y)?;
    let arg = &(p.c() - &aty) - &x.scale(1.0 / sigma);
    let s_new = eig_sym(&arg)?.psd_part();
    let x_new = x + &(&(&s_new + &aty) - p.c()).scale(sigma);
    Ok((y, s_new, x_new))
}

fn check_dim(p: &SdpProblem, a: &SymMat, name: &str) -> Result<()> {
    if a.dim() != p.n() {
        return Err(SdpError::dim(format!(
            "{name} is {}x{}, expected {}x{}",
            a.dim(),
            a.dim(),
            p.n(),
            p.n()
        )));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    pub r_p: f64,
    pub r_d: f64,
    pub r_gap: f64,
    pub r_max: f64,
}

/// Relative primal infeasibility, dual infeasibility and duality gap.
pub fn residuals(p: &SdpProblem, x: &SymMat, y: &DVector<f64>, s: &SymMat) -> Result<Residuals> {
    check_dim(p, x, "X")?;
    check_dim(p, s, "S")?;
    let r_p = (p.apply_a(x)? - p.b()).norm() / (1.0 + p.b().norm());
    let dual = &(&p.apply_at(y)? + s) - p.c();
    let r_d = dual.norm_fro() / (1.0 + p.c().norm_fro());
    let pobj = p.c().inner(x);
    let dobj = p.b().dot(y);
    let r_gap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());
    Ok(Residuals {
        r_p,
        r_d,
        r_gap,
        r_max: r_p.max(r_d).max(r_gap),
    })
}

#[derive(Clone, Debug)]
pub struct SolverState {
    pub k: usize,
    pub z: SymMat,
    pub x: SymMat,
    pub y: DVector<f64>,
    pub s: SymMat,
    pub residuals: Option<Residuals>,
    pub decomp: SpectralDecomp,
}

impl SolverState {
    fn new(k: usize, z: SymMat, decomp: SpectralDecomp, sigma: f64, y: DVector<f64>) -> Self {
        let x = decomp.psd_part();
        let s = decomp.nsd_part().scale(1.0 / sigma);
        SolverState {
            k,
            z,
            x,
            y,
            s,
            residuals: None,
            decomp,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub k: usize,
    pub r_p: f64,
    pub r_d: f64,
    pub r_gap: f64,
    pub r_max: f64,
    pub rank_x: usize,
    pub rank_s: usize,
    pub lam_min_abs_z: f64,
    pub norm_z_diff: f64,
}

pub const TRACE_HEADER: &str = "k,r_p,r_d,r_gap,r_max,rank_X,rank_S,lam_min_absZ,norm_Z_diff";

impl IterationRecord {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{:e},{:e},{:e},{:e},{},{},{:e},{:e}",
            self.k,
            self.r_p,
            self.r_d,
            self.r_gap,
            self.r_max,
            self.rank_x,
            self.rank_s,
            self.lam_min_abs_z,
            self.norm_z_diff
        )
    }

    pub fn is_finite(&self) -> bool {
        [
            self.r_p,
            self.r_d,
            self.r_gap,
            self.r_max,
            self.lam_min_abs_z,
            self.norm_z_diff,
        ]
        .iter()
        .all(|v| v.is_finite())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Converged,
    IterLimit,
    TimeLimit,
    NumericalFailure,
}

impl Status {
    pub fn as_str(&self) -> &'static str {
        match self {
            Status::Converged => "converged",
            Status::IterLimit => "iter_limit",
            Status::TimeLimit => "time_limit",
            Status::NumericalFailure => "numerical_failure",
        }
    }
}

#[derive(Clone, Debug)]
pub struct SolveOutput {
    pub state: SolverState,
    pub records: Vec<IterationRecord>,
    pub status: Status,
    pub elapsed_secs: f64,
    /// Set when the status is [`Status::NumericalFailure`].
    pub failure: Option<String>,
}

/// What the observer of [`solve_with`] sees after each step.
pub struct StepView<'a> {
    pub k: usize,
    pub z_prev: &'a SymMat,
    pub z: &'a SymMat,
    pub decomp: &'a SpectralDecomp,
    pub y: &'a DVector<f64>,
    pub residuals: &'a Residuals,
}

/// Counts `(rank X, rank S, min |λ|)` for a decomposition of `Z`.
pub fn iterate_ranks(d: &SpectralDecomp, tau: f64) -> (usize, usize, f64) {
    let (pos, neg) = d.inertia(tau);
    (pos, neg, d.min_abs_eigenvalue())
}

pub fn solve(p: &SdpProblem, cfg: &SolverConfig) -> Result<SolveOutput> {
    let kernel = ConstraintKernel::new(p)?;
    solve_with(p, &kernel, cfg, |_| {})
}

/// Runs the one-step iteration, calling `observer` after every step.
pub fn solve_with(
    p: &SdpProblem,
    kernel: &ConstraintKernel,
    cfg: &SolverConfig,
    mut observer: impl FnMut(&StepView<'_>),
) -> Result<SolveOutput> {
    cfg.validate()?;
    let n = p.n();
    let sigma = cfg.sigma;
    let map = AdmmMap::new(p, kernel, sigma);
    let start = Instant::now();

    let z0 = cfg.initial_z(n)?;
    let d0 = eig_sym(&z0)?;
    let mut state = SolverState::new(0, z0, d0, sigma, DVector::zeros(p.m()));
    let mut records = Vec::new();
    let mut pending: Option<IterationRecord> = None;

    let finish = |state: SolverState,
                  mut records: Vec<IterationRecord>,
                  pending: Option<IterationRecord>,
                  status: Status,
                  failure: Option<String>| {
        if let Some(rec) = pending {
            if records.last().map(|r: &IterationRecord| r.k) != Some(rec.k) {
                records.push(rec);
            }
        }
        SolveOutput {
            state,
            records,
            status,
            elapsed_secs: start.elapsed().as_secs_f64(),
            failure,
        }
    };

    for k in 1..=cfg.max_iter {
        if let Some(limit) = cfg.time_limit_secs {
            if start.elapsed().as_secs_f64() > limit {
                return Ok(finish(state, records, pending, Status::TimeLimit, None));
            }
        }
        let y = recover_y(p, kernel, sigma, &state.x, &state.s)?;
        let z_new = map.step_decomposed(kernel, &state.z, &state.decomp);
        let d_new = match eig_sym(&z_new) {
            Ok(d) => d,
            Err(e) => {
                let msg = e.to_string();
                return Ok(finish(state, records, pending, Status::NumericalFailure, Some(msg)));
            }
        };
        let diff = (&z_new - &state.z).norm_fro();
        let mut next = SolverState::new(k, z_new, d_new, sigma, y);
        let res = residuals(p, &next.x, &next.y, &next.s)?;
        next.residuals = Some(res);
        let (rank_x, rank_s, lam_min) = iterate_ranks(&next.decomp, cfg.rank_tau);
        let rec = IterationRecord {
            k,
            r_p: res.r_p,
            r_d: res.r_d,
            r_gap: res.r_gap,
            r_max: res.r_max,
            rank_x,
            rank_s,
            lam_min_abs_z: lam_min,
            norm_z_diff: diff,
        };
        if !rec.is_finite() {
            let msg = format!("non-finite residuals at iteration {k}");
            return Ok(finish(state, records, pending, Status::NumericalFailure, Some(msg)));
        }
        observer(&StepView {
            k,
            z_prev: &state.z,
            z: &next.z,
            decomp: &next.decomp,
            y: &next.y,
            residuals: &res,
        });
        state = next;
        let converged = res.r_max <= cfg.tol_rmax;
        if k % cfg.trace_every == 0 || converged {
            records.push(rec);
            pending = None;
        } else {
            pending = Some(rec);
        }
        if converged {
            return Ok(finish(state, records, pending, Status::Converged, None));
        }
    }
    Ok(finish(state, records, pending, Status::IterLimit, None))
}

/// Keeps applying the map until `‖ΔZ‖_F` stops decreasing or drops below
/// `tol·max(1, ‖Z‖_F)`. Returns the last iterate and its step length.
pub fn polish(
    map: &AdmmMap,
    kernel: &ConstraintKernel,
    z: &SymMat,
    tol: f64,
    max_iter: usize,
) -> Result<(SymMat, f64)> {
    let mut z = z.clone();
    let mut best = f64::INFINITY;
    let mut stalls = 0;
    for _ in 0..max_iter {
        let next = map.step(kernel, &z)?;
        let diff = (&next - &z).norm_fro();
        z = next;
        if diff <= tol * z.norm_fro().max(1.0) {
            return Ok((z, diff));
        }
        if diff < best {
            best = diff;
            stalls = 0;
        } else {
            stalls += 1;
            if stalls >= 50 {
                return Ok((z, diff));
            }
        }
    }
    Ok((z, best))
}

/// Both sides of
/// `‖Z⁺ − Z‖² = ‖P(X − X̃)‖² + σ²‖P⊥(S − C)‖²` with `X̃ = A†b`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ZDifference {
    pub lhs: f64,
    pub rhs: f64,
    /// `|lhs − rhs| / max(1, lhs, rhs)`.
    pub gap: f64,
}

pub fn z_difference_identity(
    p: &SdpProblem,
    kernel: &ConstraintKernel,
    sigma: f64,
    z: &SymMat,
) -> Result<ZDifference> {
    check_dim(p, z, "Z")?;
    let map = AdmmMap::new(p, kernel, sigma);
    let d = eig_sym(z)?;
    Ok(z_difference_with(p, kernel, &map, z, &d))
}

pub(crate) fn z_difference_with(
    p: &SdpProblem,
    kernel: &ConstraintKernel,
    map: &AdmmMap,
    z: &SymMat,
    d: &SpectralDecomp,
) -> ZDifference {
    let z_next = map.step_decomposed(kernel, z, d);
    let lhs = (&z_next - z).norm_fro().powi(2);
    let x = d.psd_part();
    let sigma_s = d.nsd_part();
    let px = kernel.project_range(&(&x - kernel.pinv_b()));
    let ps = kernel.project_null(&(&sigma_s - &p.c().scale(map.sigma())));
    let rhs = px.norm_fro().powi(2) + ps.norm_fro().powi(2);
    ZDifference {
        lhs,
        rhs,
        gap: (lhs - rhs).abs() / lhs.max(rhs).max(1.0),
    }
}

/// Run metadata stored next to a trace.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TraceMeta {
    pub instance: String,
    pub sigma: f64,
    pub seed: Option<u64>,
    pub status: Status,
}

pub fn trace_csv(records: &[IterationRecord]) -> String {
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(out, "{}", r.csv_row());
    }
    out
}

pub fn write_trace_csv(records: &[IterationRecord], path: impl AsRef<Path>) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    f.write_all(trace_csv(records).as_bytes())?;
    f.flush()?;
    Ok(())
}

/// Parses a trace CSV written by [`trace_csv`]; `#` lines are skipped.
pub fn read_trace_csv(text: &str) -> Result<Vec<IterationRecord>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 || line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        let err = || SdpError::Format {
            line: i + 1,
            msg: "malformed trace row".into(),
        };
        if f.len() != 9 {
            return Err(err());
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| err());
        let int = |s: &str| s.parse::<usize>().map_err(|_| err());
        out.push(IterationRecord {
            k: int(f[0])?,
            r_p: num(f[1])?,
            r_d: num(f[2])?,
            r_gap: num(f[3])?,
            r_max: num(f[4])?,
            rank_x: int(f[5])?,
            rank_s: int(f[6])?,
            lam_min_abs_z: num(f[7])?,
            norm_z_diff: num(f[8])?,
        });
    }
    Ok(out)
}

pub fn trace_json(meta: &TraceMeta, records: &[IterationRecord]) -> Result<String> {
    #[derive(Serialize)]
    struct Doc<'a> {
        metadata: &'a TraceMeta,
        records: &'a [IterationRecord],
    }
    Ok(serde_json::to_string_pretty(&Doc {
        metadata: meta,
        records,
    })?)
}
