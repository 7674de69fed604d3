//! Problem data, the constraint operator and instance generators.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SdpError};
use crate::linalg::{numerical_rank, smat, svec, svec_len, SymMat};

const INDEPENDENCE_TOL: f64 = 1e-10;

/// `min <C, X> s.t. <A_i, X> = b_i, X ⪰ 0`.
#[derive(Clone, Debug)]
pub struct SdpProblem {
    n: usize,
    c: SymMat,
    a: Vec<SymMat>,
    b: DVector<f64>,
    /// Row `i` is `svec(A_i)`.
    w: DMatrix<f64>,
}

impl SdpProblem {
    /// Validates dimensions and linear independence of the `A_i`.
    pub fn new(c: SymMat, a: Vec<SymMat>, b: DVector<f64>) -> Result<Self> {
        let n = c.dim();
        if n == 0 {
            return Err(SdpError::dim("matrix dimension must be positive"));
        }
        if a.len() != b.len() {
            return Err(SdpError::dim(format!(
                "{} constraint matrices but b has length {}",
                a.len(),
                b.len()
            )));
        }
        if let Some(i) = a.iter().position(|ai| ai.dim() != n) {
            return Err(SdpError::dim(format!(
                "A_{} is {}x{}, expected {n}x{n}",
                i + 1,
                a[i].dim(),
                a[i].dim()
            )));
        }
        if b.iter().any(|v| !v.is_finite()) {
            return Err(SdpError::domain("b has non-finite entries"));
        }
        let m = a.len();
        let t = svec_len(n);
        if m > t {
            return Err(SdpError::Validation(format!(
                "m = {m} exceeds n(n+1)/2 = {t}"
            )));
        }
        let mut w = DMatrix::zeros(m, t);
        for (i, ai) in a.iter().enumerate() {
            w.set_row(i, &svec(ai).transpose());
        }
        if m > 0 {
            let rank = numerical_rank(&w, INDEPENDENCE_TOL);
            if rank < m {
                return Err(SdpError::Validation(format!(
                    "constraint matrices are linearly dependent (rank {rank} < m = {m})"
                )));
            }
        }
        Ok(SdpProblem { n, c, a, b, w })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.a.len()
    }

    pub fn c(&self) -> &SymMat {
        &self.c
    }

    pub fn a(&self) -> &[SymMat] {
        &self.a
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    /// The `m × n(n+1)/2` matrix whose rows are `svec(A_i)`.
    pub fn svec_matrix(&self) -> &DMatrix<f64> {
        &self.w
    }

    /// `A X = (<A_1, X>, …, <A_m, X>)`.
    pub fn apply_a(&self, x: &SymMat) -> Result<DVector<f64>> {
        if x.dim() != self.n {
            return Err(SdpError::dim(format!(
                "X is {}x{}, expected {}x{}",
                x.dim(),
                x.dim(),
                self.n,
                self.n
            )));
        }
        Ok(DVector::from_iterator(
            self.m(),
            self.a.iter().map(|ai| ai.inner(x)),
        ))
    }

    /// `A*y = Σ y_i A_i`.
    pub fn apply_at(&self, y: &DVector<f64>) -> Result<SymMat> {
        if y.len() != self.m() {
            return Err(SdpError::dim(format!(
                "y has length {}, expected {}",
                y.len(),
                self.m()
            )));
        }
        let mut out = DMatrix::zeros(self.n, self.n);
        for (ai, &yi) in self.a.iter().zip(y.iter()) {
            if yi != 0.0 {
                out += ai.as_matrix() * yi;
            }
        }
        Ok(SymMat::symmetrize(out))
    }
}

/// Factorization of `AA*` and an orthonormal basis of `R(A*)`.
#[derive(Clone, Debug)]
pub struct ConstraintKernel {
    n: usize,
    gram: DMatrix<f64>,
    gram_chol: Option<nalgebra::Cholesky<f64, nalgebra::Dyn>>,
    /// Columns: orthonormal basis of `R(A*)` in svec coordinates.
    basis: DMatrix<f64>,
    pinv_b: SymMat,
}

impl ConstraintKernel {
    pub fn new(p: &SdpProblem) -> Result<Self> {
        let n = p.n();
        let m = p.m();
        let t = svec_len(n);
        if m == 0 {
            return Ok(ConstraintKernel {
                n,
                gram: DMatrix::zeros(0, 0),
                gram_chol: None,
                basis: DMatrix::zeros(t, 0),
                pinv_b: SymMat::zeros(n),
            });
        }
        let w = p.svec_matrix();
        let gram = w * w.transpose();
        let chol = gram.clone().cholesky().ok_or_else(|| {
            SdpError::domain("AA* is singular; constraint matrices are dependent")
        })?;
        let basis = w.transpose().qr().q();
        let pinv_b = p.apply_at(&chol.solve(p.b()))?;
        Ok(ConstraintKernel {
            n,
            gram,
            gram_chol: Some(chol),
            basis,
            pinv_b,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    /// `A†b = A*(AA*)⁻¹b`, the least-norm solution of `AX = b`.
    pub fn pinv_b(&self) -> &SymMat {
        &self.pinv_b
    }

    /// `(AA*)⁻¹ v`.
    pub fn gram_solve(&self, v: &DVector<f64>) -> DVector<f64> {
        match &self.gram_chol {
            Some(c) => c.solve(v),
            None => DVector::zeros(0),
        }
    }

    /// `P H`, the orthogonal projection onto `R(A*)`.
    pub fn project_range(&self, h: &SymMat) -> SymMat {
        if self.basis.ncols() == 0 {
            return SymMat::zeros(self.n);
        }
        let v = svec(h);
        let coeffs = self.basis.tr_mul(&v);
        smat(&(&self.basis * coeffs), self.n).expect("basis rows match svec length")
    }

    /// `P⊥ H = H − P H`.
    pub fn project_null(&self, h: &SymMat) -> SymMat {
        h - &self.project_range(h)
    }
}

/// Degeneracy planted by [`generate_planted`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Degeneracy {
    None,
    PrimalNdFail,
}

/// Parameters of a planted instance.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PlantedSpec {
    pub n: usize,
    pub m: usize,
    pub r: usize,
    pub seed: u64,
    #[serde(default = "default_degeneracy")]
    pub degeneracy: Degeneracy,
    /// When set, the smallest planted eigenvalue of both `Λ_X` and `Λ_S` is
    /// pinned to this value, pushing the instance toward SC failure.
    #[serde(default)]
    pub near_sc_gap: Option<f64>,
}

fn default_degeneracy() -> Degeneracy {
    Degeneracy::None
}

impl PlantedSpec {
    pub fn new(n: usize, m: usize, r: usize, seed: u64) -> Self {
        PlantedSpec {
            n,
            m,
            r,
            seed,
            degeneracy: Degeneracy::None,
            near_sc_gap: None,
        }
    }

    pub fn with_degeneracy(mut self, d: Degeneracy) -> Self {
        self.degeneracy = d;
        self
    }
}

/// A known primal-dual optimal pair for a generated instance.
#[derive(Clone, Debug)]
pub struct PlantedCertificate {
    pub xstar: SymMat,
    pub ystar: DVector<f64>,
    pub sstar: SymMat,
    pub qstar: DMatrix<f64>,
    pub r: usize,
    pub s: usize,
}

#[derive(Serialize, Deserialize)]
struct CertificateJson {
    r: usize,
    s: usize,
    xstar: SymMat,
    ystar: Vec<f64>,
    sstar: SymMat,
    qstar: Vec<Vec<f64>>,
}

impl PlantedCertificate {
    /// `Z⋆ = X⋆ − σS⋆`.
    pub fn zstar(&self, sigma: f64) -> SymMat {
        &self.xstar - &self.sstar.scale(sigma)
    }

    /// KKT residuals `(‖AX⋆ − b‖, ‖A*y⋆ + S⋆ − C‖_F, |<X⋆, S⋆>|)`.
    pub fn kkt_residuals(&self, p: &SdpProblem) -> Result<(f64, f64, f64)> {
        let primal = (p.apply_a(&self.xstar)? - p.b()).norm();
        let dual = (&(&p.apply_at(&self.ystar)? + &self.sstar) - p.c()).norm_fro();
        let comp = self.xstar.inner(&self.sstar).abs();
        Ok((primal, dual, comp))
    }

    pub fn to_json(&self) -> Result<String> {
        let j = CertificateJson {
            r: self.r,
            s: self.s,
            xstar: self.xstar.clone(),
            ystar: self.ystar.iter().copied().collect(),
            sstar: self.sstar.clone(),
            qstar: (0..self.qstar.nrows())
                .map(|i| self.qstar.row(i).iter().copied().collect())
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&j)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let j: CertificateJson = serde_json::from_str(s)?;
        let n = j.qstar.len();
        if j.qstar.iter().any(|r| r.len() != n) {
            return Err(SdpError::dim("certificate Q⋆ is not square"));
        }
        Ok(PlantedCertificate {
            xstar: j.xstar,
            ystar: DVector::from_vec(j.ystar),
            sstar: j.sstar,
            qstar: DMatrix::from_fn(n, n, |i, k| j.qstar[i][k]),
            r: j.r,
            s: j.s,
        })
    }
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    // Column-major draw order.
    let data: Vec<f64> = (0..rows * cols)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect();
    DMatrix::from_vec(rows, cols, data)
}

fn gaussian_sym(rng: &mut ChaCha8Rng, n: usize) -> SymMat {
    SymMat::symmetrize(gaussian_matrix(rng, n, n))
}

/// Haar-distributed orthogonal matrix: QR of a Gaussian matrix with the sign of
/// `R`'s diagonal folded into `Q`.
fn random_orthogonal(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let qr = gaussian_matrix(rng, n, n).qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Generates an instance with a known optimal pair.
///
/// The PRNG is ChaCha8 seeded with `seed_from_u64(seed)`. Draws happen in
/// this order, each matrix column-major: the `n×n` Gaussian for `Q⋆`; `r`
/// uniforms on `[0.5, 2]` for `Λ_X`; `n−r` for `Λ_S`; `m` Gaussian `n×n`
/// matrices symmetrized as `(G + Gᵀ)/2` for the `A_i`; `m` Gaussians for `y⋆`;
/// and for [`Degeneracy::PrimalNdFail`] one more `(n−r)×(n−r)` Gaussian.
pub fn generate_planted(spec: &PlantedSpec) -> Result<(SdpProblem, PlantedCertificate)> {
    let PlantedSpec { n, m, r, seed, .. } = *spec;
    if r < 1 || r >= n {
        return Err(SdpError::domain(format!(
            "planted rank r = {r} must satisfy 1 <= r < n = {n}"
        )));
    }
    if m + 1 > svec_len(n) {
        return Err(SdpError::domain(format!(
            "m = {m} must be at most n(n+1)/2 - 1 = {}",
            svec_len(n) - 1
        )));
    }
    if spec.degeneracy == Degeneracy::PrimalNdFail && m == 0 {
        return Err(SdpError::domain("primal_nd_fail needs at least one constraint"));
    }
    if let Some(g) = spec.near_sc_gap {
        if !(g > 0.0 && g <= 0.5) {
            return Err(SdpError::domain(format!(
                "near_sc_gap must lie in (0, 0.5], got {g}"
            )));
        }
    }
    let s = n - r;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let q = random_orthogonal(&mut rng, n);
    let spread = Uniform::new_inclusive(0.5, 2.0).expect("valid range");
    let mut lam_x: Vec<f64> = (0..r).map(|_| rng.sample(spread)).collect();
    let mut lam_s: Vec<f64> = (0..s).map(|_| rng.sample(spread)).collect();
    if let Some(g) = spec.near_sc_gap {
        pin_smallest(&mut lam_x, g);
        pin_smallest(&mut lam_s, g);
    }

    let mut diag_x = vec![0.0; n];
    diag_x[..r].copy_from_slice(&lam_x);
    let mut diag_s = vec![0.0; n];
    diag_s[r..].copy_from_slice(&lam_s);
    let xstar = SymMat::from_diagonal(&diag_x).congruence(&q);
    let sstar = SymMat::from_diagonal(&diag_s).congruence(&q);

    let mut a: Vec<SymMat> = (0..m).map(|_| gaussian_sym(&mut rng, n)).collect();
    let ystar = DVector::from_iterator(m, (0..m).map(|_| rng.sample::<f64, _>(StandardNormal)));

    if spec.degeneracy == Degeneracy::PrimalNdFail {
        // Q⋆[0 0; 0 G]Q⋆ᵀ with <G, Λ_S> = 0 lies in N_X⋆ ∩ R(A*).
        let g = gaussian_sym(&mut rng, s);
        let ls = DMatrix::from_diagonal(&DVector::from_column_slice(&lam_s));
        let coef = g.as_matrix().dot(&ls) / ls.norm_squared();
        let g = g.as_matrix() - ls * coef;
        let g = &g / g.norm();
        let mut full = DMatrix::zeros(n, n);
        full.view_mut((r, r), (s, s)).copy_from(&g);
        a[0] = SymMat::symmetrize(full).congruence(&q);
    }

    let b = DVector::from_iterator(m, a.iter().map(|ai| ai.inner(&xstar)));
    let mut at_y = DMatrix::zeros(n, n);
    for (ai, &yi) in a.iter().zip(ystar.iter()) {
        at_y += ai.as_matrix() * yi;
    }
    let c = &SymMat::symmetrize(at_y) + &sstar;
    let problem = SdpProblem::new(c, a, b)?;
    let cert = PlantedCertificate {
        xstar,
        ystar,
        sstar,
        qstar: q,
        r,
        s,
    };
    Ok((problem, cert))
}

fn pin_smallest(v: &mut [f64], value: f64) {
    if let Some(i) = (0..v.len()).min_by(|&i, &j| v[i].total_cmp(&v[j])) {
        v[i] = value;
    }
}

/// MAXCUT relaxation `min <−L/4, X> s.t. diag(X) = 1`.
pub fn generate_maxcut(adjacency: &DMatrix<f64>) -> Result<SdpProblem> {
    let n = adjacency.nrows();
    if adjacency.ncols() != n {
        return Err(SdpError::dim("adjacency matrix must be square"));
    }
    for i in 0..n {
        if adjacency[(i, i)] != 0.0 {
            return Err(SdpError::domain(format!(
                "adjacency has nonzero diagonal entry at ({i}, {i})"
            )));
        }
        for j in 0..i {
            if adjacency[(i, j)] != adjacency[(j, i)] {
                return Err(SdpError::domain(format!(
                    "adjacency is not symmetric at ({i}, {j})"
                )));
            }
        }
    }
    let degree = DVector::from_iterator(n, (0..n).map(|i| adjacency.row(i).sum()));
    let laplacian = DMatrix::from_diagonal(&degree) - adjacency;
    let c = SymMat::new(laplacian * -0.25)?;
    let a = (0..n)
        .map(|i| {
            let mut d = vec![0.0; n];
            d[i] = 1.0;
            SymMat::from_diagonal(&d)
        })
        .collect();
    SdpProblem::new(c, a, DVector::from_element(n, 1.0))
}

/// Parses an edge list: one `i j` pair per line, 1-based, with an optional
/// leading `n` line of the form `n <count>`. Lines starting with `#` are ignored.
pub fn parse_edge_list(text: &str) -> Result<DMatrix<f64>> {
    let mut declared: Option<usize> = None;
    let mut edges = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        let bad = |msg: &str| SdpError::Format {
            line: lineno + 1,
            msg: msg.to_string(),
        };
        if toks[0] == "n" {
            let v = toks
                .get(1)
                .and_then(|t| t.parse::<usize>().ok())
                .ok_or_else(|| bad("expected `n <count>`"))?;
            declared = Some(v);
            continue;
        }
        if toks.len() != 2 {
            return Err(bad("expected two vertex indices"));
        }
        let i: usize = toks[0].parse().map_err(|_| bad("bad vertex index"))?;
        let j: usize = toks[1].parse().map_err(|_| bad("bad vertex index"))?;
        if i == 0 || j == 0 {
            return Err(bad("vertex indices are 1-based"));
        }
        if i == j {
            return Err(bad("self-loops are not allowed"));
        }
        edges.push((i - 1, j - 1));
    }
    let inferred = edges.iter().map(|&(i, j)| i.max(j) + 1).max().unwrap_or(0);
    let n = declared.unwrap_or(inferred);
    if n < inferred {
        return Err(SdpError::domain(format!(
            "edge references vertex {inferred} but n = {n}"
        )));
    }
    let mut adj = DMatrix::zeros(n, n);
    for (i, j) in edges {
        adj[(i, j)] = 1.0;
        adj[(j, i)] = 1.0;
    }
    Ok(adj)
}
