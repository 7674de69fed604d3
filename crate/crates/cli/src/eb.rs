use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use sdp_core::linearization::{nonsingular_split, NONSINGULAR_TOL};
use sdp_core::*;

use crate::manifest::Manifest;
use crate::solve::FINAL_Z_FILE;
use crate::{EbArgs, HKind, Outcome};

const DEFAULT_SCALES: [f64; 4] = [1e-1, 1e-2, 1e-3, 1e-4];
const AGREEMENT_TOL: f64 = 1e-9;

/// Gaussian symmetric matrix scaled to unit spectral norm.
pub fn random_direction(rng: &mut ChaCha8Rng, n: usize) -> SymMat {
    let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let h = SymMat::new((&g + g.transpose()) * 0.5).expect("symmetric by construction");
    let s = h.norm2();
    h.scale(1.0 / s)
}

fn load_z(path: &Path) -> Result<SymMat> {
    let file = if path.is_dir() { path.join(FINAL_Z_FILE) } else { path.to_path_buf() };
    let text = fs::read_to_string(&file).with_context(|| format!("reading {}", file.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing matrix {}", file.display()))
}

/// Keeps the diagonal blocks (`block = true`) or the off-diagonal block of
/// `h` in the basis `q`, split after the first `r` columns.
fn in_blocks(h: &SymMat, q: &DMatrix<f64>, r: usize, block: bool) -> SymMat {
    let mut t = h.congruence_t(q).into_matrix();
    let n = t.nrows();
    for i in 0..n {
        for j in 0..n {
            if ((i < r) == (j < r)) != block {
                t[(i, j)] = 0.0;
            }
        }
    }
    SymMat::new(t).expect("symmetric").congruence(q)
}

pub fn run(args: EbArgs) -> Result<Outcome> {
    let manifest = Manifest::load_opt(args.manifest.as_deref())?;
    let zpath = args
        .z
        .or(manifest.z.clone())
        .context("no Z: pass --z (matrix JSON or run directory) or set \"z\"")?;
    let z = load_z(&zpath)?;
    let n = z.dim();
    let d = eig_sym(&z)?;
    let r = match nonsingular_split(&d, NONSINGULAR_TOL) {
        Ok(r) => r,
        Err(_) => bail!(
            "Z is numerically singular: eigengap min|λ| = {:.3e} (max|λ| = {:.3e})",
            d.min_abs_eigenvalue(),
            d.max_abs_eigenvalue()
        ),
    };
    let scales = args.scales.or(manifest.scales.clone()).unwrap_or(DEFAULT_SCALES.to_vec());
    if scales.is_empty() || scales.iter().any(|t| !(*t > 0.0)) {
        bail!("scales must be positive");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed.or(manifest.seed).unwrap_or(0));

    let (label, family): (String, Box<dyn Fn(f64) -> SymMat>) = if let Some(path) = &args.h_file {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let h: SymMat = serde_json::from_str(&text)
            .with_context(|| format!("parsing matrix {}", path.display()))?;
        if h.dim() != n {
            bail!("H is {}x{}, Z is {n}x{n}", h.dim(), h.dim());
        }
        (path.display().to_string(), Box::new(move |t| h.scale(t)))
    } else {
        let kind = args.h.unwrap_or(HKind::Generic);
        let g = random_direction(&mut rng, n);
        match kind {
            HKind::Generic => ("generic".into(), Box::new(move |t| g.scale(t))),
            HKind::Block => {
                let hb = in_blocks(&g, &d.q, r, true);
                ("block".into(), Box::new(move |t| hb.scale(t)))
            }
            HKind::OffQuadratic => {
                let hb = in_blocks(&g, &d.q, r, true);
                let ho = in_blocks(&g, &d.q, r, false);
                (
                    "off-quadratic".into(),
                    Box::new(move |t| &hb.scale(t) + &ho.scale(t * t)),
                )
            }
        }
    };

    let rep = eb_scan_family(&z, &scales, &family)?;
    let zn = z.norm2();
    println!("H family {label}, ‖Z‖₂ = {zn:.6e}");
    println!(
        "{:>10} {:>12} {:>12} {:>14} {:>14}",
        "t", "residual", "‖H_O‖₂", "refined ratio", "classic ratio"
    );
    for i in 0..rep.scales.len() {
        println!(
            "{:>10.1e} {:>12.4e} {:>12.4e} {:>14} {:>14.4e}",
            rep.scales[i],
            rep.lhs[i],
            rep.ho_norms[i],
            rep.refined_ratios[i].map(|v| format!("{v:.4e}")).unwrap_or_else(|| "-".into()),
            rep.classic_ratios[i]
        );
    }
    let slope = rep.loglog_slope();
    let spread = rep.refined_spread();
    if let Some(s) = slope {
        println!("log-log slope {s:.4}");
    }
    if let Some(s) = spread {
        println!("refined ratio spread {s:.4}");
    }

    let tmin = scales.iter().copied().fold(f64::INFINITY, f64::min);
    let h = family(tmin);
    let zh = &z + &h;
    let (agree, detail) = match run_elimination(&z, &h) {
        Ok(res) => {
            let dev = (&res.projection - &psd_project(&zh)?).norm_fro() / zh.norm_fro().max(1.0);
            println!(
                "elimination agreement at t = {tmin:e}: max deviation {dev:.3e} in {} iterations",
                res.iterations
            );
            (dev <= AGREEMENT_TOL, format!("agreement {dev:.2e}"))
        }
        Err(e) => {
            println!("elimination agreement at t = {tmin:e}: failed ({e})");
            (false, format!("elimination failed: {e}"))
        }
    };

    if let Some(out) = args.out.or(manifest.out.clone()) {
        fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
        fs::write(out.join("eb.csv"), rep.to_csv())?;
        fs::write(out.join("eb.json"), rep.to_json()?)?;
    }
    let status = format!(
        "eb-verify {label}: slope {}, refined spread {}, {detail}",
        slope.map(|s| format!("{s:.3}")).unwrap_or_else(|| "n/a".into()),
        spread.map(|s| format!("{s:.3}")).unwrap_or_else(|| "n/a".into()),
    );
    Ok(Outcome::new(if agree { 0 } else { 2 }, status))
}
