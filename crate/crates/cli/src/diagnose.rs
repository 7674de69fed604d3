use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use sdp_core::admm::{read_trace_csv, Status};
use sdp_core::diagnostics::DEFAULT_TAU;
use sdp_core::sdpa::load_sdpa;
use sdp_core::*;

use crate::eb::random_direction;
use crate::manifest::Manifest;
use crate::solve::{Summary, FINAL_Z_FILE, PROBLEM_FILE, SUMMARY_FILE, TRACE_FILE};
use crate::{DiagnoseArgs, Outcome};

pub const REPORT_FILE: &str = "diagnostics.json";
const FIT_FRACTION: f64 = 0.3;

#[derive(Serialize)]
struct Check {
    name: String,
    value: f64,
    bound: f64,
    holds: bool,
}

#[derive(Serialize)]
struct Report {
    converged: bool,
    reference_step: f64,
    complementarity: ComplementarityReport,
    nondegeneracy: Option<NondegeneracyReport>,
    k_id: Option<usize>,
    fits: Vec<FitRow>,
    op_norm_m: Option<f64>,
    fix_dim: Option<usize>,
    op_norm_m_minus_fix: Option<f64>,
    backward_error: Option<BackwardErrorTerms>,
    final_faces: Option<FaceNorms>,
    eb_slope: Option<f64>,
    eb_refined_spread: Option<f64>,
    checks: Vec<Check>,
    notes: Vec<String>,
}

/// A fit over iterations `k_start..=k_end`.
#[derive(Serialize)]
struct FitRow {
    sequence: String,
    k_start: usize,
    k_end: usize,
    rho_hat: f64,
    r2: f64,
}

fn fit_sequence(name: &str, ks: &[usize], values: &[f64], k_id: usize, floor: f64) -> Option<FitRow> {
    let first = ks.iter().position(|&k| k >= k_id)?;
    let (s, e) = tail_window(values, first, floor, FIT_FRACTION)?;
    let f = rate_fit_range(values, s, e, name).ok()?;
    // per-iteration rate when the samples are strided
    let span = (ks[e - 1] - ks[s]) as f64 / (e - 1 - s) as f64;
    Some(FitRow {
        sequence: name.to_string(),
        k_start: ks[s],
        k_end: ks[e - 1],
        rho_hat: f.rho_hat.powf(1.0 / span),
        r2: f.r2,
    })
}

fn holds(b: bool) -> &'static str {
    if b {
        "holds"
    } else {
        "fails"
    }
}

pub fn run(args: DiagnoseArgs) -> Result<Outcome> {
    let manifest = Manifest::load_opt(args.manifest.as_deref())?;
    let dir = args
        .run
        .or(args.out)
        .or(manifest.out.clone())
        .context("no run directory: pass it as an argument, with --out, or via the manifest")?;
    let reports = manifest.reports;
    let read = |name: &str| {
        fs::read_to_string(dir.join(name))
            .with_context(|| format!("missing run artifact {}", dir.join(name).display()))
    };
    let summary: Summary = serde_json::from_str(&read(SUMMARY_FILE)?).context("parsing summary")?;
    let mut records = read_trace_csv(&read(TRACE_FILE)?)?;
    let z_final: SymMat = serde_json::from_str(&read(FINAL_Z_FILE)?).context("parsing final Z")?;
    let p = load_sdpa(dir.join(PROBLEM_FILE))
        .with_context(|| format!("missing run artifact {}", dir.join(PROBLEM_FILE).display()))?;
    let kernel = ConstraintKernel::new(&p)?;
    let sigma = summary.config.sigma;
    let converged = summary.status == Status::Converged;
    records.retain(|r| r.k <= summary.iterations);

    let mut notes = Vec::new();
    let (zstar, step) = if converged {
        refine_limit(&p, &kernel, sigma, &z_final)?
    } else {
        (z_final.clone(), f64::NAN)
    };
    let dstar = eig_sym(&zstar)?;
    let sc = diagnostics::sc_check_decomp(&dstar, DEFAULT_TAU);
    let nd = if reports.nd {
        Some(nd_check(&p, &dstar, DEFAULT_TAU)?)
    } else {
        None
    };
    let k_id = rank_trace(&records, &sc);

    let mut fits = Vec::new();
    let mut analysis = None;
    if reports.rates || reports.faces {
        let mut cfg = summary.config.to_config();
        cfg.max_iter = summary.iterations;
        cfg.time_limit_secs = None;
        let (_, an) = analyze_run(&p, &kernel, &cfg, &zstar, &z_final, DEFAULT_TAU)?;
        analysis = Some(an);
    }
    if let (Some(an), Some(k_id)) = (&analysis, k_id) {
        let floor = 1e-12 * zstar.norm_fro().max(1.0) + if step.is_finite() { 100.0 * step } else { 0.0 };
        let rk: Vec<usize> = records.iter().map(|r| r.k).collect();
        let rv: Vec<f64> = records.iter().map(|r| r.r_max).collect();
        let mut seqs: Vec<(&str, &[usize], &[f64], f64)> = Vec::new();
        if reports.rates {
            seqs.push(("r_max", &rk, &rv, 0.0));
            seqs.push(("h_norm", &an.k, &an.h_norm, floor));
            seqs.push(("h_o_norm", &an.k, &an.h_o_norm, floor));
        }
        if reports.faces {
            seqs.push(("ts_x", &an.k, &an.ts_x, floor));
            seqs.push(("tx_s", &an.k, &an.tx_s, floor));
        }
        for (name, ks, vs, fl) in seqs {
            match fit_sequence(name, ks, vs, k_id, fl) {
                Some(f) => fits.push(f),
                None => notes.push(format!("{name}: too few points after k_id for a fit")),
            }
        }
    } else if reports.rates {
        notes.push("ranks never settled; no rate fits".into());
    }

    let mut checks = Vec::new();
    let (mut m_norm, mut fix_dim, mut m_fix) = (None, None, None);
    let mut eb_slope = None;
    let mut eb_spread = None;
    if converged && sc.sc_holds {
        let os = build_omega(&dstar)?;
        let m = op_norm_m(&os, &kernel)?;
        m_norm = Some(m);
        let fix = fix_basis(&os, &kernel)?;
        fix_dim = Some(fix.dim());
        if fix.dim() > 0 {
            match op_norm_m_minus_fix(&os, &kernel, &fix) {
                Ok(v) => m_fix = Some(v),
                Err(e) => notes.push(format!("‖M − Π_Fix‖: {e}")),
            }
        }
        let fit_of = |name: &str| fits.iter().find(|f| f.sequence == name).map(|f| f.rho_hat);
        let nd_both = nd.as_ref().is_some_and(|n| n.primal_nd && n.dual_nd);
        if let (true, Some(rho)) = (nd_both, fit_of("h_norm")) {
            checks.push(Check {
                name: "rho_hat(‖H‖) <= ‖M‖ + 0.02".into(),
                value: rho,
                bound: m + 0.02,
                holds: rho <= m + 0.02,
            });
        }
        if let (Some(mf), Some(rho)) = (m_fix, fit_of("h_o_norm")) {
            checks.push(Check {
                name: "rho_hat(‖H_O‖) <= ‖M − Π_Fix‖ + 0.02".into(),
                value: rho,
                bound: mf + 0.02,
                holds: rho <= mf + 0.02,
            });
        }
        if reports.eb {
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            let h = random_direction(&mut rng, p.n());
            let rep = eb_scan(&zstar, &h, &[1e-1, 1e-2, 1e-3, 1e-4])?;
            fs::write(dir.join("eb.csv"), rep.to_csv())?;
            eb_slope = rep.loglog_slope();
            eb_spread = rep.refined_spread();
        }
    }
    let (backward, faces) = if reports.faces || reports.sc {
        let dfin = eig_sym(&z_final)?;
        let x = dfin.psd_part();
        let s = dfin.nsd_part().scale(1.0 / sigma);
        (
            Some(backward_error_terms(&p, &kernel, &dstar, &x, &s, sigma, DEFAULT_TAU)?),
            Some(face_projections(&dstar, &x, &s, sigma, DEFAULT_TAU)?),
        )
    } else {
        (None, None)
    };

    let report = Report {
        converged,
        reference_step: step,
        complementarity: sc.clone(),
        nondegeneracy: nd.clone(),
        k_id,
        fits,
        op_norm_m: m_norm,
        fix_dim,
        op_norm_m_minus_fix: m_fix,
        backward_error: backward,
        final_faces: faces,
        eb_slope,
        eb_refined_spread: eb_spread,
        checks,
        notes,
    };
    fs::write(dir.join(REPORT_FILE), serde_json::to_string_pretty(&report)?)?;
    append_fit_footer(&dir.join(TRACE_FILE), &report.fits)?;

    let nd_text = match &nd {
        Some(n) => format!("primal ND: {}, dual ND: {}", holds(n.primal_nd), holds(n.dual_nd)),
        None => "ND: not checked".into(),
    };
    let headline = format!("SC: {}, {nd_text}", holds(sc.sc_holds));
    print!("{}", render(&dir, &summary, &report, &headline));
    let failed = report.checks.iter().filter(|c| !c.holds).count();
    let status = format!(
        "diagnosed {} ({}{}{})",
        dir.display(),
        headline,
        if converged { "" } else { "; not converged" },
        if failed > 0 { format!("; {failed} rate check(s) missed") } else { String::new() }
    );
    Ok(Outcome::new(0, status))
}

fn render(dir: &Path, summary: &Summary, rep: &Report, headline: &str) -> String {
    let mut s = String::new();
    if !rep.converged {
        let _ = writeln!(s, "*** not converged ({}): rates shown without assertion ***", summary.status.as_str());
    }
    let _ = writeln!(s, "run        {}", dir.display());
    let _ = writeln!(s, "instance   {}", summary.instance);
    let _ = writeln!(s, "status     {} after {} iterations", summary.status.as_str(), summary.iterations);
    let _ = writeln!(s, "{headline}");
    let c = &rep.complementarity;
    let _ = writeln!(
        s,
        "ranks      r = {}, s = {}, n = {}, k_id = {}",
        c.r,
        c.s,
        c.n,
        rep.k_id.map(|k| k.to_string()).unwrap_or_else(|| "none".into())
    );
    let _ = writeln!(s, "min|λ(Z*)| {:.3e}   eigengap {:.3e}", c.lam_min_abs_z, c.eigengap);
    if let Some(n) = &rep.nondegeneracy {
        let _ = writeln!(
            s,
            "ND ranks   primal {}+{} vs {}, dual {}+{} vs {}",
            n.rank_w1, n.rank_w2, n.rank_joint, n.dual_rank_w1, n.dual_rank_w2, n.dual_rank_joint
        );
    }
    if let Some(m) = rep.op_norm_m {
        let _ = write!(s, "‖M‖        {m:.6}");
        if let Some(d) = rep.fix_dim {
            let _ = write!(s, "   dim Fix(M) = {d}");
        }
        if let Some(mf) = rep.op_norm_m_minus_fix {
            let _ = write!(s, "   ‖M − Π_Fix‖ = {mf:.6}");
        }
        let _ = writeln!(s);
    }
    if !rep.fits.is_empty() {
        let _ = writeln!(s, "{:<10} {:>16} {:>10} {:>10}", "sequence", "window", "rho_hat", "r2");
        for f in &rep.fits {
            let _ = writeln!(
                s,
                "{:<10} {:>16} {:>10.6} {:>10.6}",
                f.sequence,
                format!("{}..{}", f.k_start, f.k_end),
                f.rho_hat,
                f.r2
            );
        }
    }
    if let Some(slope) = rep.eb_slope {
        let _ = writeln!(
            s,
            "eb scan    log-log slope {slope:.3}, refined spread {:.3}",
            rep.eb_refined_spread.unwrap_or(f64::NAN)
        );
    }
    for c in &rep.checks {
        let _ = writeln!(
            s,
            "check      {}: {:.6} vs {:.6} {}",
            c.name,
            c.value,
            c.bound,
            if c.holds { "ok" } else { "MISSED" }
        );
    }
    for n in &rep.notes {
        let _ = writeln!(s, "note       {n}");
    }
    s
}

/// Replaces any previous `#fit` rows at the end of the trace.
fn append_fit_footer(path: &Path, fits: &[FitRow]) -> Result<()> {
    let text = fs::read_to_string(path)?;
    let mut out: String = text
        .lines()
        .filter(|l| !l.starts_with("#fit"))
        .flat_map(|l| [l, "\n"])
        .collect();
    for f in fits {
        let _ = writeln!(
            out,
            "#fit,{},{},{},{:e},{:e}",
            f.sequence, f.k_start, f.k_end, f.rho_hat, f.r2
        );
    }
    fs::write(path, out)?;
    Ok(())
}
