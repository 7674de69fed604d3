use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};

use sdp_core::problem::parse_edge_list;
use sdp_core::sdpa::save_sdpa;
use sdp_core::{generate_maxcut, generate_planted, Degeneracy, PlantedSpec};

use crate::manifest::Manifest;
use crate::{GenerateArgs, GenerateKind, Outcome};

const CERT_TOL: f64 = 1e-10;

pub fn run(args: GenerateArgs) -> Result<Outcome> {
    let manifest = Manifest::load_opt(args.manifest.as_deref())?;
    let kind = match args.kind {
        Some(k) => k,
        None if manifest.planted.is_some() => GenerateKind::Planted,
        None if manifest.maxcut.is_some() => GenerateKind::Maxcut,
        None => bail!("say what to generate: planted or maxcut"),
    };
    let out: PathBuf = args
        .out
        .clone()
        .context("no output path: pass --out FILE.dat-s")?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }

    match kind {
        GenerateKind::Planted => {
            let base = manifest.planted.clone();
            let pick = |flag: Option<usize>, field: Option<usize>, name: &str| {
                flag.or(field).with_context(|| format!("planted instance needs --{name}"))
            };
            let mut spec = PlantedSpec::new(
                pick(args.n, base.as_ref().map(|b| b.n), "n")?,
                pick(args.m, base.as_ref().map(|b| b.m), "m")?,
                pick(args.r, base.as_ref().map(|b| b.r), "r")?,
                args.seed.or(base.as_ref().map(|b| b.seed)).unwrap_or(0),
            );
            spec.degeneracy = if args.degenerate {
                Degeneracy::PrimalNdFail
            } else {
                base.as_ref().map(|b| b.degeneracy).unwrap_or(Degeneracy::None)
            };
            spec.near_sc_gap = args.near_sc_gap.or(base.as_ref().and_then(|b| b.near_sc_gap));
            let (p, cert) = generate_planted(&spec)?;
            let (rp, rd, rc) = cert.kkt_residuals(&p)?;
            let worst = rp.max(rd).max(rc);
            if worst > CERT_TOL {
                bail!("certificate residual {worst:.3e} exceeds {CERT_TOL:e}");
            }
            let cert_path = out.with_extension("cert.json");
            save_sdpa(&p, &out)?;
            fs::write(&cert_path, cert.to_json()?)?;
            println!("{}", out.display());
            println!("{}", cert_path.display());
            Ok(Outcome::new(
                0,
                format!(
                    "wrote {} and {} (certificate residuals {rp:.1e}, {rd:.1e}, {rc:.1e})",
                    out.display(),
                    cert_path.display()
                ),
            ))
        }
        GenerateKind::Maxcut => {
            let edges = args
                .edges
                .clone()
                .or(manifest.maxcut.clone())
                .context("maxcut needs --edges FILE")?;
            let text =
                fs::read_to_string(&edges).with_context(|| format!("reading {}", edges.display()))?;
            let p = generate_maxcut(&parse_edge_list(&text)?)?;
            save_sdpa(&p, &out)?;
            println!("{}", out.display());
            Ok(Outcome::new(0, format!("wrote {} (n = {})", out.display(), p.n())))
        }
    }
}
