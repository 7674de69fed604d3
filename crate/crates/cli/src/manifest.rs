//! JSON run manifests. Precedence is flag > manifest > default; relative paths
//! in a manifest are taken relative to the manifest's directory.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use sdp_core::admm::{Init, SolverConfig};
use sdp_core::problem::parse_edge_list;
use sdp_core::sdpa::load_sdpa;
use sdp_core::{generate_maxcut, generate_planted, Degeneracy, PlantedSpec, SdpProblem};

use crate::{InitKind, SolverFlags};

#[derive(Clone, Copy, Debug, Deserialize, Serialize)]
#[serde(default)]
pub struct Reports {
    pub sc: bool,
    pub nd: bool,
    pub rates: bool,
    pub faces: bool,
    pub eb: bool,
}

impl Default for Reports {
    fn default() -> Self {
        Reports {
            sc: true,
            nd: true,
            rates: true,
            faces: true,
            eb: true,
        }
    }
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    /// SDPA file.
    pub instance: Option<PathBuf>,
    pub planted: Option<PlantedSpec>,
    /// Edge list for a MAXCUT relaxation.
    pub maxcut: Option<PathBuf>,
    pub sigma: Option<f64>,
    pub max_iter: Option<usize>,
    pub tol: Option<f64>,
    pub seed: Option<u64>,
    pub init: Option<InitKind>,
    pub time_limit_secs: Option<f64>,
    pub trace_every: Option<usize>,
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub reports: Reports,
    /// eb-verify: `Z` matrix file or run directory.
    pub z: Option<PathBuf>,
    pub scales: Option<Vec<f64>>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading manifest {}", path.display()))?;
        let mut m: Manifest = serde_json::from_str(&text)
            .with_context(|| format!("parsing manifest {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut m.instance, &mut m.maxcut, &mut m.out, &mut m.z]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(m)
    }

    pub fn load_opt(path: Option<&Path>) -> Result<Self> {
        path.map(Manifest::load).transpose().map(Option::unwrap_or_default)
    }

    /// Builds the problem from the single instance source.
    pub fn problem(&self) -> Result<(SdpProblem, String)> {
        let sources = [
            self.instance.is_some(),
            self.planted.is_some(),
            self.maxcut.is_some(),
        ];
        match sources.iter().filter(|&&s| s).count() {
            0 => bail!("no instance: set one of \"instance\", \"planted\" or \"maxcut\""),
            1 => {}
            _ => bail!("manifest names more than one instance source"),
        }
        if let Some(path) = &self.instance {
            let p = load_sdpa(path).with_context(|| format!("loading {}", path.display()))?;
            return Ok((p, path.display().to_string()));
        }
        if let Some(spec) = &self.planted {
            let (p, _) = generate_planted(spec)?;
            let kind = match spec.degeneracy {
                Degeneracy::None => "nondegenerate",
                Degeneracy::PrimalNdFail => "primal_nd_fail",
            };
            let label = format!(
                "planted n={} m={} r={} seed={} {kind}",
                spec.n, spec.m, spec.r, spec.seed
            );
            return Ok((p, label));
        }
        let path = self.maxcut.as_ref().expect("one source is set");
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let adj = parse_edge_list(&text)?;
        Ok((generate_maxcut(&adj)?, format!("maxcut {}", path.display())))
    }

    pub fn solver_config(&self, flags: &SolverFlags) -> Result<SolverConfig> {
        let d = SolverConfig::default();
        let seed = flags.seed.or(self.seed).unwrap_or(0);
        let init = match flags.init.or(self.init).unwrap_or(InitKind::Gaussian) {
            InitKind::Zero => Init::Zero,
            InitKind::Gaussian => Init::Gaussian(seed),
        };
        let cfg = SolverConfig {
            sigma: flags.sigma.or(self.sigma).unwrap_or(d.sigma),
            max_iter: flags.max_iter.or(self.max_iter).unwrap_or(d.max_iter),
            tol_rmax: flags.tol.or(self.tol).unwrap_or(d.tol_rmax),
            time_limit_secs: flags.time_limit.or(self.time_limit_secs),
            trace_every: flags.trace_every.or(self.trace_every).unwrap_or(d.trace_every),
            init,
            rank_tau: d.rank_tau,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Solver settings as stored in a run's `summary.json`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StoredConfig {
    pub sigma: f64,
    pub max_iter: usize,
    pub tol_rmax: f64,
    pub time_limit_secs: Option<f64>,
    pub trace_every: usize,
    pub init: InitKind,
    pub seed: Option<u64>,
    pub rank_tau: f64,
}

impl StoredConfig {
    pub fn from_config(cfg: &SolverConfig) -> Self {
        let (init, seed) = match cfg.init {
            Init::Zero => (InitKind::Zero, None),
            Init::Gaussian(s) => (InitKind::Gaussian, Some(s)),
            Init::Explicit(_) => unreachable!("the CLI never builds explicit starts"),
        };
        StoredConfig {
            sigma: cfg.sigma,
            max_iter: cfg.max_iter,
            tol_rmax: cfg.tol_rmax,
            time_limit_secs: cfg.time_limit_secs,
            trace_every: cfg.trace_every,
            init,
            seed,
            rank_tau: cfg.rank_tau,
        }
    }

    pub fn to_config(&self) -> SolverConfig {
        SolverConfig {
            sigma: self.sigma,
            max_iter: self.max_iter,
            tol_rmax: self.tol_rmax,
            time_limit_secs: self.time_limit_secs,
            trace_every: self.trace_every,
            init: match self.init {
                InitKind::Zero => Init::Zero,
                InitKind::Gaussian => Init::Gaussian(self.seed.unwrap_or(0)),
            },
            rank_tau: self.rank_tau,
        }
    }
}

pub fn require_out(flag: Option<&PathBuf>, manifest: &Manifest) -> Result<PathBuf> {
    flag.or(manifest.out.as_ref())
        .cloned()
        .context("no output directory: pass --out or set \"out\" in the manifest")
}
