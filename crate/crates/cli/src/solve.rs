use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use sdp_core::admm::{trace_csv, Residuals, Status};
use sdp_core::sdpa::save_sdpa;
use sdp_core::{solve, SymMat};

use crate::manifest::{require_out, Manifest, StoredConfig};
use crate::{Outcome, SolveArgs};

pub const TRACE_FILE: &str = "trace.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const FINAL_Z_FILE: &str = "final_z.json";
pub const PROBLEM_FILE: &str = "problem.dat-s";

#[derive(Debug, Serialize, Deserialize)]
pub struct Summary {
    pub instance: String,
    pub status: Status,
    pub iterations: usize,
    pub residuals: Option<Residuals>,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub elapsed_secs: f64,
    pub finished_unix_secs: u64,
    pub failure: Option<String>,
    pub config: StoredConfig,
}

struct Job {
    manifest: Manifest,
    out: PathBuf,
}

pub fn run(args: SolveArgs) -> Result<Outcome> {
    let jobs = if args.manifest.is_empty() {
        let Some(instance) = args.instance.clone() else {
            bail!("nothing to solve: pass --manifest or --instance");
        };
        let manifest = Manifest {
            instance: Some(instance),
            ..Manifest::default()
        };
        let out = require_out(args.out.as_ref(), &manifest)?;
        vec![Job { manifest, out }]
    } else {
        let batch = args.manifest.len() > 1;
        let mut jobs = Vec::new();
        for path in &args.manifest {
            let manifest = Manifest::load(path)?;
            let out = match (&args.out, batch) {
                (Some(parent), true) => {
                    let stem = path.file_stem().unwrap_or_default();
                    parent.join(stem)
                }
                _ => require_out(args.out.as_ref(), &manifest)?,
            };
            jobs.push(Job { manifest, out });
        }
        jobs
    };
    if args.jobs == 0 {
        bail!("--jobs must be at least 1");
    }

    let results: Vec<Mutex<Option<Result<Status>>>> = jobs.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..args.jobs.min(jobs.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= jobs.len() {
                    break;
                }
                let res = solve_one(&jobs[i], &args);
                *results[i].lock().unwrap() = Some(res);
            });
        }
    });

    let results: Vec<Result<Status>> = results
        .into_iter()
        .map(|m| m.into_inner().unwrap().expect("every job ran"))
        .collect();
    if jobs.len() == 1 {
        let res = results.into_iter().next().unwrap();
        let status = res?;
        let summary: Summary = serde_json::from_str(&fs::read_to_string(jobs[0].out.join(SUMMARY_FILE))?)?;
        let r_max = summary.residuals.map(|r| r.r_max).unwrap_or(f64::NAN);
        return Ok(Outcome::new(
            exit_code(status),
            format!(
                "{}: {} after {} iterations, r_max {:.3e}, {:.2}s",
                status.as_str(),
                jobs[0].out.display(),
                summary.iterations,
                r_max,
                summary.elapsed_secs
            ),
        ));
    }

    let mut code = 0;
    let mut counts = std::collections::BTreeMap::new();
    let mut first_error = None;
    for (job, res) in jobs.iter().zip(results) {
        match res {
            Ok(s) => {
                println!("{}\t{}", job.out.display(), s.as_str());
                code = code.max(exit_code(s));
                *counts.entry(s.as_str()).or_insert(0) += 1;
            }
            Err(e) => {
                println!("{}\terror: {e:#}", job.out.display());
                first_error.get_or_insert_with(|| format!("{}: {e:#}", job.out.display()));
                *counts.entry("error").or_insert(0) += 1;
            }
        }
    }
    let tally: Vec<String> = counts.iter().map(|(k, v)| format!("{v} {k}")).collect();
    let mut status = format!("batch of {}: {}", jobs.len(), tally.join(", "));
    if let Some(e) = first_error {
        code = 1;
        status = format!("error: {status}; first failure {e}");
    }
    Ok(Outcome::new(code, status))
}

fn exit_code(s: Status) -> u8 {
    match s {
        Status::Converged => 0,
        Status::IterLimit | Status::TimeLimit => 2,
        Status::NumericalFailure => 1,
    }
}

fn solve_one(job: &Job, args: &SolveArgs) -> Result<Status> {
    let (p, label) = job.manifest.problem()?;
    let cfg = job.manifest.solver_config(&args.solver)?;
    let out = solve(&p, &cfg)?;
    write_run(&job.out, &p, &label, &cfg, &out)?;
    Ok(out.status)
}

fn write_run(
    dir: &Path,
    p: &sdp_core::SdpProblem,
    label: &str,
    cfg: &sdp_core::SolverConfig,
    out: &sdp_core::SolveOutput,
) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    save_sdpa(p, dir.join(PROBLEM_FILE))?;
    fs::write(dir.join(TRACE_FILE), trace_csv(&out.records))?;
    let z: &SymMat = &out.state.z;
    fs::write(dir.join(FINAL_Z_FILE), serde_json::to_string(z)?)?;
    let summary = Summary {
        instance: label.to_string(),
        status: out.status,
        iterations: out.state.k,
        residuals: out.state.residuals,
        primal_objective: p.c().inner(&out.state.x),
        dual_objective: p.b().dot(&out.state.y),
        elapsed_secs: out.elapsed_secs,
        finished_unix_secs: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        failure: out.failure.clone(),
        config: StoredConfig::from_config(cfg),
    };
    fs::write(dir.join(SUMMARY_FILE), serde_json::to_string_pretty(&summary)?)?;
    Ok(())
}
