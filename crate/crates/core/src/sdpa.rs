//! Sparse SDPA (`.dat-s`) reader and writer for single-block problems.
//!
//! The file describes `min cᵀx s.t. Σ x_i F_i − F_0 ⪰ 0`, whose dual is
//! `max <F_0, Y> s.t. <F_i, Y> = c_i, Y ⪰ 0`. Reading that dual as our primal
//! gives `C = −F_0`, `A_i = F_i`, `b = c`.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, SdpError};
use crate::linalg::SymMat;
use crate::problem::SdpProblem;

struct Line<'a> {
    no: usize,
    toks: Vec<&'a str>,
}

fn tokenize(text: &str) -> Vec<Line<'_>> {
    text.lines()
        .enumerate()
        .filter_map(|(i, raw)| {
            let t = raw.trim_start();
            if t.starts_with('*') || t.starts_with('"') {
                return None;
            }
            let toks: Vec<&str> = raw
                .split(|c: char| c.is_whitespace() || ",{}()".contains(c))
                .filter(|s| !s.is_empty())
                .collect();
            if toks.is_empty() {
                None
            } else {
                Some(Line { no: i + 1, toks })
            }
        })
        .collect()
}

fn fmt_err(line: usize, msg: impl Into<String>) -> SdpError {
    SdpError::Format {
        line,
        msg: msg.into(),
    }
}

fn parse_num<T: std::str::FromStr>(tok: &str, line: usize, what: &str) -> Result<T> {
    tok.parse::<T>()
        .map_err(|_| fmt_err(line, format!("cannot parse {what} from `{tok}`")))
}

/// Parses sparse SDPA text.
pub fn parse_sdpa(text: &str) -> Result<SdpProblem> {
    let lines = tokenize(text);
    let mut it = lines.iter();
    let eof = |what: &str| fmt_err(text.lines().count(), format!("unexpected end of file before {what}"));

    let l = it.next().ok_or_else(|| eof("m"))?;
    let m: usize = parse_num(l.toks[0], l.no, "constraint count")?;
    let l = it.next().ok_or_else(|| eof("block count"))?;
    let nblocks: i64 = parse_num(l.toks[0], l.no, "block count")?;
    if nblocks < 1 {
        return Err(fmt_err(l.no, format!("block count must be positive, got {nblocks}")));
    }

    let mut sizes: Vec<(i64, usize)> = Vec::new();
    while sizes.len() < nblocks as usize {
        let l = it.next().ok_or_else(|| eof("block sizes"))?;
        for tok in &l.toks {
            if sizes.len() == nblocks as usize {
                break;
            }
            sizes.push((parse_num(tok, l.no, "block size")?, l.no));
        }
    }
    for (k, &(size, _)) in sizes.iter().enumerate() {
        if size < 0 {
            return Err(SdpError::UnsupportedFormat(format!(
                "block {} has negative size {size} (diagonal/LP block)",
                k + 1
            )));
        }
    }
    if nblocks > 1 {
        return Err(SdpError::UnsupportedFormat(format!(
            "file declares {nblocks} blocks; block 2 (size {}) is beyond the single semidefinite block supported",
            sizes[1].0
        )));
    }
    let (n, size_line) = sizes[0];
    if n == 0 {
        return Err(fmt_err(size_line, "block size must be positive"));
    }
    let n = n as usize;

    let mut b = Vec::with_capacity(m);
    while b.len() < m {
        let l = it.next().ok_or_else(|| eof("objective vector"))?;
        for tok in &l.toks {
            if b.len() == m {
                break;
            }
            b.push(parse_num::<f64>(tok, l.no, "objective coefficient")?);
        }
    }

    let mut mats = vec![DMatrix::<f64>::zeros(n, n); m + 1];
    let mut seen = HashSet::new();
    for l in it {
        if l.toks.len() < 5 {
            return Err(fmt_err(l.no, "entry lines need `matno blkno i j value`"));
        }
        let matno: usize = parse_num(l.toks[0], l.no, "matrix number")?;
        let blk: usize = parse_num(l.toks[1], l.no, "block number")?;
        let i: usize = parse_num(l.toks[2], l.no, "row index")?;
        let j: usize = parse_num(l.toks[3], l.no, "column index")?;
        let v: f64 = parse_num(l.toks[4], l.no, "entry value")?;
        if matno > m {
            return Err(fmt_err(l.no, format!("matrix number {matno} exceeds m = {m}")));
        }
        if blk != 1 {
            return Err(fmt_err(l.no, format!("block number {blk} does not exist")));
        }
        if i == 0 || j == 0 || i > n || j > n {
            return Err(fmt_err(l.no, format!("index ({i}, {j}) outside 1..={n}")));
        }
        if !v.is_finite() {
            return Err(fmt_err(l.no, "entry value is not finite"));
        }
        let (lo, hi) = (i.min(j) - 1, i.max(j) - 1);
        if !seen.insert((matno, lo, hi)) {
            return Err(fmt_err(
                l.no,
                format!("duplicate entry for matrix {matno} at ({i}, {j})"),
            ));
        }
        mats[matno][(lo, hi)] = v;
        mats[matno][(hi, lo)] = v;
    }

    let mut mats = mats.into_iter();
    let f0 = mats.next().expect("F_0 always present");
    let c = SymMat::new(-f0)?;
    let a = mats.map(SymMat::new).collect::<Result<Vec<_>>>()?;
    SdpProblem::new(c, a, DVector::from_vec(b))
}

pub fn load_sdpa(path: impl AsRef<Path>) -> Result<SdpProblem> {
    parse_sdpa(&std::fs::read_to_string(path)?)
}

/// Serializes to sparse SDPA. Values use Rust's shortest round-trip
/// formatting, so [`parse_sdpa`] recovers every coefficient exactly.
pub fn write_sdpa(p: &SdpProblem) -> String {
    let n = p.n();
    let mut out = String::new();
    let _ = writeln!(out, "\"single-block SDP, n = {n}, m = {}", p.m());
    let _ = writeln!(out, "{}", p.m());
    let _ = writeln!(out, "1");
    let _ = writeln!(out, "{n}");
    let b: Vec<String> = p.b().iter().map(|v| format!("{v:e}")).collect();
    let _ = writeln!(out, "{}", b.join(" "));
    let mut emit = |matno: usize, mat: &SymMat, sign: f64| {
        for i in 0..n {
            for j in i..n {
                let v = mat.get(i, j);
                if v != 0.0 {
                    let _ = writeln!(out, "{matno} 1 {} {} {:e}", i + 1, j + 1, sign * v);
                }
            }
        }
    };
    emit(0, p.c(), -1.0);
    for (k, ai) in p.a().iter().enumerate() {
        emit(k + 1, ai, 1.0);
    }
    out
}

pub fn save_sdpa(p: &SdpProblem, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, write_sdpa(p))?;
    Ok(())
}
