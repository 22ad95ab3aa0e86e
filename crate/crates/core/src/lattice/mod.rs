//! Lattice post-processing: embedding, LLL, candidate scan and factor recovery.
//!
//! Basis vectors are stored as rows. The embedding vector for coordinate
//! `j < d` is `e_j` followed by `(S/D) * w_i[j]` for every sample `w_i`; the
//! remaining vectors are `S e_{d+i}`. The first `d` coordinates of a short
//! vector then lie in the relation lattice. [`LatticeBasis::printed`] gives the
//! transposed matrix, where each sample occupies one row.

pub mod hnf;
pub mod lll;

use std::fmt;
use std::io::{BufRead, Write};

use num_rational::Rational64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numtheory::{extract_factors, in_lattice, in_sublattice_l0, ExponentVector};
use crate::params::FactoringParams;

pub use hnf::hermite_normal_form;
pub use lll::{gram_schmidt, is_lll_reduced, lll_reduce, lll_reduce_with, GramSchmidt, DEFAULT_DELTA};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LatticeError {
    #[error("rows have different lengths")]
    Ragged,
    #[error("integer overflow during lattice arithmetic")]
    Overflow,
    #[error("basis is rank deficient")]
    RankDeficient,
    #[error("delta must lie strictly between 1/4 and 1")]
    BadDelta,
    #[error("scale S = {scale} is not a multiple of D = {grid}")]
    ScaleMismatch { scale: u64, grid: u64 },
    #[error("no samples given")]
    NoSamples,
    #[error("bad sample: {0}")]
    BadSample(String),
    #[error("no candidate yielded a nontrivial factor ({tested} tested)")]
    NoFactorFound { tested: usize },
}

/// One measured outcome `numerators / denominator`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Sample {
    pub numerators: Vec<u64>,
    pub denominator: u64,
}

impl Sample {
    pub fn new(numerators: Vec<u64>, denominator: u64) -> Result<Self, LatticeError> {
        if denominator == 0 {
            return Err(LatticeError::BadSample("denominator is zero".into()));
        }
        if let Some(&x) = numerators.iter().find(|&&x| x >= denominator) {
            return Err(LatticeError::BadSample(format!("numerator {x} not below {denominator}")));
        }
        Ok(Sample { numerators, denominator })
    }

    pub fn dim(&self) -> usize {
        self.numerators.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeBasis {
    pub rows: Vec<Vec<i64>>,
}

impl LatticeBasis {
    pub fn new(rows: Vec<Vec<i64>>) -> Result<Self, LatticeError> {
        let width = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != width) {
            return Err(LatticeError::Ragged);
        }
        Ok(LatticeBasis { rows })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn ncols(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    /// Transposed matrix: one row per sample, in the layout usually printed.
    pub fn printed(&self) -> Vec<Vec<i64>> {
        (0..self.ncols()).map(|c| self.rows.iter().map(|r| r[c]).collect()).collect()
    }

    /// Basis from a matrix whose columns are the basis vectors.
    pub fn from_columns(matrix: &[Vec<i64>]) -> Result<Self, LatticeError> {
        let t = LatticeBasis::new(matrix.to_vec())?;
        Ok(LatticeBasis { rows: t.printed() })
    }

    pub fn hnf(&self) -> Result<Vec<Vec<i64>>, LatticeError> {
        hermite_normal_form(&self.rows)
    }

    pub fn same_lattice(&self, other: &LatticeBasis) -> Result<bool, LatticeError> {
        Ok(self.hnf()? == other.hnf()?)
    }

    pub fn row_norm_sq(row: &[i64]) -> i128 {
        row.iter().map(|&x| x as i128 * x as i128).sum()
    }

    pub fn max_row_norm_sq(&self) -> i128 {
        self.rows.iter().map(|r| Self::row_norm_sq(r)).max().unwrap_or(0)
    }
}

impl fmt::Display for LatticeBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(i64::to_string).collect();
            writeln!(f, "{}", cells.join(" "))?;
        }
        Ok(())
    }
}

/// Embedding basis for the given samples; see the module docs for the layout.
pub fn build_embedding(samples: &[Sample], params: &FactoringParams) -> Result<LatticeBasis, LatticeError> {
    let d = params.d;
    let grid = params.grid;
    let scale = params.scale;
    if samples.is_empty() {
        return Err(LatticeError::NoSamples);
    }
    if scale % grid != 0 {
        return Err(LatticeError::ScaleMismatch { scale, grid });
    }
    for s in samples {
        if s.dim() != d || s.denominator != grid {
            return Err(LatticeError::BadSample(format!(
                "expected {d} numerators over {grid}, got {} over {}",
                s.dim(),
                s.denominator
            )));
        }
        if s.numerators.iter().any(|&x| x >= grid) {
            return Err(LatticeError::BadSample("numerator out of range".into()));
        }
    }
    let ratio = i64::try_from(scale / grid).map_err(|_| LatticeError::Overflow)?;
    let s = i64::try_from(scale).map_err(|_| LatticeError::Overflow)?;
    let m = samples.len();
    let mut rows = vec![vec![0i64; d + m]; d + m];
    for (j, row) in rows.iter_mut().enumerate().take(d) {
        row[j] = 1;
        for (i, sample) in samples.iter().enumerate() {
            row[d + i] = ratio.checked_mul(sample.numerators[j] as i64).ok_or(LatticeError::Overflow)?;
        }
    }
    for i in 0..m {
        rows[d + i][d + i] = s;
    }
    Ok(LatticeBasis { rows })
}

/// First `d` coordinates of every row and their negations, de-duplicated and
/// ordered by the norm of the originating row (ties keep row order). Zero
/// vectors are dropped.
pub fn extract_candidates(reduced: &LatticeBasis, d: usize) -> Vec<ExponentVector> {
    let mut order: Vec<usize> = (0..reduced.len()).collect();
    order.sort_by_key(|&i| LatticeBasis::row_norm_sq(&reduced.rows[i]));
    let mut out: Vec<ExponentVector> = Vec::new();
    for i in order {
        let head = ExponentVector(reduced.rows[i].iter().take(d).copied().collect());
        if head.is_zero() {
            continue;
        }
        for z in [head.clone(), head.negated()] {
            if !out.contains(&z) {
                out.push(z);
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateCheck {
    pub candidate: ExponentVector,
    pub in_lattice: bool,
    pub in_l0: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub reduced: LatticeBasis,
    pub checks: Vec<CandidateCheck>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recovery {
    pub factors: Option<(u64, u64)>,
    /// Candidate the factors came from.
    pub source: Option<ExponentVector>,
    pub diagnostics: Diagnostics,
}

/// Full recovery with diagnostics. `factors` is `None` when every candidate
/// is outside `L` or inside `L0`.
pub fn recover(samples: &[Sample], params: &FactoringParams) -> Result<Recovery, LatticeError> {
    let basis = build_embedding(samples, params)?;
    let reduced = lll_reduce(&basis, Rational64::new(DEFAULT_DELTA.0, DEFAULT_DELTA.1))?;
    let candidates = extract_candidates(&reduced, params.d);
    let mut checks = Vec::with_capacity(candidates.len());
    let mut found = None;
    for z in candidates {
        let member = in_lattice(&z, params);
        let l0 = member && in_sublattice_l0(&z, params);
        if found.is_none() && member && !l0 {
            if let Some(f) = extract_factors(&z, params) {
                found = Some((f, z.clone()));
            }
        }
        checks.push(CandidateCheck { candidate: z, in_lattice: member, in_l0: l0 });
    }
    let (factors, source) = match found {
        Some((f, z)) => (Some(f), Some(z)),
        None => (None, None),
    };
    Ok(Recovery { factors, source, diagnostics: Diagnostics { reduced, checks } })
}

/// Embedding, LLL and candidate scan; returns the factor pair `(p, q)` with
/// `p <= q`.
pub fn postprocess(samples: &[Sample], params: &FactoringParams) -> Result<(u64, u64), LatticeError> {
    let r = recover(samples, params)?;
    match r.factors {
        Some((p, q)) => Ok((p.min(q), p.max(q))),
        None => Err(LatticeError::NoFactorFound { tested: r.diagnostics.checks.len() }),
    }
}

/// Writes samples as `# d=<d> D=<D>` followed by one line of numerators each.
pub fn write_samples<W: Write>(mut out: W, d: usize, grid: u64, samples: &[Sample]) -> std::io::Result<()> {
    writeln!(out, "# d={d} D={grid}")?;
    for s in samples {
        let cells: Vec<String> = s.numerators.iter().map(u64::to_string).collect();
        writeln!(out, "{}", cells.join(" "))?;
    }
    Ok(())
}

/// Parses the format written by [`write_samples`]. Returns `(d, D, samples)`.
pub fn read_samples<R: BufRead>(input: R) -> Result<(usize, u64, Vec<Sample>), LatticeError> {
    let bad = |m: String| LatticeError::BadSample(m);
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| bad("empty samples file".into()))?
        .map_err(|e| bad(e.to_string()))?;
    let (d, grid) = parse_header(&header).ok_or_else(|| bad(format!("bad header {header:?}")))?;
    let mut samples = Vec::new();
    for (no, line) in lines.enumerate() {
        let line = line.map_err(|e| bad(e.to_string()))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let nums: Vec<u64> = line
            .split_whitespace()
            .map(|t| t.parse::<u64>().map_err(|_| bad(format!("line {}: {t:?} is not an integer", no + 2))))
            .collect::<Result<_, _>>()?;
        if nums.len() != d {
            return Err(bad(format!("line {}: expected {d} numerators", no + 2)));
        }
        samples.push(Sample::new(nums, grid)?);
    }
    Ok((d, grid, samples))
}

fn parse_header(line: &str) -> Option<(usize, u64)> {
    let rest = line.trim().strip_prefix('#')?;
    let mut d = None;
    let mut grid = None;
    for tok in rest.split_whitespace() {
        if let Some(v) = tok.strip_prefix("d=") {
            d = v.parse().ok();
        } else if let Some(v) = tok.strip_prefix("D=") {
            grid = v.parse().ok();
        }
    }
    Some((d?, grid?))
}
