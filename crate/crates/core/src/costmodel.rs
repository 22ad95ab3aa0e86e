//! Closed-form costs, recursion bounds and the tables built from schedules.
//!
//! Space is counted in computational registers and time in large
//! multiplications (squarings). Measured rows come from generated schedules
//! that pass [`pebble::validate`]; bound rows come from the recursion formula.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pebble::{self, PebbleError, Strategy};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CostError {
    #[error("invalid k = {k} for m = {m}")]
    InvalidK { m: usize, k: usize },
    #[error("(m+1)/x0 is not a positive power of k = {k} for m = {m}")]
    NotApplicable { m: usize, k: usize },
    #[error(transparent)]
    Pebble(#[from] PebbleError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostPoint {
    pub m: usize,
    pub strategy: String,
    /// Block size, arity or ell.
    pub param: Option<usize>,
    pub registers: usize,
    pub mults: usize,
    /// True when `mults` is an upper bound rather than a measured count.
    pub is_bound: bool,
}

/// Base unit of the recursion: `x0` squarings on `n0` registers in time `t0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecursionBase {
    pub x0: usize,
    pub n0: usize,
    pub t0: usize,
}

impl Default for RecursionBase {
    fn default() -> Self {
        RecursionBase { x0: 1, n0: 1, t0: 1 }
    }
}

fn check_k(m: usize, k: usize) -> Result<usize, CostError> {
    if k == 0 || k > m + 1 {
        return Err(CostError::InvalidK { m, k });
    }
    Ok((m + 1).div_ceil(k))
}

/// `ceil((m+1)/k) + k - 1`.
pub fn s_simple(m: usize, k: usize) -> Result<usize, CostError> {
    Ok(check_k(m, k)? + k - 1)
}

/// `(2c - 1)(2k - 1) + 2((m+1) - kc) - 4` with `c = ceil((m+1)/k)`.
///
/// For `k = m + 1` (and `k = 1`) this is `2m - 3`, two less than the
/// `2m - 1` squarings any schedule needs, so it undercounts there.
pub fn t_simple(m: usize, k: usize) -> Result<i64, CostError> {
    let c = check_k(m, k)? as i64;
    let (m, k) = (m as i64, k as i64);
    Ok((2 * c - 1) * (2 * k - 1) + 2 * ((m + 1) - k * c) - 4)
}

/// Exponent `e` with `(m+1)/x0 = k^e`, `e >= 1`.
pub fn recursion_depth(m: usize, k: usize, base: RecursionBase) -> Result<u32, CostError> {
    let na = CostError::NotApplicable { m, k };
    if k < 2 || base.x0 == 0 || (m + 1) % base.x0 != 0 {
        return Err(na);
    }
    let mut q = (m + 1) / base.x0;
    let mut e = 0;
    while q > 1 && q % k == 0 {
        q /= k;
        e += 1;
    }
    if q != 1 || e == 0 {
        return Err(na);
    }
    Ok(e)
}

/// `n0 + (k-1) log_k((m+1)/x0)`.
pub fn s_rec(m: usize, k: usize, base: RecursionBase) -> Result<usize, CostError> {
    Ok(base.n0 + (k - 1) * recursion_depth(m, k, base)? as usize)
}

/// `ceil(t0 ((m+1)/x0)^(log_k(2k-1)))`, which is exactly `t0 (2k-1)^e`.
pub fn t_rec_bound(m: usize, k: usize, base: RecursionBase) -> Result<u64, CostError> {
    let e = recursion_depth(m, k, base)?;
    Ok(base.t0 as u64 * (2 * k as u64 - 1).pow(e))
}

pub fn direct_cost(m: usize) -> CostPoint {
    CostPoint {
        m,
        strategy: "direct".into(),
        param: None,
        registers: m + 1,
        mults: (2 * m).saturating_sub(1),
        is_bound: false,
    }
}

/// About `2n` modular multiplications for an `n`-bit modulus.
pub fn shor_reference(n: usize) -> usize {
    2 * n
}

/// Default `C` in `log D = C sqrt(n)`.
pub const DEFAULT_C: f64 = 2.2;

/// `round(C sqrt(n)) - 1`, at least 1.
pub fn regev_m(n: usize, c: f64) -> usize {
    let v = (c * (n as f64).sqrt()).round() as i64 - 1;
    v.max(1) as usize
}

/// Generates, validates and measures one schedule.
pub fn measured(m: usize, strategy: Strategy) -> Result<CostPoint, CostError> {
    let schedule = strategy.schedule(m)?;
    let cost = pebble::validate(&schedule)?;
    Ok(CostPoint {
        m,
        strategy: strategy.name().into(),
        param: strategy.param(m),
        registers: cost.registers,
        mults: cost.squarings,
        is_bound: false,
    })
}

/// Measured rows for every `(m, strategy)` pair, in input order. With
/// `with_bounds`, recursive strategies also get a bound row wherever the
/// recursion formula applies.
pub fn scaling_table(m_values: &[usize], strategies: &[Strategy], with_bounds: bool) -> Result<Vec<CostPoint>, CostError> {
    let mut rows = Vec::new();
    for &m in m_values {
        for &s in strategies {
            let row = measured(m, s)?;
            let arity = match s {
                Strategy::Binary => Some(2),
                Strategy::Kary(k) => Some(k),
                Strategy::Variable(ell) => Some(pebble::variable_arity(m, ell)?),
                _ => None,
            };
            rows.push(row.clone());
            if let (true, Some(k)) = (with_bounds, arity) {
                let base = RecursionBase::default();
                if let (Ok(regs), Ok(t)) = (s_rec(m, k, base), t_rec_bound(m, k, base)) {
                    rows.push(CostPoint { registers: regs, mults: t as usize, is_bound: true, ..row });
                }
            }
        }
    }
    Ok(rows)
}

pub const REFERENCE_M: [usize; 6] = [3, 7, 15, 31, 63, 127];

/// Direct, default simple and binary costs for the six reference `m` values.
pub fn table2() -> Result<Vec<CostPoint>, CostError> {
    scaling_table(&REFERENCE_M, &[Strategy::Direct, Strategy::Simple(None), Strategy::Binary], false)
}

/// Pareto frontier in (registers, mults) over direct, every simple block
/// size, every k-ary arity and `ell` in `1..=8`, ordered by registers.
pub fn tradeoff_frontier(m: usize) -> Result<Vec<CostPoint>, CostError> {
    let mut candidates = vec![measured(m, Strategy::Direct)?];
    for k in 1..=m + 1 {
        candidates.push(measured(m, Strategy::Simple(Some(k)))?);
    }
    for k in 2..=m + 1 {
        candidates.push(measured(m, Strategy::Kary(k))?);
    }
    for ell in 1..=8 {
        candidates.push(measured(m, Strategy::Variable(ell))?);
    }
    Ok(pareto(candidates))
}

/// Keeps the points not dominated in (registers, mults); first seen wins ties.
pub fn pareto(mut points: Vec<CostPoint>) -> Vec<CostPoint> {
    // stable sort keeps generation order among equal costs
    points.sort_by_key(|p| (p.registers, p.mults));
    let mut out: Vec<CostPoint> = Vec::new();
    for p in points {
        if out.last().is_none_or(|q| p.mults < q.mults) {
            out.push(p);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShorRow {
    pub n: usize,
    pub m: usize,
    pub strategy: String,
    /// Not tracked for the Shor reference.
    pub registers: Option<usize>,
    pub mults: usize,
}

pub const SHOR_COMPARE_N: [usize; 6] = [256, 512, 1024, 2048, 4096, 8192];

/// Multiplication counts versus bit length for direct, default simple,
/// binary and 3-ary schedules next to the `2n` reference.
pub fn shor_comparison(n_values: &[usize], c: f64) -> Result<Vec<ShorRow>, CostError> {
    let mut rows = Vec::new();
    for &n in n_values {
        let m = regev_m(n, c);
        for s in [Strategy::Direct, Strategy::Simple(None), Strategy::Binary, Strategy::Kary(3)] {
            let p = measured(m, s)?;
            rows.push(ShorRow { n, m, strategy: s.to_string(), registers: Some(p.registers), mults: p.mults });
        }
        rows.push(ShorRow { n, m, strategy: "shor".into(), registers: None, mults: shor_reference(n) });
    }
    Ok(rows)
}

/// CSV with header `m,strategy,param,registers,mults,is_bound`.
pub fn write_cost_csv<W: Write>(out: W, rows: &[CostPoint]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_shor_csv<W: Write>(out: W, rows: &[ShorRow]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}


#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn simple_time_within_linear_bound(m in 1usize..=200, kk in 0usize..1000) {
            let k = 1 + kk % (m + 1);
            prop_assert!(t_simple(m, k).unwrap() <= 4 * m as i64 - 2);
        }

        #[test]
        fn best_block_size_near_two_root(m in 1usize..=10_000) {
            let best = (1..=m + 1).map(|k| s_simple(m, k).unwrap()).min().unwrap();
            let root = ((m + 1) as f64).sqrt().ceil() as usize;
            prop_assert!(best <= 2 * root);
        }

        #[test]
        fn strategy_ordering(e in 3u32..8) {
            let m = (1usize << e) - 1;
            let k = pebble::default_simple_k(m);
            let t = t_simple(m, k).unwrap();
            prop_assert!((direct_cost(m).mults as i64) < t);
            prop_assert!(t < t_rec_bound(m, 2, RecursionBase::default()).unwrap() as i64);
        }
    }
}
