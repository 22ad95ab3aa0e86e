//! Reversible pebble game over the squaring chain.
//!
//! Level `l` of the chain holds `a^(2^l)`. Placing a pebble at level `l >= 1`
//! squares the value at `l - 1` into a fresh register; removing it runs the
//! inverse squaring. Level 0 is a multiplication on a freshly prepared
//! register and has no predecessor. A schedule for `m` squarings must end with
//! exactly one pebble, on level `m`.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PebbleError {
    #[error("op {index}: {reason}")]
    IllegalOp { index: usize, reason: String },
    #[error("final configuration {final_levels:?} is not {{{m}}}")]
    WrongTerminal { m: usize, final_levels: Vec<usize> },
    #[error("peak pebble count {peak} differs from declared {declared} registers")]
    RegisterMismatch { peak: usize, declared: usize },
    #[error("invalid block size/arity k = {k} for m = {m}")]
    InvalidK { m: usize, k: usize },
    #[error("invalid ell = {0}")]
    InvalidEll(usize),
    #[error("search exceeded the budget of {0} expanded states")]
    BudgetExceeded(u64),
    #[error("search too large: m = {m}, registers = {registers} (limits m <= 16, registers <= 5)")]
    SearchTooLarge { m: usize, registers: usize },
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OpKind {
    Place,
    Remove,
}

impl OpKind {
    pub fn inverse(self) -> Self {
        match self {
            OpKind::Place => OpKind::Remove,
            OpKind::Remove => OpKind::Place,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PebbleOp {
    pub kind: OpKind,
    pub level: usize,
    pub register: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PebbleSchedule {
    pub m: usize,
    pub num_registers: usize,
    pub ops: Vec<PebbleOp>,
    pub strategy_tag: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ScheduleCost {
    pub registers: usize,
    pub squarings: usize,
    pub controlled_u: usize,
    pub large_mults: usize,
}

impl fmt::Display for ScheduleCost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "regs={} sq={} cu={}", self.registers, self.squarings, self.controlled_u)
    }
}

/// Replays ops from `start` and returns the final level set (sorted) with the
/// op counts. Register bookkeeping is checked against `num_registers`.
fn replay(
    m: usize,
    num_registers: usize,
    ops: &[PebbleOp],
    start: &[(usize, usize)],
) -> Result<(Vec<usize>, usize, usize, usize), PebbleError> {
    // holder[level] = register; owner[register] = level
    let mut holder: Vec<Option<usize>> = vec![None; m + 1];
    let mut owner: Vec<Option<usize>> = vec![None; num_registers];
    for &(level, reg) in start {
        holder[level] = Some(reg);
        owner[reg] = Some(level);
    }
    let mut live = start.len();
    let (mut peak, mut squarings, mut cu) = (live, 0, 0);
    for (index, op) in ops.iter().enumerate() {
        let illegal = |reason: String| PebbleError::IllegalOp { index, reason };
        if op.level > m {
            return Err(illegal(format!("level {} exceeds m = {m}", op.level)));
        }
        if op.register >= num_registers {
            return Err(illegal(format!("register {} out of range", op.register)));
        }
        if op.level > 0 && holder[op.level - 1].is_none() {
            return Err(illegal(format!("no pebble at level {}", op.level - 1)));
        }
        match op.kind {
            OpKind::Place => {
                if holder[op.level].is_some() {
                    return Err(illegal(format!("level {} already pebbled", op.level)));
                }
                if let Some(l) = owner[op.register] {
                    return Err(illegal(format!("register {} holds level {l}", op.register)));
                }
                holder[op.level] = Some(op.register);
                owner[op.register] = Some(op.level);
                live += 1;
            }
            OpKind::Remove => {
                if holder[op.level] != Some(op.register) {
                    return Err(illegal(format!("level {} is not on register {}", op.level, op.register)));
                }
                holder[op.level] = None;
                owner[op.register] = None;
                live -= 1;
            }
        }
        peak = peak.max(live);
        cu += 1;
        if op.level >= 1 {
            squarings += 1;
        }
    }
    let final_levels = (0..=m).filter(|&l| holder[l].is_some()).collect();
    Ok((final_levels, peak, squarings, cu))
}

/// Replays the schedule under the game rules and returns its cost.
pub fn validate(schedule: &PebbleSchedule) -> Result<ScheduleCost, PebbleError> {
    let m = schedule.m;
    let (final_levels, peak, squarings, controlled_u) = replay(m, schedule.num_registers, &schedule.ops, &[])?;
    if final_levels != [m] {
        return Err(PebbleError::WrongTerminal { m, final_levels });
    }
    if peak != schedule.num_registers {
        return Err(PebbleError::RegisterMismatch { peak, declared: schedule.num_registers });
    }
    Ok(ScheduleCost { registers: peak, squarings, controlled_u, large_mults: squarings })
}

/// Ops reversed with Place and Remove swapped. Applied to a valid schedule it
/// runs from the terminal configuration back to the empty one.
pub fn reverse_ops(ops: &[PebbleOp]) -> Vec<PebbleOp> {
    ops.iter().rev().map(|op| PebbleOp { kind: op.kind.inverse(), ..*op }).collect()
}

/// Cost of running the reversed schedule from `{m}` back to the empty board.
pub fn validate_reversed(schedule: &PebbleSchedule) -> Result<ScheduleCost, PebbleError> {
    let m = schedule.m;
    let last = schedule
        .ops
        .iter()
        .rev()
        .find(|op| op.level == m)
        .map_or(0, |op| op.register);
    let rev = reverse_ops(&schedule.ops);
    let (final_levels, peak, squarings, controlled_u) = replay(m, schedule.num_registers, &rev, &[(m, last)])?;
    if !final_levels.is_empty() {
        return Err(PebbleError::WrongTerminal { m, final_levels });
    }
    Ok(ScheduleCost { registers: peak, squarings, controlled_u, large_mults: squarings })
}

/// Assigns registers lowest-free-first to a level-only op sequence.
fn assign(m: usize, steps: &[(OpKind, usize)], tag: String) -> PebbleSchedule {
    let mut holder: Vec<Option<usize>> = vec![None; m + 1];
    let mut in_use: Vec<bool> = Vec::new();
    let mut ops = Vec::with_capacity(steps.len());
    for &(kind, level) in steps {
        let register = match kind {
            OpKind::Place => {
                let r = in_use.iter().position(|&u| !u).unwrap_or_else(|| {
                    in_use.push(false);
                    in_use.len() - 1
                });
                in_use[r] = true;
                holder[level] = Some(r);
                r
            }
            OpKind::Remove => {
                let r = holder[level].take().expect("generator removes only placed levels");
                in_use[r] = false;
                r
            }
        };
        ops.push(PebbleOp { kind, level, register });
    }
    PebbleSchedule { m, num_registers: in_use.len(), ops, strategy_tag: tag }
}

/// Compute every level, then uncompute levels `m-1 .. 0`.
pub fn schedule_direct(m: usize) -> PebbleSchedule {
    let mut steps: Vec<(OpKind, usize)> = (0..=m).map(|l| (OpKind::Place, l)).collect();
    steps.extend((0..m).rev().map(|l| (OpKind::Remove, l)));
    assign(m, &steps, "direct".into())
}

/// Blocks of `k` levels: compute a block, immediately uncompute all but its
/// last level, move on; a final sweep clears the retained block results.
pub fn schedule_simple(m: usize, k: usize) -> Result<PebbleSchedule, PebbleError> {
    if k == 0 || k > m + 1 {
        return Err(PebbleError::InvalidK { m, k });
    }
    let levels = m + 1;
    let blocks: Vec<(usize, usize)> = (0..levels.div_ceil(k)).map(|i| (i * k, k.min(levels - i * k))).collect();
    let mut steps = Vec::new();
    for &(s, l) in &blocks {
        steps.extend((0..l).map(|j| (OpKind::Place, s + j)));
        steps.extend((0..l - 1).rev().map(|j| (OpKind::Remove, s + j)));
    }
    for &(s, l) in blocks[..blocks.len() - 1].iter().rev() {
        steps.extend((0..l - 1).map(|j| (OpKind::Place, s + j)));
        steps.push((OpKind::Remove, s + l - 1));
        steps.extend((0..l - 1).rev().map(|j| (OpKind::Remove, s + j)));
    }
    Ok(assign(m, &steps, format!("simple:k={k}")))
}

/// Default block size `floor(sqrt(m+1))`.
pub fn default_simple_k(m: usize) -> usize {
    ((m + 1).isqrt()).max(1)
}

/// Pebbles `len` levels starting at `start`, leaving only the last one.
///
/// The levels are split into chunks of the largest power of `k` below `len`
/// (so at most `k` chunks). Each chunk is pebbled in turn, then every chunk
/// but the last is unpebbled by running its own sequence backwards.
fn kary_levels(start: usize, len: usize, k: usize, out: &mut Vec<(OpKind, usize)>) {
    if len == 1 {
        out.push((OpKind::Place, start));
        return;
    }
    let mut chunk = 1;
    while chunk * k < len {
        chunk *= k;
    }
    let chunks: Vec<(usize, usize)> =
        (0..len.div_ceil(chunk)).map(|i| (start + i * chunk, chunk.min(len - i * chunk))).collect();
    for &(s, l) in &chunks {
        kary_levels(s, l, k, out);
    }
    for &(s, l) in chunks[..chunks.len() - 1].iter().rev() {
        let mut sub = Vec::new();
        kary_levels(s, l, k, &mut sub);
        out.extend(sub.into_iter().rev().map(|(kind, lv)| (kind.inverse(), lv)));
    }
}

pub fn schedule_kary(m: usize, k: usize) -> Result<PebbleSchedule, PebbleError> {
    if k < 2 {
        return Err(PebbleError::InvalidK { m, k });
    }
    let mut steps = Vec::new();
    kary_levels(0, m + 1, k, &mut steps);
    Ok(assign(m, &steps, format!("kary:k={k}")))
}

/// Two-way recursion. For `m + 1` not a power of two the first half has
/// `2^ceil(log2((m+1)/2))` levels and the remainder is handled recursively.
pub fn schedule_binary(m: usize) -> PebbleSchedule {
    let mut s = schedule_kary(m, 2).expect("k = 2 is valid");
    s.strategy_tag = "binary".into();
    s
}

pub fn variable_arity(m: usize, ell: usize) -> Result<usize, PebbleError> {
    if ell == 0 {
        return Err(PebbleError::InvalidEll(ell));
    }
    let k = ((m + 1) as f64).powf(1.0 / ell as f64).round() as usize;
    Ok(k.max(2))
}

/// k-ary recursion with `k = round((m+1)^(1/ell))`, at least 2.
pub fn schedule_variable(m: usize, ell: usize) -> Result<PebbleSchedule, PebbleError> {
    let k = variable_arity(m, ell)?;
    let mut s = schedule_kary(m, k)?;
    s.strategy_tag = format!("variable:ell={ell}");
    Ok(s)
}

/// `ceil(log2(m+1)) + 1`.
pub fn min_registers(m: usize) -> usize {
    let levels = m + 1;
    (usize::BITS - (levels - 1).leading_zeros()) as usize + 1
}

/// Largest `m` completable with `registers` pebbles: `2^(registers-1) - 1`.
pub fn max_squarings(registers: u32) -> u64 {
    if registers == 0 {
        return 0;
    }
    (1u64 << (registers - 1)) - 1
}

pub const SEARCH_MAX_M: usize = 16;
pub const SEARCH_MAX_REGISTERS: usize = 5;

/// Breadth-first search over pebble configurations with at most `registers`
/// pebbles. Returns a shortest schedule if `{m}` is reachable, `None` if the
/// reachable space is exhausted first. `op_budget` caps expanded states.
pub fn optimal_search(m: usize, registers: usize, op_budget: u64) -> Result<Option<PebbleSchedule>, PebbleError> {
    if m > SEARCH_MAX_M || registers > SEARCH_MAX_REGISTERS {
        return Err(PebbleError::SearchTooLarge { m, registers });
    }
    let states = 1usize << (m + 1);
    let goal = 1u32 << m;
    let mut parent: Vec<Option<(u32, usize)>> = vec![None; states];
    let mut seen = vec![false; states];
    let mut queue = VecDeque::from([0u32]);
    seen[0] = true;
    let mut expanded = 0u64;
    while let Some(state) = queue.pop_front() {
        if state == goal {
            break;
        }
        expanded += 1;
        if expanded > op_budget {
            return Err(PebbleError::BudgetExceeded(op_budget));
        }
        for level in 0..=m {
            if level > 0 && state & (1 << (level - 1)) == 0 {
                continue;
            }
            let next = state ^ (1 << level);
            if next.count_ones() as usize > registers || seen[next as usize] {
                continue;
            }
            seen[next as usize] = true;
            parent[next as usize] = Some((state, level));
            queue.push_back(next);
        }
    }
    if !seen[goal as usize] {
        return Ok(None);
    }
    let mut steps = Vec::new();
    let mut cur = goal;
    while let Some((prev, level)) = parent[cur as usize] {
        let kind = if cur & (1 << level) != 0 { OpKind::Place } else { OpKind::Remove };
        steps.push((kind, level));
        cur = prev;
    }
    steps.reverse();
    Ok(Some(assign(m, &steps, "optimal".into())))
}

/// Named schedule generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Strategy {
    Direct,
    /// `None` picks [`default_simple_k`].
    Simple(Option<usize>),
    Binary,
    Kary(usize),
    Variable(usize),
}

impl Strategy {
    pub fn schedule(&self, m: usize) -> Result<PebbleSchedule, PebbleError> {
        match *self {
            Strategy::Direct => Ok(schedule_direct(m)),
            Strategy::Simple(k) => schedule_simple(m, k.unwrap_or_else(|| default_simple_k(m))),
            Strategy::Binary => Ok(schedule_binary(m)),
            Strategy::Kary(k) => schedule_kary(m, k),
            Strategy::Variable(ell) => schedule_variable(m, ell),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Direct => "direct",
            Strategy::Simple(_) => "simple",
            Strategy::Binary => "binary",
            Strategy::Kary(_) => "kary",
            Strategy::Variable(_) => "variable",
        }
    }

    /// Block size, arity or ell, when the strategy has one.
    pub fn param(&self, m: usize) -> Option<usize> {
        match *self {
            Strategy::Direct | Strategy::Binary => None,
            Strategy::Simple(k) => Some(k.unwrap_or_else(|| default_simple_k(m))),
            Strategy::Kary(k) | Strategy::Variable(k) => Some(k),
        }
    }

    /// Builds a strategy from a name and an optional parameter.
    pub fn from_parts(name: &str, param: Option<usize>) -> Result<Self, String> {
        match (name, param) {
            ("direct", _) => Ok(Strategy::Direct),
            ("binary", _) => Ok(Strategy::Binary),
            ("simple", k) => Ok(Strategy::Simple(k)),
            ("kary", Some(k)) => Ok(Strategy::Kary(k)),
            ("variable", Some(ell)) => Ok(Strategy::Variable(ell)),
            ("kary", None) => Err("kary needs k".into()),
            ("variable", None) => Err("variable needs ell".into()),
            (other, _) => Err(format!("unknown strategy {other:?}")),
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Strategy::Direct => write!(f, "direct"),
            Strategy::Simple(None) => write!(f, "simple"),
            Strategy::Simple(Some(k)) => write!(f, "simple:k={k}"),
            Strategy::Binary => write!(f, "binary"),
            Strategy::Kary(k) => write!(f, "kary:k={k}"),
            Strategy::Variable(ell) => write!(f, "variable:ell={ell}"),
        }
    }
}

impl FromStr for Strategy {
    type Err = String;

    /// Accepts the [`Display`](fmt::Display) forms, e.g. `simple:k=5`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (name, param) = match s.split_once(':') {
            Some((n, p)) => {
                let v = p.split_once('=').map_or(p, |(_, v)| v);
                (n, Some(v.parse::<usize>().map_err(|_| format!("bad parameter in {s:?}"))?))
            }
            None => (s, None),
        };
        Strategy::from_parts(name, param)
    }
}

impl PebbleSchedule {
    pub fn to_text(&self) -> String {
        let mut out = format!("m={} regs={} strategy={}\n", self.m, self.num_registers, self.strategy_tag);
        for op in &self.ops {
            let c = match op.kind {
                OpKind::Place => 'P',
                OpKind::Remove => 'R',
            };
            out.push_str(&format!("{c} {} {}\n", op.level, op.register));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, PebbleError> {
        let err = |line: usize, msg: &str| PebbleError::Parse { line, msg: msg.to_string() };
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| err(1, "empty input"))?;
        let mut m = None;
        let mut regs = None;
        let mut tag = None;
        for tok in header.split_whitespace() {
            match tok.split_once('=') {
                Some(("m", v)) => m = v.parse::<usize>().ok(),
                Some(("regs", v)) => regs = v.parse::<usize>().ok(),
                Some(("strategy", v)) => tag = Some(v.to_string()),
                _ => return Err(err(1, "unexpected header token")),
            }
        }
        let (m, num_registers, strategy_tag) = match (m, regs, tag) {
            (Some(m), Some(r), Some(t)) => (m, r, t),
            _ => return Err(err(1, "header needs m, regs and strategy")),
        };
        let mut ops = Vec::new();
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            let [c, level, reg] = parts[..] else {
                return Err(err(i + 1, "expected `P|R <level> <reg>`"));
            };
            let kind = match c {
                "P" => OpKind::Place,
                "R" => OpKind::Remove,
                _ => return Err(err(i + 1, "op must be P or R")),
            };
            let level = level.parse().map_err(|_| err(i + 1, "bad level"))?;
            let register = reg.parse().map_err(|_| err(i + 1, "bad register"))?;
            ops.push(PebbleOp { kind, level, register });
        }
        Ok(PebbleSchedule { m, num_registers, ops, strategy_tag })
    }
}


#[cfg(test)]
mod proptests {
    use super::{
        min_registers, schedule_binary, schedule_direct, schedule_kary, schedule_simple, schedule_variable, validate,
        validate_reversed, PebbleSchedule,
    };
    use proptest::prelude::*;

    fn any_schedule() -> impl proptest::strategy::Strategy<Value = PebbleSchedule> {
        (1usize..80, 0usize..4, 1usize..80).prop_map(|(m, which, p)| match which {
            0 => schedule_direct(m),
            1 => schedule_simple(m, 1 + p % (m + 1)).unwrap(),
            2 => schedule_kary(m, 2 + p % 6).unwrap(),
            _ => schedule_variable(m, 1 + p % 4).unwrap(),
        })
    }

    proptest! {
        #[test]
        fn generated_schedules_validate(s in any_schedule()) {
            let c = validate(&s).unwrap();
            prop_assert_eq!(c.registers, s.num_registers);
            prop_assert_eq!(c.large_mults, c.squarings);
            prop_assert!(c.controlled_u >= c.squarings);
            prop_assert!(c.squarings + 1 >= 2 * s.m);
            prop_assert!(c.registers >= min_registers(s.m));
        }

        #[test]
        fn level_zero_ops_account_for_gap(s in any_schedule()) {
            let c = validate(&s).unwrap();
            let zero_ops = s.ops.iter().filter(|op| op.level == 0).count();
            prop_assert_eq!(c.controlled_u - c.squarings, zero_ops);
        }

        #[test]
        fn reversed_schedule_mirrors_cost(s in any_schedule()) {
            let fwd = validate(&s).unwrap();
            let back = validate_reversed(&s).unwrap();
            prop_assert_eq!(fwd, back);
        }

        #[test]
        fn text_format_roundtrips(s in any_schedule()) {
            prop_assert_eq!(PebbleSchedule::from_text(&s.to_text()).unwrap(), s);
        }

        #[test]
        fn binary_meets_space_bound_on_powers(e in 1u32..8) {
            let m = (1usize << e) - 1;
            prop_assert_eq!(validate(&schedule_binary(m)).unwrap().registers, min_registers(m));
        }
    }
}
