//! Gate-level circuits: initialization, modular exponentiation and the QFT.
//!
//! Qubit `q` is bit `q` of a state-vector index. Control qubits come first:
//! dimension `i` occupies qubits `i*t .. i*t + t` with the most significant
//! bit on the highest qubit, so the dimension value is `(index >> i*t) & (D-1)`.
//! `control_qubits[i]` lists those qubits most significant first. Computation
//! registers follow, `w` qubits each, listed least significant first.
//!
//! Multipliers act on a compressed encoding of the orbit of 1 under the `a_i`
//! and are emitted as permutation gates whose tables come straight from
//! modular arithmetic.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numtheory::{self, mod_inverse, mod_pow, mul_mod, NumTheoryError};
use crate::params::{gaussian_profile, FactoringParams};
use crate::pebble::{self, OpKind, PebbleError, PebbleSchedule, Strategy};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CircuitError {
    #[error("permutation table is not a bijection on {0} states")]
    NotBijection(usize),
    #[error("gate {index}: {reason}")]
    BadGate { index: usize, reason: String },
    #[error("orbit of 1 has more than {limit} residues")]
    TooLarge { limit: usize },
    #[error("schedule invalid: {0}")]
    ScheduleInvalid(#[from] PebbleError),
    #[error("schedule has m = {got}, parameters need m = {want}")]
    ScheduleMismatch { got: usize, want: usize },
    #[error("t = {t} exceeds log D = {log_grid}")]
    BadInit { t: u32, log_grid: u32 },
    #[error(transparent)]
    NumTheory(#[from] NumTheoryError),
}

/// Basis-state permutation on `targets`, applied where every control is 1.
///
/// The local index is `sum_k bit(targets[k]) << k`; the gate maps local state
/// `s` to `table[s]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PermGate {
    pub targets: Vec<usize>,
    pub controls: Vec<usize>,
    pub table: Vec<u64>,
    pub label: String,
}

impl PermGate {
    pub fn new(targets: Vec<usize>, controls: Vec<usize>, table: Vec<u64>, label: impl Into<String>) -> Result<Self, CircuitError> {
        let size = 1usize << targets.len();
        if table.len() != size {
            return Err(CircuitError::NotBijection(size));
        }
        let mut seen = vec![false; size];
        for &v in &table {
            let v = v as usize;
            if v >= size || seen[v] {
                return Err(CircuitError::NotBijection(size));
            }
            seen[v] = true;
        }
        Ok(PermGate { targets, controls, table, label: label.into() })
    }

    pub fn inverse_table(&self) -> Vec<u64> {
        let mut inv = vec![0; self.table.len()];
        for (s, &v) in self.table.iter().enumerate() {
            inv[v as usize] = s as u64;
        }
        inv
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Gate {
    H { qubit: usize },
    X { qubit: usize },
    /// `diag(1, 1, 1, e^{i angle})` on (control, target).
    ControlledPhase { control: usize, target: usize, angle: f64 },
    Swap { a: usize, b: usize },
    Perm(PermGate),
    /// Loads `amplitudes` (local index as in [`PermGate`]) into targets that
    /// are all in `|0>`.
    AmpInit { targets: Vec<usize>, amplitudes: Vec<Complex64> },
}

impl Gate {
    /// Qubits the gate acts on, controls included.
    pub fn qubits(&self) -> Vec<usize> {
        match self {
            Gate::H { qubit } | Gate::X { qubit } => vec![*qubit],
            Gate::ControlledPhase { control, target, .. } => vec![*control, *target],
            Gate::Swap { a, b } => vec![*a, *b],
            Gate::Perm(p) => p.targets.iter().chain(&p.controls).copied().collect(),
            Gate::AmpInit { targets, .. } => targets.clone(),
        }
    }

    /// Whether the gate maps basis states to basis states.
    pub fn is_classical(&self) -> bool {
        matches!(self, Gate::X { .. } | Gate::Swap { .. } | Gate::Perm(_))
    }
}

/// Injective code from orbit residues to `width`-bit patterns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateEncoding {
    pub modulus: u64,
    pub orbit: Vec<u64>,
    pub width: usize,
    /// `codes[k]` encodes `orbit[k]`.
    pub codes: Vec<u64>,
}

/// Orbit size limit for [`orbit_residues`].
pub const ORBIT_LIMIT: usize = 1 << 12;

/// Code table for the orbit `1, 4, 16, 29, 11, 9` modulo 35.
const N35_ORBIT: [u64; 6] = [1, 4, 16, 29, 11, 9];
const N35_CODES: [u64; 6] = [0b001, 0b111, 0b010, 0b101, 0b011, 0b110];

/// Residues reachable from 1 by multiplying with the `a_i`.
///
/// Order: for each `a_i` in turn, walk the list built so far and append every
/// new product; repeat until nothing changes.
pub fn orbit_list(squares: &[u64], modulus: u64) -> Result<Vec<u64>, CircuitError> {
    let mut orbit = vec![1 % modulus];
    let mut changed = true;
    while changed {
        changed = false;
        for &a in squares {
            let mut k = 0;
            while k < orbit.len() {
                let y = mul_mod(orbit[k], a, modulus);
                if !orbit.contains(&y) {
                    if orbit.len() == ORBIT_LIMIT {
                        return Err(CircuitError::TooLarge { limit: ORBIT_LIMIT });
                    }
                    orbit.push(y);
                    changed = true;
                }
                k += 1;
            }
        }
    }
    Ok(orbit)
}

/// Orbit encoding for the parameters. The modulus-35 orbit uses the fixed
/// reference table; anything else gets sequential codes.
pub fn orbit_residues(params: &FactoringParams) -> Result<StateEncoding, CircuitError> {
    let orbit = orbit_list(&params.squares, params.n_value)?;
    if params.n_value == 35 && orbit == N35_ORBIT {
        return Ok(StateEncoding { modulus: 35, orbit, width: 3, codes: N35_CODES.to_vec() });
    }
    Ok(StateEncoding::sequential(params.n_value, orbit))
}

impl StateEncoding {
    /// Codes in orbit order, starting at 1 when there is room so that the
    /// all-zero pattern stays free; otherwise starting at 0.
    pub fn sequential(modulus: u64, orbit: Vec<u64>) -> Self {
        let width = (usize::BITS - (orbit.len().max(1) - 1).leading_zeros()).max(1) as usize;
        let start = u64::from(orbit.len() < (1usize << width));
        let codes = (0..orbit.len() as u64).map(|k| k + start).collect();
        StateEncoding { modulus, orbit, width, codes }
    }

    pub fn encode(&self, residue: u64) -> Option<u64> {
        self.orbit.iter().position(|&r| r == residue).map(|k| self.codes[k])
    }

    pub fn decode(&self, code: u64) -> Option<u64> {
        self.codes.iter().position(|&c| c == code).map(|k| self.orbit[k])
    }

    /// `enc(x) -> enc(c x)` on codes, identity on unused patterns.
    pub fn multiply_table(&self, c: u64) -> Vec<u64> {
        let mut table: Vec<u64> = (0..1u64 << self.width).collect();
        for (&x, &code) in self.orbit.iter().zip(&self.codes) {
            let y = mul_mod(x, c, self.modulus);
            table[code as usize] = self.encode(y).expect("orbit closed under its generators");
        }
        table
    }

    /// `|s>|t> -> |s>|t xor enc(dec(s)^2)>` with `s` in the low `width` bits.
    pub fn square_table(&self) -> Vec<u64> {
        let w = self.width;
        let mask = (1u64 << w) - 1;
        (0..1u64 << (2 * w))
            .map(|x| {
                let (s, t) = (x & mask, x >> w);
                match self.decode(s) {
                    Some(v) => {
                        let sq = self.encode(mul_mod(v, v, self.modulus)).expect("orbit closed under squaring");
                        s | ((t ^ sq) << w)
                    }
                    None => x,
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    pub num_qubits: usize,
    pub gates: Vec<Gate>,
    /// Per dimension, most significant qubit first.
    pub control_qubits: Vec<Vec<usize>>,
    /// Least significant qubit first.
    pub result_register: Vec<usize>,
    pub ancilla_registers: Vec<Vec<usize>>,
    pub encoding: StateEncoding,
    pub grid: u64,
}

impl Circuit {
    /// Measured qubits in outcome order: dimension blocks, each MSB first.
    pub fn measured_qubits(&self) -> Vec<usize> {
        self.control_qubits.concat()
    }

    pub fn count_label(&self, label: &str) -> usize {
        self.gates.iter().filter(|g| matches!(g, Gate::Perm(p) if p.label == label)).count()
    }

    /// Checks qubit ranges, distinct operands and permutation tables.
    pub fn check(&self) -> Result<(), CircuitError> {
        for (index, gate) in self.gates.iter().enumerate() {
            let bad = |reason: String| CircuitError::BadGate { index, reason };
            let qs = gate.qubits();
            if let Some(&q) = qs.iter().find(|&&q| q >= self.num_qubits) {
                return Err(bad(format!("qubit {q} out of range")));
            }
            let mut sorted = qs.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != qs.len() {
                return Err(bad("repeated qubit".into()));
            }
            match gate {
                Gate::Perm(p) => {
                    PermGate::new(p.targets.clone(), p.controls.clone(), p.table.clone(), p.label.clone())
                        .map_err(|e| bad(e.to_string()))?;
                }
                Gate::AmpInit { targets, amplitudes } => {
                    if amplitudes.len() != 1 << targets.len() {
                        return Err(bad("amplitude vector length".into()));
                    }
                    let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
                    if (norm - 1.0).abs() > 1e-9 {
                        return Err(bad(format!("amplitudes have norm^2 {norm}")));
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }

    pub fn from_json(text: &str) -> Result<Self, String> {
        let c: Circuit = serde_json::from_str(text).map_err(|e| e.to_string())?;
        c.check().map_err(|e| e.to_string())?;
        Ok(c)
    }
}

/// Control layout for `d` dimensions of `t` qubits each.
pub fn control_layout(d: usize, t: usize) -> Vec<Vec<usize>> {
    (0..d).map(|i| (0..t).rev().map(|b| i * t + b).collect()).collect()
}

fn register_qubits(base: usize, width: usize, r: usize) -> Vec<usize> {
    (0..width).map(|b| base + r * width + b).collect()
}

fn prep_gates(enc: &StateEncoding, reg: &[usize]) -> Vec<Gate> {
    let one = enc.encode(1).expect("1 is in every orbit");
    reg.iter().enumerate().filter(|(b, _)| one >> b & 1 == 1).map(|(_, &q)| Gate::X { qubit: q }).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InitMode {
    Uniform,
    /// Gaussian amplitudes on the top `t` qubits of each dimension, uniform below.
    GaussianTop(u32),
}

pub fn build_init(params: &FactoringParams, mode: InitMode, layout: &[Vec<usize>]) -> Result<Vec<Gate>, CircuitError> {
    let t = match mode {
        InitMode::Uniform => 0,
        InitMode::GaussianTop(t) => t,
    };
    if t > params.log_grid {
        return Err(CircuitError::BadInit { t, log_grid: params.log_grid });
    }
    let mut gates = Vec::new();
    let top: Vec<Complex64> = if t > 0 {
        gaussian_profile::<f64>(params.width, params.grid, t)
            .top_marginal(t)
            .into_iter()
            .map(|a| Complex64::new(a, 0.0))
            .collect()
    } else {
        Vec::new()
    };
    for dim in layout {
        let t = t as usize;
        if t > 0 {
            // local index wants least significant first
            let targets: Vec<usize> = dim[..t].iter().rev().copied().collect();
            gates.push(Gate::AmpInit { targets, amplitudes: top.clone() });
        }
        gates.extend(dim[t..].iter().map(|&q| Gate::H { qubit: q }));
    }
    Ok(gates)
}

fn multiply_gate(enc: &StateEncoding, reg: &[usize], control: usize, c: u64, label: &str) -> Gate {
    Gate::Perm(PermGate { targets: reg.to_vec(), controls: vec![control], table: enc.multiply_table(c), label: label.into() })
}

/// Square-and-multiply exponentiation following a pebble schedule.
///
/// Place(l) squares the level `l-1` register into a fresh one (or prepares
/// `enc(1)` at level 0), then multiplies by each `a_i` controlled on the bit of
/// dimension `i` with weight `2^(m-l)`. Remove(l) runs the same gates inverted
/// in reverse order.
pub fn build_modexp_square_multiply(
    params: &FactoringParams,
    schedule: &PebbleSchedule,
    enc: &StateEncoding,
) -> Result<Circuit, CircuitError> {
    pebble::validate(schedule)?;
    let t = params.log_grid as usize;
    let m = t - 1;
    if schedule.m != m {
        return Err(CircuitError::ScheduleMismatch { got: schedule.m, want: m });
    }
    let d = params.d;
    let layout = control_layout(d, t);
    let base = d * t;
    let w = enc.width;
    let n = params.n_value;
    let inverses: Vec<u64> = params.squares.iter().map(|&a| mod_inverse(a, n)).collect::<Result<_, _>>()?;

    let mut holder: Vec<Option<usize>> = vec![None; m + 1];
    let mut gates = Vec::new();
    for op in &schedule.ops {
        let reg = register_qubits(base, w, op.register);
        let control_of = |i: usize| layout[i][op.level];
        let square = |src: usize| {
            let targets: Vec<usize> = register_qubits(base, w, src).into_iter().chain(reg.iter().copied()).collect();
            Gate::Perm(PermGate { targets, controls: vec![], table: enc.square_table(), label: "sq".into() })
        };
        match op.kind {
            OpKind::Place => {
                if op.level == 0 {
                    gates.extend(prep_gates(enc, &reg));
                } else {
                    gates.push(square(holder[op.level - 1].expect("validated")));
                }
                for (i, &a) in params.squares.iter().enumerate() {
                    gates.push(multiply_gate(enc, &reg, control_of(i), a, "mul"));
                }
                holder[op.level] = Some(op.register);
            }
            OpKind::Remove => {
                for i in (0..d).rev() {
                    gates.push(multiply_gate(enc, &reg, control_of(i), inverses[i], "mulinv"));
                }
                if op.level == 0 {
                    gates.extend(prep_gates(enc, &reg));
                } else {
                    gates.push(square(holder[op.level - 1].expect("validated")));
                }
                holder[op.level] = None;
            }
        }
    }
    let result_reg = holder[m].expect("validated terminal");
    let ancilla_registers =
        (0..schedule.num_registers).filter(|&r| r != result_reg).map(|r| register_qubits(base, w, r)).collect();
    Ok(Circuit {
        num_qubits: base + schedule.num_registers * w,
        gates,
        control_qubits: layout,
        result_register: register_qubits(base, w, result_reg),
        ancilla_registers,
        encoding: enc.clone(),
        grid: params.grid,
    })
}

/// Exponentiation with classically precomputed constants: for each bit from
/// the most significant and each dimension, multiply by `a_i^(2^j)`
/// controlled on that bit.
pub fn build_modexp_precompute(params: &FactoringParams, enc: &StateEncoding) -> Result<Circuit, CircuitError> {
    let t = params.log_grid as usize;
    let d = params.d;
    let layout = control_layout(d, t);
    let reg = register_qubits(d * t, enc.width, 0);
    let mut gates = prep_gates(enc, &reg);
    for p in 0..t {
        for (i, &a) in params.squares.iter().enumerate() {
            let c = mod_pow(a, 1i64 << (t - 1 - p), params.n_value)?.value();
            gates.push(multiply_gate(enc, &reg, layout[i][p], c, "mul"));
        }
    }
    Ok(Circuit {
        num_qubits: d * t + enc.width,
        gates,
        control_qubits: layout,
        result_register: reg,
        ancilla_registers: vec![],
        encoding: enc.clone(),
        grid: params.grid,
    })
}

/// Independent QFT on each dimension, `|x> -> D^-1/2 sum_y e^{2 pi i x y / D} |y>`.
pub fn build_qft(grid: u64, layout: &[Vec<usize>]) -> Vec<Gate> {
    assert!(grid.is_power_of_two(), "D must be a power of two");
    let t = grid.trailing_zeros() as usize;
    let mut gates = Vec::new();
    for dim in layout {
        assert_eq!(dim.len(), t, "layout does not match D");
        for j in 0..t {
            gates.push(Gate::H { qubit: dim[j] });
            for k in j + 1..t {
                gates.push(Gate::ControlledPhase { control: dim[k], target: dim[j], angle: PI / (1u64 << (k - j)) as f64 });
            }
        }
        for j in 0..t / 2 {
            gates.push(Gate::Swap { a: dim[j], b: dim[t - 1 - j] });
        }
    }
    gates
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    SquareMultiply(Strategy),
    Precompute,
}

pub fn build_modexp(params: &FactoringParams, method: Method) -> Result<Circuit, CircuitError> {
    let enc = orbit_residues(params)?;
    match method {
        Method::Precompute => build_modexp_precompute(params, &enc),
        Method::SquareMultiply(s) => {
            let schedule = s.schedule(params.squarings())?;
            build_modexp_square_multiply(params, &schedule, &enc)
        }
    }
}

/// Initialization, exponentiation and QFT.
pub fn build_full(params: &FactoringParams, method: Method, init: InitMode) -> Result<Circuit, CircuitError> {
    let modexp = build_modexp(params, method)?;
    let mut gates = build_init(params, init, &modexp.control_qubits)?;
    gates.extend(modexp.gates);
    gates.extend(build_qft(params.grid, &modexp.control_qubits));
    let c = Circuit { gates, ..modexp };
    c.check()?;
    Ok(c)
}

/// Applies a classical (basis-permuting) circuit to one basis state.
pub fn trace_basis(circuit: &Circuit, mut index: u64) -> Result<u64, CircuitError> {
    for (i, gate) in circuit.gates.iter().enumerate() {
        match gate {
            Gate::X { qubit } => index ^= 1 << qubit,
            Gate::Swap { a, b } => {
                let (x, y) = (index >> a & 1, index >> b & 1);
                if x != y {
                    index ^= (1 << a) | (1 << b);
                }
            }
            Gate::Perm(p) => {
                if p.controls.iter().all(|&c| index >> c & 1 == 1) {
                    let local = p.targets.iter().enumerate().fold(0u64, |acc, (k, &q)| acc | (index >> q & 1) << k);
                    let new = p.table[local as usize];
                    for (k, &q) in p.targets.iter().enumerate() {
                        index = (index & !(1 << q)) | ((new >> k & 1) << q);
                    }
                }
            }
            _ => return Err(CircuitError::BadGate { index: i, reason: "gate is not classical".into() }),
        }
    }
    Ok(index)
}

/// Reads the register value at `qubits` (least significant first).
pub fn read_register(index: u64, qubits: &[usize]) -> u64 {
    qubits.iter().enumerate().fold(0, |acc, (k, &q)| acc | (index >> q & 1) << k)
}

/// Basis index with dimension values `z` on the control register.
pub fn control_index(circuit: &Circuit, z: &[u64]) -> u64 {
    let mut index = 0;
    for (dim, &v) in circuit.control_qubits.iter().zip(z) {
        let t = dim.len();
        for (p, &q) in dim.iter().enumerate() {
            index |= (v >> (t - 1 - p) & 1) << q;
        }
    }
    index
}

/// Problems found by [`check_modexp_exhaustive`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModexpMismatch {
    pub z: Vec<u64>,
    pub expected: u64,
    pub result_code: u64,
    pub dirty_ancilla: bool,
    pub controls_changed: bool,
}

/// Runs every control basis state through the exponentiation circuit and
/// compares the result register with `prod a_i^{z_i} mod N`. Returns the
/// number of states checked, or the first mismatch.
pub fn check_modexp_exhaustive(circuit: &Circuit, params: &FactoringParams) -> Result<usize, ModexpMismatch> {
    let d = params.d;
    let grid = params.grid;
    let total = (grid as usize).pow(d as u32);
    for flat in 0..total {
        let z: Vec<u64> = (0..d).map(|i| (flat / (grid as usize).pow(i as u32)) as u64 % grid).collect();
        let start = control_index(circuit, &z);
        let end = trace_basis(circuit, start).expect("exponentiation circuits are classical");
        let mut expected = 1;
        for (&a, &e) in params.squares.iter().zip(&z) {
            expected = mul_mod(expected, numtheory::mod_pow(a, e as i64, params.n_value).expect("unit").value(), params.n_value);
        }
        let result_code = read_register(end, &circuit.result_register);
        let dirty_ancilla = circuit.ancilla_registers.iter().any(|r| read_register(end, r) != 0);
        let controls_changed = circuit
            .control_qubits
            .iter()
            .flatten()
            .any(|&q| (end ^ start) >> q & 1 == 1);
        if circuit.encoding.decode(result_code) != Some(expected) || dirty_ancilla || controls_changed {
            return Err(ModexpMismatch { z, expected, result_code, dirty_ancilla, controls_changed });
        }
    }
    Ok(total)
}
