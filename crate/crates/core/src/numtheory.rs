//! Modular arithmetic over `Z/NZ`, the exponent lattice `L` and its
//! sublattice `L0`, and factor extraction from lattice vectors.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use num_integer::Integer;
use num_rational::Rational64;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::hnf::hermite_normal_form;
use crate::params::FactoringParams;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NumTheoryError {
    #[error("modulus must be at least 2, got {0}")]
    BadModulus(u64),
    #[error("{base} is not invertible modulo {modulus} (gcd = {gcd})")]
    NonInvertible { base: u64, modulus: u64, gcd: u64 },
    #[error("{base} and {modulus} are not coprime")]
    NotCoprime { base: u64, modulus: u64 },
    #[error("fewer than {wanted} primes coprime to {modulus} below {bound}")]
    Exhausted { modulus: u64, wanted: usize, bound: u64 },
    #[error("enumeration too large: {0}")]
    TooLarge(String),
}

/// An element of `Z/NZ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Residue {
    value: u64,
    modulus: u64,
}

impl Residue {
    pub fn new(value: u64, modulus: u64) -> Result<Self, NumTheoryError> {
        if modulus < 2 {
            return Err(NumTheoryError::BadModulus(modulus));
        }
        Ok(Self { value: value % modulus, modulus })
    }

    pub fn value(&self) -> u64 {
        self.value
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    pub fn mul(self, other: Residue) -> Residue {
        debug_assert_eq!(self.modulus, other.modulus);
        Residue { value: mul_mod(self.value, other.value, self.modulus), modulus: self.modulus }
    }

    pub fn is_one(&self) -> bool {
        self.value == 1
    }

    /// True for `1` and `N - 1`.
    pub fn is_plus_minus_one(&self) -> bool {
        self.value == 1 || self.value == self.modulus - 1
    }
}

impl fmt::Display for Residue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (mod {})", self.value, self.modulus)
    }
}

/// Integer exponent vector `z` in `Z^d`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ExponentVector(pub Vec<i64>);

impl ExponentVector {
    pub fn zeros(d: usize) -> Self {
        Self(vec![0; d])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&x| x == 0)
    }

    pub fn negated(&self) -> Self {
        Self(self.0.iter().map(|&x| -x).collect())
    }

    pub fn add(&self, other: &Self) -> Self {
        Self(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }
}

impl From<Vec<i64>> for ExponentVector {
    fn from(v: Vec<i64>) -> Self {
        Self(v)
    }
}

impl fmt::Display for ExponentVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, x) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{x}")?;
        }
        write!(f, ")")
    }
}

pub fn mul_mod(a: u64, b: u64, n: u64) -> u64 {
    ((a as u128 * b as u128) % n as u128) as u64
}

pub fn gcd(a: u64, b: u64) -> u64 {
    a.gcd(&b)
}

/// Inverse of `a` modulo `n` by the extended Euclidean algorithm.
pub fn mod_inverse(a: u64, n: u64) -> Result<u64, NumTheoryError> {
    if n < 2 {
        return Err(NumTheoryError::BadModulus(n));
    }
    let eg = (a as i128 % n as i128).extended_gcd(&(n as i128));
    if eg.gcd != 1 {
        return Err(NumTheoryError::NonInvertible { base: a, modulus: n, gcd: eg.gcd as u64 });
    }
    Ok(eg.x.rem_euclid(n as i128) as u64)
}

/// `base^exp mod n`; negative exponents go through the modular inverse.
pub fn mod_pow(base: u64, exp: i64, n: u64) -> Result<Residue, NumTheoryError> {
    if n < 2 {
        return Err(NumTheoryError::BadModulus(n));
    }
    let b = if exp < 0 { mod_inverse(base, n)? } else { base % n };
    let mut e = exp.unsigned_abs();
    let mut acc = 1 % n;
    let mut sq = b;
    while e > 0 {
        if e & 1 == 1 {
            acc = mul_mod(acc, sq, n);
        }
        sq = mul_mod(sq, sq, n);
        e >>= 1;
    }
    Residue::new(acc, n)
}

/// Smallest `r >= 1` with `a^r = 1 (mod n)`, by iteration.
pub fn multiplicative_order(a: u64, n: u64) -> Result<u64, NumTheoryError> {
    if n < 2 {
        return Err(NumTheoryError::BadModulus(n));
    }
    if gcd(a % n, n) != 1 {
        return Err(NumTheoryError::NotCoprime { base: a, modulus: n });
    }
    let a = a % n;
    let mut x = a;
    let mut r = 1;
    while x != 1 % n {
        x = mul_mod(x, a, n);
        r += 1;
    }
    Ok(r)
}

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n % 2 == 0 {
        return n == 2;
    }
    let mut p = 3;
    while p * p <= n {
        if n % p == 0 {
            return false;
        }
        p += 2;
    }
    true
}

/// True when `n = p^k` for a prime `p` and `k >= 1`.
pub fn is_prime_power(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut p = 2;
    while p * p <= n {
        if n % p == 0 {
            let mut m = n;
            while m % p == 0 {
                m /= p;
            }
            return m == 1;
        }
        p += 1;
    }
    true
}

/// Default search bound for base selection: `10 d ln(d + 2)`.
pub fn default_prime_bound(d: usize) -> u64 {
    let d = d as f64;
    (10.0 * d * (d + 2.0).ln()).ceil().max(3.0) as u64
}

const PRIME_BOUND_CAP: u64 = 1 << 24;

/// The first `d` primes coprime to `n`, growing the default bound on exhaustion.
pub fn choose_bases(n: u64, d: usize) -> Result<Vec<u64>, NumTheoryError> {
    let mut bound = default_prime_bound(d);
    loop {
        match choose_bases_below(n, d, bound) {
            Err(NumTheoryError::Exhausted { .. }) if bound < PRIME_BOUND_CAP => bound *= 2,
            other => return other,
        }
    }
}

/// The first `d` primes coprime to `n` that are below `bound`.
pub fn choose_bases_below(n: u64, d: usize, bound: u64) -> Result<Vec<u64>, NumTheoryError> {
    let bases: Vec<u64> = (2..bound).filter(|&p| is_prime(p) && gcd(p, n) == 1).take(d).collect();
    if bases.len() < d {
        return Err(NumTheoryError::Exhausted { modulus: n, wanted: d, bound });
    }
    Ok(bases)
}

/// `prod b_i^{z_i} mod N`.
pub fn base_product(z: &ExponentVector, params: &FactoringParams) -> Result<Residue, NumTheoryError> {
    product_of_powers(&params.bases, z, params.n_value)
}

fn product_of_powers(bases: &[u64], z: &ExponentVector, n: u64) -> Result<Residue, NumTheoryError> {
    let mut acc = Residue::new(1, n)?;
    for (&b, &e) in bases.iter().zip(&z.0) {
        acc = acc.mul(mod_pow(b, e, n)?);
    }
    Ok(acc)
}

/// Membership in `L = { z : prod b_i^{2 z_i} = 1 (mod N) }`.
pub fn in_lattice(z: &ExponentVector, params: &FactoringParams) -> bool {
    match base_product(z, params) {
        Ok(b) => b.mul(b).is_one(),
        Err(_) => false,
    }
}

/// Membership in `L0 = { z : prod b_i^{z_i} = +-1 (mod N) }`.
pub fn in_sublattice_l0(z: &ExponentVector, params: &FactoringParams) -> bool {
    match base_product(z, params) {
        Ok(b) => b.is_plus_minus_one(),
        Err(_) => false,
    }
}

/// For `z` in `L \ L0`, returns `(gcd(b - 1, N), gcd(b + 1, N))` with
/// `b = prod b_i^{z_i}`. Returns `None` for vectors outside `L` or inside `L0`.
pub fn extract_factors(z: &ExponentVector, params: &FactoringParams) -> Option<(u64, u64)> {
    let n = params.n_value;
    let b = base_product(z, params).ok()?;
    if !b.mul(b).is_one() || b.is_plus_minus_one() {
        return None;
    }
    let p = gcd(b.value() - 1, n);
    let q = gcd(b.value() + 1, n);
    (p > 1 && q > 1 && p < n && q < n && p as u128 * q as u128 == n as u128).then_some((p, q))
}

/// Bound on the exhaustive box enumerated by [`dual_cosets`].
pub const DUAL_ENUMERATION_LIMIT: u64 = 1 << 20;

/// Coset representatives of `L* / Z^d` in `[0, 1)^d`, where `L` is the
/// relation lattice `{ z : prod a_i^{z_i} = 1 (mod N) }`.
///
/// Desk-scale oracle: enumerates relations in the box bounded by the orders of
/// the `a_i`, takes a Hermite basis of the relation lattice, inverts it exactly
/// and closes the dual basis under addition modulo 1.
pub fn dual_cosets(params: &FactoringParams) -> Result<Vec<Vec<Rational64>>, NumTheoryError> {
    let n = params.n_value;
    let d = params.squares.len();
    let orders: Vec<u64> =
        params.squares.iter().map(|&a| multiplicative_order(a, n)).collect::<Result<_, _>>()?;
    let volume = orders.iter().try_fold(1u64, |acc, &o| acc.checked_mul(o));
    match volume {
        Some(v) if v <= DUAL_ENUMERATION_LIMIT => {}
        _ => return Err(NumTheoryError::TooLarge(format!("orders {orders:?} exceed the enumeration box"))),
    }

    let mut generators: Vec<Vec<i64>> = Vec::new();
    for (i, &o) in orders.iter().enumerate() {
        let mut e = vec![0i64; d];
        e[i] = o as i64;
        generators.push(e);
    }
    for_each_in_box(&orders, |z| {
        if z.iter().any(|&x| x != 0) {
            let ez = ExponentVector(z.to_vec());
            if product_of_powers(&params.squares, &ez, n).map(|r| r.is_one()).unwrap_or(false) {
                generators.push(z.to_vec());
            }
        }
    });

    let basis = hermite_normal_form(&generators)
        .map_err(|e| NumTheoryError::TooLarge(format!("relation basis: {e}")))?;
    let dual = dual_basis(&basis);

    let reduce = |v: &[Rational64]| -> Vec<Rational64> { v.iter().map(|x| x - x.floor()).collect() };
    let mut seen: BTreeSet<Vec<Rational64>> = BTreeSet::new();
    let mut queue = VecDeque::new();
    let origin = vec![Rational64::zero(); d];
    seen.insert(origin.clone());
    queue.push_back(origin);
    while let Some(v) = queue.pop_front() {
        for g in &dual {
            let w = reduce(&v.iter().zip(g).map(|(a, b)| a + b).collect::<Vec<_>>());
            if seen.insert(w.clone()) {
                queue.push_back(w);
            }
        }
    }
    Ok(seen.into_iter().collect())
}

fn for_each_in_box(bounds: &[u64], mut f: impl FnMut(&[i64])) {
    let mut z = vec![0i64; bounds.len()];
    loop {
        f(&z);
        let mut i = 0;
        loop {
            if i == bounds.len() {
                return;
            }
            z[i] += 1;
            if (z[i] as u64) < bounds[i] {
                break;
            }
            z[i] = 0;
            i += 1;
        }
    }
}

/// Rows of `(B^{-1})^T` for a square integer row basis `B`, in exact rationals.
fn dual_basis(basis: &[Vec<i64>]) -> Vec<Vec<Rational64>> {
    let d = basis.len();
    // Gauss-Jordan on [B | I]; the inverse's columns are the dual vectors.
    let mut a: Vec<Vec<Rational64>> = basis
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r: Vec<Rational64> = row.iter().map(|&x| Rational64::from_integer(x)).collect();
            r.extend((0..d).map(|j| if i == j { Rational64::one() } else { Rational64::zero() }));
            r
        })
        .collect();
    for col in 0..d {
        let pivot = (col..d).find(|&r| !a[r][col].is_zero()).expect("full-rank relation basis");
        a.swap(col, pivot);
        let p = a[col][col];
        for x in a[col].iter_mut() {
            *x /= p;
        }
        for r in 0..d {
            if r != col && !a[r][col].is_zero() {
                let f = a[r][col];
                let pivot_row = a[col].clone();
                for (x, y) in a[r].iter_mut().zip(&pivot_row) {
                    *x -= f * y;
                }
            }
        }
    }
    (0..d).map(|j| (0..d).map(|i| a[i][d + j]).collect()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{derive_params, ParamOverrides};

    fn p35() -> FactoringParams {
        derive_params(35, &ParamOverrides::default()).unwrap()
    }

    fn ev(v: &[i64]) -> ExponentVector {
        ExponentVector(v.to_vec())
    }

    #[test]
    fn mod_pow_examples() {
        assert_eq!(mod_pow(4, -1, 35).unwrap().value(), 9);
        assert_eq!(mod_pow(7, 0, 35).unwrap().value(), 1);
        let inv2 = mod_pow(2, -1, 35).unwrap();
        let inv3 = mod_pow(3, -1, 35).unwrap();
        assert_eq!((inv2.value(), inv3.value()), (18, 12));
        assert_eq!(inv2.mul(inv3).value(), 6);
    }

    #[test]
    fn mod_pow_negative_exponent_needs_unit() {
        assert_eq!(
            mod_pow(5, -2, 35),
            Err(NumTheoryError::NonInvertible { base: 5, modulus: 35, gcd: 5 })
        );
        assert!(mod_pow(5, 2, 35).is_ok());
    }

    #[test]
    fn orders() {
        assert_eq!(multiplicative_order(4, 35), Ok(6));
        assert_eq!(multiplicative_order(1, 35), Ok(1));
        assert_eq!(multiplicative_order(9, 35), Ok(6));
        assert!(matches!(multiplicative_order(7, 35), Err(NumTheoryError::NotCoprime { .. })));
    }

    #[test]
    fn base_choice() {
        assert_eq!(choose_bases(35, 2).unwrap(), vec![2, 3]);
        assert_eq!(choose_bases(15, 2).unwrap(), vec![2, 7]);
        assert_eq!(choose_bases(35, 1).unwrap(), vec![2]);
        assert!(matches!(choose_bases_below(15, 2, 6), Err(NumTheoryError::Exhausted { .. })));
        // For d = 1 the default bound is 11; every prime below it divides 210.
        assert_eq!(default_prime_bound(1), 11);
        assert!(matches!(choose_bases_below(210, 1, 11), Err(NumTheoryError::Exhausted { .. })));
        assert_eq!(choose_bases(210, 1).unwrap(), vec![11]);
    }

    #[test]
    fn lattice_membership_examples() {
        let p = p35();
        assert!(in_lattice(&ev(&[-1, -1]), &p));
        assert!(in_lattice(&ev(&[0, 0]), &p));
        assert!(!in_lattice(&ev(&[1, 0]), &p));
        assert!(!in_sublattice_l0(&ev(&[-1, -1]), &p));
        assert!(in_sublattice_l0(&ev(&[0, 0]), &p));
        // 2^6 = 64 = 29 (mod 35), which is neither 1 nor 34.
        assert_eq!(mod_pow(2, 6, 35).unwrap().value(), 29);
        assert!(!in_sublattice_l0(&ev(&[6, 0]), &p));
        assert!(in_lattice(&ev(&[6, 0]), &p));
    }

    #[test]
    fn factor_extraction_examples() {
        let p = p35();
        assert_eq!(extract_factors(&ev(&[-1, -1]), &p), Some((5, 7)));
        assert_eq!(extract_factors(&ev(&[0, 0]), &p), None);
        // 6^6 = 1 (mod 35): inside L0, nothing to extract.
        assert_eq!(mod_pow(6, 6, 35).unwrap().value(), 1);
        assert_eq!(extract_factors(&ev(&[6, 6]), &p), None);
        // 2^6 = 29: gcd(28, 35) = 7, gcd(30, 35) = 5.
        assert_eq!(extract_factors(&ev(&[6, 0]), &p), Some((7, 5)));
    }

    #[test]
    fn dual_cosets_n35() {
        let cosets = dual_cosets(&p35()).unwrap();
        let r = |a, b| Rational64::new(a, b);
        let expected: BTreeSet<Vec<Rational64>> = [
            vec![r(0, 1), r(0, 1)],
            vec![r(1, 6), r(5, 6)],
            vec![r(1, 3), r(2, 3)],
            vec![r(1, 2), r(1, 2)],
            vec![r(2, 3), r(1, 3)],
            vec![r(5, 6), r(1, 6)],
        ]
        .into_iter()
        .collect();
        assert_eq!(cosets.into_iter().collect::<BTreeSet<_>>(), expected);
    }

    #[test]
    fn dual_cosets_round_to_grid_eight() {
        let cosets = dual_cosets(&p35()).unwrap();
        let mut grid: Vec<(i64, i64)> = cosets
            .iter()
            .map(|v| {
                let g = |x: Rational64| ((x * 8).round().to_integer()).rem_euclid(8);
                (g(v[0]), g(v[1]))
            })
            .collect();
        grid.sort();
        assert_eq!(grid, vec![(0, 0), (1, 7), (3, 5), (4, 4), (5, 3), (7, 1)]);
    }

    #[test]
    fn dual_cosets_of_trivial_group() {
        let mut p = p35();
        p.squares = vec![1, 1];
        let cosets = dual_cosets(&p).unwrap();
        assert_eq!(cosets, vec![vec![Rational64::zero(), Rational64::zero()]]);
    }

    #[test]
    fn prime_power_detection() {
        assert!(is_prime_power(9));
        assert!(is_prime_power(7));
        assert!(is_prime_power(125));
        assert!(!is_prime_power(35));
        assert!(!is_prime_power(45));
    }
}

#[cfg(test)]
mod proptests {
    use super::*;
    use crate::params::{derive_params, ParamOverrides};
    use proptest::prelude::*;

    fn p35() -> FactoringParams {
        derive_params(35, &ParamOverrides::default()).unwrap()
    }

    proptest! {
        #[test]
        fn lattice_closed_under_addition(a in -12i64..12, b in -12i64..12, c in -12i64..12, e in -12i64..12) {
            let p = p35();
            let x = ExponentVector(vec![a, b]);
            let y = ExponentVector(vec![c, e]);
            if in_lattice(&x, &p) && in_lattice(&y, &p) {
                prop_assert!(in_lattice(&x.add(&y), &p));
            }
        }

        #[test]
        fn l0_inside_l(a in -20i64..20, b in -20i64..20) {
            let p = p35();
            let z = ExponentVector(vec![a, b]);
            if in_sublattice_l0(&z, &p) {
                prop_assert!(in_lattice(&z, &p));
            }
        }

        #[test]
        fn extracted_factors_multiply_to_n(a in -20i64..20, b in -20i64..20) {
            let p = p35();
            if let Some((x, y)) = extract_factors(&ExponentVector(vec![a, b]), &p) {
                prop_assert_eq!(x * y, 35);
                prop_assert!(x > 1 && y > 1 && x < 35 && y < 35);
            }
        }

        #[test]
        fn order_is_minimal(a in 1u64..200, n in 3u64..200) {
            prop_assume!(gcd(a, n) == 1);
            let r = multiplicative_order(a, n).unwrap();
            prop_assert_eq!(mod_pow(a, r as i64, n).unwrap().value(), 1);
            for e in 1..r {
                prop_assert_ne!(mod_pow(a, e as i64, n).unwrap().value(), 1);
            }
        }

        #[test]
        fn dual_vectors_pair_integrally_with_relations(x in 0i64..12, y in 0i64..12) {
            let p = p35();
            let z = ExponentVector(vec![x, y]);
            let rel = product_of_powers(&p.squares, &z, 35).unwrap().is_one();
            if rel {
                for v in dual_cosets(&p).unwrap() {
                    let ip = v[0] * x + v[1] * y;
                    prop_assert!(ip.is_integer());
                }
            }
        }
    }
}
