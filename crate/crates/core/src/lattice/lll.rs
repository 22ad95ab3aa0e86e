//! LLL reduction of integer row bases.
//!
//! Basis vectors stay integral throughout; the Gram-Schmidt data lives in a
//! field `F`. [`lll_reduce`] uses exact rationals, [`lll_reduce_with`] lets the
//! caller pick another field such as `f64`.

use num_bigint::BigInt;
use num_rational::{BigRational, Rational64};
use num_traits::{Signed, Zero};

use super::{LatticeBasis, LatticeError};
use crate::scalar::{half, is_zero, one, LllField};

pub const DEFAULT_DELTA: (i64, i64) = (3, 4);

/// Gram-Schmidt coefficients `mu[i][j]` (j < i) and squared norms `|b*_i|^2`.
#[derive(Debug, Clone)]
pub struct GramSchmidt<F> {
    pub mu: Vec<Vec<F>>,
    pub norms: Vec<F>,
}

pub fn gram_schmidt<F: LllField>(rows: &[Vec<i64>]) -> GramSchmidt<F> {
    let n = rows.len();
    let dim = rows.first().map_or(0, Vec::len);
    let mut star: Vec<Vec<F>> = Vec::with_capacity(n);
    let mut mu = vec![vec![F::zero(); n]; n];
    let mut norms: Vec<F> = Vec::with_capacity(n);
    for i in 0..n {
        let mut v: Vec<F> = rows[i].iter().map(|&x| F::from_int(x)).collect();
        for j in 0..i {
            if is_zero(&norms[j]) {
                continue;
            }
            let ip = rows[i]
                .iter()
                .zip(&star[j])
                .fold(F::zero(), |acc, (&x, s)| acc + &(F::from_int(x) * s));
            let m = ip / &norms[j];
            for t in 0..dim {
                v[t] = v[t].clone() - &(m.clone() * &star[j][t]);
            }
            mu[i][j] = m;
        }
        mu[i][i] = one();
        norms.push(v.iter().fold(F::zero(), |acc, x| acc + &(x.clone() * x)));
        star.push(v);
    }
    GramSchmidt { mu, norms }
}

/// LLL with exact rational Gram-Schmidt.
pub fn lll_reduce(basis: &LatticeBasis, delta: Rational64) -> Result<LatticeBasis, LatticeError> {
    lll_reduce_with::<BigRational>(basis, delta)
}

pub fn lll_reduce_with<F: LllField>(basis: &LatticeBasis, delta: Rational64) -> Result<LatticeBasis, LatticeError> {
    if !(Rational64::new(1, 4) < delta && delta < Rational64::from_integer(1)) {
        return Err(LatticeError::BadDelta);
    }
    let delta_f = F::from_ratio(*delta.numer(), *delta.denom());
    let mut b = basis.rows.clone();
    let n = b.len();
    if n == 0 {
        return Ok(LatticeBasis { rows: b });
    }
    let mut gs = gram_schmidt::<F>(&b);
    check_rank(&gs)?;

    let mut k = 1;
    while k < n {
        size_reduce(&mut b, &mut gs, k)?;
        let lhs = gs.norms[k].clone();
        let m = gs.mu[k][k - 1].clone();
        let rhs = (delta_f.clone() - &(m.clone() * &m)) * &gs.norms[k - 1];
        if lhs >= rhs {
            k += 1;
        } else {
            b.swap(k, k - 1);
            gs = gram_schmidt::<F>(&b);
            check_rank(&gs)?;
            k = (k - 1).max(1);
        }
    }
    Ok(LatticeBasis { rows: b })
}

fn check_rank<F: LllField>(gs: &GramSchmidt<F>) -> Result<(), LatticeError> {
    let tiny = if F::is_exact() { F::zero() } else { F::from_ratio(1, 1_000_000_000) };
    if gs.norms.iter().any(|x| *x <= tiny) {
        return Err(LatticeError::RankDeficient);
    }
    Ok(())
}

fn size_reduce<F: LllField>(b: &mut [Vec<i64>], gs: &mut GramSchmidt<F>, k: usize) -> Result<(), LatticeError> {
    let h: F = half();
    for j in (0..k).rev() {
        if gs.mu[k][j].abs() <= h {
            continue;
        }
        let q = gs.mu[k][j].round_to_int().ok_or(LatticeError::Overflow)?;
        let (head, tail) = b.split_at_mut(k);
        for (x, &y) in tail[0].iter_mut().zip(&head[j]) {
            *x = q.checked_mul(y).and_then(|t| x.checked_sub(t)).ok_or(LatticeError::Overflow)?;
        }
        let qf = F::from_int(q);
        for l in 0..j {
            let t = qf.clone() * &gs.mu[j][l];
            gs.mu[k][l] = gs.mu[k][l].clone() - &t;
        }
        gs.mu[k][j] = gs.mu[k][j].clone() - &qf;
    }
    Ok(())
}

/// Exact check of size reduction (`|mu_ij| <= 1/2`) and the Lovász condition.
pub fn is_lll_reduced(rows: &[Vec<i64>], delta: Rational64) -> bool {
    let gs = gram_schmidt::<BigRational>(rows);
    let h = BigRational::new(BigInt::from(1), BigInt::from(2));
    let d = BigRational::new(BigInt::from(*delta.numer()), BigInt::from(*delta.denom()));
    for i in 0..rows.len() {
        for j in 0..i {
            if gs.mu[i][j].abs() > h {
                return false;
            }
        }
        if i > 0 {
            let m = &gs.mu[i][i - 1];
            if gs.norms[i] < (d.clone() - m * m) * &gs.norms[i - 1] {
                return false;
            }
        }
    }
    !gs.norms.iter().any(Zero::is_zero)
}


#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    fn full_rank(rows: &[Vec<i64>]) -> bool {
        let gs = gram_schmidt::<BigRational>(rows);
        !gs.norms.iter().any(Zero::is_zero)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn reduction_preserves_lattice_and_is_reduced(
            entries in proptest::collection::vec(-30i64..30, 16),
        ) {
            let rows: Vec<Vec<i64>> = entries.chunks(4).map(|c| c.to_vec()).collect();
            prop_assume!(full_rank(&rows));
            let b = LatticeBasis::new(rows).unwrap();
            let delta = Rational64::new(3, 4);
            let r = lll_reduce(&b, delta).unwrap();
            prop_assert!(is_lll_reduced(&r.rows, delta));
            prop_assert!(r.same_lattice(&b).unwrap());
        }
    }
}
