//! Row-style Hermite normal form over the integers, used to compare lattices.

use num_integer::Integer;

use super::LatticeError;

/// Hermite normal form of the lattice generated by the given integer rows.
///
/// The result is in row echelon form with positive pivots and every entry
/// above a pivot reduced into `[0, pivot)`. Zero rows are dropped, so the
/// output has one row per unit of rank. Two generating sets span the same
/// lattice iff their forms are equal.
pub fn hermite_normal_form(rows: &[Vec<i64>]) -> Result<Vec<Vec<i64>>, LatticeError> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(LatticeError::Ragged);
    }
    let mut a: Vec<Vec<i128>> = rows.iter().map(|r| r.iter().map(|&x| x as i128).collect()).collect();
    let mut pivot_row = 0;
    let mut pivots = Vec::new();
    for col in 0..ncols {
        if pivot_row == a.len() {
            break;
        }
        // Euclid down the column until a single non-zero entry remains.
        loop {
            let nonzero: Vec<usize> = (pivot_row..a.len()).filter(|&r| a[r][col] != 0).collect();
            if nonzero.len() <= 1 {
                if let Some(&r) = nonzero.first() {
                    a.swap(pivot_row, r);
                }
                break;
            }
            let best = *nonzero.iter().min_by_key(|&&r| a[r][col].abs()).expect("non-empty");
            a.swap(pivot_row, best);
            for r in pivot_row + 1..a.len() {
                if a[r][col] != 0 {
                    let q = Integer::div_floor(&a[r][col], &a[pivot_row][col]);
                    let (top, rest) = a.split_at_mut(r);
                    sub_multiple(&mut rest[0], &top[pivot_row], q)?;
                }
            }
        }
        if a[pivot_row][col] == 0 {
            continue;
        }
        if a[pivot_row][col] < 0 {
            for x in a[pivot_row].iter_mut() {
                *x = -*x;
            }
        }
        pivots.push((pivot_row, col));
        pivot_row += 1;
    }
    a.truncate(pivot_row);
    for &(pr, col) in &pivots {
        let p = a[pr][col];
        for r in 0..pr {
            let q = Integer::div_floor(&a[r][col], &p);
            if q != 0 {
                let pivot = a[pr].clone();
                sub_multiple(&mut a[r], &pivot, q)?;
            }
        }
    }
    a.into_iter()
        .map(|row| row.into_iter().map(|x| i64::try_from(x).map_err(|_| LatticeError::Overflow)).collect())
        .collect()
}

fn sub_multiple(row: &mut [i128], pivot: &[i128], q: i128) -> Result<(), LatticeError> {
    for (x, &p) in row.iter_mut().zip(pivot) {
        *x = q.checked_mul(p).and_then(|t| x.checked_sub(t)).ok_or(LatticeError::Overflow)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_is_fixed() {
        let id = vec![vec![1, 0], vec![0, 1]];
        assert_eq!(hermite_normal_form(&id).unwrap(), id);
    }

    #[test]
    fn small_example() {
        let b = vec![vec![2, 0], vec![1, 1]];
        assert_eq!(hermite_normal_form(&b).unwrap(), vec![vec![1, 1], vec![0, 2]]);
        let c = vec![vec![1, 1], vec![3, 1]];
        assert_eq!(hermite_normal_form(&c).unwrap(), vec![vec![1, 1], vec![0, 2]]);
    }

    #[test]
    fn redundant_generators_collapse() {
        let g = vec![vec![6, 0], vec![0, 6], vec![1, 1], vec![2, 2], vec![5, 5]];
        assert_eq!(hermite_normal_form(&g).unwrap(), vec![vec![1, 1], vec![0, 6]]);
    }

    #[test]
    fn ragged_rejected() {
        assert_eq!(hermite_normal_form(&[vec![1, 2], vec![3]]), Err(LatticeError::Ragged));
    }
}
