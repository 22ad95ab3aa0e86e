//! Instance parameters and the discrete Gaussian amplitude profile.
//!
//! Derived quantities follow the usual selection rules: `d ~ sqrt(n)`,
//! `R > sqrt(2d)`, `D` the smallest power of two with `2 sqrt(d) R <= D`, and
//! `d + 4` samples. The implied measurement error `delta ~ sqrt(d) / (sqrt(2) R)`
//! is not stored; it only matters through the default embedding scale, which
//! is set to `D` so that the post-processing lattice is integral.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numtheory::{self, NumTheoryError};
use crate::scalar::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamsError {
    #[error("N = {0} must be an odd composite")]
    NotOddComposite(u64),
    #[error("N = {0} is a prime power")]
    PrimePower(u64),
    #[error("invalid override: {0}")]
    InvalidOverride(String),
    #[error(transparent)]
    NumTheory(#[from] NumTheoryError),
}

/// Complete parameter record for one factoring instance.
///
/// Serialized field names are part of the config-file contract.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactoringParams {
    #[serde(rename = "N")]
    pub n_value: u64,
    /// Bit length of `N`.
    pub n: u32,
    pub d: usize,
    pub bases: Vec<u64>,
    /// `a_i = b_i^2 mod N`.
    pub squares: Vec<u64>,
    #[serde(rename = "R")]
    pub width: f64,
    #[serde(rename = "D")]
    pub grid: u64,
    #[serde(rename = "log_D")]
    pub log_grid: u32,
    #[serde(rename = "S")]
    pub scale: u64,
    pub num_samples: usize,
}

/// Optional overrides applied on top of the derived defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamOverrides {
    #[serde(default)]
    pub d: Option<usize>,
    #[serde(default)]
    pub bases: Option<Vec<u64>>,
    #[serde(default, rename = "R")]
    pub width: Option<f64>,
    #[serde(default, rename = "D")]
    pub grid: Option<u64>,
    #[serde(default, rename = "S")]
    pub scale: Option<u64>,
    #[serde(default)]
    pub num_samples: Option<usize>,
}

impl ParamOverrides {
    pub fn with_grid(mut self, grid: u64) -> Self {
        self.grid = Some(grid);
        self
    }
}

/// Margin added to `sqrt(2d)` for the default Gaussian width.
pub const WIDTH_MARGIN: f64 = 0.01;

pub fn bit_length(n: u64) -> u32 {
    64 - n.leading_zeros()
}

pub fn derive_params(n_value: u64, overrides: &ParamOverrides) -> Result<FactoringParams, ParamsError> {
    if n_value < 9 || n_value % 2 == 0 || numtheory::is_prime(n_value) {
        return Err(ParamsError::NotOddComposite(n_value));
    }
    if numtheory::is_prime_power(n_value) {
        return Err(ParamsError::PrimePower(n_value));
    }
    let n = bit_length(n_value);

    let d = match overrides.d {
        Some(0) => return Err(ParamsError::InvalidOverride("d must be at least 1".into())),
        Some(d) => d,
        None => ((n as f64).sqrt().round() as usize).max(1),
    };

    let bases = match &overrides.bases {
        Some(b) => {
            if b.len() != d {
                return Err(ParamsError::InvalidOverride(format!("{} bases given for d = {d}", b.len())));
            }
            if let Some(&bad) = b.iter().find(|&&x| x < 2 || numtheory::gcd(x, n_value) != 1) {
                return Err(ParamsError::InvalidOverride(format!("base {bad} is not a unit modulo {n_value}")));
            }
            b.clone()
        }
        None => numtheory::choose_bases(n_value, d)?,
    };
    let squares = bases.iter().map(|&b| numtheory::mul_mod(b, b, n_value)).collect();

    let min_width = (2.0 * d as f64).sqrt();
    let width = match overrides.width {
        Some(r) if !(r.is_finite() && r > min_width) => {
            return Err(ParamsError::InvalidOverride(format!("R = {r} must exceed sqrt(2d) = {min_width:.4}")))
        }
        Some(r) => r,
        None => min_width + WIDTH_MARGIN,
    };

    let grid = match overrides.grid {
        Some(g) if g < 2 || !g.is_power_of_two() => {
            return Err(ParamsError::InvalidOverride(format!("D = {g} is not a power of two >= 2")))
        }
        Some(g) => g,
        None => {
            let lower = 2.0 * (d as f64).sqrt() * width;
            (lower.ceil() as u64).next_power_of_two().max(2)
        }
    };
    let log_grid = grid.trailing_zeros();

    let scale = match overrides.scale {
        Some(0) => return Err(ParamsError::InvalidOverride("S must be positive".into())),
        Some(s) => s,
        None => grid,
    };
    let num_samples = match overrides.num_samples {
        Some(0) => return Err(ParamsError::InvalidOverride("num_samples must be at least 1".into())),
        Some(m) => m,
        None => d + 4,
    };

    Ok(FactoringParams { n_value, n, d, bases, squares, width, grid, log_grid, scale, num_samples })
}

impl FactoringParams {
    /// Number of squarings in the square-and-multiply chain: `log D - 1`.
    pub fn squarings(&self) -> usize {
        self.log_grid as usize - 1
    }

    /// Whether `2 sqrt(d) R <= D < 4 sqrt(d) R` holds. Overrides may relax it.
    pub fn satisfies_grid_bounds(&self) -> bool {
        let unit = (self.d as f64).sqrt() * self.width;
        let g = self.grid as f64;
        2.0 * unit <= g && g < 4.0 * unit
    }

    /// Implied measurement error scale `sqrt(d) / (sqrt(2) R)`.
    pub fn implied_delta(&self) -> f64 {
        (self.d as f64).sqrt() / (2f64.sqrt() * self.width)
    }

    /// Checks the record's hard invariants, as needed after deserialization.
    pub fn validate(&self) -> Result<(), ParamsError> {
        let bad = |m: String| Err(ParamsError::InvalidOverride(m));
        if self.bases.len() != self.d || self.squares.len() != self.d {
            return bad("bases/squares length differs from d".into());
        }
        if self.grid < 2 || !self.grid.is_power_of_two() || self.grid.trailing_zeros() != self.log_grid {
            return bad(format!("D = {} / log_D = {} inconsistent", self.grid, self.log_grid));
        }
        if !(self.width > (2.0 * self.d as f64).sqrt()) {
            return bad(format!("R = {} must exceed sqrt(2d)", self.width));
        }
        if self.num_samples == 0 || self.scale == 0 {
            return bad("num_samples and S must be positive".into());
        }
        for (&b, &a) in self.bases.iter().zip(&self.squares) {
            if numtheory::gcd(b, self.n_value) != 1 {
                return bad(format!("base {b} shares a factor with N"));
            }
            if numtheory::mul_mod(b, b, self.n_value) != a {
                return bad(format!("square of {b} is not {a}"));
            }
        }
        Ok(())
    }
}

/// Per-dimension amplitude profile over register values `u` in `[0, D)`,
/// representing `z = u - D/2` when `centered`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianProfile<T> {
    pub amplitudes: Vec<T>,
    pub width: T,
    pub centered: bool,
}

/// `rho_R(z) = exp(-pi z^2 / R^2)`.
pub fn gaussian_weight<T: Real>(z: T, width: T) -> T {
    (-T::PI() * z * z / (width * width)).exp()
}

/// Amplitude profile where only the top `exact_top_qubits` qubits follow the
/// Gaussian and the rest are uniform.
///
/// Each block of `2^(log D - t)` consecutive values gets the Gaussian weight
/// at the block's midpoint. `t = log D` gives the exact profile and `t = 0`
/// the uniform one. The result has unit L2 norm.
pub fn gaussian_profile<T: Real>(width: T, grid: u64, exact_top_qubits: u32) -> GaussianProfile<T> {
    assert!(grid.is_power_of_two(), "D must be a power of two");
    let log_grid = grid.trailing_zeros();
    assert!(exact_top_qubits <= log_grid, "t exceeds log D");
    let block = 1u64 << (log_grid - exact_top_qubits);
    let half = T::of(grid as f64 / 2.0);
    let offsets: Vec<T> = (0..grid)
        .map(|u| {
            let start = u - u % block;
            T::of(start as f64 + (block as f64 - 1.0) / 2.0) - half
        })
        .collect();
    // Scale by the largest weight first so coarse blocks far from the centre
    // cannot underflow every entry to zero.
    let z_min = offsets.iter().fold(T::infinity(), |m, z| m.min(z.abs()));
    let mut amplitudes: Vec<T> = offsets
        .iter()
        .map(|&z| (-T::PI() * (z * z - z_min * z_min) / (width * width)).exp())
        .collect();
    let norm = amplitudes.iter().map(|&a| a * a).sum::<T>().sqrt();
    for a in &mut amplitudes {
        *a = *a / norm;
    }
    GaussianProfile { amplitudes, width, centered: true }
}

impl<T: Real> GaussianProfile<T> {
    pub fn norm(&self) -> T {
        self.amplitudes.iter().map(|&a| a * a).sum::<T>().sqrt()
    }

    /// Amplitudes of the top `t` qubits: block-wise L2 mass.
    pub fn top_marginal(&self, exact_top_qubits: u32) -> Vec<T> {
        let grid = self.amplitudes.len();
        let blocks = 1usize << exact_top_qubits;
        let size = grid / blocks;
        self.amplitudes.chunks(size).map(|c| c.iter().map(|&a| a * a).sum::<T>().sqrt()).collect()
    }
}


#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn derived_grid_meets_both_bounds(n in 15u64..1_000_000) {
            if let Ok(p) = derive_params(n, &ParamOverrides::default()) {
                prop_assert!(p.satisfies_grid_bounds());
                prop_assert_eq!(&p, &derive_params(n, &ParamOverrides::default()).unwrap());
            }
        }

        #[test]
        fn profiles_have_unit_norm(width in 1.5f64..40.0, log_grid in 1u32..9, t in 0u32..9) {
            let t = t.min(log_grid);
            let g = gaussian_profile(width, 1 << log_grid, t);
            prop_assert!((g.norm() - 1.0).abs() < 1e-12);
        }
    }
}
