//! Exact and floating-point transforms between level-`J` grid values and Paley-ordered
//! Walsh coefficients.
//!
//! Digit `j` of a grid point is bit `J - j` of its grid index, while bit `i` of a Paley
//! index selects digit `i + 1`. So `W_n` on the grid is the Hadamard character of
//! `bitrev_J(n)`, and the Paley coefficient `c_n` is the natural-order Hadamard
//! transform at `bitrev_J(n)`, divided by `2^J`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::QS2;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoefficientArray {
    pub level: u32,
    pub coefficients: Vec<QS2>,
}

fn grid_level(len: usize, budget: u32) -> Result<u32> {
    if len == 0 || !len.is_power_of_two() {
        return Err(Error::Invalid(format!("length {len} is not a power of two")));
    }
    let level = len.trailing_zeros();
    if level > budget {
        return Err(Error::BudgetExceeded { level, budget });
    }
    Ok(level)
}

pub fn bit_reverse(n: usize, level: u32) -> usize {
    if level == 0 {
        0
    } else {
        n.reverse_bits() >> (usize::BITS - level)
    }
}

fn hadamard_in_place<T: Clone>(v: &mut [T], add: impl Fn(&T, &T) -> T, sub: impl Fn(&T, &T) -> T) {
    let n = v.len();
    let mut h = 1;
    while h < n {
        for start in (0..n).step_by(2 * h) {
            for i in start..start + h {
                let a = v[i].clone();
                let b = v[i + h].clone();
                v[i] = add(&a, &b);
                v[i + h] = sub(&a, &b);
            }
        }
        h *= 2;
    }
}

fn permute<T: Clone>(v: &[T], level: u32) -> Vec<T> {
    (0..v.len()).map(|n| v[bit_reverse(n, level)].clone()).collect()
}

/// `c_n = ∫ f W_n` for the step function with `values` on the level-`J` grid.
pub fn fwht(values: &[QS2], budget: u32) -> Result<CoefficientArray> {
    let level = grid_level(values.len(), budget)?;
    let mut v = values.to_vec();
    hadamard_in_place(&mut v, |a, b| a + b, |a, b| a - b);
    let coefficients = permute(&v, level).into_iter().map(|c| c.scale_pow2(-(level as i64))).collect();
    Ok(CoefficientArray { level, coefficients })
}

/// Grid values of `sum c_n W_n`.
pub fn inverse_fwht(coeffs: &CoefficientArray, budget: u32) -> Result<Vec<QS2>> {
    let level = grid_level(coeffs.coefficients.len(), budget)?;
    let mut v = permute(&coeffs.coefficients, level);
    hadamard_in_place(&mut v, |a, b| a + b, |a, b| a - b);
    Ok(v)
}

/// Floating-point forward transform, for benchmarking only.
pub fn fwht_f64(values: &[f64]) -> Result<Vec<f64>> {
    let level = grid_level(values.len(), 40)?;
    let mut v = values.to_vec();
    butterflies_f64(&mut v);
    let scale = (-(level as f64)).exp2();
    Ok((0..v.len()).map(|n| v[bit_reverse(n, level)] * scale).collect())
}

pub fn inverse_fwht_f64(coeffs: &[f64]) -> Result<Vec<f64>> {
    let level = grid_level(coeffs.len(), 40)?;
    let mut v: Vec<f64> = (0..coeffs.len()).map(|n| coeffs[bit_reverse(n, level)]).collect();
    butterflies_f64(&mut v);
    Ok(v)
}

fn butterflies_f64(v: &mut [f64]) {
    let n = v.len();
    let mut h = 1;
    while h < n {
        for chunk in v.chunks_mut(2 * h) {
            let (lo, hi) = chunk.split_at_mut(h);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = x + y;
                *b = x - y;
            }
        }
        h *= 2;
    }
}
