use num_bigint::BigUint;

use crate::dyadic::{DyadicTree, StepFunction};
use crate::exact::{DyadicRational, QS2};

/// `R_n(x)`: `+1` on even, `-1` on odd cells of the level-`n` grid.
pub fn rademacher(n: u32, x: &DyadicRational) -> i8 {
    assert!(n >= 1, "Rademacher functions start at n = 1");
    if x.digit(n) {
        -1
    } else {
        1
    }
}

/// `W_n(x) = prod R_{k+1}(x)` over the set bits `k` of `n`.
pub fn walsh_eval(n: &BigUint, x: &DyadicRational) -> i8 {
    let mut s = 1i8;
    for k in 0..n.bits() {
        if n.bit(k) && x.digit(k as u32 + 1) {
            s = -s;
        }
    }
    s
}

pub fn walsh_eval_u64(n: u64, x: &DyadicRational) -> i8 {
    walsh_eval(&BigUint::from(n), x)
}

/// `W_n` as a shared tree of depth `bits(n)`.
pub fn walsh_tree(n: &BigUint) -> DyadicTree<i8> {
    let mut pos = DyadicTree::leaf(1i8);
    let mut neg = DyadicTree::leaf(-1i8);
    for k in (0..n.bits()).rev() {
        if n.bit(k) {
            let p = DyadicTree::split(pos.clone(), neg.clone());
            let q = DyadicTree::split(neg, pos);
            pos = p;
            neg = q;
        } else {
            pos = DyadicTree::split(pos.clone(), pos);
            neg = DyadicTree::split(neg.clone(), neg);
        }
    }
    pos
}

pub fn walsh_function(n: &BigUint) -> StepFunction {
    StepFunction::from_tree(walsh_tree(n).map(&|s| QS2::from_int(*s as i64)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x(k: u64, j: u32) -> DyadicRational {
        DyadicRational::from_u64(k, j)
    }

    #[test]
    fn rademacher_examples() {
        assert_eq!(rademacher(1, &x(1, 2)), 1);
        // sin(2^2 pi 3/8) = sin(3 pi / 2) < 0
        assert_eq!(rademacher(2, &x(3, 3)), -1);
        assert_eq!(rademacher(3, &DyadicRational::zero()), 1);
    }

    #[test]
    fn walsh_examples() {
        for k in 0..16 {
            assert_eq!(walsh_eval_u64(0, &x(k, 4)), 1);
        }
        // W_3 = R_1 R_2, at 1/8 both are +1
        assert_eq!(walsh_eval_u64(3, &x(1, 3)), 1);
        assert_eq!(walsh_eval_u64(2, &x(3, 3)), -1);
    }

    #[test]
    fn tree_matches_pointwise() {
        for n in 0u64..64 {
            let t = walsh_tree(&BigUint::from(n));
            for g in 0..128u64 {
                let p = x(g, 7);
                assert_eq!(*t.eval(&p), walsh_eval_u64(n, &p), "n={n} g={g}");
            }
        }
    }

    #[test]
    fn sin_sign_oracle() {
        // sign(sin(2^n pi x)) at cell midpoints, independent of the digit logic
        for n in 1..8u32 {
            for g in 0..256u64 {
                let mid = (g as f64 + 0.5) / 256.0;
                let s = (2f64.powi(n as i32) * std::f64::consts::PI * mid).sin();
                let expect = if s > 0.0 { 1 } else { -1 };
                assert_eq!(rademacher(n, &x(g, 8)), expect);
            }
        }
    }
}
