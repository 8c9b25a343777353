//! Piecewise-constant functions on `[0,1)` as shared binary trees over binary digits.
//!
//! A node describes a function on its own dyadic cell rescaled to `[0,1)`: a leaf is a
//! constant, a split holds the left and right halves. Splits whose halves are equal
//! leaves are never built, so the leaves of the expanded tree are exactly the maximal
//! dyadic intervals of constancy and structural equality is value equality. Subtrees
//! are shared through `Arc`, which keeps functions like `h(x_1..x_t) R_{t+1}(x)` at
//! depth in the thousands down to `O(t)` nodes.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::hash::Hash;
use std::sync::Arc;

use num_bigint::BigUint;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use super::DyadicInterval;
use crate::error::{Error, Result};
use crate::exact::DyadicRational;

pub struct DyadicTree<T>(Arc<Node<T>>);

enum Node<T> {
    Leaf(T),
    Split(DyadicTree<T>, DyadicTree<T>),
}

impl<T> Clone for DyadicTree<T> {
    fn clone(&self) -> Self {
        DyadicTree(Arc::clone(&self.0))
    }
}

type Key = usize;

impl<T: Clone + PartialEq> DyadicTree<T> {
    pub fn leaf(value: T) -> Self {
        DyadicTree(Arc::new(Node::Leaf(value)))
    }

    /// Join two halves, merging equal constant siblings.
    pub fn split(lo: Self, hi: Self) -> Self {
        if let (Some(a), Some(b)) = (lo.as_leaf(), hi.as_leaf()) {
            if a == b {
                return lo;
            }
        }
        DyadicTree(Arc::new(Node::Split(lo, hi)))
    }

    pub(crate) fn key(&self) -> usize {
        Arc::as_ptr(&self.0) as *const u8 as usize
    }

    pub fn as_leaf(&self) -> Option<&T> {
        match &*self.0 {
            Node::Leaf(v) => Some(v),
            Node::Split(..) => None,
        }
    }

    pub fn children(&self) -> Option<(&Self, &Self)> {
        match &*self.0 {
            Node::Leaf(_) => None,
            Node::Split(lo, hi) => Some((lo, hi)),
        }
    }

    /// `inner` (relative to `cell`) on `cell`, the constant `outside` elsewhere.
    pub fn place(cell: &DyadicInterval, inner: Self, outside: T) -> Self {
        let mut node = inner;
        for depth in (1..=cell.level()).rev() {
            let bit = cell.index().bit((cell.level() - depth) as u64);
            let other = Self::leaf(outside.clone());
            node = if bit { Self::split(other, node) } else { Self::split(node, other) };
        }
        node
    }

    /// Build from disjoint cells carrying relative subtrees; uncovered space gets `fill`.
    pub fn assemble(cells: &[(DyadicInterval, Self)], fill: T) -> Self {
        fn go<T: Clone + PartialEq>(
            items: &[(DyadicInterval, DyadicTree<T>)],
            depth: u32,
            prefix: &BigUint,
            fill: &T,
        ) -> DyadicTree<T> {
            if items.is_empty() {
                return DyadicTree::leaf(fill.clone());
            }
            if items.len() == 1 && items[0].0.level() == depth {
                return items[0].1.clone();
            }
            let left_prefix = prefix << 1u32;
            let right_prefix = &left_prefix + 1u32;
            let (mut lo, mut hi) = (Vec::new(), Vec::new());
            for (cell, t) in items {
                debug_assert!(cell.level() > depth, "overlapping cells");
                let bit = cell.index().bit((cell.level() - depth - 1) as u64);
                if bit {
                    hi.push((cell.clone(), t.clone()));
                } else {
                    lo.push((cell.clone(), t.clone()));
                }
            }
            DyadicTree::split(
                go(&lo, depth + 1, &left_prefix, fill),
                go(&hi, depth + 1, &right_prefix, fill),
            )
        }
        go(cells, 0, &BigUint::zero(), &fill)
    }

    pub fn eval(&self, x: &DyadicRational) -> &T {
        let mut node = self;
        let mut j = 1;
        loop {
            match &*node.0 {
                Node::Leaf(v) => return v,
                Node::Split(lo, hi) => {
                    node = if x.digit(j) { hi } else { lo };
                    j += 1;
                }
            }
        }
    }

    /// The subtree describing the function on `cell`, rescaled to `[0,1)`.
    pub fn restrict(&self, cell: &DyadicInterval) -> Self {
        let mut node = self.clone();
        for depth in 0..cell.level() {
            let next = match &*node.0 {
                Node::Leaf(_) => return node,
                Node::Split(lo, hi) => {
                    if cell.index().bit((cell.level() - depth - 1) as u64) {
                        hi.clone()
                    } else {
                        lo.clone()
                    }
                }
            };
            node = next;
        }
        node
    }

    pub fn map<U: Clone + PartialEq>(&self, f: &impl Fn(&T) -> U) -> DyadicTree<U> {
        fn go<T: Clone + PartialEq, U: Clone + PartialEq>(
            t: &DyadicTree<T>,
            f: &impl Fn(&T) -> U,
            memo: &mut HashMap<Key, DyadicTree<U>>,
        ) -> DyadicTree<U> {
            if let Some(r) = memo.get(&t.key()) {
                return r.clone();
            }
            let r = match &*t.0 {
                Node::Leaf(v) => DyadicTree::leaf(f(v)),
                Node::Split(lo, hi) => DyadicTree::split(go(lo, f, memo), go(hi, f, memo)),
            };
            memo.insert(t.key(), r.clone());
            r
        }
        go(self, f, &mut HashMap::new())
    }

    /// Pointwise combination of two trees.
    pub fn zip<U: Clone + PartialEq, V: Clone + PartialEq>(
        &self,
        other: &DyadicTree<U>,
        f: &impl Fn(&T, &U) -> V,
    ) -> DyadicTree<V> {
        fn go<T: Clone + PartialEq, U: Clone + PartialEq, V: Clone + PartialEq>(
            a: &DyadicTree<T>,
            b: &DyadicTree<U>,
            f: &impl Fn(&T, &U) -> V,
            memo: &mut HashMap<(Key, Key), DyadicTree<V>>,
        ) -> DyadicTree<V> {
            let k = (a.key(), b.key());
            if let Some(r) = memo.get(&k) {
                return r.clone();
            }
            let r = match (&*a.0, &*b.0) {
                (Node::Leaf(x), Node::Leaf(y)) => DyadicTree::leaf(f(x, y)),
                (Node::Split(al, ah), Node::Split(bl, bh)) => {
                    DyadicTree::split(go(al, bl, f, memo), go(ah, bh, f, memo))
                }
                (Node::Leaf(_), Node::Split(bl, bh)) => {
                    DyadicTree::split(go(a, bl, f, memo), go(a, bh, f, memo))
                }
                (Node::Split(al, ah), Node::Leaf(_)) => {
                    DyadicTree::split(go(al, b, f, memo), go(ah, b, f, memo))
                }
            };
            memo.insert(k, r.clone());
            r
        }
        go(self, other, f, &mut HashMap::new())
    }

    /// Reduce over the whole unit interval: leaves map through `leaf`, splits combine the
    /// two half results with `join`. Shared nodes are visited once.
    pub fn fold<R: Clone>(&self, leaf: &impl Fn(&T) -> R, join: &impl Fn(R, R) -> R) -> R {
        fn go<T: Clone + PartialEq, R: Clone>(
            t: &DyadicTree<T>,
            leaf: &impl Fn(&T) -> R,
            join: &impl Fn(R, R) -> R,
            memo: &mut HashMap<Key, R>,
        ) -> R {
            if let Some(r) = memo.get(&t.key()) {
                return r.clone();
            }
            let r = match &*t.0 {
                Node::Leaf(v) => leaf(v),
                Node::Split(lo, hi) => {
                    let a = go(lo, leaf, join, memo);
                    let b = go(hi, leaf, join, memo);
                    join(a, b)
                }
            };
            memo.insert(t.key(), r.clone());
            r
        }
        go(self, leaf, join, &mut HashMap::new())
    }

    /// Deepest split level; a constant has depth 0.
    pub fn depth(&self) -> u32 {
        self.fold(&|_| 0u32, &|a, b| a.max(b) + 1)
    }

    /// Number of distinct shared nodes.
    pub fn node_count(&self) -> usize {
        let mut seen = HashSet::new();
        let mut stack = vec![self.clone()];
        while let Some(t) = stack.pop() {
            if !seen.insert(t.key()) {
                continue;
            }
            if let Node::Split(lo, hi) = &*t.0 {
                stack.push(lo.clone());
                stack.push(hi.clone());
            }
        }
        seen.len()
    }

    /// Number of maximal constant pieces, as an exact integer.
    pub fn piece_count(&self) -> BigUint {
        self.fold(&|_| BigUint::one(), &|a, b| a + b)
    }

    /// Maximal constant pieces in left-to-right order, refused beyond `limit` pieces.
    pub fn pieces(&self, limit: usize) -> Result<Vec<(DyadicInterval, T)>> {
        let count = self.piece_count();
        if count > BigUint::from(limit) {
            return Err(Error::Invalid(format!("{count} pieces exceed the listing limit {limit}")));
        }
        let mut out = Vec::new();
        let mut stack = vec![(self.clone(), DyadicInterval::unit())];
        while let Some((t, cell)) = stack.pop() {
            match &*t.0 {
                Node::Leaf(v) => out.push((cell, v.clone())),
                Node::Split(lo, hi) => {
                    let (l, r) = cell.halves();
                    stack.push((hi.clone(), r));
                    stack.push((lo.clone(), l));
                }
            }
        }
        Ok(out)
    }

    /// Values on the uniform grid of `2^level` cells.
    pub fn grid(&self, level: u32) -> Vec<T> {
        let mut out = Vec::with_capacity(1usize << level);
        fn go<T: Clone + PartialEq>(t: &DyadicTree<T>, rem: u32, out: &mut Vec<T>) {
            match &*t.0 {
                Node::Leaf(v) => out.extend(std::iter::repeat(v.clone()).take(1usize << rem)),
                Node::Split(lo, hi) => {
                    if rem == 0 {
                        // finer than the grid: take the value at the left endpoint
                        let mut n = lo;
                        while let Some((l, _)) = n.children() {
                            n = l;
                        }
                        out.push(n.as_leaf().expect("leaf").clone());
                    } else {
                        go(lo, rem - 1, out);
                        go(hi, rem - 1, out);
                    }
                }
            }
        }
        go(self, level, &mut out);
        out
    }

    /// Inverse of [`grid`](Self::grid): the function with the given values on `2^level` cells.
    pub fn from_grid(values: &[T]) -> Result<Self> {
        let n = values.len();
        if n == 0 || !n.is_power_of_two() {
            return Err(Error::Invalid(format!("grid length {n} is not a power of two")));
        }
        fn go<T: Clone + PartialEq>(v: &[T]) -> DyadicTree<T> {
            if v.len() == 1 {
                return DyadicTree::leaf(v[0].clone());
            }
            let (a, b) = v.split_at(v.len() / 2);
            DyadicTree::split(go(a), go(b))
        }
        Ok(go(values))
    }
}

/// One entry of the shared-node encoding: a leaf value or the ids of two earlier entries.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TableNode<T> {
    Leaf(T),
    Split(usize, usize),
}

impl<T: Clone + PartialEq> DyadicTree<T> {
    /// Shared nodes in post-order; the last entry is the root.
    pub fn to_table(&self) -> Vec<TableNode<T>> {
        fn go<T: Clone + PartialEq>(t: &DyadicTree<T>, ids: &mut HashMap<Key, usize>, out: &mut Vec<TableNode<T>>) -> usize {
            if let Some(&i) = ids.get(&t.key()) {
                return i;
            }
            let node = match &*t.0 {
                Node::Leaf(v) => TableNode::Leaf(v.clone()),
                Node::Split(lo, hi) => {
                    let a = go(lo, ids, out);
                    let b = go(hi, ids, out);
                    TableNode::Split(a, b)
                }
            };
            out.push(node);
            ids.insert(t.key(), out.len() - 1);
            out.len() - 1
        }
        let mut out = Vec::new();
        go(self, &mut HashMap::new(), &mut out);
        out
    }

    pub fn from_table(nodes: &[TableNode<T>]) -> Result<Self> {
        let mut built: Vec<DyadicTree<T>> = Vec::with_capacity(nodes.len());
        for (i, n) in nodes.iter().enumerate() {
            let t = match n {
                TableNode::Leaf(v) => DyadicTree::leaf(v.clone()),
                TableNode::Split(a, b) if *a < i && *b < i => DyadicTree::split(built[*a].clone(), built[*b].clone()),
                TableNode::Split(..) => return Err(Error::Invalid(format!("node {i} refers forward"))),
            };
            built.push(t);
        }
        built.pop().ok_or_else(|| Error::Invalid("empty node table".into()))
    }
}

impl<T: Clone + PartialEq> PartialEq for DyadicTree<T> {
    fn eq(&self, other: &Self) -> bool {
        fn go<T: Clone + PartialEq>(
            a: &DyadicTree<T>,
            b: &DyadicTree<T>,
            memo: &mut HashSet<(Key, Key)>,
        ) -> bool {
            if Arc::ptr_eq(&a.0, &b.0) || memo.contains(&(a.key(), b.key())) {
                return true;
            }
            let eq = match (&*a.0, &*b.0) {
                (Node::Leaf(x), Node::Leaf(y)) => x == y,
                (Node::Split(al, ah), Node::Split(bl, bh)) => go(al, bl, memo) && go(ah, bh, memo),
                _ => false,
            };
            if eq {
                memo.insert((a.key(), b.key()));
            }
            eq
        }
        go(self, other, &mut HashSet::new())
    }
}

impl<T: Clone + PartialEq + Eq + Hash> Eq for DyadicTree<T> {}

impl<T: Clone + PartialEq + fmt::Debug> fmt::Debug for DyadicTree<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.pieces(64) {
            Ok(p) => f.debug_list().entries(p.iter().map(|(c, v)| (c.to_string(), v))).finish(),
            Err(_) => write!(f, "DyadicTree({} nodes, depth {})", self.node_count(), self.depth()),
        }
    }
}

/// Three-way pointwise combination.
pub fn zip3<A, B, C, V>(
    a: &DyadicTree<A>,
    b: &DyadicTree<B>,
    c: &DyadicTree<C>,
    f: &impl Fn(&A, &B, &C) -> V,
) -> DyadicTree<V>
where
    A: Clone + PartialEq,
    B: Clone + PartialEq,
    C: Clone + PartialEq,
    V: Clone + PartialEq,
{
    fn go<A, B, C, V>(
        a: &DyadicTree<A>,
        b: &DyadicTree<B>,
        c: &DyadicTree<C>,
        f: &impl Fn(&A, &B, &C) -> V,
        memo: &mut HashMap<(Key, Key, Key), DyadicTree<V>>,
    ) -> DyadicTree<V>
    where
        A: Clone + PartialEq,
        B: Clone + PartialEq,
        C: Clone + PartialEq,
        V: Clone + PartialEq,
    {
        let k = (a.key(), b.key(), c.key());
        if let Some(r) = memo.get(&k) {
            return r.clone();
        }
        let r = match (a.as_leaf(), b.as_leaf(), c.as_leaf()) {
            (Some(x), Some(y), Some(z)) => DyadicTree::leaf(f(x, y, z)),
            _ => {
                let (al, ah) = a.children().map(|(l, h)| (l.clone(), h.clone())).unwrap_or((a.clone(), a.clone()));
                let (bl, bh) = b.children().map(|(l, h)| (l.clone(), h.clone())).unwrap_or((b.clone(), b.clone()));
                let (cl, ch) = c.children().map(|(l, h)| (l.clone(), h.clone())).unwrap_or((c.clone(), c.clone()));
                DyadicTree::split(go(&al, &bl, &cl, f, memo), go(&ah, &bh, &ch, f, memo))
            }
        };
        memo.insert(k, r.clone());
        r
    }
    go(a, b, c, f, &mut HashMap::new())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iv(l: u64, k: u32) -> DyadicInterval {
        DyadicInterval::new(l, k).unwrap()
    }

    #[test]
    fn sibling_leaves_merge() {
        let t = DyadicTree::split(DyadicTree::leaf(1), DyadicTree::leaf(1));
        assert_eq!(t.as_leaf(), Some(&1));
        assert_eq!(DyadicTree::from_grid(&[2, 2, 2, 2]).unwrap().as_leaf(), Some(&2));
    }

    #[test]
    fn place_and_restrict() {
        let cell = iv(5, 3);
        let inner = DyadicTree::from_grid(&[1, -1]).unwrap();
        let t = DyadicTree::place(&cell, inner.clone(), 0);
        assert_eq!(t.restrict(&cell), inner);
        assert_eq!(t.grid(4), vec![0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1, -1, 0, 0, 0, 0]);
        assert_eq!(t.pieces(100).unwrap().len(), 5);
    }

    #[test]
    fn assemble_matches_grid() {
        let t = DyadicTree::assemble(
            &[(iv(0, 2), DyadicTree::leaf(3)), (iv(3, 3), DyadicTree::leaf(5))],
            0,
        );
        assert_eq!(t.grid(3), vec![3, 3, 0, 5, 0, 0, 0, 0]);
    }

    #[test]
    fn deep_chain_stays_small() {
        // Rademacher R_n as a chain: R_n = split(R_{n-1}, R_{n-1}).
        let mut r = DyadicTree::split(DyadicTree::leaf(1i8), DyadicTree::leaf(-1));
        for _ in 1..2000 {
            r = DyadicTree::split(r.clone(), r);
        }
        assert_eq!(r.depth(), 2000);
        assert_eq!(r.node_count(), 2002);
        assert_eq!(r.piece_count(), BigUint::one() << 2000u32);
        let neg = r.map(&|v| -v);
        assert_eq!(neg.node_count(), 2002);
        assert!(neg != r);
        assert!(neg.map(&|v| -v) == r);
    }

    #[test]
    fn node_table_round_trip() {
        let mut t = DyadicTree::from_grid(&[1, -1]).unwrap();
        let mut n = DyadicTree::from_grid(&[-1, 1]).unwrap();
        for _ in 0..200 {
            (t, n) = (DyadicTree::split(t.clone(), n.clone()), DyadicTree::split(n, t));
        }
        let table = t.to_table();
        assert_eq!(table.len(), t.node_count());
        assert!(table.len() < 500);
        assert!(DyadicTree::from_table(&table).unwrap() == t);
        assert!(DyadicTree::<i32>::from_table(&[TableNode::Split(0, 0)]).is_err());
    }
}
