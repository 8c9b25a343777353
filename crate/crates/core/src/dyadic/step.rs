use std::collections::{HashMap, HashSet};
use std::fmt;

use num_bigint::BigUint;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::tree::zip3;
use super::{DyadicInterval, DyadicSet, DyadicTree};
use crate::error::{Error, Result};
use crate::exact::{DyadicRational, Rational, QS2};

/// Piecewise-constant function on `[0,1)` with values in Q[sqrt 2].
#[derive(Clone, PartialEq, Eq)]
pub struct StepFunction(DyadicTree<QS2>);

/// One `{"l", "K", "value"}` record of the piece file format.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Piece {
    #[serde(flatten)]
    pub cell: DyadicInterval,
    pub value: QS2,
}

impl StepFunction {
    pub fn constant(v: QS2) -> Self {
        StepFunction(DyadicTree::leaf(v))
    }

    pub fn zero() -> Self {
        Self::constant(QS2::zero())
    }

    pub fn from_tree(tree: DyadicTree<QS2>) -> Self {
        StepFunction(tree)
    }

    pub fn tree(&self) -> &DyadicTree<QS2> {
        &self.0
    }

    /// `value` on `cell`, zero elsewhere.
    pub fn indicator(cell: &DyadicInterval, value: QS2) -> Self {
        StepFunction(DyadicTree::place(cell, DyadicTree::leaf(value), QS2::zero()))
    }

    /// `value` on `set`, zero elsewhere.
    pub fn on_set(set: &DyadicSet, value: &QS2) -> Self {
        StepFunction(set.tree().map(&|b| if *b { value.clone() } else { QS2::zero() }))
    }

    /// From pieces that must partition `[0,1)` exactly.
    pub fn from_pieces(pieces: &[Piece]) -> Result<Self> {
        let mut cells: Vec<&Piece> = pieces.iter().collect();
        cells.sort_by(|a, b| a.cell.cmp(&b.cell));
        let mut total = Rational::default();
        for w in cells.windows(2) {
            if w[0].cell.right() != w[1].cell.left() {
                return Err(Error::Invalid(format!(
                    "pieces {} and {} overlap or leave a gap",
                    w[0].cell, w[1].cell
                )));
            }
        }
        for p in &cells {
            if p.cell.index() >= &(BigUint::from(1u8) << p.cell.level()) {
                return Err(Error::Invalid(format!("piece {} lies outside [0,1)", p.cell)));
            }
            total += p.cell.measure();
        }
        if total != Rational::from_integer(1.into()) {
            return Err(Error::Invalid(format!("pieces cover measure {total}, not 1")));
        }
        let items: Vec<_> =
            cells.iter().map(|p| (p.cell.clone(), DyadicTree::leaf(p.value.clone()))).collect();
        Ok(StepFunction(DyadicTree::assemble(&items, QS2::zero())))
    }

    /// Convenience: values on consecutive intervals given by `(l, K, value)`.
    pub fn from_triples(triples: &[(u64, u32, QS2)]) -> Result<Self> {
        let pieces = triples
            .iter()
            .map(|(l, k, v)| Ok(Piece { cell: DyadicInterval::new(*l, *k)?, value: v.clone() }))
            .collect::<Result<Vec<_>>>()?;
        Self::from_pieces(&pieces)
    }

    /// Maximal pieces in order, refused beyond `limit`.
    pub fn pieces(&self, limit: usize) -> Result<Vec<Piece>> {
        Ok(self.0.pieces(limit)?.into_iter().map(|(cell, value)| Piece { cell, value }).collect())
    }

    pub fn piece_count(&self) -> BigUint {
        self.0.piece_count()
    }

    /// Finest piece level.
    pub fn level(&self) -> u32 {
        self.0.depth()
    }

    pub fn eval(&self, x: &DyadicRational) -> &QS2 {
        self.0.eval(x)
    }

    pub fn map(&self, f: &impl Fn(&QS2) -> QS2) -> Self {
        StepFunction(self.0.map(f))
    }

    pub fn zip(&self, other: &Self, f: &impl Fn(&QS2, &QS2) -> QS2) -> Self {
        StepFunction(self.0.zip(&other.0, f))
    }

    /// Pointwise sum; subtrees facing a zero constant are reused without descending.
    pub fn add(&self, other: &Self) -> Self {
        fn go(
            a: &DyadicTree<QS2>,
            b: &DyadicTree<QS2>,
            memo: &mut HashMap<(usize, usize), DyadicTree<QS2>>,
        ) -> DyadicTree<QS2> {
            if a.as_leaf().is_some_and(|v| v.is_zero()) {
                return b.clone();
            }
            if b.as_leaf().is_some_and(|v| v.is_zero()) {
                return a.clone();
            }
            let k = (a.key(), b.key());
            if let Some(r) = memo.get(&k) {
                return r.clone();
            }
            let r = match (a.as_leaf(), b.as_leaf()) {
                (Some(x), Some(y)) => DyadicTree::leaf(x + y),
                _ => {
                    let (al, ah) = halves(a);
                    let (bl, bh) = halves(b);
                    DyadicTree::split(go(&al, &bl, memo), go(&ah, &bh, memo))
                }
            };
            memo.insert(k, r.clone());
            r
        }
        StepFunction(go(&self.0, &other.0, &mut HashMap::new()))
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip(other, &|a, b| a - b)
    }

    pub fn scale(&self, c: &QS2) -> Self {
        self.map(&|a| a * c)
    }

    pub fn abs(&self) -> Self {
        self.map(&|a| a.abs())
    }

    /// `inner` (relative to `cell`) on `cell`, zero elsewhere.
    pub fn place(cell: &DyadicInterval, inner: &StepFunction) -> Self {
        StepFunction(DyadicTree::place(cell, inner.0.clone(), QS2::zero()))
    }

    pub fn restrict(&self, cell: &DyadicInterval) -> Self {
        StepFunction(self.0.restrict(cell))
    }

    /// The set where `pred` holds.
    pub fn level_set(&self, pred: &impl Fn(&QS2) -> bool) -> DyadicSet {
        DyadicSet::from_tree(self.0.map(pred))
    }

    pub fn support(&self) -> DyadicSet {
        self.level_set(&|v| !v.is_zero())
    }

    /// `∫_0^1 f`.
    pub fn integral(&self) -> QS2 {
        self.0.fold(&|v| v.clone(), &|a, b| (a + b).scale_pow2(-1))
    }

    /// `∫_over |f| w`, with `w = 1` when absent.
    pub fn integrate(&self, over: &DyadicSet, weight: Option<&StepFunction>) -> QS2 {
        // few weight values: one product per value instead of one per cell
        if let Some(w) = weight {
            let values = w.distinct_values(16);
            if values.len() > 1 && values.len() <= 16 {
                return values
                    .iter()
                    .map(|v| self.integrate(&over.intersect(&w.level_set(&|x| x == v)), None) * v.clone())
                    .fold(QS2::zero(), |a, b| a + b);
            }
        }
        let one = DyadicTree::leaf(QS2::one());
        let w = weight.map(|w| &w.0).unwrap_or(&one);
        let t = zip3(&self.0, over.tree(), w, &|f, s, w| {
            if *s {
                f.abs() * w
            } else {
                QS2::zero()
            }
        });
        StepFunction(t).integral()
    }

    /// Distinct values, stopping once more than `limit` are found.
    pub fn distinct_values(&self, limit: usize) -> Vec<QS2> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        let mut stack = vec![self.0.clone()];
        while let Some(t) = stack.pop() {
            if !seen.insert(t.key()) {
                continue;
            }
            match t.children() {
                Some((l, h)) => {
                    stack.push(l.clone());
                    stack.push(h.clone());
                }
                None => {
                    let v = t.as_leaf().expect("leaf");
                    if !out.contains(v) {
                        out.push(v.clone());
                        if out.len() > limit {
                            return out;
                        }
                    }
                }
            }
        }
        out
    }

    /// `∫_0^1 |f|`.
    pub fn l1(&self) -> QS2 {
        self.abs().integral()
    }

    /// Every piece split to `target_level`; refused when `2^target_level` exceeds `2^budget`.
    pub fn refine(&self, target_level: u32, budget: u32) -> Result<Vec<Piece>> {
        if target_level > budget {
            return Err(Error::BudgetExceeded { level: target_level, budget });
        }
        if target_level < self.level() {
            return Err(Error::Precondition(format!(
                "target level {target_level} below the function's level {}",
                self.level()
            )));
        }
        Ok(self
            .0
            .grid(target_level)
            .into_iter()
            .enumerate()
            .map(|(i, value)| Piece {
                cell: DyadicInterval::new(i as u64, target_level).expect("in range"),
                value,
            })
            .collect())
    }

    /// Values on the level-`level` grid, refused beyond the budget.
    pub fn grid(&self, level: u32, budget: u32) -> Result<Vec<QS2>> {
        if level > budget {
            return Err(Error::BudgetExceeded { level, budget });
        }
        Ok(self.0.grid(level))
    }

    pub fn from_grid(values: &[QS2]) -> Result<Self> {
        Ok(StepFunction(DyadicTree::from_grid(values)?))
    }

    pub fn max_abs(&self) -> QS2 {
        self.0.fold(&|v| v.abs(), &|a, b| a.max(b))
    }

    pub fn min_value(&self) -> QS2 {
        self.0.fold(&|v| v.clone(), &|a, b| a.min(b))
    }
}

fn halves(t: &DyadicTree<QS2>) -> (DyadicTree<QS2>, DyadicTree<QS2>) {
    match t.children() {
        Some((l, h)) => (l.clone(), h.clone()),
        None => (t.clone(), t.clone()),
    }
}

/// Memo for repeated `∫|f| w` over functions that share most of their structure, such
/// as successive partial sums. Holds the visited trees so node addresses stay valid.
pub struct IntegralCache {
    memo: HashMap<(usize, usize), (DyadicTree<QS2>, DyadicTree<QS2>, QS2)>,
    one: DyadicTree<QS2>,
}

impl Default for IntegralCache {
    fn default() -> Self {
        IntegralCache { memo: HashMap::new(), one: DyadicTree::leaf(QS2::one()) }
    }
}

impl IntegralCache {
    pub fn new() -> Self {
        Self::default()
    }

    /// `∫_0^1 |f| w`, with `w = 1` when absent.
    pub fn abs_integral(&mut self, f: &StepFunction, weight: Option<&StepFunction>) -> QS2 {
        let w = weight.map(|w| w.0.clone()).unwrap_or_else(|| self.one.clone());
        self.go(&f.0, &w)
    }

    fn go(&mut self, f: &DyadicTree<QS2>, w: &DyadicTree<QS2>) -> QS2 {
        if let Some(v) = f.as_leaf() {
            if v.is_zero() {
                return QS2::zero();
            }
        }
        let k = (f.key(), w.key());
        if let Some((_, _, v)) = self.memo.get(&k) {
            return v.clone();
        }
        let v = match (f.as_leaf(), w.as_leaf()) {
            (Some(x), Some(y)) => x.abs() * y,
            _ => {
                let (fl, fh) = halves(f);
                let (wl, wh) = halves(w);
                (self.go(&fl, &wl) + self.go(&fh, &wh)).scale_pow2(-1)
            }
        };
        self.memo.insert(k, (f.clone(), w.clone(), v.clone()));
        v
    }
}

impl fmt::Debug for StepFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl Serialize for StepFunction {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.pieces(usize::MAX / 2).map_err(serde::ser::Error::custom)?.serialize(s)
    }
}

impl<'de> Deserialize<'de> for StepFunction {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<Piece>::deserialize(d)?;
        StepFunction::from_pieces(&v).map_err(serde::de::Error::custom)
    }
}
