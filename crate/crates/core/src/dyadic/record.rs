//! Size-capped JSON forms of sets and step functions: interval or piece lists when short,
//! shared node tables otherwise.

use serde::{Deserialize, Serialize};

use super::{DyadicInterval, DyadicSet, DyadicTree, Piece, StepFunction, TableNode};
use crate::error::{Error, Result};
use crate::exact::{format_rational, QS2};

/// Longest interval or piece list written out in full.
pub const LISTING_LIMIT: usize = 4096;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SetRecord {
    pub measure: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub intervals: Option<Vec<DyadicInterval>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub nodes: Option<Vec<TableNode<bool>>>,
}

impl SetRecord {
    pub fn new(s: &DyadicSet) -> Self {
        let intervals = s.intervals(LISTING_LIMIT).ok();
        let nodes = intervals.is_none().then(|| s.tree().to_table());
        SetRecord { measure: format_rational(&s.measure()), intervals, nodes }
    }

    pub fn to_set(&self) -> Result<DyadicSet> {
        let s = match (&self.intervals, &self.nodes) {
            (Some(v), _) => DyadicSet::from_intervals(v),
            (None, Some(n)) => DyadicSet::from_tree(DyadicTree::from_table(n)?),
            (None, None) => return Err(Error::Invalid("set record without intervals or nodes".into())),
        };
        if format_rational(&s.measure()) != self.measure {
            return Err(Error::Invalid(format!("set measure {} does not match the record {}", s.measure(), self.measure)));
        }
        Ok(s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunctionRecord {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub pieces: Option<Vec<Piece>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub nodes: Option<Vec<TableNode<QS2>>>,
}

impl FunctionRecord {
    pub fn new(f: &StepFunction) -> Self {
        let pieces = f.pieces(LISTING_LIMIT).ok();
        let nodes = pieces.is_none().then(|| f.tree().to_table());
        FunctionRecord { pieces, nodes }
    }

    pub fn to_function(&self) -> Result<StepFunction> {
        match (&self.pieces, &self.nodes) {
            (Some(p), _) => StepFunction::from_pieces(p),
            (None, Some(n)) => Ok(StepFunction::from_tree(DyadicTree::from_table(n)?)),
            (None, None) => Err(Error::Invalid("function record without pieces or nodes".into())),
        }
    }
}

