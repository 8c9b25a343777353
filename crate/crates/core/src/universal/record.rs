//! JSON form of a universal function: the weight record plus block metadata.

use serde::{Deserialize, Serialize};

use super::build::UniversalFunction;
use crate::error::{Error, Result};
use crate::walsh::series::BlockRecord;
use crate::weight::WeightRecord;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniversalRecord {
    pub weight: WeightRecord,
    pub head: Vec<BlockRecord>,
    /// `[first, end)` block positions of each stage inside the signed series.
    pub stage_blocks: Vec<[usize; 2]>,
    pub block_count: usize,
}

impl From<&UniversalFunction> for UniversalRecord {
    fn from(g: &UniversalFunction) -> Self {
        UniversalRecord {
            weight: WeightRecord::from(&g.weight),
            head: g.head.to_records(),
            stage_blocks: g.stage_blocks.iter().map(|r| [r.start, r.end]).collect(),
            block_count: g.signed.blocks().len(),
        }
    }
}

impl UniversalRecord {
    /// Rebuild from the weight; the stored head and layout must match the rebuilt ones.
    pub fn to_universal(&self) -> Result<UniversalFunction> {
        let g = UniversalFunction::from_weight(self.weight.to_weight()?)?;
        if UniversalRecord::from(&g) != *self {
            return Err(Error::Invalid("stored head or block layout differs from the rebuilt function".into()));
        }
        Ok(g)
    }
}

pub fn universal_to_json(g: &UniversalFunction) -> Result<String> {
    serde_json::to_string_pretty(&UniversalRecord::from(g)).map_err(|e| Error::Invalid(e.to_string()))
}

pub fn universal_from_json(s: &str) -> Result<UniversalFunction> {
    let r: UniversalRecord = serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
    r.to_universal()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::parse_rational;
    use crate::universal::build_universal;
    use crate::weight::WeightOptions;

    #[test]
    fn reload_matches() {
        let g = build_universal(&parse_rational("1/4").unwrap(), &WeightOptions { m_max: 4, ..Default::default() }).unwrap();
        let json = universal_to_json(&g).unwrap();
        let back = universal_from_json(&json).unwrap();
        assert_eq!(back.signed.to_records(), g.signed.to_records());
        assert_eq!(universal_to_json(&back).unwrap(), json);
        let mut r: UniversalRecord = serde_json::from_str(&json).unwrap();
        r.stage_blocks[0][1] += 1;
        assert!(r.to_universal().is_err());
    }
}
