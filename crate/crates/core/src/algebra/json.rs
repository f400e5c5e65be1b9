use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::block::BlockStructure;
use super::poly::{PolyMap, SparsePoly};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TermJson {
    pub exp: Vec<u32>,
    pub re: f64,
    pub im: f64,
}

/// On-disk description of a polynomial self-map.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolyMapJson {
    pub m: usize,
    pub blocks: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degrees: Option<Vec<u32>>,
    pub coords: Vec<Vec<TermJson>>,
}

impl PolyMapJson {
    pub fn into_map(self) -> Result<PolyMap> {
        let blocks = match self.degrees {
            Some(d) if !d.is_empty() => BlockStructure::with_degrees(self.blocks, d)?,
            _ => BlockStructure::new(self.blocks)?,
        };
        if blocks.m() != self.m {
            return Err(Error::InvalidBlocks(format!("blocks sum to {} but m = {}", blocks.m(), self.m)));
        }
        let coords = self
            .coords
            .into_iter()
            .map(|terms| SparsePoly::from_terms(self.m, terms.into_iter().map(|t| (t.exp, Complex64::new(t.re, t.im)))))
            .collect::<Result<Vec<_>>>()?;
        PolyMap::self_map(blocks, coords)
    }

    pub fn from_map(p: &PolyMap) -> Self {
        PolyMapJson {
            m: p.input().m(),
            blocks: p.input().dims().to_vec(),
            degrees: p.input().degrees().map(|d| d.to_vec()),
            coords: p
                .coords()
                .iter()
                .map(|c| c.terms().map(|(e, z)| TermJson { exp: e.clone(), re: z.re, im: z.im }).collect())
                .collect(),
        }
    }
}

pub fn polymap_from_json(s: &str) -> Result<PolyMap> {
    let j: PolyMapJson = serde_json::from_str(s)?;
    j.into_map()
}

pub fn polymap_to_json(p: &PolyMap) -> String {
    serde_json::to_string_pretty(&PolyMapJson::from_map(p)).expect("serializable")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let s = r#"{"m":2,"blocks":[1,1],"degrees":[2,2],"coords":[
            [{"exp":[2,0],"re":1,"im":0},{"exp":[0,3],"re":1,"im":0}],
            [{"exp":[0,2],"re":1,"im":0}]]}"#;
        let p = polymap_from_json(s).unwrap();
        assert_eq!(p.coord(0).len(), 2);
        let again = polymap_from_json(&polymap_to_json(&p)).unwrap();
        assert_eq!(again, p);
    }

    #[test]
    fn bad_exponent_length() {
        let s = r#"{"m":2,"blocks":[2],"coords":[[{"exp":[1],"re":1,"im":0}],[]]}"#;
        assert!(polymap_from_json(s).is_err());
    }
}
