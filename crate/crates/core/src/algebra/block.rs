use std::ops::Range;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Splitting of C^m into consecutive coordinate blocks, optionally with a
/// degree attached to each block.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockStructure {
    dims: Vec<usize>,
    degrees: Option<Vec<u32>>,
}

impl BlockStructure {
    /// Zero-dimensional blocks are accepted; they carry no coordinates.
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::InvalidBlocks("at least one block is required".into()));
        }
        if dims.iter().sum::<usize>() == 0 {
            return Err(Error::InvalidBlocks("total dimension is zero".into()));
        }
        Ok(Self { dims, degrees: None })
    }

    pub fn with_degrees(dims: Vec<usize>, degrees: Vec<u32>) -> Result<Self> {
        let mut b = Self::new(dims)?;
        b.set_degrees(degrees)?;
        Ok(b)
    }

    /// A single block of dimension m.
    pub fn single(m: usize) -> Self {
        Self { dims: vec![m], degrees: None }
    }

    pub fn set_degrees(&mut self, degrees: Vec<u32>) -> Result<()> {
        if degrees.len() != self.dims.len() {
            return Err(Error::DimensionMismatch { expected: self.dims.len(), got: degrees.len() });
        }
        for (j, &k) in degrees.iter().enumerate() {
            if k < 2 && self.dims[j] > 0 {
                return Err(Error::NotSuperattracting { block: j, degree: k });
            }
        }
        self.degrees = Some(degrees);
        Ok(())
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn degrees(&self) -> Option<&[u32]> {
        self.degrees.as_deref()
    }

    pub fn degree(&self, j: usize) -> Option<u32> {
        self.degrees.as_ref().map(|d| d[j])
    }

    pub fn m(&self) -> usize {
        self.dims.iter().sum()
    }

    pub fn p(&self) -> usize {
        self.dims.len()
    }

    pub fn range(&self, j: usize) -> Range<usize> {
        let start: usize = self.dims[..j].iter().sum();
        start..start + self.dims[j]
    }

    /// Index of the block containing coordinate `c`.
    pub fn block_of(&self, c: usize) -> usize {
        let mut acc = 0;
        for (j, &d) in self.dims.iter().enumerate() {
            acc += d;
            if c < acc {
                return j;
            }
        }
        panic!("coordinate {c} out of range for dimension {}", self.m());
    }

    pub fn without_degrees(&self) -> Self {
        Self { dims: self.dims.clone(), degrees: None }
    }
}

/// A point of E = E_1 ⊕ ... ⊕ E_p.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockVector {
    coords: Vec<Complex64>,
    structure: BlockStructure,
}

impl BlockVector {
    pub fn new(coords: Vec<Complex64>, structure: BlockStructure) -> Result<Self> {
        if coords.len() != structure.m() {
            return Err(Error::DimensionMismatch { expected: structure.m(), got: coords.len() });
        }
        Ok(Self { coords, structure })
    }

    pub fn flat(coords: Vec<Complex64>) -> Self {
        let structure = BlockStructure::single(coords.len());
        Self { coords, structure }
    }

    pub fn zeros(structure: BlockStructure) -> Self {
        Self { coords: vec![Complex64::new(0.0, 0.0); structure.m()], structure }
    }

    pub fn coords(&self) -> &[Complex64] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<Complex64> {
        self.coords
    }

    pub fn structure(&self) -> &BlockStructure {
        &self.structure
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn block(&self, j: usize) -> &[Complex64] {
        &self.coords[self.structure.range(j)]
    }

    /// π_j as a map E → E: keeps block j, zeroes the rest.
    pub fn project(&self, j: usize) -> BlockVector {
        let r = self.structure.range(j);
        let coords = self
            .coords
            .iter()
            .enumerate()
            .map(|(i, &z)| if r.contains(&i) { z } else { Complex64::new(0.0, 0.0) })
            .collect();
        BlockVector { coords, structure: self.structure.clone() }
    }

    pub fn norm(&self) -> f64 {
        norm(&self.coords)
    }

    pub fn block_norm(&self, j: usize) -> f64 {
        norm(self.block(j))
    }

    pub fn scale(&self, s: Complex64) -> BlockVector {
        BlockVector { coords: self.coords.iter().map(|z| z * s).collect(), structure: self.structure.clone() }
    }

    pub fn add(&self, other: &BlockVector) -> Result<BlockVector> {
        if other.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: other.dim() });
        }
        let coords = self.coords.iter().zip(&other.coords).map(|(a, b)| a + b).collect();
        Ok(BlockVector { coords, structure: self.structure.clone() })
    }
}

pub fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn dist(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt()
}

pub fn hermitian(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x * y.conj()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn projections_partition_coordinates() {
        let s = BlockStructure::new(vec![2, 1, 3]).unwrap();
        let v = BlockVector::new((0..6).map(|i| c(i as f64, -(i as f64))).collect(), s).unwrap();
        let mut sum = BlockVector::zeros(v.structure().clone());
        for j in 0..3 {
            let pj = v.project(j);
            assert_eq!(pj.project(j), pj);
            for i in 0..3 {
                if i != j {
                    assert!(pj.project(i).coords().iter().all(|z| *z == c(0.0, 0.0)));
                }
            }
            assert!(v.block_norm(j) <= v.norm());
            sum = sum.add(&pj).unwrap();
        }
        assert_eq!(sum, v);
    }

    #[test]
    fn zero_dim_block_allowed() {
        let s = BlockStructure::new(vec![2, 0]).unwrap();
        assert_eq!(s.m(), 2);
        assert_eq!(s.range(1), 2..2);
        assert!(BlockStructure::new(vec![]).is_err());
    }

    #[test]
    fn dimension_mismatch() {
        let s = BlockStructure::new(vec![2]).unwrap();
        assert!(matches!(BlockVector::new(vec![c(1.0, 0.0)], s), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn degree_below_two_rejected() {
        assert!(BlockStructure::with_degrees(vec![1, 1], vec![2, 1]).is_err());
        assert!(BlockStructure::with_degrees(vec![2, 0], vec![3, 0]).is_ok());
    }
}
