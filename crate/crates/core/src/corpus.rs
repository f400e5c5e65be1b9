//! Reference germs shared by the test suites: adapted germs with nontrivial
//! leading coefficients, polynomial maps that are not quasihomogeneous, and
//! a seeded generator of random quasihomogeneous maps.

use itertools::Itertools;
use num_complex::Complex64;
use rand::Rng;

use crate::algebra::sampling::random_complex;
use crate::algebra::{BlockStructure, PolyMap, SparsePoly};
use crate::error::Result;
use crate::koch::{chart_germ, Partition};
use crate::quasihom::{extract_quasihomogeneous_part, AdaptedGerm};

type C64 = Complex64;

pub struct CorpusGerm {
    pub name: &'static str,
    pub germ: AdaptedGerm,
}

pub struct NonExample {
    pub name: &'static str,
    pub map: PolyMap,
    pub blocks: BlockStructure,
}

fn poly(m: usize, terms: &[(&[u32], f64)]) -> Result<SparsePoly> {
    SparsePoly::from_terms(m, terms.iter().map(|(e, c)| (e.to_vec(), C64::new(*c, 0.0))))
}

fn polymap(dims: Vec<usize>, coords: &[&[(&[u32], f64)]]) -> Result<(PolyMap, BlockStructure)> {
    let blocks = BlockStructure::new(dims)?;
    let m = blocks.m();
    let coords = coords.iter().map(|c| poly(m, c)).collect::<Result<Vec<_>>>()?;
    Ok((PolyMap::self_map(blocks.clone(), coords)?, blocks))
}

fn adapted(name: &'static str, dims: Vec<usize>, coords: &[&[(&[u32], f64)]]) -> Result<CorpusGerm> {
    let (f, blocks) = polymap(dims, coords)?;
    Ok(CorpusGerm { name, germ: extract_quasihomogeneous_part(&f, &blocks)? })
}

/// Adapted germs. Every leading factor has ‖H_j(u)‖ ≠ ‖u‖^{k_j} on its
/// attracting directions, so Green increments decay at exactly k_j^{-n}.
pub fn adapted_germs() -> Result<Vec<CorpusGerm>> {
    Ok(vec![
        adapted("cubic-quartic-1d", vec![1], &[&[(&[2], 3.0), (&[4], 1.0)]])?,
        adapted(
            "two-squares",
            vec![1, 1],
            &[&[(&[2, 0], 2.0), (&[2, 1], 1.0)], &[(&[0, 2], 3.0), (&[1, 2], 1.0)]],
        )?,
        adapted(
            "square-cube",
            vec![1, 1],
            &[&[(&[2, 0], 1.5), (&[2, 1], -0.5)], &[(&[0, 3], 2.0), (&[1, 3], 1.0)]],
        )?,
        adapted(
            "plane-block-and-cube",
            vec![2, 1],
            &[
                &[(&[2, 0, 0], 2.0), (&[0, 2, 0], 0.5), (&[2, 0, 1], 1.0)],
                &[(&[0, 2, 0], 1.0), (&[1, 1, 0], -0.3), (&[0, 2, 1], 0.7)],
                &[(&[0, 0, 3], 1.5), (&[1, 0, 3], 1.0)],
            ],
        )?,
        CorpusGerm { name: "koch-1,2,3|4", germ: chart_germ(&"1,2,3|4".parse::<Partition>()?)?.germ },
        CorpusGerm { name: "koch-1,2|3,4", germ: chart_germ(&"1,2|3,4".parse::<Partition>()?)?.germ },
    ])
}

/// Polynomial maps with at least one monomial off the quasihomogeneous pattern.
pub fn non_examples() -> Result<Vec<NonExample>> {
    let mk = |name, coords: &[&[(&[u32], f64)]]| -> Result<NonExample> {
        let (map, blocks) = polymap(vec![1, 1], coords)?;
        Ok(NonExample { name, map, blocks })
    };
    Ok(vec![
        mk("x2+y3,y2", &[&[(&[2, 0], 1.0), (&[0, 3], 1.0)], &[(&[0, 2], 1.0)]])?,
        mk("x2-y3,y2", &[&[(&[2, 0], 1.0), (&[0, 3], -1.0)], &[(&[0, 2], 1.0)]])?,
        mk("x2+xy,y3", &[&[(&[2, 0], 1.0), (&[1, 1], 1.0)], &[(&[0, 3], 1.0)]])?,
    ])
}

/// Random quasihomogeneous map: m ≤ `m_max` variables split into random
/// blocks, each factor a random homogeneous map of degree 2..=`deg_max` in
/// its own block variables.
pub fn random_quasihomogeneous<R: Rng>(rng: &mut R, m_max: usize, deg_max: u32) -> Result<(PolyMap, BlockStructure)> {
    let m = rng.random_range(1..=m_max);
    let mut dims = Vec::new();
    let mut left = m;
    while left > 0 {
        let d = rng.random_range(1..=left);
        dims.push(d);
        left -= d;
    }
    let degrees: Vec<u32> = dims.iter().map(|_| rng.random_range(2..=deg_max)).collect();
    let blocks = BlockStructure::with_degrees(dims.clone(), degrees.clone())?;
    let mut coords = Vec::with_capacity(m);
    for j in 0..dims.len() {
        let range = blocks.range(j);
        let monomials: Vec<Vec<u32>> = range
            .clone()
            .combinations_with_replacement(degrees[j] as usize)
            .map(|vars| {
                let mut e = vec![0u32; m];
                for v in vars {
                    e[v] += 1;
                }
                e
            })
            .collect();
        for _ in range {
            let terms: Vec<(Vec<u32>, C64)> = monomials.iter().map(|e| (e.clone(), random_complex(rng, 1.0))).collect();
            coords.push(SparsePoly::from_terms(m, terms)?);
        }
    }
    Ok((PolyMap::self_map(blocks.clone(), coords)?, blocks))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::sampling::rng;
    use crate::quasihom::euler_residual;

    #[test]
    fn corpus_germs_are_adapted() {
        for g in adapted_germs().unwrap() {
            assert!(g.germ.adapted(), "{}", g.name);
        }
    }

    #[test]
    fn random_maps_are_quasihomogeneous() {
        let mut r = rng(5);
        for _ in 0..10 {
            let (h, b) = random_quasihomogeneous(&mut r, 4, 5).unwrap();
            let res = euler_residual(&h, &b, 20, 1);
            assert!(res.iter().all(|&x| x < 1e-11), "{res:?}");
        }
    }
}
