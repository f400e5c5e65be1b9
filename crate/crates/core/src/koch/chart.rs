//! The projective map [x] ↦ [H(x)] near a point of a one-dimensional stratum
//! L_J with two blocks, written as a germ on E_{J1} ⊕ E_{J2}.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use super::partition::{block_constant, Partition};
use super::{px_coeffs, symbolic_h};
use crate::algebra::linalg::helmert;
use crate::algebra::{BlockStructure, PolyMap, SelfMap, SparsePoly};
use crate::error::{Error, Result};
use crate::quasihom::{extract_quasihomogeneous_part, AdaptedGerm};

type C64 = Complex64;

/// Exact chart map c ↦ S^T H(x̂ + S c) / avg_{J1} H(x̂ + S c), where S embeds
/// Helmert bases of the two blocks.
#[derive(Debug, Clone)]
pub struct ChartMap {
    pub partition: Partition,
    pub xhat: Vec<C64>,
    /// m × (m−2) orthonormal embedding
    pub s: DMatrix<f64>,
    /// S^T H(x̂ + S c) and avg_{J1} H(x̂ + S c) as polynomials in c, with
    /// roundoff-level coefficients removed so that small c evaluates to full
    /// relative precision
    num: Vec<SparsePoly>,
    den: SparsePoly,
}

impl ChartMap {
    pub fn new(partition: Partition) -> Result<Self> {
        if partition.len() != 2 {
            return Err(Error::InvalidBlocks("chart needs exactly two blocks".into()));
        }
        let m = partition.m();
        if m < 3 {
            return Err(Error::InvalidArgument("chart needs m ≥ 3".into()));
        }
        let (n1, n2) = (partition.block(0).len(), partition.block(1).len());
        let ratio = -(n1 as f64) / n2 as f64;
        let xhat: Vec<C64> = (0..m)
            .map(|i| C64::new(if partition.block(0).contains(&i) { 1.0 } else { ratio }, 0.0))
            .collect();
        let mut s = DMatrix::zeros(m, m - 2);
        let mut col = 0;
        for b in partition.blocks() {
            let h = helmert(b.len());
            for k in 0..h.ncols() {
                for (r, &i) in b.iter().enumerate() {
                    s[(i, col)] = h[(r, k)];
                }
                col += 1;
            }
        }
        let (num, den) = quotient_polys(&partition, &xhat, &s);
        Ok(Self { partition, xhat, s, num, den })
    }

    pub fn blocks(&self) -> BlockStructure {
        let sizes = self.partition.sizes();
        BlockStructure::with_degrees(
            sizes.iter().map(|n| n - 1).collect(),
            sizes.iter().map(|&n| n as u32 + 1).collect(),
        )
        .expect("two blocks")
    }

    /// x̂ + S c.
    pub fn lift(&self, c: &[C64]) -> Vec<C64> {
        (0..self.xhat.len())
            .map(|i| self.xhat[i] + (0..c.len()).map(|k| c[k] * self.s[(i, k)]).sum::<C64>())
            .collect()
    }

    fn down(&self, y: &[C64]) -> Vec<C64> {
        (0..self.s.ncols()).map(|k| (0..y.len()).map(|i| y[i] * self.s[(i, k)]).sum()).collect()
    }

    /// Chart coordinates of a projective point with avg_{J1} ≠ 0.
    pub fn chart_of(&self, x: &[C64]) -> Option<Vec<C64>> {
        let a = self.partition.value_on(x, 0);
        if a.norm() < 1e-300 {
            return None;
        }
        Some(self.down(x).into_iter().map(|z| z / a).collect())
    }

    /// μ₀ = 1/P_x̂(1), the normalizing factor at the base point.
    pub fn mu0(&self) -> C64 {
        let p = px_coeffs(&self.xhat);
        1.0 / super::horner(&p, C64::new(1.0, 0.0))
    }

    /// c_J = μ₀ C_J for each block.
    pub fn block_coefficients(&self) -> Vec<C64> {
        let mu = self.mu0();
        (0..2).map(|k| mu * block_constant(&self.xhat, &self.partition, k)).collect()
    }

    /// Taylor jet of the chart map at 0 up to `order`, small coefficients pruned.
    pub fn jet(&self, order: u32) -> PolyMap {
        let n = self.s.ncols();
        let d0 = self.den.coeff(&vec![0; n]);
        // 1/den = (1/d0) Σ (−r)^j with r = den/d0 − 1
        let mut r = self.den.scale(1.0 / d0);
        r.add_term(vec![0; n], C64::new(-1.0, 0.0));
        let neg_r = r.scale(C64::new(-1.0, 0.0));
        let mut inv = SparsePoly::constant(n, C64::new(1.0, 0.0));
        let mut pow = inv.clone();
        for _ in 0..order {
            pow = pow.mul_trunc(&neg_r, Some(order)).0;
            inv = inv.add(&pow);
        }
        let inv = inv.scale(1.0 / d0);
        let scale = self.num.iter().map(SparsePoly::max_abs_coeff).fold(1.0, f64::max) / d0.norm();
        let coords: Vec<SparsePoly> =
            self.num.iter().map(|p| p.mul_trunc(&inv, Some(order)).0.prune(1e-11 * scale)).collect();
        PolyMap::self_map(self.blocks().without_degrees(), coords)
            .expect("consistent")
            .with_truncation(Some(order))
    }
}

fn quotient_polys(partition: &Partition, xhat: &[C64], s: &DMatrix<f64>) -> (Vec<SparsePoly>, SparsePoly) {
    let m = xhat.len();
    let n = s.ncols();
    let ys: Vec<SparsePoly> = (0..m)
        .map(|i| {
            let mut p = SparsePoly::constant(n, xhat[i]);
            for k in 0..n {
                if s[(i, k)] != 0.0 {
                    let mut e = vec![0; n];
                    e[k] = 1;
                    p.add_term(e, C64::new(s[(i, k)], 0.0));
                }
            }
            p
        })
        .collect();
    let hs = symbolic_h(&ys, m);
    let scale = hs.iter().map(SparsePoly::max_abs_coeff).fold(0.0, f64::max);
    let tol = 1e-13 * scale;
    let b0 = partition.block(0);
    let mut den = SparsePoly::zero(n);
    for &i in b0 {
        den = den.add(&hs[i]);
    }
    let den = den.scale(C64::new(1.0 / b0.len() as f64, 0.0)).prune(tol);
    let num = (0..n)
        .map(|k| {
            let mut p = SparsePoly::zero(n);
            for i in 0..m {
                if s[(i, k)] != 0.0 {
                    p = p.add(&hs[i].scale(C64::new(s[(i, k)], 0.0)));
                }
            }
            p.prune(tol)
        })
        .collect();
    (num, den)
}

impl SelfMap for ChartMap {
    fn dim(&self) -> usize {
        self.s.ncols()
    }

    fn apply(&self, c: &[C64]) -> Vec<C64> {
        let d = self.den.eval(c);
        self.num.iter().map(|p| p.eval(c) / d).collect()
    }

    fn jac(&self, c: &[C64]) -> DMatrix<C64> {
        let n = self.s.ncols();
        let d = self.den.eval(c);
        let dd = self.den.gradient(c);
        let rows: Vec<(C64, Vec<C64>)> = self.num.iter().map(|p| (p.eval(c), p.gradient(c))).collect();
        DMatrix::from_fn(n, n, |r, k| rows[r].1[k] / d - rows[r].0 * dd[k] / (d * d))
    }
}

#[derive(Debug, Clone)]
pub struct ChartGerm {
    pub germ: AdaptedGerm,
    pub map: Arc<ChartMap>,
    /// c_J = μ₀ C_J per block
    pub coefficients: Vec<C64>,
    pub mu0: C64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ChartSummary {
    pub schema: u32,
    pub partition: String,
    pub dims: Vec<usize>,
    pub degrees: Vec<u32>,
    pub mu0: [f64; 2],
    pub coefficients: Vec<[f64; 2]>,
    pub adapted: bool,
    pub offending_monomials: usize,
}

impl ChartGerm {
    pub fn summary(&self) -> ChartSummary {
        ChartSummary {
            schema: 1,
            partition: self.map.partition.to_string(),
            dims: self.germ.blocks().dims().to_vec(),
            degrees: self.germ.degrees().to_vec(),
            mu0: [self.mu0.re, self.mu0.im],
            coefficients: self.coefficients.iter().map(|z| [z.re, z.im]).collect(),
            adapted: self.germ.adapted(),
            offending_monomials: self.germ.certificate.len(),
        }
    }
}

/// The germ of [x] ↦ [H(x)] at the point of L_J for a two-block partition,
/// with the exact rational map attached for evaluation.
pub fn chart_germ(partition: &Partition) -> Result<ChartGerm> {
    let map = ChartMap::new(partition.clone())?;
    let blocks = map.blocks();
    let kmax = blocks.degrees().expect("set").iter().copied().max().unwrap_or(2);
    let jet = map.jet(kmax + 2);
    let germ = extract_quasihomogeneous_part(&jet, &blocks)?;
    let coefficients = map.block_coefficients();
    let mu0 = map.mu0();
    let map = Arc::new(map);
    Ok(ChartGerm { germ: germ.with_exact(map.clone()), map, coefficients, mu0 })
}
