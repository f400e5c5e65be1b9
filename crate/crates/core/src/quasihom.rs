//! Homogeneity, quasihomogeneity, nondegeneracy and adaptedness of
//! polynomial germs at a fixed point.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::algebra::{norm, sampling, BlockStructure, PolyMap, SelfMap, SparsePoly};
use crate::error::{Error, Result};

type C64 = Complex64;

const SPHERE_SAMPLES: usize = 100_000;

/// Direct sum H_1 ⊕ … ⊕ H_p of homogeneous maps H_j : E_j → E_j.
#[derive(Debug, Clone, PartialEq)]
pub struct QuasihomogeneousMap {
    blocks: BlockStructure,
    factors: Vec<PolyMap>,
}

impl QuasihomogeneousMap {
    /// `factors[j]` is a polynomial map in the `dims[j]` coordinates of E_j,
    /// homogeneous of degree `k_j`.
    pub fn new(blocks: BlockStructure, factors: Vec<PolyMap>) -> Result<Self> {
        let degrees = blocks
            .degrees()
            .ok_or_else(|| Error::InvalidBlocks("quasihomogeneous map needs block degrees".into()))?
            .to_vec();
        if factors.len() != blocks.p() {
            return Err(Error::DimensionMismatch { expected: blocks.p(), got: factors.len() });
        }
        for (j, h) in factors.iter().enumerate() {
            let d = blocks.dims()[j];
            if h.input().m() != d || h.output().m() != d {
                return Err(Error::DimensionMismatch { expected: d, got: h.input().m() });
            }
            for c in h.coords() {
                if c.terms().any(|(e, _)| e.iter().sum::<u32>() != degrees[j]) {
                    return Err(Error::InvalidArgument(format!("factor {j} is not homogeneous of degree {}", degrees[j])));
                }
            }
        }
        Ok(Self { blocks, factors })
    }

    /// Reads the factors off a map that is already block-diagonal and
    /// homogeneous per block.
    pub fn from_polymap(h: &PolyMap, blocks: &BlockStructure) -> Result<Self> {
        let g = extract_quasihomogeneous_part(h, blocks)?;
        if !g.certificate.is_empty() {
            return Err(Error::InvalidArgument("map is not quasihomogeneous on these blocks".into()));
        }
        Ok(g.h)
    }

    pub fn blocks(&self) -> &BlockStructure {
        &self.blocks
    }

    pub fn degrees(&self) -> &[u32] {
        self.blocks.degrees().expect("degrees present")
    }

    pub fn factor(&self, j: usize) -> &PolyMap {
        &self.factors[j]
    }

    pub fn factors(&self) -> &[PolyMap] {
        &self.factors
    }

    pub fn eval_factor(&self, j: usize, w: &[C64]) -> Vec<C64> {
        self.factors[j].eval_slice(w)
    }

    /// H as a single polynomial map on E.
    pub fn assemble(&self) -> PolyMap {
        let m = self.blocks.m();
        let mut coords = Vec::with_capacity(m);
        for (j, h) in self.factors.iter().enumerate() {
            let map: Vec<usize> = self.blocks.range(j).collect();
            for c in h.coords() {
                coords.push(c.relabel(m, &map));
            }
        }
        PolyMap::self_map(self.blocks.clone(), coords).expect("consistent dimensions")
    }
}

impl SelfMap for QuasihomogeneousMap {
    fn dim(&self) -> usize {
        self.blocks.m()
    }

    fn apply(&self, v: &[C64]) -> Vec<C64> {
        let mut out = Vec::with_capacity(v.len());
        for j in 0..self.blocks.p() {
            out.extend(self.eval_factor(j, &v[self.blocks.range(j)]));
        }
        out
    }

    fn jac(&self, v: &[C64]) -> DMatrix<C64> {
        let m = self.blocks.m();
        let mut jm = DMatrix::zeros(m, m);
        for j in 0..self.blocks.p() {
            let r = self.blocks.range(j);
            let local = self.factors[j].jacobian_slice(&v[r.clone()]);
            for a in 0..r.len() {
                for b in 0..r.len() {
                    jm[(r.start + a, r.start + b)] = local[(a, b)];
                }
            }
        }
        jm
    }
}

/// A monomial of F_j − H_j∘π_j that violates the adaptedness exponent rule.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OffendingMonomial {
    pub block: usize,
    pub coord: usize,
    pub exp: Vec<u32>,
    pub re: f64,
    pub im: f64,
    /// degree in the variables of the monomial's own block
    pub block_degree: u32,
    pub total_degree: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Nondegeneracy {
    CertifiedYes,
    CertifiedNo { witness: Vec<[f64; 2]> },
    SampledYes { samples: usize, min_norm: f64 },
}

impl Nondegeneracy {
    pub fn is_nondegenerate(&self) -> bool {
        !matches!(self, Nondegeneracy::CertifiedNo { .. })
    }
}

/// A germ with its quasihomogeneous part and the monomial certificate.
/// An optional exact evaluator stands in for the polynomial jet when the
/// germ is not itself polynomial.
#[derive(Clone)]
pub struct AdaptedGerm {
    pub f: PolyMap,
    pub h: QuasihomogeneousMap,
    pub certificate: Vec<OffendingMonomial>,
    pub nondegeneracy: Vec<Nondegeneracy>,
    exact: Option<Arc<dyn SelfMap>>,
}

impl fmt::Debug for AdaptedGerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AdaptedGerm")
            .field("f", &self.f)
            .field("h", &self.h)
            .field("certificate", &self.certificate)
            .field("nondegeneracy", &self.nondegeneracy)
            .field("exact", &self.exact.is_some())
            .finish()
    }
}

impl AdaptedGerm {
    pub fn adapted(&self) -> bool {
        self.certificate.is_empty() && self.nondegeneracy.iter().all(Nondegeneracy::is_nondegenerate)
    }

    pub fn blocks(&self) -> &BlockStructure {
        self.h.blocks()
    }

    pub fn degrees(&self) -> &[u32] {
        self.h.degrees()
    }

    pub fn with_exact(mut self, exact: Arc<dyn SelfMap>) -> Self {
        self.exact = Some(exact);
        self
    }

    pub fn exact(&self) -> Option<&Arc<dyn SelfMap>> {
        self.exact.as_ref()
    }

    pub fn report(&self) -> AdaptednessReport {
        AdaptednessReport {
            schema: 1,
            adapted: self.adapted(),
            degrees: self.degrees().to_vec(),
            offending_monomials: self.certificate.clone(),
            nondegeneracy: self.nondegeneracy.clone(),
            euler_residual_per_block: euler_residual(&self.h.assemble(), self.blocks(), 100, 0),
        }
    }
}

impl SelfMap for AdaptedGerm {
    fn dim(&self) -> usize {
        self.f.input().m()
    }

    fn apply(&self, v: &[C64]) -> Vec<C64> {
        match &self.exact {
            Some(e) => e.apply(v),
            None => self.f.eval_slice(v),
        }
    }

    fn jac(&self, v: &[C64]) -> DMatrix<C64> {
        match &self.exact {
            Some(e) => e.jac(v),
            None => self.f.jacobian_slice(v),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AdaptednessReport {
    pub schema: u32,
    pub adapted: bool,
    pub degrees: Vec<u32>,
    pub offending_monomials: Vec<OffendingMonomial>,
    pub nondegeneracy: Vec<Nondegeneracy>,
    pub euler_residual_per_block: Vec<f64>,
}

fn block_degree(e: &[u32], blocks: &BlockStructure, j: usize) -> u32 {
    e[blocks.range(j)].iter().sum()
}

/// k_j = smallest total degree among the monomials of F_j that only
/// involve E_j variables.
pub fn infer_degrees(f: &PolyMap, blocks: &BlockStructure) -> Result<Vec<u32>> {
    let mut degrees = Vec::with_capacity(blocks.p());
    for j in 0..blocks.p() {
        let r = blocks.range(j);
        if r.is_empty() {
            degrees.push(2);
            continue;
        }
        let mut k: Option<u32> = None;
        for c in r.clone() {
            for (e, _) in f.coord(c).terms() {
                let total: u32 = e.iter().sum();
                if block_degree(e, blocks, j) == total {
                    k = Some(k.map_or(total, |k| k.min(total)));
                }
            }
        }
        match k {
            None => return Err(Error::UndeterminedDegree { block: j }),
            Some(k) if k < 2 => return Err(Error::NotSuperattracting { block: j, degree: k }),
            Some(k) => degrees.push(k),
        }
    }
    Ok(degrees)
}

/// Splits F into its quasihomogeneous part and the certificate of
/// monomials violating the adaptedness rule.
pub fn extract_quasihomogeneous_part(f: &PolyMap, blocks: &BlockStructure) -> Result<AdaptedGerm> {
    let m = blocks.m();
    if f.input().m() != m || f.output().m() != m {
        return Err(Error::DimensionMismatch { expected: m, got: f.input().m() });
    }
    let origin = f.eval_slice(&vec![C64::new(0.0, 0.0); m]);
    let o = norm(&origin);
    if o != 0.0 {
        return Err(Error::NotFixingOrigin(o));
    }
    let degrees = match blocks.degrees() {
        Some(d) => d.to_vec(),
        None => infer_degrees(f, blocks)?,
    };
    let blocks = BlockStructure::with_degrees(blocks.dims().to_vec(), degrees.clone())?;

    let mut factors = Vec::with_capacity(blocks.p());
    let mut certificate = Vec::new();
    for j in 0..blocks.p() {
        let r = blocks.range(j);
        let k = degrees[j];
        let d = r.len();
        let mut coords = Vec::with_capacity(d);
        for c in r.clone() {
            let mut h = SparsePoly::zero(d);
            for (e, z) in f.coord(c).terms() {
                let total: u32 = e.iter().sum();
                let bd = block_degree(e, &blocks, j);
                if bd == total && total == k {
                    h.add_term(e[r.clone()].to_vec(), *z);
                } else if bd < k || total < k + 1 {
                    certificate.push(OffendingMonomial {
                        block: j,
                        coord: c,
                        exp: e.clone(),
                        re: z.re,
                        im: z.im,
                        block_degree: bd,
                        total_degree: total,
                    });
                }
            }
            coords.push(h);
        }
        let sb = BlockStructure::single(d);
        factors.push(PolyMap::self_map(sb, coords)?);
    }
    let mut nondegeneracy = Vec::with_capacity(blocks.p());
    for (j, h) in factors.iter().enumerate() {
        let v = check_nondegenerate(h);
        if let Nondegeneracy::CertifiedNo { witness } = &v {
            return Err(Error::Degenerate {
                block: j,
                witness: witness.iter().map(|w| C64::new(w[0], w[1])).collect(),
            });
        }
        nondegeneracy.push(v);
    }
    let h = QuasihomogeneousMap::new(blocks.clone(), factors)?;
    let f = f.clone().with_blocks(blocks)?;
    Ok(AdaptedGerm { f, h, certificate, nondegeneracy, exact: None })
}

fn witness_json(w: &[C64]) -> Vec<[f64; 2]> {
    w.iter().map(|z| [z.re, z.im]).collect()
}

/// Decides whether a homogeneous map has 0 as its only zero.
///
/// Dimension ≤ 2 is decided by a resultant; higher dimension by sampling
/// the unit sphere and polishing near-zeros with Newton's method.
pub fn check_nondegenerate(h: &PolyMap) -> Nondegeneracy {
    let d = h.input().m();
    match d {
        0 => Nondegeneracy::CertifiedYes,
        1 => {
            if h.coord(0).is_empty() {
                Nondegeneracy::CertifiedNo { witness: vec![[1.0, 0.0]] }
            } else {
                Nondegeneracy::CertifiedYes
            }
        }
        2 => resultant_verdict(h),
        _ => sampled_verdict(h),
    }
}

fn binary_form(p: &SparsePoly, k: u32) -> Vec<C64> {
    // coefficient of x^i y^{k−i}, which is the t^i coefficient of p(t, 1)
    (0..=k).map(|i| p.coeff(&[i, k - i])).collect()
}

fn sylvester(a: &[C64], b: &[C64]) -> DMatrix<C64> {
    // a, b ascending, both of formal degree k
    let k = a.len() - 1;
    let n = 2 * k;
    let mut s = DMatrix::zeros(n, n);
    for row in 0..k {
        for i in 0..=k {
            s[(row, row + i)] = a[k - i];
            s[(row + k, row + i)] = b[k - i];
        }
    }
    s
}

fn resultant_verdict(h: &PolyMap) -> Nondegeneracy {
    let k = h.total_degree().max(1);
    let a = binary_form(h.coord(0), k);
    let b = binary_form(h.coord(1), k);
    let na = norm(&a);
    let nb = norm(&b);
    if na == 0.0 || nb == 0.0 {
        let other = if na == 0.0 { &b } else { &a };
        return Nondegeneracy::CertifiedNo { witness: witness_json(&binary_zero(other)) };
    }
    let res = sylvester(&a, &b).determinant().norm() / (na.powi(k as i32) * nb.powi(k as i32));
    if res > 1e-12 {
        return Nondegeneracy::CertifiedYes;
    }
    // locate the common zero among the zeros of the first form
    let mut cands: Vec<Vec<C64>> = vec![vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)]];
    let deg_a = a.iter().rposition(|z| *z != C64::new(0.0, 0.0)).unwrap_or(0);
    if deg_a >= 1 {
        if let Ok(roots) = crate::algebra::poly_roots(&a[..=deg_a]) {
            for t in roots {
                let n = (t.norm_sqr() + 1.0).sqrt();
                cands.push(vec![t / n, C64::new(1.0 / n, 0.0)]);
            }
        }
    }
    let best = cands
        .into_iter()
        .min_by(|u, w| norm(&h.eval_slice(u)).partial_cmp(&norm(&h.eval_slice(w))).unwrap())
        .unwrap();
    Nondegeneracy::CertifiedNo { witness: witness_json(&best) }
}

fn binary_zero(form: &[C64]) -> Vec<C64> {
    let k = form.len() - 1;
    if form[k] == C64::new(0.0, 0.0) {
        return vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)];
    }
    let roots = crate::algebra::poly_roots(form).unwrap_or_default();
    let t = roots.first().copied().unwrap_or_default();
    let n = (t.norm_sqr() + 1.0).sqrt();
    vec![t / n, C64::new(1.0 / n, 0.0)]
}

fn sampled_verdict(h: &PolyMap) -> Nondegeneracy {
    let d = h.input().m();
    let pts = sampling::halton_sphere(SPHERE_SAMPLES, d);
    let scale = h.coords().iter().map(|c| c.max_abs_coeff()).fold(0.0, f64::max).max(1e-300);
    let mut vals: Vec<(f64, usize)> = pts.par_iter().enumerate().map(|(i, u)| (norm(&h.eval_slice(u)), i)).collect();
    vals.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let min_norm = vals[0].0 / scale;
    for &(_, i) in vals.iter().take(8) {
        if let Some(w) = newton_sphere_zero(h, &pts[i], scale) {
            return Nondegeneracy::CertifiedNo { witness: witness_json(&w) };
        }
    }
    Nondegeneracy::SampledYes { samples: SPHERE_SAMPLES, min_norm }
}

fn newton_sphere_zero(h: &PolyMap, u0: &[C64], scale: f64) -> Option<Vec<C64>> {
    let mut u = u0.to_vec();
    for _ in 0..60 {
        let val = h.eval_slice(&u);
        if norm(&val) < 1e-13 * scale {
            return Some(u);
        }
        let j = h.jacobian_slice(&u);
        let svd = j.svd(true, true);
        let step = svd.solve(&DVector::from_vec(val), 1e-14).ok()?;
        for (a, s) in u.iter_mut().zip(step.iter()) {
            *a -= s;
        }
        let n = norm(&u);
        if n == 0.0 || !n.is_finite() {
            return None;
        }
        for a in u.iter_mut() {
            *a /= n;
        }
    }
    (norm(&h.eval_slice(&u)) < 1e-13 * scale).then_some(u)
}

/// Per block, the largest ‖DH_v(π_j v) − k_j π_j H(v)‖ over seeded samples
/// in the unit ball.
pub fn euler_residual(h: &PolyMap, blocks: &BlockStructure, samples: usize, seed: u64) -> Vec<f64> {
    let degrees = match blocks.degrees() {
        Some(d) => d.to_vec(),
        None => match infer_degrees(h, blocks) {
            Ok(d) => d,
            Err(_) => vec![h.total_degree(); blocks.p()],
        },
    };
    let m = blocks.m();
    let mut rng = sampling::rng(seed);
    let mut worst = vec![0.0f64; blocks.p()];
    for _ in 0..samples {
        let v = sampling::random_ball(&mut rng, m, 1.0);
        let hv = h.eval_slice(&v);
        let dh = h.jacobian_slice(&v);
        for j in 0..blocks.p() {
            let r = blocks.range(j);
            let mut vj = DVector::zeros(m);
            for i in r.clone() {
                vj[i] = v[i];
            }
            let lhs = &dh * vj;
            let k = degrees[j] as f64;
            let mut res = 0.0;
            for i in 0..m {
                let rhs = if r.contains(&i) { hv[i] * k } else { C64::new(0.0, 0.0) };
                res += (lhs[i] - rhs).norm_sqr();
            }
            worst[j] = worst[j].max(res.sqrt());
        }
    }
    worst
}

#[derive(Debug, Clone, Serialize)]
pub struct InvarianceReport {
    pub schema: u32,
    pub block: usize,
    /// every monomial of F_j has positive degree in the E_j variables
    pub containment_exact: bool,
    pub witnesses: Vec<OffendingMonomial>,
    pub samples: usize,
    /// largest ‖π_j v*‖ over Newton preimages v* of points of E_j^⊤
    pub max_transverse: f64,
    pub newton_failures: usize,
}

impl InvarianceReport {
    pub fn passed(&self, tol: f64) -> bool {
        self.containment_exact && self.max_transverse <= tol
    }
}

/// Checks that E_j^⊤ = {v_j = 0} is locally totally invariant.
pub fn total_invariance_residual(g: &AdaptedGerm, j: usize, radius: f64, samples: usize, seed: u64) -> InvarianceReport {
    let blocks = g.blocks();
    let m = blocks.m();
    let r = blocks.range(j);
    let mut witnesses = Vec::new();
    for c in r.clone() {
        for (e, z) in g.f.coord(c).terms() {
            let bd = block_degree(e, blocks, j);
            if bd == 0 {
                witnesses.push(OffendingMonomial {
                    block: j,
                    coord: c,
                    exp: e.clone(),
                    re: z.re,
                    im: z.im,
                    block_degree: 0,
                    total_degree: e.iter().sum(),
                });
            }
        }
    }
    let mut rng = sampling::rng(seed);
    let mut max_transverse: f64 = 0.0;
    let mut failures = 0;
    let mut done = 0;
    for _ in 0..samples {
        let mut v0 = sampling::random_ball(&mut rng, m, radius);
        for i in r.clone() {
            v0[i] = C64::new(0.0, 0.0);
        }
        let w = g.apply(&v0);
        let kick = sampling::random_ball(&mut rng, m, 1e-2 * radius);
        let start: Vec<C64> = v0.iter().zip(&kick).map(|(a, b)| a + b).collect();
        match newton_preimage(g, &w, start) {
            Some(v) => {
                max_transverse = max_transverse.max(norm(&v[r.clone()]));
                done += 1;
            }
            None => failures += 1,
        }
    }
    InvarianceReport {
        schema: 1,
        block: j,
        containment_exact: witnesses.is_empty(),
        witnesses,
        samples: done,
        max_transverse,
        newton_failures: failures,
    }
}

fn newton_preimage(g: &dyn SelfMap, w: &[C64], mut v: Vec<C64>) -> Option<Vec<C64>> {
    let scale = norm(w).max(1e-300);
    for _ in 0..400 {
        let fv = g.apply(&v);
        let res: Vec<C64> = fv.iter().zip(w).map(|(a, b)| a - b).collect();
        if norm(&res) <= 1e-15 * scale {
            return Some(v);
        }
        let j = g.jac(&v);
        let step = match j.clone().lu().solve(&DVector::from_vec(res.clone())) {
            Some(s) if s.iter().all(|z| z.re.is_finite() && z.im.is_finite()) => s,
            _ => j.svd(true, true).solve(&DVector::from_vec(res), 1e-15).ok()?,
        };
        for (a, s) in v.iter_mut().zip(step.iter()) {
            *a -= s;
        }
        if !norm(&v).is_finite() {
            return None;
        }
    }
    let fv = g.apply(&v);
    let res: Vec<C64> = fv.iter().zip(w).map(|(a, b)| a - b).collect();
    (norm(&res) <= 1e-10 * scale).then_some(v)
}
