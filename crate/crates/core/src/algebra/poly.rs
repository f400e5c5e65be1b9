use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::block::{BlockStructure, BlockVector};
use super::SelfMap;
use crate::error::{Error, Result};

type C64 = Complex64;

/// Above this many terms evaluation switches to compensated summation.
const COMPENSATED_TERMS: usize = 10_000;

/// Sparse polynomial in `nvars` complex variables. Zero coefficients are
/// never stored.
#[derive(Debug, Clone, PartialEq)]
pub struct SparsePoly {
    nvars: usize,
    terms: BTreeMap<Vec<u32>, C64>,
}

impl SparsePoly {
    pub fn zero(nvars: usize) -> Self {
        Self { nvars, terms: BTreeMap::new() }
    }

    pub fn constant(nvars: usize, c: C64) -> Self {
        let mut p = Self::zero(nvars);
        p.add_term(vec![0; nvars], c);
        p
    }

    pub fn var(nvars: usize, i: usize) -> Self {
        let mut e = vec![0; nvars];
        e[i] = 1;
        let mut p = Self::zero(nvars);
        p.add_term(e, C64::new(1.0, 0.0));
        p
    }

    pub fn from_terms<I: IntoIterator<Item = (Vec<u32>, C64)>>(nvars: usize, terms: I) -> Result<Self> {
        let mut p = Self::zero(nvars);
        for (e, c) in terms {
            if e.len() != nvars {
                return Err(Error::DimensionMismatch { expected: nvars, got: e.len() });
            }
            p.add_term(e, c);
        }
        Ok(p)
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    /// Adds `c` to the coefficient of `exp`, dropping the term if it cancels.
    pub fn add_term(&mut self, exp: Vec<u32>, c: C64) {
        debug_assert_eq!(exp.len(), self.nvars);
        if c == C64::new(0.0, 0.0) {
            return;
        }
        let entry = self.terms.entry(exp);
        match entry {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let s = *o.get() + c;
                if s == C64::new(0.0, 0.0) {
                    o.remove();
                } else {
                    *o.get_mut() = s;
                }
            }
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<u32>, &C64)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, exp: &[u32]) -> C64 {
        self.terms.get(exp).copied().unwrap_or_default()
    }

    pub fn total_degree(&self) -> u32 {
        self.terms.keys().map(|e| e.iter().sum()).max().unwrap_or(0)
    }

    /// Smallest total degree among the stored terms.
    pub fn min_degree(&self) -> Option<u32> {
        self.terms.keys().map(|e| e.iter().sum()).min()
    }

    fn max_exponents(&self) -> Vec<u32> {
        let mut mx = vec![0; self.nvars];
        for e in self.terms.keys() {
            for (m, &a) in mx.iter_mut().zip(e) {
                *m = (*m).max(a);
            }
        }
        mx
    }

    fn power_table(&self, v: &[C64]) -> Vec<Vec<C64>> {
        self.max_exponents()
            .iter()
            .zip(v)
            .map(|(&mx, &z)| {
                let mut row = Vec::with_capacity(mx as usize + 1);
                let mut acc = C64::new(1.0, 0.0);
                row.push(acc);
                for _ in 0..mx {
                    acc *= z;
                    row.push(acc);
                }
                row
            })
            .collect()
    }

    pub fn eval(&self, v: &[C64]) -> C64 {
        debug_assert_eq!(v.len(), self.nvars);
        let table = self.power_table(v);
        let vals = self.terms.iter().map(|(e, c)| {
            e.iter().enumerate().fold(*c, |acc, (i, &a)| if a == 0 { acc } else { acc * table[i][a as usize] })
        });
        if self.terms.len() >= COMPENSATED_TERMS {
            neumaier_sum(vals)
        } else {
            vals.sum()
        }
    }

    /// Gradient evaluated at `v`, from exact differentiation of each term.
    pub fn gradient(&self, v: &[C64]) -> Vec<C64> {
        let table = self.power_table(v);
        let mut g = vec![C64::new(0.0, 0.0); self.nvars];
        for (e, c) in &self.terms {
            for (l, &al) in e.iter().enumerate() {
                if al == 0 {
                    continue;
                }
                let mut t = *c * al as f64;
                for (i, &a) in e.iter().enumerate() {
                    let a = if i == l { a - 1 } else { a };
                    if a > 0 {
                        t *= table[i][a as usize];
                    }
                }
                g[l] += t;
            }
        }
        g
    }

    pub fn partial(&self, l: usize) -> SparsePoly {
        let mut out = SparsePoly::zero(self.nvars);
        for (e, c) in &self.terms {
            if e[l] > 0 {
                let mut d = e.clone();
                d[l] -= 1;
                out.add_term(d, *c * e[l] as f64);
            }
        }
        out
    }

    pub fn scale(&self, s: C64) -> SparsePoly {
        let mut out = SparsePoly::zero(self.nvars);
        for (e, c) in &self.terms {
            out.add_term(e.clone(), c * s);
        }
        out
    }

    pub fn add(&self, other: &SparsePoly) -> SparsePoly {
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.add_term(e.clone(), *c);
        }
        out
    }

    pub fn sub(&self, other: &SparsePoly) -> SparsePoly {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }

    /// Product, dropping monomials above `trunc`. The flag reports whether
    /// a nonzero monomial was discarded.
    pub fn mul_trunc(&self, other: &SparsePoly, trunc: Option<u32>) -> (SparsePoly, bool) {
        let mut out = SparsePoly::zero(self.nvars);
        let mut discarded = false;
        for (ea, ca) in &self.terms {
            let da: u32 = ea.iter().sum();
            for (eb, cb) in &other.terms {
                let db: u32 = eb.iter().sum();
                if let Some(t) = trunc {
                    if da + db > t {
                        discarded = true;
                        continue;
                    }
                }
                let e: Vec<u32> = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                out.add_term(e, ca * cb);
            }
        }
        (out, discarded)
    }

    pub fn mul(&self, other: &SparsePoly) -> SparsePoly {
        self.mul_trunc(other, None).0
    }

    pub fn homogeneous_part(&self, d: u32) -> SparsePoly {
        let mut out = SparsePoly::zero(self.nvars);
        for (e, c) in &self.terms {
            if e.iter().sum::<u32>() == d {
                out.add_term(e.clone(), *c);
            }
        }
        out
    }

    /// Terms of total degree ≤ d.
    pub fn truncate(&self, d: u32) -> SparsePoly {
        let mut out = SparsePoly::zero(self.nvars);
        for (e, c) in &self.terms {
            if e.iter().sum::<u32>() <= d {
                out.add_term(e.clone(), *c);
            }
        }
        out
    }

    /// Drops coefficients with modulus ≤ tol.
    pub fn prune(&self, tol: f64) -> SparsePoly {
        let mut out = SparsePoly::zero(self.nvars);
        for (e, c) in &self.terms {
            if c.norm() > tol {
                out.add_term(e.clone(), *c);
            }
        }
        out
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.terms.values().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Reindexes variables: variable i of `self` becomes variable
    /// `map[i]` of a polynomial in `nvars` variables.
    pub fn relabel(&self, nvars: usize, map: &[usize]) -> SparsePoly {
        let mut out = SparsePoly::zero(nvars);
        for (e, c) in &self.terms {
            let mut ne = vec![0; nvars];
            for (i, &a) in e.iter().enumerate() {
                ne[map[i]] += a;
            }
            out.add_term(ne, *c);
        }
        out
    }
}

fn neumaier_sum<I: Iterator<Item = C64>>(it: I) -> C64 {
    let (mut sr, mut cr, mut si, mut ci) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for z in it {
        let t = sr + z.re;
        cr += if sr.abs() >= z.re.abs() { (sr - t) + z.re } else { (z.re - t) + sr };
        sr = t;
        let t = si + z.im;
        ci += if si.abs() >= z.im.abs() { (si - t) + z.im } else { (z.im - t) + si };
        si = t;
    }
    C64::new(sr + cr, si + ci)
}

/// Jacobian of a polynomial map at a base point.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobianMatrix {
    pub matrix: DMatrix<C64>,
    pub base: BlockVector,
}

/// Polynomial self-map (or map between block spaces) given coordinate-wise.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyMap {
    input: BlockStructure,
    output: BlockStructure,
    coords: Vec<SparsePoly>,
    truncation_degree: Option<u32>,
    truncated: bool,
}

impl PolyMap {
    pub fn new(input: BlockStructure, output: BlockStructure, coords: Vec<SparsePoly>) -> Result<Self> {
        if coords.len() != output.m() {
            return Err(Error::DimensionMismatch { expected: output.m(), got: coords.len() });
        }
        for c in &coords {
            if c.nvars() != input.m() {
                return Err(Error::DimensionMismatch { expected: input.m(), got: c.nvars() });
            }
        }
        Ok(Self { input, output, coords, truncation_degree: None, truncated: false })
    }

    /// Self-map of the given block space.
    pub fn self_map(blocks: BlockStructure, coords: Vec<SparsePoly>) -> Result<Self> {
        Self::new(blocks.clone(), blocks, coords)
    }

    pub fn identity(blocks: BlockStructure) -> Self {
        let m = blocks.m();
        let coords = (0..m).map(|i| SparsePoly::var(m, i)).collect();
        Self { input: blocks.clone(), output: blocks, coords, truncation_degree: None, truncated: false }
    }

    pub fn input(&self) -> &BlockStructure {
        &self.input
    }

    pub fn output(&self) -> &BlockStructure {
        &self.output
    }

    pub fn coords(&self) -> &[SparsePoly] {
        &self.coords
    }

    pub fn coord(&self, i: usize) -> &SparsePoly {
        &self.coords[i]
    }

    pub fn truncation_degree(&self) -> Option<u32> {
        self.truncation_degree
    }

    /// True when some composition discarded terms above the truncation degree.
    pub fn truncated(&self) -> bool {
        self.truncated
    }

    pub fn with_truncation(mut self, trunc: Option<u32>) -> Self {
        self.truncation_degree = trunc;
        self
    }

    pub fn with_blocks(mut self, blocks: BlockStructure) -> Result<Self> {
        if blocks.m() != self.input.m() || blocks.m() != self.output.m() {
            return Err(Error::DimensionMismatch { expected: self.input.m(), got: blocks.m() });
        }
        self.input = blocks.clone();
        self.output = blocks;
        Ok(self)
    }

    pub fn total_degree(&self) -> u32 {
        self.coords.iter().map(|c| c.total_degree()).max().unwrap_or(0)
    }

    pub fn eval(&self, v: &BlockVector) -> Result<BlockVector> {
        if v.dim() != self.input.m() {
            return Err(Error::DimensionMismatch { expected: self.input.m(), got: v.dim() });
        }
        BlockVector::new(self.eval_slice(v.coords()), self.output.clone())
    }

    pub fn eval_slice(&self, v: &[C64]) -> Vec<C64> {
        self.coords.iter().map(|c| c.eval(v)).collect()
    }

    pub fn jacobian(&self, v: &BlockVector) -> Result<JacobianMatrix> {
        if v.dim() != self.input.m() {
            return Err(Error::DimensionMismatch { expected: self.input.m(), got: v.dim() });
        }
        Ok(JacobianMatrix { matrix: self.jacobian_slice(v.coords()), base: v.clone() })
    }

    pub fn jacobian_slice(&self, v: &[C64]) -> DMatrix<C64> {
        let rows = self.output.m();
        let cols = self.input.m();
        let mut j = DMatrix::zeros(rows, cols);
        for (r, c) in self.coords.iter().enumerate() {
            for (l, g) in c.gradient(v).into_iter().enumerate() {
                j[(r, l)] = g;
            }
        }
        j
    }

    /// P∘Q, exact through total degree `trunc` when given.
    pub fn compose(&self, q: &PolyMap, trunc: Option<u32>) -> Result<PolyMap> {
        if q.output.m() != self.input.m() {
            return Err(Error::DimensionMismatch { expected: self.input.m(), got: q.output.m() });
        }
        let n = q.input.m();
        let mut discarded = false;
        // powers[i][a] = Q_i^a (truncated)
        let mut max_exp = vec![0u32; self.input.m()];
        for c in &self.coords {
            for (e, _) in c.terms() {
                for (m, &a) in max_exp.iter_mut().zip(e) {
                    *m = (*m).max(a);
                }
            }
        }
        let mut powers: Vec<Vec<SparsePoly>> = Vec::with_capacity(max_exp.len());
        for (i, &mx) in max_exp.iter().enumerate() {
            let mut row = vec![SparsePoly::constant(n, C64::new(1.0, 0.0))];
            for a in 0..mx as usize {
                let (p, d) = row[a].mul_trunc(&q.coords[i], trunc);
                discarded |= d;
                row.push(p);
            }
            powers.push(row);
        }
        let mut out = Vec::with_capacity(self.coords.len());
        for c in &self.coords {
            let mut acc = SparsePoly::zero(n);
            for (e, coef) in c.terms() {
                let mut term = SparsePoly::constant(n, *coef);
                for (i, &a) in e.iter().enumerate() {
                    if a > 0 {
                        let (p, d) = term.mul_trunc(&powers[i][a as usize], trunc);
                        discarded |= d;
                        term = p;
                    }
                }
                acc = acc.add(&term);
            }
            out.push(acc);
        }
        Ok(PolyMap {
            input: q.input.clone(),
            output: self.output.clone(),
            coords: out,
            truncation_degree: trunc,
            truncated: discarded || self.truncated || q.truncated,
        })
    }

    pub fn homogeneous_part(&self, d: u32) -> PolyMap {
        PolyMap {
            input: self.input.clone(),
            output: self.output.clone(),
            coords: self.coords.iter().map(|c| c.homogeneous_part(d)).collect(),
            truncation_degree: self.truncation_degree,
            truncated: self.truncated,
        }
    }

    pub fn prune(&self, tol: f64) -> PolyMap {
        PolyMap { coords: self.coords.iter().map(|c| c.prune(tol)).collect(), ..self.clone() }
    }

    pub fn is_zero(&self) -> bool {
        self.coords.iter().all(|c| c.is_empty())
    }

    pub fn sub(&self, other: &PolyMap) -> Result<PolyMap> {
        if other.coords.len() != self.coords.len() || other.input.m() != self.input.m() {
            return Err(Error::DimensionMismatch { expected: self.coords.len(), got: other.coords.len() });
        }
        Ok(PolyMap {
            coords: self.coords.iter().zip(&other.coords).map(|(a, b)| a.sub(b)).collect(),
            ..self.clone()
        })
    }

    pub fn scale(&self, s: C64) -> PolyMap {
        PolyMap { coords: self.coords.iter().map(|c| c.scale(s)).collect(), ..self.clone() }
    }
}

impl SelfMap for PolyMap {
    fn dim(&self) -> usize {
        self.input.m()
    }

    fn apply(&self, v: &[C64]) -> Vec<C64> {
        self.eval_slice(v)
    }

    fn jac(&self, v: &[C64]) -> DMatrix<C64> {
        self.jacobian_slice(v)
    }
}
