//! Dynamical Green functions G_j = lim k_j^{-n} log‖π_j F^n‖ of an adapted
//! germ or of a quasihomogeneous map.

use std::io::Write;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Serialize, Serializer};

use crate::algebra::{norm, PolyMap, SelfMap};
use crate::error::{Error, Result};
use crate::quasihom::{check_nondegenerate, AdaptedGerm, Nondegeneracy, QuasihomogeneousMap};

type C64 = Complex64;

/// A Green value that may be −∞ (the orbit lies in {v_j = 0}).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GreenLevel {
    Finite(f64),
    MinusInfinity,
}

impl GreenLevel {
    pub fn value(self) -> Option<f64> {
        match self {
            GreenLevel::Finite(x) => Some(x),
            GreenLevel::MinusInfinity => None,
        }
    }

    pub fn max(self, other: GreenLevel) -> GreenLevel {
        match (self, other) {
            (GreenLevel::Finite(a), GreenLevel::Finite(b)) => GreenLevel::Finite(a.max(b)),
            (GreenLevel::MinusInfinity, x) | (x, GreenLevel::MinusInfinity) => x,
        }
    }

    pub fn less_than(self, x: f64) -> bool {
        match self {
            GreenLevel::Finite(a) => a < x,
            GreenLevel::MinusInfinity => true,
        }
    }

    /// |a − b|, with equal sentinels at distance 0 and mixed pairs at ∞.
    pub fn distance(self, other: GreenLevel) -> f64 {
        match (self, other) {
            (GreenLevel::Finite(a), GreenLevel::Finite(b)) => (a - b).abs(),
            (GreenLevel::MinusInfinity, GreenLevel::MinusInfinity) => 0.0,
            _ => f64::INFINITY,
        }
    }

    fn scale(self, s: f64) -> GreenLevel {
        match self {
            GreenLevel::Finite(a) => GreenLevel::Finite(a * s),
            x => x,
        }
    }
}

impl Serialize for GreenLevel {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            GreenLevel::Finite(x) => s.serialize_f64(*x),
            GreenLevel::MinusInfinity => s.serialize_str("-inf"),
        }
    }
}

impl std::fmt::Display for GreenLevel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GreenLevel::Finite(x) => write!(f, "{x:.17e}"),
            GreenLevel::MinusInfinity => write!(f, "-inf"),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GreenValue {
    pub per_block: Vec<GreenLevel>,
    pub g_f: GreenLevel,
    pub n_used: usize,
    /// trace[n][j] = G_j^n
    pub trace: Vec<Vec<GreenLevel>>,
    /// max_j |G_j(F(v)) − k_j G_j(v)| when computed
    pub functional_residual: Option<f64>,
    /// G(v) − log‖v‖ for quasihomogeneous maps
    pub log_norm_offset: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum BasinClass {
    Attracted { n: usize },
    Escaped { n: usize },
    Undecided { n_max: usize },
}

/// Per-block state: either a plain coordinate vector or (log-norm, unit
/// direction) once the block is too small for direct iteration.
#[derive(Debug, Clone)]
enum BlockState {
    Direct,
    Renormalized { log_norm: f64, dir: Vec<C64> },
    Zero,
}

#[derive(Clone)]
pub struct GreenEvaluator {
    map: Arc<dyn SelfMap>,
    h: QuasihomogeneousMap,
    homogeneous: bool,
    pub n_max: usize,
    pub escape_radius: f64,
    /// sublevel threshold M
    pub m_threshold: f64,
    pub tol: f64,
    /// blocks below this norm continue through H_j in renormalized form
    pub switch_radius: f64,
    pub capture_radius: f64,
}

impl std::fmt::Debug for GreenEvaluator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GreenEvaluator")
            .field("homogeneous", &self.homogeneous)
            .field("n_max", &self.n_max)
            .field("escape_radius", &self.escape_radius)
            .field("m_threshold", &self.m_threshold)
            .field("tol", &self.tol)
            .finish()
    }
}

impl GreenEvaluator {
    pub fn for_germ(g: &AdaptedGerm) -> Self {
        Self {
            map: Arc::new(g.clone()),
            h: g.h.clone(),
            homogeneous: false,
            n_max: 100,
            escape_radius: 10.0,
            m_threshold: 5.0,
            tol: 1e-10,
            switch_radius: 1e-30,
            capture_radius: capture_radius(&g.f),
        }
    }

    pub fn for_homogeneous(h: &QuasihomogeneousMap) -> Result<Self> {
        for (j, f) in h.factors().iter().enumerate() {
            if let Nondegeneracy::CertifiedNo { witness } = check_nondegenerate(f) {
                return Err(Error::Degenerate { block: j, witness: witness.iter().map(|w| C64::new(w[0], w[1])).collect() });
            }
        }
        Ok(Self {
            map: Arc::new(h.clone()),
            h: h.clone(),
            homogeneous: true,
            n_max: 100,
            escape_radius: f64::INFINITY,
            m_threshold: 5.0,
            tol: 1e-10,
            switch_radius: f64::INFINITY,
            capture_radius: 0.0,
        })
    }

    pub fn with_n_max(mut self, n: usize) -> Self {
        self.n_max = n;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_escape_radius(mut self, r: f64) -> Self {
        if !self.homogeneous {
            self.escape_radius = r;
        }
        self
    }

    pub fn with_threshold(mut self, m: f64) -> Self {
        self.m_threshold = m;
        self
    }

    pub fn map(&self) -> &Arc<dyn SelfMap> {
        &self.map
    }

    pub fn h(&self) -> &QuasihomogeneousMap {
        &self.h
    }

    pub fn degrees(&self) -> &[u32] {
        self.h.degrees()
    }

    /// G_j^n for n = 0..=n_stop, stopping early at convergence when
    /// `until_converged` is set.
    fn iterate(&self, v: &[C64], n_stop: usize, until_converged: bool) -> Result<(Vec<Vec<GreenLevel>>, usize)> {
        let blocks = self.h.blocks();
        let p = blocks.p();
        let degrees = self.degrees();
        if v.len() != blocks.m() {
            return Err(Error::DimensionMismatch { expected: blocks.m(), got: v.len() });
        }
        if !self.homogeneous && norm(v) > self.escape_radius {
            return Err(Error::Escaped { iterations: 0 });
        }
        let mut u = v.to_vec();
        let mut state: Vec<BlockState> = vec![BlockState::Direct; p];
        let mut trace = Vec::with_capacity(n_stop + 1);
        let level = |state: &[BlockState], u: &[C64], n: usize| -> Vec<GreenLevel> {
            (0..p)
                .map(|j| {
                    let scale = (degrees[j] as f64).powi(-(n as i32));
                    match &state[j] {
                        BlockState::Zero => GreenLevel::MinusInfinity,
                        BlockState::Renormalized { log_norm, .. } => GreenLevel::Finite(log_norm * scale),
                        BlockState::Direct => {
                            let nj = norm(&u[blocks.range(j)]);
                            if nj == 0.0 {
                                GreenLevel::MinusInfinity
                            } else {
                                GreenLevel::Finite(nj.ln() * scale)
                            }
                        }
                    }
                })
                .collect()
        };
        let switch = |state: &mut [BlockState], u: &[C64]| {
            for j in 0..p {
                if let BlockState::Direct = state[j] {
                    let r = blocks.range(j);
                    if r.is_empty() {
                        state[j] = BlockState::Zero;
                        continue;
                    }
                    let nj = norm(&u[r.clone()]);
                    if nj == 0.0 {
                        continue;
                    }
                    if nj < self.switch_radius {
                        state[j] = BlockState::Renormalized {
                            log_norm: nj.ln(),
                            dir: u[r].iter().map(|z| z / nj).collect(),
                        };
                    }
                }
            }
        };
        switch(&mut state, &u);
        trace.push(level(&state, &u, 0));
        let mut n_used = 0;
        for n in 1..=n_stop {
            let any_direct = state.iter().any(|s| matches!(s, BlockState::Direct));
            if any_direct {
                // reconstruct renormalized blocks (they may underflow to 0)
                let mut full = u.clone();
                for j in 0..p {
                    if let BlockState::Renormalized { log_norm, dir } = &state[j] {
                        let s = log_norm.exp();
                        for (slot, d) in full[blocks.range(j)].iter_mut().zip(dir) {
                            *slot = d * s;
                        }
                    }
                }
                let next = self.map.apply(&full);
                let nn = norm(&next);
                if !nn.is_finite() || nn > self.escape_radius {
                    return Err(Error::Escaped { iterations: n });
                }
                for j in 0..p {
                    if let BlockState::Direct = state[j] {
                        for i in blocks.range(j) {
                            u[i] = next[i];
                        }
                    }
                }
            }
            for j in 0..p {
                if let BlockState::Renormalized { log_norm, dir } = &mut state[j] {
                    let w = self.h.eval_factor(j, dir);
                    let nw = norm(&w);
                    if nw == 0.0 {
                        state[j] = BlockState::Zero;
                        continue;
                    }
                    *log_norm = *log_norm * degrees[j] as f64 + nw.ln();
                    *dir = w.into_iter().map(|z| z / nw).collect();
                }
            }
            switch(&mut state, &u);
            let lv = level(&state, &u, n);
            let converged = lv.iter().zip(&trace[n - 1]).all(|(a, b)| a.distance(*b) < self.tol);
            trace.push(lv);
            n_used = n;
            if until_converged && converged {
                break;
            }
        }
        Ok((trace, n_used))
    }

    fn value_from_trace(&self, trace: Vec<Vec<GreenLevel>>, n_used: usize) -> GreenValue {
        let per_block = trace[n_used].clone();
        let g_f = per_block.iter().fold(GreenLevel::MinusInfinity, |a, b| a.max(*b));
        GreenValue { per_block, g_f, n_used, trace, functional_residual: None, log_norm_offset: None }
    }

    /// Green values at v without the functional-equation self-check.
    pub fn evaluate(&self, v: &[C64]) -> Result<GreenValue> {
        let (trace, n) = self.iterate(v, self.n_max, true)?;
        let mut g = self.value_from_trace(trace, n);
        if self.homogeneous {
            let nv = norm(v);
            if let (GreenLevel::Finite(x), true) = (g.g_f, nv > 0.0) {
                g.log_norm_offset = Some(x - nv.ln());
            }
        }
        Ok(g)
    }

    /// G_j^n at exactly n iterations.
    pub fn level_at(&self, v: &[C64], n: usize) -> Result<Vec<GreenLevel>> {
        let (trace, _) = self.iterate(v, n, false)?;
        Ok(trace[n].clone())
    }

    /// G at the orbit point F(v).
    pub fn evaluate_image(&self, v: &[C64]) -> Result<GreenValue> {
        self.evaluate(&self.map.apply(v))
    }

    pub fn degree_max(&self) -> u32 {
        *self.degrees().iter().max().unwrap_or(&2)
    }
}

fn functional_residual(ev: &GreenEvaluator, v: &[C64], g: &GreenValue) -> Result<f64> {
    let gf = ev.evaluate_image(v)?;
    let mut worst: f64 = 0.0;
    for (j, (a, b)) in gf.per_block.iter().zip(&g.per_block).enumerate() {
        let k = ev.degrees()[j] as f64;
        worst = worst.max(a.distance(b.scale(k)));
    }
    Ok(worst)
}

/// Green values of an adapted germ, with the residual of G_j∘F = k_j G_j attached.
pub fn green_adapted(ev: &GreenEvaluator, v: &[C64]) -> Result<GreenValue> {
    let mut g = ev.evaluate(v)?;
    g.functional_residual = Some(functional_residual(ev, v, &g)?);
    Ok(g)
}

/// Green values of a quasihomogeneous map, valid on all of E.
pub fn green_homogeneous(h: &QuasihomogeneousMap, v: &[C64]) -> Result<GreenValue> {
    let ev = GreenEvaluator::for_homogeneous(h)?;
    let mut g = ev.evaluate(v)?;
    g.functional_residual = Some(functional_residual(&ev, v, &g)?);
    Ok(g)
}

/// For each block, whether G_j^n(v) < −M.
pub fn sublevel_membership(ev: &GreenEvaluator, v: &[C64], n: usize) -> Result<Vec<bool>> {
    let lv = ev.level_at(v, n)?;
    Ok(lv.iter().map(|g| g.less_than(-ev.m_threshold)).collect())
}

pub fn classify_basin(ev: &GreenEvaluator, v: &[C64]) -> BasinClass {
    let mut u = v.to_vec();
    for n in 0..=ev.n_max {
        let nu = norm(&u);
        if !nu.is_finite() || nu > ev.escape_radius {
            return BasinClass::Escaped { n };
        }
        if nu < ev.capture_radius || nu == 0.0 {
            return BasinClass::Attracted { n };
        }
        if n < ev.n_max {
            u = ev.map.apply(&u);
        }
    }
    BasinClass::Undecided { n_max: ev.n_max }
}

/// Largest r with ‖F(v)‖ ≤ ½‖v‖ on B(0, r), from the bound
/// ‖F(v)‖ ≤ Σ_d B_d ‖v‖^d where B_d collects the degree-d coefficient moduli.
pub fn capture_radius(f: &PolyMap) -> f64 {
    let dmax = f.total_degree() as usize;
    let mut b = vec![0.0f64; dmax + 1];
    for c in f.coords() {
        let mut row = vec![0.0f64; dmax + 1];
        for (e, z) in c.terms() {
            row[e.iter().sum::<u32>() as usize] += z.norm();
        }
        for (bd, r) in b.iter_mut().zip(&row) {
            *bd += r * r;
        }
    }
    let b: Vec<f64> = b.into_iter().map(f64::sqrt).collect();
    if b[0] > 0.0 || b.get(1).copied().unwrap_or(0.0) >= 0.5 {
        return 0.0;
    }
    let bound = |r: f64| -> f64 { b.iter().enumerate().skip(1).map(|(d, bd)| bd * r.powi(d as i32 - 1)).sum() };
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while bound(hi) <= 0.5 && hi < 1e6 {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if bound(mid) <= 0.5 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Least-squares slope of log|G_j^{n+1} − G_j^n| against n, over the
/// differences above `floor` and from n ≥ `skip`.
pub fn convergence_slope(trace: &[Vec<GreenLevel>], j: usize, skip: usize, floor: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = trace
        .windows(2)
        .enumerate()
        .skip(skip)
        .filter_map(|(n, w)| {
            let d = w[1][j].distance(w[0][j]);
            (d.is_finite() && d > floor).then(|| (n as f64, d.ln()))
        })
        .collect();
    if pts.len() < 4 {
        return None;
    }
    let nf = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    Some(sxy / sxx)
}

/// One CSV row per sample: coordinates, per-block G, G_F, n_used, residual.
pub fn write_csv<W: Write>(mut w: W, rows: &[(Vec<C64>, GreenValue)]) -> std::io::Result<()> {
    let Some((v0, g0)) = rows.first() else { return Ok(()) };
    let mut header: Vec<String> = Vec::new();
    for i in 0..v0.len() {
        header.push(format!("re{i}"));
        header.push(format!("im{i}"));
    }
    for j in 0..g0.per_block.len() {
        header.push(format!("g{j}"));
    }
    header.extend(["g_f".into(), "n_used".into(), "residual".into()]);
    writeln!(w, "{}", header.join(","))?;
    for (v, g) in rows {
        let mut cols: Vec<String> = Vec::new();
        for z in v {
            cols.push(format!("{:.17e}", z.re));
            cols.push(format!("{:.17e}", z.im));
        }
        cols.extend(g.per_block.iter().map(|x| x.to_string()));
        cols.push(g.g_f.to_string());
        cols.push(g.n_used.to_string());
        cols.push(g.functional_residual.map(|r| format!("{r:.6e}")).unwrap_or_default());
        writeln!(w, "{}", cols.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{BlockStructure, SparsePoly};
    use crate::quasihom::extract_quasihomogeneous_part;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn square() -> QuasihomogeneousMap {
        let p = PolyMap::self_map(
            BlockStructure::single(1),
            vec![SparsePoly::from_terms(1, [(vec![2], c(1.0, 0.0))]).unwrap()],
        )
        .unwrap();
        QuasihomogeneousMap::from_polymap(&p, &BlockStructure::single(1)).unwrap()
    }

    fn two_squares() -> QuasihomogeneousMap {
        let p = PolyMap::self_map(
            BlockStructure::new(vec![1, 1]).unwrap(),
            vec![
                SparsePoly::from_terms(2, [(vec![2, 0], c(1.0, 0.0))]).unwrap(),
                SparsePoly::from_terms(2, [(vec![0, 2], c(1.0, 0.0))]).unwrap(),
            ],
        )
        .unwrap();
        QuasihomogeneousMap::from_polymap(&p, &BlockStructure::new(vec![1, 1]).unwrap()).unwrap()
    }

    #[test]
    fn pure_square_is_log_modulus() {
        let g = green_homogeneous(&square(), &[c(0.5, 0.0)]).unwrap();
        assert_eq!(g.g_f, GreenLevel::Finite(0.5f64.ln()));
        assert!(g.trace.iter().all(|t| t[0] == GreenLevel::Finite(0.5f64.ln())));
    }

    #[test]
    fn zero_is_sentinel() {
        let g = green_homogeneous(&square(), &[c(0.0, 0.0)]).unwrap();
        assert_eq!(g.g_f, GreenLevel::MinusInfinity);
    }

    #[test]
    fn two_squares_is_max_log() {
        let v = [c(0.3, 0.4), c(-2.0, 0.1)];
        let g = green_homogeneous(&two_squares(), &v).unwrap();
        let want = v[0].norm().ln().max(v[1].norm().ln());
        assert!((g.g_f.value().unwrap() - want).abs() < 1e-14);
        assert_eq!(g.g_f, g.per_block.iter().fold(GreenLevel::MinusInfinity, |a, b| a.max(*b)));
    }

    #[test]
    fn sublevel_examples() {
        let ev = GreenEvaluator::for_homogeneous(&square()).unwrap().with_threshold(2.0);
        assert_eq!(sublevel_membership(&ev, &[c(0.1, 0.0)], 0).unwrap(), vec![true]);
        assert_eq!(sublevel_membership(&ev, &[c(0.0, 1.0)], 0).unwrap(), vec![false]);
    }

    #[test]
    fn classify_simple() {
        let f = PolyMap::self_map(
            BlockStructure::single(1),
            vec![SparsePoly::from_terms(1, [(vec![2], c(1.0, 0.0))]).unwrap()],
        )
        .unwrap();
        let g = extract_quasihomogeneous_part(&f, &BlockStructure::single(1)).unwrap();
        let ev = GreenEvaluator::for_germ(&g);
        assert_eq!(classify_basin(&ev, &[c(0.0, 0.0)]), BasinClass::Attracted { n: 0 });
        assert!(matches!(classify_basin(&ev, &[c(2.0, 0.0)]), BasinClass::Escaped { .. }));
        assert!((ev.capture_radius - 0.5).abs() < 1e-12);
    }

    #[test]
    fn renormalized_tail_keeps_value() {
        // z² + z³ from 0.1: direct iteration would underflow after ~10 steps
        let f = PolyMap::self_map(
            BlockStructure::single(1),
            vec![SparsePoly::from_terms(1, [(vec![2], c(1.0, 0.0)), (vec![3], c(1.0, 0.0))]).unwrap()],
        )
        .unwrap();
        let g = extract_quasihomogeneous_part(&f, &BlockStructure::single(1)).unwrap();
        let ev = GreenEvaluator::for_germ(&g).with_tol(0.0).with_n_max(40);
        let v = green_adapted(&ev, &[c(0.1, 0.0)]).unwrap();
        // log|φ(z)| with φ from the one-variable theory
        let germ = crate::bottcher1d::Germ1D::new(c(1.0, 0.0), 2, vec![c(1.0, 0.0)]).unwrap();
        let phi = crate::bottcher1d::bottcher_eval(&germ, c(0.1, 0.0)).unwrap();
        assert!((v.g_f.value().unwrap() - phi.norm().ln()).abs() < 1e-13);
        assert!(v.functional_residual.unwrap() < 1e-12);
    }
}
