//! Holomorphic vector fields near a fixed point: linear block fields, their
//! weighted pullbacks along a germ, flows, and admissibility diagnostics.

pub mod bottcher;
pub mod flow;

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::algebra::linalg::{hadamard_ratio, solve_equilibrated};
use crate::algebra::sampling::{random_ball, rng};
use crate::algebra::{norm, BlockStructure, PolyMap, SelfMap};
use crate::error::{Error, Result};
use crate::quasihom::AdaptedGerm;

pub use bottcher::{
    basin_samples, conjugacy_report, extend_bottcher, extend_bottcher_with, global_report, linearize, linearize_poincare, local_bottcher, radiality, sublevel_samples,
    BottcherCoordinate, ConjugacyReport, Extension, GlobalReport, Linearized, HORIZONS, STABILIZATION_TOL,
};
pub use flow::{FlowIntegrator, FlowResult};


type C64 = Complex64;

/// Orbit points below this norm use the base field directly: the weighted
/// pullback of a field with linear part ϑ_j agrees with it to O(‖u‖²) there.
pub const PULLBACK_CUTOFF: f64 = 1e-17;

/// Default floor on the Hadamard ratio of D F along a pullback chain.
pub const DEFAULT_DELTA: f64 = 1e-8;

#[derive(Clone)]
pub enum FieldKind {
    /// ϑ_rad(v) = v
    Radial,
    /// ϑ_j(v) = (0, …, v_j, …, 0)
    Block(usize),
    /// components given by polynomials
    Polynomial(PolyMap),
    /// weight^n · (D F^n)^{-1} base(F^n)
    Pullback { base: Box<VectorField>, map: Arc<dyn SelfMap>, n: usize, weight: f64 },
    Sum(Vec<VectorField>),
}

/// What a pullback chain does when D F at some orbit point falls below the
/// Hadamard floor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Default)]
pub enum ChainPolicy {
    /// fail with `CriticalProximity`
    #[default]
    Refuse,
    /// end the chain at the first such point past the start and use the base
    /// field there; fails only if the start itself is too close
    Truncate,
}

#[derive(Clone)]
pub struct VectorField {
    pub kind: FieldKind,
    pub blocks: BlockStructure,
    /// evaluation refused outside this ball
    pub radius: f64,
    /// Hadamard-ratio floor for pullback chains
    pub delta: f64,
    pub policy: ChainPolicy,
}

impl fmt::Debug for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "VectorField({})", self.describe())
    }
}

impl VectorField {
    fn with_kind(kind: FieldKind, blocks: BlockStructure) -> Self {
        Self { kind, blocks, radius: f64::INFINITY, delta: DEFAULT_DELTA, policy: ChainPolicy::Refuse }
    }

    pub fn radial(blocks: BlockStructure) -> Self {
        Self::with_kind(FieldKind::Radial, blocks)
    }

    pub fn block(blocks: BlockStructure, j: usize) -> Self {
        Self::with_kind(FieldKind::Block(j), blocks)
    }

    /// (ϑ_1, …, ϑ_p) for the given blocks.
    pub fn block_fields(blocks: &BlockStructure) -> Vec<Self> {
        (0..blocks.p()).map(|j| Self::block(blocks.clone(), j)).collect()
    }

    pub fn polynomial(p: PolyMap) -> Result<Self> {
        if p.input().m() != p.output().m() {
            return Err(Error::DimensionMismatch { expected: p.input().m(), got: p.output().m() });
        }
        let blocks = p.input().without_degrees();
        Ok(Self::with_kind(FieldKind::Polynomial(p), blocks))
    }

    pub fn sum(fields: Vec<VectorField>) -> Result<Self> {
        let first = fields.first().ok_or_else(|| Error::InvalidArgument("empty sum".into()))?;
        let blocks = first.blocks.clone();
        if fields.iter().any(|f| f.blocks.m() != blocks.m()) {
            return Err(Error::DimensionMismatch { expected: blocks.m(), got: 0 });
        }
        let radius = fields.iter().map(|f| f.radius).fold(f64::INFINITY, f64::min);
        let delta = fields.iter().map(|f| f.delta).fold(0.0, f64::max);
        let policy = first.policy;
        Ok(Self { kind: FieldKind::Sum(fields), blocks, radius, delta, policy })
    }

    pub fn with_radius(mut self, r: f64) -> Self {
        self.radius = r;
        self
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    pub fn with_policy(mut self, policy: ChainPolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn dim(&self) -> usize {
        self.blocks.m()
    }

    pub fn describe(&self) -> String {
        match &self.kind {
            FieldKind::Radial => "radial".into(),
            FieldKind::Block(j) => format!("block[{j}]"),
            FieldKind::Polynomial(_) => "polynomial".into(),
            FieldKind::Pullback { base, n, weight, .. } => format!("pullback^{n}(w={weight}, {})", base.describe()),
            FieldKind::Sum(fs) => fs.iter().map(Self::describe).collect::<Vec<_>>().join(" + "),
        }
    }

    pub fn eval(&self, v: &[C64]) -> Result<Vec<C64>> {
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: v.len() });
        }
        let nv = norm(v);
        if nv > self.radius {
            return Err(Error::DomainExit { radius: self.radius, norm: nv });
        }
        match &self.kind {
            FieldKind::Radial => Ok(v.to_vec()),
            FieldKind::Block(j) => {
                let mut out = vec![C64::new(0.0, 0.0); v.len()];
                for i in self.blocks.range(*j) {
                    out[i] = v[i];
                }
                Ok(out)
            }
            FieldKind::Polynomial(p) => Ok(p.eval_slice(v)),
            FieldKind::Pullback { base, map, n, weight } => self.eval_chain(base, map.as_ref(), *n, *weight, v),
            FieldKind::Sum(fs) => {
                let mut out = vec![C64::new(0.0, 0.0); v.len()];
                for f in fs {
                    for (o, x) in out.iter_mut().zip(f.eval(v)?) {
                        *o += x;
                    }
                }
                Ok(out)
            }
        }
    }

    /// Successive solves along the orbit, from the deepest point outward.
    fn eval_chain(&self, base: &VectorField, map: &dyn SelfMap, n: usize, weight: f64, v: &[C64]) -> Result<Vec<C64>> {
        let mut orbit = vec![v.to_vec()];
        while orbit.len() <= n && norm(orbit.last().unwrap()) >= PULLBACK_CUTOFF {
            let next = map.apply(orbit.last().unwrap());
            orbit.push(next);
        }
        let mut jacs = Vec::with_capacity(orbit.len() - 1);
        for (i, u) in orbit[..orbit.len() - 1].iter().enumerate() {
            let d = map.jac(u);
            let ratio = hadamard_ratio(&d);
            if !(ratio >= self.delta) {
                if i == 0 || self.policy == ChainPolicy::Refuse {
                    return Err(Error::CriticalProximity { ratio, floor: self.delta });
                }
                orbit.truncate(i + 1);
                break;
            }
            jacs.push(d);
        }
        let s = orbit.len() - 1;
        let mut w = base.eval(&orbit[s])?;
        for d in jacs.iter().rev() {
            if w.iter().all(|z| *z == C64::new(0.0, 0.0)) {
                break;
            }
            let rhs = DVector::from_vec(w);
            let sol = solve_equilibrated(d, &rhs).ok_or(Error::CriticalProximity { ratio: 0.0, floor: self.delta })?;
            w = sol.iter().map(|z| z * weight).collect();
        }
        Ok(w)
    }

    /// Matrix of the linear part ϑ_j (or identity for the radial field), when linear.
    pub fn linear_matrix(&self) -> Option<DMatrix<C64>> {
        let m = self.dim();
        match &self.kind {
            FieldKind::Radial => Some(DMatrix::identity(m, m)),
            FieldKind::Block(j) => Some(block_matrix(&self.blocks, *j)),
            _ => None,
        }
    }
}

pub fn block_matrix(blocks: &BlockStructure, j: usize) -> DMatrix<C64> {
    let m = blocks.m();
    let mut a = DMatrix::zeros(m, m);
    for i in blocks.range(j) {
        a[(i, i)] = C64::new(1.0, 0.0);
    }
    a
}

/// The weight that makes the pullback of ξ by F fix ξ's linear part:
/// k_j for ϑ_j, the common degree otherwise.
fn default_weight(germ: &AdaptedGerm, xi: &VectorField) -> Result<f64> {
    let d = germ.degrees();
    match xi.kind {
        FieldKind::Block(j) => Ok(d[j] as f64),
        _ => {
            let active: Vec<u32> =
                (0..d.len()).filter(|&j| !germ.blocks().range(j).is_empty()).map(|j| d[j]).collect();
            if active.windows(2).all(|w| w[0] == w[1]) && !active.is_empty() {
                Ok(active[0] as f64)
            } else {
                Err(Error::InvalidArgument("block degrees differ; pass an explicit weight".into()))
            }
        }
    }
}

/// k^n (F^n)^*ξ with the weight inferred from ξ and the block degrees.
pub fn pullback_field(germ: &AdaptedGerm, xi: &VectorField, n: usize) -> Result<VectorField> {
    let w = default_weight(germ, xi)?;
    Ok(pullback_field_weighted(Arc::new(germ.clone()), xi, n, w))
}

pub fn pullback_field_weighted(map: Arc<dyn SelfMap>, xi: &VectorField, n: usize, weight: f64) -> VectorField {
    if n == 0 {
        return xi.clone();
    }
    VectorField {
        kind: FieldKind::Pullback { base: Box::new(xi.clone()), map, n, weight },
        blocks: xi.blocks.clone(),
        radius: xi.radius,
        delta: xi.delta,
        policy: xi.policy,
    }
}

/// Flow of ξ for time t ≤ 0.
pub fn flow(xi: &VectorField, v: &[C64], t: f64) -> Result<FlowResult> {
    flow_with(&FlowIntegrator::default(), xi, v, t)
}

pub fn flow_with(integ: &FlowIntegrator, xi: &VectorField, v: &[C64], t: f64) -> Result<FlowResult> {
    if t > 0.0 {
        return Err(Error::ForwardFlow(t));
    }
    integ.integrate(|_, y| Ok(xi.eval(y)?.into_iter().map(|z| -z).collect()), v, 0.0, -t)
}

#[derive(Debug, Clone, Serialize)]
pub struct FieldChecks {
    pub field: usize,
    /// max ‖π_i ξ_j(v)‖/‖v‖ over i ≠ j, v near E_j
    pub tangency: f64,
    /// max ‖ξ_j(v)‖/‖v‖ over v with v_j = 0
    pub vanishing: f64,
    /// ‖Dξ_j(0) − ϑ_j‖ by Richardson-extrapolated differences
    pub linear_part: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CommutatorCheck {
    pub pair: [usize; 2],
    pub s: Vec<f64>,
    pub defect: Vec<f64>,
    pub slope: Option<f64>,
    pub below_floor: bool,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct AdmissibilityReport {
    pub schema: u32,
    pub fields: Vec<FieldChecks>,
    pub commutators: Vec<CommutatorCheck>,
    pub violations: Vec<String>,
    pub passed: bool,
}

/// Relative tolerance for tangency, vanishing and linear-part checks.
pub const ADMISSIBILITY_TOL: f64 = 1e-6;
/// Relative commutator defects below this are numerical noise.
pub const COMMUTATOR_FLOOR: f64 = 1e-10;

/// Offset of sample points from E_j, relative to their norm: exact points of
/// E_j lie on the critical set of a germ with several blocks.
const TANGENCY_OFFSET: f64 = 1e-7;

/// Checks the conditions for (ξ_1, …, ξ_p) to be admissible on a ball of radius r.
pub fn admissibility_report(
    fields: &[VectorField],
    blocks: &BlockStructure,
    radius: f64,
    samples: usize,
    seed: u64,
) -> Result<AdmissibilityReport> {
    let p = blocks.p();
    if fields.len() != p {
        return Err(Error::DimensionMismatch { expected: p, got: fields.len() });
    }
    let m = blocks.m();
    let mut r = rng(seed);
    let mut violations = Vec::new();
    let mut checks = Vec::new();
    for (j, xi) in fields.iter().enumerate() {
        let rj = blocks.range(j);
        let mut tangency: f64 = 0.0;
        let mut vanishing: f64 = 0.0;
        for _ in 0..samples {
            if !rj.is_empty() && rj.len() < m {
                let mut v = random_ball(&mut r, m, radius);
                let eps = random_ball(&mut r, m, 1.0);
                let nv = norm(&v);
                for i in 0..m {
                    if !rj.contains(&i) {
                        v[i] = eps[i] * nv * TANGENCY_OFFSET;
                    }
                }
                let x = xi.eval(&v)?;
                let off: f64 = (0..m).filter(|i| !rj.contains(i)).map(|i| x[i].norm_sqr()).sum::<f64>().sqrt();
                tangency = tangency.max(off / nv);
            }
            let mut w = random_ball(&mut r, m, radius);
            for i in rj.clone() {
                w[i] = C64::new(0.0, 0.0);
            }
            let nw = norm(&w);
            if nw > 0.0 {
                vanishing = vanishing.max(norm(&xi.eval(&w)?) / nw);
            }
        }
        let linear_part = (fd_linear_part(xi, radius.min(1.0), seed + j as u64)? - block_matrix(blocks, j)).norm();
        if tangency > ADMISSIBILITY_TOL {
            violations.push(format!("field {j} not tangent to its block ({tangency:.3e})"));
        }
        if vanishing > ADMISSIBILITY_TOL {
            violations.push(format!("field {j} does not vanish off its block ({vanishing:.3e})"));
        }
        if linear_part > ADMISSIBILITY_TOL {
            violations.push(format!("field {j} has the wrong linear part ({linear_part:.3e})"));
        }
        checks.push(FieldChecks { field: j, tangency, vanishing, linear_part });
    }
    let mut commutators = Vec::new();
    for a in 0..p {
        for b in a + 1..p {
            let c = commutator_check(&fields[a], &fields[b], radius, &mut r)?;
            if !c.passed {
                violations.push(format!("fields {a} and {b} do not commute (slope {:?})", c.slope));
            }
            commutators.push(CommutatorCheck { pair: [a, b], ..c });
        }
    }
    Ok(AdmissibilityReport { schema: 1, fields: checks, commutators, passed: violations.is_empty(), violations })
}

/// Dξ(0) from central differences along random directions, Richardson
/// extrapolated from h = 1e-3·scale and h/2.
pub fn fd_linear_part(xi: &VectorField, scale: f64, seed: u64) -> Result<DMatrix<C64>> {
    let m = xi.dim();
    let mut r = rng(seed ^ 0x5eed);
    let dirs: Vec<Vec<C64>> = (0..m).map(|_| crate::algebra::sampling::random_unit(&mut r, m)).collect();
    let h = 1e-3 * scale;
    let central = |d: &[C64], h: f64| -> Result<Vec<C64>> {
        let p: Vec<C64> = d.iter().map(|z| z * h).collect();
        let q: Vec<C64> = d.iter().map(|z| -z * h).collect();
        Ok(xi.eval(&p)?.iter().zip(xi.eval(&q)?).map(|(a, b)| (a - b) / (2.0 * h)).collect())
    };
    let mut img = DMatrix::zeros(m, m);
    for (k, d) in dirs.iter().enumerate() {
        let a = central(d, h)?;
        let b = central(d, h / 2.0)?;
        for i in 0..m {
            img[(i, k)] = (b[i] * 4.0 - a[i]) / 3.0;
        }
    }
    let dmat = DMatrix::from_fn(m, m, |i, k| dirs[k][i]);
    let inv = dmat.try_inverse().ok_or_else(|| Error::InvalidArgument("singular probe directions".into()))?;
    Ok(img * inv)
}

fn commutator_check<R: rand::Rng>(a: &VectorField, b: &VectorField, radius: f64, r: &mut R) -> Result<CommutatorCheck> {
    let m = a.dim();
    let v = random_ball(r, m, radius * 0.5);
    let nv = norm(&v).max(1e-300);
    let s: Vec<f64> = (0..5).map(|i| 1e-4 * 10f64.powf(i as f64 * 0.5)).collect();
    let mut defect = Vec::new();
    for &si in &s {
        let ab = flow(a, &flow(b, &v, -si)?.value, -si)?.value;
        let ba = flow(b, &flow(a, &v, -si)?.value, -si)?.value;
        defect.push(crate::algebra::dist(&ab, &ba) / nv);
    }
    let below_floor = defect.iter().all(|d| *d <= COMMUTATOR_FLOOR);
    let slope = if below_floor { None } else { Some(crate::koch::partition::loglog_slope(&s, &defect)) };
    let passed = below_floor || slope.is_some_and(|x| x >= 2.5);
    Ok(CommutatorCheck { pair: [0, 0], s, defect, slope, below_floor, passed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::SparsePoly;
    use crate::bottcher1d::Germ1D;
    use crate::quasihom::extract_quasihomogeneous_part;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn germ_1d(coeffs: &[C64]) -> AdaptedGerm {
        let g = Germ1D::from_coeffs(coeffs).unwrap();
        extract_quasihomogeneous_part(&g.to_polymap(), &BlockStructure::single(1)).unwrap()
    }

    #[test]
    fn square_pullback_is_radial() {
        let g = germ_1d(&[c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        let xi = VectorField::radial(BlockStructure::single(1));
        let z = pullback_field(&g, &xi, 3).unwrap();
        let v = [c(0.3, 0.2)];
        assert!((z.eval(&v).unwrap()[0] - v[0]).norm() < 1e-15);
        let unweighted = pullback_field_weighted(Arc::new(g), &xi, 1, 1.0);
        assert!((unweighted.eval(&v).unwrap()[0] - v[0] / 2.0).norm() < 1e-15);
    }

    #[test]
    fn koch_euler_inversion() {
        let h = crate::koch::koch_h_polymap(3);
        let g = extract_quasihomogeneous_part(&h, &h.input().without_degrees()).unwrap();
        let xi = VectorField::radial(g.blocks().clone());
        let z = pullback_field(&g, &xi, 1).unwrap();
        let mut r = rng(2);
        for _ in 0..10 {
            let v = random_ball(&mut r, 2, 1.0);
            assert!(crate::algebra::dist(&z.eval(&v).unwrap(), &v) < 1e-10 * norm(&v));
        }
    }

    #[test]
    fn truncated_chains_agree_where_refusal_does_not_trigger() {
        let cg = crate::koch::chart_germ(&"1,2,3|4".parse().unwrap()).unwrap();
        let xi = VectorField::block(cg.germ.blocks().clone(), 0);
        let strict = pullback_field(&cg.germ, &xi, 6).unwrap();
        let lax = pullback_field(&cg.germ, &xi.with_policy(ChainPolicy::Truncate), 6).unwrap();
        let mut r = rng(8);
        let (mut agreed, mut rescued) = (0, 0);
        for _ in 0..200 {
            let v = random_ball(&mut r, 2, 0.9);
            match (strict.eval(&v), lax.eval(&v)) {
                (Ok(a), Ok(b)) => {
                    assert!(crate::algebra::dist(&a, &b) <= 1e-14 * norm(&a));
                    agreed += 1;
                }
                (Err(Error::CriticalProximity { .. }), Ok(_)) => rescued += 1,
                (_, Err(Error::CriticalProximity { .. })) => {}
                other => panic!("{other:?}"),
            }
        }
        assert!(agreed > 100 && rescued > 0, "{agreed} {rescued}");
    }

    #[test]
    fn flows_of_linear_fields() {
        let b = BlockStructure::new(vec![1, 2]).unwrap();
        let v = vec![c(0.3, 0.1), c(-0.2, 0.4), c(0.1, 0.0)];
        let r = flow(&VectorField::radial(b.clone()), &v, -2.0).unwrap();
        let e = (-2.0f64).exp();
        assert!(r.value.iter().zip(&v).all(|(a, b)| (a - b * e).norm() < 1e-9));
        let r = flow(&VectorField::block(b, 1), &v, -1.0).unwrap();
        assert!((r.value[0] - v[0]).norm() < 1e-15);
        assert!((r.value[2] - v[2] * (-1.0f64).exp()).norm() < 1e-10);
        assert!(matches!(flow(&VectorField::radial(BlockStructure::single(3)), &v, 0.5), Err(Error::ForwardFlow(_))));
    }

    #[test]
    fn linear_tuple_is_admissible() {
        let b = BlockStructure::new(vec![2, 1]).unwrap();
        let rep = admissibility_report(&VectorField::block_fields(&b), &b, 0.5, 5, 1).unwrap();
        assert!(rep.passed, "{:?}", rep.violations);
        let bad = vec![VectorField::block(b.clone(), 0), VectorField::block(b.clone(), 0)];
        let rep = admissibility_report(&bad, &b, 0.5, 5, 1).unwrap();
        assert!(!rep.passed);
        assert!(rep.fields[1].vanishing > 0.1 && rep.fields[1].linear_part > 0.1);
    }

    #[test]
    fn non_commuting_detected() {
        // ξ_1 = (x + y², 0), ξ_2 = (0, y): [ξ_1, ξ_2] ≠ 0
        let b = BlockStructure::new(vec![1, 1]).unwrap();
        let mut p1 = SparsePoly::var(2, 0);
        p1.add_term(vec![0, 2], c(1.0, 0.0));
        let f1 = VectorField::polynomial(PolyMap::self_map(b.clone(), vec![p1, SparsePoly::zero(2)]).unwrap()).unwrap();
        let f2 = VectorField::block(b.clone(), 1);
        let rep = admissibility_report(&[f1, f2], &b, 0.5, 3, 4).unwrap();
        assert!(!rep.commutators[0].passed, "{:?}", rep.commutators);
    }
}
