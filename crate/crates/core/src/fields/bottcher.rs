//! Poincaré linearization of asymptotically radial fields and Böttcher
//! coordinates built from weighted pullbacks of an admissible tuple.

use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{admissibility_report, flow_with, pullback_field, FlowIntegrator, VectorField};
use crate::algebra::sampling::{random_ball, rng};
use crate::algebra::{dist, norm, SelfMap};
use crate::error::{Error, Result};
use crate::green::{classify_basin, BasinClass, GreenEvaluator, GreenLevel};
use crate::quasihom::AdaptedGerm;

type C64 = Complex64;

/// Checkpoints in backward time at which e^{-t}·F_t(v) is compared.
pub const HORIZONS: [f64; 4] = [5.0, 10.0, 20.0, 40.0];
/// Successive checkpoints must agree to this, relative to ‖v‖.
pub const STABILIZATION_TOL: f64 = 1e-9;

/// J(v) = Re⟨ξ(v)|v⟩ / ‖v‖².
pub fn radiality(xi: &VectorField, v: &[C64]) -> Result<f64> {
    let x = xi.eval(v)?;
    let n2 = v.iter().map(|z| z.norm_sqr()).sum::<f64>();
    Ok(x.iter().zip(v).map(|(a, b)| (a * b.conj()).re).sum::<f64>() / n2)
}

/// e^{-T}·F_T(v) for T ≤ 0, integrated in the rescaled variable
/// y(s) = e^{s}·F_{-s}(v), dy/ds = y − e^{s} ξ(e^{-s} y).
pub fn linearize_poincare(xi: &VectorField, v: &[C64], t: f64) -> Result<Vec<C64>> {
    if t > 0.0 {
        return Err(Error::ForwardFlow(t));
    }
    let integ = FlowIntegrator::default().scaled_to(norm(v));
    Ok(integ.integrate(|s, y| rescaled_rhs(xi, s, y), v, 0.0, -t)?.value)
}

fn rescaled_rhs(xi: &VectorField, s: f64, y: &[C64]) -> Result<Vec<C64>> {
    let e = (-s).exp();
    let x: Vec<C64> = y.iter().map(|z| z * e).collect();
    let f = xi.eval(&x)?;
    let inv = s.exp();
    Ok(y.iter().zip(f).map(|(a, b)| a - b * inv).collect())
}

#[derive(Debug, Clone, Serialize)]
pub struct Linearized {
    pub value: Vec<C64>,
    pub horizon: f64,
    pub increment: f64,
}

/// Runs the rescaled flow through the horizon ladder until two checkpoints agree.
pub fn linearize(xi: &VectorField, v: &[C64]) -> Result<Linearized> {
    let nv = norm(v);
    if nv == 0.0 {
        return Ok(Linearized { value: v.to_vec(), horizon: 0.0, increment: 0.0 });
    }
    let j = radiality(xi, v)?;
    if !(0.5..=1.5).contains(&j) {
        return Err(Error::NotAsymptoticallyRadial(j));
    }
    let integ = FlowIntegrator::default().scaled_to(nv);
    let mut y = v.to_vec();
    let mut s = 0.0;
    let mut prev: Option<Vec<C64>> = None;
    let mut last_inc = f64::INFINITY;
    for &h in &HORIZONS {
        y = integ.integrate(|s, y| rescaled_rhs(xi, s, y), &y, s, h)?.value;
        s = h;
        if let Some(p) = &prev {
            last_inc = dist(p, &y) / nv;
            if last_inc < STABILIZATION_TOL {
                return Ok(Linearized { value: y, horizon: h, increment: last_inc });
            }
        }
        prev = Some(y.clone());
    }
    Err(Error::NonStabilization(last_inc))
}

/// Φ_n: the linearizing coordinate of Σ_j k_j^n (F^n)^*ξ_j.
#[derive(Clone, Debug)]
pub struct BottcherCoordinate {
    germ: AdaptedGerm,
    base: Vec<VectorField>,
    n: usize,
    field: VectorField,
    green: GreenEvaluator,
}

impl BottcherCoordinate {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn germ(&self) -> &AdaptedGerm {
        &self.germ
    }

    pub fn field(&self) -> &VectorField {
        &self.field
    }

    pub fn green(&self) -> &GreenEvaluator {
        &self.green
    }

    /// The same recipe at another pullback level.
    pub fn at_level(&self, n: usize) -> Result<Self> {
        build(&self.germ, self.base.clone(), n, self.green.clone())
    }

    pub fn eval(&self, v: &[C64]) -> Result<Vec<C64>> {
        Ok(linearize(&self.field, v)?.value)
    }

    /// F then Φ.
    pub fn eval_image(&self, v: &[C64]) -> Result<Vec<C64>> {
        self.eval(&self.germ.apply(v))
    }

    /// The quasihomogeneous model H at w.
    pub fn model(&self, w: &[C64]) -> Vec<C64> {
        self.germ.h.apply(w)
    }

    pub fn kmin(&self) -> u32 {
        let b = self.germ.blocks();
        (0..b.p()).filter(|&j| !b.range(j).is_empty()).map(|j| self.germ.degrees()[j]).min().unwrap_or(2)
    }
}

fn build(germ: &AdaptedGerm, base: Vec<VectorField>, n: usize, green: GreenEvaluator) -> Result<BottcherCoordinate> {
    let blocks = germ.blocks();
    if base.len() != blocks.p() {
        return Err(Error::DimensionMismatch { expected: blocks.p(), got: base.len() });
    }
    let mut parts = Vec::new();
    for (j, xi) in base.iter().enumerate() {
        if blocks.range(j).is_empty() {
            continue;
        }
        parts.push(pullback_field(germ, xi, n)?);
    }
    let field = VectorField::sum(parts)?;
    Ok(BottcherCoordinate { germ: germ.clone(), base, n, field, green })
}

/// Builds Φ_n from an admissible base tuple after checking adaptedness and admissibility.
pub fn local_bottcher(germ: &AdaptedGerm, base: Vec<VectorField>, n: usize) -> Result<BottcherCoordinate> {
    if !germ.adapted() {
        return Err(Error::InvalidArgument(format!(
            "germ is not adapted ({} offending monomials)",
            germ.certificate.len()
        )));
    }
    let rep = admissibility_report(&base, germ.blocks(), 0.1, 3, 11)?;
    if !rep.passed {
        return Err(Error::InvalidArgument(format!("base tuple not admissible: {}", rep.violations.join("; "))));
    }
    build(germ, base, n, GreenEvaluator::for_germ(germ))
}

/// Points of the ball of radius r with G_F < −M.
pub fn sublevel_samples(ev: &GreenEvaluator, count: usize, radius: f64, seed: u64) -> Vec<Vec<C64>> {
    let m = ev.h().blocks().m();
    let mut r = rng(seed);
    let mut out = Vec::with_capacity(count);
    let mut tries = 0;
    while out.len() < count && tries < 100 * count {
        tries += 1;
        let scale = r.random::<f64>().max(0.05);
        let v = random_ball(&mut r, m, radius * scale);
        if let Ok(g) = ev.evaluate(&v) {
            if g.g_f.less_than(-ev.m_threshold) {
                out.push(v);
            }
        }
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct ConjugacyRow {
    pub n: usize,
    /// sup ‖Φ_n(F v) − H(Φ_{n+1} v)‖ / ‖v‖^{k_min}
    pub shifted_residual: f64,
    /// sup ‖Φ_n(F v) − H(Φ_n v)‖ / ‖v‖^{k_min}
    pub residual: f64,
    /// sup ‖Φ_{n+1} v − Φ_n v‖ / ‖v‖
    pub cauchy: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConjugacyReport {
    pub schema: u32,
    pub samples: usize,
    pub rows: Vec<ConjugacyRow>,
    /// max over 6 scales of ‖D_0Φ − id‖ by central differences
    pub d0_error: f64,
    pub origin_value: f64,
    pub cauchy_monotone: bool,
}

/// Increments below this (relative) are treated as converged when testing monotone decay.
pub const CAUCHY_FLOOR: f64 = 1e-12;

/// Residual table for Φ_n over consecutive levels on the sample points.
pub fn conjugacy_report(
    coord: &BottcherCoordinate,
    levels: std::ops::RangeInclusive<usize>,
    samples: &[Vec<C64>],
) -> Result<ConjugacyReport> {
    let kmin = coord.kmin() as i32;
    let levels: Vec<usize> = levels.collect();
    let mut coords = Vec::new();
    for &n in &levels {
        coords.push(coord.at_level(n)?);
    }
    let last = *levels.last().ok_or_else(|| Error::InvalidArgument("no levels".into()))?;
    coords.push(coord.at_level(last + 1)?);
    // values[i][s] = Φ_{levels[i]}(v_s), images[i][s] = Φ_{levels[i]}(F v_s)
    let values: Vec<Vec<Vec<C64>>> = coords
        .iter()
        .map(|c| samples.par_iter().map(|v| c.eval(v)).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for (i, &n) in levels.iter().enumerate() {
        let images: Vec<Vec<C64>> = samples.par_iter().map(|v| coords[i].eval_image(v)).collect::<Result<_>>()?;
        let mut shifted: f64 = 0.0;
        let mut resid: f64 = 0.0;
        let mut cauchy: f64 = 0.0;
        for (s, v) in samples.iter().enumerate() {
            let nv = norm(v);
            let scale = nv.powi(kmin);
            shifted = shifted.max(dist(&images[s], &coord.model(&values[i + 1][s])) / scale);
            resid = resid.max(dist(&images[s], &coord.model(&values[i][s])) / scale);
            cauchy = cauchy.max(dist(&values[i + 1][s], &values[i][s]) / nv);
        }
        rows.push(ConjugacyRow { n, shifted_residual: shifted, residual: resid, cauchy });
    }
    let cauchy_monotone = rows.windows(2).all(|w| w[1].cauchy <= w[0].cauchy || w[1].cauchy <= CAUCHY_FLOOR);
    let d0_error = d0_identity_error(coord)?;
    let origin_value = norm(&coord.eval(&vec![C64::new(0.0, 0.0); coord.germ.blocks().m()])?);
    Ok(ConjugacyReport { schema: 1, samples: samples.len(), rows, d0_error, origin_value, cauchy_monotone })
}

/// max_h ‖(Φ(h e_i) − Φ(−h e_i))/2h − e_i‖ over 6 scales h ∈ [1e-4, 1e-3]
/// along generic unit directions.
pub fn d0_identity_error(coord: &BottcherCoordinate) -> Result<f64> {
    let m = coord.germ.blocks().m();
    let mut r = rng(99);
    let dirs: Vec<Vec<C64>> = (0..m).map(|_| crate::algebra::sampling::random_unit(&mut r, m)).collect();
    let mut worst: f64 = 0.0;
    for i in 0..6 {
        let h = 1e-4 * 10f64.powf(i as f64 / 5.0);
        for d in &dirs {
            let p: Vec<C64> = d.iter().map(|z| z * h).collect();
            let q: Vec<C64> = d.iter().map(|z| -z * h).collect();
            let a = coord.eval(&p)?;
            let b = coord.eval(&q)?;
            let fd: Vec<C64> = a.iter().zip(&b).map(|(x, y)| (x - y) / (2.0 * h)).collect();
            worst = worst.max(dist(&fd, d));
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, Serialize)]
pub struct Extension {
    pub value: Vec<[f64; 2]>,
    pub times: [f64; 2],
    /// ‖Φ via t_1 − Φ via t_2‖ / ‖Φ‖
    pub discrepancy: f64,
    pub local: bool,
}

impl Extension {
    pub fn point(&self) -> Vec<C64> {
        self.value.iter().map(|p| C64::new(p[0], p[1])).collect()
    }
}

/// Margin below −M reached by the backward flow before applying the local coordinate.
pub const EXTENSION_MARGIN: f64 = 1.0;
/// Time shifts tried in turn when a backward path is refused.
const RETRY_SHIFTS: [f64; 3] = [0.0, -0.37, -0.81];

/// Φ(x) = e^{-t}·Φ(F_t(x)) with t chosen from G_F so that F_t(x) is in the
/// local patch; evaluated at two times and compared.
pub fn extend_bottcher(coord: &BottcherCoordinate, x: &[C64]) -> Result<Extension> {
    extend_bottcher_with(&FlowIntegrator::default(), coord, x)
}

/// `extend_bottcher` with explicit integrator settings (tolerances, step budget).
pub fn extend_bottcher_with(integ: &FlowIntegrator, coord: &BottcherCoordinate, x: &[C64]) -> Result<Extension> {
    let ev = &coord.green;
    match classify_basin(ev, x) {
        BasinClass::Attracted { .. } => {}
        other => return Err(Error::NotInBasin(format!("{other:?}"))),
    }
    let g = ev.evaluate(x)?;
    let gf = match g.g_f {
        GreenLevel::MinusInfinity => return local_extension(coord, x),
        GreenLevel::Finite(v) => v,
    };
    if gf < -ev.m_threshold {
        return local_extension(coord, x);
    }
    let through = |t: f64| -> Result<Vec<C64>> {
        let y = flow_with(integ, &coord.field, x, t)?.value;
        let phi = coord.eval(&y)?;
        let s = (-t).exp();
        Ok(phi.into_iter().map(|z| z * s).collect())
    };
    // a path that grazes the critical set is retried with a longer time
    let attempt = |t: f64| -> Result<(f64, Vec<C64>)> {
        let mut last = None;
        for dt in RETRY_SHIFTS {
            match through(t + dt) {
                Ok(v) => return Ok((t + dt, v)),
                Err(e @ (Error::CriticalProximity { .. } | Error::StepSizeCollapse(_))) => last = Some(e),
                Err(e) => return Err(e),
            }
        }
        Err(last.expect("at least one attempt"))
    };
    // refusals at x itself are final
    coord.field.eval(x)?;
    let (t1, a) = attempt(-ev.m_threshold - gf - EXTENSION_MARGIN)?;
    let (t2, b) = attempt(t1 - 1.0)?;
    let discrepancy = dist(&a, &b) / norm(&a).max(1e-300);
    Ok(Extension { value: a.iter().map(|z| [z.re, z.im]).collect(), times: [t1, t2], discrepancy, local: false })
}

fn local_extension(coord: &BottcherCoordinate, x: &[C64]) -> Result<Extension> {
    let v = coord.eval(x)?;
    Ok(Extension { value: v.iter().map(|z| [z.re, z.im]).collect(), times: [0.0, 0.0], discrepancy: 0.0, local: true })
}

/// Points of the ball of radius r whose G_F lies in (lo, hi].
pub fn basin_samples(ev: &GreenEvaluator, count: usize, radius: f64, lo: f64, hi: f64, seed: u64) -> Vec<Vec<C64>> {
    let m = ev.h().blocks().m();
    let mut r = rng(seed);
    let mut out = Vec::with_capacity(count);
    let mut tries = 0;
    while out.len() < count && tries < 200 * count {
        tries += 1;
        let v = random_ball(&mut r, m, radius);
        if let Ok(g) = ev.evaluate(&v) {
            if let Some(x) = g.g_f.value() {
                if x > lo && x <= hi {
                    out.push(v);
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct GlobalReport {
    pub schema: u32,
    pub samples: usize,
    /// points where Φ was obtained
    pub extended: usize,
    /// points refused by the critical-proximity guard or the integrator
    pub refused: usize,
    /// max over extended points of the disagreement between the two backward times
    pub max_discrepancy: f64,
    /// max ‖Φ(F x) − H(Φ x)‖ / ‖H(Φ x)‖
    pub max_residual: f64,
    pub injectivity_points: usize,
    /// pairs mapped within 1e-8 of each other that started more than 1e-6 apart
    pub injectivity_violations: usize,
}

/// Extends Φ to `points`, checks agreement across backward times and the
/// conjugacy F ↦ H there, then checks sampled injectivity on `spread`.
pub fn global_report(coord: &BottcherCoordinate, points: &[Vec<C64>], spread: &[Vec<C64>]) -> GlobalReport {
    let rows: Vec<Option<(f64, f64)>> = points
        .par_iter()
        .map(|x| {
            let e = extend_bottcher(coord, x).ok()?;
            let fx = coord.germ.apply(x);
            let img = extend_bottcher(coord, &fx).ok()?;
            let model = coord.model(&e.point());
            Some((e.discrepancy, dist(&img.point(), &model) / norm(&model).max(1e-300)))
        })
        .collect();
    let ok: Vec<(f64, f64)> = rows.iter().flatten().copied().collect();
    let images: Vec<(usize, Vec<C64>)> = spread
        .par_iter()
        .enumerate()
        .filter_map(|(i, x)| extend_bottcher(coord, x).ok().map(|e| (i, e.point())))
        .collect();
    let mut violations = 0;
    for a in 0..images.len() {
        for b in a + 1..images.len() {
            let (ia, pa) = &images[a];
            let (ib, pb) = &images[b];
            if dist(pa, pb) < 1e-8 && dist(&spread[*ia], &spread[*ib]) >= 1e-6 {
                violations += 1;
            }
        }
    }
    GlobalReport {
        schema: 1,
        samples: points.len(),
        extended: ok.len(),
        refused: points.len() - ok.len(),
        max_discrepancy: ok.iter().map(|r| r.0).fold(0.0, f64::max),
        max_residual: ok.iter().map(|r| r.1).fold(0.0, f64::max),
        injectivity_points: images.len(),
        injectivity_violations: violations,
    }
}

/// A Böttcher coordinate wrapped as a map, for use where a `SelfMap`-like evaluator is handy.
pub fn coordinate_fn(coord: Arc<BottcherCoordinate>) -> impl Fn(&[C64]) -> Result<Vec<C64>> {
    move |v| coord.eval(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{BlockStructure, PolyMap, SparsePoly};
    use crate::bottcher1d::{bottcher_eval, Germ1D};
    use crate::quasihom::extract_quasihomogeneous_part;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn riccati_linearizer() {
        // ξ(z) = z + z² is linearized by z/(1+z)
        let mut p = SparsePoly::var(1, 0);
        p.add_term(vec![2], c(1.0, 0.0));
        let xi = VectorField::polynomial(PolyMap::self_map(BlockStructure::single(1), vec![p]).unwrap()).unwrap();
        for z in [c(0.1, 0.05), c(-0.2, 0.1), c(0.05, -0.3)] {
            let phi = linearize(&xi, &[z]).unwrap().value[0];
            assert!((phi - z / (1.0 + z)).norm() < 1e-9, "{phi} vs {}", z / (1.0 + z));
        }
    }

    #[test]
    fn radial_linearizer_is_identity() {
        let xi = VectorField::radial(BlockStructure::single(2));
        let v = vec![c(0.3, 0.1), c(-0.2, 0.5)];
        assert!(dist(&linearize_poincare(&xi, &v, -10.0).unwrap(), &v) < 1e-12);
    }

    #[test]
    fn one_dimensional_matches_series() {
        let g = Germ1D::from_coeffs(&[c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0)]).unwrap();
        let germ = extract_quasihomogeneous_part(&g.to_polymap(), &BlockStructure::single(1)).unwrap();
        let base = VectorField::block_fields(germ.blocks());
        let coord = local_bottcher(&germ, base, 8).unwrap();
        for z in [c(0.02, 0.0), c(-0.01, 0.015), c(0.0, -0.018)] {
            let a = coord.eval(&[z]).unwrap()[0];
            let b = bottcher_eval(&g, z).unwrap();
            assert!((a - b).norm() < 1e-7 * z.norm(), "{a} vs {b}");
        }
    }
}
