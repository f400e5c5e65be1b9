//! Real slice of the basin of the Koch chart germ at a_J for J = {1,2,3}|{4},
//! colored by the invariant line along which each orbit lands, next to the
//! same picture for the quasihomogeneous model.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use super::{ImageBuffer, RenderConfig};
use crate::algebra::linalg::helmert;
use crate::algebra::{norm, SelfMap};
use crate::error::{Error, Result};
use crate::fields::{extend_bottcher_with, local_bottcher, BottcherCoordinate, ChainPolicy, FlowIntegrator, VectorField};
use crate::green::GreenEvaluator;
use crate::koch::{chart_germ, ChartGerm, Partition};

type C64 = Complex64;

/// The block partition the picture is drawn for.
pub const FIG3_PARTITION: &str = "1,2,3|4";
/// Pairs {a, b} of coordinates of the three-point block; line k is x_a = x_b.
pub const LINE_PAIRS: [[usize; 2]; 3] = [[0, 1], [0, 2], [1, 2]];
/// Below this norm the orbit is followed projectively through the model.
pub const SWITCH_RADIUS: f64 = 1e-30;
/// A pixel is decided once the direction is this close to a line (degrees)...
pub const DECISION_ANGLE_DEG: f64 = 20.0;
/// ...after at least this many steps.
pub const MIN_STEPS: usize = 10;
/// Pullback level of the coordinate used in the overlay. From level 3 on the
/// pullback chains of this chart are cut at a near-singular Jacobian, so the
/// field changes level from point to point and the flow crawls.
pub const OVERLAY_LEVEL: usize = 2;
/// Integrator tolerances for the overlay; only the line class of Φ(v) is used.
pub const OVERLAY_RTOL: f64 = 1e-8;
pub const OVERLAY_ATOL: f64 = 1e-10;
/// The overlay samples a SUBGRID × SUBGRID lattice of pixel centers.
pub const SUBGRID: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum LineClass {
    Line { index: u8, n: u32 },
    Outside,
    Undecided,
}

impl LineClass {
    pub fn line(self) -> Option<usize> {
        match self {
            LineClass::Line { index, .. } => Some(index as usize),
            _ => None,
        }
    }

    pub fn same_class(self, other: LineClass) -> bool {
        match (self, other) {
            (LineClass::Line { index: a, .. }, LineClass::Line { index: b, .. }) => a == b,
            (a, b) => a == b,
        }
    }
}

/// Unit directions of the lines x_a = x_b in Helmert coordinates of the
/// zero-sum plane of C³, in the order of `LINE_PAIRS`.
pub fn critical_line_directions() -> [[f64; 2]; 3] {
    let h = helmert(3);
    LINE_PAIRS.map(|[a, b]| {
        let c = 3 - a - b;
        let mut e = [1.0; 3];
        e[c] = -2.0;
        let d = [0, 1].map(|k| (0..3).map(|i| h[(i, k)] * e[i]).sum::<f64>());
        let n = d[0].hypot(d[1]);
        [d[0] / n, d[1] / n]
    })
}

/// Angle (radians) between the complex line through v and the real line d.
fn line_angle(v: &[C64], d: [f64; 2]) -> f64 {
    let nv = norm(v);
    let proj = (v[0] * d[0] + v[1] * d[1]).norm() / nv;
    proj.clamp(0.0, 1.0).acos()
}

fn nearest_line(v: &[C64], dirs: &[[f64; 2]; 3]) -> (usize, f64) {
    (0..3)
        .map(|k| (k, line_angle(v, dirs[k])))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("three lines")
}

/// Limits for following one orbit.
#[derive(Debug, Clone, Copy)]
pub struct OrbitBudget {
    pub max_iter: usize,
    pub capture_radius: f64,
    pub escape_radius: f64,
}

/// Follows v under `f` until its direction settles on one of the three lines
/// inside the capture radius. Below `SWITCH_RADIUS` only the direction is
/// kept and advanced by the homogeneous model `h`. Orbits that leave the
/// escape radius or stall at a point other than 0 are outside the basin.
pub fn tangent_class(f: &dyn SelfMap, h: &dyn SelfMap, v: &[C64], budget: OrbitBudget) -> LineClass {
    let dirs = critical_line_directions();
    let mut u = v.to_vec();
    let mut projective = false;
    for n in 0..=budget.max_iter {
        let nu = norm(&u);
        if !nu.is_finite() || nu > budget.escape_radius {
            return LineClass::Outside;
        }
        if nu == 0.0 {
            return LineClass::Undecided;
        }
        let inside = projective || nu < budget.capture_radius;
        if inside && n >= MIN_STEPS {
            let (k, angle) = nearest_line(&u, &dirs);
            if angle < DECISION_ANGLE_DEG.to_radians() {
                return LineClass::Line { index: k as u8, n: n as u32 };
            }
        }
        if n == budget.max_iter {
            break;
        }
        if !projective && nu < SWITCH_RADIUS {
            projective = true;
            u.iter_mut().for_each(|z| *z /= nu);
        }
        let next = if projective { h.apply(&u) } else { f.apply(&u) };
        let nn = norm(&next);
        if projective {
            if !(nn > 0.0) || !nn.is_finite() {
                return LineClass::Undecided;
            }
            u = next.into_iter().map(|z| z / nn).collect();
        } else {
            // a nonzero fixed point of the chart lies outside the basin of 0
            if !inside && crate::algebra::dist(&next, &u) < 1e-12 * nu {
                return LineClass::Outside;
            }
            u = next;
        }
    }
    LineClass::Undecided
}

/// The chart germ and its model with the orbit limits used for both sides.
pub struct Fig3Setup {
    pub chart: ChartGerm,
    pub budget: OrbitBudget,
}

impl Fig3Setup {
    pub fn new(max_iter: usize) -> Result<Self> {
        let part: Partition = FIG3_PARTITION.parse()?;
        let chart = chart_germ(&part)?;
        let ev = GreenEvaluator::for_germ(&chart.germ);
        let budget = OrbitBudget { max_iter, capture_radius: ev.capture_radius, escape_radius: ev.escape_radius };
        Ok(Self { chart, budget })
    }

    pub fn classify(&self, side: Fig3Side, v: &[C64]) -> LineClass {
        let h = &self.chart.germ.h;
        match side {
            Fig3Side::Chart => tangent_class(self.chart.map.as_ref(), h, v, self.budget),
            Fig3Side::Model => tangent_class(h, h, v, self.budget),
        }
    }

    /// Φ at the given pullback level, with chains truncated rather than refused.
    pub fn coordinate(&self, level: usize) -> Result<BottcherCoordinate> {
        let germ = &self.chart.germ;
        let base = VectorField::block_fields(germ.blocks()).into_iter().map(|f| f.with_policy(ChainPolicy::Truncate)).collect();
        local_bottcher(germ, base, level)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Fig3Side {
    /// the chart germ F at a_J
    Chart,
    /// its quasihomogeneous part H_{J1}
    Model,
}

/// Default window: the square [−1.8, 1.8]² in the Helmert basis of E_{J1}.
pub fn fig3_default_config() -> RenderConfig {
    RenderConfig { width: 3.6, max_iter: 60, ..RenderConfig::default() }
}

fn real_point(p: [f64; 2]) -> [C64; 2] {
    [C64::new(p[0], 0.0), C64::new(p[1], 0.0)]
}

pub fn fig3_classes(setup: &Fig3Setup, cfg: &RenderConfig, side: Fig3Side) -> Vec<LineClass> {
    cfg.map_pixels(|i, j| setup.classify(side, &real_point(cfg.world(i, j))))
}

fn paint(cfg: &RenderConfig, classes: &[LineClass]) -> ImageBuffer {
    let [w, h] = cfg.pixels;
    ImageBuffer::from_fn(w, h, |i, j| match classes[j * w + i] {
        LineClass::Line { index, n } => cfg.palette.class(index as usize, (n as f64 - MIN_STEPS as f64) / 20.0),
        LineClass::Outside => cfg.palette.escaped(),
        LineClass::Undecided => cfg.palette.undecided(),
    })
}

/// Left: the chart germ; right: the model, on the same window.
pub fn render_fig3(cfg: &RenderConfig) -> Result<(ImageBuffer, ImageBuffer)> {
    cfg.validate()?;
    let setup = Fig3Setup::new(cfg.max_iter)?;
    let left = fig3_classes(&setup, cfg, Fig3Side::Chart);
    let right = fig3_classes(&setup, cfg, Fig3Side::Model);
    Ok((paint(cfg, &left), paint(cfg, &right)))
}

#[derive(Debug, Clone, Serialize)]
pub struct OverlayReport {
    pub schema: u32,
    pub level: usize,
    pub subgrid: usize,
    /// subgrid points whose chart orbit settled on a line
    pub decided: usize,
    /// of those, points where the model orbit of Φ(v) settled on the same line
    pub agree: usize,
    /// Φ could not be evaluated (counted as disagreement)
    pub phi_failures: usize,
    /// Φ(v) whose model orbit stayed undecided (counted as disagreement)
    pub image_undecided: usize,
    pub agreement: f64,
    pub max_discrepancy: f64,
}

/// Compares the line class of v under F with that of Φ(v) under H on a
/// `SUBGRID`² lattice of the window.
pub fn fig3_overlay(cfg: &RenderConfig, level: usize) -> Result<OverlayReport> {
    cfg.validate()?;
    let setup = Fig3Setup::new(cfg.max_iter)?;
    let coord = setup.coordinate(level)?;
    let integ = FlowIntegrator::with_tolerances(OVERLAY_RTOL, OVERLAY_ATOL);
    let [w, h] = cfg.pixels;
    let pts: Vec<[f64; 2]> = (0..SUBGRID * SUBGRID)
        .map(|k| {
            let (a, b) = (k % SUBGRID, k / SUBGRID);
            cfg.world((2 * a + 1) * w / (2 * SUBGRID), (2 * b + 1) * h / (2 * SUBGRID))
        })
        .collect();
    // (decided, agree, phi failure, image undecided, discrepancy)
    let rows: Vec<(bool, bool, bool, bool, f64)> = pts
        .par_iter()
        .map(|&p| {
            let v = real_point(p);
            let Some(k) = setup.classify(Fig3Side::Chart, &v).line() else {
                return (false, false, false, false, 0.0);
            };
            match extend_bottcher_with(&integ, &coord, &v) {
                Ok(ext) => {
                    let image = setup.classify(Fig3Side::Model, &ext.point());
                    (true, image.line() == Some(k), false, image == LineClass::Undecided, ext.discrepancy)
                }
                Err(_) => (true, false, true, false, 0.0),
            }
        })
        .collect();
    let decided = rows.iter().filter(|r| r.0).count();
    let agree = rows.iter().filter(|r| r.1).count();
    Ok(OverlayReport {
        schema: 1,
        level,
        subgrid: SUBGRID,
        decided,
        agree,
        phi_failures: rows.iter().filter(|r| r.2).count(),
        image_undecided: rows.iter().filter(|r| r.3).count(),
        agreement: if decided == 0 { 0.0 } else { agree as f64 / decided as f64 },
        max_discrepancy: rows.iter().map(|r| r.4).fold(0.0, f64::max),
    })
}

/// The coordinate permutation σ of the three-point block as a real 2 × 2
/// matrix in Helmert coordinates.
pub fn permutation_matrix(sigma: [usize; 3]) -> [[f64; 2]; 2] {
    let h = helmert(3);
    let mut p = DMatrix::<f64>::zeros(3, 3);
    for (i, &s) in sigma.iter().enumerate() {
        p[(s, i)] = 1.0;
    }
    let q = h.transpose() * p * &h;
    [[q[(0, 0)], q[(0, 1)]], [q[(1, 0)], q[(1, 1)]]]
}

/// Index of the line σ sends line k to.
pub fn permuted_line(sigma: [usize; 3], k: usize) -> usize {
    let [a, b] = LINE_PAIRS[k];
    let mut img = [sigma[a], sigma[b]];
    img.sort_unstable();
    LINE_PAIRS.iter().position(|p| *p == img).expect("pair of distinct indices")
}

#[derive(Debug, Clone, Serialize)]
pub struct RelabelingReport {
    pub schema: u32,
    pub side: Fig3Side,
    pub permutation: [usize; 3],
    pub pixels: usize,
    pub agreement: f64,
}

/// Fraction of pixels v with class(σv) = σ(class(v)).
pub fn fig3_relabeling(cfg: &RenderConfig, side: Fig3Side, sigma: [usize; 3]) -> Result<RelabelingReport> {
    cfg.validate()?;
    let mut sorted = sigma;
    sorted.sort_unstable();
    if sorted != [0, 1, 2] {
        return Err(Error::InvalidArgument(format!("{sigma:?} is not a permutation of 0, 1, 2")));
    }
    let setup = Fig3Setup::new(cfg.max_iter)?;
    let base = fig3_classes(&setup, cfg, side);
    let moved = fig3_classes(&setup, &cfg.clone().transformed(permutation_matrix(sigma)), side);
    let agree = base
        .iter()
        .zip(&moved)
        .filter(|(a, b)| match a.line() {
            Some(k) => b.line() == Some(permuted_line(sigma, k)),
            None => a.same_class(**b),
        })
        .count();
    Ok(RelabelingReport { schema: 1, side, permutation: sigma, pixels: base.len(), agreement: agree as f64 / base.len() as f64 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lines_are_distinct_unit_directions() {
        let d = critical_line_directions();
        for a in 0..3 {
            assert!((d[a][0].hypot(d[a][1]) - 1.0).abs() < 1e-15);
            for b in a + 1..3 {
                // the three lines meet at 60°
                let c = (d[a][0] * d[b][0] + d[a][1] * d[b][1]).abs();
                assert!((c - 0.5).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn lines_are_invariant_and_self_classified() {
        let setup = Fig3Setup::new(60).unwrap();
        for (k, d) in critical_line_directions().iter().enumerate() {
            for t in [-0.9, -0.3, 0.2, 0.7] {
                let v = real_point([t * d[0], t * d[1]]);
                let img = setup.chart.map.apply(&v);
                assert!(line_angle(&img, *d) < 1e-9);
                for side in [Fig3Side::Chart, Fig3Side::Model] {
                    assert_eq!(setup.classify(side, &v).line(), Some(k), "{side:?} t={t}");
                }
            }
        }
    }

    #[test]
    fn permutations_act_on_lines() {
        let sigma = [1, 2, 0];
        let p = permutation_matrix(sigma);
        let d = critical_line_directions();
        for k in 0..3 {
            let img = [p[0][0] * d[k][0] + p[0][1] * d[k][1], p[1][0] * d[k][0] + p[1][1] * d[k][1]];
            let j = permuted_line(sigma, k);
            assert!((img[0] * d[j][0] + img[1] * d[j][1]).abs() > 1.0 - 1e-12);
        }
    }

    #[test]
    fn small_render_is_deterministic_and_symmetric() {
        let cfg = RenderConfig { pixels: [48, 48], ..fig3_default_config() };
        let (l1, r1) = render_fig3(&cfg).unwrap();
        let (l2, r2) = render_fig3(&cfg).unwrap();
        assert_eq!(l1, l2);
        assert_eq!(r1, r2);
        let rep = fig3_relabeling(&cfg, Fig3Side::Model, [1, 0, 2]).unwrap();
        assert!(rep.agreement >= 0.999, "{rep:?}");
    }
}
