//! Two worked examples that fail on purpose: a map that is not adapted, and
//! a germ whose self-composition is not open.

use num_complex::Complex64;
use serde::Serialize;

use crate::algebra::linalg::rank;
use crate::algebra::{BlockStructure, PolyMap, SelfMap, SparsePoly};
use crate::error::Result;
use crate::quasihom::{extract_quasihomogeneous_part, AdaptednessReport};

type C64 = Complex64;

fn poly2(terms: &[([u32; 2], f64)]) -> SparsePoly {
    SparsePoly::from_terms(2, terms.iter().map(|(e, c)| (e.to_vec(), C64::new(*c, 0.0)))).expect("two variables")
}

fn map2(coords: Vec<SparsePoly>) -> PolyMap {
    PolyMap::self_map(BlockStructure::new(vec![1, 1]).expect("valid"), coords).expect("two coordinates")
}

/// (x, y) ↦ (x² + y³, y²) with blocks {x}, {y}.
pub fn non_adapted_map() -> PolyMap {
    map2(vec![poly2(&[([2, 0], 1.0), ([0, 3], 1.0)]), poly2(&[([0, 2], 1.0)])])
}

/// (x, y) ↦ (x² − y³, y²).
pub fn composition_map() -> PolyMap {
    map2(vec![poly2(&[([2, 0], 1.0), ([0, 3], -1.0)]), poly2(&[([0, 2], 1.0)])])
}

/// Human-readable polynomial in x, y, terms in descending lexicographic order.
pub fn format_poly(p: &SparsePoly) -> String {
    let vars = ["x", "y", "z", "w"];
    let mut terms: Vec<(Vec<u32>, C64)> = p.terms().map(|(e, c)| (e.clone(), *c)).collect();
    terms.sort_by(|a, b| b.0.cmp(&a.0));
    let mut out = String::new();
    for (k, (e, c)) in terms.iter().enumerate() {
        let mono: Vec<String> = e
            .iter()
            .enumerate()
            .filter(|(_, &a)| a > 0)
            .map(|(i, &a)| if a == 1 { vars[i].to_string() } else { format!("{}^{a}", vars[i]) })
            .collect();
        let (sign, mag) = if c.im == 0.0 && c.re < 0.0 { ("-", -c.re) } else { ("+", c.re) };
        let coef = if c.im != 0.0 {
            format!("({}{:+}i)", c.re, c.im)
        } else if mag == 1.0 && !mono.is_empty() {
            String::new()
        } else {
            format!("{mag}")
        };
        if k == 0 {
            if sign == "-" {
                out.push('-');
            }
        } else {
            out.push_str(&format!(" {sign} "));
        }
        out.push_str(&coef);
        out.push_str(&mono.join(""));
    }
    if out.is_empty() {
        out.push('0');
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct NonAdaptedReport {
    pub schema: u32,
    pub map: Vec<String>,
    pub adaptedness: AdaptednessReport,
    /// offending monomials as text, e.g. "y^3 in coordinate 0"
    pub witnesses: Vec<String>,
    /// the map is expected to be rejected with y³ as witness
    pub passed: bool,
}

pub fn non_adapted_report() -> Result<NonAdaptedReport> {
    let f = non_adapted_map();
    let germ = extract_quasihomogeneous_part(&f, f.input())?;
    let adaptedness = germ.report();
    let witnesses: Vec<String> = germ
        .certificate
        .iter()
        .map(|o| {
            let mono = SparsePoly::from_terms(2, [(o.exp.clone(), C64::new(1.0, 0.0))]).expect("two variables");
            format!("{} in coordinate {}", format_poly(&mono), o.coord)
        })
        .collect();
    let passed = !adaptedness.adapted && germ.certificate.iter().any(|o| o.exp == [0, 3]);
    Ok(NonAdaptedReport { schema: 1, map: f.coords().iter().map(format_poly).collect(), adaptedness, witnesses, passed })
}

#[derive(Debug, Clone, Serialize)]
pub struct CompositionReport {
    pub schema: u32,
    pub map: Vec<String>,
    /// F∘F computed literally
    pub composition: Vec<String>,
    pub composition_matches: bool,
    /// (x, y) ↦ (y², y⁴)
    pub rank_one_map: Vec<String>,
    pub grid_points: usize,
    /// largest numerical rank of the Jacobian over the grid
    pub max_jacobian_rank: usize,
    /// max |Y − X²| over the image of the grid
    pub curve_residual: f64,
    pub image_dimension: usize,
    pub passed: bool,
}

pub fn composition_report() -> Result<CompositionReport> {
    let f = composition_map();
    let ff = f.compose(&f, None)?;
    let expected = map2(vec![poly2(&[([4, 0], 1.0), ([2, 3], -2.0)]), poly2(&[([0, 4], 1.0)])]);
    let composition_matches = ff.sub(&expected)?.is_zero();
    let g = map2(vec![poly2(&[([0, 2], 1.0)]), poly2(&[([0, 4], 1.0)])]);
    let n = 21;
    let pts: Vec<[C64; 2]> = (0..n * n)
        .map(|k| {
            let (i, j) = (k % n, k / n);
            let s = |t: usize| C64::new(-0.5 + t as f64 / (n - 1) as f64, 0.3 - 0.6 * t as f64 / (n - 1) as f64);
            [s(i), s(j)]
        })
        .collect();
    let mut max_rank = 0;
    let mut curve: f64 = 0.0;
    for p in &pts {
        max_rank = max_rank.max(rank(&g.jac(p), 1e-10));
        let w = g.apply(p);
        curve = curve.max((w[1] - w[0] * w[0]).norm());
    }
    // generic Jacobian rank is the dimension of the image; the curve check confirms it
    let image_dimension = if curve < 1e-12 { max_rank } else { 2 };
    let passed = composition_matches && max_rank == 1 && image_dimension == 1;
    Ok(CompositionReport {
        schema: 1,
        map: f.coords().iter().map(format_poly).collect(),
        composition: ff.coords().iter().map(format_poly).collect(),
        composition_matches,
        rank_one_map: g.coords().iter().map(format_poly).collect(),
        grid_points: pts.len(),
        max_jacobian_rank: max_rank,
        curve_residual: curve,
        image_dimension,
        passed,
    })
}
