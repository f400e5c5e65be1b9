//! One-variable Böttcher coordinates: power series, telescoping-limit
//! evaluation, and potential/angle at infinity for polynomials.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::algebra::{BlockStructure, PolyMap, SelfMap, SparsePoly};
use crate::error::{Error, Result};

type C64 = Complex64;

const TERM_TOL: f64 = 1e-14;
const MAX_ORBIT: usize = 2000;
/// Ratios checked for branch ambiguity at the start of the telescoping sum.
const BRANCH_CHECKS: usize = 3;

/// f(z) = a z^k + Σ_i tail[i] z^{k+1+i}.
#[derive(Debug, Clone, PartialEq)]
pub struct Germ1D {
    a: C64,
    k: u32,
    tail: Vec<C64>,
}

impl Germ1D {
    pub fn new(a: C64, k: u32, tail: Vec<C64>) -> Result<Self> {
        if a == C64::new(0.0, 0.0) {
            return Err(Error::InvalidArgument("leading coefficient must be nonzero".into()));
        }
        if k < 2 {
            return Err(Error::NotSuperattracting { block: 0, degree: k });
        }
        Ok(Self { a, k, tail })
    }

    /// Reads a germ from ascending coefficients c_0, c_1, … with c_0 = … = c_{k−1} = 0.
    pub fn from_coeffs(coeffs: &[C64]) -> Result<Self> {
        let k = coeffs
            .iter()
            .position(|c| *c != C64::new(0.0, 0.0))
            .ok_or_else(|| Error::InvalidArgument("zero polynomial".into()))?;
        if k == 0 {
            return Err(Error::NotFixingOrigin(coeffs[0].norm()));
        }
        Self::new(coeffs[k], k as u32, coeffs[k + 1..].to_vec())
    }

    pub fn a(&self) -> C64 {
        self.a
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn tail(&self) -> &[C64] {
        &self.tail
    }

    pub fn eval(&self, z: C64) -> C64 {
        z.powu(self.k) * (self.a + self.tail_sum(z) * z)
    }

    pub fn derivative(&self, z: C64) -> C64 {
        let k = self.k as f64;
        let mut d = self.a * k * z.powu(self.k - 1);
        for (i, c) in self.tail.iter().enumerate() {
            let n = self.k + 1 + i as u32;
            d += c * n as f64 * z.powu(n - 1);
        }
        d
    }

    /// Σ tail[i] u^i by Horner.
    fn tail_sum(&self, u: C64) -> C64 {
        self.tail.iter().rev().fold(C64::new(0.0, 0.0), |acc, c| acc * u + c)
    }

    /// f(u)/(a u^k), computed without forming u^k.
    fn ratio(&self, u: C64) -> C64 {
        1.0 + self.tail_sum(u) * u / self.a
    }

    pub fn to_polymap(&self) -> PolyMap {
        let mut p = SparsePoly::zero(1);
        p.add_term(vec![self.k], self.a);
        for (i, c) in self.tail.iter().enumerate() {
            p.add_term(vec![self.k + 1 + i as u32], *c);
        }
        PolyMap::self_map(BlockStructure::single(1), vec![p]).expect("one variable")
    }

    /// Ascending coefficients of f.
    pub fn coeffs(&self) -> Vec<C64> {
        let mut c = vec![C64::new(0.0, 0.0); self.k as usize];
        c.push(self.a);
        c.extend_from_slice(&self.tail);
        c
    }
}

impl SelfMap for Germ1D {
    fn dim(&self) -> usize {
        1
    }

    fn apply(&self, v: &[C64]) -> Vec<C64> {
        vec![self.eval(v[0])]
    }

    fn jac(&self, v: &[C64]) -> DMatrix<C64> {
        DMatrix::from_element(1, 1, self.derivative(v[0]))
    }
}

/// φ(z) = z + Σ_{n≥2} c_n z^n.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BottcherMap1D {
    /// c_2, c_3, …, c_N
    #[serde(serialize_with = "ser_complex_vec")]
    pub coeffs: Vec<C64>,
    pub convergence_radius_estimate: f64,
}

fn ser_complex_vec<S: serde::Serializer>(v: &[C64], s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for z in v {
        seq.serialize_element(&[z.re, z.im])?;
    }
    seq.end()
}

impl BottcherMap1D {
    pub fn eval(&self, z: C64) -> C64 {
        let inner = self.coeffs.iter().rev().fold(C64::new(0.0, 0.0), |acc, c| acc * z + c);
        z + z * z * inner
    }

    pub fn derivative(&self, z: C64) -> C64 {
        let mut d = C64::new(1.0, 0.0);
        let mut zp = z;
        for (i, c) in self.coeffs.iter().enumerate() {
            d += c * (i + 2) as f64 * zp;
            zp *= z;
        }
        d
    }
}

fn series_mul(a: &[C64], b: &[C64], n: usize) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); n + 1];
    for (i, x) in a.iter().enumerate().take(n + 1) {
        if *x == C64::new(0.0, 0.0) {
            continue;
        }
        for (j, y) in b.iter().enumerate().take(n + 1 - i) {
            out[i + j] += x * y;
        }
    }
    out
}

/// Coefficients of φ(f(z)) − a φ(z)^k through degree `n`, for φ given by
/// `phi` (ascending, phi[0] = 0, phi[1] = 1).
fn conjugacy_defect(f: &Germ1D, phi: &[C64], n: usize) -> Vec<C64> {
    let mut fs = f.coeffs();
    fs.resize(n + 1, C64::new(0.0, 0.0));
    fs.truncate(n + 1);
    // φ∘f = Σ_j phi[j] f^j
    let mut lhs = vec![C64::new(0.0, 0.0); n + 1];
    let mut fpow = vec![C64::new(0.0, 0.0); n + 1];
    fpow[0] = C64::new(1.0, 0.0);
    for (j, c) in phi.iter().enumerate().skip(1) {
        fpow = series_mul(&fpow, &fs, n);
        if j as u32 * f.k() > n as u32 {
            break;
        }
        for (l, x) in lhs.iter_mut().zip(&fpow) {
            *l += c * x;
        }
    }
    let mut rhs = vec![C64::new(0.0, 0.0); n + 1];
    rhs[0] = f.a();
    for _ in 0..f.k() {
        rhs = series_mul(&rhs, phi, n);
    }
    lhs.iter().zip(&rhs).map(|(l, r)| l - r).collect()
}

/// Solves φ∘f = a φ^k order by order. The degree-(k+j) equation is linear
/// in c_{j+1} with pivot a·k.
pub fn bottcher_series(f: &Germ1D, n: usize) -> BottcherMap1D {
    let n = n.max(2);
    let k = f.k() as usize;
    let pivot = f.a() * f.k() as f64;
    let mut phi = vec![C64::new(0.0, 0.0); n + 1];
    phi[1] = C64::new(1.0, 0.0);
    for j in 1..n {
        let deg = k + j;
        let defect = conjugacy_defect(f, &phi[..=j], deg);
        // the c_{j+1} contribution is −a·k·c_{j+1} on the right-hand side
        phi[j + 1] = defect[deg] / pivot;
    }
    let coeffs = phi[2..].to_vec();
    BottcherMap1D { convergence_radius_estimate: radius_estimate(&coeffs), coeffs }
}

fn radius_estimate(coeffs: &[C64]) -> f64 {
    // root test on the upper half of the computed coefficients
    let start = coeffs.len() / 2;
    let growth = coeffs
        .iter()
        .enumerate()
        .skip(start)
        .filter(|(_, c)| c.norm() > 0.0)
        .map(|(i, c)| c.norm().powf(1.0 / (i + 2) as f64))
        .fold(0.0, f64::max);
    if growth == 0.0 {
        f64::INFINITY
    } else {
        1.0 / growth
    }
}

/// φ(z) from log(φ(z)/z) = Σ_{n≥0} k^{-(n+1)} Log(f^{n+1}(z) / (a (f^n z)^k)).
pub fn bottcher_eval(f: &Germ1D, z: C64) -> Result<C64> {
    if z == C64::new(0.0, 0.0) {
        return Ok(z);
    }
    let kinv = 1.0 / f.k() as f64;
    let mut weight = kinv;
    let mut u = z;
    let mut acc = C64::new(0.0, 0.0);
    for n in 0..MAX_ORBIT {
        let r = f.ratio(u);
        if r == C64::new(0.0, 0.0) {
            return Err(Error::NotInBasin(format!("orbit hits a zero of f(z)/z^k at iterate {n}")));
        }
        let arg = r.arg();
        if n < BRANCH_CHECKS && arg.abs() > PI / 2.0 {
            return Err(Error::BranchAmbiguity { iterate: n, arg });
        }
        let term = r.ln() * weight;
        acc += term;
        if term.norm() < TERM_TOL || u == C64::new(0.0, 0.0) {
            return Ok(z * acc.exp());
        }
        u = f.eval(u);
        if !u.norm().is_finite() || u.norm() > 1e100 {
            return Err(Error::NotInBasin(format!("orbit escapes at iterate {n}")));
        }
        weight *= kinv;
    }
    Err(Error::NotInBasin("orbit did not settle".into()))
}

/// sup over the sample points of |φ(f(z)) − a φ(z)^k|, with φ evaluated
/// by the telescoping limit.
pub fn conjugacy_residual(f: &Germ1D, points: &[C64]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for &z in points {
        let lhs = bottcher_eval(f, f.eval(z))?;
        let rhs = f.a() * bottcher_eval(f, z)?.powu(f.k());
        worst = worst.max((lhs - rhs).norm());
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExternalData {
    pub potential: f64,
    /// in turns, in [0, 1)
    pub angle: f64,
}

/// Green potential and external angle of z for a monic polynomial given
/// by ascending coefficients.
pub fn external_data(poly: &[C64], z: C64) -> Result<ExternalData> {
    external_data_impl(poly, z, true)
}

/// As `external_data`, but principal logarithms are used even when early
/// ratios are far from 1. Suitable for pictures, not for checks.
pub fn external_data_lenient(poly: &[C64], z: C64) -> Result<ExternalData> {
    external_data_impl(poly, z, false)
}

fn external_data_impl(poly: &[C64], z: C64, strict: bool) -> Result<ExternalData> {
    let d = poly.len().saturating_sub(1);
    if d < 2 {
        return Err(Error::InvalidArgument("polynomial degree must be at least 2".into()));
    }
    if (poly[d] - 1.0).norm() > 1e-12 {
        return Err(Error::InvalidArgument("polynomial must be monic".into()));
    }
    let escape = escape_radius(poly);
    let dinv = 1.0 / d as f64;
    // log φ(z) = log z + Σ d^{-(n+1)} Log(p(z_n)/z_n^d)
    let mut acc = z.ln();
    let mut weight = dinv;
    let mut u = z;
    let mut escaped_at = None;
    for n in 0..MAX_ORBIT {
        if u.norm() > escape && escaped_at.is_none() {
            escaped_at = Some(n);
        }
        if escaped_at.is_none() && n > 500 {
            break;
        }
        // Horner in w = 1/u of p(u)/u^d = Σ_i c_i w^{d−i}
        let w = 1.0 / u;
        let r = poly.iter().fold(C64::new(0.0, 0.0), |a, c| a * w + c);
        if r == C64::new(0.0, 0.0) || !r.norm().is_finite() {
            return Err(Error::NotInBasin("orbit meets a critical preimage of infinity".into()));
        }
        let arg = r.arg();
        if strict && arg.abs() > PI / 2.0 && n < BRANCH_CHECKS {
            return Err(Error::BranchAmbiguity { iterate: n, arg });
        }
        let term = r.ln() * weight;
        acc += term;
        if escaped_at.is_some() && term.norm() < TERM_TOL {
            let angle = (acc.im / (2.0 * PI)).rem_euclid(1.0);
            return Ok(ExternalData { potential: acc.re, angle: if angle >= 1.0 { 0.0 } else { angle } });
        }
        u = poly.iter().rev().fold(C64::new(0.0, 0.0), |a, c| a * u + c);
        weight *= dinv;
        if !u.norm().is_finite() {
            return Err(Error::Escaped { iterations: n });
        }
    }
    Err(Error::NotInBasin("orbit does not escape".into()))
}

/// Radius beyond which every orbit of the monic polynomial escapes.
pub fn escape_radius(poly: &[C64]) -> f64 {
    let d = poly.len() - 1;
    let s: f64 = poly[..d].iter().map(|c| c.norm()).sum();
    (1.0 + s).max(2.0)
}
