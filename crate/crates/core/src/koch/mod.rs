//! Polynomials with prescribed critical points, the induced homogeneous map
//! H(x) = P_x∘x on zero-average vectors, and its fixed points, strata,
//! quadratic differentials and local charts.

pub mod chart;
pub mod partition;
pub mod qd;

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::algebra::dd::Scalar;
use crate::algebra::linalg::{eigenvalues, helmert, to_complex};
use crate::algebra::{norm, BlockStructure, PolyMap, SelfMap, SparsePoly};
use crate::error::{Error, Result};

pub use chart::{chart_germ, ChartGerm, ChartMap};
pub use partition::{
    critical_order_check, degree_audit, stratum_expansion, stratum_fixed_point, super_saddle_report, CriticalOrderReport,
    StratumExpansionReport, Partition, SuperSaddleReport,
};
pub use qd::{pushforward_matrix, qd_pairing, qd_pushforward, PushforwardReport, QuadraticDifferential};

type C64 = Complex64;

/// Relative tolerance for the zero-average test on inputs.
const AVERAGE_TOL: f64 = 1e-12;

pub fn check_zero_average(x: &[C64]) -> Result<()> {
    let s: C64 = x.iter().sum();
    let scale = x.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if s.norm() > AVERAGE_TOL * x.len() as f64 * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::NonZeroAverage(s.norm()));
    }
    Ok(())
}

/// Ascending coefficients of Π_i (w − x_i).
pub fn vanishing_poly<S: Scalar>(x: &[S]) -> Vec<S> {
    let mut c = vec![S::one()];
    for &r in x {
        let mut next = vec![S::zero(); c.len() + 1];
        for (i, &a) in c.iter().enumerate() {
            next[i + 1] += a;
            next[i] -= a * r;
        }
        c = next;
    }
    c
}

/// Ascending coefficients of t ↦ ∫_0^t p.
fn antiderivative<S: Scalar>(p: &[S]) -> Vec<S> {
    let mut out = vec![S::zero()];
    for (i, &c) in p.iter().enumerate() {
        out.push(c / S::from_f64((i + 1) as f64));
    }
    out
}

pub fn horner<S: Scalar>(c: &[S], t: S) -> S {
    let mut acc = S::zero();
    for &a in c.iter().rev() {
        acc = acc * t + a;
    }
    acc
}

/// P_x(t) = (m+1) A(t) − ((m+1)/m) Σ_j A(x_j) with A = ∫_0 Π(w − x_i).
pub fn px_coeffs<S: Scalar>(x: &[S]) -> Vec<S> {
    let m = x.len();
    let a = antiderivative(&vanishing_poly(x));
    let mp1 = S::from_f64((m + 1) as f64);
    let mut sum_a = S::zero();
    for &xj in x {
        sum_a += horner(&a, xj);
    }
    let mut p: Vec<S> = a.iter().map(|&c| c * mp1).collect();
    p[0] -= sum_a * mp1 / S::from_f64(m as f64);
    p
}

/// y_i = P_x(x_i).
pub fn koch_h_generic<S: Scalar>(x: &[S]) -> Vec<S> {
    let p = px_coeffs(x);
    x.iter().map(|&xi| horner(&p, xi)).collect()
}

/// Ambient Jacobian ∂H_i/∂x_l = −(m+1) B_l(x_i) + ((m+1)/m) Σ_j B_l(x_j),
/// B_l = ∫_0 Π_{i≠l}(w − x_i).
pub fn koch_dh_generic<S: Scalar>(x: &[S]) -> Vec<Vec<S>> {
    let m = x.len();
    let mp1 = S::from_f64((m + 1) as f64);
    let mut d = vec![vec![S::zero(); m]; m];
    for l in 0..m {
        let others: Vec<S> = x.iter().enumerate().filter(|&(i, _)| i != l).map(|(_, &z)| z).collect();
        let b = antiderivative(&vanishing_poly(&others));
        let vals: Vec<S> = x.iter().map(|&xi| horner(&b, xi)).collect();
        let mut s = S::zero();
        for &v in &vals {
            s += v;
        }
        let mean_term = s * mp1 / S::from_f64(m as f64);
        for i in 0..m {
            d[i][l] = mean_term - vals[i] * mp1;
        }
    }
    d
}

/// The polynomial P_x together with its source point.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticalPolynomial {
    /// ascending, degree m+1
    pub coeffs: Vec<C64>,
    pub x: Vec<C64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PxAudit {
    pub monic_error: f64,
    pub centered_error: f64,
    pub critical_set_error: f64,
    pub critical_value_sum: f64,
}

impl PxAudit {
    pub fn passed(&self, tol: f64) -> bool {
        self.monic_error <= tol && self.centered_error <= tol && self.critical_set_error <= tol && self.critical_value_sum <= tol
    }
}

impl CriticalPolynomial {
    pub fn m(&self) -> usize {
        self.x.len()
    }

    pub fn eval(&self, t: C64) -> C64 {
        horner(&self.coeffs, t)
    }

    pub fn derivative(&self, t: C64) -> C64 {
        crate::algebra::roots::horner(&self.coeffs, t).1
    }

    pub fn audit(&self) -> PxAudit {
        let m = self.m();
        let monic_error = (self.coeffs[m + 1] - 1.0).norm();
        let centered_error = self.coeffs[m].norm();
        let dp = crate::algebra::roots::derivative(&self.coeffs);
        let crit = crate::algebra::poly_roots(&dp).unwrap_or_default();
        let critical_set_error = multiset_distance(&crit, &self.x);
        let critical_value_sum = self.x.iter().map(|&xi| self.eval(xi)).sum::<C64>().norm();
        PxAudit { monic_error, centered_error, critical_set_error, critical_value_sum }
    }
}

/// Largest distance in a greedy matching of two multisets of equal size.
pub fn multiset_distance(a: &[C64], b: &[C64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let mut used = vec![false; b.len()];
    let mut worst: f64 = 0.0;
    for z in a {
        let (k, d) = b
            .iter()
            .enumerate()
            .filter(|(k, _)| !used[*k])
            .map(|(k, w)| (k, (z - w).norm()))
            .min_by(|p, q| p.1.partial_cmp(&q.1).unwrap())
            .unwrap();
        used[k] = true;
        worst = worst.max(d);
    }
    worst
}

pub fn build_px(x: &[C64]) -> Result<CriticalPolynomial> {
    if x.len() < 2 {
        return Err(Error::InvalidArgument("need m ≥ 2".into()));
    }
    check_zero_average(x)?;
    Ok(CriticalPolynomial { coeffs: px_coeffs(x), x: x.to_vec() })
}

pub fn koch_h(x: &[C64]) -> Result<Vec<C64>> {
    check_zero_average(x)?;
    Ok(koch_h_generic(x))
}

pub fn koch_dh(x: &[C64]) -> DMatrix<C64> {
    let d = koch_dh_generic(x);
    let m = x.len();
    DMatrix::from_fn(m, m, |i, j| d[i][j])
}

/// Orthonormal real basis of E (zero-average vectors), as complex columns.
pub fn e_basis(m: usize) -> DMatrix<C64> {
    to_complex(&helmert(m))
}

pub fn to_intrinsic(x: &[C64]) -> Vec<C64> {
    let h = helmert(x.len());
    (0..h.ncols()).map(|k| (0..x.len()).map(|i| x[i] * h[(i, k)]).sum()).collect()
}

pub fn from_intrinsic(c: &[C64]) -> Vec<C64> {
    let m = c.len() + 1;
    let h = helmert(m);
    (0..m).map(|i| (0..c.len()).map(|k| c[k] * h[(i, k)]).sum()).collect()
}

/// D_xH restricted to E, in the orthonormal basis of `e_basis`.
pub fn restricted_dh(x: &[C64]) -> DMatrix<C64> {
    let q = e_basis(x.len());
    q.adjoint() * koch_dh(x) * &q
}

/// H on C^m as a polynomial map (ambient coordinates).
pub fn koch_h_polymap_ambient(m: usize) -> PolyMap {
    let xs: Vec<SparsePoly> = (0..m).map(|i| SparsePoly::var(m, i)).collect();
    let coords = symbolic_h(&xs, m);
    PolyMap::self_map(BlockStructure::single(m), coords).expect("consistent")
}

/// H on E in the Helmert coordinates (dimension m−1), homogeneous of degree m+1.
pub fn koch_h_polymap(m: usize) -> PolyMap {
    let h = helmert(m);
    let n = m - 1;
    let xs: Vec<SparsePoly> = (0..m)
        .map(|i| {
            let mut p = SparsePoly::zero(n);
            for k in 0..n {
                let mut e = vec![0; n];
                e[k] = 1;
                p.add_term(e, C64::new(h[(i, k)], 0.0));
            }
            p
        })
        .collect();
    let ys = symbolic_h(&xs, m);
    let coords: Vec<SparsePoly> = (0..n)
        .map(|k| {
            let mut acc = SparsePoly::zero(n);
            for (i, y) in ys.iter().enumerate() {
                if h[(i, k)] != 0.0 {
                    acc = acc.add(&y.scale(C64::new(h[(i, k)], 0.0)));
                }
            }
            acc.prune(1e-13)
        })
        .collect();
    let blocks = BlockStructure::with_degrees(vec![n], vec![m as u32 + 1]).expect("m ≥ 2");
    PolyMap::self_map(blocks, coords).expect("consistent")
}

/// H_i = P_x(x_i) with each x_i a polynomial.
pub(crate) fn symbolic_h(xs: &[SparsePoly], m: usize) -> Vec<SparsePoly> {
    let nv = xs[0].nvars();
    let one = SparsePoly::constant(nv, C64::new(1.0, 0.0));
    // W(w) = Π (w − x_i): coefficient list in w
    let mut w: Vec<SparsePoly> = vec![one.clone()];
    for x in xs {
        let mut next = vec![SparsePoly::zero(nv); w.len() + 1];
        for (i, a) in w.iter().enumerate() {
            next[i + 1] = next[i + 1].add(a);
            next[i] = next[i].sub(&a.mul(x));
        }
        w = next;
    }
    // A(t) = Σ_k w_k t^{k+1}/(k+1); p_k = (m+1) a_k for k ≥ 1
    let mp1 = (m + 1) as f64;
    let mut p: Vec<SparsePoly> = vec![SparsePoly::zero(nv)];
    for (k, wk) in w.iter().enumerate() {
        p.push(wk.scale(C64::new(mp1 / (k + 1) as f64, 0.0)));
    }
    // powers of each x_i
    let powers: Vec<Vec<SparsePoly>> = xs
        .iter()
        .map(|x| {
            let mut row = vec![one.clone()];
            for k in 0..=m {
                let nxt = row[k].mul(x);
                row.push(nxt);
            }
            row
        })
        .collect();
    // Σ_j A(x_j) = Σ_k a_k Σ_j x_j^k, times (m+1)/m
    let mut sum_a = SparsePoly::zero(nv);
    for (k, pk) in p.iter().enumerate().skip(1) {
        let mut s = SparsePoly::zero(nv);
        for row in &powers {
            s = s.add(&row[k]);
        }
        sum_a = sum_a.add(&pk.mul(&s));
    }
    // p_k already carries the factor (m+1), so divide by m only
    p[0] = sum_a.scale(C64::new(-1.0 / m as f64, 0.0));
    xs.iter()
        .enumerate()
        .map(|(i, _)| {
            let mut acc = SparsePoly::zero(nv);
            for (k, pk) in p.iter().enumerate() {
                acc = acc.add(&pk.mul(&powers[i][k]));
            }
            acc
        })
        .collect()
}

/// H on E as a `SelfMap` in ambient coordinates.
#[derive(Debug, Clone, Copy)]
pub struct KochMap {
    pub m: usize,
}

impl SelfMap for KochMap {
    fn dim(&self) -> usize {
        self.m
    }

    fn apply(&self, v: &[C64]) -> Vec<C64> {
        koch_h_generic(v)
    }

    fn jac(&self, v: &[C64]) -> DMatrix<C64> {
        koch_dh(v)
    }
}

/// The m-th roots of −1/m: critical points of ((m+1)/m) z + z^{m+1}.
pub fn fixed_critical_points(m: usize) -> Vec<C64> {
    let r = (m as f64).powf(-1.0 / m as f64);
    (0..m)
        .map(|j| C64::from_polar(r, std::f64::consts::PI * (2 * j + 1) as f64 / m as f64))
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct FixedPointRecord {
    pub point: Vec<[f64; 2]>,
    pub residual: f64,
    /// labeling: coordinate i takes the root with this index
    pub labeling: Vec<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FixedPointCensus {
    pub schema: u32,
    pub m: usize,
    pub count: usize,
    pub expected: usize,
    pub all_distinct: bool,
    pub off_diagonal: bool,
    pub max_residual: f64,
    pub fixed_point_polynomial: Vec<[f64; 2]>,
    pub records: Vec<FixedPointRecord>,
}

impl FixedPointCensus {
    pub fn points(&self) -> Vec<Vec<C64>> {
        self.records.iter().map(|r| r.point.iter().map(|p| C64::new(p[0], p[1])).collect()).collect()
    }
}

/// One Newton step for H(x) = x inside E.
pub fn polish_fixed_point(x: &[C64]) -> Vec<C64> {
    let m = x.len();
    let q = e_basis(m);
    let hx = koch_h_generic(x);
    let r = DVector::from_iterator(m, hx.iter().zip(x).map(|(a, b)| a - b));
    let a = q.adjoint() * (koch_dh(x) - DMatrix::identity(m, m)) * &q;
    let rhs = q.adjoint() * r;
    match a.lu().solve(&rhs) {
        Some(step) => {
            let s = &q * step;
            x.iter().zip(s.iter()).map(|(a, b)| a - b).collect()
        }
        None => x.to_vec(),
    }
}

pub fn fixed_point_residual(x: &[C64]) -> f64 {
    let hx = koch_h_generic(x);
    hx.iter().zip(x).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt()
}

pub fn factorial(m: usize) -> usize {
    (1..=m).product()
}

pub fn koch_fixed_points(m: usize) -> Result<FixedPointCensus> {
    if m < 2 {
        return Err(Error::InvalidArgument("need m ≥ 2".into()));
    }
    let roots = fixed_critical_points(m);
    let mut records = Vec::new();
    for perm in (0..m).permutations(m) {
        let x0: Vec<C64> = perm.iter().map(|&k| roots[k]).collect();
        let x = polish_fixed_point(&x0);
        let residual = fixed_point_residual(&x);
        records.push(FixedPointRecord { point: x.iter().map(|z| [z.re, z.im]).collect(), residual, labeling: perm });
    }
    let pts: Vec<Vec<C64>> =
        records.iter().map(|r| r.point.iter().map(|p| C64::new(p[0], p[1])).collect()).collect();
    let mut all_distinct = true;
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            if crate::algebra::dist(&pts[i], &pts[j]) < 1e-6 {
                all_distinct = false;
            }
        }
    }
    let off_diagonal = pts.iter().all(|x| min_pairwise(x) > 1e-6);
    let max_residual = records.iter().map(|r| r.residual).fold(0.0, f64::max);
    let poly = px_coeffs(&pts[0]);
    Ok(FixedPointCensus {
        schema: 1,
        m,
        count: records.len(),
        expected: factorial(m),
        all_distinct,
        off_diagonal,
        max_residual,
        fixed_point_polynomial: poly.iter().map(|z| [z.re, z.im]).collect(),
        records,
    })
}

pub fn min_pairwise(x: &[C64]) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            best = best.min((x[i] - x[j]).norm());
        }
    }
    best
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumReport {
    pub schema: u32,
    pub m: usize,
    /// sorted by decreasing real part
    pub eigenvalues: Vec<[f64; 2]>,
    pub expected: Vec<f64>,
    pub max_eigenvalue_error: f64,
    /// ‖D_xH(x^k) − λ_k x^k‖ / ‖x^k‖ for k = 1..m−1
    pub eigenvector_residuals: Vec<f64>,
}

pub fn koch_spectrum(x: &[C64]) -> Result<SpectrumReport> {
    let m = x.len();
    check_zero_average(x)?;
    let res = fixed_point_residual(x);
    if res > 1e-10 {
        return Err(Error::NotFixed(res));
    }
    if min_pairwise(x) < 1e-8 {
        return Err(Error::OnSubstratum("coordinates coincide".into()));
    }
    let mut ev = eigenvalues(&restricted_dh(x));
    ev.sort_by(|a, b| b.re.partial_cmp(&a.re).unwrap());
    let expected: Vec<f64> = (1..m).map(|k| (m + 1) as f64 / k as f64).collect();
    let max_eigenvalue_error = ev.iter().zip(&expected).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    let dh = koch_dh(x);
    let eigenvector_residuals = (1..m)
        .map(|k| {
            let xk = DVector::from_iterator(m, x.iter().map(|z| z.powu(k as u32)));
            let lam = (m + 1) as f64 / k as f64;
            (&dh * &xk - &xk * C64::new(lam, 0.0)).norm() / xk.norm()
        })
        .collect();
    Ok(SpectrumReport {
        schema: 1,
        m,
        eigenvalues: ev.iter().map(|z| [z.re, z.im]).collect(),
        expected,
        max_eigenvalue_error,
        eigenvector_residuals,
    })
}

/// [x] ↦ [H(x)], normalized so the largest-modulus coordinate equals 1.
pub fn projective_step(x: &[C64]) -> Result<Vec<C64>> {
    if norm(x) == 0.0 {
        return Err(Error::InvalidArgument("projective point must be nonzero".into()));
    }
    Ok(normalize_projective(&koch_h_generic(x)))
}

pub fn normalize_projective(y: &[C64]) -> Vec<C64> {
    let (k, _) = y
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.norm().partial_cmp(&b.1.norm()).unwrap())
        .expect("nonempty");
    let s = y[k];
    y.iter().map(|z| z / s).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::dd::CDd;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn m2_closed_form() {
        let s = c(0.7, -0.3);
        let p = build_px(&[s, -s]).unwrap();
        // t³ − 3s² t
        assert!((p.coeffs[3] - 1.0).norm() < 1e-15);
        assert!(p.coeffs[2].norm() < 1e-15);
        assert!((p.coeffs[1] + 3.0 * s * s).norm() < 1e-14);
        assert!(p.coeffs[0].norm() < 1e-15);
        let h = koch_h(&[c(1.0, 0.0), c(-1.0, 0.0)]).unwrap();
        assert!((h[0] + 2.0).norm() < 1e-14 && (h[1] - 2.0).norm() < 1e-14);
    }

    #[test]
    fn m5_fixed_point_polynomial() {
        let census = koch_fixed_points(5).unwrap();
        let p = &census.fixed_point_polynomial;
        let want = [0.0, 1.2, 0.0, 0.0, 0.0, 0.0, 1.0];
        for (i, w) in want.iter().enumerate() {
            assert!((p[i][0] - w).abs() < 1e-12 && p[i][1].abs() < 1e-12, "coefficient {i}: {:?}", p[i]);
        }
    }

    #[test]
    fn rejects_nonzero_average() {
        assert!(matches!(build_px(&[c(1.0, 0.0), c(1.0, 0.0)]), Err(Error::NonZeroAverage(_))));
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let x = [c(0.3, 0.1), c(-0.5, 0.2), c(0.4, -0.6), c(-0.2, 0.3)];
        let dh = koch_dh(&x);
        let fd = crate::algebra::fd_jacobian(&KochMap { m: 4 }, &x, 1e-6);
        assert!((dh - fd).norm() < 1e-8);
    }

    #[test]
    fn polymap_matches_direct() {
        for m in 2..=5 {
            let amb = koch_h_polymap_ambient(m);
            let intr = koch_h_polymap(m);
            let cvec: Vec<C64> = (0..m - 1).map(|k| c(0.3 - 0.1 * k as f64, 0.2 * k as f64)).collect();
            let x = from_intrinsic(&cvec);
            let direct = koch_h_generic(&x);
            let via = amb.eval_slice(&x);
            assert!(crate::algebra::dist(&direct, &via) < 1e-13);
            let back = from_intrinsic(&intr.eval_slice(&cvec));
            assert!(crate::algebra::dist(&direct, &back) < 1e-13);
            assert_eq!(intr.homogeneous_part(m as u32 + 1), intr);
        }
    }

    #[test]
    fn dd_agrees_with_double() {
        let x = [c(0.3, 0.1), c(-0.5, 0.2), c(0.2, -0.3)];
        let xd: Vec<CDd> = x.iter().map(|&z| z.into()).collect();
        let a = koch_h_generic(&x);
        let b: Vec<C64> = koch_h_generic(&xd).into_iter().map(Into::into).collect();
        assert!(crate::algebra::dist(&a, &b) < 1e-15);
    }

    #[test]
    fn m2_fixed_points() {
        let census = koch_fixed_points(2).unwrap();
        assert_eq!(census.count, 2);
        let s = c(0.0, 1.0 / 2f64.sqrt());
        for x in census.points() {
            assert!((x[0] - s).norm() < 1e-12 || (x[0] + s).norm() < 1e-12);
            assert!((x[0] + x[1]).norm() < 1e-14);
        }
    }

    #[test]
    fn spectrum_m3() {
        let census = koch_fixed_points(3).unwrap();
        let rep = koch_spectrum(&census.points()[0]).unwrap();
        assert!((rep.eigenvalues[0][0] - 4.0).abs() < 1e-8);
        assert!((rep.eigenvalues[1][0] - 2.0).abs() < 1e-8);
        assert!(rep.eigenvector_residuals.iter().all(|r| *r < 1e-8));
    }

    #[test]
    fn projective_scaling_invariant() {
        let x = [c(0.3, 0.1), c(-0.5, 0.2), c(0.2, -0.3)];
        let x2: Vec<C64> = x.iter().map(|z| z * 2.0).collect();
        let a = projective_step(&x).unwrap();
        let b = projective_step(&x2).unwrap();
        assert!(crate::algebra::dist(&a, &b) < 1e-12);
    }
}
