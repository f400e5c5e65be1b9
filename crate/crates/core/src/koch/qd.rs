//! Quadratic differentials with simple poles at the block values and their
//! pushforward by P_x.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use super::partition::Partition;
use super::{build_px, check_zero_average, koch_dh, CriticalPolynomial};
use crate::algebra::linalg::eigenvalues;
use crate::algebra::poly_roots;
use crate::algebra::sampling::halton_disc;
use crate::error::{Error, Result};

type C64 = Complex64;

const RESIDUE_TOL: f64 = 1e-8;

/// q = Σ_J λ_J dz²/(z − x_J) with Σ λ_J = 0.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuadraticDifferential {
    pub poles: Vec<C64>,
    pub residues: Vec<C64>,
}

impl QuadraticDifferential {
    pub fn new(poles: Vec<C64>, residues: Vec<C64>) -> Result<Self> {
        if poles.len() != residues.len() {
            return Err(Error::DimensionMismatch { expected: poles.len(), got: residues.len() });
        }
        let s: C64 = residues.iter().sum();
        let scale = residues.iter().map(|z| z.norm()).fold(1.0, f64::max);
        if s.norm() > 1e-10 * scale {
            return Err(Error::ResidueSum(s.norm()));
        }
        Ok(Self { poles, residues })
    }

    /// Residues for all but the last pole; the last one balances the sum.
    pub fn from_free(poles: Vec<C64>, free: &[C64]) -> Result<Self> {
        if free.len() + 1 != poles.len() {
            return Err(Error::DimensionMismatch { expected: poles.len() - 1, got: free.len() });
        }
        let mut residues = free.to_vec();
        residues.push(-free.iter().sum::<C64>());
        Ok(Self { poles, residues })
    }

    /// The coefficient of dz² at z.
    pub fn eval(&self, z: C64) -> C64 {
        self.poles.iter().zip(&self.residues).map(|(&p, &l)| l / (z - p)).sum()
    }

    /// ∫_{D_R} |q| by quasi-random quadrature.
    pub fn l1_norm(&self, r: f64, nodes: usize) -> f64 {
        let pts = halton_disc(nodes, r);
        let mean = pts.par_iter().map(|&z| self.eval(z).norm()).sum::<f64>() / nodes as f64;
        mean * std::f64::consts::PI * r * r
    }
}

/// ⟨q, v⟩ = Σ_J λ_J v_J for v constant on the blocks.
pub fn qd_pairing(q: &QuadraticDifferential, v: &[C64], part: &Partition) -> Result<C64> {
    if q.residues.len() != part.len() {
        return Err(Error::DimensionMismatch { expected: part.len(), got: q.residues.len() });
    }
    Ok(q.residues.iter().enumerate().map(|(k, &l)| l * part.value_on(v, k)).sum())
}

/// Coefficient of P_*q at w: Σ over preimages z of q(z)/P'(z)².
fn push_coefficient(p: &CriticalPolynomial, q: &QuadraticDifferential, w: C64) -> Result<C64> {
    let pre = preimages(p, w)?;
    Ok(push_from_preimages(p, q, &pre))
}

fn preimages(p: &CriticalPolynomial, w: C64) -> Result<Vec<C64>> {
    let mut c = p.coeffs.clone();
    c[0] -= w;
    poly_roots(&c)
}

fn push_from_preimages(p: &CriticalPolynomial, q: &QuadraticDifferential, pre: &[C64]) -> C64 {
    pre.iter()
        .map(|&z| {
            let d = p.derivative(z);
            q.eval(z) / (d * d)
        })
        .sum()
}

#[derive(Debug, Clone, Serialize)]
pub struct PushforwardReport {
    pub schema: u32,
    pub poles: Vec<[f64; 2]>,
    pub residues: Vec<[f64; 2]>,
    pub contour_radius: f64,
    pub nodes: usize,
    pub residue_sum: f64,
}

impl PushforwardReport {
    pub fn differential(&self) -> QuadraticDifferential {
        QuadraticDifferential {
            poles: self.poles.iter().map(|p| C64::new(p[0], p[1])).collect(),
            residues: self.residues.iter().map(|p| C64::new(p[0], p[1])).collect(),
        }
    }
}

/// Residues of P_*q at the critical values y_J = P(x_J), by the trapezoid rule
/// on circles of radius half the smallest gap, doubling nodes until two rounds
/// agree to 1e-8.
pub fn qd_pushforward(x: &[C64], q: &QuadraticDifferential) -> Result<PushforwardReport> {
    check_zero_average(x)?;
    let part = Partition::from_point(x, 1e-8);
    if q.poles.len() != part.len() {
        return Err(Error::DimensionMismatch { expected: part.len(), got: q.poles.len() });
    }
    if part.len() < 2 {
        return Err(Error::InvalidArgument("need at least two distinct block values".into()));
    }
    let p = build_px(x)?;
    let ys: Vec<C64> = (0..part.len()).map(|k| p.eval(part.value_on(x, k))).collect();
    let rho = 0.5 * super::min_pairwise(&ys);
    if rho < 1e-12 {
        return Err(Error::OnSubstratum("critical values coincide".into()));
    }
    let contour = |y: C64, n: usize| -> Result<C64> {
        let mut acc = C64::new(0.0, 0.0);
        for k in 0..n {
            let e = C64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / n as f64);
            acc += push_coefficient(&p, q, y + e * rho)? * e;
        }
        Ok(acc * rho / n as f64)
    };
    let mut n = 64;
    let mut prev: Vec<C64> = ys.iter().map(|&y| contour(y, n)).collect::<Result<_>>()?;
    loop {
        let cur: Vec<C64> = ys.iter().map(|&y| contour(y, 2 * n)).collect::<Result<_>>()?;
        let diff = prev.iter().zip(&cur).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        n *= 2;
        prev = cur;
        if diff < 1e-8 || n >= 8192 {
            break;
        }
    }
    let residue_sum = prev.iter().sum::<C64>().norm();
    if residue_sum > RESIDUE_TOL * prev.iter().map(|z| z.norm()).fold(1.0, f64::max) {
        return Err(Error::ResidueSum(residue_sum));
    }
    Ok(PushforwardReport {
        schema: 1,
        poles: ys.iter().map(|z| [z.re, z.im]).collect(),
        residues: prev.iter().map(|z| [z.re, z.im]).collect(),
        contour_radius: rho,
        nodes: n,
        residue_sum,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct PushforwardMatrixReport {
    pub schema: u32,
    pub partition: String,
    /// matrix of P_* in the basis q_{J_l} − q_{J_last}, row-major
    pub matrix: Vec<Vec<[f64; 2]>>,
    /// transpose of the inverse of D_xH on T_xL_J in the dual basis
    pub expected: Vec<Vec<[f64; 2]>>,
    pub max_error: f64,
    pub spectral_radius: f64,
    pub l1: Vec<L1Sample>,
    pub disc_radius: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct L1Sample {
    pub norm: f64,
    pub pushed_norm: f64,
}

fn to_rows(a: &DMatrix<C64>) -> Vec<Vec<[f64; 2]>> {
    (0..a.nrows()).map(|i| (0..a.ncols()).map(|j| [a[(i, j)].re, a[(i, j)].im]).collect()).collect()
}

/// Smallest R = 4·2^k such that P^{-1}(circle of radius R) lies inside D_R.
pub fn certified_radius(p: &CriticalPolynomial) -> Result<f64> {
    let mut r = 4.0;
    for _ in 0..20 {
        let mut ok = true;
        for k in 0..64 {
            let w = C64::from_polar(r, 2.0 * std::f64::consts::PI * k as f64 / 64.0);
            if preimages(p, w)?.iter().any(|z| z.norm() >= r) {
                ok = false;
                break;
            }
        }
        if ok {
            return Ok(r);
        }
        r *= 2.0;
    }
    Err(Error::InvalidArgument("no disc radius certified".into()))
}

/// Builds the matrix of P_* on Q_x, compares it with the transpose inverse of
/// D_xH|T_xL_J, and measures L¹ norms on D_R for the given differentials.
pub fn pushforward_matrix(x: &[C64], samples: &[QuadraticDifferential], nodes: usize) -> Result<PushforwardMatrixReport> {
    check_zero_average(x)?;
    let part = Partition::from_point(x, 1e-8);
    let d = part.stratum_dim();
    if d == 0 {
        return Err(Error::InvalidArgument("need at least two distinct block values".into()));
    }
    let poles: Vec<C64> = (0..part.len()).map(|k| part.value_on(x, k)).collect();
    let mut mat = DMatrix::zeros(d, d);
    for l in 0..d {
        let mut free = vec![C64::new(0.0, 0.0); d];
        free[l] = C64::new(1.0, 0.0);
        let q = QuadraticDifferential::from_free(poles.clone(), &free)?;
        let rep = qd_pushforward(x, &q)?;
        for k in 0..d {
            mat[(k, l)] = C64::new(rep.residues[k][0], rep.residues[k][1]);
        }
    }
    let dh = koch_dh(x);
    let basis: Vec<Vec<C64>> = part.tangent_basis();
    let m = x.len();
    let mut dmat = DMatrix::zeros(d, d);
    for (k, u) in basis.iter().enumerate() {
        let w: Vec<C64> = (0..m).map(|i| (0..m).map(|l| dh[(i, l)] * u[l]).sum()).collect();
        for (j, c) in part.tangent_coords(&w).into_iter().enumerate() {
            dmat[(j, k)] = c;
        }
    }
    let inv = dmat.try_inverse().ok_or_else(|| Error::Degenerate { block: 0, witness: Vec::new() })?;
    let expected = inv.transpose();
    let max_error = (&mat - &expected).iter().map(|z| z.norm()).fold(0.0, f64::max)
        / expected.iter().map(|z| z.norm()).fold(1e-300, f64::max);
    let spectral_radius = eigenvalues(&mat).iter().map(|z| z.norm()).fold(0.0, f64::max);

    let p = build_px(x)?;
    let r = certified_radius(&p)?;
    let pts = halton_disc(nodes, r);
    let pre: Vec<Vec<C64>> = pts.par_iter().map(|&w| preimages(&p, w)).collect::<Result<_>>()?;
    let area = std::f64::consts::PI * r * r;
    let l1 = samples
        .iter()
        .map(|q| {
            let (a, b) = pts
                .par_iter()
                .zip(pre.par_iter())
                .map(|(&w, z)| (q.eval(w).norm(), push_from_preimages(&p, q, z).norm()))
                .reduce(|| (0.0, 0.0), |s, t| (s.0 + t.0, s.1 + t.1));
            L1Sample { norm: a * area / nodes as f64, pushed_norm: b * area / nodes as f64 }
        })
        .collect();
    Ok(PushforwardMatrixReport {
        schema: 1,
        partition: part.to_string(),
        matrix: to_rows(&mat),
        expected: to_rows(&expected),
        max_error,
        spectral_radius,
        l1,
        disc_radius: r,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::koch::koch_fixed_points;

    #[test]
    fn m2_pushforward_is_one_third() {
        let x = koch_fixed_points(2).unwrap().points()[0].clone();
        let rep = pushforward_matrix(&x, &[], 1000).unwrap();
        let z = rep.matrix[0][0];
        assert!((z[0] - 1.0 / 3.0).abs() < 1e-8 && z[1].abs() < 1e-8, "{z:?}");
    }

    #[test]
    fn m3_duality_and_contraction() {
        let x = koch_fixed_points(3).unwrap().points()[0].clone();
        let part = Partition::from_point(&x, 1e-8);
        let poles: Vec<C64> = (0..3).map(|k| part.value_on(&x, k)).collect();
        let q = QuadraticDifferential::from_free(poles, &[C64::new(0.4, 0.1), C64::new(-0.2, 0.7)]).unwrap();
        let rep = pushforward_matrix(&x, std::slice::from_ref(&q), 20000).unwrap();
        assert!(rep.max_error < 1e-6, "{}", rep.max_error);
        assert!(rep.spectral_radius < 1.0);
        assert!(rep.l1[0].pushed_norm < rep.l1[0].norm);
        // ⟨q, v⟩ = ⟨P_*q, D_xH v⟩
        let pushed = qd_pushforward(&x, &q).unwrap().differential();
        let v = vec![C64::new(0.3, 0.2), C64::new(-0.5, 0.1), C64::new(0.2, -0.3)];
        let dv: Vec<C64> = (koch_dh(&x) * nalgebra::DVector::from_vec(v.clone())).iter().cloned().collect();
        let lhs = qd_pairing(&q, &v, &part).unwrap();
        let rhs = qd_pairing(&pushed, &dv, &part).unwrap();
        assert!((lhs - rhs).norm() < 1e-8, "{lhs} {rhs}");
    }
}
