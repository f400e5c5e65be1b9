use num_complex::Complex64;

use crate::error::{Error, Result};

type C64 = Complex64;

const MAX_ITER: usize = 500;

/// Horner evaluation of p and p' with coefficients in ascending order.
pub fn horner(coeffs: &[C64], z: C64) -> (C64, C64) {
    let mut p = C64::new(0.0, 0.0);
    let mut dp = C64::new(0.0, 0.0);
    for &c in coeffs.iter().rev() {
        dp = dp * z + p;
        p = p * z + c;
    }
    (p, dp)
}

pub fn eval_poly(coeffs: &[C64], z: C64) -> C64 {
    coeffs.iter().rev().fold(C64::new(0.0, 0.0), |acc, &c| acc * z + c)
}

/// Fujiwara upper bound on the moduli of the roots.
fn fujiwara_bound(coeffs: &[C64]) -> f64 {
    let n = coeffs.len() - 1;
    let lead = coeffs[n];
    let mut b: f64 = 0.0;
    for j in 1..=n {
        let c = (coeffs[n - j] / lead).norm();
        let t = if j == n { (c / 2.0).powf(1.0 / j as f64) } else { c.powf(1.0 / j as f64) };
        b = b.max(t);
    }
    2.0 * b
}

fn residual_bound(coeffs: &[C64], r: C64) -> f64 {
    let deg = (coeffs.len() - 1) as i32;
    let cnorm = coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    1e-10 * (1.0 + r.norm()).powi(deg) * cnorm
}

/// All roots, with multiplicity, of Σ coeffs[i] z^i.
///
/// Aberth–Ehrlich iteration started on a rotated circle at the Fujiwara
/// radius, followed by Newton polishing that is kept only when it lowers
/// |p|. Exact zero roots are split off first.
pub fn poly_roots(coeffs: &[C64]) -> Result<Vec<C64>> {
    let deg = coeffs.len().saturating_sub(1);
    if deg == 0 {
        return Err(Error::InvalidArgument("polynomial degree must be at least 1".into()));
    }
    if coeffs[deg] == C64::new(0.0, 0.0) {
        return Err(Error::InvalidArgument("leading coefficient is zero".into()));
    }
    let zeros = coeffs.iter().take_while(|c| **c == C64::new(0.0, 0.0)).count();
    let reduced = &coeffs[zeros..];
    let mut roots = vec![C64::new(0.0, 0.0); zeros];
    if reduced.len() > 1 {
        roots.extend(aberth(reduced)?);
    }
    Ok(roots)
}

fn aberth(coeffs: &[C64]) -> Result<Vec<C64>> {
    let n = coeffs.len() - 1;
    if n == 1 {
        return Ok(vec![-coeffs[0] / coeffs[1]]);
    }
    let radius = fujiwara_bound(coeffs);
    let mut z: Vec<C64> = (0..n)
        .map(|j| C64::from_polar(radius, 2.0 * std::f64::consts::PI * j as f64 / n as f64 + 0.4))
        .collect();
    let mut done = vec![false; n];
    let mut iterations = 0;
    while iterations < MAX_ITER && done.iter().any(|d| !d) {
        iterations += 1;
        for i in 0..n {
            if done[i] {
                continue;
            }
            let (p, dp) = horner(coeffs, z[i]);
            if p == C64::new(0.0, 0.0) {
                done[i] = true;
                continue;
            }
            let ratio = p / dp;
            let s: C64 = (0..n).filter(|&j| j != i).map(|j| 1.0 / (z[i] - z[j])).sum();
            let step = ratio / (1.0 - ratio * s);
            if !step.re.is_finite() || !step.im.is_finite() {
                // perturb off a coincident pair
                let bump = C64::new(1e-8, 1e-8) * (1.0 + z[i].norm());
                z[i] += bump;
                continue;
            }
            z[i] -= step;
            if step.norm() <= 4.0 * f64::EPSILON * z[i].norm().max(f64::MIN_POSITIVE) {
                done[i] = true;
            }
        }
    }
    for r in z.iter_mut() {
        polish(coeffs, r);
    }
    let worst = z
        .iter()
        .map(|r| eval_poly(coeffs, *r).norm() / residual_bound(coeffs, *r))
        .fold(0.0, f64::max);
    if worst > 1.0 {
        return Err(Error::RootsNotConverged {
            iterations,
            residual: z.iter().map(|r| eval_poly(coeffs, *r).norm()).fold(0.0, f64::max),
            partial: z,
        });
    }
    Ok(z)
}

fn polish(coeffs: &[C64], r: &mut C64) {
    for _ in 0..3 {
        let (p, dp) = horner(coeffs, *r);
        if dp == C64::new(0.0, 0.0) {
            return;
        }
        let cand = *r - p / dp;
        if eval_poly(coeffs, cand).norm() < p.norm() {
            *r = cand;
        } else {
            return;
        }
    }
}

/// Coefficients (ascending) of Π (z − r_i).
pub fn from_roots(roots: &[C64]) -> Vec<C64> {
    let mut c = vec![C64::new(1.0, 0.0)];
    for &r in roots {
        let mut next = vec![C64::new(0.0, 0.0); c.len() + 1];
        for (i, &a) in c.iter().enumerate() {
            next[i + 1] += a;
            next[i] -= a * r;
        }
        c = next;
    }
    c
}

/// Derivative coefficients (ascending).
pub fn derivative(coeffs: &[C64]) -> Vec<C64> {
    coeffs.iter().enumerate().skip(1).map(|(i, c)| c * i as f64).collect()
}
