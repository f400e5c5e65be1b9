use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::dd::Scalar;

type C64 = Complex64;

/// n × (n−1) real matrix whose columns are an orthonormal basis of the
/// zero-sum hyperplane of C^n.
pub fn helmert(n: usize) -> DMatrix<f64> {
    let mut h = DMatrix::zeros(n, n.saturating_sub(1));
    for k in 1..n {
        let s = ((k * (k + 1)) as f64).sqrt();
        for i in 0..k {
            h[(i, k - 1)] = 1.0 / s;
        }
        h[(k, k - 1)] = -(k as f64) / s;
    }
    h
}

pub fn to_complex(a: &DMatrix<f64>) -> DMatrix<C64> {
    a.map(|x| C64::new(x, 0.0))
}

/// Orthonormalizes the columns of `a` (modified Gram–Schmidt, two passes),
/// dropping columns that become numerically dependent.
pub fn orthonormalize(a: &DMatrix<C64>) -> DMatrix<C64> {
    let mut cols: Vec<DVector<C64>> = Vec::new();
    for j in 0..a.ncols() {
        let mut v: DVector<C64> = a.column(j).into_owned();
        let n0 = v.norm();
        for _ in 0..2 {
            for q in &cols {
                let proj = q.dotc(&v);
                v -= q * proj;
            }
        }
        let n = v.norm();
        if n > 1e-12 * n0.max(1e-300) {
            cols.push(v / C64::new(n, 0.0));
        }
    }
    if cols.is_empty() {
        return DMatrix::zeros(a.nrows(), 0);
    }
    DMatrix::from_columns(&cols)
}

pub fn solve(a: &DMatrix<C64>, b: &DVector<C64>) -> Option<DVector<C64>> {
    a.clone().lu().solve(b)
}

fn max_abs<'a>(it: impl Iterator<Item = &'a C64>) -> f64 {
    it.map(|z| z.norm()).fold(0.0, f64::max)
}

/// Solve for matrices whose rows and columns live on wildly different scales
/// (Jacobians along superattracting orbits): rows and columns are scaled by
/// their largest entries, then LU with two rounds of iterative refinement.
/// Keeps tiny solution components accurate to their own magnitude.
pub fn solve_equilibrated(a: &DMatrix<C64>, b: &DVector<C64>) -> Option<DVector<C64>> {
    let n = a.nrows();
    let rs: Vec<f64> = (0..n).map(|i| max_abs(a.row(i).iter())).collect();
    if rs.iter().any(|&r| r == 0.0) {
        return None;
    }
    let mut scaled = DMatrix::from_fn(n, a.ncols(), |i, j| a[(i, j)] / rs[i]);
    let cs: Vec<f64> = (0..a.ncols()).map(|j| max_abs(scaled.column(j).iter())).collect();
    if cs.iter().any(|&c| c == 0.0) {
        return None;
    }
    for j in 0..a.ncols() {
        for i in 0..n {
            scaled[(i, j)] /= cs[j];
        }
    }
    let rhs = DVector::from_fn(n, |i, _| b[i] / rs[i]);
    let lu = scaled.clone().lu();
    let mut y = lu.solve(&rhs)?;
    for _ in 0..2 {
        let r = &rhs - &scaled * &y;
        y += lu.solve(&r)?;
    }
    Some(DVector::from_fn(a.ncols(), |j, _| y[j] / cs[j]))
}

/// Eigenvalues from the diagonal of a complex Schur form.
pub fn eigenvalues(a: &DMatrix<C64>) -> Vec<C64> {
    if a.nrows() == 0 {
        return Vec::new();
    }
    let (_, t) = a.clone().schur().unpack();
    (0..t.nrows()).map(|i| t[(i, i)]).collect()
}

/// |det A| / Π ‖row_i‖, a scale-invariant nearness-to-singular measure in [0, 1].
pub fn hadamard_ratio(a: &DMatrix<C64>) -> f64 {
    let mut scaled = a.clone();
    for i in 0..a.nrows() {
        // rescale by the largest entry first so tiny rows do not underflow
        let big = a.row(i).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if big == 0.0 {
            return 0.0;
        }
        for j in 0..a.ncols() {
            scaled[(i, j)] /= big;
        }
        let n = scaled.row(i).norm();
        for j in 0..a.ncols() {
            scaled[(i, j)] /= n;
        }
    }
    scaled.determinant().norm()
}

/// Determinant by Gaussian elimination with partial pivoting, in any scalar.
pub fn det_generic<S: Scalar>(mut a: Vec<Vec<S>>) -> S {
    let n = a.len();
    let mut det = S::one();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs2().partial_cmp(&a[j][col].abs2()).unwrap())
            .unwrap();
        if a[piv][col].abs2() == 0.0 {
            return S::zero();
        }
        if piv != col {
            a.swap(piv, col);
            det = -det;
        }
        let p = a[col][col];
        det *= p;
        for r in col + 1..n {
            let f = a[r][col] / p;
            for c in col..n {
                let t = a[col][c];
                a[r][c] -= f * t;
            }
        }
    }
    det
}

/// Smallest singular value divided by the largest.
pub fn inverse_condition(a: &DMatrix<C64>) -> f64 {
    let sv = a.clone().svd(false, false).singular_values;
    let mx = sv.iter().cloned().fold(0.0, f64::max);
    let mn = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if mx == 0.0 {
        0.0
    } else {
        mn / mx
    }
}

/// Numerical rank with relative threshold `tol` on singular values.
pub fn rank(a: &DMatrix<C64>, tol: f64) -> usize {
    let sv = a.clone().svd(false, false).singular_values;
    let mx = sv.iter().cloned().fold(0.0, f64::max);
    sv.iter().filter(|&&s| s > tol * mx.max(1e-300)).count()
}
