//! Complex linear algebra and sparse multivariate polynomial maps.

pub mod block;
pub mod dd;
pub mod json;
pub mod linalg;
pub mod poly;
pub mod roots;
pub mod sampling;

use nalgebra::DMatrix;
use num_complex::Complex64;

pub use block::{dist, hermitian, norm, BlockStructure, BlockVector};
pub use json::{polymap_from_json, polymap_to_json, PolyMapJson};
pub use poly::{JacobianMatrix, PolyMap, SparsePoly};
pub use roots::poly_roots;

pub type C64 = Complex64;

/// A holomorphic self-map of C^m that can be evaluated and differentiated.
pub trait SelfMap: Send + Sync {
    fn dim(&self) -> usize;
    fn apply(&self, v: &[C64]) -> Vec<C64>;
    fn jac(&self, v: &[C64]) -> DMatrix<C64>;
}

pub fn eval(p: &PolyMap, v: &BlockVector) -> crate::Result<BlockVector> {
    p.eval(v)
}

pub fn jacobian(p: &PolyMap, v: &BlockVector) -> crate::Result<JacobianMatrix> {
    p.jacobian(v)
}

pub fn compose(p: &PolyMap, q: &PolyMap, trunc: Option<u32>) -> crate::Result<PolyMap> {
    p.compose(q, trunc)
}

pub fn homogeneous_part(p: &PolyMap, d: u32) -> PolyMap {
    p.homogeneous_part(d)
}

/// Central finite-difference Jacobian, used as an independent check.
pub fn fd_jacobian<F: SelfMap + ?Sized>(f: &F, v: &[C64], h: f64) -> DMatrix<C64> {
    let m = f.dim();
    let mut j = DMatrix::zeros(m, m);
    for c in 0..m {
        let mut vp = v.to_vec();
        let mut vm = v.to_vec();
        vp[c] += h;
        vm[c] -= h;
        let fp = f.apply(&vp);
        let fm = f.apply(&vm);
        for r in 0..m {
            j[(r, c)] = (fp[r] - fm[r]) / (2.0 * h);
        }
    }
    j
}
