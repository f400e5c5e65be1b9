//! Partitions of the index set, the linear strata L_J, and the local structure
//! of H near them.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;

use super::{check_zero_average, fixed_point_residual, koch_dh, koch_dh_generic, koch_h_generic};
use crate::algebra::dd::{CDd, Scalar};
use crate::algebra::linalg::{det_generic, eigenvalues, helmert, orthonormalize, to_complex};
use crate::algebra::sampling::{random_complex, rng};
use crate::error::{Error, Result};

type C64 = Complex64;

/// A set partition of {0, …, m−1}; blocks sorted internally and by first element.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct Partition {
    m: usize,
    blocks: Vec<Vec<usize>>,
}

impl Partition {
    pub fn new(m: usize, blocks: Vec<Vec<usize>>) -> Result<Self> {
        let mut seen = vec![false; m];
        for b in &blocks {
            if b.is_empty() {
                return Err(Error::InvalidBlocks("empty block".into()));
            }
            for &i in b {
                if i >= m || seen[i] {
                    return Err(Error::InvalidBlocks(format!("index {i} out of range or repeated")));
                }
                seen[i] = true;
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::InvalidBlocks("blocks do not cover the index set".into()));
        }
        let mut blocks: Vec<Vec<usize>> = blocks
            .into_iter()
            .map(|mut b| {
                b.sort_unstable();
                b
            })
            .collect();
        blocks.sort_by_key(|b| b[0]);
        Ok(Self { m, blocks })
    }

    pub fn singletons(m: usize) -> Self {
        Self { m, blocks: (0..m).map(|i| vec![i]).collect() }
    }

    /// Groups coordinates closer than `tol`.
    pub fn from_point(x: &[C64], tol: f64) -> Self {
        let mut blocks: Vec<Vec<usize>> = Vec::new();
        for i in 0..x.len() {
            match blocks.iter_mut().find(|b| (x[b[0]] - x[i]).norm() < tol) {
                Some(b) => b.push(i),
                None => blocks.push(vec![i]),
            }
        }
        Self { m: x.len(), blocks }
    }

    /// Every set partition of {0, …, m−1}, the one-block partition included.
    pub fn all(m: usize) -> Vec<Self> {
        let mut out = Vec::new();
        let mut labels = vec![0usize; m];
        fn rec(i: usize, max: usize, labels: &mut Vec<usize>, out: &mut Vec<Partition>) {
            let m = labels.len();
            if i == m {
                let nb = labels.iter().max().map_or(0, |x| x + 1);
                let mut blocks = vec![Vec::new(); nb];
                for (k, &l) in labels.iter().enumerate() {
                    blocks[l].push(k);
                }
                out.push(Partition { m, blocks });
                return;
            }
            for l in 0..=max {
                labels[i] = l;
                rec(i + 1, if l == max { max + 1 } else { max }, labels, out);
            }
        }
        if m > 0 {
            rec(1, 1, &mut labels, &mut out);
        }
        out
    }

    /// Partitions with at least two blocks.
    pub fn proper(m: usize) -> Vec<Self> {
        Self::all(m).into_iter().filter(|p| p.len() >= 2).collect()
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn block(&self, k: usize) -> &[usize] {
        &self.blocks[k]
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.blocks.iter().map(Vec::len).collect()
    }

    pub fn block_of(&self, i: usize) -> usize {
        self.blocks.iter().position(|b| b.contains(&i)).expect("covers")
    }

    /// dim L_J = number of blocks − 1.
    pub fn stratum_dim(&self) -> usize {
        self.len() - 1
    }

    /// True when `self` is obtained by merging blocks of `finer`.
    pub fn coarsens(&self, finer: &Partition) -> bool {
        finer.blocks.iter().all(|b| self.blocks.iter().any(|c| b.iter().all(|i| c.contains(i))))
    }

    pub fn merge(&self, a: usize, b: usize) -> Result<Partition> {
        if a == b || a >= self.len() || b >= self.len() {
            return Err(Error::InvalidArgument(format!("cannot merge blocks {a} and {b}")));
        }
        let mut blocks: Vec<Vec<usize>> =
            self.blocks.iter().enumerate().filter(|(k, _)| *k != a && *k != b).map(|(_, v)| v.clone()).collect();
        let mut joined = self.blocks[a].clone();
        joined.extend_from_slice(&self.blocks[b]);
        blocks.push(joined);
        Partition::new(self.m, blocks)
    }

    /// Average of `v` over block `k`.
    pub fn value_on<S: Scalar>(&self, v: &[S], k: usize) -> S {
        let b = &self.blocks[k];
        let mut s = S::zero();
        for &i in b {
            s += v[i];
        }
        s / S::from_f64(b.len() as f64)
    }

    /// π_J: restriction to block `k` minus its average.
    pub fn project<S: Scalar>(&self, v: &[S], k: usize) -> Vec<S> {
        let a = self.value_on(v, k);
        self.blocks[k].iter().map(|&i| v[i] - a).collect()
    }

    /// Largest deviation of `x` from being constant on blocks.
    pub fn stratum_defect(&self, x: &[C64]) -> f64 {
        (0..self.len())
            .flat_map(|k| self.project(x, k))
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    /// Smallest distance between block values (zero on Δ_J).
    pub fn block_separation(&self, x: &[C64]) -> f64 {
        let vals: Vec<C64> = (0..self.len()).map(|k| self.value_on(x, k)).collect();
        super::min_pairwise(&vals)
    }

    /// Block-indicator basis of L_J: u_k = 1_{J_k} − |J_k|/m for all but the last block.
    /// Its dual functionals are w ↦ w_{J_k} − w_{J_last}.
    pub fn tangent_basis<S: Scalar>(&self) -> Vec<Vec<S>> {
        let m = S::from_f64(self.m as f64);
        (0..self.len() - 1)
            .map(|k| {
                let off = S::from_f64(self.blocks[k].len() as f64) / m;
                (0..self.m)
                    .map(|i| if self.blocks[k].contains(&i) { S::one() - off } else { -off })
                    .collect()
            })
            .collect()
    }

    /// Coordinates of w ∈ L_J in `tangent_basis`.
    pub fn tangent_coords<S: Scalar>(&self, w: &[S]) -> Vec<S> {
        let last = self.blocks[self.len() - 1][0];
        (0..self.len() - 1).map(|k| w[self.blocks[k][0]] - w[last]).collect()
    }

    /// Orthonormal basis of L_J as columns.
    pub fn orthonormal_basis(&self) -> DMatrix<C64> {
        let u: Vec<Vec<C64>> = self.tangent_basis();
        if u.is_empty() {
            return DMatrix::zeros(self.m, 0);
        }
        let a = DMatrix::from_fn(self.m, u.len(), |i, k| u[k][i]);
        orthonormalize(&a)
    }

    /// A random point of L_J with the given block values shifted to average zero.
    pub fn point_from_values(&self, vals: &[C64]) -> Vec<C64> {
        let mut x = vec![C64::new(0.0, 0.0); self.m];
        for (k, b) in self.blocks.iter().enumerate() {
            for &i in b {
                x[i] = vals[k];
            }
        }
        let avg: C64 = x.iter().sum::<C64>() / self.m as f64;
        // subtract once more per block so equal coordinates stay bitwise equal
        let vals: Vec<C64> = vals.iter().map(|v| v - avg).collect();
        for (k, b) in self.blocks.iter().enumerate() {
            for &i in b {
                x[i] = vals[k];
            }
        }
        x
    }

    pub fn random_point<R: Rng>(&self, rng: &mut R) -> Vec<C64> {
        let vals: Vec<C64> = (0..self.len()).map(|_| random_complex(rng, 1.0)).collect();
        self.point_from_values(&vals)
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> =
            self.blocks.iter().map(|b| b.iter().map(|i| (i + 1).to_string()).collect::<Vec<_>>().join(",")).collect();
        write!(f, "{}", parts.join("|"))
    }
}

/// Parses `1,2|3,4` (1-based indices); m is the largest index.
impl FromStr for Partition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut blocks = Vec::new();
        for part in s.split('|') {
            let b: std::result::Result<Vec<usize>, _> =
                part.split(',').map(|t| t.trim().parse::<usize>().map(|i| i.wrapping_sub(1))).collect();
            blocks.push(b.map_err(|e| Error::Parse(format!("partition {s:?}: {e}")))?);
        }
        let m = blocks.iter().flatten().filter(|&&i| i != usize::MAX).map(|i| i + 1).max().unwrap_or(0);
        Partition::new(m, blocks)
    }
}

pub fn loglog_slope(ts: &[f64], ys: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> =
        ts.iter().zip(ys).filter(|(_, &y)| y > 0.0).map(|(&t, &y)| (t.ln(), y.ln())).collect();
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return f64::NAN;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

fn log_ladder(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| (lo.ln() + (hi / lo).ln() * i as f64 / (n - 1) as f64).exp()).collect()
}

fn norm_dd(v: &[CDd]) -> f64 {
    v.iter().map(|z| z.abs2()).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, Serialize)]
pub struct StratumExpansionReport {
    pub schema: u32,
    pub partition: String,
    pub block: usize,
    pub block_size: usize,
    pub c_j_analytic: [f64; 2],
    pub c_j_estimate: [f64; 2],
    pub t: Vec<f64>,
    pub remainder: Vec<f64>,
    pub slope: f64,
    pub expected_slope: f64,
    /// π_J v = 0, so both sides vanish identically
    pub degenerate: bool,
    pub slope_ok: bool,
}

/// C_J = ((m+1)/(|J|+1)) Π_{i∉J} (a − x_i), a the value of x on J.
pub fn block_constant(x: &[C64], part: &Partition, k: usize) -> C64 {
    let m = x.len();
    let a = part.value_on(x, k);
    let mut prod = C64::new((m + 1) as f64 / (part.block(k).len() + 1) as f64, 0.0);
    for (i, &xi) in x.iter().enumerate() {
        if !part.block(k).contains(&i) {
            prod *= a - xi;
        }
    }
    prod
}

/// Compares π_J∘H(x+tv) with C_J·H_J(π_J(tv)) along t ∈ [1e-4, 1e-2] in
/// double-double, where x lies on L_J off Δ_J and J is block `k`.
pub fn stratum_expansion(x: &[C64], part: &Partition, k: usize, v: &[C64]) -> Result<StratumExpansionReport> {
    let m = x.len();
    if part.m() != m || v.len() != m {
        return Err(Error::DimensionMismatch { expected: part.m(), got: x.len().max(v.len()) });
    }
    check_zero_average(x)?;
    check_zero_average(v)?;
    if part.stratum_defect(x) > 1e-12 {
        return Err(Error::InvalidArgument("point is not constant on the blocks".into()));
    }
    if part.len() >= 2 && part.block_separation(x) < 1e-8 {
        return Err(Error::OnSubstratum(part.to_string()));
    }
    if part.block(k).len() < 2 {
        return Err(Error::InvalidArgument("block must have at least two indices".into()));
    }
    let c = block_constant(x, part, k);
    let cd: CDd = c.into();
    let xd: Vec<CDd> = x.iter().map(|&z| z.into()).collect();
    let vd: Vec<CDd> = v.iter().map(|&z| z.into()).collect();
    let ts = log_ladder(1e-4, 1e-2, 9);
    let mut remainder = Vec::new();
    let mut estimate = C64::new(0.0, 0.0);
    let degenerate = part.project(v, k).iter().map(|z| z.norm()).fold(0.0, f64::max) < 1e-14;
    for (n, &t) in ts.iter().enumerate() {
        let td = CDd::from_f64(t);
        let y: Vec<CDd> = xd.iter().zip(&vd).map(|(&a, &b)| a + b * td).collect();
        let lhs = part.project(&koch_h_generic(&y), k);
        let tv: Vec<CDd> = vd.iter().map(|&b| b * td).collect();
        let hj = koch_h_generic(&part.project(&tv, k));
        let diff: Vec<CDd> = lhs.iter().zip(&hj).map(|(&a, &b)| a - b * cd).collect();
        remainder.push(norm_dd(&diff));
        if n == 0 && !degenerate {
            let mut num = CDd::zero();
            let mut den = 0.0;
            for (a, b) in lhs.iter().zip(&hj) {
                let bc: C64 = (*b).into();
                num += *a * CDd::from_c64(bc.conj());
                den += b.abs2();
            }
            estimate = num.to_c64() / den;
        }
    }
    let slope = if degenerate { f64::NAN } else { loglog_slope(&ts, &remainder) };
    let size = part.block(k).len();
    let expected_slope = (size + 2) as f64;
    Ok(StratumExpansionReport {
        schema: 1,
        partition: part.to_string(),
        block: k,
        block_size: size,
        c_j_analytic: [c.re, c.im],
        c_j_estimate: [estimate.re, estimate.im],
        t: ts,
        remainder,
        slope,
        expected_slope,
        degenerate,
        slope_ok: degenerate || slope >= size as f64 + 1.5,
    })
}

/// Matrix of D_yH restricted to L_J in the block-indicator basis.
fn restricted_jacobian_dd(part: &Partition, y: &[CDd]) -> Vec<Vec<CDd>> {
    let dh = koch_dh_generic(y);
    let basis: Vec<Vec<CDd>> = part.tangent_basis();
    let m = y.len();
    let cols: Vec<Vec<CDd>> = basis
        .iter()
        .map(|u| {
            let w: Vec<CDd> = (0..m)
                .map(|i| {
                    let mut s = CDd::zero();
                    for l in 0..m {
                        s += dh[i][l] * u[l];
                    }
                    s
                })
                .collect();
            part.tangent_coords(&w)
        })
        .collect();
    let d = basis.len();
    (0..d).map(|r| (0..d).map(|c| cols[c][r]).collect()).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct CriticalOrderReport {
    pub schema: u32,
    pub partition: String,
    pub merged: [usize; 2],
    pub expected_order: usize,
    pub t: Vec<f64>,
    pub abs_det: Vec<f64>,
    pub slope: f64,
    pub passed: bool,
}

/// Vanishing order of det Jac(H|L_J) along L_K, K = J with blocks a and b merged.
/// Expected |J_a| + |J_b|.
pub fn critical_order_check(part: &Partition, a: usize, b: usize, seed: u64) -> Result<CriticalOrderReport> {
    let merged = part.merge(a, b)?;
    let mut r = rng(seed);
    let x = merged.random_point(&mut r);
    let coeffs: Vec<CDd> = (0..part.len() - 1).map(|_| random_complex(&mut r, 1.0).into()).collect();
    let basis: Vec<Vec<CDd>> = part.tangent_basis();
    let m = part.m();
    let mut v = vec![CDd::zero(); m];
    for (c, u) in coeffs.iter().zip(&basis) {
        for i in 0..m {
            v[i] += *c * u[i];
        }
    }
    let xd: Vec<CDd> = x.iter().map(|&z| z.into()).collect();
    let ts = log_ladder(1e-6, 1e-3, 7);
    let abs_det: Vec<f64> = ts
        .iter()
        .map(|&t| {
            let td = CDd::from_f64(t);
            let y: Vec<CDd> = xd.iter().zip(&v).map(|(&p, &q)| p + q * td).collect();
            det_generic(restricted_jacobian_dd(part, &y)).abs2().sqrt()
        })
        .collect();
    let slope = loglog_slope(&ts, &abs_det);
    let expected_order = part.block(a).len() + part.block(b).len();
    Ok(CriticalOrderReport {
        schema: 1,
        partition: part.to_string(),
        merged: [a, b],
        expected_order,
        t: ts,
        abs_det,
        slope,
        passed: (slope - expected_order as f64).abs() <= 0.05,
    })
}

/// Sum of the merge orders over all pairs, and the degree of det Jac(H|L_J).
pub fn degree_audit(part: &Partition) -> (usize, usize) {
    let s = part.sizes();
    let mut total = 0;
    for a in 0..s.len() {
        for b in a + 1..s.len() {
            total += s[a] + s[b];
        }
    }
    (total, part.stratum_dim() * part.m())
}

/// A fixed point of H on L_J off Δ_J, by Newton from random starts.
pub fn stratum_fixed_point(part: &Partition, seed: u64) -> Result<Vec<C64>> {
    if part.len() < 2 {
        return Err(Error::InvalidArgument("stratum is the origin".into()));
    }
    let basis: Vec<Vec<C64>> = part.tangent_basis();
    let d = basis.len();
    let m = part.m();
    let mut r = rng(seed);
    let embed = |c: &[C64]| -> Vec<C64> {
        let mut x = vec![C64::new(0.0, 0.0); m];
        for (ck, u) in c.iter().zip(&basis) {
            for i in 0..m {
                x[i] += ck * u[i];
            }
        }
        x
    };
    for _ in 0..500 {
        let mut c: Vec<C64> = (0..d).map(|_| random_complex(&mut r, 1.0)).collect();
        for _ in 0..100 {
            let x = embed(&c);
            let hx = koch_h_generic(&x);
            let g: Vec<C64> = part.tangent_coords(&hx.iter().zip(&x).map(|(a, b)| a - b).collect::<Vec<_>>());
            let dh = koch_dh(&x);
            let a = DMatrix::from_fn(d, d, |row, col| {
                let w: Vec<C64> = (0..m).map(|i| (0..m).map(|l| dh[(i, l)] * basis[col][l]).sum()).collect();
                part.tangent_coords(&w)[row] - if row == col { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) }
            });
            let Some(step) = a.lu().solve(&nalgebra::DVector::from_vec(g.clone())) else { break };
            for k in 0..d {
                c[k] -= step[k];
            }
            if step.norm() < 1e-15 * (1.0 + crate::algebra::norm(&c)) {
                break;
            }
        }
        let x = embed(&c);
        if crate::algebra::norm(&x) > 1e-6 && fixed_point_residual(&x) < 1e-12 && part.block_separation(&x) > 1e-6 {
            return Ok(x);
        }
    }
    Err(Error::RootsNotConverged { iterations: 500, residual: f64::NAN, partial: Vec::new() })
}

#[derive(Debug, Clone, Serialize)]
pub struct SuperSaddleReport {
    pub schema: u32,
    pub partition: String,
    pub rank: usize,
    pub expected_rank: usize,
    pub kernel_dim: usize,
    /// ‖(I − P_L) D_xH‖ / ‖D_xH‖ on E
    pub image_defect: f64,
    /// smallest principal angle between Ker D_xH and T_xL_J
    pub kernel_angle: f64,
    pub restricted_eigenvalues: Vec<[f64; 2]>,
    pub min_restricted_modulus: f64,
    pub passed: bool,
}

pub fn super_saddle_report(x: &[C64]) -> Result<SuperSaddleReport> {
    check_zero_average(x)?;
    let res = fixed_point_residual(x);
    if res > 1e-8 {
        return Err(Error::NotFixed(res));
    }
    let m = x.len();
    let part = Partition::from_point(x, 1e-8);
    let qe = to_complex(&helmert(m));
    let dh = koch_dh(x);
    let img = &dh * &qe;
    let me = qe.adjoint() * &img;
    let svd = me.clone().svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let tol = 1e-8 * smax.max(1e-300);
    let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
    let ql = part.orthonormal_basis();
    let pl = &ql * ql.adjoint();
    let image_defect = (&img - &pl * &img).norm() / img.norm().max(1e-300);
    let vt = svd.v_t.expect("requested");
    let kernel: Vec<usize> = (0..svd.singular_values.len()).filter(|&i| svd.singular_values[i] <= tol).collect();
    let kernel_angle = if kernel.is_empty() || ql.ncols() == 0 {
        std::f64::consts::FRAC_PI_2
    } else {
        let kb = DMatrix::from_fn(m - 1, kernel.len(), |r, c| vt[(kernel[c], r)].conj());
        let k_amb = &qe * kb;
        let cross = k_amb.adjoint() * &ql;
        let cmax = cross.svd(false, false).singular_values.iter().cloned().fold(0.0, f64::max);
        cmax.min(1.0).acos()
    };
    let restricted = ql.adjoint() * &dh * &ql;
    let ev = eigenvalues(&restricted);
    let min_restricted_modulus = ev.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
    let expected_rank = part.stratum_dim();
    let passed = rank == expected_rank && image_defect < 1e-8 && kernel_angle > 1e-6 && min_restricted_modulus > 1.0;
    Ok(SuperSaddleReport {
        schema: 1,
        partition: part.to_string(),
        rank,
        expected_rank,
        kernel_dim: m - 1 - rank,
        image_defect,
        kernel_angle,
        restricted_eigenvalues: ev.iter().map(|z| [z.re, z.im]).collect(),
        min_restricted_modulus,
        passed,
    })
}
