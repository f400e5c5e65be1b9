use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type C64 = Complex64;

const PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Radical inverse of `i` in base `b`.
pub fn halton(mut i: u64, b: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    let inv = 1.0 / b as f64;
    while i > 0 {
        f *= inv;
        r += f * (i % b) as f64;
        i /= b;
    }
    r
}

/// Point `i` of the Halton sequence in `[0,1)^dim` (dim ≤ 16), skipping index 0.
pub fn halton_point(i: u64, dim: usize) -> Vec<f64> {
    (0..dim).map(|d| halton(i + 1, PRIMES[d])).collect()
}

/// Area-uniform low-discrepancy points in the disc of radius `r`.
pub fn halton_disc(n: usize, r: f64) -> Vec<C64> {
    (0..n as u64)
        .map(|i| {
            let u = halton(i + 1, 2);
            let t = halton(i + 1, 3);
            C64::from_polar(r * u.sqrt(), 2.0 * std::f64::consts::PI * t)
        })
        .collect()
}

/// Low-discrepancy points on the unit sphere of C^m (cube points pushed to the sphere).
pub fn halton_sphere(n: usize, m: usize) -> Vec<Vec<C64>> {
    let mut out = Vec::with_capacity(n);
    let mut i = 0u64;
    while out.len() < n {
        let p = halton_point(i, 2 * m);
        i += 1;
        let v: Vec<C64> = (0..m).map(|k| C64::new(2.0 * p[2 * k] - 1.0, 2.0 * p[2 * k + 1] - 1.0)).collect();
        let nv = super::block::norm(&v);
        if nv < 1e-3 {
            continue;
        }
        out.push(v.into_iter().map(|z| z / nv).collect());
    }
    out
}

pub fn gaussian<R: Rng>(rng: &mut R) -> f64 {
    let u1: f64 = rng.random::<f64>().max(1e-300);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Uniformly random direction in C^m.
pub fn random_unit<R: Rng>(rng: &mut R, m: usize) -> Vec<C64> {
    loop {
        let v: Vec<C64> = (0..m).map(|_| C64::new(gaussian(rng), gaussian(rng))).collect();
        let n = super::block::norm(&v);
        if n > 1e-12 {
            return v.into_iter().map(|z| z / n).collect();
        }
    }
}

/// Uniformly random point in the ball of radius `r` in C^m.
pub fn random_ball<R: Rng>(rng: &mut R, m: usize, r: f64) -> Vec<C64> {
    let u: f64 = rng.random();
    let s = r * u.powf(1.0 / (2 * m) as f64);
    random_unit(rng, m).into_iter().map(|z| z * s).collect()
}

pub fn random_complex<R: Rng>(rng: &mut R, scale: f64) -> C64 {
    C64::new(rng.random_range(-scale..scale), rng.random_range(-scale..scale))
}
