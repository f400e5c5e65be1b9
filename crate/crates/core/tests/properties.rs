//! Algebraic and analytic invariants as property tests over seeds and samples.

use bottcher_core::algebra::sampling::{random_ball, random_unit, rng};
use bottcher_core::algebra::{dist, norm, BlockStructure, BlockVector, PolyMap, SparsePoly};
use bottcher_core::bottcher1d::{bottcher_series, conjugacy_residual, Germ1D};
use bottcher_core::corpus::{non_examples, random_quasihomogeneous};
use bottcher_core::green::{green_homogeneous, GreenEvaluator, GreenLevel};
use bottcher_core::koch::{koch_h, Partition};
use bottcher_core::quasihom::{check_nondegenerate, euler_residual, extract_quasihomogeneous_part, QuasihomogeneousMap};
use bottcher_core::render::ImageBuffer;
use num_complex::Complex64;
use proptest::prelude::*;

type C64 = Complex64;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Random quasihomogeneous map plus a few random monomials of degree 2..=4.
fn perturbed_map(seed: u64) -> PolyMap {
    let mut r = rng(seed);
    let (h, blocks) = random_quasihomogeneous(&mut r, 4, 5).unwrap();
    let m = blocks.m();
    let coords: Vec<SparsePoly> = h
        .coords()
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let e: Vec<u32> = (0..m).map(|k| ((seed as usize + i + k) % 3) as u32).collect();
            let extra = SparsePoly::from_terms(m, [(e, c(0.3, -0.2))]).unwrap();
            p.add(&extra)
        })
        .collect();
    PolyMap::self_map(blocks.without_degrees(), coords).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn jacobian_matches_central_differences(seed in 0u64..10_000) {
        let f = perturbed_map(seed);
        let m = f.input().m();
        let mut r = rng(seed ^ 0x55);
        let v = random_ball(&mut r, m, 1.0);
        let j = f.jacobian_slice(&v);
        let h = 1e-6;
        let mut err: f64 = 0.0;
        for k in 0..m {
            let mut vp = v.clone();
            let mut vm = v.clone();
            vp[k] += h;
            vm[k] -= h;
            let (fp, fm) = (f.eval_slice(&vp), f.eval_slice(&vm));
            for i in 0..m {
                let fd = (fp[i] - fm[i]) / (2.0 * h);
                err = err.max((fd - j[(i, k)]).norm() / j[(i, k)].norm().max(1.0));
            }
        }
        prop_assert!(err <= 1e-5, "relative error {err:e}");
    }

    #[test]
    fn composition_evaluates_as_nested_maps(seed in 0u64..10_000) {
        let f = perturbed_map(seed);
        let g = perturbed_map(seed);
        let fg = f.compose(&g, None).unwrap();
        let mut r = rng(seed + 1);
        let v = random_ball(&mut r, f.input().m(), 0.8);
        let direct = f.eval_slice(&g.eval_slice(&v));
        let composed = fg.eval_slice(&v);
        prop_assert!(dist(&direct, &composed) <= 1e-10 * norm(&direct).max(1.0));
    }

    #[test]
    fn projections_partition_a_vector(seed in 0u64..10_000) {
        let mut r = rng(seed);
        let (_, blocks) = random_quasihomogeneous(&mut r, 4, 3).unwrap();
        let v = BlockVector::new(random_unit(&mut r, blocks.m()), blocks.clone()).unwrap();
        let mut sum = vec![c(0.0, 0.0); blocks.m()];
        for j in 0..blocks.p() {
            let pj = v.project(j);
            let twice = pj.project(j);
            prop_assert_eq!(twice.coords(), pj.coords());
            for i in (0..blocks.p()).filter(|&i| i != j) {
                prop_assert!(pj.project(i).coords().iter().all(|z| *z == c(0.0, 0.0)));
            }
            for (s, z) in sum.iter_mut().zip(pj.coords()) {
                *s += z;
            }
        }
        prop_assert_eq!(&sum[..], v.coords());
    }

    #[test]
    fn extraction_recovers_random_quasihomogeneous_maps(seed in 0u64..10_000) {
        let mut r = rng(seed);
        let (h, blocks) = random_quasihomogeneous(&mut r, 4, 5).unwrap();
        let germ = extract_quasihomogeneous_part(&h, &blocks.without_degrees()).unwrap();
        prop_assert!(germ.adapted());
        prop_assert_eq!(germ.degrees(), blocks.degrees().unwrap());
        prop_assert!(germ.h.assemble().sub(&h).unwrap().is_zero());
    }

    #[test]
    fn euler_defect_is_linear_in_scalar_multiples(idx in 0usize..3, seed in 0u64..1000) {
        let ne = &non_examples().unwrap()[idx];
        let base = euler_residual(&ne.map, &ne.blocks, 30, seed);
        for lambda in [c(2.0, 0.0), c(0.0, 1.0)] {
            let scaled = euler_residual(&ne.map.scale(lambda), &ne.blocks, 30, seed);
            for (a, b) in scaled.iter().zip(&base) {
                prop_assert!((a - lambda.norm() * b).abs() <= 1e-12 * b.max(1.0));
            }
        }
    }

    #[test]
    fn green_is_log_homogeneous(seed in 0u64..10_000) {
        let mut r = rng(seed);
        let (h, blocks) = random_quasihomogeneous(&mut r, 3, 4).unwrap();
        let Ok(qh) = QuasihomogeneousMap::from_polymap(&h, &blocks) else { return Ok(()) };
        if !check_nondegenerate(&h).is_nondegenerate() {
            return Ok(());
        }
        let v = random_unit(&mut r, blocks.m());
        let g0 = green_homogeneous(&qh, &v).unwrap();
        for lambda in [c(2.0, 0.0), c(1.0 / 3.0, 0.0), c(0.0, 1.0)] {
            let w: Vec<C64> = v.iter().map(|z| z * lambda).collect();
            let g1 = green_homogeneous(&qh, &w).unwrap();
            for (a, b) in g1.per_block.iter().zip(&g0.per_block) {
                match (a, b) {
                    (GreenLevel::Finite(a), GreenLevel::Finite(b)) => {
                        prop_assert!((a - b - lambda.norm().ln()).abs() <= 1e-10, "{a} {b}");
                    }
                    (a, b) => prop_assert_eq!(a, b),
                }
            }
        }
    }

    #[test]
    fn green_of_f_is_max_over_blocks(seed in 0u64..10_000) {
        let germ = &bottcher_core::corpus::adapted_germs().unwrap()[(seed % 6) as usize].germ;
        let ev = GreenEvaluator::for_germ(germ);
        let mut r = rng(seed);
        let v = random_ball(&mut r, germ.blocks().m(), 0.3);
        if let Ok(g) = ev.evaluate(&v) {
            let max = g.per_block.iter().copied().fold(GreenLevel::MinusInfinity, GreenLevel::max);
            prop_assert_eq!(g.g_f, max);
        }
    }

    #[test]
    fn koch_map_is_homogeneous_and_keeps_strata(m in 2usize..=5, seed in 0u64..10_000) {
        let parts = Partition::all(m);
        let part = &parts[seed as usize % parts.len()];
        let mut r = rng(seed);
        let mut x = part.random_point(&mut r);
        let mean = x.iter().sum::<C64>() / m as f64;
        x.iter_mut().for_each(|z| *z -= mean);
        let hx = koch_h(&x).unwrap();
        let scale = norm(&hx).max(1.0);
        prop_assert!(part.stratum_defect(&hx) <= 1e-12 * scale);
        for lambda in [c(2.0, 0.0), c(0.0, 1.0), c(0.3, 0.4)] {
            let y: Vec<C64> = x.iter().map(|z| z * lambda).collect();
            let hy = koch_h(&y).unwrap();
            let expect: Vec<C64> = hx.iter().map(|z| z * lambda.powu(m as u32 + 1)).collect();
            prop_assert!(dist(&hy, &expect) <= 1e-12 * norm(&expect).max(1.0));
        }
    }

    #[test]
    fn ppm_round_trips(w in 1usize..40, h in 1usize..40, seed in 0u64..1000) {
        let img = ImageBuffer::from_fn(w, h, |i, j| {
            let s = (i * 31 + j * 17) as u64 ^ seed;
            [(s % 256) as u8, ((s >> 3) % 256) as u8, ((s >> 5) % 256) as u8]
        });
        let bytes = img.to_ppm();
        let header = format!("P6\n{} {}\n255\n", w, h);
        prop_assert!(bytes.starts_with(header.as_bytes()));
        let back = ImageBuffer::read_ppm(&mut &bytes[..]).unwrap();
        prop_assert_eq!(back, img);
    }
}

fn germ1d(coeffs: &[f64]) -> Germ1D {
    Germ1D::from_coeffs(&coeffs.iter().map(|&x| c(x, 0.0)).collect::<Vec<_>>()).unwrap()
}

fn circle(r: f64, n: usize) -> Vec<C64> {
    (0..n).map(|i| C64::from_polar(r, std::f64::consts::TAU * i as f64 / n as f64 + 0.1)).collect()
}

/// The exact coordinate is at roundoff, so the decay rate is measured on the
/// two-term series φ(z) = z + c_2 z², whose residual is O(r^{k+2}).
#[test]
fn truncated_coordinate_residual_decays_faster_than_r_to_k() {
    for coeffs in [&[0.0, 0.0, 1.0, 1.0][..], &[0.0, 0.0, 3.0, 0.0, 1.0][..], &[0.0, 0.0, 0.0, 2.0, 1.0][..]] {
        let f = germ1d(coeffs);
        let phi = bottcher_series(&f, 2);
        let k = f.k() as i32;
        let sup = |r: f64| {
            circle(r, 64)
                .into_iter()
                .map(|z| (phi.eval(f.eval(z)) - f.a() * phi.eval(z).powi(k)).norm())
                .fold(0.0, f64::max)
        };
        let (r0, r1) = (1e-3, 1e-1);
        let slope = (sup(r1).ln() - sup(r0).ln()) / (r1 / r0).ln();
        assert!(slope >= k as f64 + 0.5, "{coeffs:?}: slope {slope}");
        let exact = conjugacy_residual(&f, &circle(0.05, 64)).unwrap();
        assert!(exact <= 1e-9, "{coeffs:?}: {exact:e}");
    }
}

#[test]
fn non_examples_have_visible_euler_defect() {
    for ne in non_examples().unwrap() {
        let res = euler_residual(&ne.map, &ne.blocks, 200, 7);
        assert!(res.iter().copied().fold(0.0, f64::max) >= 1e-2, "{}: {res:?}", ne.name);
    }
    let sq = BlockStructure::new(vec![1]).unwrap();
    let z2 = PolyMap::self_map(sq.clone(), vec![SparsePoly::from_terms(1, [(vec![2], c(1.0, 0.0))]).unwrap()]).unwrap();
    assert!(euler_residual(&z2, &sq, 50, 1)[0] <= 1e-14);
}
