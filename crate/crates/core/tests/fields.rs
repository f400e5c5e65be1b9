//! Vector-field, flow and coordinate invariants on the reference germs.

use bottcher_core::algebra::sampling::{random_unit, rng};
use bottcher_core::algebra::{dist, norm, BlockStructure, PolyMap, SelfMap, SparsePoly};
use bottcher_core::bottcher1d::{bottcher_eval, Germ1D};
use bottcher_core::corpus::{adapted_germs, non_examples};
use bottcher_core::algebra::linalg::hadamard_ratio;
use bottcher_core::fields::{
    basin_samples, conjugacy_report, flow, linearize_poincare, local_bottcher, sublevel_samples, BottcherCoordinate,
    FlowIntegrator, VectorField, HORIZONS, PULLBACK_CUTOFF,
};
use bottcher_core::koch::chart_germ;
use bottcher_core::quasihom::{extract_quasihomogeneous_part, AdaptedGerm};
use num_complex::Complex64;
use proptest::prelude::*;

type C64 = Complex64;

fn chart_coordinate(partition: &str, n: usize) -> BottcherCoordinate {
    let germ = chart_germ(&partition.parse().unwrap()).unwrap().germ;
    local_bottcher(&germ, VectorField::block_fields(germ.blocks()), n).unwrap()
}

fn patch(coord: &BottcherCoordinate, count: usize, seed: u64) -> Vec<Vec<C64>> {
    let pts = sublevel_samples(coord.green(), count, 0.05, seed);
    assert_eq!(pts.len(), count, "sublevel patch undersampled");
    pts
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn flow_is_additive_in_time(s in -1.5f64..0.0, t in -1.5f64..0.0, seed in 0u64..1000) {
        let coord = chart_coordinate(if seed % 2 == 0 { "1,2,3|4" } else { "1,2|3,4" }, 4);
        let v = &patch(&coord, 1, seed)[0];
        let xi = coord.field();
        let two_steps = flow(xi, &flow(xi, v, s).unwrap().value, t).unwrap().value;
        let one_step = flow(xi, v, s + t).unwrap().value;
        prop_assert!(dist(&two_steps, &one_step) <= 1e-8 * norm(&one_step));
    }
}

/// G_F ∘ F_t = G_F + t along the backward flow of the admissible sum field,
/// from basin points well outside the sublevel patch.
#[test]
fn green_shifts_by_flow_time() {
    for part in ["1,2,3|4", "1,2|3,4"] {
        let coord = chart_coordinate(part, 6);
        let ev = coord.green();
        let pts = basin_samples(ev, 20, 1.5, -3.0, -0.5, 4);
        assert_eq!(pts.len(), 20);
        let mut worst: f64 = 0.0;
        for v in &pts {
            let g0 = ev.evaluate(v).unwrap().g_f.value().unwrap();
            for t in [-0.3, -1.0, -2.5] {
                let y = flow(coord.field(), v, t).unwrap().value;
                let g1 = ev.evaluate(&y).unwrap().g_f.value().unwrap();
                worst = worst.max((g1 - g0 - t).abs());
            }
        }
        assert!(worst <= 1e-7, "{part}: {worst:e}");
    }
}

/// Smallest Hadamard ratio of DF along the first n orbit points, over
/// checkpoints of the backward flow from v.
fn trajectory_clearance(coord: &BottcherCoordinate, v: &[C64]) -> f64 {
    let germ = coord.germ();
    let integ = FlowIntegrator::default().scaled_to(norm(v));
    let mut x = v.to_vec();
    let mut worst: f64 = 1.0;
    for _ in 0..40 {
        x = integ.integrate(|_, y| coord.field().eval(y), &x, 0.0, -0.25).unwrap().value;
        let mut u = x.clone();
        for _ in 0..coord.n() {
            if norm(&u) < PULLBACK_CUTOFF {
                break;
            }
            worst = worst.min(hadamard_ratio(&germ.jac(&u)));
            u = germ.apply(&u);
        }
    }
    worst
}

/// DΦ·ζ = Φ: Φ linearizes the admissible sum field to the radial field.
/// Interior points are patch points whose backward trajectory keeps DF's
/// Hadamard ratio above 1e-2; closer to the critical set the chain solves
/// lose about 1e-16/ratio and finite differences only see that noise.
#[test]
fn coordinate_linearizes_the_sum_field() {
    for part in ["1,2,3|4", "1,2|3,4"] {
        let coord = chart_coordinate(part, 6);
        let xi = coord.field();
        let interior: Vec<_> =
            patch(&coord, 80, 11).into_iter().filter(|v| trajectory_clearance(&coord, v) >= 1e-2).take(50).collect();
        assert_eq!(interior.len(), 50, "{part}: too few interior points");
        let phi = |x: &[C64]| linearize_poincare(xi, x, -HORIZONS[HORIZONS.len() - 1]).unwrap();
        let mut worst: f64 = 0.0;
        for v in interior {
            let z = xi.eval(&v).unwrap();
            let h = 1e-5;
            let shift = |s: f64| -> Vec<C64> { v.iter().zip(&z).map(|(a, b)| a + b * s).collect() };
            let (pp, pm, p0) = (phi(&shift(h)), phi(&shift(-h)), phi(&v));
            let d: Vec<C64> = pp.iter().zip(&pm).map(|(a, b)| (a - b) / (2.0 * h)).collect();
            worst = worst.max(dist(&d, &p0) / norm(&p0));
        }
        assert!(worst <= 1e-6, "{part}: {worst:e}");
    }
}

/// For a product of one-variable germs the field-built coordinate must equal
/// the product of the classical coordinates.
#[test]
fn coordinate_is_unique_for_product_germs() {
    let blocks = BlockStructure::new(vec![1, 1]).unwrap();
    let p = |t: &[([u32; 2], f64)]| {
        SparsePoly::from_terms(2, t.iter().map(|(e, c)| (e.to_vec(), C64::new(*c, 0.0)))).unwrap()
    };
    let f = PolyMap::self_map(
        blocks.clone(),
        vec![p(&[([2, 0], 2.0), ([3, 0], 1.0)]), p(&[([0, 3], 3.0), ([0, 4], 1.0)])],
    )
    .unwrap();
    let germ = extract_quasihomogeneous_part(&f, &blocks).unwrap();
    let coord = local_bottcher(&germ, VectorField::block_fields(germ.blocks()), 6).unwrap();
    let re = |c: &[f64]| c.iter().map(|&x| C64::new(x, 0.0)).collect::<Vec<_>>();
    let f1 = Germ1D::from_coeffs(&re(&[0.0, 0.0, 2.0, 1.0])).unwrap();
    let f2 = Germ1D::from_coeffs(&re(&[0.0, 0.0, 0.0, 3.0, 1.0])).unwrap();
    let mut worst: f64 = 0.0;
    for v in patch(&coord, 50, 9) {
        let a = coord.eval(&v).unwrap();
        let b = [bottcher_eval(&f1, v[0]).unwrap(), bottcher_eval(&f2, v[1]).unwrap()];
        worst = worst.max(dist(&a, &b) / norm(&v));
    }
    assert!(worst <= 1e-5, "{worst:e}");
}

/// Points are drawn from the patch and kept only where the deepest field in
/// the comparison (level 9) clears the critical-proximity guard.
#[test]
fn cauchy_increments_decay_on_corpus_germs() {
    for g in adapted_germs().unwrap() {
        let coord = local_bottcher(&g.germ, VectorField::block_fields(g.germ.blocks()), 8).unwrap();
        let deepest = coord.at_level(9).unwrap();
        let pts: Vec<_> = sublevel_samples(coord.green(), 40, 0.05, 3)
            .into_iter()
            .filter(|v| deepest.field().eval(v).is_ok())
            .take(30)
            .collect();
        assert!(pts.len() >= 20, "{}: {} samples", g.name, pts.len());
        let rep = conjugacy_report(&coord, 2..=8, &pts).unwrap();
        assert!(rep.cauchy_monotone, "{}: {:?}", g.name, rep.rows.iter().map(|r| r.cauchy).collect::<Vec<_>>());
    }
}

/// Sup of ‖F_j(v) − H_j(v_j)‖ / (‖v‖·‖v_j‖^{k_j}) along v_j = ε^s u_j, v^⊤ = ε u^⊤.
fn remainder_ratio(germ: &AdaptedGerm, j: usize, s: f64, eps: f64, seed: u64) -> f64 {
    let blocks = germ.blocks();
    let range = blocks.range(j);
    let k = germ.degrees()[j] as i32;
    let mut r = rng(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let u = random_unit(&mut r, blocks.m());
        let v: Vec<C64> =
            u.iter().enumerate().map(|(i, z)| z * if range.contains(&i) { eps.powf(s) } else { eps }).collect();
        let fv = germ.apply(&v);
        let hv = germ.h.eval_factor(j, &v[range.clone()]);
        let diff: f64 = range.clone().zip(&hv).map(|(i, h)| (fv[i] - h).norm_sqr()).sum::<f64>().sqrt();
        let vj = norm(&v[range.clone()]);
        worst = worst.max(diff / (norm(&v) * vj.powi(k)));
    }
    worst
}

#[test]
fn adaptedness_matches_the_remainder_bound() {
    let regimes = [0.5, 1.0, 2.0, 4.0];
    let growth = |germ: &AdaptedGerm, j: usize, s: f64| {
        let big = remainder_ratio(germ, j, s, 1e-1, 5);
        let small = remainder_ratio(germ, j, s, 1e-3, 5);
        small / big.max(1e-300)
    };
    for g in adapted_germs().unwrap() {
        let b = g.germ.blocks();
        for j in (0..b.p()).filter(|&j| !b.range(j).is_empty()) {
            for s in regimes {
                let small = remainder_ratio(&g.germ, j, s, 1e-3, 5);
                let big = remainder_ratio(&g.germ, j, s, 1e-1, 5);
                assert!(small <= 10.0 * big.max(1.0), "{} block {j} s={s}: {big:e} -> {small:e}", g.name);
            }
        }
    }
    for ne in non_examples().unwrap() {
        let germ = extract_quasihomogeneous_part(&ne.map, &ne.blocks).unwrap();
        assert!(!germ.adapted(), "{}", ne.name);
        let blows_up = (0..ne.blocks.p()).any(|j| regimes.iter().any(|&s| growth(&germ, j, s) > 1e3));
        assert!(blows_up, "{}", ne.name);
    }
}
