//! The ten acceptance criteria. Each prints one `criterion N: PASS|FAIL` line;
//! the process exits nonzero when any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use bottcher_core::algebra::sampling::{random_ball, random_complex, rng};
use bottcher_core::bottcher1d::{bottcher_eval, bottcher_series, conjugacy_residual, Germ1D};
use bottcher_core::cli::demo::{non_adapted_map, non_adapted_report, composition_report};
use bottcher_core::corpus::{adapted_germs, non_examples, random_quasihomogeneous};
use bottcher_core::fields::{
    basin_samples, conjugacy_report, global_report, local_bottcher, sublevel_samples, BottcherCoordinate,
    VectorField,
};
use bottcher_core::green::{convergence_slope, green_adapted, GreenEvaluator};
use bottcher_core::koch::{
    chart_germ, critical_order_check, degree_audit, factorial, koch_fixed_points, koch_spectrum,
    pushforward_matrix, stratum_fixed_point, Partition, QuadraticDifferential,
};
use bottcher_core::quasihom::euler_residual;
use bottcher_core::render::fig3::{fig3_default_config, fig3_overlay, render_fig3, OVERLAY_LEVEL};
use bottcher_core::render::{fig2_symmetry, render_fig2, RenderConfig};
use num_complex::Complex64;

type C64 = Complex64;
type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit_s: u64) -> Result<(), String> {
    ensure(elapsed <= Duration::from_secs(limit_s), || format!("runtime {:.1}s exceeds {limit_s}s", elapsed.as_secs_f64()))
}

fn germ1d(coeffs: &[f64]) -> Germ1D {
    Germ1D::from_coeffs(&coeffs.iter().map(|&x| C64::new(x, 0.0)).collect::<Vec<_>>()).unwrap()
}

fn criterion_1() -> Check {
    let start = Instant::now();
    let mut worst_res: f64 = 0.0;
    let mut worst_gap: f64 = 0.0;
    for coeffs in [&[0.0, 0.0, 1.0, 1.0][..], &[0.0, 0.0, 3.0, 0.0, 1.0][..]] {
        let f = germ1d(coeffs);
        let mut r = rng(1);
        let pts: Vec<C64> = (0..100).map(|_| random_ball(&mut r, 1, 0.05)[0]).collect();
        worst_res = worst_res.max(conjugacy_residual(&f, &pts).map_err(|e| e.to_string())?);
        let series = bottcher_series(&f, 40);
        for &z in &pts {
            let limit = bottcher_eval(&f, z).map_err(|e| e.to_string())?;
            worst_gap = worst_gap.max((series.eval(z) - limit).norm());
        }
    }
    let elapsed = start.elapsed();
    ensure(worst_res <= 1e-9, || format!("conjugacy residual {worst_res:e}"))?;
    ensure(worst_gap <= 1e-9, || format!("series vs limit {worst_gap:e}"))?;
    within(elapsed, 1)?;
    Ok(format!("residual {worst_res:.1e}, series vs limit {worst_gap:.1e}"))
}

fn criterion_2() -> Check {
    let start = Instant::now();
    let mut r = rng(2);
    let mut worst: f64 = 0.0;
    for seed in 0..50 {
        let (h, blocks) = random_quasihomogeneous(&mut r, 4, 5).map_err(|e| e.to_string())?;
        worst = worst.max(euler_residual(&h, &blocks, 50, seed).into_iter().fold(0.0, f64::max));
    }
    let mut weakest = f64::INFINITY;
    let mut non = non_examples().map_err(|e| e.to_string())?;
    let ex1 = non_adapted_map();
    let ex1_blocks = ex1.input().clone();
    non.push(bottcher_core::corpus::NonExample { name: "x2+y3,y2 demo", map: ex1, blocks: ex1_blocks });
    for ne in &non {
        let d = euler_residual(&ne.map, &ne.blocks, 200, 7).into_iter().fold(0.0, f64::max);
        ensure(d >= 1e-2, || format!("{} has Euler residual {d:e}", ne.name))?;
        weakest = weakest.min(d);
    }
    let elapsed = start.elapsed();
    ensure(worst <= 1e-11, || format!("quasihomogeneous Euler residual {worst:e}"))?;
    within(elapsed, 5)?;
    Ok(format!("max over 50 maps {worst:.1e}, min over {} non-examples {weakest:.2}", non.len()))
}

fn criterion_3() -> Check {
    let start = Instant::now();
    let mut worst_slope: f64 = 0.0;
    let mut worst_res: f64 = 0.0;
    for g in adapted_germs().map_err(|e| e.to_string())? {
        let ev = GreenEvaluator::for_germ(&g.germ);
        let blocks = g.germ.blocks().clone();
        // the first increments carry the transient of the blocks' projective
        // dynamics, so the rate is fitted from n = 6 on
        let deep = ev.clone().with_tol(0.0).with_n_max(16);
        for v in basin_samples(&ev, 10, 1.0, -3.0, -0.5, 30) {
            let trace = deep.evaluate(&v).map_err(|e| e.to_string())?.trace;
            for j in (0..blocks.p()).filter(|&j| !blocks.range(j).is_empty()) {
                let expected = -(g.germ.degrees()[j] as f64).ln();
                let slope = convergence_slope(&trace, j, 6, 1e-12)
                    .ok_or_else(|| format!("{} block {j}: too few increments for a slope", g.name))?;
                ensure((slope - expected).abs() <= 0.1, || format!("{} block {j}: slope {slope:.3} vs {expected:.3}", g.name))?;
                worst_slope = worst_slope.max((slope - expected).abs());
            }
        }
        let pts = basin_samples(&ev, 200, 1.0, f64::NEG_INFINITY, -0.1, 31);
        ensure(pts.len() == 200, || format!("{}: only {} basin samples", g.name, pts.len()))?;
        for v in &pts {
            let res = green_adapted(&ev, v).map_err(|e| e.to_string())?.functional_residual.unwrap_or(f64::INFINITY);
            worst_res = worst_res.max(res);
        }
        ensure(worst_res <= 1e-8, || format!("{}: functional residual {worst_res:e}", g.name))?;
    }
    within(start.elapsed(), 10)?;
    Ok(format!("slope deviation {worst_slope:.3}, functional residual {worst_res:.1e}"))
}

fn criterion_4() -> Check {
    let start = Instant::now();
    let mut worst_eig: f64 = 0.0;
    for m in 2..=4 {
        let c = koch_fixed_points(m).map_err(|e| e.to_string())?;
        ensure(c.count == factorial(m) && c.all_distinct && c.off_diagonal, || {
            format!("m={m}: {} points (distinct {}, off diagonal {})", c.count, c.all_distinct, c.off_diagonal)
        })?;
        for x in c.points() {
            worst_eig = worst_eig.max(koch_spectrum(&x).map_err(|e| e.to_string())?.max_eigenvalue_error);
        }
    }
    ensure(worst_eig <= 1e-8, || format!("eigenvalue error {worst_eig:e}"))?;
    let poly = koch_fixed_points(5).map_err(|e| e.to_string())?.fixed_point_polynomial;
    let mut expected = vec![[0.0, 0.0]; 7];
    expected[1] = [1.2, 0.0];
    expected[6] = [1.0, 0.0];
    ensure(poly.len() == expected.len(), || format!("m=5 polynomial has {} coefficients", poly.len()))?;
    let coeff_err = poly.iter().zip(&expected).map(|(a, b)| (a[0] - b[0]).hypot(a[1] - b[1])).fold(0.0, f64::max);
    ensure(coeff_err <= 1e-12, || format!("m=5 polynomial off by {coeff_err:e}"))?;
    within(start.elapsed(), 10)?;
    Ok(format!("2!, 3!, 4! points, eigenvalue error {worst_eig:.1e}, m=5 coefficients {coeff_err:.1e}"))
}

fn criterion_5() -> Check {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut checks = 0;
    for (i, part) in Partition::all(4).into_iter().enumerate().filter(|(_, p)| p.len() >= 2) {
        let (sum, deg) = degree_audit(&part);
        ensure(sum == deg, || format!("{part}: order sum {sum} vs degree {deg}"))?;
        for a in 0..part.len() {
            for b in a + 1..part.len() {
                let rep = critical_order_check(&part, a, b, i as u64).map_err(|e| e.to_string())?;
                let dev = (rep.slope - rep.expected_order as f64).abs();
                ensure(dev <= 0.05, || format!("{part} merging {a},{b}: order {:.3} vs {}", rep.slope, rep.expected_order))?;
                worst = worst.max(dev);
                checks += 1;
            }
        }
    }
    within(start.elapsed(), 30)?;
    Ok(format!("{checks} merges, max order deviation {worst:.3}"))
}

fn criterion_6() -> Check {
    let start = Instant::now();
    let x2 = koch_fixed_points(2).map_err(|e| e.to_string())?.points()[0].clone();
    let z = pushforward_matrix(&x2, &[], 20000).map_err(|e| e.to_string())?.matrix[0][0];
    let scalar_err = (z[0] - 1.0 / 3.0).hypot(z[1]);
    ensure(scalar_err <= 1e-6, || format!("m=2 pushforward {z:?}"))?;
    let mut points = vec![
        koch_fixed_points(3).map_err(|e| e.to_string())?.points()[0].clone(),
        koch_fixed_points(4).map_err(|e| e.to_string())?.points()[0].clone(),
    ];
    for p in ["1,2|3,4", "1|2,3,4"] {
        points.push(stratum_fixed_point(&p.parse().map_err(|e: bottcher_core::Error| e.to_string())?, 0).map_err(|e| e.to_string())?);
    }
    let mut worst: f64 = 0.0;
    let mut rho: f64 = 0.0;
    for (i, x) in points.iter().enumerate() {
        let part = Partition::from_point(x, 1e-8);
        let poles: Vec<C64> = (0..part.len()).map(|k| part.value_on(x, k)).collect();
        let mut r = rng(60 + i as u64);
        let qs = (0..20)
            .map(|_| {
                let free: Vec<C64> = (0..part.stratum_dim()).map(|_| random_complex(&mut r, 1.0)).collect();
                QuadraticDifferential::from_free(poles.clone(), &free)
            })
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| e.to_string())?;
        let rep = pushforward_matrix(x, &qs, 20000).map_err(|e| e.to_string())?;
        ensure(rep.max_error <= 1e-6, || format!("{}: matrix error {:e}", rep.partition, rep.max_error))?;
        ensure(rep.spectral_radius < 1.0, || format!("{}: spectral radius {}", rep.partition, rep.spectral_radius))?;
        let contracted = rep.l1.iter().filter(|s| s.pushed_norm < s.norm).count();
        ensure(contracted == 20, || format!("{}: {contracted}/20 samples contracted in L1", rep.partition))?;
        worst = worst.max(rep.max_error);
        rho = rho.max(rep.spectral_radius);
    }
    within(start.elapsed(), 60)?;
    Ok(format!("m=2 value within {scalar_err:.1e}, matrix error {worst:.1e}, spectral radius ≤ {rho:.3}"))
}

fn chart_coordinate(partition: &str, n: usize) -> Result<BottcherCoordinate, String> {
    let part: Partition = partition.parse().map_err(|e: bottcher_core::Error| e.to_string())?;
    let germ = chart_germ(&part).map_err(|e| e.to_string())?.germ;
    local_bottcher(&germ, VectorField::block_fields(germ.blocks()), n).map_err(|e| e.to_string())
}

fn criterion_7() -> Check {
    let start = Instant::now();
    let mut summary = Vec::new();
    for part in ["1,2,3|4", "1,2|3,4"] {
        let coord = chart_coordinate(part, 6)?;
        // the comparison reaches Φ_7, so points are admitted by its field's guard
        let deepest = coord.at_level(7).map_err(|e| e.to_string())?;
        let candidates = sublevel_samples(coord.green(), 150, 0.05, 7);
        let total = candidates.len();
        let pts: Vec<_> = candidates.into_iter().filter(|v| deepest.field().eval(v).is_ok()).take(100).collect();
        ensure(pts.len() == 100, || format!("{part}: {} admitted of {total} patch points", pts.len()))?;
        let rep = conjugacy_report(&coord, 2..=6, &pts).map_err(|e| e.to_string())?;
        let res = rep.rows.last().map_or(f64::INFINITY, |r| r.residual);
        ensure(res <= 1e-6, || format!("{part}: residual {res:e}"))?;
        ensure(rep.d0_error <= 1e-5, || format!("{part}: D_0 error {:e}", rep.d0_error))?;
        ensure(rep.cauchy_monotone, || {
            format!("{part}: Cauchy increments {:?}", rep.rows.iter().map(|r| r.cauchy).collect::<Vec<_>>())
        })?;
        summary.push(format!("{part} residual {res:.1e}, D_0 {:.1e}", rep.d0_error));
    }
    within(start.elapsed(), 300)?;
    Ok(summary.join("; "))
}

fn criterion_8() -> Check {
    let start = Instant::now();
    let coord = chart_coordinate("1,2,3|4", 6)?;
    let ev = coord.green();
    let mut admitted = Vec::with_capacity(50);
    let mut refused = 0;
    for x in basin_samples(ev, 150, 1.5, -ev.m_threshold, -0.5, 8) {
        if admitted.len() == 50 {
            break;
        }
        if coord.field().eval(&x).is_ok() {
            admitted.push(x);
        } else {
            refused += 1;
        }
    }
    ensure(admitted.len() == 50, || format!("only {} guard-admitted deep points", admitted.len()))?;
    let spread = basin_samples(ev, 500, 1.5, f64::NEG_INFINITY, -0.5, 9);
    ensure(spread.len() == 500, || format!("only {} injectivity samples", spread.len()))?;
    let rep = global_report(&coord, &admitted, &spread);
    ensure(rep.refused == 0, || format!("{} of 50 extensions refused", rep.refused))?;
    ensure(rep.max_discrepancy <= 1e-6, || format!("backward-time discrepancy {:e}", rep.max_discrepancy))?;
    ensure(rep.max_residual <= 1e-5, || format!("global residual {:e}", rep.max_residual))?;
    ensure(rep.injectivity_violations == 0, || format!("{} injectivity violations", rep.injectivity_violations))?;
    within(start.elapsed(), 300)?;
    Ok(format!(
        "discrepancy {:.1e}, residual {:.1e}, {} injectivity points, {refused} candidates refused at x",
        rep.max_discrepancy, rep.max_residual, rep.injectivity_points
    ))
}

fn criterion_9() -> Check {
    let start = Instant::now();
    let fig2_cfg = RenderConfig { width: 2.6, pixels: [600, 600], ..RenderConfig::default() };
    let a = render_fig2(&fig2_cfg).map_err(|e| e.to_string())?;
    let b = render_fig2(&fig2_cfg).map_err(|e| e.to_string())?;
    ensure(a.to_ppm() == b.to_ppm(), || "fig2 renders differ".into())?;
    let sym = fig2_symmetry(&fig2_cfg).map_err(|e| e.to_string())?;
    ensure(sym.agreement >= 0.999, || format!("fig2 symmetry {:.5}", sym.agreement))?;
    let fig3_cfg = RenderConfig { pixels: [600, 600], ..fig3_default_config() };
    let (l1, r1) = render_fig3(&fig3_cfg).map_err(|e| e.to_string())?;
    let (l2, r2) = render_fig3(&fig3_cfg).map_err(|e| e.to_string())?;
    ensure(l1.to_ppm() == l2.to_ppm() && r1.to_ppm() == r2.to_ppm(), || "fig3 renders differ".into())?;
    let overlay = fig3_overlay(&fig3_cfg, OVERLAY_LEVEL).map_err(|e| e.to_string())?;
    ensure(overlay.agreement >= 0.99, || format!("fig3 overlay {:.5} of {} decided", overlay.agreement, overlay.decided))?;
    within(start.elapsed(), 120)?;
    Ok(format!("fig2 symmetry {:.5}, fig3 overlay {:.5} of {} decided", sym.agreement, overlay.agreement, overlay.decided))
}

fn criterion_10() -> Check {
    let ex1 = non_adapted_report().map_err(|e| e.to_string())?;
    ensure(!ex1.adaptedness.adapted, || "example 1 accepted as adapted".into())?;
    ensure(ex1.witnesses.iter().any(|w| w == "y^3 in coordinate 0"), || format!("witnesses {:?}", ex1.witnesses))?;
    let s4 = composition_report().map_err(|e| e.to_string())?;
    ensure(s4.composition == ["x^4 - 2x^2y^3", "y^4"], || format!("composition {:?}", s4.composition))?;
    ensure(s4.composition_matches, || "composition differs from the literal jet".into())?;
    ensure(s4.image_dimension == 1, || format!("image dimension {}", s4.image_dimension))?;
    Ok(format!("witness {:?}, F∘F = {:?}, image dimension {}", ex1.witnesses, s4.composition, s4.image_dimension))
}

fn main() {
    let criteria: [(&str, fn() -> Check); 10] = [
        ("one-variable conjugacy", criterion_1),
        ("Euler residual", criterion_2),
        ("Green functions", criterion_3),
        ("fixed-point census", criterion_4),
        ("merge-stratum orders", criterion_5),
        ("quadratic-differential pushforward", criterion_6),
        ("local coordinate at n=6", criterion_7),
        ("basin extension", criterion_8),
        ("figures", criterion_9),
        ("negative controls", criterion_10),
    ];
    let only: Option<usize> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|s| s.parse().ok());
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let n = i + 1;
        if only.is_some_and(|k| k != n) {
            continue;
        }
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("criterion {n}: PASS {name} ({detail}; {secs:.1}s)"),
            Err(why) => {
                failed += 1;
                println!("criterion {n}: FAIL {name} ({why}; {secs:.1}s)");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
