//! Acceptance criteria, one PASS/FAIL line each. Exits nonzero if any fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use needlet::frames::{
    dual_windows, needlet_analyze_family, needlet_synthesize, reference_window, spline_family,
    GridPolicy, ReferenceKind, SpectralWindow,
};
use needlet::grid::build_grid;
use needlet::linalg::eig_symmetric;
use needlet::mise::{
    coupling_matrix_master, mask_error_curve, mise_optimal_window, mise_value, pseudo_spectrum,
    q_matrix_axisym, q_matrix_mc, simulate_realization, unbiased_spectrum, MaskErrorMethod,
    MiseProblem, PowerSpectrum, WeightFunction, ZoneSegment, DEFAULT_APODIZATION,
};
use needlet::sht::{analyze, synthesize, HarmonicCoefficients};
use needlet::slepian::{
    concentration, coupling_matrix, lp_concentration, shannon_number, slepian_window,
    uncertainty_product, ConcentrationProblem, LpNorm,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = (bool, String);

fn deg(x: f64) -> f64 {
    x * PI / 180.0
}

fn white(lmax: usize) -> PowerSpectrum {
    PowerSpectrum::from_fn(lmax, |_| 1.0).unwrap()
}

fn red(lmax: usize) -> PowerSpectrum {
    PowerSpectrum::from_fn(lmax, |l| {
        let x = l.max(2) as f64;
        1.0 / (x * (x + 1.0))
    })
    .unwrap()
}

fn zone(start: f64, end: f64) -> ZoneSegment {
    ZoneSegment {
        theta_start: deg(start),
        theta_end: deg(end),
        value: 0.0,
    }
}

fn random_field(lmax: usize, index: u64) -> HarmonicCoefficients {
    simulate_realization(&white(lmax), 1234, index)
}

fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn quadrature_exactness() -> Outcome {
    let lmax = 64;
    let grid = Arc::new(build_grid(lmax));
    let w = grid.weights();
    let mut worst_ip = 0.0f64;
    for i in 0..50 {
        let a = random_field(lmax, 2 * i);
        let b = random_field(lmax, 2 * i + 1);
        let (x, y) = (synthesize(&a, &grid), synthesize(&b, &grid));
        let grid_ip: f64 = x.values().iter().zip(y.values()).zip(&w).map(|((p, q), l)| p * q * l).sum();
        let harm_ip = a.inner(&b);
        let scale = (a.norm_sqr() * b.norm_sqr()).sqrt();
        worst_ip = worst_ip.max((grid_ip - harm_ip).abs() / scale);
    }
    let mut worst_rt = 0.0f64;
    for i in 0..10 {
        let a = random_field(lmax, 1000 + i);
        let back = analyze(&synthesize(&a, &grid), lmax).unwrap();
        worst_rt = worst_rt.max(back.max_abs_diff(&a));
    }
    (
        worst_ip < 1e-10 && worst_rt < 1e-10,
        format!("inner-product rel err {worst_ip:.2e}, roundtrip max err {worst_rt:.2e}"),
    )
}

fn tight_frame() -> Outcome {
    let lmax = 128;
    let fam = spline_family(1.7, 7, 10).unwrap().sqrt().unwrap().truncate(lmax).unwrap();
    let duals = dual_windows(&fam).unwrap();
    let (mut defect, mut rec) = (0.0f64, 0.0f64);
    for i in 0..20 {
        let a = random_field(lmax, 2000 + i);
        let betas = needlet_analyze_family(&a, &fam, GridPolicy::Shared).unwrap();
        let energy: f64 = betas.iter().map(|b| b.energy()).sum();
        defect = defect.max((energy - a.norm_sqr()).abs() / a.norm_sqr());
        let back = needlet_synthesize(&betas, &duals).unwrap();
        rec = rec.max(back.max_abs_diff(&a));
    }
    (
        defect < 1e-8 && rec < 1e-8,
        format!("{} scales, Parseval defect {defect:.2e}, reconstruction err {rec:.2e}", fam.len()),
    )
}

fn dual_frame() -> Outcome {
    let lmax = 96;
    // h-windows themselves: Σ h² ≠ 1, so the frame is not tight.
    let fam = spline_family(2.0, 3, 7).unwrap().truncate(lmax).unwrap();
    let (lo, hi) = needlet::frames::frame_bounds(&fam).unwrap();
    let duals = dual_windows(&fam).unwrap();
    let (mut rec, mut ident) = (0.0f64, 0.0f64);
    for i in 0..10 {
        let a = random_field(lmax, 3000 + i);
        let betas = needlet_analyze_family(&a, &fam, GridPolicy::PerScale).unwrap();
        let dual_betas = needlet_analyze_family(&a, &duals, GridPolicy::PerScale).unwrap();
        let back = needlet_synthesize(&betas, &duals).unwrap();
        rec = rec.max(back.max_abs_diff(&a));
        let s: f64 = betas.iter().zip(&dual_betas).map(|(b, d)| b.dot(d)).sum();
        ident = ident.max((s - a.norm_sqr()).abs() / a.norm_sqr());
    }
    (
        hi - lo > 0.1 && rec < 1e-8 && ident < 1e-8,
        format!("frame bounds [{lo:.3}, {hi:.3}], reconstruction err {rec:.2e}, identity defect {ident:.2e}"),
    )
}

fn shannon() -> Outcome {
    let d = coupling_matrix(17, 64, deg(50.0)).unwrap();
    let n = shannon_number(&d);
    let e = eig_symmetric(&d).unwrap();
    let count = e.values.iter().filter(|v| **v > 0.5).count();
    (
        (n - 13.3).abs() <= 0.05 && count.abs_diff(13) <= 1,
        format!("N = {n:.4}, eigenvalues > 0.5: {count}"),
    )
}

fn slepian_optimality() -> Outcome {
    let openings = [1.0, 5.0, 10.0, 20.0].map(deg);
    let designs: Vec<SpectralWindow> = openings
        .iter()
        .map(|t| slepian_window(&ConcentrationProblem::new(33, 64, *t).unwrap()).unwrap().window)
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let random: Vec<SpectralWindow> = (0..1000)
        .map(|_| SpectralWindow::new(33, (33..=64).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap())
        .collect();
    let mut worst_margin = f64::INFINITY;
    for (i, t) in openings.iter().enumerate() {
        let own = concentration(&designs[i], *t).unwrap();
        for other in designs.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, w)| w).chain(&random) {
            worst_margin = worst_margin.min(concentration(other, *t).unwrap() - own);
        }
    }
    (worst_margin >= -1e-10, format!("smallest margin {worst_margin:.3e}"))
}

fn table_one() -> Outcome {
    let t1 = deg(1.0);
    let prolate = slepian_window(&ConcentrationProblem::new(256, 1024, t1).unwrap()).unwrap().window;
    let c = lp_concentration(&prolate, t1, LpNorm::L2).unwrap();
    let bspline = reference_window(ReferenceKind::BSpline3 { j: 9 }).unwrap();
    let ub = uncertainty_product(&bspline).unwrap();
    let spline3 = reference_window(ReferenceKind::SqrtSpline { base: 2.0, order: 3, j: 9 }).unwrap();
    let us = uncertainty_product(&spline3).unwrap();
    let checks = [
        ("prolate L2 at 1°", c, 4.3e-5, c / 4.3e-5 <= 2.0 && 4.3e-5 / c <= 2.0),
        ("B-spline U", ub, 1.2, (ub - 1.2).abs() <= 0.25 * 1.2),
        ("spline-3 U", us, 2.7, (us - 2.7).abs() <= 0.25 * 2.7),
    ];
    let detail = checks
        .iter()
        .map(|(name, got, want, ok)| format!("{name} {got:.3e} vs {want:.1e} [{}]", if *ok { "ok" } else { "off" }))
        .collect::<Vec<_>>()
        .join("; ");
    (checks.iter().all(|c| c.3), detail)
}

fn master() -> Outcome {
    let lmax = 32;
    let mask = WeightFunction::zonal(vec![zone(80.0, 100.0)], DEFAULT_APODIZATION, 2 * lmax).unwrap();
    let c = red(lmax);
    let m = coupling_matrix_master(&mask, lmax);
    let expected = m.apply(&c);
    let grid = Arc::new(build_grid(2 * lmax));
    let wmap = mask.to_map(&grid);
    let n = 500;
    let mut pseudo = Vec::with_capacity(n);
    let mut unbiased = Vec::with_capacity(n);
    for i in 0..n {
        let x = synthesize(&simulate_realization(&c, 77, i as u64), &grid);
        let masked = analyze(&x.multiply(&wmap).unwrap(), lmax).unwrap();
        let p = pseudo_spectrum(&masked);
        unbiased.push(unbiased_spectrum(&p, &m).unwrap().values);
        pseudo.push(p.values().to_vec());
    }
    let (mut zp, mut zu) = (0.0f64, 0.0f64);
    for l in 0..=lmax {
        let (mp, sp) = mean_and_se(&pseudo.iter().map(|s| s[l]).collect::<Vec<_>>());
        zp = zp.max((mp - expected[l]).abs() / sp);
        let (mu, su) = mean_and_se(&unbiased.iter().map(|s| s[l]).collect::<Vec<_>>());
        zu = zu.max((mu - c.get(l)).abs() / su);
    }
    (
        zp < 3.0 && zu < 3.0,
        format!("worst |z|: pseudo-spectrum {zp:.2}, unbiased estimate {zu:.2}"),
    )
}

fn q_cross_validation() -> Outcome {
    let mask = WeightFunction::zonal(vec![zone(0.0, 30.0)], DEFAULT_APODIZATION, 64).unwrap();
    let p = MiseProblem::new(5, 15, red(48), mask).unwrap();
    let qa = q_matrix_axisym(&p).unwrap();
    let qm = q_matrix_mc(&p, 2000, 7).unwrap();
    let se = qm.std_err.as_ref().unwrap();
    let n = p.len();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((qa.q.get(i, j) - qm.q.get(i, j)).abs() / se.get(i, j));
        }
    }
    (worst < 3.0, format!("worst |z| over {} entries {worst:.2}", n * (n + 1) / 2))
}

fn mise_optimality() -> Outcome {
    let spec = red(48);
    let mask = WeightFunction::zonal(vec![zone(70.0, 110.0)], DEFAULT_APODIZATION, 96).unwrap();
    let p = MiseProblem::new(5, 15, spec.clone(), mask).unwrap();
    let q = q_matrix_axisym(&p).unwrap();
    let b = mise_optimal_window(&q, &spec).unwrap();
    let r = mise_value(&q, &spec, &b).unwrap();
    let odd = (5..=15).filter(|l| l % 2 == 1).map(|l| b.get(l).abs()).fold(0.0, f64::max);
    let even = (5..=15).filter(|l| l % 2 == 0).map(|l| b.get(l).abs()).fold(0.0, f64::max);
    let off = odd.min(even);
    let best = [10.0, 20.0, 30.0, 45.0, 60.0]
        .iter()
        .map(|t| {
            let w = slepian_window(&ConcentrationProblem::new(5, 15, deg(*t)).unwrap()).unwrap().window;
            mise_value(&q, &spec, &w).unwrap()
        })
        .fold(f64::INFINITY, f64::min);
    let gain = 1.0 - r / best;
    (
        off < 1e-8 && gain >= 0.05,
        format!("off-parity max {off:.1e}, R(b*) {r:.4e} vs best PSWF {best:.4e}, improvement {:.1}%", 100.0 * gain),
    )
}

fn mask_error_curves() -> Outcome {
    let spec = red(64);
    let mask = WeightFunction::zonal(vec![zone(70.0, 110.0)], DEFAULT_APODIZATION, 96).unwrap();
    let p = MiseProblem::new(16, 48, spec, mask).unwrap();
    let alphas: Vec<f64> = (0..=40).map(|i| 0.05 * i as f64).chain([10.0, 100.0]).collect();
    let mut windows: Vec<(String, SpectralWindow)> = [5.0, 10.0, 20.0]
        .iter()
        .map(|t| {
            let w = slepian_window(&ConcentrationProblem::new(16, 48, deg(*t)).unwrap()).unwrap().window;
            (format!("pswf{t}"), w)
        })
        .collect();
    let fam = spline_family(2.0, 3, 6).unwrap().sqrt().unwrap();
    for s in fam.scales().iter().filter(|s| s.label >= 3 && s.window.lmax() <= 64) {
        windows.push((format!("spline{}", s.label), s.window.clone()));
    }
    let curves: Vec<Vec<f64>> = windows
        .iter()
        .map(|(_, w)| mask_error_curve(&p, w, &alphas, 30, 3, MaskErrorMethod::Empirical).unwrap())
        .collect();
    let monotone = curves.iter().all(|c| c.windows(2).all(|v| v[1] >= v[0]));
    let saturates = curves.iter().all(|c| (c[c.len() - 1] - 1.0).abs() < 1e-12);
    let mut crossings = Vec::new();
    for i in 0..curves.len() {
        for j in i + 1..curves.len() {
            let d: Vec<f64> = curves[i].iter().zip(&curves[j]).map(|(a, b)| a - b).collect();
            let hi = d.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lo = d.iter().cloned().fold(f64::INFINITY, f64::min);
            if hi > 0.005 && lo < -0.005 {
                crossings.push(format!("{}/{}", windows[i].0, windows[j].0));
            }
        }
    }
    (
        monotone && saturates && !crossings.is_empty(),
        format!(
            "{} windows, monotone {monotone}, E(100) = 1 {saturates}, crossing pairs: {}",
            windows.len(),
            if crossings.is_empty() { "none".into() } else { crossings.join(", ") }
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, Duration, fn() -> Outcome); 10] = [
        ("quadrature and SHT exactness", Duration::from_secs(10), quadrature_exactness),
        ("tight frame", Duration::from_secs(60), tight_frame),
        ("dual frame", Duration::from_secs(600), dual_frame),
        ("Shannon number", Duration::from_secs(5), shannon),
        ("cap-concentration optimality", Duration::from_secs(600), slepian_optimality),
        ("comparison-table spot checks", Duration::from_secs(600), table_one),
        ("pseudo-spectrum coupling", Duration::from_secs(300), master),
        ("Q analytic vs Monte Carlo", Duration::from_secs(600), q_cross_validation),
        ("MISE-optimal window", Duration::from_secs(600), mise_optimality),
        ("mask-error curves", Duration::from_secs(600), mask_error_curves),
    ];
    let mut failed = 0;
    for (i, (name, limit, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (ok, detail) = check();
        let elapsed = start.elapsed();
        let in_time = elapsed <= *limit;
        let pass = ok && in_time;
        if !pass {
            failed += 1;
        }
        println!(
            "{} [{:>2}] {name}: {detail} ({:.1} s, limit {} s{})",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            elapsed.as_secs_f64(),
            limit.as_secs(),
            if in_time { "" } else { ", exceeded" }
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
