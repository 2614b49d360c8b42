use std::f64::consts::PI;
use std::time::Instant;

use nalgebra::{DMatrix, SymmetricEigen};
use rsl_core::curvature::{div_adjoint, divergence, hessian, LichnerowiczOptions};
use rsl_core::grid::{
    band_limited_perturbation, inner_product, GridSpec, Measure, MetricField, ScalarField,
    StaggeredLaplacian, StencilOrder, SymTensorField, VectorField,
};
use rsl_core::spectral::{
    decompose, first_variation_lambda, lambda_of, lichnerowicz_spectrum,
    lichnerowicz_spectrum_with, perelman_F, second_variation_L, stability_verdict_with,
    SpectrumOptions, Verdict,
};

fn curved_t2(n: usize, stencil: StencilOrder) -> MetricField {
    let grid = GridSpec::torus(2, n, 1.0).unwrap().with_stencil(stencil);
    let t = SymTensorField::from_fn(&grid, |x, o| {
        let c = 1.0 + 0.2 * (2.0 * PI * x[0]).sin();
        o.copy_from_slice(&[c, 0.0, c]);
    });
    MetricField::new(t).unwrap()
}

/// Dense `W^{-1/2} (4K + W R) W^{-1/2}` built column by column, then a full
/// symmetric eigendecomposition.
fn dense_lambda(g: &MetricField) -> f64 {
    let grid = *g.grid();
    let n = grid.node_count();
    let lap = StaggeredLaplacian::new(g);
    let r = rsl_core::curvature::curvature_of(g).scalar().clone();
    let w = lap.weights().to_vec();
    let mut a = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        let k = lap.stiffness(&e, 1);
        for i in 0..n {
            let mut v = 4.0 * k[i];
            if i == j {
                v += w[i] * r.data()[i];
            }
            a[(i, j)] = v / (w[i] * w[j]).sqrt();
        }
    }
    let sym = (&a + a.transpose()) * 0.5;
    SymmetricEigen::new(sym).eigenvalues.min()
}

#[test]
fn flat_lambda_is_zero_with_constant_ground_state() {
    let grid = GridSpec::torus(2, 32, 1.0).unwrap();
    let (lambda, u) = lambda_of(&MetricField::identity(&grid)).unwrap();
    assert!(lambda.abs() < 1e-8, "{lambda}");
    let mean = u.data().iter().sum::<f64>() / u.data().len() as f64;
    assert!(u.data().iter().all(|v| (v - mean).abs() < 1e-8 * mean));
}

#[test]
fn lambda_matches_a_dense_eigensolve() {
    for stencil in [StencilOrder::Second, StencilOrder::Fourth] {
        let g = curved_t2(12, stencil);
        let (lambda, u) = lambda_of(&g).unwrap();
        let oracle = dense_lambda(&g);
        assert!((lambda - oracle).abs() < 1e-8, "{stencil:?}: {lambda} vs {oracle}");
        assert!(u.data().iter().all(|&v| v > 0.0));
        let norm = inner_product(&u, &u, &Measure::of(&g)).unwrap();
        assert!((norm - 1.0).abs() < 1e-12);
    }
}

#[test]
fn lambda_scales_inversely_with_the_metric() {
    let g = curved_t2(16, StencilOrder::Second);
    let (l1, _) = lambda_of(&g).unwrap();
    let (l3, _) = lambda_of(&g.scaled(3.0).unwrap()).unwrap();
    assert!((l3 - l1 / 3.0).abs() < 1e-9 * l1.abs().max(1.0), "{l1} {l3}");
    // lambda(g) <= average scalar curvature (constant trial function)
    let r = rsl_core::curvature::curvature_of(&g).scalar().clone();
    let w = Measure::of(&g);
    assert!(l1 <= w.integrate(&r).unwrap() / w.volume() + 1e-12);
}

#[test]
fn perelman_f_of_flat_metric() {
    let grid = GridSpec::torus(2, 32, 2.0).unwrap();
    let g = MetricField::identity(&grid);
    let f = ScalarField::constant(&grid, &[4f64.ln()]).unwrap();
    assert!(perelman_F(&g, &f).unwrap().abs() < 1e-14);
    let bumpy = ScalarField::from_fn(&grid, |x, o| o[0] = (PI * x[1]).sin());
    assert!(perelman_F(&g, &bumpy).unwrap() > 0.0);
}

#[test]
fn perelman_f_matches_a_one_dimensional_quadrature() {
    let side = 2.0 * PI;
    let grid = GridSpec::torus(2, 256, side).unwrap().with_stencil(StencilOrder::Sixth);
    let g = MetricField::identity(&grid);
    let c = (4.0 * PI * PI).ln();
    let f = ScalarField::from_fn(&grid, |x, o| o[0] = c + 0.3 * x[0].cos());
    let value = perelman_F(&g, &f).unwrap();
    // int_0^{2 pi} e^{-f} f'^2 dx * 2 pi by the trapezoid rule on 20000 points
    let m = 20_000;
    let h = side / m as f64;
    let line: f64 = (0..m)
        .map(|i| {
            let x = i as f64 * h;
            (-(c + 0.3 * x.cos())).exp() * (0.3 * x.sin()).powi(2)
        })
        .sum::<f64>()
        * h;
    let oracle = line * side;
    assert!((value - oracle).abs() < 1e-10, "{value} vs {oracle}: {}", value - oracle);
}

#[test]
fn first_variation_vanishes_at_flat_metrics() {
    let grid = GridSpec::torus(2, 16, 1.0).unwrap();
    let g = MetricField::identity(&grid);
    let w = Measure::of(&g);
    for seed in 0..5 {
        let h = band_limited_perturbation(&grid, seed, 2, 1.0).unwrap();
        let d = first_variation_lambda(&g, &h).unwrap();
        assert!(d.abs() <= 1e-6 * w.norm(&h).unwrap(), "{d}");
    }
}

#[test]
fn first_variation_matches_finite_differences() {
    let g = curved_t2(32, StencilOrder::Sixth);
    let grid = *g.grid();
    let s = 1e-4;
    for seed in 0..3 {
        let h = band_limited_perturbation(&grid, 40 + seed, 1, 0.5).unwrap();
        let analytic = first_variation_lambda(&g, &h).unwrap();
        let (lp, _) = lambda_of(&g.perturbed(&h.scale(s)).unwrap()).unwrap();
        let (lm, _) = lambda_of(&g.perturbed(&h.scale(-s)).unwrap()).unwrap();
        let fd = (lp - lm) / (2.0 * s);
        println!("first variation {analytic:.10e} fd {fd:.10e}");
        assert!((analytic - fd).abs() <= 1e-5 * fd.abs(), "{analytic} vs {fd}");
    }
    let (lambda, _) = lambda_of(&g).unwrap();
    let along_g = first_variation_lambda(&g, g.tensor()).unwrap();
    assert!((along_g + lambda).abs() < 1e-5 * lambda.abs(), "{along_g} vs {}", -lambda);
}

#[test]
fn l_vanishes_on_gauge_and_scale_directions() {
    let grid = GridSpec::torus(2, 24, 1.0).unwrap();
    let g0 = MetricField::constant(&grid, &[[1.1, 0.2, 0.0], [0.2, 0.9, 0.0], [0.0; 3]]).unwrap();
    let w = Measure::of(&g0);
    let xs = band_limited_perturbation(&grid, 3, 3, 1.0).unwrap();
    let x = VectorField::from_vec(&grid, xs.data().chunks(3).flat_map(|c| [c[0], c[2]]).collect()).unwrap();
    let h = div_adjoint(&x, &g0).unwrap();
    let (_, value) = second_variation_L(&h, &g0).unwrap();
    assert!(value.abs() <= 1e-8 * inner_product(&h, &h, &w).unwrap(), "{value}");
    let h = g0.tensor().scale(0.7);
    let (_, value) = second_variation_L(&h, &g0).unwrap();
    assert!(value.abs() <= 1e-8 * inner_product(&h, &h, &w).unwrap(), "{value}");
}

#[test]
fn l_on_a_tt_mode_is_half_the_laplacian() {
    let side = 2.0 * PI;
    let grid = GridSpec::torus(3, 16, side).unwrap();
    let g0 = MetricField::identity(&grid);
    // h_23 = cos(x): trace- and divergence-free
    let h = SymTensorField::from_fn(&grid, |x, o| o[4] = x[0].cos());
    let (_, value) = second_variation_L(&h, &g0).unwrap();
    let w = Measure::of(&g0);
    let hh = inner_product(&h, &h, &w).unwrap();
    // composed central second derivative symbol: -sin(dx)^2 / dx^2
    let dx = grid.spacing(0);
    let symbol = (dx.sin() / dx).powi(2);
    assert!((value - (-0.5 * symbol * hh)).abs() < 1e-10 * hh, "{value} vs {}", -0.5 * symbol * hh);
    assert!(value < 0.0);
}

#[test]
fn flat_t3_spectrum_gap_and_kernel() {
    let grid = GridSpec::torus(3, 8, 2.0 * PI).unwrap().with_stencil(StencilOrder::Fourth);
    let t = Instant::now();
    let report = lichnerowicz_spectrum(&MetricField::identity(&grid), 8);
    println!("t3 N=8 spectrum in {:?}: {:?}", t.elapsed(), report.to_json());
    assert_eq!(report.verdict, Verdict::LinearlyStable);
    assert_eq!(report.kernel_dim, 6);
    // fourth-order staggered symbol at k dx = pi / 4
    let gap = report.gap_two_delta.unwrap();
    assert!((gap - 1.0).abs() < 5e-3, "{gap}");
    for e in &report.lichnerowicz_eigs {
        assert!(e.residual <= report.eig_tol);
    }
}

#[test]
fn anisotropic_t2_gap_is_set_by_the_long_side() {
    let grid = GridSpec::new(2, 32, &[2.0 * PI, PI]).unwrap().with_stencil(StencilOrder::Fourth);
    let report = lichnerowicz_spectrum(&MetricField::identity(&grid), 6);
    assert_eq!(report.kernel_dim, 3);
    assert!((report.gap_two_delta.unwrap() - 1.0).abs() < 1e-4, "{:?}", report.gap_two_delta);
}

#[test]
fn verdicts_follow_the_tolerance_and_the_test_hook() {
    let grid = GridSpec::torus(2, 16, 2.0 * PI).unwrap();
    let g = MetricField::identity(&grid);
    let loose = SpectrumOptions { k: 6, eig_tol: Some(2.0), ..Default::default() };
    assert_eq!(stability_verdict_with(&g, &loose), Verdict::Inconclusive);
    let shifted = SpectrumOptions {
        k: 4,
        operator: LichnerowiczOptions { potential_shift: 0.5, ..Default::default() },
        ..Default::default()
    };
    let report = lichnerowicz_spectrum_with(&g, &shifted);
    assert_eq!(report.verdict, Verdict::Unstable);
    assert!((report.lichnerowicz_eigs[0].value - 0.5).abs() <= report.eig_tol);
    assert_eq!(stability_verdict_with(&g, &SpectrumOptions::default()), Verdict::LinearlyStable);
}

#[test]
fn decomposition_parts_are_orthogonal_and_complete() {
    let grid = GridSpec::torus(2, 24, 1.0).unwrap();
    let g = MetricField::constant(&grid, &[[1.2, -0.1, 0.0], [-0.1, 0.8, 0.0], [0.0; 3]]).unwrap();
    let w = Measure::of(&g);
    let h = band_limited_perturbation(&grid, 11, 2, 1.0).unwrap();
    let d = decompose(&h, &g).unwrap();
    let hh = inner_product(&h, &h, &w).unwrap();
    assert!(w.norm(&d.residual).unwrap() <= 1e-8 * hh.sqrt());
    assert!(d.sum().unwrap().sub(&h).unwrap().sup_norm() < 1e-12);
    let parts = d.parts();
    for i in 0..parts.len() {
        for j in i + 1..parts.len() {
            let v = inner_product(parts[i].1, parts[j].1, &w).unwrap();
            assert!(v.abs() <= 1e-8 * hh, "{} vs {}: {v}", parts[i].0, parts[j].0);
        }
    }
    let n = &d.n_part;
    assert!(divergence(n, &g).unwrap().sup_norm() < 1e-8);
    assert!(n.trace(&g).unwrap().sup_norm() < 1e-10);
    let again = decompose(n, &g).unwrap().n_part;
    assert!(again.sub(n).unwrap().sup_norm() < 1e-8 * n.sup_norm());
}

#[test]
fn decomposition_recognises_pure_parts() {
    let grid = GridSpec::torus(2, 24, 1.0).unwrap();
    let g = MetricField::identity(&grid);
    let d = decompose(&g.tensor().scale(0.3), &g).unwrap();
    assert!(d.g_part.sub(&g.tensor().scale(0.3)).unwrap().sup_norm() < 1e-12);
    for p in [&d.c_part, &d.e_part, &d.n_part, &d.s_part] {
        assert!(p.sup_norm() < 1e-12);
    }
    let f = ScalarField::from_fn(&grid, |x, o| o[0] = (2.0 * PI * x[0]).sin() * (2.0 * PI * x[1]).cos());
    let hess = hessian(&f, &g).unwrap();
    let d = decompose(&hess, &g).unwrap();
    assert!(d.e_part.sub(&hess).unwrap().sup_norm() < 1e-9 * hess.sup_norm());
}

#[test]
fn lambda_converges_when_the_krylov_space_is_exhausted() {
    // 100 nodes, so the Krylov basis fills the whole space
    let grid = GridSpec::torus(2, 10, 2.0 * PI).unwrap();
    let g = MetricField::identity(&grid).perturbed(&band_limited_perturbation(&grid, 18, 1, 0.1).unwrap()).unwrap();
    let (l1, _) = lambda_of(&g).unwrap();
    let c = 1.0256215332716832;
    let (lc, _) = lambda_of(&g.scaled(c).unwrap()).unwrap();
    assert!((lc - l1 / c).abs() <= 1e-9, "{l1} {lc}");
    assert!((l1 - dense_lambda(&g)).abs() < 1e-9);
}
