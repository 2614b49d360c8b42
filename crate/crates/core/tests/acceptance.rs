//! Acceptance suite. Prints one line per criterion and exits nonzero if any fails.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rsl_core::curvature::{curvature_of, div_adjoint};
use rsl_core::flows::*;
use rsl_core::grid::*;
use rsl_core::lab::{run_experiment, Experiment, ExperimentConfig};
use rsl_core::spectral::{first_variation_lambda, lambda_of, lichnerowicz_spectrum, second_variation_L, Verdict};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok { Ok(detail) } else { Err(detail) }
}

fn torus(n: usize) -> GridSpec {
    GridSpec::torus(2, n, 2.0 * PI).unwrap()
}

fn zero_mean(mut h: SymTensorField) -> SymTensorField {
    let mean = h.node_mean();
    let nc = h.components();
    for node in 0..h.grid().node_count() {
        for c in 0..nc {
            h.at_mut(node)[c] -= mean[c];
        }
    }
    h
}

fn flat_certificate() -> Outcome {
    let start = Instant::now();
    let grid = GridSpec::torus(2, 32, 1.0).unwrap();
    let metrics = [
        MetricField::identity(&grid),
        MetricField::constant(&grid, &[[2.0, 0.3, 0.0], [0.3, 0.5, 0.0], [0.0; 3]]).unwrap(),
    ];
    let mut curv = 0.0f64;
    let mut lam = 0.0f64;
    for g in &metrics {
        curv = curv.max(curvature_of(g).sup_norm());
        lam = lam.max(lambda_of(g).map_err(|e| e.to_string())?.0.abs());
    }
    let elapsed = start.elapsed();
    check(
        curv <= 1e-12 && lam <= 1e-8 && elapsed < Duration::from_secs(5),
        format!("curvature sup {curv:e}, |lambda| {lam:e}, {elapsed:.2?}"),
    )
}

fn critical_point() -> Outcome {
    let grid = torus(32);
    let g = MetricField::identity(&grid);
    let w = Measure::of(&g);
    let mut worst = 0.0f64;
    for seed in 0..100 {
        let h = band_limited_perturbation(&grid, seed, 2, 1.0).unwrap();
        let d = first_variation_lambda(&g, &h).map_err(|e| e.to_string())?;
        worst = worst.max(d.abs() / w.norm(&h).unwrap());
    }
    check(worst <= 1e-6, format!("max |dlambda| / |h| = {worst:e} over 100 seeds"))
}

/// Largest relative gap between `<Lh,h>/Vol` and a five-point second
/// difference of `lambda(g0 + s h)` over 20 seeds.
fn second_variation_error(n: usize) -> Result<f64, String> {
    let grid = GridSpec::torus(2, n, 1.0).unwrap().with_stencil(StencilOrder::Fourth);
    let g0 = MetricField::identity(&grid);
    let vol = Measure::of(&g0).volume();
    let s = 1e-2;
    let lam = |h: &SymTensorField, t: f64| -> Result<f64, String> {
        let g = g0.perturbed(&h.scale(t)).map_err(|e| e.to_string())?;
        Ok(lambda_of(&g).map_err(|e| e.to_string())?.0)
    };
    let l0 = lam(&SymTensorField::zeros(&grid), 0.0)?;
    let mut worst = 0.0f64;
    for seed in 0..20 {
        let h = band_limited_perturbation(&grid, seed, 1, 1.0).unwrap();
        let fd = (-lam(&h, 2.0 * s)? + 16.0 * lam(&h, s)? - 30.0 * l0 + 16.0 * lam(&h, -s)? - lam(&h, -2.0 * s)?)
            / (12.0 * s * s);
        let (_, value) = second_variation_L(&h, &g0).map_err(|e| e.to_string())?;
        let op = value / vol;
        worst = worst.max((op - fd).abs() / op.abs().max(fd.abs()));
    }
    Ok(worst)
}

fn second_variation() -> Outcome {
    let coarse = second_variation_error(32)?;
    let fine = second_variation_error(64)?;
    check(
        coarse <= 1e-3 && fine <= 0.5 * coarse,
        format!("max rel error {coarse:e} at N=32, {fine:e} at N=64"),
    )
}

fn null_directions() -> Outcome {
    let grid = GridSpec::torus(2, 24, 1.0).unwrap();
    let g0 = MetricField::constant(&grid, &[[1.1, 0.2, 0.0], [0.2, 0.9, 0.0], [0.0; 3]]).unwrap();
    let w = Measure::of(&g0);
    let mut worst = 0.0f64;
    let mut measure = |h: &SymTensorField| -> Result<(), String> {
        let (_, value) = second_variation_L(h, &g0).map_err(|e| e.to_string())?;
        worst = worst.max(value.abs() / inner_product(h, h, &w).unwrap());
        Ok(())
    };
    for seed in 0..10 {
        let xs = band_limited_perturbation(&grid, 100 + seed, 3, 1.0).unwrap();
        let x = VectorField::from_vec(&grid, xs.data().chunks(3).flat_map(|c| [c[0], c[2]]).collect()).unwrap();
        measure(&div_adjoint(&x, &g0).unwrap())?;
    }
    for alpha in [-2.0, -0.3, 1e-3, 0.7, 5.0] {
        measure(&g0.tensor().scale(alpha))?;
    }
    check(worst <= 1e-8, format!("max |<Lh,h>| / |h|^2 = {worst:e} over 10 gauge and 5 scale directions"))
}

fn spectral_gap() -> Outcome {
    let start = Instant::now();
    let grid = GridSpec::torus(3, 16, 2.0 * PI).unwrap().with_stencil(StencilOrder::Sixth);
    let report = lichnerowicz_spectrum(&MetricField::identity(&grid), 8);
    let elapsed = start.elapsed();
    let gap = report.gap_two_delta.unwrap_or(f64::NAN);
    check(
        (gap - 1.0).abs() <= 1e-4
            && report.kernel_dim == 6
            && report.verdict == Verdict::LinearlyStable
            && elapsed < Duration::from_secs(60),
        format!("gap {gap:.7}, kernel {}, {:?}, {elapsed:.1?}", report.kernel_dim, report.verdict),
    )
}

fn lambda_monotonicity() -> Outcome {
    let grid = torus(32);
    let g0 = MetricField::identity(&grid);
    let mut worst = f64::NEG_INFINITY;
    let mut records = 0;
    for seed in 0..10 {
        let h = band_limited_perturbation(&grid, seed, 2, 1e-2).unwrap();
        let mut cfg = FlowConfig::ricci(g0.clone());
        cfg.t_end = 5.0;
        cfg.track_lambda = true;
        let trace = evolve(&g0.perturbed(&h).unwrap(), &cfg).map_err(|e| e.to_string())?;
        if !trace.completed() {
            return Err(format!("seed {seed}: {:?}", trace.termination));
        }
        let l = trace.lambda_series();
        if l.iter().any(|v| !v.is_finite()) {
            return Err(format!("seed {seed}: lambda not resolved"));
        }
        records += l.len();
        // largest decrease between consecutive records
        worst = l.windows(2).map(|w| w[0] - w[1]).fold(worst, f64::max);
    }
    check(worst <= 1e-8, format!("largest decrease {worst:e} over {records} records in 10 runs"))
}

/// Constant of the regression bound `|g_1 - g_0| <= C |g~ - g_0|`.
const UPDATE_C: f64 = 1.0;

fn kernel_killing() -> Outcome {
    let grid = torus(16);
    let g0 = MetricField::identity(&grid);
    let (mut zero_mode, mut ratio, mut updates) = (0.0f64, 0.0f64, 0);
    for seed in 0..5 {
        let c = SymTensorField::constant(&grid, &[0.02 * seed as f64, -0.01, 0.015]).unwrap();
        let h = band_limited_perturbation(&grid, 20 + seed, 2, 1e-2).unwrap();
        let g = g0.perturbed(&h).unwrap().perturbed(&c).unwrap();
        let mut cfg = FlowConfig::deturck(g0.clone());
        cfg.t_end = 4.5;
        cfg.reference_update_period = Some(1.0);
        let trace = evolve(&g, &cfg).map_err(|e| e.to_string())?;
        for r in trace.references.iter().skip(1) {
            zero_mode = zero_mode.max(r.zero_mode);
            ratio = ratio.max(r.ratio);
            updates += 1;
        }
    }
    check(
        updates > 0 && zero_mode <= 1e-12 && ratio <= UPDATE_C,
        format!("{updates} updates, max zero mode {zero_mode:e}, max ratio {ratio:.6} (C = {UPDATE_C})"),
    )
}

fn exponential_decay() -> Outcome {
    let grid = torus(32);
    let g0 = MetricField::identity(&grid);
    let h = SymTensorField::from_fn(&grid, |p, v| {
        let c = 1e-3 * p[0].cos();
        v.copy_from_slice(&[c, 0.5 * c, -0.3 * c]);
    });
    let mut cfg = FlowConfig::deturck(g0.clone());
    cfg.t_end = 4.0;
    cfg.reference_update_period = Some(2.0);
    let trace = evolve(&g0.perturbed(&h).unwrap(), &cfg).map_err(|e| e.to_string())?;
    let single = trace.fitted_decay_rate.unwrap_or(f64::NAN);

    let gap = lichnerowicz_spectrum(&g0, 8).gap_two_delta.ok_or("no spectral gap")?;
    let mut generic = f64::INFINITY;
    for seed in [3, 11, 19] {
        let h = band_limited_perturbation(&grid, seed, 2, 1e-2).unwrap();
        let mut cfg = FlowConfig::deturck(g0.clone());
        cfg.t_end = 10.0;
        cfg.reference_update_period = Some(2.0 / gap);
        let trace = evolve(&g0.perturbed(&h).unwrap(), &cfg).map_err(|e| e.to_string())?;
        generic = generic.min(trace.fitted_decay_rate.unwrap_or(f64::NAN));
    }
    check(
        (single - 1.0).abs() <= 0.05 && generic >= 0.95 * gap,
        format!("single mode rate {single:.5}, slowest generic rate {generic:.5} vs gap {gap:.5}"),
    )
}

fn weak_stability() -> Outcome {
    let mut worst = 0.0f64;
    let mut away = f64::INFINITY;
    for (n, shift, seed) in [(32, [0.05, 0.02, -0.03], 7), (16, [-0.04, 0.01, 0.06], 8)] {
        let grid = torus(n);
        let g0 = MetricField::identity(&grid);
        let target = g0.perturbed(&SymTensorField::constant(&grid, &shift).unwrap()).unwrap();
        let noise = zero_mean(band_limited_perturbation(&grid, seed, 2, 1e-4).unwrap());
        let mut cfg = FlowConfig::deturck(g0.clone());
        cfg.t_end = 20.0;
        cfg.reference_update_period = Some(2.0);
        let trace = evolve(&target.perturbed(&noise).unwrap(), &cfg).map_err(|e| e.to_string())?;
        worst = worst.max(trace.final_metric.tensor().sub(target.tensor()).unwrap().sup_norm());
        away = away.min(trace.final_metric.tensor().sub(g0.tensor()).unwrap().sup_norm());
    }
    check(
        worst < 1e-6 && away > 1e-2,
        format!("sup distance to g0 + c {worst:e}, to g0 {away:.3}"),
    )
}

fn remainder_slope() -> Outcome {
    let grid = torus(24);
    let g0 = MetricField::identity(&grid);
    let s = [1e-2, 1e-3, 1e-4];
    let mut slopes = Vec::new();
    for seed in [11, 12, 13] {
        let h = band_limited_perturbation(&grid, seed, 2, 1.0).unwrap();
        let mut y = Vec::new();
        for &sc in &s {
            let r = remainder_check(&g0.perturbed(&h.scale(sc)).unwrap(), &g0).map_err(|e| e.to_string())?;
            y.push(r.norm.ln());
        }
        let x: Vec<f64> = s.iter().map(|v| v.ln()).collect();
        let (xm, ym) = (x.iter().sum::<f64>() / 3.0, y.iter().sum::<f64>() / 3.0);
        let slope = x.iter().zip(&y).map(|(a, b)| (a - xm) * (b - ym)).sum::<f64>()
            / x.iter().map(|a| (a - xm).powi(2)).sum::<f64>();
        slopes.push(slope);
    }
    check(
        slopes.iter().all(|v| (v - 2.0).abs() <= 0.1),
        format!("log-log slopes {slopes:.4?}"),
    )
}

fn gauge_transfer() -> Outcome {
    let grid = torus(64).with_stencil(StencilOrder::Sixth);
    let g0 = MetricField::identity(&grid);
    let g = g0.perturbed(&band_limited_perturbation(&grid, 5, 2, 5e-2).unwrap()).unwrap();
    let mut cfg = FlowConfig::deturck(g0.clone());
    cfg.t_end = 1.0;
    cfg.track_lambda = true;
    cfg.record_every = 40;
    let trace = evolve(&g, &cfg).map_err(|e| e.to_string())?;
    let report = gauge_transfer_check(&trace, &g).map_err(|e| e.to_string())?;
    let resolved = trace.lambda_series().iter().chain(&report.ricci_trace.lambda_series()).all(|v| v.is_finite());
    check(
        resolved
            && report.matched == trace.records.len()
            && report.lambda_rel <= 1e-6
            && report.vol_rel <= 1e-6
            && report.rate_rel <= 0.1,
        format!(
            "{} matched times, lambda {:e}, vol {:e}, Ric rates {:.5} / {:.5} (rel {:e})",
            report.matched,
            report.lambda_rel,
            report.vol_rel,
            report.ric_rate_ricci,
            report.ric_rate_deturck,
            report.rate_rel
        ),
    )
}

fn csv_files(dir: &Path, out: &mut Vec<PathBuf>) {
    for entry in fs::read_dir(dir).unwrap() {
        let p = entry.unwrap().path();
        if p.is_dir() {
            csv_files(&p, out);
        } else if p.extension().is_some_and(|e| e == "csv") {
            out.push(p);
        }
    }
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut compared = 0;
    for exp in Experiment::ALL {
        let text = format!(
            "experiment = \"{}\"\n[grid]\ndim = 2\npoints = 12\n[perturbation]\nseed = 4\namplitude = 1e-3\n\
             [flow]\nt_end = 1.0\nrecord_every = 4\nreference_update_period = 0.5\n[sweep]\nseeds = [1, 2]\n",
            exp.name()
        );
        let cfg = ExperimentConfig::from_toml(&text).map_err(|e| e.to_string())?;
        let (a, b) = (dir.path().join(format!("{}_a", exp.name())), dir.path().join(format!("{}_b", exp.name())));
        run_experiment(&cfg, &a, 1).map_err(|e| e.to_string())?;
        run_experiment(&cfg, &b, 2).map_err(|e| e.to_string())?;
        let mut files = Vec::new();
        csv_files(&a, &mut files);
        for fa in files {
            let fb = b.join(fa.strip_prefix(&a).unwrap());
            if fs::read(&fa).ok() != fs::read(&fb).ok() {
                return Err(format!("{} differs", fa.strip_prefix(dir.path()).unwrap().display()));
            }
            compared += 1;
        }
    }
    check(compared > 0, format!("{compared} CSV files byte-identical across reruns of all experiments"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("flat-metric certificate", flat_certificate),
        ("critical point", critical_point),
        ("second-variation consistency", second_variation),
        ("gauge/scale null directions", null_directions),
        ("spectral gap", spectral_gap),
        ("lambda monotonicity", lambda_monotonicity),
        ("kernel-killing update", kernel_killing),
        ("exponential decay", exponential_decay),
        ("weak dynamical stability", weak_stability),
        ("remainder quadratic smallness", remainder_slope),
        ("gauge transfer", gauge_transfer),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (tag, detail) = match run() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {:>2} {tag} {name}: {detail} [{:.1?}]", i + 1, start.elapsed());
    }
    println!("acceptance: {} of 12 criteria passed", 12 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
