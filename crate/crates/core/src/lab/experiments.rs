//! The individual experiments. Each writes its artifacts into `dir` and
//! returns the failed assertions together with a JSON summary.

use std::fs;
use std::path::Path;

use serde_json::{json, Value};

use super::ExperimentConfig;
use crate::curvature::{curvature_of, deturck_correction};
use crate::flows::{evolve, gauge_transfer_check, FlowConfig, FlowKind, FlowTrace, Termination};
use crate::grid::{write_csv, write_snapshot, Measure, MetricField};
use crate::spectral::{
    decompose, ground_state, lichnerowicz_spectrum_with, perelman_F, second_variation_L, LambdaOptions, Verdict,
};
use crate::{Error, Result};

use super::Experiment;

type Outcome = (Vec<String>, Value);

pub(super) fn run(cfg: &ExperimentConfig, seed: u64, dir: &Path) -> Result<Outcome> {
    let (failures, mut summary) = match cfg.experiment {
        Experiment::Curvature => curvature(cfg, seed, dir)?,
        Experiment::Lambda => lambda(cfg, seed, dir)?,
        Experiment::Spectrum => spectrum(cfg, seed, dir, false)?,
        Experiment::Stability => spectrum(cfg, seed, dir, true)?,
        Experiment::Decompose => decomposition(cfg, seed, dir)?,
        Experiment::Secondvar => secondvar(cfg, seed, dir)?,
        Experiment::Flow => flow(cfg, seed, dir)?,
        Experiment::Monotonicity => monotonicity(cfg, seed, dir)?,
        Experiment::GaugeTransfer => gauge_transfer(cfg, seed, dir)?,
    };
    if let Value::Object(map) = &mut summary {
        map.insert("experiment".into(), json!(cfg.experiment));
        map.insert("seed".into(), json!(seed));
        map.insert("failures".into(), json!(failures));
    }
    let text = serde_json::to_string_pretty(&summary).expect("serialisable");
    fs::write(dir.join("summary.json"), text)?;
    Ok((failures, summary))
}

fn unperturbed(cfg: &ExperimentConfig) -> bool {
    cfg.perturbation.amplitude == 0.0 && cfg.perturbation.shift.is_none()
}

fn curvature(cfg: &ExperimentConfig, seed: u64, dir: &Path) -> Result<Outcome> {
    let g = cfg.initial_metric(seed)?;
    let pack = curvature_of(&g);
    write_csv(dir.join("ricci.csv"), pack.ricci())?;
    write_csv(dir.join("scalar.csv"), pack.scalar())?;
    let mut failures = Vec::new();
    if unperturbed(cfg) && pack.sup_norm() > cfg.tolerances.flatness {
        failures.push(format!("flat metric has curvature {:e}", pack.sup_norm()));
    }
    let summary = json!({
        "curvature_sup": pack.sup_norm(),
        "ricci_sup": pack.ricci().sup_norm(),
        "scalar_sup": pack.scalar().sup_norm(),
    });
    Ok((failures, summary))
}

fn lambda(cfg: &ExperimentConfig, seed: u64, dir: &Path) -> Result<Outcome> {
    let g = cfg.initial_metric(seed)?;
    let gs = ground_state(&g, &LambdaOptions::default(), None)?;
    write_csv(dir.join("ground_state.csv"), &gs.u)?;
    let f_min = perelman_F(&g, &gs.minimizer())?;
    let w = Measure::of(&g);
    let mean_r = w.integrate(curvature_of(&g).scalar())? / w.volume();
    let mut failures = Vec::new();
    // F(g, const) is the mean scalar curvature, an upper bound for the infimum.
    if gs.lambda > mean_r + cfg.tolerances.lambda_slack * (1.0 + mean_r.abs()) {
        failures.push(format!("lambda {:e} above mean scalar curvature {:e}", gs.lambda, mean_r));
    }
    if unperturbed(cfg) && gs.lambda.abs() > 1e-8 {
        failures.push(format!("lambda of a flat metric is {:e}", gs.lambda));
    }
    let summary = json!({
        "lambda": gs.lambda,
        "residual": gs.residual,
        "f_at_minimizer": f_min,
        "mean_scalar": mean_r,
        "volume": w.volume(),
    });
    Ok((failures, summary))
}

fn spectrum(cfg: &ExperimentConfig, seed: u64, dir: &Path, verdict_only: bool) -> Result<Outcome> {
    let g = cfg.initial_metric(seed)?;
    let report = lichnerowicz_spectrum_with(&g, &cfg.spectrum_options());
    if !verdict_only {
        report.write_eigenfields(dir)?;
    }
    let mut failures = Vec::new();
    match report.verdict {
        Verdict::Inconclusive => {
            return Err(Error::NotConverged(report.note.clone().unwrap_or_else(|| "inconclusive spectrum".into())))
        }
        Verdict::Unstable if verdict_only => failures.push("positive Lichnerowicz eigenvalue".into()),
        _ => {}
    }
    Ok((failures, report.to_json()))
}

fn decomposition(cfg: &ExperimentConfig, seed: u64, dir: &Path) -> Result<Outcome> {
    let g0 = cfg.background()?;
    let h = cfg.perturbation_tensor(seed)?;
    let d = decompose(&h, &g0)?;
    let w = Measure::of(&g0);
    let mut norms = serde_json::Map::new();
    for (name, part) in d.parts() {
        write_snapshot(dir.join(format!("{name}.rsl")), part)?;
        norms.insert(name.to_string(), json!(w.norm(part)?));
    }
    let h_norm = w.norm(&h)?;
    write_snapshot(dir.join("residual.rsl"), &d.residual)?;
    let err = w.norm(&d.sum()?.sub(&h)?)?;
    let mut failures = Vec::new();
    if err > cfg.tolerances.decomposition * h_norm.max(f64::MIN_POSITIVE) {
        failures.push(format!("parts do not reassemble h: error {err:e}"));
    }
    Ok((failures, json!({ "h_norm": h_norm, "reconstruction_error": err, "part_norms": norms })))
}

fn secondvar(cfg: &ExperimentConfig, seed: u64, dir: &Path) -> Result<Outcome> {
    let g0 = cfg.background()?;
    let h = cfg.perturbation_tensor(seed)?;
    let (lh, value) = second_variation_L(&h, &g0)?;
    write_snapshot(dir.join("lh.rsl"), &lh)?;
    let w = Measure::of(&g0);
    let vol = w.volume();
    let h_sq = w.norm(&h)?.powi(2);
    let tol = cfg.spectrum_options().eig_tol_for(g0.grid());
    let mut failures = Vec::new();
    if value > tol * h_sq {
        failures.push(format!("<Lh, h> = {value:e} is positive beyond {:e}", tol * h_sq));
    }
    let summary = json!({
        "lh_dot_h": value,
        "second_derivative_lambda": value / vol,
        "h_norm_sq": h_sq,
        "volume": vol,
    });
    Ok((failures, summary))
}

/// Flow settings with the automatic reference-update period resolved.
fn flow_config(cfg: &ExperimentConfig) -> Result<FlowConfig> {
    let mut fc = cfg.flow_config()?;
    if fc.reference_update_period.is_none() && cfg.flow.auto_reference_update {
        let report = lichnerowicz_spectrum_with(&fc.background, &cfg.spectrum_options());
        let gap = report
            .gap_two_delta
            .ok_or_else(|| Error::NotConverged("no spectral gap for the update period".into()))?;
        fc.reference_update_period = Some(2.0 / gap);
    }
    Ok(fc)
}

fn trace_failures(trace: &FlowTrace, cfg: &ExperimentConfig, g0: &MetricField) -> Result<Vec<String>> {
    let tol = &cfg.tolerances;
    let mut failures = Vec::new();
    if let Termination::LeftNeighbourhood { time, reason } = &trace.termination {
        failures.push(format!("left neighbourhood at t = {time}: {reason}"));
    }
    if trace.records.windows(2).any(|w| w[1].t <= w[0].t) {
        failures.push("recorded times are not increasing".into());
    }
    for (i, r) in trace.references.iter().enumerate().skip(1) {
        if r.zero_mode > tol.zero_mode {
            failures.push(format!("reference {i}: zero-mode residue {:e}", r.zero_mode));
        }
        if r.ratio > tol.reference_ratio {
            failures.push(format!("reference {i}: |g_i - g0| ratio {} above {}", r.ratio, tol.reference_ratio));
        }
        let curv = curvature_of(&r.metric).sup_norm();
        let p = deturck_correction(&r.metric, g0)?.sup_norm();
        if !r.metric.is_constant(0.0) || curv > tol.flatness || p > tol.flatness {
            failures.push(format!("reference {i} is not stationary (curvature {curv:e}, DeTurck term {p:e})"));
        }
    }
    if trace.kind == FlowKind::DeTurck {
        for w in trace.records.windows(2) {
            if w[0].ref_index == w[1].ref_index && w[0].ref_index > 0 && w[1].l2_dist > w[0].l2_dist {
                failures.push(format!("distance to reference {} grew at t = {}", w[1].ref_index, w[1].t));
                break;
            }
        }
    }
    if trace.kind == FlowKind::Ricci && trace.config.track_lambda {
        failures.extend(monotonicity_failures(trace, tol.lambda_slack));
    }
    Ok(failures)
}

fn monotonicity_failures(trace: &FlowTrace, slack: f64) -> Vec<String> {
    let mut out = Vec::new();
    for w in trace.records.windows(2) {
        let (a, b) = (w[0].lambda, w[1].lambda);
        if !b.is_finite() {
            out.push(format!("lambda solve failed at t = {}", w[1].t));
        } else if b < a - slack * (1.0 + a.abs()) {
            out.push(format!("lambda decreased from {a:e} to {b:e} at t = {}", w[1].t));
        }
    }
    out
}

fn flow(cfg: &ExperimentConfig, seed: u64, dir: &Path) -> Result<Outcome> {
    let g = cfg.initial_metric(seed)?;
    let fc = flow_config(cfg)?;
    let trace = evolve(&g, &fc)?;
    trace.write(dir)?;
    let failures = trace_failures(&trace, cfg, &fc.background)?;
    Ok((failures, trace.summary_json()))
}

fn monotonicity(cfg: &ExperimentConfig, seed: u64, dir: &Path) -> Result<Outcome> {
    let g = cfg.initial_metric(seed)?;
    let mut fc = flow_config(cfg)?;
    fc.kind = FlowKind::Ricci;
    fc.track_lambda = true;
    let trace = evolve(&g, &fc)?;
    trace.write(dir)?;
    let failures = trace_failures(&trace, cfg, &fc.background)?;
    let mut summary = trace.summary_json();
    let l = trace.lambda_series();
    summary["lambda_first"] = json!(l.first());
    summary["lambda_last"] = json!(l.last());
    Ok((failures, summary))
}

fn gauge_transfer(cfg: &ExperimentConfig, seed: u64, dir: &Path) -> Result<Outcome> {
    let g = cfg.initial_metric(seed)?;
    let mut fc = flow_config(cfg)?;
    fc.kind = FlowKind::DeTurck;
    fc.track_lambda = true;
    let trace = evolve(&g, &fc)?;
    trace.write(&dir.join("deturck"))?;
    let mut failures = trace_failures(&trace, cfg, &fc.background)?;
    if !failures.is_empty() {
        return Ok((failures, trace.summary_json()));
    }
    let report = match gauge_transfer_check(&trace, &g) {
        Ok(r) => r,
        Err(e) => {
            failures.push(e.to_string());
            return Ok((failures, trace.summary_json()));
        }
    };
    report.ricci_trace.write(&dir.join("ricci"))?;
    let tol = &cfg.tolerances;
    if report.lambda_rel > tol.transfer_rel {
        failures.push(format!("lambda differs by {:e} relative", report.lambda_rel));
    }
    if report.vol_rel > tol.transfer_rel {
        failures.push(format!("volume differs by {:e} relative", report.vol_rel));
    }
    let curved = trace.records.iter().any(|r| r.ric_l2 > tol.flatness);
    if curved && !(report.rate_rel <= tol.rate_rel) {
        failures.push(format!(
            "|Ric| decay rates {} and {} differ by {:e}",
            report.ric_rate_ricci, report.ric_rate_deturck, report.rate_rel
        ));
    }
    if !report.envelope.is_finite() {
        failures.push("|Ric| envelope is unbounded".into());
    }
    let summary = json!({
        "transfer": report,
        "deturck": trace.summary_json(),
    });
    Ok((failures, summary))
}
