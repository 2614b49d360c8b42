//! Reference updates, remainder estimates, decay fits and the comparison
//! with the unmodified Ricci flow.

use serde::Serialize;

use super::trace::orthonormal;
use super::{evolve, FlowKind, FlowTrace, Termination};
use crate::curvature::{deturck_velocity, LaplacianForm, Lichnerowicz, LichnerowiczOptions};
use crate::grid::{inner_product, linalg, stencil, Measure, MetricField, SymTensorField};
use crate::{Error, Result};

/// Constant unit symmetric tensors, one per stored component: the kernel of
/// the Lichnerowicz Laplacian of a flat metric on the torus.
pub fn kernel_basis(g0: &MetricField) -> Vec<SymTensorField> {
    let grid = g0.grid();
    let nc = linalg::sym_components(grid.dim());
    (0..nc)
        .map(|c| {
            let mut v = vec![0.0; nc];
            v[c] = 1.0;
            SymTensorField::constant(grid, &v).expect("component count matches")
        })
        .collect()
}

/// New reference metric `g1 = g0 + sum_B <g~ - g0, B> B` over the
/// `dV_{g0}`-orthonormalised kernel basis, which for the constant tensors is
/// the component-wise `dV_{g0}` average of `g~`.
pub fn reference_update(
    g_tilde: &MetricField,
    g0: &MetricField,
    kernel_basis: &[SymTensorField],
) -> Result<MetricField> {
    g_tilde.tensor().check_grid(g0.grid())?;
    let w = Measure::of(g0);
    let diff = g_tilde.tensor().sub(g0.tensor())?;
    let mut g1 = g0.tensor().clone();
    for b in orthonormal(kernel_basis, &w)? {
        let c = inner_product(&diff, &b, &w)?;
        g1.axpy(c, &b)?;
    }
    MetricField::new(g1)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RemainderCheck {
    /// `|F|` in `L^2(dV_{g0})`.
    pub norm: f64,
    /// `|h|_sup |D^2 h| + |D h|_sup |D h|`, derivative norms in `L^2(dV_{g0})`.
    pub bound: f64,
    /// `norm / bound`, zero when both vanish.
    pub ratio: f64,
}

/// Nonlinear part `F = (-2 Ric + P_{g0})(g~) - Delta_L^{g0} (g~ - g0)` of the
/// DeTurck right-hand side, with the composed Laplacian that linearises it exactly.
pub fn remainder_check(g_tilde: &MetricField, g0: &MetricField) -> Result<RemainderCheck> {
    let grid = *g0.grid();
    let h = g_tilde.tensor().sub(g0.tensor())?;
    let lin = Lichnerowicz::new(g0, LichnerowiczOptions { form: LaplacianForm::Composed, potential_shift: 0.0 })
        .apply(&h)?;
    let f = deturck_velocity(g_tilde, g0)?.sub(&lin)?;
    let w = Measure::of(g0);
    let norm = w.norm(&f)?;

    let nc = h.components();
    let mut grad_sq = 0.0;
    let mut grad_sup: f64 = 0.0;
    let mut hess_sq = 0.0;
    for a in 0..grid.dim() {
        let da = stencil::d1(&grid, h.data(), nc, a);
        let fa = SymTensorField::from_vec(&grid, da.clone())?;
        grad_sq += w.norm(&fa)?.powi(2);
        grad_sup = grad_sup.max(fa.sup_norm());
        for b in 0..grid.dim() {
            let dab = SymTensorField::from_vec(&grid, stencil::d1(&grid, &da, nc, b))?;
            hess_sq += w.norm(&dab)?.powi(2);
        }
    }
    let bound = h.sup_norm() * hess_sq.sqrt() + grad_sup * grad_sq.sqrt();
    let ratio = if bound > 0.0 { norm / bound } else { 0.0 };
    Ok(RemainderCheck { norm, bound, ratio })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayFit {
    /// `-slope` of `ln d` against `t`.
    pub rate: f64,
    /// Root-mean-square residual of the log-linear fit.
    pub residual: f64,
    pub samples: usize,
}

/// Least-squares line through `(t, ln d)`; needs at least ten positive samples.
pub fn fit_log_linear(times: &[f64], values: &[f64]) -> Result<DecayFit> {
    if times.len() != values.len() {
        return Err(Error::InvalidArgument("times and values differ in length".into()));
    }
    if times.len() < 10 {
        return Err(Error::InvalidArgument(format!("{} samples, need at least 10", times.len())));
    }
    if values.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::InvalidArgument("distances must be positive and finite".into()));
    }
    let n = times.len() as f64;
    let logs: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let tm = times.iter().sum::<f64>() / n;
    let lm = logs.iter().sum::<f64>() / n;
    let sxx: f64 = times.iter().map(|t| (t - tm).powi(2)).sum();
    let sxy: f64 = times.iter().zip(&logs).map(|(t, l)| (t - tm) * (l - lm)).sum();
    if sxx <= 0.0 {
        return Err(Error::InvalidArgument("window has no time extent".into()));
    }
    let slope = sxy / sxx;
    let ss: f64 = times.iter().zip(&logs).map(|(t, l)| (l - lm - slope * (t - tm)).powi(2)).sum();
    Ok(DecayFit { rate: -slope, residual: (ss / n).sqrt(), samples: times.len() })
}

/// Decay rate of `l2_dist` over the records with `window.0 <= t <= window.1`.
pub fn fit_decay_rate(trace: &FlowTrace, window: (f64, f64)) -> Result<DecayFit> {
    let (a, b) = window;
    let (Some(first), Some(last)) = (trace.records.first(), trace.records.last()) else {
        return Err(Error::InvalidArgument("empty trace".into()));
    };
    if !(a <= b) || a < first.t || b > last.t {
        return Err(Error::InvalidArgument(format!(
            "window [{a}, {b}] not inside recorded times [{}, {}]",
            first.t, last.t
        )));
    }
    let sel: Vec<_> = trace.records.iter().filter(|r| r.t >= a && r.t <= b).collect();
    let t: Vec<f64> = sel.iter().map(|r| r.t).collect();
    let d: Vec<f64> = sel.iter().map(|r| r.l2_dist).collect();
    fit_log_linear(&t, &d)
}

#[derive(Debug, Clone, Serialize)]
pub struct GaugeTransferReport {
    pub matched: usize,
    /// Largest pointwise relative gap in lambda at matched times.
    pub lambda_rel: f64,
    pub vol_rel: f64,
    /// Largest gap in `|R|_{L^2}` relative to the largest value along either run.
    pub scalar_rel: f64,
    /// `|Ric|` decay rates over the second half of the run.
    pub ric_rate_ricci: f64,
    pub ric_rate_deturck: f64,
    pub rate_rel: f64,
    /// Decay rate `delta` used for the envelope, from the DeTurck distance fit.
    pub delta: f64,
    /// `max_t |Ric(g(t))| e^{delta t}` along the Ricci flow.
    pub envelope: f64,
    #[serde(skip)]
    pub ricci_trace: FlowTrace,
}

/// Re-runs the unmodified Ricci flow from `g_init` with the configuration of
/// the DeTurck trace and compares diffeomorphism-invariant quantities.
pub fn gauge_transfer_check(trace_deturck: &FlowTrace, g_init: &MetricField) -> Result<GaugeTransferReport> {
    if trace_deturck.kind != FlowKind::DeTurck {
        return Err(Error::InvalidArgument("expected a DeTurck trace".into()));
    }
    if let Termination::LeftNeighbourhood { time, reason } = &trace_deturck.termination {
        return Err(Error::InvalidArgument(format!("DeTurck flow left the neighbourhood at t = {time}: {reason}")));
    }
    let mut cfg = trace_deturck.config.clone();
    cfg.kind = FlowKind::Ricci;
    let ricci = evolve(g_init, &cfg)?;
    if let Termination::LeftNeighbourhood { time, reason } = &ricci.termination {
        return Err(Error::InvalidArgument(format!("Ricci flow left the neighbourhood at t = {time}: {reason}")));
    }

    let rel = |a: f64, b: f64| {
        let s = a.abs().max(b.abs());
        if s == 0.0 { 0.0 } else { (a - b).abs() / s }
    };
    let scalar_scale = trace_deturck
        .records
        .iter()
        .chain(&ricci.records)
        .fold(0.0f64, |m, r| m.max(r.scalar_l2));
    let (mut matched, mut lambda_rel, mut vol_rel, mut scalar_rel) = (0, 0.0f64, 0.0f64, 0.0f64);
    for a in &trace_deturck.records {
        let tol = 1e-9 * a.t.abs().max(1.0);
        if let Some(b) = ricci.records.iter().find(|b| (b.t - a.t).abs() <= tol) {
            matched += 1;
            if a.lambda.is_finite() && b.lambda.is_finite() {
                lambda_rel = lambda_rel.max(rel(a.lambda, b.lambda));
            }
            vol_rel = vol_rel.max(rel(a.vol, b.vol));
            if scalar_scale > 0.0 {
                scalar_rel = scalar_rel.max((a.scalar_l2 - b.scalar_l2).abs() / scalar_scale);
            }
        }
    }

    let half = |tr: &FlowTrace| -> Result<f64> {
        let t_end = tr.records.last().map_or(0.0, |r| r.t);
        let sel: Vec<_> = tr.records.iter().filter(|r| r.t >= 0.5 * t_end).collect();
        let t: Vec<f64> = sel.iter().map(|r| r.t).collect();
        let v: Vec<f64> = sel.iter().map(|r| r.ric_l2).collect();
        Ok(fit_log_linear(&t, &v)?.rate)
    };
    let (ric_rate_ricci, ric_rate_deturck) = match (half(&ricci), half(trace_deturck)) {
        (Ok(a), Ok(b)) => (a, b),
        _ => (f64::NAN, f64::NAN),
    };
    let delta = trace_deturck.fitted_decay_rate.unwrap_or(ric_rate_deturck);
    let envelope = ricci.records.iter().fold(0.0f64, |m, r| m.max(r.ric_l2 * (delta * r.t).exp()));
    Ok(GaugeTransferReport {
        matched,
        lambda_rel,
        vol_rel,
        scalar_rel,
        ric_rate_ricci,
        ric_rate_deturck,
        rate_rel: rel(ric_rate_ricci, ric_rate_deturck),
        delta,
        envelope,
        ricci_trace: ricci,
    })
}
