//! Explicit time integration of the Ricci and Ricci–DeTurck flows, with
//! reference-metric updates and decay diagnostics.

mod analysis;
mod trace;

pub use analysis::{
    fit_decay_rate, fit_log_linear, gauge_transfer_check, kernel_basis, reference_update,
    remainder_check, DecayFit, GaugeTransferReport, RemainderCheck,
};
pub use trace::{FlowRecord, FlowTrace, ReferenceMetric, Termination};

use serde::{Deserialize, Serialize};

use crate::curvature::{deturck_with, Connection, CurvaturePack};
use crate::grid::{linalg, Measure, MetricField, SymTensorField};
use crate::spectral::{ground_state, LambdaOptions};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlowKind {
    Ricci,
    DeTurck,
}

#[derive(Debug, Clone)]
pub struct FlowConfig {
    pub kind: FlowKind,
    /// Background `g0`: the DeTurck gauge, the first reference metric and the
    /// measure `dV_{g0}` of the decay distance. Must be constant.
    pub background: MetricField,
    /// Safety factor `c` in `dt = c min dx^2 / (2 n sup|g^{-1}|)`.
    pub dt_safety: f64,
    pub t_end: f64,
    /// Diagnostics are recorded every `record_every` background-size steps;
    /// steps are shortened to land on those times exactly.
    pub record_every: usize,
    /// Interval `A` between reference updates; `None` disables them.
    pub reference_update_period: Option<f64>,
    pub track_lambda: bool,
    pub lambda: LambdaOptions,
}

impl FlowConfig {
    pub fn new(kind: FlowKind, background: MetricField) -> Self {
        Self {
            kind,
            background,
            dt_safety: 0.5,
            t_end: 1.0,
            record_every: 10,
            reference_update_period: None,
            track_lambda: false,
            lambda: LambdaOptions::default(),
        }
    }

    pub fn ricci(background: MetricField) -> Self {
        Self::new(FlowKind::Ricci, background)
    }

    pub fn deturck(background: MetricField) -> Self {
        Self::new(FlowKind::DeTurck, background)
    }

    fn validate(&self) -> Result<()> {
        if !(self.dt_safety > 0.0 && self.dt_safety <= 1.0) {
            return Err(Error::InvalidArgument(format!("dt_safety {} not in (0, 1]", self.dt_safety)));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::InvalidArgument(format!("t_end {} must be finite and >= 0", self.t_end)));
        }
        if self.record_every == 0 {
            return Err(Error::InvalidArgument("record_every must be positive".into()));
        }
        if let Some(a) = self.reference_update_period {
            if !(a > 0.0 && a.is_finite()) {
                return Err(Error::InvalidArgument(format!("reference_update_period {a} must be > 0")));
            }
        }
        if !self.background.is_constant(0.0) {
            return Err(Error::NonFlatBackground);
        }
        Ok(())
    }

    pub fn to_json(&self) -> serde_json::Value {
        let dim = self.background.grid().dim();
        let m = self.background.matrix(0);
        serde_json::json!({
            "kind": self.kind,
            "grid": self.background.grid(),
            "background": (0..dim).map(|i| m[i][..dim].to_vec()).collect::<Vec<_>>(),
            "dt_safety": self.dt_safety,
            "t_end": self.t_end,
            "record_every": self.record_every,
            "reference_update_period": self.reference_update_period,
            "track_lambda": self.track_lambda,
        })
    }
}

/// Parabolic step bound `c min dx^2 / (2 n sup_nodes |g^{-1}|)`.
pub fn cfl_dt(g: &MetricField, safety: f64) -> f64 {
    let grid = g.grid();
    let dim = grid.dim();
    let dx2 = (0..dim).map(|a| grid.spacing(a).powi(2)).fold(f64::INFINITY, f64::min);
    let ginv_sup = (0..grid.node_count())
        .map(|n| 1.0 / linalg::min_eigenvalue(&g.matrix(n), dim))
        .fold(0.0, f64::max);
    safety * dx2 / (2.0 * dim as f64 * ginv_sup)
}

/// Right-hand side of the flow, with the background connection prepared once.
pub(crate) struct Velocity {
    kind: FlowKind,
    conn0: Connection,
}

impl Velocity {
    pub(crate) fn new(kind: FlowKind, background: &MetricField) -> Self {
        Self { kind, conn0: Connection::new(background) }
    }

    pub(crate) fn eval(&self, g: &MetricField) -> SymTensorField {
        let conn = Connection::new(g);
        let ric = CurvaturePack::from_connection(&conn).ricci().scale(-2.0);
        match self.kind {
            FlowKind::Ricci => ric,
            FlowKind::DeTurck => ric.add(&deturck_with(&conn, &self.conn0)).expect("same grid"),
        }
    }

    /// One classical RK4 step of size `dt`; every stage must stay admissible.
    pub(crate) fn rk4(&self, g: &MetricField, dt: f64) -> Result<MetricField> {
        let k1 = self.eval(g);
        let k2 = self.eval(&stage(g, &k1, 0.5 * dt)?);
        let k3 = self.eval(&stage(g, &k2, 0.5 * dt)?);
        let k4 = self.eval(&stage(g, &k3, dt)?);
        let mut next = g.tensor().clone();
        let w = dt / 6.0;
        for (i, v) in next.data_mut().iter_mut().enumerate() {
            *v += w * (k1.data()[i] + 2.0 * k2.data()[i] + 2.0 * k3.data()[i] + k4.data()[i]);
        }
        MetricField::new(next)
    }
}

fn stage(g: &MetricField, k: &SymTensorField, a: f64) -> Result<MetricField> {
    let mut t = g.tensor().clone();
    t.axpy(a, k)?;
    MetricField::new(t)
}

/// One RK4 step with the CFL step size of `g`.
pub fn flow_step(g: &MetricField, cfg: &FlowConfig) -> Result<MetricField> {
    g.tensor().check_grid(cfg.background.grid())?;
    Velocity::new(cfg.kind, &cfg.background).rk4(g, cfl_dt(g, cfg.dt_safety))
}

/// Integrates from `g_init` to `cfg.t_end`.
///
/// Leaving the admissible cone ends the run early with
/// [`Termination::LeftNeighbourhood`]; only invalid configuration is an error.
pub fn evolve(g_init: &MetricField, cfg: &FlowConfig) -> Result<FlowTrace> {
    cfg.validate()?;
    g_init.tensor().check_grid(cfg.background.grid())?;
    let velocity = Velocity::new(cfg.kind, &cfg.background);
    let measure0 = Measure::of(&cfg.background);
    let basis = kernel_basis(&cfg.background);

    // Record times depend only on the background, so runs from different
    // initial data share a time base.
    let record_dt = cfg.record_every as f64 * cfl_dt(&cfg.background, cfg.dt_safety);
    let mut recorder = trace::Recorder::new(cfg, measure0);
    let mut g = g_init.clone();
    let mut reference = cfg.background.clone();
    let mut t = 0.0;
    let mut steps = 0usize;
    let mut next_record = 1usize;
    let mut next_update = 1usize;
    // Largest sup|g~ - g0| seen since the last update, for the constant C.
    let mut interval_sup = trace::sup_diff(&g, &cfg.background);
    recorder.record(0.0, &g, &reference);

    let snap = |target: f64, t: f64| (target - t).abs() <= 1e-12 * target.abs().max(1.0);
    let mut termination = Termination::Completed;
    while t < cfg.t_end && !snap(cfg.t_end, t) {
        let t_rec = next_record as f64 * record_dt;
        let t_upd = cfg
            .reference_update_period
            .map(|a| next_update as f64 * a)
            .filter(|&tu| tu < cfg.t_end && !snap(cfg.t_end, tu));
        let mut target = cfg.t_end.min(t_rec);
        if let Some(tu) = t_upd {
            target = target.min(tu);
        }
        // Equal substeps up to the next checkpoint, none above the CFL bound.
        let span = target - t;
        let dt = span / (span / cfl_dt(&g, cfg.dt_safety)).ceil().max(1.0);
        match velocity.rk4(&g, dt) {
            Ok(next) => g = next,
            Err(e) => {
                termination = Termination::LeftNeighbourhood { time: t, reason: e.to_string() };
                break;
            }
        }
        steps += 1;
        t = if snap(target, t + dt) { target } else { t + dt };
        interval_sup = interval_sup.max(trace::sup_diff(&g, &cfg.background));

        let mut due = snap(cfg.t_end, t);
        if snap(t_rec, t) {
            next_record += 1;
            due = true;
        }
        if let Some(tu) = t_upd {
            if snap(tu, t) {
                next_update += 1;
                match reference_update(&g, &cfg.background, &basis) {
                    Ok(g1) => {
                        reference = g1;
                        recorder.push_reference(t, &g, &reference, &basis, interval_sup)?;
                        interval_sup = trace::sup_diff(&g, &cfg.background);
                        due = true;
                    }
                    Err(e) => {
                        termination = Termination::LeftNeighbourhood { time: t, reason: e.to_string() };
                        recorder.record(t, &g, &reference);
                        break;
                    }
                }
            }
        }
        if due {
            recorder.record(t, &g, &reference);
        }
    }
    Ok(recorder.finish(g, steps, termination))
}

/// Ground state solve reused across records through warm starts.
pub(crate) struct LambdaTracker {
    opts: LambdaOptions,
    warm: Option<crate::grid::ScalarField>,
}

impl LambdaTracker {
    pub(crate) fn new(opts: LambdaOptions) -> Self {
        Self { opts, warm: None }
    }

    pub(crate) fn lambda(&mut self, g: &MetricField) -> f64 {
        match ground_state(g, &self.opts, self.warm.as_ref()) {
            Ok(gs) => {
                self.warm = Some(gs.u);
                gs.lambda
            }
            Err(_) => f64::NAN,
        }
    }
}
