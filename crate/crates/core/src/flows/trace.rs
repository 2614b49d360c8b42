//! Recorded diagnostics of a flow run and their export.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use super::{fit_decay_rate, FlowConfig, FlowKind, LambdaTracker};
use crate::curvature::curvature_of;
use crate::grid::{inner_product, write_snapshot, Measure, MetricField, SymTensorField};
use crate::Result;

/// Diagnostics at one recorded time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FlowRecord {
    pub t: f64,
    /// `NaN` when lambda tracking is off or the solve failed.
    pub lambda: f64,
    /// `|g~ - g_i|` in `L^2(dV_{g0})`.
    pub l2_dist: f64,
    pub sup_dist: f64,
    pub ref_index: usize,
    /// `Vol(g~)`
    pub vol: f64,
    /// `|Ric(g~)|` in `L^2(dV_{g~})`.
    pub ric_l2: f64,
    /// `|R(g~)|` in `L^2(dV_{g~})`.
    pub scalar_l2: f64,
}

#[derive(Debug, Clone)]
pub struct ReferenceMetric {
    pub time: f64,
    pub metric: MetricField,
    /// `sup|g_i - g0| / sup_I |g~ - g0|` over the preceding interval.
    pub ratio: f64,
    /// Largest `|<g~ - g_i, B>|` over the normalised kernel basis right after the update.
    pub zero_mode: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Termination {
    Completed,
    /// The flow left the admissible cone (or produced non-finite values).
    LeftNeighbourhood { time: f64, reason: String },
}

#[derive(Debug, Clone)]
pub struct FlowTrace {
    pub kind: FlowKind,
    pub records: Vec<FlowRecord>,
    /// `g0` first (time 0, ratio 0), then every updated reference.
    pub references: Vec<ReferenceMetric>,
    /// Decay rate of `l2_dist` over the last reference interval, when it holds
    /// at least ten positive samples.
    pub fitted_decay_rate: Option<f64>,
    pub termination: Termination,
    pub steps: usize,
    pub final_metric: MetricField,
    pub config: FlowConfig,
}

impl FlowTrace {
    pub fn times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.t).collect()
    }

    pub fn lambda_series(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.lambda).collect()
    }

    pub fn l2_distance_to_reference(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.l2_dist).collect()
    }

    pub fn sup_distance(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.sup_dist).collect()
    }

    pub fn reference_metrics(&self) -> Vec<(f64, &MetricField)> {
        self.references.iter().map(|r| (r.time, &r.metric)).collect()
    }

    pub fn completed(&self) -> bool {
        self.termination == Termination::Completed
    }

    /// `t,lambda,l2_dist,sup_dist,ref_index,vol,ric_l2,scalar_l2`, shortest
    /// round-trip float formatting.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,lambda,l2_dist,sup_dist,ref_index,vol,ric_l2,scalar_l2\n");
        for r in &self.records {
            let _ = writeln!(
                s,
                "{:e},{:e},{:e},{:e},{},{:e},{:e},{:e}",
                r.t, r.lambda, r.l2_dist, r.sup_dist, r.ref_index, r.vol, r.ric_l2, r.scalar_l2
            );
        }
        s
    }

    pub fn summary_json(&self) -> serde_json::Value {
        let refs: Vec<_> = self
            .references
            .iter()
            .map(|r| serde_json::json!({"time": r.time, "ratio": r.ratio, "zero_mode": r.zero_mode}))
            .collect();
        serde_json::json!({
            "kind": self.kind,
            "steps": self.steps,
            "records": self.records.len(),
            "termination": self.termination,
            "fitted_decay_rate": self.fitted_decay_rate,
            "references": refs,
            "config": self.config.to_json(),
        })
    }

    /// `trace.csv`, `summary.json` and one `reference_<i>.rsl` snapshot per reference.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("trace.csv"), self.to_csv())?;
        let json = serde_json::to_string_pretty(&self.summary_json()).expect("serialisable");
        fs::write(dir.join("summary.json"), json)?;
        for (i, r) in self.references.iter().enumerate() {
            write_snapshot(dir.join(format!("reference_{i}.rsl")), r.metric.tensor())?;
        }
        Ok(())
    }
}

pub(crate) fn sup_diff(a: &MetricField, b: &MetricField) -> f64 {
    a.tensor()
        .data()
        .iter()
        .zip(b.tensor().data())
        .fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

pub(crate) struct Recorder {
    config: FlowConfig,
    measure0: Measure,
    lambda: Option<LambdaTracker>,
    records: Vec<FlowRecord>,
    references: Vec<ReferenceMetric>,
}

impl Recorder {
    pub(crate) fn new(cfg: &FlowConfig, measure0: Measure) -> Self {
        let references = vec![ReferenceMetric {
            time: 0.0,
            metric: cfg.background.clone(),
            ratio: 0.0,
            zero_mode: 0.0,
        }];
        Self {
            config: cfg.clone(),
            measure0,
            lambda: cfg.track_lambda.then(|| LambdaTracker::new(cfg.lambda)),
            records: Vec::new(),
            references,
        }
    }

    pub(crate) fn record(&mut self, t: f64, g: &MetricField, reference: &MetricField) {
        let diff = g.tensor().sub(reference.tensor()).expect("same grid");
        let l2_dist = self.measure0.norm(&diff).expect("same grid");
        let measure = Measure::of(g);
        let curv = curvature_of(g);
        let lambda = self.lambda.as_mut().map_or(f64::NAN, |l| l.lambda(g));
        self.records.push(FlowRecord {
            t,
            lambda,
            l2_dist,
            sup_dist: diff.sup_norm(),
            ref_index: self.references.len() - 1,
            vol: measure.volume(),
            ric_l2: measure.norm(curv.ricci()).expect("same grid"),
            scalar_l2: measure.norm(curv.scalar()).expect("same grid"),
        });
    }

    pub(crate) fn push_reference(
        &mut self,
        t: f64,
        g: &MetricField,
        g1: &MetricField,
        basis: &[SymTensorField],
        interval_sup: f64,
    ) -> Result<()> {
        let diff = g.tensor().sub(g1.tensor())?;
        let mut zero_mode: f64 = 0.0;
        for b in orthonormal(basis, &self.measure0)? {
            zero_mode = zero_mode.max(inner_product(&diff, &b, &self.measure0)?.abs());
        }
        let ratio = if interval_sup > 0.0 { sup_diff(g1, &self.config.background) / interval_sup } else { 0.0 };
        self.references.push(ReferenceMetric { time: t, metric: g1.clone(), ratio, zero_mode });
        Ok(())
    }

    pub(crate) fn finish(self, final_metric: MetricField, steps: usize, termination: Termination) -> FlowTrace {
        let mut trace = FlowTrace {
            kind: self.config.kind,
            records: self.records,
            references: self.references,
            fitted_decay_rate: None,
            termination,
            steps,
            final_metric,
            config: self.config,
        };
        let last = trace.references.len() - 1;
        let seg: Vec<f64> = trace.records.iter().filter(|r| r.ref_index == last).map(|r| r.t).collect();
        if let (Some(&a), Some(&b)) = (seg.first(), seg.last()) {
            trace.fitted_decay_rate = fit_decay_rate(&trace, (a, b)).ok().map(|f| f.rate);
        }
        trace
    }
}

/// Gram–Schmidt in the inner product of `w`.
pub(crate) fn orthonormal(basis: &[SymTensorField], w: &Measure) -> Result<Vec<SymTensorField>> {
    let mut out: Vec<SymTensorField> = Vec::with_capacity(basis.len());
    for b in basis {
        let mut v = b.clone();
        for _ in 0..2 {
            for q in &out {
                let c = inner_product(&v, q, w)?;
                v.axpy(-c, q)?;
            }
        }
        let n = w.norm(&v)?;
        if n > 1e-12 * w.norm(b)?.max(f64::MIN_POSITIVE) {
            out.push(v.scale(1.0 / n));
        }
    }
    Ok(out)
}
