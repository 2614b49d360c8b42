//! Perelman's lambda, its variations, the Lichnerowicz spectrum and the
//! linear-stability verdict.

mod lambda;
mod mass;
mod second;
pub mod solver;

use std::path::Path;

use serde::Serialize;
use serde_json::json;

use crate::curvature::{Lichnerowicz, LichnerowiczOptions};
use crate::grid::{
    inner_product, write_snapshot, GridSpec, Measure, MetricField, ScalarField, SymTensor,
    SymTensorField,
};
use crate::{Error, Result};

pub use lambda::{first_variation_lambda, ground_state, lambda_of, perelman_F, GroundState, LambdaOptions};
pub(crate) use mass::MassFactor;
pub use second::{decompose, second_variation_L, Decomposition, CG_TOL};
pub(crate) use second::{apply_l, FlatOps};
use solver::{lanczos, EigenOptions, Which};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    LinearlyStable,
    Unstable,
    Inconclusive,
}

/// Settings of [`lichnerowicz_spectrum_with`].
#[derive(Debug, Clone, Copy)]
pub struct SpectrumOptions {
    /// Number of algebraically largest eigenvalues to resolve.
    pub k: usize,
    /// Zero-mode threshold and residual bound; defaults to `1e-6 k_min^2`.
    pub eig_tol: Option<f64>,
    pub block: usize,
    pub max_basis: usize,
    pub max_restarts: usize,
    pub seed: u64,
    pub operator: LichnerowiczOptions,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        Self {
            k: 8,
            eig_tol: None,
            block: 8,
            max_basis: 96,
            max_restarts: 200,
            seed: 0,
            operator: LichnerowiczOptions::default(),
        }
    }
}

impl SpectrumOptions {
    pub fn eig_tol_for(&self, grid: &GridSpec) -> f64 {
        self.eig_tol.unwrap_or(1e-6 * grid.fundamental_wavenumber_sq())
    }
}

#[derive(Debug, Clone)]
pub struct EigenField {
    pub value: f64,
    /// `|Delta_L h - value h| / |h|` in the weighted norm.
    pub residual: f64,
    pub field: SymTensorField,
}

#[derive(Debug, Clone)]
pub struct SpectralReport {
    pub lambda_value: Option<f64>,
    pub ground_state: Option<ScalarField>,
    /// Sorted from the largest eigenvalue down.
    pub lichnerowicz_eigs: Vec<EigenField>,
    pub kernel_dim: usize,
    pub gap_two_delta: Option<f64>,
    pub verdict: Verdict,
    pub eig_tol: f64,
    /// Why the verdict is inconclusive, when it is.
    pub note: Option<String>,
}

impl SpectralReport {
    pub fn delta(&self) -> Option<f64> {
        self.gap_two_delta.map(|g| 0.5 * g)
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "lambda": self.lambda_value,
            "eigenvalues": self.lichnerowicz_eigs.iter().map(|e| e.value).collect::<Vec<_>>(),
            "residuals": self.lichnerowicz_eigs.iter().map(|e| e.residual).collect::<Vec<_>>(),
            "kernel_dim": self.kernel_dim,
            "gap_two_delta": self.gap_two_delta,
            "delta": self.delta(),
            "verdict": self.verdict,
            "eig_tol": self.eig_tol,
            "note": self.note,
        })
    }

    /// Writes `eig_<i>.rsl` snapshots for every resolved eigenfield.
    pub fn write_eigenfields(&self, dir: &Path) -> Result<()> {
        for (i, e) in self.lichnerowicz_eigs.iter().enumerate() {
            write_snapshot(dir.join(format!("eig_{i:02}.rsl")), &e.field)?;
        }
        Ok(())
    }
}

/// The `k` largest eigenvalues of the Lichnerowicz Laplacian with default settings.
pub fn lichnerowicz_spectrum(g: &MetricField, k: usize) -> SpectralReport {
    lichnerowicz_spectrum_with(g, &SpectrumOptions { k, ..Default::default() })
}

/// Eigenvalues of `Delta_L` (self-adjoint in the `dV_g` inner product) by
/// block Lanczos; see [`solver::lanczos`] for the restart policy.
///
/// Eigenvalues with `|mu| <= eig_tol` count as kernel. The gap `2 delta` is
/// the smallest resolved nonzero magnitude. Failure of either solve turns
/// into an `Inconclusive` report instead of an error.
pub fn lichnerowicz_spectrum_with(g: &MetricField, opts: &SpectrumOptions) -> SpectralReport {
    let grid = *g.grid();
    let eig_tol = opts.eig_tol_for(&grid);
    let mut report = SpectralReport {
        lambda_value: None,
        ground_state: None,
        lichnerowicz_eigs: Vec::new(),
        kernel_dim: 0,
        gap_two_delta: None,
        verdict: Verdict::Inconclusive,
        eig_tol,
        note: None,
    };
    match ground_state(g, &LambdaOptions { seed: opts.seed, ..Default::default() }, None) {
        Ok(gs) => {
            report.lambda_value = Some(gs.lambda);
            report.ground_state = Some(gs.u);
        }
        Err(e) => report.note = Some(format!("lambda: {e}")),
    }
    let eigs = match lichnerowicz_eigs(g, opts, eig_tol) {
        Ok(e) => e,
        Err(e) => {
            report.note = Some(format!("spectrum: {e}"));
            return report;
        }
    };
    report.kernel_dim = eigs.iter().filter(|e| e.value.abs() <= eig_tol).count();
    report.gap_two_delta = eigs
        .iter()
        .map(|e| e.value.abs())
        .filter(|&v| v > eig_tol)
        .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.min(v))));
    report.verdict = if eigs.iter().any(|e| e.value > eig_tol && e.residual <= eig_tol) {
        Verdict::Unstable
    } else if report.gap_two_delta.is_none() {
        report.note = Some(format!(
            "all {} resolved eigenvalues lie within eig_tol = {eig_tol:e} of zero",
            eigs.len()
        ));
        Verdict::Inconclusive
    } else {
        Verdict::LinearlyStable
    };
    report.lichnerowicz_eigs = eigs;
    report
}

fn lichnerowicz_eigs(g: &MetricField, opts: &SpectrumOptions, eig_tol: f64) -> Result<Vec<EigenField>> {
    let grid = *g.grid();
    let op = Lichnerowicz::new(g, opts.operator);
    let mass = MassFactor::new::<SymTensor>(&Measure::of(g));
    let apply = |z: &[f64]| mass.forward(&op.apply_raw(&mass.backward(z)));
    let n = grid.node_count() * crate::grid::linalg::sym_components(grid.dim());
    let eo = EigenOptions {
        nev: opts.k,
        block: opts.block.max(1),
        max_basis: opts.max_basis,
        max_restarts: opts.max_restarts,
        tol: eig_tol,
        seed: opts.seed,
    };
    let pairs = lanczos(n, &apply, Which::Largest, &eo, &[])?;
    pairs
        .into_iter()
        .map(|p| {
            Ok(EigenField {
                value: p.value,
                residual: p.residual,
                field: SymTensorField::from_vec(&grid, mass.backward(&p.vector))?,
            })
        })
        .collect()
}

/// Linear stability of `g`: the spectrum verdict, cross-checked on flat
/// backgrounds by evaluating `<L n, n>` on the TT parts of the resolved
/// eigenfields.
pub fn stability_verdict(g: &MetricField) -> Verdict {
    stability_verdict_with(g, &SpectrumOptions::default())
}

pub fn stability_verdict_with(g: &MetricField, opts: &SpectrumOptions) -> Verdict {
    let report = lichnerowicz_spectrum_with(g, opts);
    if report.verdict != Verdict::LinearlyStable {
        return report.verdict;
    }
    match tt_check(g, &report) {
        Ok(true) => Verdict::LinearlyStable,
        Ok(false) => Verdict::Unstable,
        Err(Error::NonFlatBackground) => Verdict::LinearlyStable,
        Err(_) => Verdict::Inconclusive,
    }
}

fn tt_check(g: &MetricField, report: &SpectralReport) -> Result<bool> {
    let ops = FlatOps::new(g)?;
    for e in &report.lichnerowicz_eigs {
        let n = decompose(&e.field, g)?.n_part;
        let nn = inner_product(&n, &n, &ops.measure)?;
        if nn <= 1e-20 {
            continue;
        }
        let value = inner_product(&apply_l(&ops, &n)?, &n, &ops.measure)?;
        if value > report.eig_tol * nn {
            return Ok(false);
        }
    }
    Ok(true)
}
