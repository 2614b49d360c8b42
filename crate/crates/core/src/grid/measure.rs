//! Volume weights and metric inner products.

use super::field::{Field, FieldKind, MetricField, ScalarField};
use super::linalg::Mat3;
use super::GridSpec;
use crate::Result;

/// Per-node volume weights `sqrt(det g) * prod dx_a` together with `g^{-1}`,
/// which is what contracting two tensors needs.
#[derive(Debug, Clone)]
pub struct Measure {
    grid: GridSpec,
    dv: ScalarField,
    ginv: Vec<Mat3>,
}

/// Alternative name matching the weighting role of [`Measure`].
pub type InnerProductWeight = Measure;

impl Measure {
    pub fn of(metric: &MetricField) -> Self {
        let grid = *metric.grid();
        let cell = grid.cell_volume();
        let mut dv = ScalarField::zeros(&grid);
        for (node, w) in dv.data_mut().iter_mut().enumerate() {
            *w = metric.sqrt_det(node) * cell;
        }
        Self { grid, dv, ginv: metric.inverses() }
    }

    /// Euclidean weights: every node weighs one cell volume.
    pub fn flat(grid: &GridSpec) -> Self {
        Self::of(&MetricField::identity(grid))
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn dv(&self) -> &ScalarField {
        &self.dv
    }

    pub fn ginv(&self, node: usize) -> &Mat3 {
        &self.ginv[node]
    }

    /// Discrete `Vol(g) = sum dV`.
    pub fn volume(&self) -> f64 {
        pairwise_sum(self.dv.data())
    }

    /// `int f dV`
    pub fn integrate(&self, f: &ScalarField) -> Result<f64> {
        f.check_grid(&self.grid)?;
        let terms: Vec<f64> = f.data().iter().zip(self.dv.data()).map(|(a, w)| a * w).collect();
        Ok(pairwise_sum(&terms))
    }

    pub fn norm<K: FieldKind>(&self, a: &Field<K>) -> Result<f64> {
        Ok(inner_product(a, a, self)?.max(0.0).sqrt())
    }
}

/// Discrete `int <a, b>_g dV_g`, with tensor indices raised by the metric of `w`.
///
/// Both fields must have the same kind (enforced by the type) and live on the
/// grid of `w`.
pub fn inner_product<K: FieldKind>(a: &Field<K>, b: &Field<K>, w: &Measure) -> Result<f64> {
    a.check_grid(&w.grid)?;
    b.check_grid(&w.grid)?;
    let dim = w.grid.dim();
    let terms: Vec<f64> = (0..w.grid.node_count())
        .map(|n| w.dv.data()[n] * K::contract(a.at(n), b.at(n), &w.ginv[n], dim))
        .collect();
    Ok(pairwise_sum(&terms))
}

/// Sum by recursive halving; blocks of at most 16 terms are added left to right.
///
/// The result depends only on the order of `values`, never on threading.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= 16 {
        values.iter().sum()
    } else {
        let mid = values.len() / 2;
        pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
    }
}
