//! Periodic structured grids on flat-background tori, tensor-field storage,
//! finite differences and volume-weighted inner products.
//!
//! Nodes are numbered with axis 0 varying fastest. Field data is node-major:
//! all components of node 0, then node 1, and so on. Symmetric tensors store
//! the `i <= j` components in lexicographic order.

mod field;
mod io;
mod laplacian;
pub(crate) mod linalg;
mod measure;
mod perturb;
pub(crate) mod stencil;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use field::{
    partial_derivative, Field, FieldKind, MetricField, Scalar, ScalarField, SymTensor,
    SymTensorField, Vector, VectorField, POSITIVITY_FLOOR,
};
pub use io::{read_snapshot, write_csv, write_snapshot, Snapshot};
pub use laplacian::StaggeredLaplacian;
pub use linalg::{sym_index, Mat3};
pub use measure::{inner_product, pairwise_sum, InnerProductWeight, Measure};
pub use perturb::band_limited_perturbation;
pub use stencil::StencilOrder;

/// Uniform periodic grid of `points^dim` nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    dim: usize,
    points: usize,
    lengths: [f64; 3],
    stencil: StencilOrder,
}

impl GridSpec {
    pub fn new(dim: usize, points: usize, side_lengths: &[f64]) -> Result<Self> {
        if !(2..=3).contains(&dim) {
            return Err(Error::InvalidGrid(format!("dimension {dim} not in {{2, 3}}")));
        }
        if points < 8 {
            return Err(Error::InvalidGrid(format!("{points} points per axis (need >= 8)")));
        }
        if side_lengths.len() != dim {
            return Err(Error::InvalidGrid(format!(
                "{} side lengths for dimension {dim}",
                side_lengths.len()
            )));
        }
        let mut lengths = [0.0; 3];
        for (a, &l) in side_lengths.iter().enumerate() {
            if !(l.is_finite() && l > 0.0) {
                return Err(Error::InvalidGrid(format!("side length {l} on axis {a}")));
            }
            lengths[a] = l;
        }
        Ok(Self { dim, points, lengths, stencil: StencilOrder::Second })
    }

    /// Cubic torus with every side equal to `side`.
    pub fn torus(dim: usize, points: usize, side: f64) -> Result<Self> {
        Self::new(dim, points, &vec![side; dim])
    }

    pub fn with_stencil(mut self, stencil: StencilOrder) -> Self {
        self.stencil = stencil;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn stencil(&self) -> StencilOrder {
        self.stencil
    }

    pub fn side_lengths(&self) -> &[f64] {
        &self.lengths[..self.dim]
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.lengths[axis] / self.points as f64
    }

    pub fn node_count(&self) -> usize {
        self.points.pow(self.dim as u32)
    }

    /// Coordinate volume of one grid cell.
    pub fn cell_volume(&self) -> f64 {
        (0..self.dim).map(|a| self.spacing(a)).product()
    }

    /// Coordinate volume of the whole torus.
    pub fn coordinate_volume(&self) -> f64 {
        self.side_lengths().iter().product()
    }

    /// Smallest nonzero value of `sum_a (2 pi k_a / L_a)^2` over integer wavevectors.
    pub fn fundamental_wavenumber_sq(&self) -> f64 {
        self.side_lengths()
            .iter()
            .map(|l| (2.0 * PI / l).powi(2))
            .fold(f64::INFINITY, f64::min)
    }

    pub(crate) fn stride(&self, axis: usize) -> usize {
        self.points.pow(axis as u32)
    }

    pub fn check_axis(&self, axis: usize) -> Result<()> {
        if axis < self.dim {
            Ok(())
        } else {
            Err(Error::AxisOutOfRange { axis, dim: self.dim })
        }
    }

    pub fn coords(&self, node: usize) -> [usize; 3] {
        let mut c = [0; 3];
        let mut rest = node;
        for slot in c.iter_mut().take(self.dim) {
            *slot = rest % self.points;
            rest /= self.points;
        }
        c
    }

    pub fn index(&self, coords: [usize; 3]) -> usize {
        (0..self.dim).rev().fold(0, |acc, a| acc * self.points + coords[a] % self.points)
    }

    /// Node reached from `node` by `offset` steps along `axis`, wrapping periodically.
    pub fn shift(&self, node: usize, axis: usize, offset: isize) -> usize {
        let stride = self.stride(axis);
        let c = ((node / stride) % self.points) as isize;
        let j = (c + offset).rem_euclid(self.points as isize);
        (node as isize + (j - c) * stride as isize) as usize
    }

    /// Coordinates `x_a = i_a * dx_a` of a node.
    pub fn position(&self, node: usize) -> [f64; 3] {
        let c = self.coords(node);
        let mut x = [0.0; 3];
        for a in 0..self.dim {
            x[a] = c[a] as f64 * self.spacing(a);
        }
        x
    }
}
