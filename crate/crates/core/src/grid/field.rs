use std::fmt;
use std::marker::PhantomData;

use super::linalg::{self, sym_components, Mat3};
use super::stencil;
use super::GridSpec;
use crate::{Error, Result};

/// Smallest admissible eigenvalue of a metric at any node.
pub const POSITIVITY_FLOOR: f64 = 1e-8;

/// Tensor rank of a field and how two values are contracted with a metric.
pub trait FieldKind: Copy + Clone + PartialEq + fmt::Debug + Default + Send + Sync + 'static {
    const RANK: u8;
    fn components(dim: usize) -> usize;
    /// Pointwise `<a, b>` with indices raised by `ginv`.
    fn contract(a: &[f64], b: &[f64], ginv: &Mat3, dim: usize) -> f64;
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Scalar;

/// One-forms `X_j` (indices down; raised with the metric when contracted).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Vector;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SymTensor;

impl FieldKind for Scalar {
    const RANK: u8 = 0;
    fn components(_: usize) -> usize {
        1
    }
    fn contract(a: &[f64], b: &[f64], _: &Mat3, _: usize) -> f64 {
        a[0] * b[0]
    }
}

impl FieldKind for Vector {
    const RANK: u8 = 1;
    fn components(dim: usize) -> usize {
        dim
    }
    fn contract(a: &[f64], b: &[f64], ginv: &Mat3, dim: usize) -> f64 {
        let mut s = 0.0;
        for i in 0..dim {
            for j in 0..dim {
                s += ginv[i][j] * a[i] * b[j];
            }
        }
        s
    }
}

impl FieldKind for SymTensor {
    const RANK: u8 = 2;
    fn components(dim: usize) -> usize {
        sym_components(dim)
    }
    fn contract(a: &[f64], b: &[f64], ginv: &Mat3, dim: usize) -> f64 {
        let am = linalg::unpack(a, dim);
        let bm = linalg::unpack(b, dim);
        // g^{ik} g^{jl} a_ij b_kl = tr(G a G b)
        let gag = linalg::triple(ginv, &am, ginv, dim);
        linalg::contract2(&gag, &bm, dim)
    }
}

/// One value of kind `K` per grid node.
#[derive(Clone, PartialEq)]
pub struct Field<K: FieldKind> {
    grid: GridSpec,
    data: Vec<f64>,
    kind: PhantomData<K>,
}

pub type ScalarField = Field<Scalar>;
pub type VectorField = Field<Vector>;
pub type SymTensorField = Field<SymTensor>;

impl<K: FieldKind> fmt::Debug for Field<K> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Field")
            .field("rank", &K::RANK)
            .field("grid", &self.grid)
            .field("len", &self.data.len())
            .finish()
    }
}

impl<K: FieldKind> Field<K> {
    pub fn zeros(grid: &GridSpec) -> Self {
        let nc = K::components(grid.dim());
        Self { grid: *grid, data: vec![0.0; nc * grid.node_count()], kind: PhantomData }
    }

    pub fn from_vec(grid: &GridSpec, data: Vec<f64>) -> Result<Self> {
        let expected = K::components(grid.dim()) * grid.node_count();
        if data.len() != expected {
            return Err(Error::InvalidArgument(format!(
                "field data has {} values, expected {expected}",
                data.len()
            )));
        }
        Ok(Self { grid: *grid, data, kind: PhantomData })
    }

    /// Builds a field by evaluating `f(position, components)` at every node.
    pub fn from_fn(grid: &GridSpec, mut f: impl FnMut([f64; 3], &mut [f64])) -> Self {
        let mut out = Self::zeros(grid);
        let nc = out.components();
        for node in 0..grid.node_count() {
            f(grid.position(node), &mut out.data[node * nc..(node + 1) * nc]);
        }
        out
    }

    /// Same value at every node.
    pub fn constant(grid: &GridSpec, value: &[f64]) -> Result<Self> {
        let nc = K::components(grid.dim());
        if value.len() != nc {
            return Err(Error::InvalidArgument(format!(
                "constant has {} components, expected {nc}",
                value.len()
            )));
        }
        Ok(Self::from_fn(grid, |_, out| out.copy_from_slice(value)))
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn components(&self) -> usize {
        K::components(self.grid.dim())
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn at(&self, node: usize) -> &[f64] {
        let nc = self.components();
        &self.data[node * nc..(node + 1) * nc]
    }

    pub fn at_mut(&mut self, node: usize) -> &mut [f64] {
        let nc = self.components();
        &mut self.data[node * nc..(node + 1) * nc]
    }

    pub fn check_grid(&self, other_grid: &GridSpec) -> Result<()> {
        if &self.grid == other_grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|v| v * s)
    }

    /// `self += a * x`
    pub fn axpy(&mut self, a: f64, x: &Self) -> Result<()> {
        x.check_grid(&self.grid)?;
        self.data.iter_mut().zip(&x.data).for_each(|(s, v)| *s += a * v);
        Ok(())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { grid: self.grid, data: self.data.iter().map(|&v| f(v)).collect(), kind: PhantomData }
    }

    fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        other.check_grid(&self.grid)?;
        Ok(Self {
            grid: self.grid,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
            kind: PhantomData,
        })
    }

    /// Largest absolute stored component over all nodes.
    pub fn sup_norm(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn first_non_finite(&self) -> Option<usize> {
        let nc = self.components();
        self.data.iter().position(|v| !v.is_finite()).map(|i| i / nc)
    }

    /// Component-wise mean over the nodes (coordinate average).
    pub fn node_mean(&self) -> Vec<f64> {
        let nc = self.components();
        (0..nc)
            .map(|c| {
                let vals: Vec<f64> = self.data.iter().skip(c).step_by(nc).copied().collect();
                super::pairwise_sum(&vals) / self.grid.node_count() as f64
            })
            .collect()
    }
}

impl SymTensorField {
    pub fn get(&self, node: usize, i: usize, j: usize) -> f64 {
        let dim = self.grid.dim();
        self.at(node)[linalg::sym_index(i, j, dim)]
    }

    pub fn matrix(&self, node: usize) -> Mat3 {
        linalg::unpack(self.at(node), self.grid.dim())
    }

    pub fn set_matrix(&mut self, node: usize, m: &Mat3) {
        let dim = self.grid.dim();
        linalg::pack(m, dim, self.at_mut(node));
    }

    /// Pointwise trace with respect to `metric`.
    pub fn trace(&self, metric: &MetricField) -> Result<ScalarField> {
        metric.tensor().check_grid(&self.grid)?;
        let dim = self.grid.dim();
        let mut out = ScalarField::zeros(&self.grid);
        for node in 0..self.grid.node_count() {
            let ginv = linalg::inverse(&metric.tensor().matrix(node), dim);
            out.data[node] = linalg::contract2(&ginv, &self.matrix(node), dim);
        }
        Ok(out)
    }
}

/// Central finite-difference derivative of any field along `axis`.
///
/// `order` selects the first (`1`) or second (`2`) derivative. The stencil
/// accuracy is taken from the grid.
pub fn partial_derivative<K: FieldKind>(field: &Field<K>, axis: usize, order: u8) -> Result<Field<K>> {
    field.grid.check_axis(axis)?;
    let nc = field.components();
    let data = match order {
        1 => stencil::d1(&field.grid, &field.data, nc, axis),
        2 => stencil::d2(&field.grid, &field.data, nc, axis),
        other => {
            return Err(Error::InvalidArgument(format!("derivative order {other} not in {{1, 2}}")))
        }
    };
    Field::from_vec(&field.grid, data)
}

/// Symmetric positive-definite tensor field.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricField(SymTensorField);

impl MetricField {
    /// Validates positivity (smallest eigenvalue above [`POSITIVITY_FLOOR`]) at every node.
    pub fn new(tensor: SymTensorField) -> Result<Self> {
        let dim = tensor.grid.dim();
        for node in 0..tensor.grid.node_count() {
            let comps = tensor.at(node);
            if comps.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { node });
            }
            let min = linalg::min_eigenvalue(&tensor.matrix(node), dim);
            if !(min > POSITIVITY_FLOOR) {
                return Err(Error::NotPositiveDefinite { node, min_eigenvalue: min });
            }
        }
        Ok(Self(tensor))
    }

    pub fn identity(grid: &GridSpec) -> Self {
        let mut id = [[0.0; 3]; 3];
        for (i, row) in id.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        Self::constant(grid, &id).expect("identity is positive definite")
    }

    pub fn constant(grid: &GridSpec, m: &Mat3) -> Result<Self> {
        let mut t = SymTensorField::zeros(grid);
        for node in 0..grid.node_count() {
            t.set_matrix(node, m);
        }
        Self::new(t)
    }

    /// `base + h`, checked for admissibility.
    pub fn perturbed(&self, h: &SymTensorField) -> Result<Self> {
        Self::new(self.0.add(h)?)
    }

    pub fn grid(&self) -> &GridSpec {
        self.0.grid()
    }

    pub fn tensor(&self) -> &SymTensorField {
        &self.0
    }

    pub fn into_tensor(self) -> SymTensorField {
        self.0
    }

    pub fn matrix(&self, node: usize) -> Mat3 {
        self.0.matrix(node)
    }

    pub fn inverse_at(&self, node: usize) -> Mat3 {
        linalg::inverse(&self.0.matrix(node), self.grid().dim())
    }

    pub fn inverses(&self) -> Vec<Mat3> {
        (0..self.grid().node_count()).map(|n| self.inverse_at(n)).collect()
    }

    pub fn sqrt_det(&self, node: usize) -> f64 {
        linalg::det(&self.0.matrix(node), self.grid().dim()).sqrt()
    }

    /// `c * g`
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.0.scale(c))
    }

    /// True when every node carries the same matrix (up to `tol` per entry).
    pub fn is_constant(&self, tol: f64) -> bool {
        let first = self.0.at(0).to_vec();
        let nc = first.len();
        self.0
            .data()
            .chunks(nc)
            .all(|c| c.iter().zip(&first).all(|(a, b)| (a - b).abs() <= tol))
    }
}
