//! Second variation of lambda and the tensor splitting on flat backgrounds.
//!
//! Everything here uses composed central differences with a constant
//! metric, so all operators commute and the discrete identities (adjointness
//! of `div` and `delta*`, `div Hess f = grad Delta f`, ...) hold exactly. The
//! composed Laplacian annihilates the `2^n` grid modes `prod (-1)^{i_a}`;
//! they are projected out of every elliptic solve.

use crate::curvature::{div_adjoint_with, divergence_with, hessian_with, Connection};
use crate::grid::{
    inner_product, GridSpec, Measure, MetricField, ScalarField, SymTensorField, VectorField,
};
use crate::{Error, Result};

use super::solver::conjugate_gradient;

/// Relative residual of the auxiliary CG solves.
pub const CG_TOL: f64 = 1e-13;

pub(crate) struct FlatOps {
    pub metric: MetricField,
    pub conn: Connection,
    pub measure: Measure,
    modes: Vec<Vec<f64>>,
}

impl FlatOps {
    pub fn new(g0: &MetricField) -> Result<Self> {
        let scale = g0.tensor().sup_norm();
        if !g0.is_constant(1e-14 * scale) {
            return Err(Error::NonFlatBackground);
        }
        let grid = *g0.grid();
        Ok(Self {
            metric: g0.clone(),
            conn: Connection::new(g0),
            measure: Measure::of(g0),
            modes: grid_null_modes(&grid),
        })
    }

    pub fn grid(&self) -> GridSpec {
        *self.metric.grid()
    }

    /// Removes the null modes of the composed Laplacian from every component.
    pub fn project(&self, x: &mut [f64], nc: usize) {
        for mode in &self.modes {
            let norm: f64 = mode.iter().map(|v| v * v).sum();
            for c in 0..nc {
                let coef: f64 = mode.iter().enumerate().map(|(n, m)| m * x[n * nc + c]).sum::<f64>() / norm;
                for (n, m) in mode.iter().enumerate() {
                    x[n * nc + c] -= coef * m;
                }
            }
        }
    }

    /// Mean-zero solution of `Delta v = rhs` (composed Laplacian).
    pub fn poisson(&self, rhs: &ScalarField) -> Result<ScalarField> {
        let apply = |x: &[f64]| -> Vec<f64> {
            self.conn.laplace_composed(x, 1).into_iter().map(|v| -v).collect()
        };
        let b: Vec<f64> = rhs.data().iter().map(|v| -v).collect();
        let ip = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let sol = conjugate_gradient(&apply, &b, &ip, &|x| self.project(x, 1), CG_TOL, 20_000)?;
        ScalarField::from_vec(&self.grid(), sol.x)
    }

    /// Solves `div delta* X = rhs` for `X` orthogonal to the kernel of `delta*`.
    pub fn vector_solve(&self, rhs: &VectorField) -> Result<VectorField> {
        let grid = self.grid();
        let nc = grid.dim();
        let apply = |x: &[f64]| -> Vec<f64> {
            let xf = VectorField::from_vec(&grid, x.to_vec()).expect("sized by grid");
            divergence_with(&self.conn, &div_adjoint_with(&self.conn, &xf))
                .into_data()
                .into_iter()
                .map(|v| -v)
                .collect()
        };
        let b: Vec<f64> = rhs.data().iter().map(|v| -v).collect();
        let ip = |a: &[f64], b: &[f64]| {
            let af = VectorField::from_vec(&grid, a.to_vec()).expect("sized by grid");
            let bf = VectorField::from_vec(&grid, b.to_vec()).expect("sized by grid");
            inner_product(&af, &bf, &self.measure).expect("same grid")
        };
        let sol = conjugate_gradient(&apply, &b, &ip, &|x| self.project(x, nc), CG_TOL, 20_000)?;
        VectorField::from_vec(&grid, sol.x)
    }

    fn metric_times(&self, s: &ScalarField) -> SymTensorField {
        let mut out = SymTensorField::zeros(&self.grid());
        let g = self.metric.tensor();
        for node in 0..self.grid().node_count() {
            let v = s.data()[node];
            for (o, gi) in out.at_mut(node).iter_mut().zip(g.at(node)) {
                *o = v * gi;
            }
        }
        out
    }
}

/// Indicator-free basis of the composed-Laplacian kernel: constants and, for an
/// even number of points, the alternating patterns along every subset of axes.
fn grid_null_modes(grid: &GridSpec) -> Vec<Vec<f64>> {
    let dim = grid.dim();
    let subsets = if grid.points() % 2 == 0 { 1usize << dim } else { 1 };
    (0..subsets)
        .map(|mask| {
            (0..grid.node_count())
                .map(|node| {
                    let c = grid.coords(node);
                    let parity: usize = (0..dim).filter(|a| mask >> a & 1 == 1).map(|a| c[a]).sum();
                    if parity % 2 == 0 { 1.0 } else { -1.0 }
                })
                .collect()
        })
        .collect()
}

/// `L h = 1/2 Delta h + div* div h + 1/2 Hess v_h` with `Delta v_h = div div h`,
/// where `div* = -delta*` is the formal adjoint of `div`. Returns `(L h, <L h, h>)`.
///
/// Only constant (flat) backgrounds are supported.
#[allow(non_snake_case)]
pub fn second_variation_L(h: &SymTensorField, g0: &MetricField) -> Result<(SymTensorField, f64)> {
    h.check_grid(g0.grid())?;
    let ops = FlatOps::new(g0)?;
    let lh = apply_l(&ops, h)?;
    let value = inner_product(&lh, h, &ops.measure)?;
    Ok((lh, value))
}

pub(crate) fn apply_l(ops: &FlatOps, h: &SymTensorField) -> Result<SymTensorField> {
    let grid = ops.grid();
    let nc = h.components();
    let rough = SymTensorField::from_vec(&grid, ops.conn.laplace_composed(h.data(), nc))?;
    let div_h = divergence_with(&ops.conn, h);
    let div_div = ScalarField::from_vec(&grid, divergence_scalar(&ops.conn, &div_h))?;
    let v = ops.poisson(&div_div)?;
    let mut out = rough.scale(0.5);
    out.axpy(-1.0, &div_adjoint_with(&ops.conn, &div_h))?;
    out.axpy(0.5, &hessian_with(&ops.conn, &v))?;
    Ok(out)
}

/// `g^{ij} nabla_i X_j`
fn divergence_scalar(conn: &Connection, x: &VectorField) -> Vec<f64> {
    conn.trace_leading(&conn.covariant(x.data(), 1), 2)
}

/// `h = c + e + n + g + s + residual` with the parts in
/// `C = delta*(co-closed forms)`, `E = Hess f`, `N` (trace- and divergence-free),
/// `G = R g` and `S = {(Delta f) g - Hess f}`.
#[derive(Debug, Clone)]
pub struct Decomposition {
    pub c_part: SymTensorField,
    pub e_part: SymTensorField,
    pub n_part: SymTensorField,
    pub g_part: SymTensorField,
    pub s_part: SymTensorField,
    /// Grid-scale trace content no smooth part can carry, plus solver error.
    pub residual: SymTensorField,
}

impl Decomposition {
    pub fn parts(&self) -> [(&'static str, &SymTensorField); 5] {
        [
            ("C", &self.c_part),
            ("E", &self.e_part),
            ("N", &self.n_part),
            ("G", &self.g_part),
            ("S", &self.s_part),
        ]
    }

    pub fn sum(&self) -> Result<SymTensorField> {
        let mut total = self.residual.clone();
        for (_, p) in self.parts() {
            total.axpy(1.0, p)?;
        }
        Ok(total)
    }
}

/// Splits `h` relative to a flat metric `g`.
pub fn decompose(h: &SymTensorField, g: &MetricField) -> Result<Decomposition> {
    h.check_grid(g.grid())?;
    let ops = FlatOps::new(g)?;
    let grid = ops.grid();
    let dim = grid.dim() as f64;
    let conn = &ops.conn;

    let x = ops.vector_solve(&divergence_with(conn, h))?;
    let gauge = div_adjoint_with(conn, &x);
    let div_x = ScalarField::from_vec(&grid, divergence_scalar(conn, &x))?;
    let f = ops.poisson(&div_x)?;
    let e_part = hessian_with(conn, &f);
    let c_part = gauge.sub(&e_part)?;

    let r = h.sub(&gauge)?;
    let tr = r.trace(g)?;
    let mean = ops.measure.integrate(&tr)? / ops.measure.volume();
    let g_part = g.tensor().scale(mean / dim);
    let fluct = tr.map(|v| (v - mean) / (dim - 1.0));
    let fs = ops.poisson(&fluct)?;
    let lap_fs = ScalarField::from_vec(&grid, conn.laplace_composed(fs.data(), 1))?;
    let s_part = ops.metric_times(&lap_fs).sub(&hessian_with(conn, &fs))?;
    // what (n - 1) Delta f_s could not reproduce stays out of N
    let leftover = fluct.sub(&lap_fs)?.scale((dim - 1.0) / dim);
    let residual = ops.metric_times(&leftover);
    let n_part = r.sub(&g_part)?.sub(&s_part)?.sub(&residual)?;
    Ok(Decomposition { c_part, e_part, n_part, g_part, s_part, residual })
}
