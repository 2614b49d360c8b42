//! Compact self-adjoint Laplace–Beltrami operator.
//!
//! The Dirichlet energy `sum_ab int sqrt(g) g^{ab} d_a u d_b u` is discretised
//! with derivatives evaluated at half-shifted points (staggered stencils) and
//! coefficients interpolated there. The stiffness `K` is the Hessian of that
//! energy, so it is symmetric positive semidefinite and only constants lie in
//! its kernel on a connected torus. The Laplacian is `-K / dV`.

use super::field::{MetricField, ScalarField};
use super::stencil::{apply_taps, Taps};
use super::{linalg, GridSpec};
use crate::Result;

#[derive(Debug, Clone)]
pub struct StaggeredLaplacian {
    grid: GridSpec,
    /// `(a, b, coefficient at the shifted points)` for `a <= b`.
    coeffs: Vec<(usize, usize, Vec<f64>)>,
    weights: Vec<f64>,
}

impl StaggeredLaplacian {
    pub fn new(metric: &MetricField) -> Self {
        let grid = *metric.grid();
        let dim = grid.dim();
        let cell = grid.cell_volume();
        let interp = grid.stencil().staggered_interpolation();
        let nodes = grid.node_count();
        let mut weights = vec![0.0; nodes];
        let mut raw = vec![vec![0.0; nodes]; dim * dim];
        for node in 0..nodes {
            let m = metric.matrix(node);
            let w = linalg::det(&m, dim).sqrt() * cell;
            let ginv = linalg::inverse(&m, dim);
            weights[node] = w;
            for a in 0..dim {
                for b in 0..dim {
                    raw[a * dim + b][node] = w * ginv[a][b];
                }
            }
        }
        let mut coeffs = Vec::new();
        for a in 0..dim {
            for b in a..dim {
                let mut c = vec![0.0; nodes];
                apply_taps(&grid, &raw[a * dim + b], 1, a, interp, 1.0, false, &mut c);
                if a != b {
                    let mut cc = vec![0.0; nodes];
                    apply_taps(&grid, &c, 1, b, interp, 1.0, false, &mut cc);
                    c = cc;
                }
                coeffs.push((a, b, c));
            }
        }
        Self { grid, coeffs, weights }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// Per-node volume weights `sqrt(det g) * prod dx`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    fn stag(&self, src: &[f64], nc: usize, axis: usize, transpose: bool) -> Vec<f64> {
        let h = self.grid.spacing(axis);
        let taps = self.grid.stencil().staggered_derivative();
        self.taps(src, nc, axis, taps, 1.0 / h, transpose)
    }

    fn interp(&self, src: &[f64], nc: usize, axis: usize, transpose: bool) -> Vec<f64> {
        let taps = self.grid.stencil().staggered_interpolation();
        self.taps(src, nc, axis, taps, 1.0, transpose)
    }

    fn taps(&self, src: &[f64], nc: usize, axis: usize, taps: Taps, s: f64, t: bool) -> Vec<f64> {
        let mut out = vec![0.0; src.len()];
        apply_taps(&self.grid, src, nc, axis, taps, s, t, &mut out);
        out
    }

    /// Staggered derivative along `a`, moved to the points shared with axis `b`.
    fn mixed(&self, u: &[f64], nc: usize, a: usize, b: usize, transpose: bool) -> Vec<f64> {
        if transpose {
            self.stag(&self.interp(u, nc, b, true), nc, a, true)
        } else {
            self.interp(&self.stag(u, nc, a, false), nc, b, false)
        }
    }

    fn weigh(c: &[f64], v: &mut [f64], nc: usize) {
        for (chunk, &w) in v.chunks_mut(nc).zip(c) {
            chunk.iter_mut().for_each(|x| *x *= w);
        }
    }

    /// `K u` applied to each of the `nc` interleaved components of `u`.
    pub fn stiffness(&self, u: &[f64], nc: usize) -> Vec<f64> {
        let mut out = vec![0.0; u.len()];
        let mut acc = |v: Vec<f64>| out.iter_mut().zip(v).for_each(|(o, x)| *o += x);
        for (a, b, c) in &self.coeffs {
            let (a, b) = (*a, *b);
            if a == b {
                let mut s = self.stag(u, nc, a, false);
                Self::weigh(c, &mut s, nc);
                acc(self.stag(&s, nc, a, true));
            } else {
                let mut pa = self.mixed(u, nc, a, b, false);
                let mut pb = self.mixed(u, nc, b, a, false);
                Self::weigh(c, &mut pa, nc);
                Self::weigh(c, &mut pb, nc);
                acc(self.mixed(&pb, nc, a, b, true));
                acc(self.mixed(&pa, nc, b, a, true));
            }
        }
        out
    }

    /// `u^T K u`, the discrete Dirichlet energy summed over components.
    pub fn energy(&self, u: &[f64], nc: usize) -> f64 {
        let mut terms = Vec::with_capacity(u.len() * self.coeffs.len());
        for (a, b, c) in &self.coeffs {
            let (a, b) = (*a, *b);
            if a == b {
                let s = self.stag(u, nc, a, false);
                for (node, chunk) in s.chunks(nc).enumerate() {
                    terms.extend(chunk.iter().map(|x| c[node] * x * x));
                }
            } else {
                let pa = self.mixed(u, nc, a, b, false);
                let pb = self.mixed(u, nc, b, a, false);
                for node in 0..self.grid.node_count() {
                    for k in 0..nc {
                        let i = node * nc + k;
                        terms.push(2.0 * c[node] * pa[i] * pb[i]);
                    }
                }
            }
        }
        super::pairwise_sum(&terms)
    }

    /// `-K u / dV` on interleaved multi-component data.
    pub fn apply_raw(&self, u: &[f64], nc: usize) -> Vec<f64> {
        let mut out = self.stiffness(u, nc);
        for (chunk, &w) in out.chunks_mut(nc).zip(&self.weights) {
            chunk.iter_mut().for_each(|x| *x = -*x / w);
        }
        out
    }

    pub fn apply(&self, u: &ScalarField) -> Result<ScalarField> {
        u.check_grid(&self.grid)?;
        ScalarField::from_vec(&self.grid, self.apply_raw(u.data(), 1))
    }
}
