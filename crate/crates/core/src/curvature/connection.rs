//! Christoffel symbols and covariant derivatives of full (unpacked) tensors.

use crate::grid::linalg::{self, Mat3};
use crate::grid::stencil;
use crate::grid::{GridSpec, MetricField, SymTensorField};

/// Levi-Civita connection of a metric, evaluated with the grid's central stencil.
#[derive(Debug, Clone)]
pub(crate) struct Connection {
    pub grid: GridSpec,
    pub g: Vec<Mat3>,
    pub ginv: Vec<Mat3>,
    /// Per node `dim^3` values `Gamma^k_ij` at `k * dim^2 + i * dim + j`.
    pub gamma: Vec<f64>,
    /// True when every symbol is exactly zero (constant metric).
    pub flat: bool,
}

impl Connection {
    pub fn new(metric: &MetricField) -> Self {
        let grid = *metric.grid();
        let dim = grid.dim();
        let nc = linalg::sym_components(dim);
        let nodes = grid.node_count();
        let dg: Vec<Vec<f64>> =
            (0..dim).map(|a| stencil::d1(&grid, metric.tensor().data(), nc, a)).collect();
        let g: Vec<Mat3> = (0..nodes).map(|n| metric.matrix(n)).collect();
        let ginv: Vec<Mat3> = g.iter().map(|m| linalg::inverse(m, dim)).collect();
        let d3 = dim * dim * dim;
        let mut gamma = vec![0.0; nodes * d3];
        for node in 0..nodes {
            let dgn = |a: usize, b: usize, c: usize| dg[a][node * nc + linalg::sym_index(b, c, dim)];
            // first kind: [ij, l] = 1/2 (d_i g_jl + d_j g_il - d_l g_ij)
            let mut first = [[[0.0; 3]; 3]; 3];
            for i in 0..dim {
                for j in 0..dim {
                    for l in 0..dim {
                        first[i][j][l] = 0.5 * (dgn(i, j, l) + dgn(j, i, l) - dgn(l, i, j));
                    }
                }
            }
            let gi = &ginv[node];
            let out = &mut gamma[node * d3..(node + 1) * d3];
            for k in 0..dim {
                for i in 0..dim {
                    for j in 0..dim {
                        out[k * dim * dim + i * dim + j] =
                            (0..dim).map(|l| gi[k][l] * first[i][j][l]).sum();
                    }
                }
            }
        }
        // a constant metric has an exactly vanishing connection, whatever the
        // rounding of the stencil weights
        let flat = metric.is_constant(0.0);
        if flat {
            gamma.iter_mut().for_each(|v| *v = 0.0);
        }
        Self { grid, g, ginv, gamma, flat }
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    #[inline]
    pub fn gamma(&self, node: usize, k: usize, i: usize, j: usize) -> f64 {
        let dim = self.dim();
        self.gamma[node * dim * dim * dim + k * dim * dim + i * dim + j]
    }

    /// `nabla T` for a covariant tensor of `rank` stored with `dim^rank` full
    /// components per node. The derivative index comes first in the output.
    pub fn covariant(&self, t: &[f64], rank: u32) -> Vec<f64> {
        let dim = self.dim();
        let nc = dim.pow(rank);
        let nodes = self.grid.node_count();
        let d: Vec<Vec<f64>> = (0..dim).map(|b| stencil::d1(&self.grid, t, nc, b)).collect();
        let mut out = vec![0.0; nodes * dim * nc];
        for node in 0..nodes {
            let tn = &t[node * nc..(node + 1) * nc];
            for b in 0..dim {
                for idx in 0..nc {
                    let mut v = d[b][node * nc + idx];
                    if !self.flat {
                        for s in 0..rank {
                            let stride = dim.pow(rank - 1 - s);
                            let is = (idx / stride) % dim;
                            let base = idx - is * stride;
                            for m in 0..dim {
                                v -= self.gamma(node, m, b, is) * tn[base + m * stride];
                            }
                        }
                    }
                    out[node * dim * nc + b * nc + idx] = v;
                }
            }
        }
        out
    }

    /// `g^{ab} T_{ab...}` over the two leading indices.
    pub fn trace_leading(&self, t: &[f64], rank: u32) -> Vec<f64> {
        let dim = self.dim();
        let rest = dim.pow(rank - 2);
        let nc = dim * dim * rest;
        let nodes = self.grid.node_count();
        let mut out = vec![0.0; nodes * rest];
        for node in 0..nodes {
            let gi = &self.ginv[node];
            for r in 0..rest {
                let mut s = 0.0;
                for a in 0..dim {
                    for b in 0..dim {
                        s += gi[a][b] * t[node * nc + (a * dim + b) * rest + r];
                    }
                }
                out[node * rest + r] = s;
            }
        }
        out
    }

    /// Laplace–Beltrami built from composed central first derivatives,
    /// applied to each of the `nc` interleaved components as a scalar.
    pub fn laplace_composed(&self, u: &[f64], nc: usize) -> Vec<f64> {
        let dim = self.dim();
        let nodes = self.grid.node_count();
        let du: Vec<Vec<f64>> = (0..dim).map(|a| stencil::d1(&self.grid, u, nc, a)).collect();
        let mut out = vec![0.0; u.len()];
        for a in 0..dim {
            for b in 0..dim {
                let ddu = stencil::d1(&self.grid, &du[b], nc, a);
                for node in 0..nodes {
                    let gab = self.ginv[node][a][b];
                    if gab == 0.0 {
                        continue;
                    }
                    for c in 0..nc {
                        let i = node * nc + c;
                        let mut v = ddu[i];
                        if !self.flat {
                            for k in 0..dim {
                                v -= self.gamma(node, k, a, b) * du[k][i];
                            }
                        }
                        out[i] += gab * v;
                    }
                }
            }
        }
        out
    }
}

pub(crate) fn expand_sym(h: &SymTensorField) -> Vec<f64> {
    let dim = h.grid().dim();
    let mut out = Vec::with_capacity(h.grid().node_count() * dim * dim);
    for node in 0..h.grid().node_count() {
        let m = h.matrix(node);
        for row in m.iter().take(dim) {
            out.extend_from_slice(&row[..dim]);
        }
    }
    out
}

/// Packs full `dim x dim` data into a symmetric field using `(T_ij + T_ji) / 2`.
pub(crate) fn pack_sym(grid: &GridSpec, full: &[f64]) -> SymTensorField {
    let dim = grid.dim();
    let mut h = SymTensorField::zeros(grid);
    for node in 0..grid.node_count() {
        let t = &full[node * dim * dim..(node + 1) * dim * dim];
        let out = h.at_mut(node);
        for i in 0..dim {
            for j in i..dim {
                out[linalg::sym_index(i, j, dim)] = 0.5 * (t[i * dim + j] + t[j * dim + i]);
            }
        }
    }
    h
}
