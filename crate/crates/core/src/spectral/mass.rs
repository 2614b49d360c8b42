//! Per-node Cholesky factors of the weighted inner product, used to turn
//! operators that are self-adjoint in `<., .>_g dV` into Euclidean symmetric ones.

use nalgebra::DMatrix;

use crate::grid::{FieldKind, Measure};

#[derive(Debug, Clone)]
pub(crate) struct MassFactor {
    nc: usize,
    /// Lower Cholesky factor per node, row-major `nc x nc`.
    lower: Vec<f64>,
}

impl MassFactor {
    pub fn new<K: FieldKind>(w: &Measure) -> Self {
        let dim = w.grid().dim();
        let nc = K::components(dim);
        let nodes = w.grid().node_count();
        let mut lower = vec![0.0; nodes * nc * nc];
        let mut ep = vec![0.0; nc];
        let mut eq = vec![0.0; nc];
        for node in 0..nodes {
            let dv = w.dv().data()[node];
            let m = DMatrix::from_fn(nc, nc, |p, q| {
                ep.iter_mut().for_each(|v| *v = 0.0);
                eq.iter_mut().for_each(|v| *v = 0.0);
                ep[p] = 1.0;
                eq[q] = 1.0;
                dv * K::contract(&ep, &eq, w.ginv(node), dim)
            });
            let l = m.cholesky().expect("metric inner product is positive definite").l();
            for p in 0..nc {
                for q in 0..nc {
                    lower[node * nc * nc + p * nc + q] = l[(p, q)];
                }
            }
        }
        Self { nc, lower }
    }

    /// `z = L^T x`, so that `z . z = <x, x>`.
    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let nc = self.nc;
        let mut z = vec![0.0; x.len()];
        for (node, (zc, xc)) in z.chunks_mut(nc).zip(x.chunks(nc)).enumerate() {
            let l = &self.lower[node * nc * nc..(node + 1) * nc * nc];
            for p in 0..nc {
                zc[p] = (p..nc).map(|q| l[q * nc + p] * xc[q]).sum();
            }
        }
        z
    }

    /// Inverse of [`MassFactor::forward`].
    pub fn backward(&self, z: &[f64]) -> Vec<f64> {
        let nc = self.nc;
        let mut x = vec![0.0; z.len()];
        for (node, (xc, zc)) in x.chunks_mut(nc).zip(z.chunks(nc)).enumerate() {
            let l = &self.lower[node * nc * nc..(node + 1) * nc * nc];
            for p in (0..nc).rev() {
                let s: f64 = (p + 1..nc).map(|q| l[q * nc + p] * xc[q]).sum();
                xc[p] = (zc[p] - s) / l[p * nc + p];
            }
        }
        x
    }
}
