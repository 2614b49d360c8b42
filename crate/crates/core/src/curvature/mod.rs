//! Curvature of a metric field and the first-order geometric operators built
//! from its connection.
//!
//! Conventions: `R(X, Y)Z = nabla_X nabla_Y Z - nabla_Y nabla_X Z - nabla_[X,Y] Z`,
//! `R_{ijkl} = <R(d_i, d_j) d_k, d_l>`, so `R_{ijji}` is the sectional
//! curvature and `Ric_jk = g^{il} R_{ijkl}`. The Laplacian is negative
//! semidefinite, `div` carries no sign and `delta*` carries the factor 1/2,
//! which makes `<div h, X> = -<h, delta* X>`.

mod connection;

pub(crate) use connection::{expand_sym, pack_sym, Connection};

use crate::grid::linalg;
use crate::grid::stencil;
use crate::grid::{
    GridSpec, MetricField, ScalarField, StaggeredLaplacian, SymTensorField, VectorField,
};
use crate::Result;

/// Christoffel symbols, Riemann tensor, Ricci tensor and scalar curvature.
#[derive(Debug, Clone)]
pub struct CurvaturePack {
    grid: GridSpec,
    christoffel: Vec<f64>,
    riemann: Vec<f64>,
    ricci: SymTensorField,
    scalar: ScalarField,
}

impl CurvaturePack {
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// `Gamma^k_ij`
    pub fn christoffel(&self, node: usize, k: usize, i: usize, j: usize) -> f64 {
        let d = self.grid.dim();
        self.christoffel[((node * d + k) * d + i) * d + j]
    }

    /// `R_{ijkl}`, all indices down.
    pub fn riemann(&self, node: usize, i: usize, j: usize, k: usize, l: usize) -> f64 {
        let d = self.grid.dim();
        self.riemann[(((node * d + i) * d + j) * d + k) * d + l]
    }

    pub fn ricci(&self) -> &SymTensorField {
        &self.ricci
    }

    pub fn scalar(&self) -> &ScalarField {
        &self.scalar
    }

    /// Largest stored magnitude over all four tensors.
    pub fn sup_norm(&self) -> f64 {
        let m = |v: &[f64]| v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        m(&self.christoffel).max(m(&self.riemann)).max(self.ricci.sup_norm()).max(self.scalar.sup_norm())
    }

    pub(crate) fn from_connection(conn: &Connection) -> Self {
        let grid = conn.grid;
        let dim = grid.dim();
        let d3 = dim * dim * dim;
        let d4 = d3 * dim;
        let nodes = grid.node_count();
        let dgamma: Vec<Vec<f64>> =
            (0..dim).map(|a| stencil::d1(&grid, &conn.gamma, d3, a)).collect();
        let mut riemann = vec![0.0; nodes * d4];
        let mut ricci = SymTensorField::zeros(&grid);
        let mut scalar = ScalarField::zeros(&grid);
        for node in 0..nodes {
            let gm = |k: usize, i: usize, j: usize| conn.gamma(node, k, i, j);
            let dg = |a: usize, k: usize, i: usize, j: usize| {
                dgamma[a][node * d3 + k * dim * dim + i * dim + j]
            };
            // R_{ijk}^l
            let mut up = [[[[0.0; 3]; 3]; 3]; 3];
            for i in 0..dim {
                for j in 0..dim {
                    for k in 0..dim {
                        for l in 0..dim {
                            let mut v = dg(i, l, j, k) - dg(j, l, i, k);
                            for m in 0..dim {
                                v += gm(m, j, k) * gm(l, i, m) - gm(m, i, k) * gm(l, j, m);
                            }
                            up[i][j][k][l] = v;
                        }
                    }
                }
            }
            let g = &conn.g[node];
            let ginv = &conn.ginv[node];
            let out = &mut riemann[node * d4..(node + 1) * d4];
            for i in 0..dim {
                for j in 0..dim {
                    for k in 0..dim {
                        for l in 0..dim {
                            out[((i * dim + j) * dim + k) * dim + l] =
                                (0..dim).map(|m| g[l][m] * up[i][j][k][m]).sum();
                        }
                    }
                }
            }
            let mut ric = [[0.0; 3]; 3];
            for j in 0..dim {
                for k in 0..dim {
                    let mut s = 0.0;
                    for i in 0..dim {
                        for l in 0..dim {
                            s += ginv[i][l] * out[((i * dim + j) * dim + k) * dim + l];
                        }
                    }
                    ric[j][k] = s;
                }
            }
            for j in 0..dim {
                for k in j + 1..dim {
                    let avg = 0.5 * (ric[j][k] + ric[k][j]);
                    ric[j][k] = avg;
                    ric[k][j] = avg;
                }
            }
            ricci.set_matrix(node, &ric);
            scalar.data_mut()[node] = linalg::contract2(ginv, &ric, dim);
        }
        Self { grid, christoffel: conn.gamma.clone(), riemann, ricci, scalar }
    }
}

/// Curvature of `g`. All tensors use the grid's central first-derivative
/// stencil; the Riemann tensor is built by differentiating the Christoffel
/// symbols.
pub fn curvature_of(g: &MetricField) -> CurvaturePack {
    CurvaturePack::from_connection(&Connection::new(g))
}

/// `(div h)_j = g^{ik} nabla_i h_kj`
pub fn divergence(h: &SymTensorField, g: &MetricField) -> Result<VectorField> {
    h.check_grid(g.grid())?;
    let conn = Connection::new(g);
    Ok(divergence_with(&conn, h))
}

pub(crate) fn divergence_with(conn: &Connection, h: &SymTensorField) -> VectorField {
    let nabla = conn.covariant(&expand_sym(h), 2);
    VectorField::from_vec(&conn.grid, conn.trace_leading(&nabla, 3)).expect("sized by grid")
}

/// `(delta* X)_ij = (nabla_i X_j + nabla_j X_i) / 2`, half the Lie derivative
/// of `g` along the dual vector field.
pub fn div_adjoint(x: &VectorField, g: &MetricField) -> Result<SymTensorField> {
    x.check_grid(g.grid())?;
    Ok(div_adjoint_with(&Connection::new(g), x))
}

pub(crate) fn div_adjoint_with(conn: &Connection, x: &VectorField) -> SymTensorField {
    pack_sym(&conn.grid, &conn.covariant(x.data(), 1))
}

/// `nabla_i nabla_j f = D_i D_j f - Gamma^k_ij D_k f` with composed central differences.
pub fn hessian(f: &ScalarField, g: &MetricField) -> Result<SymTensorField> {
    f.check_grid(g.grid())?;
    Ok(hessian_with(&Connection::new(g), f))
}

pub(crate) fn hessian_with(conn: &Connection, f: &ScalarField) -> SymTensorField {
    let df = conn.covariant(f.data(), 0);
    pack_sym(&conn.grid, &conn.covariant(&df, 1))
}

/// Which discrete rough Laplacian [`Lichnerowicz`] uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LaplacianForm {
    /// Composed covariant derivatives corrected by the compact self-adjoint
    /// scalar Laplacian; free of spurious grid-scale null modes.
    #[default]
    Compact,
    /// `g^{ab} nabla_a nabla_b h` from composed central differences; matches the
    /// linearisation of the discrete flow right-hand side.
    Composed,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LichnerowiczOptions {
    pub form: LaplacianForm,
    /// Adds `potential_shift * h` to the result. A testing hook for producing
    /// operators with known positive spectrum; zero in normal use.
    pub potential_shift: f64,
}

/// `Delta_L h = Delta h + 2 R_{ipqj} h^{pq} - Ric_ip h^p_j - Ric_jp h^p_i`,
/// prepared once for repeated application on a fixed metric.
#[derive(Debug, Clone)]
pub struct Lichnerowicz {
    conn: Connection,
    curvature: Option<CurvaturePack>,
    compact: Option<StaggeredLaplacian>,
    options: LichnerowiczOptions,
}

impl Lichnerowicz {
    pub fn new(g: &MetricField, options: LichnerowiczOptions) -> Self {
        let conn = Connection::new(g);
        let curvature = (!conn.flat).then(|| CurvaturePack::from_connection(&conn));
        let compact = (options.form == LaplacianForm::Compact).then(|| StaggeredLaplacian::new(g));
        Self { conn, curvature, compact, options }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.conn.grid
    }

    pub fn options(&self) -> LichnerowiczOptions {
        self.options
    }

    pub fn apply(&self, h: &SymTensorField) -> Result<SymTensorField> {
        h.check_grid(&self.conn.grid)?;
        SymTensorField::from_vec(&self.conn.grid, self.apply_raw(h.data()))
    }

    /// Same as [`Lichnerowicz::apply`] on packed symmetric data.
    pub fn apply_raw(&self, h: &[f64]) -> Vec<f64> {
        let grid = self.conn.grid;
        let dim = grid.dim();
        let nc = linalg::sym_components(dim);
        let mut out = match (&self.compact, self.conn.flat) {
            (Some(lap), true) => lap.apply_raw(h, nc),
            _ => {
                let field = SymTensorField::from_vec(&grid, h.to_vec()).expect("sized by grid");
                let full = expand_sym(&field);
                let second = self.conn.covariant(&self.conn.covariant(&full, 2), 3);
                let mut rough = pack_sym(&grid, &self.conn.trace_leading(&second, 4)).into_data();
                if let Some(lap) = &self.compact {
                    let fine = lap.apply_raw(h, nc);
                    let coarse = self.conn.laplace_composed(h, nc);
                    for ((r, f), c) in rough.iter_mut().zip(fine).zip(coarse) {
                        *r += f - c;
                    }
                }
                rough
            }
        };
        if let Some(curv) = &self.curvature {
            for node in 0..grid.node_count() {
                let hm = linalg::unpack(&h[node * nc..(node + 1) * nc], dim);
                let term = curvature_terms(curv, &self.conn.ginv[node], node, &hm, dim);
                for (o, t) in out[node * nc..(node + 1) * nc].iter_mut().zip(term) {
                    *o += t;
                }
            }
        }
        if self.options.potential_shift != 0.0 {
            for (o, v) in out.iter_mut().zip(h) {
                *o += self.options.potential_shift * v;
            }
        }
        out
    }
}

fn curvature_terms(
    curv: &CurvaturePack,
    ginv: &linalg::Mat3,
    node: usize,
    h: &linalg::Mat3,
    dim: usize,
) -> Vec<f64> {
    let hup = linalg::triple(ginv, h, ginv, dim);
    let ric = curv.ricci.matrix(node);
    // h^p_j = g^{pa} h_aj
    let mut mixed = [[0.0; 3]; 3];
    for p in 0..dim {
        for j in 0..dim {
            mixed[p][j] = (0..dim).map(|a| ginv[p][a] * h[a][j]).sum();
        }
    }
    let mut out = vec![0.0; linalg::sym_components(dim)];
    for i in 0..dim {
        for j in i..dim {
            let mut rm = 0.0;
            for p in 0..dim {
                for q in 0..dim {
                    rm += curv.riemann(node, i, p, q, j) * hup[p][q];
                }
            }
            let rh: f64 = (0..dim).map(|p| ric[i][p] * mixed[p][j] + ric[j][p] * mixed[p][i]).sum();
            out[linalg::sym_index(i, j, dim)] = 2.0 * rm - rh;
        }
    }
    out
}

/// Lichnerowicz Laplacian with the default compact form.
pub fn lichnerowicz_apply(h: &SymTensorField, g: &MetricField) -> Result<SymTensorField> {
    Lichnerowicz::new(g, LichnerowiczOptions::default()).apply(h)
}

/// `-2 Ric(g)`, the Ricci flow velocity.
pub fn ricci_velocity(g: &MetricField) -> SymTensorField {
    curvature_of(g).ricci.scale(-2.0)
}

/// DeTurck term `P_ij = nabla_i W_j + nabla_j W_i` with
/// `W^k = g^{pq} (Gamma^k_pq(g) - Gamma^k_pq(g0))`, lowered and differentiated with `g`.
pub fn deturck_correction(g: &MetricField, g0: &MetricField) -> Result<SymTensorField> {
    g.tensor().check_grid(g0.grid())?;
    let conn = Connection::new(g);
    let conn0 = Connection::new(g0);
    Ok(deturck_with(&conn, &conn0))
}

pub(crate) fn deturck_with(conn: &Connection, conn0: &Connection) -> SymTensorField {
    let grid = conn.grid;
    let dim = grid.dim();
    let mut w = VectorField::zeros(&grid);
    for node in 0..grid.node_count() {
        let gi = &conn.ginv[node];
        let mut up = [0.0; 3];
        for (k, slot) in up.iter_mut().enumerate().take(dim) {
            for p in 0..dim {
                for q in 0..dim {
                    *slot += gi[p][q] * (conn.gamma(node, k, p, q) - conn0.gamma(node, k, p, q));
                }
            }
        }
        let g = &conn.g[node];
        for (j, v) in w.at_mut(node).iter_mut().enumerate() {
            *v = (0..dim).map(|k| g[j][k] * up[k]).sum();
        }
    }
    div_adjoint_with(conn, &w).scale(2.0)
}

/// Right-hand side `-2 Ric(g) + P_{g0}(g)` of the Ricci–DeTurck flow.
pub fn deturck_velocity(g: &MetricField, g0: &MetricField) -> Result<SymTensorField> {
    let conn = Connection::new(g);
    let conn0 = Connection::new(g0);
    g.tensor().check_grid(g0.grid())?;
    let ric = CurvaturePack::from_connection(&conn).ricci;
    ric.scale(-2.0).add(&deturck_with(&conn, &conn0))
}

