//! Perelman's F and lambda functionals through the ground state of `-4 Delta + R`.

use crate::curvature::{curvature_of, hessian_with, Connection};
use crate::grid::{inner_product, Measure, MetricField, ScalarField, StaggeredLaplacian, SymTensorField};
use crate::{Error, Result};

use super::solver::{lanczos, EigenOptions, Which};

/// Knobs of the ground-state solve.
#[derive(Debug, Clone, Copy)]
pub struct LambdaOptions {
    /// Residual bound relative to `max(1, 4 k_min^2)`.
    pub rel_tol: f64,
    /// Allowed `|F(g, -2 log u) - lambda|`, relative to `max(1, |lambda|)`.
    pub consistency_tol: f64,
    pub seed: u64,
}

impl Default for LambdaOptions {
    fn default() -> Self {
        Self { rel_tol: 1e-9, consistency_tol: 1e-9, seed: 0 }
    }
}

/// Principal eigenpair of `-4 Delta_g + R_g`.
#[derive(Debug, Clone)]
pub struct GroundState {
    pub lambda: f64,
    /// Positive, with `int u^2 dV = 1`; the minimiser of F is `f = -2 log u`.
    pub u: ScalarField,
    pub residual: f64,
}

impl GroundState {
    pub fn minimizer(&self) -> ScalarField {
        self.u.map(|v| -2.0 * v.ln())
    }
}

/// `F(g, f) = int e^{-f} (|grad f|^2 + R) dV`, evaluated through `w = e^{-f/2}` as
/// `int 4 |grad w|^2 + R w^2 dV` with the compact Dirichlet energy.
#[allow(non_snake_case)]
pub fn perelman_F(g: &MetricField, f: &ScalarField) -> Result<f64> {
    f.check_grid(g.grid())?;
    let lap = StaggeredLaplacian::new(g);
    let r = curvature_of(g).scalar().clone();
    Ok(energy_form(&lap, &r, &f.map(|v| (-0.5 * v).exp())))
}

fn energy_form(lap: &StaggeredLaplacian, r: &ScalarField, w: &ScalarField) -> f64 {
    let terms: Vec<f64> = w
        .data()
        .iter()
        .zip(r.data())
        .zip(lap.weights())
        .map(|((wi, ri), dv)| dv * ri * wi * wi)
        .collect();
    4.0 * lap.energy(w.data(), 1) + crate::grid::pairwise_sum(&terms)
}

/// `lambda(g)` and the normalised positive ground state `u`.
pub fn lambda_of(g: &MetricField) -> Result<(f64, ScalarField)> {
    let gs = ground_state(g, &LambdaOptions::default(), None)?;
    Ok((gs.lambda, gs.u))
}

/// Ground state with explicit options and an optional warm start.
pub fn ground_state(g: &MetricField, opts: &LambdaOptions, warm: Option<&ScalarField>) -> Result<GroundState> {
    let grid = *g.grid();
    let lap = StaggeredLaplacian::new(g);
    let r = curvature_of(g).scalar().clone();
    let sqrt_w: Vec<f64> = lap.weights().iter().map(|w| w.sqrt()).collect();
    let rw: Vec<f64> = r.data().iter().zip(lap.weights()).map(|(ri, wi)| ri * wi).collect();
    let apply = |z: &[f64]| -> Vec<f64> {
        let u: Vec<f64> = z.iter().zip(&sqrt_w).map(|(a, s)| a / s).collect();
        let mut out = lap.stiffness(&u, 1);
        for i in 0..out.len() {
            out[i] = (4.0 * out[i] + rw[i] * u[i]) / sqrt_w[i];
        }
        out
    };
    let start = match warm {
        Some(u) => {
            u.check_grid(&grid)?;
            u.data().iter().zip(&sqrt_w).map(|(a, s)| a * s).collect()
        }
        None => sqrt_w.clone(),
    };
    let scale = (4.0 * grid.fundamental_wavenumber_sq()).max(1.0);
    let eig = EigenOptions {
        nev: 1,
        block: 2,
        max_basis: 160,
        max_restarts: 400,
        tol: opts.rel_tol * scale,
        seed: opts.seed,
    };
    let pair = lanczos(grid.node_count(), &apply, Which::Smallest, &eig, &[start])?
        .into_iter()
        .next()
        .expect("one pair requested");
    let mut u: Vec<f64> = pair.vector.iter().zip(&sqrt_w).map(|(a, s)| a / s).collect();
    if u.iter().sum::<f64>() < 0.0 {
        u.iter_mut().for_each(|v| *v = -*v);
    }
    if let Some(node) = u.iter().position(|&v| !(v > 0.0)) {
        return Err(Error::NotConverged(format!("ground state not positive at node {node}")));
    }
    let u = ScalarField::from_vec(&grid, u)?;
    let f_value = energy_form(&lap, &r, &u);
    if (f_value - pair.value).abs() > opts.consistency_tol * pair.value.abs().max(1.0) {
        return Err(Error::NotConverged(format!(
            "F(g, -2 log u) = {f_value:e} differs from lambda = {:e}",
            pair.value
        )));
    }
    Ok(GroundState { lambda: pair.value, u, residual: pair.residual })
}

/// `D lambda(h) = int e^{-f} <-Ric - D^2 f, h> dV` with `e^{-f} = u^2` taken
/// from the normalised ground state.
pub fn first_variation_lambda(g: &MetricField, h: &SymTensorField) -> Result<f64> {
    h.check_grid(g.grid())?;
    let gs = ground_state(g, &LambdaOptions::default(), None)?;
    first_variation_with(g, &gs, h)
}

pub(crate) fn first_variation_with(g: &MetricField, gs: &GroundState, h: &SymTensorField) -> Result<f64> {
    let conn = Connection::new(g);
    let ric = curvature_of(g).ricci().clone();
    let hess = hessian_with(&conn, &gs.minimizer());
    let mut q = ric.add(&hess)?.scale(-1.0);
    for node in 0..g.grid().node_count() {
        let u2 = gs.u.data()[node].powi(2);
        q.at_mut(node).iter_mut().for_each(|v| *v *= u2);
    }
    inner_product(&q, h, &Measure::of(g))
}
