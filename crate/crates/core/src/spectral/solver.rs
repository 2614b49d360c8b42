//! Matrix-free symmetric eigensolver and conjugate gradients.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Which {
    Largest,
    Smallest,
}

/// Restart policy and stopping rule of [`lanczos`].
#[derive(Debug, Clone, Copy)]
pub struct EigenOptions {
    pub nev: usize,
    pub block: usize,
    /// Basis size that triggers a thick restart.
    pub max_basis: usize,
    pub max_restarts: usize,
    /// Absolute bound on `|A y - theta y|` for every wanted pair.
    pub tol: f64,
    pub seed: u64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self { nev: 1, block: 4, max_basis: 240, max_restarts: 400, tol: 1e-8, seed: 0 }
    }
}

#[derive(Debug, Clone)]
pub struct EigenPair {
    pub value: f64,
    pub vector: Vec<f64>,
    pub residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += a * xi);
}

fn combine(basis: &[Vec<f64>], coeffs: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut out = vec![0.0; basis[0].len()];
    for (v, c) in basis.iter().zip(coeffs) {
        if c != 0.0 {
            axpy(&mut out, c, v);
        }
    }
    out
}

/// Orthogonalises `x` against `basis` by classical Gram–Schmidt, repeated
/// once more when the first pass cancels most of the norm, and returns the
/// remaining norm.
fn orthogonalize(basis: &[Vec<f64>], x: &mut [f64]) -> f64 {
    let mut norm = dot(x, x).sqrt();
    for _ in 0..2 {
        let c: Vec<f64> = basis.iter().map(|v| dot(v, x)).collect();
        for (v, ci) in basis.iter().zip(c) {
            axpy(x, -ci, v);
        }
        let after = dot(x, x).sqrt();
        let done = after > 0.7 * norm;
        norm = after;
        if done {
            break;
        }
    }
    norm
}

/// Symmetric eigendecomposition, refined by re-diagonalising `Q^T H Q` until
/// its off-diagonal part is at round-off level. A single pass can leave
/// eigenvector errors far above round-off on the graded matrices that block
/// Krylov bases produce.
fn refined_eigen(h: DMatrix<f64>) -> SymmetricEigen<f64, nalgebra::Dyn> {
    let scale = h.amax().max(f64::MIN_POSITIVE);
    let mut eig = SymmetricEigen::new(h.clone());
    for _ in 0..8 {
        let b = eig.eigenvectors.transpose() * &h * &eig.eigenvectors;
        let b = (&b + b.transpose()) * 0.5;
        let off = (0..b.nrows())
            .flat_map(|i| (0..b.ncols()).filter(move |&j| j != i).map(move |j| (i, j)))
            .fold(0.0f64, |m, (i, j)| m.max(b[(i, j)].abs()));
        if off <= 64.0 * f64::EPSILON * scale {
            break;
        }
        let next = SymmetricEigen::new(b);
        eig = SymmetricEigen { eigenvectors: &eig.eigenvectors * next.eigenvectors, eigenvalues: next.eigenvalues };
    }
    eig
}

fn random_vector(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// Extreme eigenpairs of a symmetric operator on `R^n` by block Lanczos with
/// full reorthogonalisation and thick restarts.
///
/// Blocks of `block` vectors extend the Krylov basis. Every few blocks the
/// Rayleigh–Ritz values are checked; when the basis reaches `max_basis` the
/// `nev + block` best Ritz vectors are kept and the next block is formed from
/// their residuals. `start` seeds the first block; missing columns are drawn
/// from a ChaCha8 stream with the given seed.
pub fn lanczos(
    n: usize,
    apply: &dyn Fn(&[f64]) -> Vec<f64>,
    which: Which,
    opts: &EigenOptions,
    start: &[Vec<f64>],
) -> Result<Vec<EigenPair>> {
    if opts.nev == 0 || opts.nev > n {
        return Err(Error::InvalidArgument(format!("{} eigenpairs requested of {n}", opts.nev)));
    }
    let block = opts.block.max(1).min(n);
    let max_basis = opts.max_basis.max(opts.nev + 2 * block).min(n);
    let check_every = (4 * block).max(32);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(max_basis);
    let mut images: Vec<Vec<f64>> = Vec::with_capacity(max_basis);
    let mut pending: Vec<Vec<f64>> = start.iter().take(block).cloned().collect();
    while pending.len() < block {
        pending.push(random_vector(&mut rng, n));
    }
    // Rayleigh quotient matrix V^T A V, grown one row and column at a time
    let mut h = DMatrix::<f64>::zeros(max_basis, max_basis);
    let mut restarts = 0;
    let mut last_check = 0;
    loop {
        let mut added = 0;
        for mut x in pending.drain(..) {
            if basis.len() == max_basis {
                break;
            }
            let scale = dot(&x, &x).sqrt();
            let mut norm = orthogonalize(&basis, &mut x);
            let mut tries = 0;
            while !(norm > 1e-10 * scale.max(1e-300)) && tries < 3 {
                x = random_vector(&mut rng, n);
                norm = orthogonalize(&basis, &mut x);
                tries += 1;
            }
            if !(norm > 0.0) || tries == 3 {
                continue;
            }
            x.iter_mut().for_each(|v| *v /= norm);
            let ax = apply(&x);
            let j = basis.len();
            for i in 0..j {
                let v = dot(&basis[i], &ax);
                h[(i, j)] = v;
                h[(j, i)] = v;
            }
            h[(j, j)] = dot(&x, &ax);
            images.push(ax);
            basis.push(x);
            added += 1;
        }
        let full = basis.len() == max_basis || added == 0;
        if basis.len() >= opts.nev && (full || basis.len() - last_check >= check_every) {
            last_check = basis.len();
            let m = basis.len();
            let eig = refined_eigen(h.view((0, 0), (m, m)).into_owned());
            let mut order: Vec<usize> = (0..m).collect();
            order.sort_by(|&a, &b| {
                let (x, y) = (eig.eigenvalues[a], eig.eigenvalues[b]);
                match which {
                    Which::Largest => y.total_cmp(&x),
                    Which::Smallest => x.total_cmp(&y),
                }
            });
            let exhausted = m == n;
            let keep = if full && !exhausted { (opts.nev + block).min(m - 1).max(opts.nev) } else { opts.nev };
            let mut pairs = Vec::with_capacity(keep);
            let mut ritz_images = Vec::with_capacity(keep);
            for &c in order.iter().take(keep) {
                let s = eig.eigenvectors.column(c);
                let y = combine(&basis, s.iter().copied());
                let ay = combine(&images, s.iter().copied());
                let theta = eig.eigenvalues[c];
                let mut r = ay.clone();
                axpy(&mut r, -theta, &y);
                let res = dot(&r, &r).sqrt();
                pairs.push(EigenPair { value: theta, vector: y, residual: res });
                ritz_images.push((ay, r));
            }
            let converged = pairs.iter().take(opts.nev).all(|p| p.residual <= opts.tol);
            if converged || exhausted {
                pairs.truncate(opts.nev);
                if !converged {
                    let worst = pairs.iter().map(|p| p.residual).fold(0.0, f64::max);
                    if worst > opts.tol {
                        return Err(Error::NotConverged(format!(
                            "full-space Ritz residual {worst:e} above {:e}",
                            opts.tol
                        )));
                    }
                }
                return Ok(pairs);
            }
            if full {
                restarts += 1;
                if restarts > opts.max_restarts {
                    let worst = pairs.iter().take(opts.nev).map(|p| p.residual).fold(0.0, f64::max);
                    return Err(Error::NotConverged(format!(
                        "eigensolver: {} restarts, worst residual {worst:e} (tol {:e})",
                        opts.max_restarts, opts.tol
                    )));
                }
                let mut residuals: Vec<(f64, Vec<f64>)> = Vec::new();
                basis.clear();
                images.clear();
                h.fill(0.0);
                for (p, (ay, r)) in pairs.into_iter().zip(ritz_images) {
                    if p.residual > opts.tol {
                        residuals.push((p.residual, r));
                    }
                    let j = basis.len();
                    for i in 0..j {
                        let v = dot(&basis[i], &ay);
                        h[(i, j)] = v;
                        h[(j, i)] = v;
                    }
                    h[(j, j)] = dot(&p.vector, &ay);
                    basis.push(p.vector);
                    images.push(ay);
                }
                residuals.truncate(block);
                pending = residuals.into_iter().map(|(_, r)| r).collect();
                while pending.len() < block {
                    pending.push(random_vector(&mut rng, n));
                }
                last_check = basis.len();
                continue;
            }
        }
        let start_new = images.len() - added;
        pending = images[start_new..].to_vec();
    }
}

/// Outcome of [`conjugate_gradient`].
#[derive(Debug, Clone)]
pub struct CgSolution {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Conjugate gradients for `A x = b` with `A` symmetric positive semidefinite
/// under the inner product `ip`.
///
/// `project` removes the kernel of `A`; it is applied to `b` and to every
/// iterate so the solution is the one orthogonal to the kernel.
pub fn conjugate_gradient(
    apply: &dyn Fn(&[f64]) -> Vec<f64>,
    b: &[f64],
    ip: &dyn Fn(&[f64], &[f64]) -> f64,
    project: &dyn Fn(&mut [f64]),
    tol: f64,
    max_iter: usize,
) -> Result<CgSolution> {
    let n = b.len();
    let mut r = b.to_vec();
    project(&mut r);
    let bnorm = ip(&r, &r).sqrt();
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok(CgSolution { x, iterations: 0, relative_residual: 0.0 });
    }
    let mut p = r.clone();
    let mut rr = ip(&r, &r);
    for it in 1..=max_iter {
        let mut ap = apply(&p);
        project(&mut ap);
        let pap = ip(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::NotConverged(format!("CG breakdown at iteration {it} (pAp = {pap:e})")));
        }
        let alpha = rr / pap;
        axpy(&mut x, alpha, &p);
        axpy(&mut r, -alpha, &ap);
        if it % 50 == 0 {
            // refresh the recursive residual against drift
            let mut ax = apply(&x);
            project(&mut ax);
            r = b.to_vec();
            project(&mut r);
            axpy(&mut r, -1.0, &ax);
        }
        let rr_new = ip(&r, &r);
        let rel = rr_new.sqrt() / bnorm;
        if rel <= tol {
            project(&mut x);
            return Ok(CgSolution { x, iterations: it, relative_residual: rel });
        }
        let beta = rr_new / rr;
        rr = rr_new;
        for (pi, ri) in p.iter_mut().zip(&r) {
            *pi = ri + beta * *pi;
        }
    }
    Err(Error::NotConverged(format!(
        "CG reached {max_iter} iterations (residual {:e})",
        ip(&r, &r).sqrt() / bnorm
    )))
}
