use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::field::SymTensorField;
use super::GridSpec;
use crate::{Error, Result};

/// Integer wavevectors with `|k_a| <= kmax`, one of each `+-k` pair, zero mode first.
pub(crate) fn half_lattice(dim: usize, kmax: i64) -> Vec<[i64; 3]> {
    let mut out = vec![[0; 3]];
    let range: Vec<i64> = (-kmax..=kmax).collect();
    let mut push = |k: [i64; 3]| {
        let first = k.iter().take(dim).copied().find(|&c| c != 0);
        if first.is_some_and(|c| c > 0) {
            out.push(k);
        }
    };
    for &k0 in &range {
        for &k1 in &range {
            if dim == 2 {
                push([k0, k1, 0]);
            } else {
                for &k2 in &range {
                    push([k0, k1, k2]);
                }
            }
        }
    }
    out
}

/// Random smooth symmetric tensor whose Fourier content is limited to
/// wavevectors with `|k_a| <= max_wavenumber` on every axis.
///
/// Coefficients come from a ChaCha8 stream seeded with `seed`, the modes are
/// summed directly on the grid and the result is rescaled so its largest
/// component has magnitude `amplitude`.
pub fn band_limited_perturbation(
    grid: &GridSpec,
    seed: u64,
    max_wavenumber: u32,
    amplitude: f64,
) -> Result<SymTensorField> {
    if !(amplitude.is_finite() && amplitude >= 0.0) {
        return Err(Error::InvalidArgument(format!("amplitude {amplitude} must be >= 0")));
    }
    let mut h = SymTensorField::zeros(grid);
    if amplitude == 0.0 {
        return Ok(h);
    }
    let dim = grid.dim();
    let nc = h.components();
    let n = grid.points() as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for k in half_lattice(dim, max_wavenumber as i64) {
        let coeffs: Vec<(f64, f64)> =
            (0..nc).map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        for node in 0..grid.node_count() {
            let c = grid.coords(node);
            let theta: f64 = (0..dim).map(|a| 2.0 * PI * (k[a] * c[a] as i64) as f64 / n).sum();
            let (s, co) = theta.sin_cos();
            for (v, (a, b)) in h.at_mut(node).iter_mut().zip(&coeffs) {
                *v += a * co + b * s;
            }
        }
    }
    let sup = h.sup_norm();
    Ok(h.scale(amplitude / sup))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_lattice_counts() {
        assert_eq!(half_lattice(2, 1).len(), 5);
        assert_eq!(half_lattice(3, 2).len(), 63);
    }

    #[test]
    fn zero_amplitude_gives_zero() {
        let g = GridSpec::torus(2, 8, 1.0).unwrap();
        assert_eq!(band_limited_perturbation(&g, 3, 2, 0.0).unwrap().sup_norm(), 0.0);
    }

    #[test]
    fn sup_norm_is_the_requested_amplitude() {
        let g = GridSpec::torus(2, 32, 1.0).unwrap();
        let h = band_limited_perturbation(&g, 7, 2, 1e-2).unwrap();
        assert!((h.sup_norm() - 1e-2).abs() < 1e-12);
        let again = band_limited_perturbation(&g, 7, 2, 1e-2).unwrap();
        assert_eq!(h.data(), again.data());
    }
}
