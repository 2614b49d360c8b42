//! Small dense helpers for per-node 2x2 / 3x3 symmetric matrices.

use nalgebra::{Matrix2, Matrix3};

pub type Mat3 = [[f64; 3]; 3];

/// Storage slot of the symmetric component `(i, j)` in lexicographic `i <= j` order.
pub fn sym_index(i: usize, j: usize, dim: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * dim - i * i.saturating_sub(1) / 2 + (j - i)
}

pub(crate) fn sym_components(dim: usize) -> usize {
    dim * (dim + 1) / 2
}

pub(crate) fn unpack(comps: &[f64], dim: usize) -> Mat3 {
    let mut m = [[0.0; 3]; 3];
    for i in 0..dim {
        for j in i..dim {
            let v = comps[sym_index(i, j, dim)];
            m[i][j] = v;
            m[j][i] = v;
        }
    }
    m
}

pub(crate) fn pack(m: &Mat3, dim: usize, out: &mut [f64]) {
    for i in 0..dim {
        for j in i..dim {
            out[sym_index(i, j, dim)] = m[i][j];
        }
    }
}

pub(crate) fn det(m: &Mat3, dim: usize) -> f64 {
    if dim == 2 {
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    } else {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }
}

pub(crate) fn inverse(m: &Mat3, dim: usize) -> Mat3 {
    let d = det(m, dim);
    let mut r = [[0.0; 3]; 3];
    if dim == 2 {
        r[0][0] = m[1][1] / d;
        r[1][1] = m[0][0] / d;
        r[0][1] = -m[0][1] / d;
        r[1][0] = -m[1][0] / d;
    } else {
        for i in 0..3 {
            for j in 0..3 {
                let (a, b) = ((j + 1) % 3, (j + 2) % 3);
                let (c, e) = ((i + 1) % 3, (i + 2) % 3);
                r[i][j] = (m[a][c] * m[b][e] - m[a][e] * m[b][c]) / d;
            }
        }
    }
    r
}

pub(crate) fn min_eigenvalue(m: &Mat3, dim: usize) -> f64 {
    if dim == 2 {
        Matrix2::new(m[0][0], m[0][1], m[1][0], m[1][1])
            .symmetric_eigenvalues()
            .min()
    } else {
        Matrix3::from_fn(|i, j| m[i][j]).symmetric_eigenvalues().min()
    }
}

/// `sum_{ij} a^{ij} b_{ij}` over the leading `dim` block.
pub(crate) fn contract2(a: &Mat3, b: &Mat3, dim: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..dim {
        for j in 0..dim {
            s += a[i][j] * b[i][j];
        }
    }
    s
}

/// `a b c` for the leading `dim` block.
pub(crate) fn triple(a: &Mat3, b: &Mat3, c: &Mat3, dim: usize) -> Mat3 {
    let mut ab = [[0.0; 3]; 3];
    for i in 0..dim {
        for j in 0..dim {
            ab[i][j] = (0..dim).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    let mut r = [[0.0; 3]; 3];
    for i in 0..dim {
        for j in 0..dim {
            r[i][j] = (0..dim).map(|k| ab[i][k] * c[k][j]).sum();
        }
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sym_index_is_lexicographic() {
        assert_eq!(
            (0..2).flat_map(|i| (i..2).map(move |j| sym_index(i, j, 2))).collect::<Vec<_>>(),
            vec![0, 1, 2]
        );
        assert_eq!(
            (0..3).flat_map(|i| (i..3).map(move |j| sym_index(i, j, 3))).collect::<Vec<_>>(),
            vec![0, 1, 2, 3, 4, 5]
        );
        assert_eq!(sym_index(2, 1, 3), sym_index(1, 2, 3));
    }

    #[test]
    fn inverse_of_3x3() {
        let m = [[2.0, 0.3, 0.1], [0.3, 1.5, -0.2], [0.1, -0.2, 1.1]];
        let r = inverse(&m, 3);
        for i in 0..3 {
            for j in 0..3 {
                let p: f64 = (0..3).map(|k| m[i][k] * r[k][j]).sum();
                assert!((p - if i == j { 1.0 } else { 0.0 }).abs() < 1e-14);
            }
        }
        assert!(min_eigenvalue(&m, 3) > 0.0);
    }
}
