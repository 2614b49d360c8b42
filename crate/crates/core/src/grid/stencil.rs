//! Finite-difference stencil tables and their periodic application.

use serde::{Deserialize, Serialize};

use super::GridSpec;

pub(crate) type Taps = &'static [(isize, f64)];

/// Formal accuracy of the finite-difference stencils.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub enum StencilOrder {
    #[default]
    Second,
    Fourth,
    Sixth,
}

impl TryFrom<u32> for StencilOrder {
    type Error = String;

    fn try_from(value: u32) -> Result<Self, Self::Error> {
        match value {
            2 => Ok(Self::Second),
            4 => Ok(Self::Fourth),
            6 => Ok(Self::Sixth),
            other => Err(format!("unsupported stencil order {other} (expected 2, 4 or 6)")),
        }
    }
}

impl From<StencilOrder> for u32 {
    fn from(s: StencilOrder) -> u32 {
        s.order() as u32
    }
}

const FIRST_2: Taps = &[(-1, -0.5), (1, 0.5)];
const FIRST_4: Taps = &[(-2, 1.0 / 12.0), (-1, -2.0 / 3.0), (1, 2.0 / 3.0), (2, -1.0 / 12.0)];
const FIRST_6: Taps = &[
    (-3, -1.0 / 60.0),
    (-2, 3.0 / 20.0),
    (-1, -0.75),
    (1, 0.75),
    (2, -3.0 / 20.0),
    (3, 1.0 / 60.0),
];

const SECOND_2: Taps = &[(-1, 1.0), (0, -2.0), (1, 1.0)];
const SECOND_4: Taps = &[
    (-2, -1.0 / 12.0),
    (-1, 4.0 / 3.0),
    (0, -2.5),
    (1, 4.0 / 3.0),
    (2, -1.0 / 12.0),
];
const SECOND_6: Taps = &[
    (-3, 1.0 / 90.0),
    (-2, -3.0 / 20.0),
    (-1, 1.5),
    (0, -49.0 / 18.0),
    (1, 1.5),
    (2, -3.0 / 20.0),
    (3, 1.0 / 90.0),
];

// Value at the half node i + 1/2, offsets relative to i.
const STAG_D_2: Taps = &[(0, -1.0), (1, 1.0)];
const STAG_D_4: Taps = &[(-1, 1.0 / 24.0), (0, -9.0 / 8.0), (1, 9.0 / 8.0), (2, -1.0 / 24.0)];
const STAG_D_6: Taps = &[
    (-2, -3.0 / 640.0),
    (-1, 25.0 / 384.0),
    (0, -75.0 / 64.0),
    (1, 75.0 / 64.0),
    (2, -25.0 / 384.0),
    (3, 3.0 / 640.0),
];

const STAG_I_2: Taps = &[(0, 0.5), (1, 0.5)];
const STAG_I_4: Taps = &[(-1, -1.0 / 16.0), (0, 9.0 / 16.0), (1, 9.0 / 16.0), (2, -1.0 / 16.0)];
const STAG_I_6: Taps = &[
    (-2, 3.0 / 256.0),
    (-1, -25.0 / 256.0),
    (0, 150.0 / 256.0),
    (1, 150.0 / 256.0),
    (2, -25.0 / 256.0),
    (3, 3.0 / 256.0),
];

impl StencilOrder {
    pub fn order(self) -> usize {
        match self {
            Self::Second => 2,
            Self::Fourth => 4,
            Self::Sixth => 6,
        }
    }

    /// Half-width of the widest stencil.
    pub fn halo(self) -> usize {
        self.order() / 2
    }

    pub(crate) fn first(self) -> Taps {
        match self {
            Self::Second => FIRST_2,
            Self::Fourth => FIRST_4,
            Self::Sixth => FIRST_6,
        }
    }

    pub(crate) fn second(self) -> Taps {
        match self {
            Self::Second => SECOND_2,
            Self::Fourth => SECOND_4,
            Self::Sixth => SECOND_6,
        }
    }

    pub(crate) fn staggered_derivative(self) -> Taps {
        match self {
            Self::Second => STAG_D_2,
            Self::Fourth => STAG_D_4,
            Self::Sixth => STAG_D_6,
        }
    }

    pub(crate) fn staggered_interpolation(self) -> Taps {
        match self {
            Self::Second => STAG_I_2,
            Self::Fourth => STAG_I_4,
            Self::Sixth => STAG_I_6,
        }
    }
}

/// `dst[p] = scale * sum_t w_t * src[p + o_t e_axis]` for every node and component.
///
/// With `transpose` the offsets are negated, which yields the adjoint map
/// under the plain Euclidean pairing.
pub(crate) fn apply_taps(
    grid: &GridSpec,
    src: &[f64],
    nc: usize,
    axis: usize,
    taps: Taps,
    scale: f64,
    transpose: bool,
    dst: &mut [f64],
) {
    debug_assert_eq!(src.len(), dst.len());
    let n = grid.points();
    // Nodes sharing the axis coordinate and the slower axes form one
    // contiguous block of `len` values.
    let len = grid.stride(axis) * nc;
    let outer = src.len() / (n * len);
    let shifted: Vec<(isize, f64)> = taps
        .iter()
        .map(|&(o, w)| (if transpose { -o } else { o }, w * scale))
        .collect();
    for hi in 0..outer {
        for c in 0..n {
            let d = &mut dst[(hi * n + c) * len..(hi * n + c + 1) * len];
            d.iter_mut().for_each(|v| *v = 0.0);
            for &(o, w) in &shifted {
                let j = (c as isize + o).rem_euclid(n as isize) as usize;
                let s = &src[(hi * n + j) * len..(hi * n + j + 1) * len];
                for (x, y) in d.iter_mut().zip(s) {
                    *x += w * y;
                }
            }
        }
    }
}

/// Central first derivative along `axis` of raw multi-component data.
pub(crate) fn d1(grid: &GridSpec, src: &[f64], nc: usize, axis: usize) -> Vec<f64> {
    let mut out = vec![0.0; src.len()];
    let h = grid.spacing(axis);
    apply_taps(grid, src, nc, axis, grid.stencil().first(), 1.0 / h, false, &mut out);
    out
}

/// Compact central second derivative along `axis` of raw multi-component data.
pub(crate) fn d2(grid: &GridSpec, src: &[f64], nc: usize, axis: usize) -> Vec<f64> {
    let mut out = vec![0.0; src.len()];
    let h = grid.spacing(axis);
    apply_taps(grid, src, nc, axis, grid.stencil().second(), 1.0 / (h * h), false, &mut out);
    out
}
