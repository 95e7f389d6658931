//! Product integration of the hat basis against distance kernels.
//!
//! For a target point `x` this computes, for every basis function `φ_j`,
//!
//! ```text
//! left_j  = ∫₀^x φ_j(y) k(x − y, y) dy
//! right_j = ∫ₓ¹ φ_j(y) k(y − x, y) dy
//! ```
//!
//! piece by piece. A piece ending at `x` sees the kernel's logarithmic
//! singularity; there `y = x ∓ L·t³` turns it into a `t² ln t` integrand.

use crate::error::Result;
use crate::quadrature::{integrate_vec, Tolerance};

use super::grid::SpatialGrid;

/// Basis integrals against an `M`-component kernel. `D` must equal `2·M`.
#[derive(Debug, Clone)]
pub(crate) struct BasisIntegrals<const M: usize> {
    pub left: Vec<[f64; M]>,
    pub right: Vec<[f64; M]>,
}

#[derive(Clone, Copy)]
enum Shape {
    One,
    Falling,
    Rising,
}

#[inline]
fn shape_value(shape: Shape, y: f64, a: f64, b: f64) -> f64 {
    match shape {
        Shape::One => 1.0,
        Shape::Falling => (b - y) / (b - a),
        Shape::Rising => (y - a) / (b - a),
    }
}

pub(crate) fn basis_integrals<const M: usize, const D: usize, K>(
    grid: &SpatialGrid,
    x: f64,
    kernel: K,
    tol: Tolerance,
) -> Result<BasisIntegrals<M>>
where
    K: Fn(f64, f64) -> [f64; M],
{
    debug_assert_eq!(D, 2 * M);
    let n = grid.len();
    let bp = grid.breakpoints();
    let mut out = BasisIntegrals { left: vec![[0.0; M]; n], right: vec![[0.0; M]; n] };
    for k in 0..=n {
        let (a, b) = (bp[k], bp[k + 1]);
        // (node, shape) pairs living on this piece, shapes relative to [a, b]
        let basis: [(usize, Shape); 2] = if k == 0 {
            [(0, Shape::One), (usize::MAX, Shape::One)]
        } else if k == n {
            [(n - 1, Shape::One), (usize::MAX, Shape::One)]
        } else {
            [(k - 1, Shape::Falling), (k, Shape::Rising)]
        };
        if b <= x {
            let v = piece::<M, D, _>(&kernel, x, a, b, a, b, basis, true, tol)?;
            accumulate(&mut out.left, basis, &v);
        } else if a >= x {
            let v = piece::<M, D, _>(&kernel, x, a, b, a, b, basis, false, tol)?;
            accumulate(&mut out.right, basis, &v);
        } else {
            let v = piece::<M, D, _>(&kernel, x, a, x, a, b, basis, true, tol)?;
            accumulate(&mut out.left, basis, &v);
            let v = piece::<M, D, _>(&kernel, x, x, b, a, b, basis, false, tol)?;
            accumulate(&mut out.right, basis, &v);
        }
    }
    Ok(out)
}

fn accumulate<const M: usize, const D: usize>(
    target: &mut [[f64; M]],
    basis: [(usize, Shape); 2],
    v: &[f64; D],
) {
    for (slot, (node, _)) in basis.iter().enumerate() {
        if *node == usize::MAX {
            continue;
        }
        for m in 0..M {
            target[*node][m] += v[slot * M + m];
        }
    }
}

/// Integrates over `[lo, hi] ⊂ [a, b]` lying on one side of `x`. `on_left`
/// means `hi ≤ x`.
#[allow(clippy::too_many_arguments)]
fn piece<const M: usize, const D: usize, K>(
    kernel: &K,
    x: f64,
    lo: f64,
    hi: f64,
    a: f64,
    b: f64,
    basis: [(usize, Shape); 2],
    on_left: bool,
    tol: Tolerance,
) -> Result<[f64; D]>
where
    K: Fn(f64, f64) -> [f64; M],
{
    let len = hi - lo;
    if len <= 0.0 {
        return Ok([0.0; D]);
    }
    let eval = |y: f64, d: f64, jac: f64| -> [f64; D] {
        let kv = kernel(d, y);
        let mut out = [0.0; D];
        for (slot, (node, shape)) in basis.iter().enumerate() {
            if *node == usize::MAX {
                continue;
            }
            let phi = shape_value(*shape, y, a, b) * jac;
            for m in 0..M {
                out[slot * M + m] = phi * kv[m];
            }
        }
        out
    };
    let touches = if on_left { hi == x } else { lo == x };
    if touches {
        integrate_vec(
            |t| {
                let d = len * t * t * t;
                let y = if on_left { x - d } else { x + d };
                eval(y, d, 3.0 * len * t * t)
            },
            0.0,
            1.0,
            1,
            tol,
        )
    } else {
        integrate_vec(|y| eval(y, (x - y).abs(), 1.0), lo, hi, 1, tol)
    }
}
