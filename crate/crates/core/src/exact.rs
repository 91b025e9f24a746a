//! Exact rational elimination, used as a reference for the floating-point
//! solver and for auditing closed-form flux expressions.
//!
//! Every `f64` input converts to a rational without rounding, so the only
//! rounding in the whole path is the final conversion of each result back
//! to the nearest `f64`.

use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};

use crate::network::MeshSystem;

/// Converts a finite `f64` to the rational it represents exactly.
pub fn to_rational(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite input")
}

pub fn to_f64(x: &BigRational) -> f64 {
    // BigRational::to_f64 rounds correctly for values in range.
    x.to_f64().unwrap_or_else(|| {
        let num = x.numer().to_f64().unwrap_or(f64::NAN);
        let den = x.denom().to_f64().unwrap_or(f64::NAN);
        num / den
    })
}

/// Solves `A·x = b` exactly; `None` if the matrix is singular.
pub fn solve_exact(matrix: &[BigRational], rhs: &[BigRational]) -> Option<Vec<BigRational>> {
    let n = rhs.len();
    assert_eq!(matrix.len(), n * n, "matrix must be n×n");
    let mut a: Vec<BigRational> = matrix.to_vec();
    let mut b: Vec<BigRational> = rhs.to_vec();
    for k in 0..n {
        let pivot = (k..n).find(|&r| !a[r * n + k].is_zero())?;
        if pivot != k {
            for c in 0..n {
                a.swap(k * n + c, pivot * n + c);
            }
            b.swap(k, pivot);
        }
        for r in (k + 1)..n {
            if a[r * n + k].is_zero() {
                continue;
            }
            let factor = &a[r * n + k] / &a[k * n + k];
            for c in k..n {
                let delta = &factor * &a[k * n + c];
                a[r * n + c] -= delta;
            }
            let delta = &factor * &b[k];
            b[r] -= delta;
        }
    }
    let mut x = vec![BigRational::zero(); n];
    for r in (0..n).rev() {
        let mut acc = b[r].clone();
        for c in (r + 1)..n {
            acc -= &a[r * n + c] * &x[c];
        }
        x[r] = acc / &a[r * n + r];
    }
    Some(x)
}

/// Exact solution of a mesh system, rounded once to `f64`.
pub fn solve_mesh_exact(system: &MeshSystem) -> Option<Vec<f64>> {
    let exact = solve_mesh_rational(system)?;
    Some(exact.iter().map(to_f64).collect())
}

/// Exact solution of a mesh system as rationals. The system's entries
/// carry their assembly rounding errors, so this is the exact solution for
/// the element values as given.
pub fn solve_mesh_rational(system: &MeshSystem) -> Option<Vec<BigRational>> {
    let (matrix_lo, rhs_lo) = system.corrections();
    let exact = |hi: &[f64], lo: &[f64]| -> Vec<BigRational> {
        hi.iter().zip(lo).map(|(&h, &l)| to_rational(h) + to_rational(l)).collect()
    };
    let matrix = exact(system.matrix(), matrix_lo);
    let rhs = exact(system.rhs(), rhs_lo);
    solve_exact(&matrix, &rhs)
}

/// Exact relative residual of an `f64` solution candidate, rounded to `f64`.
pub fn exact_residual(system: &MeshSystem, x: &[f64]) -> f64 {
    let n = system.size();
    let xs: Vec<BigRational> = x.iter().map(|&v| to_rational(v)).collect();
    let (matrix_lo, rhs_lo) = system.corrections();
    let mut worst = BigRational::zero();
    for i in 0..n {
        let mut acc = -(to_rational(system.rhs()[i]) + to_rational(rhs_lo[i]));
        for (j, xj) in xs.iter().enumerate() {
            acc += (to_rational(system.get(i, j)) + to_rational(matrix_lo[i * n + j])) * xj;
        }
        let abs = if acc < BigRational::zero() { -acc } else { acc };
        if abs > worst {
            worst = abs;
        }
    }
    let scale = system.rhs().iter().map(|v| v.abs()).fold(0.0, f64::max);
    if scale == 0.0 {
        return to_f64(&worst);
    }
    to_f64(&(worst / to_rational(scale)))
}
