//! Small dense linear systems and quadratic roots.

use crate::error::{Error, Result};

/// Relative singularity threshold for [`solve_dense`].
pub const SINGULAR_REL: f64 = 1e-10;

/// Solves `A x = b` for a square system by Gaussian elimination with
/// partial pivoting.
///
/// A pivot smaller than [`SINGULAR_REL`] times the largest row norm of the
/// original matrix is reported as singular.
pub fn solve_dense<const N: usize>(mut a: [[f64; N]; N], mut b: [f64; N]) -> Result<[f64; N]> {
    let max_row = a
        .iter()
        .map(|row| row.iter().map(|v| v * v).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    let threshold = SINGULAR_REL * max_row;
    if !(max_row > 0.0) || !max_row.is_finite() {
        return Err(Error::SingularSystem {
            pivot: 0.0,
            threshold,
        });
    }

    for col in 0..N {
        let (pivot_row, pivot) = (col..N)
            .map(|r| (r, a[r][col]))
            .max_by(|x, y| x.1.abs().total_cmp(&y.1.abs()))
            .unwrap();
        if pivot.abs() <= threshold {
            return Err(Error::SingularSystem {
                pivot: pivot.abs(),
                threshold,
            });
        }
        a.swap(col, pivot_row);
        b.swap(col, pivot_row);
        for r in col + 1..N {
            let factor = a[r][col] / a[col][col];
            if factor == 0.0 {
                continue;
            }
            let pivot_row = a[col];
            for (x, p) in a[r][col..].iter_mut().zip(&pivot_row[col..]) {
                *x -= factor * p;
            }
            b[r] -= factor * b[col];
        }
    }

    let mut x = [0.0; N];
    for row in (0..N).rev() {
        let tail: f64 = (row + 1..N).map(|c| a[row][c] * x[c]).sum();
        x[row] = (b[row] - tail) / a[row][row];
    }
    Ok(x)
}

/// Real roots of `a t² + b t + c = 0`, ascending.
///
/// A discriminant in `(-slack * (b² + |4ac|), 0)` is treated as zero so
/// that rounding does not remove a double root. A vanishing leading
/// coefficient falls back to the linear equation.
pub fn quadratic_roots(a: f64, b: f64, c: f64, slack: f64) -> std::result::Result<Vec<f64>, f64> {
    let lin_scale = b.abs().max(c.abs());
    if a.abs() <= f64::EPSILON * lin_scale {
        if b == 0.0 {
            return Err(f64::NAN);
        }
        return Ok(vec![-c / b]);
    }
    let disc = b * b - 4.0 * a * c;
    let disc_scale = b * b + (4.0 * a * c).abs();
    if disc < 0.0 {
        if disc >= -slack * disc_scale {
            return Ok(vec![-b / (2.0 * a)]);
        }
        return Err(disc);
    }
    if disc == 0.0 {
        return Ok(vec![-b / (2.0 * a)]);
    }
    // avoids cancellation between -b and sqrt(disc)
    let q = -0.5 * (b + b.signum() * disc.sqrt());
    let (r1, r2) = if q == 0.0 {
        let r = (-c / a).sqrt();
        (-r, r)
    } else {
        (q / a, c / q)
    };
    Ok(if r1 <= r2 { vec![r1, r2] } else { vec![r2, r1] })
}
