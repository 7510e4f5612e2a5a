//! `b²` as a function of `c²` for a triangle seen in two frames.
//!
//! Subtracting the two per-frame relations leaves an equation linear in
//! `a²`:
//!
//! ```text
//! a² = r_b·b² + r_c·c² + r_k,   r_· = (coef_·(2) − coef_·(1)) / (coef_a(1) − coef_a(2))
//! ```
//!
//! Substituting it into the frame-1 relation gives a biquadratic
//!
//! ```text
//! f_b2·b⁴ + b²·(f_cb·c² + f_b) + (f_c2·c⁴ + f_c·c² + f_cst) = 0
//! ```
//!
//! with
//!
//! ```text
//! f_b2  = (1 − r_b)²
//! f_c2  = (1 − r_c)²
//! f_cb  = 2(r_b·r_c − r_b − r_c − 1)
//! f_b   = coef_a(1)·r_b + coef_b(1) + 2·r_k·(r_b − 1)
//! f_c   = coef_a(1)·r_c + coef_c(1) + 2·r_k·(r_c − 1)
//! f_cst = r_k² + coef_a(1)·r_k + constant(1)
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Tolerance, TriangleDistances};
use crate::linalg::{quadratic_roots, solve_dense, SINGULAR_REL};
use crate::solvers::{eq1_residual, QuadCoeffs3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BofCCoeffs {
    pub f_cb: f64,
    pub f_c: f64,
    pub f_b: f64,
    pub f_cst: f64,
    pub f_b2: f64,
    pub f_c2: f64,
    /// `a² = r_b·b² + r_c·c² + r_k`
    pub r_b: f64,
    pub r_c: f64,
    pub r_k: f64,
}

impl BofCCoeffs {
    /// Value of the biquadratic.
    pub fn eval(&self, b_sq: f64, c_sq: f64) -> f64 {
        self.f_b2 * b_sq * b_sq
            + b_sq * (self.f_cb * c_sq + self.f_b)
            + (self.f_c2 * c_sq * c_sq + self.f_c * c_sq + self.f_cst)
    }

    pub fn a_sq(&self, b_sq: f64, c_sq: f64) -> f64 {
        self.r_b * b_sq + self.r_c * c_sq + self.r_k
    }

    /// `Δ_b = (c²f_cb + f_b)² − 4 f_b2 (c²f_c + c⁴f_c2 + f_cst)`
    pub fn discriminant(&self, c_sq: f64) -> f64 {
        let lin = c_sq * self.f_cb + self.f_b;
        lin * lin - 4.0 * self.f_b2 * self.constant_term(c_sq)
    }

    fn constant_term(&self, c_sq: f64) -> f64 {
        c_sq * self.f_c + c_sq * c_sq * self.f_c2 + self.f_cst
    }
}

/// Eliminates `a²` between the two frames.
pub fn b_of_c_coeffs(frame1: &TriangleDistances, frame2: &TriangleDistances) -> Result<BofCCoeffs> {
    let k1 = QuadCoeffs3::from_frame(frame1);
    let k2 = QuadCoeffs3::from_frame(frame2);
    let den = k1.coef_a - k2.coef_a;
    let size = k1.coef_a.abs().max(k2.coef_a.abs()).max(frame1.max_sq()).max(frame2.max_sq());
    if !(den.abs() > SINGULAR_REL * size) {
        return Err(Error::DegenerateElimination { pivot: den });
    }
    let r_b = (k2.coef_b - k1.coef_b) / den;
    let r_c = (k2.coef_c - k1.coef_c) / den;
    let r_k = (k2.constant - k1.constant) / den;
    Ok(BofCCoeffs {
        f_b2: (1.0 - r_b) * (1.0 - r_b),
        f_c2: (1.0 - r_c) * (1.0 - r_c),
        f_cb: 2.0 * (r_b * r_c - r_b - r_c - 1.0),
        f_b: k1.coef_a * r_b + k1.coef_b + 2.0 * r_k * (r_b - 1.0),
        f_c: k1.coef_a * r_c + k1.coef_c + 2.0 * r_k * (r_c - 1.0),
        f_cst: r_k * r_k + k1.coef_a * r_k + k1.constant,
        r_b,
        r_c,
        r_k,
    })
}

/// Non-negative roots `b²` of the biquadratic at a fixed `c²`, ascending.
///
/// A discriminant below `−tol.rel` relative to the magnitude of its terms is
/// reported as [`Error::NoSolution`]; the caller has to pick another `c`.
pub fn solve_b_given_c(coeffs: &BofCCoeffs, c_sq: f64, tol: Tolerance) -> Result<Vec<f64>> {
    if !(c_sq >= 0.0) {
        return Err(Error::InvalidInput(format!("c² = {c_sq} must be non-negative")));
    }
    let lin = c_sq * coeffs.f_cb + coeffs.f_b;
    match quadratic_roots(coeffs.f_b2, lin, coeffs.constant_term(c_sq), tol.rel) {
        Ok(mut roots) => {
            roots.retain(|&b| b >= 0.0);
            Ok(roots)
        }
        Err(discriminant) => Err(Error::NoSolution { discriminant }),
    }
}

/// Newton refinement of `(a², b²)` at fixed `c²` against both frame
/// relations. Roots of the biquadratic near its double root carry errors
/// of order `sqrt(ε)`; a few steps bring both relations back to rounding.
pub(crate) fn polish_pair(
    lengths: TriangleDistances,
    frame1: &TriangleDistances,
    frame2: &TriangleDistances,
) -> TriangleDistances {
    let frames = [frame1, frame2];
    let worst = |t: &TriangleDistances| {
        frames
            .iter()
            .map(|f| eq1_residual(t, f).abs())
            .fold(0.0, f64::max)
    };
    let mut x = lengths;
    let mut current = worst(&x);
    for _ in 0..6 {
        if current == 0.0 {
            break;
        }
        let v = x.to_array();
        let grad = [2.0 * (v[0] - v[1] - v[2]), 2.0 * (v[1] - v[0] - v[2])];
        let mut jac = [[0.0; 2]; 2];
        let mut rhs = [0.0; 2];
        for (row, f) in frames.iter().enumerate() {
            let lin = QuadCoeffs3::from_frame(f).linear();
            jac[row] = [grad[0] + lin[0], grad[1] + lin[1]];
            rhs[row] = -eq1_residual(&x, f);
        }
        let Ok(step) = solve_dense(jac, rhs) else {
            break;
        };
        let next = TriangleDistances::new(v[0] + step[0], v[1] + step[1], v[2]);
        let next_worst = worst(&next);
        if !(next_worst < current) {
            break;
        }
        x = next;
        current = next_worst;
    }
    x
}
