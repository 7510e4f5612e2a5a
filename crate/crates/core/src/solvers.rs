//! Closed-form recovery of squared lengths from projected squared lengths.
//!
//! For one frame with projected squared lengths `(A, B, C)` and unknown true
//! squared lengths `(x, y, z)`, the depth offsets satisfy
//! `±√(x−A) ± √(y−B) ± √(z−C) = 0`. Squaring twice removes the signs:
//!
//! ```text
//! x² + y² + z² − 2xy − 2xz − 2yz
//!   + 2(−A+B+C)·x + 2(A−B+C)·y + 2(A+B−C)·z
//!   + A² + B² + C² − 2AB − 2AC − 2BC = 0
//! ```
//!
//! The quadratic part does not depend on the frame, so differences between
//! frames are linear in `(x, y, z)`. Three frames leave one quadratic in
//! `c²`; four frames, or four points over three frames, give a linear
//! system with a unique solution.
//!
//! All solvers normalise the inputs by the largest projected squared length
//! before eliminating and scale the result back.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{TetraDistances, Tolerance, TriangleDistances};
use crate::linalg::{quadratic_roots, solve_dense, SINGULAR_REL};

/// Per-frame multipliers of the squared-once-more sign relation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadCoeffs3 {
    pub coef_a: f64,
    pub coef_b: f64,
    pub coef_c: f64,
    pub constant: f64,
}

impl QuadCoeffs3 {
    pub fn from_frame(f: &TriangleDistances) -> Self {
        let (a, b, c) = (f.a_sq, f.b_sq, f.c_sq);
        Self {
            coef_a: 2.0 * (-a + b + c),
            coef_b: 2.0 * (a - b + c),
            coef_c: 2.0 * (a + b - c),
            constant: a * a + b * b + c * c - 2.0 * a * b - 2.0 * a * c - 2.0 * b * c,
        }
    }

    pub fn linear(&self) -> [f64; 3] {
        [self.coef_a, self.coef_b, self.coef_c]
    }

    /// `self - other`, coefficient-wise.
    pub fn minus(&self, other: &Self) -> Self {
        Self {
            coef_a: self.coef_a - other.coef_a,
            coef_b: self.coef_b - other.coef_b,
            coef_c: self.coef_c - other.coef_c,
            constant: self.constant - other.constant,
        }
    }
}

/// Frame-independent quadratic part `x²+y²+z²−2xy−2xz−2yz` as a bilinear
/// form.
fn sign_free_form(u: [f64; 3], v: [f64; 3]) -> f64 {
    u[0] * v[0] + u[1] * v[1] + u[2] * v[2]
        - (u[0] * v[1] + u[1] * v[0])
        - (u[0] * v[2] + u[2] * v[0])
        - (u[1] * v[2] + u[2] * v[1])
}

/// Left-hand side of the sign-free relation for one frame. Zero when the
/// lengths are consistent with the frame.
pub fn eq1_residual(lengths: &TriangleDistances, frame_sq: &TriangleDistances) -> f64 {
    let v = lengths.to_array();
    let k = QuadCoeffs3::from_frame(frame_sq);
    sign_free_form(v, v) + k.coef_a * v[0] + k.coef_b * v[1] + k.coef_c * v[2] + k.constant
}

/// Two frame differences against a pivot frame and the resulting affine
/// expressions `a² = A_c·c² + A_Cst`, `b² = B_c·c² + B_Cst`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearizedPair {
    pub d_a1: f64,
    pub d_b1: f64,
    pub d_c1: f64,
    pub d_cst1: f64,
    pub d_a2: f64,
    pub d_b2: f64,
    pub d_c2: f64,
    pub d_cst2: f64,
    pub a_c: f64,
    pub a_cst: f64,
    pub b_c: f64,
    pub b_cst: f64,
}

impl LinearizedPair {
    /// Differences `first − pivot` and `second − pivot`, eliminated for
    /// `a²` and `b²`.
    pub fn new(
        first: &TriangleDistances,
        second: &TriangleDistances,
        pivot: &TriangleDistances,
    ) -> Result<Self> {
        let p = QuadCoeffs3::from_frame(pivot);
        let d1 = QuadCoeffs3::from_frame(first).minus(&p);
        let d2 = QuadCoeffs3::from_frame(second).minus(&p);
        let den = Self::denominator_of(&d1, &d2);
        let norm = row_norm(&d1).max(row_norm(&d2));
        if !(den.abs() > SINGULAR_REL * norm * norm) {
            return Err(Error::DegenerateElimination { pivot: den });
        }
        let a_c = (-d1.coef_c * d2.coef_b + d2.coef_c * d1.coef_b) / den;
        let a_cst = (-d1.constant * d2.coef_b + d2.constant * d1.coef_b) / den;
        let b_c = (-d1.coef_a * d2.coef_c + d2.coef_a * d1.coef_c) / den;
        let b_cst = (-d1.coef_a * d2.constant + d2.coef_a * d1.constant) / den;
        Ok(Self {
            d_a1: d1.coef_a,
            d_b1: d1.coef_b,
            d_c1: d1.coef_c,
            d_cst1: d1.constant,
            d_a2: d2.coef_a,
            d_b2: d2.coef_b,
            d_c2: d2.coef_c,
            d_cst2: d2.constant,
            a_c,
            a_cst,
            b_c,
            b_cst,
        })
    }

    fn denominator_of(d1: &QuadCoeffs3, d2: &QuadCoeffs3) -> f64 {
        d1.coef_a * d2.coef_b - d2.coef_a * d1.coef_b
    }

    pub fn denominator(&self) -> f64 {
        self.d_a1 * self.d_b2 - self.d_a2 * self.d_b1
    }

    /// `|denominator|` relative to the squared norm of the difference rows.
    pub fn conditioning(&self) -> f64 {
        let n1 = (self.d_a1.powi(2) + self.d_b1.powi(2) + self.d_c1.powi(2)).sqrt();
        let n2 = (self.d_a2.powi(2) + self.d_b2.powi(2) + self.d_c2.powi(2)).sqrt();
        let n = n1.max(n2);
        self.denominator().abs() / (n * n)
    }

    /// `(a², b²)` for a given `c²`.
    pub fn eval(&self, c_sq: f64) -> (f64, f64) {
        (self.a_c * c_sq + self.a_cst, self.b_c * c_sq + self.b_cst)
    }
}

fn row_norm(d: &QuadCoeffs3) -> f64 {
    d.linear().iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Squared-length tuples a solver can return.
pub trait SquaredLengths: Copy + std::fmt::Debug {
    fn values(&self) -> Vec<f64>;
}

impl SquaredLengths for TriangleDistances {
    fn values(&self) -> Vec<f64> {
        self.to_array().to_vec()
    }
}

impl SquaredLengths for TetraDistances {
    fn values(&self) -> Vec<f64> {
        self.to_array().to_vec()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate<L> {
    pub lengths: L,
    pub feasible: bool,
    /// Sign-free relation residual per frame, divided by the fourth power
    /// of the observation diameter.
    pub residuals: Vec<f64>,
}

impl<L> Candidate<L> {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().fold(0.0, |m, r| m.max(r.abs()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryResult<L> {
    /// Sorted by maximum residual, ascending.
    pub candidates: Vec<Candidate<L>>,
    /// Set when the final quadratic has no real root.
    pub measurement_inconsistent: bool,
}

impl<L: SquaredLengths> RecoveryResult<L> {
    pub fn feasible(&self) -> impl Iterator<Item = &Candidate<L>> {
        self.candidates.iter().filter(|c| c.feasible)
    }

    pub fn best(&self) -> Option<&Candidate<L>> {
        self.feasible().next().or(self.candidates.first())
    }
}

/// Physical feasibility: every squared length is non-negative and no shorter
/// than its projection in any frame, both within
/// `tol.rel · diameter²`.
pub fn feasibility_check(candidate: &[f64], frames: &[Vec<f64>], tol: Tolerance) -> bool {
    let scale_sq = frames
        .iter()
        .flat_map(|f| f.iter().copied())
        .fold(0.0, f64::max);
    let margin = tol.rel * scale_sq;
    candidate.iter().enumerate().all(|(i, &v)| {
        v.is_finite()
            && v >= -margin
            && frames
                .iter()
                .all(|f| f.get(i).is_none_or(|&proj| v >= proj - margin))
    })
}

fn observation_scale_sq<'a>(values: impl IntoIterator<Item = &'a f64>) -> Result<f64> {
    let mut max = 0.0_f64;
    for &v in values {
        if !v.is_finite() || v < 0.0 {
            return Err(Error::InvalidInput(format!(
                "projected squared length {v} is not a finite non-negative number"
            )));
        }
        max = max.max(v);
    }
    if max <= 0.0 {
        return Err(Error::InvalidInput(
            "all projected points coincide in every frame".into(),
        ));
    }
    Ok(max)
}

fn build_candidate<L: SquaredLengths>(
    lengths: L,
    frame_values: &[Vec<f64>],
    residuals: Vec<f64>,
    tol: Tolerance,
) -> Candidate<L> {
    let feasible = feasibility_check(&lengths.values(), frame_values, tol)
        && residuals.iter().all(|r| r.abs() <= tol.rel);
    Candidate {
        lengths,
        feasible,
        residuals,
    }
}

fn sort_candidates<L>(candidates: &mut [Candidate<L>]) {
    candidates.sort_by(|a, b| a.max_residual().total_cmp(&b.max_residual()));
}

fn triangle_residuals(lengths: &TriangleDistances, frames: &[TriangleDistances], scale_sq: f64) -> Vec<f64> {
    frames
        .iter()
        .map(|f| eq1_residual(lengths, f) / (scale_sq * scale_sq))
        .collect()
}

/// Three points over three frames: one quadratic in `c²`, zero to two
/// candidates.
///
/// Each frame is tried as the elimination pivot and the pair with the best
/// conditioned `2×2` denominator is used.
pub fn solve_p3f3(frames: &[TriangleDistances; 3], tol: Tolerance) -> Result<RecoveryResult<TriangleDistances>> {
    let scale_sq = observation_scale_sq(frames.iter().flat_map(|f| [&f.a_sq, &f.b_sq, &f.c_sq]))?;
    let norm = frames.map(|f| f.scaled(1.0 / scale_sq));

    let mut best: Option<(usize, LinearizedPair, f64)> = None;
    let mut worst_pivot = 0.0_f64;
    for pivot in 0..3 {
        let (i, j) = match pivot {
            0 => (1, 2),
            1 => (0, 2),
            _ => (0, 1),
        };
        match LinearizedPair::new(&norm[i], &norm[j], &norm[pivot]) {
            Ok(pair) => {
                let quality = pair.conditioning();
                if best.as_ref().is_none_or(|b| quality > b.2) {
                    best = Some((pivot, pair, quality));
                }
            }
            Err(Error::DegenerateElimination { pivot }) => {
                worst_pivot = worst_pivot.max(pivot.abs());
            }
            Err(e) => return Err(e),
        }
    }
    let Some((pivot, pair, _)) = best else {
        return Err(Error::DegenerateElimination { pivot: worst_pivot });
    };

    let k = QuadCoeffs3::from_frame(&norm[pivot]);
    let slope = [pair.a_c, pair.b_c, 1.0];
    let offset = [pair.a_cst, pair.b_cst, 0.0];
    let lin = k.linear();
    let dot = |u: [f64; 3], v: [f64; 3]| u[0] * v[0] + u[1] * v[1] + u[2] * v[2];
    let qa = sign_free_form(slope, slope);
    let qb = 2.0 * sign_free_form(slope, offset) + dot(lin, slope);
    let qc = sign_free_form(offset, offset) + dot(lin, offset) + k.constant;

    let roots = match quadratic_roots(qa, qb, qc, tol.rel) {
        Ok(r) => r,
        Err(_) => {
            return Ok(RecoveryResult {
                candidates: Vec::new(),
                measurement_inconsistent: true,
            })
        }
    };

    let frame_values: Vec<Vec<f64>> = frames.iter().map(|f| f.to_array().to_vec()).collect();
    let mut candidates: Vec<_> = roots
        .into_iter()
        .map(|c_sq| {
            let (a_sq, b_sq) = pair.eval(c_sq);
            let root = polish_triangle(TriangleDistances::new(a_sq, b_sq, c_sq), &norm);
            let lengths = root.scaled(scale_sq);
            let residuals = triangle_residuals(&lengths, frames, scale_sq);
            build_candidate(lengths, &frame_values, residuals, tol)
        })
        .collect();
    sort_candidates(&mut candidates);
    Ok(RecoveryResult {
        candidates,
        measurement_inconsistent: false,
    })
}

/// Newton steps on the three per-frame relations, kept only while they
/// reduce the largest residual. Elimination through a poorly conditioned
/// denominator can cost a few digits; the original equations recover them.
fn polish_triangle(mut x: TriangleDistances, frames: &[TriangleDistances; 3]) -> TriangleDistances {
    let worst = |t: &TriangleDistances| {
        frames
            .iter()
            .map(|f| eq1_residual(t, f).abs())
            .fold(0.0, f64::max)
    };
    let mut current = worst(&x);
    for _ in 0..4 {
        if current == 0.0 {
            break;
        }
        let v = x.to_array();
        let grad_q = [
            2.0 * (v[0] - v[1] - v[2]),
            2.0 * (v[1] - v[0] - v[2]),
            2.0 * (v[2] - v[0] - v[1]),
        ];
        let mut jac = [[0.0; 3]; 3];
        let mut rhs = [0.0; 3];
        for (row, f) in frames.iter().enumerate() {
            let lin = QuadCoeffs3::from_frame(f).linear();
            for k in 0..3 {
                jac[row][k] = grad_q[k] + lin[k];
            }
            rhs[row] = -eq1_residual(&x, f);
        }
        let Ok(step) = solve_dense(jac, rhs) else {
            break;
        };
        let next = TriangleDistances::from_array([v[0] + step[0], v[1] + step[1], v[2] + step[2]]);
        let next_worst = worst(&next);
        if !(next_worst < current) {
            break;
        }
        x = next;
        current = next_worst;
    }
    x
}

/// Three points over four frames: the differences of frames 2–4 against
/// frame 1 form a `3×3` linear system.
pub fn solve_p3f4(frames: &[TriangleDistances; 4], tol: Tolerance) -> Result<RecoveryResult<TriangleDistances>> {
    let scale_sq = observation_scale_sq(frames.iter().flat_map(|f| [&f.a_sq, &f.b_sq, &f.c_sq]))?;
    let norm = frames.map(|f| f.scaled(1.0 / scale_sq));
    let base = QuadCoeffs3::from_frame(&norm[0]);

    let mut m = [[0.0; 3]; 3];
    let mut rhs = [0.0; 3];
    for (row, frame) in norm[1..].iter().enumerate() {
        let d = QuadCoeffs3::from_frame(frame).minus(&base);
        m[row] = d.linear();
        rhs[row] = -d.constant;
    }
    let x = solve_dense(m, rhs)?;

    let lengths = TriangleDistances::from_array(x).scaled(scale_sq);
    let residuals = triangle_residuals(&lengths, frames, scale_sq);
    let frame_values: Vec<Vec<f64>> = frames.iter().map(|f| f.to_array().to_vec()).collect();
    Ok(RecoveryResult {
        candidates: vec![build_candidate(lengths, &frame_values, residuals, tol)],
        measurement_inconsistent: false,
    })
}

/// Unknown indices (into `a,b,c,d,f,g`) of the three faces through `T`.
const TETRA_FACES: [[usize; 3]; 3] = [[0, 5, 4], [3, 1, 5], [3, 4, 2]];

fn face(v: &[f64; 6], idx: [usize; 3]) -> TriangleDistances {
    TriangleDistances::new(v[idx[0]], v[idx[1]], v[idx[2]])
}

/// Four points over three frames: the faces `PQT`, `QRT` and `PRT`
/// differenced against frame 1 give six linear equations in the six squared
/// lengths.
pub fn solve_p4f3(frames: &[TetraDistances; 3], tol: Tolerance) -> Result<RecoveryResult<TetraDistances>> {
    let scale_sq = observation_scale_sq(frames.iter().flat_map(|f| {
        [&f.a_sq, &f.b_sq, &f.c_sq, &f.d_sq, &f.f_sq, &f.g_sq]
    }))?;
    let norm = frames.map(|f| f.scaled(1.0 / scale_sq).to_array());

    let mut m = [[0.0; 6]; 6];
    let mut rhs = [0.0; 6];
    let mut row = 0;
    for frame in &norm[1..] {
        for idx in TETRA_FACES {
            let d = QuadCoeffs3::from_frame(&face(frame, idx))
                .minus(&QuadCoeffs3::from_frame(&face(&norm[0], idx)));
            for (k, &col) in idx.iter().enumerate() {
                m[row][col] += d.linear()[k];
            }
            rhs[row] = -d.constant;
            row += 1;
        }
    }
    let x = solve_dense(m, rhs)?;

    let lengths = TetraDistances::from_array(x).scaled(scale_sq);
    let s4 = scale_sq * scale_sq;
    let residuals = frames
        .iter()
        .map(|f| {
            lengths
                .faces()
                .iter()
                .zip(f.faces().iter())
                .map(|(l, p)| eq1_residual(l, p) / s4)
                .fold(0.0, |acc: f64, r| if r.abs() > acc.abs() { r } else { acc })
        })
        .collect();
    let frame_values: Vec<Vec<f64>> = frames.iter().map(|f| f.to_array().to_vec()).collect();
    Ok(RecoveryResult {
        candidates: vec![build_candidate(lengths, &frame_values, residuals, tol)],
        measurement_inconsistent: false,
    })
}
