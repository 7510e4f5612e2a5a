//! Two frames: correspondence, rigidity and the structure ambiguity.
//!
//! Two orthographic frames never pin down the 3D structure of a rigid
//! body, whatever the number of points. They do constrain where further
//! points may appear: three points fix, for every other point, a line in
//! the second frame on which its image must lie. The distance from that
//! line is the residual used to test assignments and rigidity.

mod ambiguity;
mod bofc;
mod five_point;
mod matching;
mod reconstruct;

use nalgebra::Vector2;

pub use ambiguity::{
    ambiguity_family, interpretation_from_frames, interpretation_from_scene,
    max_displacement, reprojection_residuals, AmbiguityMember, AmbiguitySample, Interpretation,
};
pub use bofc::{b_of_c_coeffs, solve_b_given_c, BofCCoeffs};
pub use five_point::residual_5pt;
pub use matching::{
    collinearity_residual_4pt, collinearity_residual_points, match_points, rank_assignments,
    rigidity_score, rigidity_score_points, Assignment, MatchReport, RigidityThreshold,
    ScoredAssignment,
};
pub use reconstruct::{
    default_c_sq, triad_models, triad_models_scanning, TriadModel, C_SCAN_FACTOR, C_SCAN_STEPS,
    C_START_FACTOR,
};

/// Image line through two points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Line2 {
    pub origin: Vector2<f64>,
    pub direction: Vector2<f64>,
}

impl Line2 {
    pub fn through(a: Vector2<f64>, b: Vector2<f64>) -> Self {
        Self {
            origin: a,
            direction: b - a,
        }
    }

    /// Position of the orthogonal foot of `p`, in units of `direction`.
    pub fn parameter_of(&self, p: Vector2<f64>) -> f64 {
        let dd = self.direction.norm_squared();
        if dd == 0.0 {
            0.0
        } else {
            (p - self.origin).dot(&self.direction) / dd
        }
    }

    /// Distance from `p`; for a collapsed line, the distance to its point.
    pub fn distance(&self, p: Vector2<f64>) -> f64 {
        let rel = p - self.origin;
        let len = self.direction.norm();
        if len == 0.0 {
            rel.norm()
        } else {
            (self.direction.x * rel.y - self.direction.y * rel.x).abs() / len
        }
    }

    pub fn is_degenerate(&self, scale: f64) -> bool {
        !(self.direction.norm() > 1e-9 * scale)
    }
}
