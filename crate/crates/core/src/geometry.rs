//! Value types, orthographic projection and rigid motion.
//!
//! Everything here works on squared lengths; square roots are only taken
//! where depth offsets are produced. Edge order is fixed throughout the
//! crate: `PQ, QR, RP` for triangles and `PQ, QR, RP, TR, TP, TQ` for
//! tetrahedra.

use nalgebra::{Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance, scaled by the observation diameter to the power
/// matching the quantity being compared.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    pub rel: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self { rel: 1e-9 }
    }
}

impl Tolerance {
    pub const fn new(rel: f64) -> Self {
        Self { rel }
    }

    pub fn length(&self, scale: f64) -> f64 {
        self.rel * scale
    }

    pub fn squared(&self, scale: f64) -> f64 {
        self.rel * scale * scale
    }

    pub fn quartic(&self, scale: f64) -> f64 {
        let s2 = scale * scale;
        self.rel * s2 * s2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn to_vector(self) -> Vector2<f64> {
        Vector2::new(self.x, self.y)
    }

    pub fn from_vector(v: &Vector2<f64>) -> Self {
        Self::new(v.x, v.y)
    }

    pub fn sq_dist(&self, other: &Point2) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// A scene point; `z` is depth, orthogonal to the image plane.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn to_vector(self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    pub fn from_vector(v: &Vector3<f64>) -> Self {
        Self::new(v.x, v.y, v.z)
    }

    pub fn sq_dist(&self, other: &Point3) -> f64 {
        (self.to_vector() - other.to_vector()).norm_squared()
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

/// Orthographic projection: depth is dropped.
pub fn project(p: Point3) -> Point2 {
    Point2::new(p.x, p.y)
}

/// Rotation plus an in-plane translation. A translation along the depth
/// axis has no effect on the image, so it is not represented.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidMotion {
    rotation: Matrix3<f64>,
    translation: Vector2<f64>,
}

const ROTATION_TOL: f64 = 1e-12;

impl RigidMotion {
    pub fn new(rotation: Matrix3<f64>, translation: Vector2<f64>) -> Result<Self> {
        if !rotation.iter().chain(translation.iter()).all(|v| v.is_finite()) {
            return Err(Error::InvalidMotion("non-finite entries".into()));
        }
        let gram_defect = (rotation.transpose() * rotation - Matrix3::identity()).amax();
        if gram_defect > ROTATION_TOL {
            return Err(Error::InvalidMotion(format!(
                "rotation is not orthonormal (defect {gram_defect:.3e})"
            )));
        }
        let det = rotation.determinant();
        if (det - 1.0).abs() > ROTATION_TOL {
            return Err(Error::InvalidMotion(format!("determinant {det} is not +1")));
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector2::zeros(),
        }
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector2<f64> {
        &self.translation
    }

    /// Direction of this frame's projection rays, expressed in the
    /// coordinates the motion is applied to.
    pub fn viewing_direction(&self) -> Vector3<f64> {
        self.rotation.row(2).transpose()
    }

    pub fn apply(&self, p: Point3) -> Point3 {
        apply_motion(self, p)
    }
}

/// `rotation * p + (tx, ty, 0)`.
pub fn apply_motion(m: &RigidMotion, p: Point3) -> Point3 {
    let v = m.rotation * p.to_vector();
    Point3::new(
        v.x + m.translation.x,
        v.y + m.translation.y,
        v.z,
    )
}

/// Labeled 2D projections of the traced points in a single frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameObservation {
    points: Vec<(String, Point2)>,
}

impl FrameObservation {
    pub fn new(points: Vec<(String, Point2)>) -> Result<Self> {
        if points.len() < 3 {
            return Err(Error::InvalidInput(format!(
                "a frame needs at least 3 points, got {}",
                points.len()
            )));
        }
        for (i, (label, p)) in points.iter().enumerate() {
            if !p.is_finite() {
                return Err(Error::InvalidInput(format!("point `{label}` is not finite")));
            }
            if points[..i].iter().any(|(l, _)| l == label) {
                return Err(Error::DuplicateLabel(label.clone()));
            }
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[(String, Point2)] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.points.iter().map(|(l, _)| l.as_str())
    }

    pub fn get(&self, label: &str) -> Option<Point2> {
        self.points.iter().find(|(l, _)| l == label).map(|(_, p)| *p)
    }

    pub fn require(&self, label: &str) -> Result<Point2> {
        self.get(label)
            .ok_or_else(|| Error::MissingLabel(label.to_string()))
    }

    pub fn position(&self, label: &str) -> Option<usize> {
        self.points.iter().position(|(l, _)| l == label)
    }

    /// Largest distance between two points of the frame.
    pub fn diameter(&self) -> f64 {
        let mut best = 0.0_f64;
        for (i, (_, a)) in self.points.iter().enumerate() {
            for (_, b) in &self.points[i + 1..] {
                best = best.max(a.sq_dist(b));
            }
        }
        best.sqrt()
    }
}

/// Squared lengths of a three-point body, `a = |PQ|`, `b = |QR|`, `c = |RP|`.
///
/// Also used for the projected lengths within a frame. Solver candidates
/// may violate the invariants checked by [`TriangleDistances::is_valid`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TriangleDistances {
    pub a_sq: f64,
    pub b_sq: f64,
    pub c_sq: f64,
}

impl TriangleDistances {
    pub const fn new(a_sq: f64, b_sq: f64, c_sq: f64) -> Self {
        Self { a_sq, b_sq, c_sq }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.a_sq, self.b_sq, self.c_sq]
    }

    pub fn from_array(v: [f64; 3]) -> Self {
        Self::new(v[0], v[1], v[2])
    }

    pub fn max_sq(&self) -> f64 {
        self.a_sq.max(self.b_sq).max(self.c_sq)
    }

    /// Positive lengths satisfying the triangle inequality.
    pub fn is_valid(&self) -> bool {
        let [a, b, c] = self.to_array();
        if !(a > 0.0 && b > 0.0 && c > 0.0) {
            return false;
        }
        let (a, b, c) = (a.sqrt(), b.sqrt(), c.sqrt());
        a <= b + c && b <= a + c && c <= a + b
    }

    pub fn scaled(self, factor: f64) -> Self {
        Self::new(self.a_sq * factor, self.b_sq * factor, self.c_sq * factor)
    }
}

/// Squared lengths of a four-point body in `PQ, QR, RP, TR, TP, TQ` order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TetraDistances {
    pub a_sq: f64,
    pub b_sq: f64,
    pub c_sq: f64,
    pub d_sq: f64,
    pub f_sq: f64,
    pub g_sq: f64,
}

impl TetraDistances {
    pub fn to_array(self) -> [f64; 6] {
        [self.a_sq, self.b_sq, self.c_sq, self.d_sq, self.f_sq, self.g_sq]
    }

    pub fn from_array(v: [f64; 6]) -> Self {
        Self {
            a_sq: v[0],
            b_sq: v[1],
            c_sq: v[2],
            d_sq: v[3],
            f_sq: v[4],
            g_sq: v[5],
        }
    }

    pub fn max_sq(&self) -> f64 {
        self.to_array().into_iter().fold(0.0, f64::max)
    }

    /// The four faces as triangles: `PQR`, `PQT (a,g,f)`, `QRT (d,b,g)`,
    /// `PRT (d,f,c)`.
    pub fn faces(&self) -> [TriangleDistances; 4] {
        [
            TriangleDistances::new(self.a_sq, self.b_sq, self.c_sq),
            TriangleDistances::new(self.a_sq, self.g_sq, self.f_sq),
            TriangleDistances::new(self.d_sq, self.b_sq, self.g_sq),
            TriangleDistances::new(self.d_sq, self.f_sq, self.c_sq),
        ]
    }

    /// Cayley–Menger determinant of the four points (`288 V²`).
    pub fn cayley_menger(&self) -> f64 {
        // point order P, Q, R, T
        let [a, b, c, d, f, g] = self.to_array();
        let m = nalgebra::Matrix5::new(
            0.0, 1.0, 1.0, 1.0, 1.0, //
            1.0, 0.0, a, c, f, //
            1.0, a, 0.0, b, g, //
            1.0, c, b, 0.0, d, //
            1.0, f, g, d, 0.0,
        );
        m.determinant()
    }

    /// Positive lengths, valid faces and a non-negative Cayley–Menger
    /// determinant (within `tol` relative to the largest edge).
    pub fn is_valid(&self, tol: Tolerance) -> bool {
        let s2 = self.max_sq();
        self.faces().iter().all(TriangleDistances::is_valid)
            && self.cayley_menger() >= -tol.rel * s2 * s2 * s2
    }

    pub fn scaled(self, factor: f64) -> Self {
        Self::from_array(self.to_array().map(|v| v * factor))
    }
}

/// Squared distances between the labeled points of one frame.
///
/// Three labels give `PQ, QR, RP`; four give `PQ, QR, RP, TR, TP, TQ`.
pub fn projected_sq_distances(frame: &FrameObservation, labels: &[&str]) -> Result<Vec<f64>> {
    let pts = labels
        .iter()
        .map(|l| frame.require(l))
        .collect::<Result<Vec<_>>>()?;
    let edges: &[(usize, usize)] = match pts.len() {
        3 => &[(0, 1), (1, 2), (2, 0)],
        4 => &[(0, 1), (1, 2), (2, 0), (3, 2), (3, 0), (3, 1)],
        n => {
            return Err(Error::InvalidInput(format!(
                "edge ordering is defined for 3 or 4 labels, got {n}"
            )))
        }
    };
    Ok(edges.iter().map(|&(i, j)| pts[i].sq_dist(&pts[j])).collect())
}

pub fn triangle_projection(frame: &FrameObservation, labels: [&str; 3]) -> Result<TriangleDistances> {
    let v = projected_sq_distances(frame, &labels)?;
    Ok(TriangleDistances::new(v[0], v[1], v[2]))
}

pub fn tetra_projection(frame: &FrameObservation, labels: [&str; 4]) -> Result<TetraDistances> {
    let v = projected_sq_distances(frame, &labels)?;
    Ok(TetraDistances::from_array([v[0], v[1], v[2], v[3], v[4], v[5]]))
}

/// Squared lengths `PQ, QR, RP` of three points given directly.
pub fn triangle_of(p: Point2, q: Point2, r: Point2) -> TriangleDistances {
    TriangleDistances::new(p.sq_dist(&q), q.sq_dist(&r), r.sq_dist(&p))
}

/// Unknowns versus measurements for `p` points over `k` frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DofBalance {
    pub unknowns: i64,
    pub information: i64,
    pub recoverable: bool,
}

/// Each point contributes three unknowns in the first frame, less one for
/// the unobservable initial depth; each further frame adds a five-parameter
/// motion. Every observed point yields two coordinates per frame.
pub fn dof_balance(points: u32, frames: u32) -> DofBalance {
    let p = i64::from(points);
    let k = i64::from(frames);
    let unknowns = -1 + 3 * p + 5 * (k - 1);
    let information = 2 * k * p;
    DofBalance {
        unknowns,
        information,
        recoverable: unknowns <= information,
    }
}

/// Depth differences across the edges of a triangle: `pq = z_Q - z_P`,
/// `qr = z_R - z_Q`, `rp = z_P - z_R`. They always sum to zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepthOffsets {
    pub pq: f64,
    pub qr: f64,
    pub rp: f64,
}

impl DepthOffsets {
    pub fn negated(self) -> Self {
        Self {
            pq: -self.pq,
            qr: -self.qr,
            rp: -self.rp,
        }
    }

    /// Depths of `P, Q, R` with `P` at zero.
    pub fn depths(&self) -> [f64; 3] {
        [0.0, self.pq, self.pq + self.qr]
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.pq, self.qr, self.rp]
    }
}

/// Recovers the depth differences of a triangle whose true squared lengths
/// are known, for one frame. Both mirror branches are returned.
///
/// The magnitudes follow from `|dz|² = l² - l_i²`. Because the three
/// differences sum to zero, the largest magnitude equals the sum of the
/// other two; the smallest one is then taken from that closure so that the
/// square-root amplification of rounding on near-parallel edges does not
/// leak into the result.
pub fn embed_depths(
    true_sq: &TriangleDistances,
    frame_sq: &TriangleDistances,
    tol: Tolerance,
) -> Result<[DepthOffsets; 2]> {
    let scale_sq = true_sq.max_sq().max(frame_sq.max_sq());
    let neg_slack = tol.rel * scale_sq;
    let closure_tol = tol.rel.sqrt() * scale_sq.sqrt();

    let truth = true_sq.to_array();
    let proj = frame_sq.to_array();
    let mut mag = [0.0; 3];
    for i in 0..3 {
        let gap = truth[i] - proj[i];
        if !gap.is_finite() || gap < -neg_slack {
            return Err(Error::InconsistentLengths {
                defect: (-gap).max(0.0).sqrt(),
            });
        }
        mag[i] = gap.max(0.0).sqrt();
    }

    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| mag[j].total_cmp(&mag[i]));
    let [big, mid, small] = order;
    let defect = (mag[big] - mag[mid] - mag[small]).abs();
    if defect > closure_tol {
        return Err(Error::InconsistentLengths { defect });
    }

    let mut dz = [0.0; 3];
    dz[big] = -mag[big];
    dz[mid] = mag[mid];
    dz[small] = mag[big] - mag[mid];
    let first = DepthOffsets {
        pq: dz[0],
        qr: dz[1],
        rp: dz[2],
    };
    Ok([first, first.negated()])
}
