//! Rigid interpretations of a triangle `P, Q, R` seen in two frames, and
//! the line on which a fourth point must appear in the second frame.

use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};

use crate::error::{Error, Result};
use crate::geometry::{
    embed_depths, triangle_of, Point2, Point3, RigidMotion, Tolerance, TriangleDistances,
};

use super::bofc::{b_of_c_coeffs, polish_pair, solve_b_given_c};
use super::Line2;

/// Growth factor and step budget of the upward `c` scan.
pub const C_SCAN_FACTOR: f64 = 1.25;
pub const C_SCAN_STEPS: usize = 40;
/// Initial `c` as a multiple of its longest projection.
pub const C_START_FACTOR: f64 = 1.5;

/// One 3D interpretation of the triangle in both frames. The basis
/// `RP, RQ, RP×RQ` is anchored at `R` in each frame.
#[derive(Debug, Clone, PartialEq)]
pub struct TriadModel {
    pub lengths: TriangleDistances,
    /// `P, Q, R` in frame-1 coordinates.
    pub frame1: [Point3; 3],
    /// `P, Q, R` in frame-2 coordinates.
    pub frame2: [Point3; 3],
    origin1: Vector3<f64>,
    basis1: Matrix3<f64>,
    origin2: Vector3<f64>,
    basis2: Matrix3<f64>,
    image_basis1: Matrix2<f64>,
}

fn lift(points: [Point2; 3], depths: [f64; 3]) -> [Point3; 3] {
    // shift so that R lies in the image plane
    let zr = depths[2];
    [0, 1, 2].map(|i| Point3::new(points[i].x, points[i].y, depths[i] - zr))
}

fn basis(pts: &[Point3; 3]) -> Result<(Vector3<f64>, Matrix3<f64>)> {
    let [p, q, r] = pts.map(Point3::to_vector);
    let e1 = p - r;
    let e2 = q - r;
    let e3 = e1.cross(&e2);
    if !(e3.norm() > 1e-10 * e1.norm() * e2.norm()) {
        return Err(Error::DegenerateBasis);
    }
    Ok((r, Matrix3::from_columns(&[e1, e2, e3])))
}

impl TriadModel {
    /// Builds the model from images of `P, Q, R` and candidate true squared
    /// lengths. `flip` mirrors the second frame's depths relative to the
    /// first.
    pub fn new(
        img1: [Point2; 3],
        img2: [Point2; 3],
        lengths: TriangleDistances,
        flip: bool,
        tol: Tolerance,
    ) -> Result<Self> {
        let proj1 = triangle_of(img1[0], img1[1], img1[2]);
        let proj2 = triangle_of(img2[0], img2[1], img2[2]);
        let [d1, _] = embed_depths(&lengths, &proj1, tol)?;
        let [d2a, d2b] = embed_depths(&lengths, &proj2, tol)?;
        let d2 = if flip { d2b } else { d2a };
        let frame1 = lift(img1, d1.depths());
        let frame2 = lift(img2, d2.depths());
        let (origin1, basis1) = basis(&frame1)?;
        let (origin2, basis2) = basis(&frame2)?;
        let image_basis1 = basis1.fixed_view::<2, 2>(0, 0).into_owned();
        let e1 = image_basis1.column(0).norm();
        let e2 = image_basis1.column(1).norm();
        if !(image_basis1.determinant().abs() > 1e-10 * e1 * e2) {
            return Err(Error::DegenerateBasis);
        }
        Ok(Self {
            lengths,
            frame1,
            frame2,
            origin1,
            basis1,
            origin2,
            basis2,
            image_basis1,
        })
    }

    /// Coordinates in the frame-1 basis of the two points where the
    /// projection ray through `t1` meets the plane `RPQ` and that plane
    /// shifted by one unit of `RP×RQ`.
    fn ray_coordinates(&self, t1: Point2) -> Result<(Vector3<f64>, Vector3<f64>)> {
        let inv = self
            .image_basis1
            .try_inverse()
            .ok_or(Error::DegenerateBasis)?;
        let rel = t1.to_vector() - self.origin1.xy();
        let on_plane = inv * rel;
        let shifted = inv * (rel - self.basis1.column(2).xy());
        Ok((
            Vector3::new(on_plane.x, on_plane.y, 0.0),
            Vector3::new(shifted.x, shifted.y, 1.0),
        ))
    }

    /// Line in the second frame that must contain the image of any rigidly
    /// attached point whose first-frame image is `t1`.
    pub fn predict_line(&self, t1: Point2) -> Result<Line2> {
        let (ta, tb) = self.ray_coordinates(t1)?;
        let a2 = (self.origin2 + self.basis2 * ta).xy();
        let b2 = (self.origin2 + self.basis2 * tb).xy();
        Ok(Line2::through(a2, b2))
    }

    /// 3D frame-1 coordinates of a point from its images in both frames,
    /// taking the position along the projection ray that best matches `t2`.
    pub fn lift_point(&self, t1: Point2, t2: Point2) -> Result<Point3> {
        let (ta, tb) = self.ray_coordinates(t1)?;
        let xa = self.origin1 + self.basis1 * ta;
        let xb = self.origin1 + self.basis1 * tb;
        let line = self.predict_line(t1)?;
        let lambda = line.parameter_of(t2.to_vector());
        Ok(Point3::from_vector(&(xa + (xb - xa) * lambda)))
    }

    /// Motion taking frame-1 coordinates to frame-2 coordinates.
    pub fn motion(&self) -> Result<RigidMotion> {
        let frame = |b: &Matrix3<f64>| {
            let u1 = b.column(0).normalize();
            let u3 = b.column(2).normalize();
            let u2 = u3.cross(&u1);
            Matrix3::from_columns(&[u1, u2, u3])
        };
        let rotation = frame(&self.basis2) * frame(&self.basis1).transpose();
        let t = self.origin2.xy() - (rotation * self.origin1).xy();
        RigidMotion::new(rotation, Vector2::new(t.x, t.y))
    }
}

/// Every feasible interpretation of the triangle at a fixed `c²`: both roots
/// for `b²`, each with both relative depth orientations.
pub fn triad_models(
    img1: [Point2; 3],
    img2: [Point2; 3],
    c_sq: f64,
    tol: Tolerance,
) -> Result<Vec<TriadModel>> {
    let proj1 = triangle_of(img1[0], img1[1], img1[2]);
    let proj2 = triangle_of(img2[0], img2[1], img2[2]);
    let coeffs = b_of_c_coeffs(&proj1, &proj2)?;
    let roots = solve_b_given_c(&coeffs, c_sq, tol)?;
    let scale_sq = proj1.max_sq().max(proj2.max_sq()).max(c_sq);
    let margin = tol.rel * scale_sq;
    let mut models = Vec::new();
    let mut last_err = None;
    for b_sq in roots {
        let a_sq = coeffs.a_sq(b_sq, c_sq);
        let lengths = polish_pair(TriangleDistances::new(a_sq, b_sq, c_sq), &proj1, &proj2);
        let feasible = lengths
            .to_array()
            .iter()
            .zip(proj1.to_array().iter().zip(proj2.to_array()))
            .all(|(&l, (&p1, p2))| l >= p1.max(p2) - margin);
        if !feasible {
            continue;
        }
        for flip in [false, true] {
            match TriadModel::new(img1, img2, lengths, flip, tol) {
                Ok(m) => models.push(m),
                Err(e) => last_err = Some(e),
            }
        }
    }
    if models.is_empty() {
        return Err(last_err.unwrap_or(Error::NoSolution {
            discriminant: coeffs.discriminant(c_sq),
        }));
    }
    Ok(models)
}

/// Starting `c²`: the longest projection of `RP` over both frames, times
/// [`C_START_FACTOR`], squared.
pub fn default_c_sq(img1: &[Point2; 3], img2: &[Point2; 3]) -> f64 {
    let c1 = img1[2].sq_dist(&img1[0]);
    let c2 = img2[2].sq_dist(&img2[0]);
    let longest = c1.max(c2);
    if longest > 0.0 {
        C_START_FACTOR * C_START_FACTOR * longest
    } else {
        let diam = triangle_of(img1[0], img1[1], img1[2])
            .max_sq()
            .max(triangle_of(img2[0], img2[1], img2[2]).max_sq());
        C_START_FACTOR * C_START_FACTOR * diam
    }
}

/// Interpretations at the first `c²` of the geometric scan that admits any.
pub fn triad_models_scanning(
    img1: [Point2; 3],
    img2: [Point2; 3],
    tol: Tolerance,
) -> Result<(Vec<TriadModel>, f64)> {
    let mut c_sq = default_c_sq(&img1, &img2);
    let mut last = None;
    for _ in 0..=C_SCAN_STEPS {
        match triad_models(img1, img2, c_sq, tol) {
            Ok(models) => return Ok((models, c_sq)),
            Err(e @ (Error::NoSolution { .. } | Error::InconsistentLengths { .. })) => last = Some(e),
            Err(e) => return Err(e),
        }
        c_sq *= C_SCAN_FACTOR * C_SCAN_FACTOR;
    }
    Err(last.unwrap_or(Error::NoSolution {
        discriminant: f64::NAN,
    }))
}
