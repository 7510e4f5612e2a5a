//! Rigidity of five points in two frames without choosing any length.
//!
//! A fifth point `S` is written in the image of frame 1 twice: as an affine
//! combination over the basis `T; P, Q` and over `R; P, Q`. Carrying each
//! combination over to frame 2 gives two points. For a rigid body the true
//! image of `S` lies on the line through them, since both are images of
//! points on the projection ray of `S` in frame 1.

use nalgebra::{Matrix2, Vector2};

use crate::error::{Error, Result};
use crate::geometry::FrameObservation;

use super::Line2;

fn affine_coords(origin: Vector2<f64>, u: Vector2<f64>, v: Vector2<f64>, s: Vector2<f64>) -> Result<Vector2<f64>> {
    let m = Matrix2::from_columns(&[u - origin, v - origin]);
    let size = (u - origin).norm() * (v - origin).norm();
    if !(m.determinant().abs() > 1e-10 * size) {
        return Err(Error::DegenerateBasis);
    }
    let inv = m.try_inverse().ok_or(Error::DegenerateBasis)?;
    Ok(inv * (s - origin))
}

/// Distance of `S` in frame 2 from the line predicted by `P, Q, R, T`;
/// `labels` is `[P, Q, R, T, S]`. Purely linear.
pub fn residual_5pt(frames: [&FrameObservation; 2], labels: [&str; 5]) -> Result<f64> {
    let get = |f: &FrameObservation| -> Result<[Vector2<f64>; 5]> {
        let mut out = [Vector2::zeros(); 5];
        for (o, l) in out.iter_mut().zip(labels) {
            *o = f.require(l)?.to_vector();
        }
        Ok(out)
    };
    let [p1, q1, r1, t1, s1] = get(frames[0])?;
    let [p2, q2, r2, t2, s2] = get(frames[1])?;

    let ab = affine_coords(t1, p1, q1, s1)?;
    let gd = affine_coords(r1, p1, q1, s1)?;
    let s2a = t2 + (p2 - t2) * ab.x + (q2 - t2) * ab.y;
    let s2b = r2 + (p2 - r2) * gd.x + (q2 - r2) * gd.y;

    let line = Line2::through(s2a, s2b);
    let scale = frames[0].diameter().max(frames[1].diameter());
    if line.is_degenerate(scale) {
        return Err(Error::DegenerateLine {
            point_distance: (s2 - s2a).norm(),
        });
    }
    Ok(line.distance(s2))
}
