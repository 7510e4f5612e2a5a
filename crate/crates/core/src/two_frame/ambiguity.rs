//! The one-parameter family of rigid bodies that produce the same two
//! frames.
//!
//! Every plane orthogonal to `n = ẑ × v₂` (with `v₂` the second viewing
//! direction) contains whole rays of both frames. Rotating the body about
//! an axis along `n` through `P` keeps each such plane in place and
//! rotates the second bundle of rays inside it. Intersecting the rotated
//! rays with the unchanged first-frame rays gives a new body which, after
//! the correspondingly rotated motion, has the same second image.

use nalgebra::{Matrix3, Rotation3, Unit, Vector2, Vector3};

use crate::error::{Error, Result};
use crate::geometry::{project, FrameObservation, Point3, RigidMotion, Tolerance};
use crate::scene_sim::Scene;

use super::reconstruct::triad_models_scanning;

/// A 3D body in first-frame coordinates plus the motion to the second
/// frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Interpretation {
    pub points: Vec<(String, Point3)>,
    pub motion: RigidMotion,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AmbiguityMember {
    /// Rotation about `n`, radians.
    pub angle: f64,
    pub points: Vec<(String, Point3)>,
    pub motion: RigidMotion,
}

impl AmbiguityMember {
    pub fn interpretation(&self) -> Interpretation {
        Interpretation {
            points: self.points.clone(),
            motion: self.motion,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AmbiguitySample {
    Member(AmbiguityMember),
    /// The rotated second-frame rays are parallel to the first-frame rays.
    Skipped { angle: f64 },
}

impl AmbiguitySample {
    pub fn angle(&self) -> f64 {
        match self {
            AmbiguitySample::Member(m) => m.angle,
            AmbiguitySample::Skipped { angle } => *angle,
        }
    }

    pub fn member(&self) -> Option<&AmbiguityMember> {
        match self {
            AmbiguitySample::Member(m) => Some(m),
            AmbiguitySample::Skipped { .. } => None,
        }
    }
}

/// Largest image distance between `points` (after the identity and after
/// `motion`) and the two frames.
pub fn reprojection_residuals(
    frames: [&FrameObservation; 2],
    points: &[(String, Point3)],
    motion: &RigidMotion,
) -> Result<[f64; 2]> {
    let mut out = [0.0_f64; 2];
    for (l, p) in points {
        let d1 = project(*p).sq_dist(&frames[0].require(l)?).sqrt();
        let d2 = project(motion.apply(*p)).sq_dist(&frames[1].require(l)?).sqrt();
        out[0] = out[0].max(d1);
        out[1] = out[1].max(d2);
    }
    Ok(out)
}

/// Largest distance between same-labeled points.
pub fn max_displacement(a: &[(String, Point3)], b: &[(String, Point3)]) -> f64 {
    a.iter()
        .filter_map(|(l, p)| {
            b.iter()
                .find(|(m, _)| m == l)
                .map(|(_, q)| p.sq_dist(q).sqrt())
        })
        .fold(0.0, f64::max)
}

fn frames_scale(frames: [&FrameObservation; 2]) -> f64 {
    frames[0].diameter().max(frames[1].diameter())
}

/// Members of the family at each angle. The axis passes through the first
/// point of `base`.
pub fn ambiguity_family(
    frames: [&FrameObservation; 2],
    base: &Interpretation,
    angles: &[f64],
    tol: Tolerance,
) -> Result<Vec<AmbiguitySample>> {
    if base.points.is_empty() {
        return Err(Error::InvalidInput("empty interpretation".into()));
    }
    let scale = frames_scale(frames);
    let limit = tol.length(scale);
    let [r1, r2] = reprojection_residuals(frames, &base.points, &base.motion)?;
    if !(r1.max(r2) <= limit) {
        return Err(Error::InvalidInput(format!(
            "base interpretation is off the frames by {:.3e}",
            r1.max(r2)
        )));
    }

    let v2 = base.motion.viewing_direction();
    let n = Vector3::z().cross(&v2);
    if !(n.norm() > 1e-9) {
        return Err(Error::DegenerateMotion);
    }
    let axis = Unit::new_normalize(n);
    let pivot = base.points[0].1.to_vector();
    let r = *base.motion.rotation();
    let t = *base.motion.translation();

    let mut out = Vec::with_capacity(angles.len());
    for &angle in angles {
        let rot = Rotation3::from_axis_angle(&axis, angle);
        let w = rot * v2;
        let wxy = w.xy();
        if !(wxy.norm() > 1e-9) {
            out.push(AmbiguitySample::Skipped { angle });
            continue;
        }
        let points = base
            .points
            .iter()
            .map(|(l, x)| {
                let x = x.to_vector();
                let a = pivot + rot * (x - pivot);
                let mu = (x.xy() - a.xy()).dot(&wxy) / wxy.norm_squared();
                (l.clone(), Point3::new(x.x, x.y, a.z + mu * w.z))
            })
            .collect();
        let rotation: Matrix3<f64> = r * rot.matrix().transpose();
        let translation: Vector2<f64> = t + (r * pivot).xy() - (rotation * pivot).xy();
        let motion = RigidMotion::new(rotation, translation).or_else(|_| {
            // re-orthonormalize accumulated rounding
            let q = Rotation3::from_matrix(&rotation);
            RigidMotion::new(*q.matrix(), translation)
        })?;
        out.push(AmbiguitySample::Member(AmbiguityMember {
            angle,
            points,
            motion,
        }));
    }
    Ok(out)
}

/// The ground truth of frames 0 and 1, in frame-0 coordinates.
pub fn interpretation_from_scene(scene: &Scene) -> Result<Interpretation> {
    if scene.motions.len() < 2 {
        return Err(Error::InvalidInput("scene has fewer than two frames".into()));
    }
    let (m0, m1) = (&scene.motions[0], &scene.motions[1]);
    let rotation = m1.rotation() * m0.rotation().transpose();
    let t0 = Vector3::new(m0.translation().x, m0.translation().y, 0.0);
    let translation = m1.translation() - (rotation * t0).xy();
    let motion = RigidMotion::new(rotation, translation)
        .or_else(|_| RigidMotion::new(*Rotation3::from_matrix(&rotation).matrix(), translation))?;
    let points = scene
        .labels()
        .into_iter()
        .map(String::from)
        .zip(scene.posed(0))
        .collect();
    Ok(Interpretation { points, motion })
}

/// One interpretation reconstructed from the frames alone. The first three
/// labels of the first frame serve as `P, Q, R`; among the candidate
/// triangles, the one that reprojects best onto both frames wins.
pub fn interpretation_from_frames(frames: [&FrameObservation; 2], tol: Tolerance) -> Result<Interpretation> {
    let labels: Vec<&str> = frames[0].labels().collect();
    if labels.len() < 3 {
        return Err(Error::InvalidInput("need at least 3 points".into()));
    }
    let mut pairs = Vec::with_capacity(labels.len());
    for l in &labels {
        pairs.push((frames[0].require(l)?, frames[1].require(l)?));
    }
    let img1 = [pairs[0].0, pairs[1].0, pairs[2].0];
    let img2 = [pairs[0].1, pairs[1].1, pairs[2].1];
    let (models, _) = triad_models_scanning(img1, img2, tol)?;

    let mut best: Option<(f64, Interpretation)> = None;
    for model in &models {
        let Ok(motion) = model.motion() else { continue };
        let mut points = Vec::with_capacity(labels.len());
        for (k, l) in labels.iter().enumerate() {
            let p = if k < 3 {
                model.frame1[k]
            } else {
                model.lift_point(pairs[k].0, pairs[k].1)?
            };
            points.push((l.to_string(), p));
        }
        let [r1, r2] = reprojection_residuals(frames, &points, &motion)?;
        let worst = r1.max(r2);
        if best.as_ref().is_none_or(|(b, _)| worst < *b) {
            best = Some((worst, Interpretation { points, motion }));
        }
    }
    best.map(|(_, i)| i).ok_or(Error::DegenerateBasis)
}
