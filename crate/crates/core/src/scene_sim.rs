//! Ground-truth scenes: random rigid bodies, random motions, orthographic
//! rendering and coordinate noise.
//!
//! Every generator is a pure function of its seed. Monte-Carlo drivers
//! derive per-trial seeds with [`derive_seed`], so a parallel run produces
//! the same numbers as a serial one.

use std::f64::consts::PI;

use nalgebra::{Quaternion, Rotation3, UnitQuaternion, Vector2, Vector3};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{project, FrameObservation, Point2, Point3, RigidMotion, TriangleDistances};

/// Bodies failing these margins are redrawn.
pub const MIN_POINT_SEPARATION: f64 = 0.05;
/// Triangle area over squared longest edge.
pub const MIN_TRIANGLE_SHAPE: f64 = 0.05;
/// Tetrahedron volume over cubed longest edge.
pub const MIN_TETRA_SHAPE: f64 = 0.01;
/// Projected triangle area over squared longest projected edge.
pub const MIN_PROJECTED_SHAPE: f64 = 0.02;
/// Minimum rotation angle and viewing-direction tilt of an accepted motion.
pub const MIN_MOTION_ANGLE: f64 = 0.1;

const MAX_DRAWS: usize = 1000;
/// Draws per point before a body is restarted.
pub const POINT_DRAWS: usize = 100;

/// SplitMix64 finaliser over `(base, stream, index)`.
pub fn derive_seed(base: u64, stream: u64, index: u64) -> u64 {
    let mut z = base
        ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ index.wrapping_add(1).wrapping_mul(0xD1B5_4A32_D192_ED03);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `P, Q, R, T, S`, then `X6, X7, …`.
pub fn point_labels(n: usize) -> Vec<String> {
    const NAMED: [&str; 5] = ["P", "Q", "R", "T", "S"];
    (0..n)
        .map(|i| match NAMED.get(i) {
            Some(l) => (*l).to_string(),
            None => format!("X{}", i + 1),
        })
        .collect()
}

/// Ground-truth body plus one motion per frame; the first motion is the
/// identity.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub body: Vec<(String, Point3)>,
    pub motions: Vec<RigidMotion>,
    pub seed: u64,
}

impl Scene {
    pub fn new(body: Vec<(String, Point3)>, motions: Vec<RigidMotion>, seed: u64) -> Result<Self> {
        if body.len() < 3 {
            return Err(Error::InvalidInput("a scene needs at least 3 points".into()));
        }
        for (i, (l, p)) in body.iter().enumerate() {
            if !p.is_finite() {
                return Err(Error::InvalidInput(format!("point `{l}` is not finite")));
            }
            if body[..i].iter().any(|(m, _)| m == l) {
                return Err(Error::DuplicateLabel(l.clone()));
            }
        }
        let pts: Vec<Point3> = body.iter().map(|(_, p)| *p).collect();
        if max_triangle_shape(&pts) <= 0.0 {
            return Err(Error::InvalidInput("body points are collinear".into()));
        }
        if motions.is_empty() {
            return Err(Error::InvalidInput("a scene needs at least one motion".into()));
        }
        Ok(Self { body, motions, seed })
    }

    pub fn labels(&self) -> Vec<&str> {
        self.body.iter().map(|(l, _)| l.as_str()).collect()
    }

    pub fn points(&self) -> Vec<Point3> {
        self.body.iter().map(|(_, p)| *p).collect()
    }

    /// Body coordinates after the motion of frame `j`.
    pub fn posed(&self, j: usize) -> Vec<Point3> {
        self.body.iter().map(|(_, p)| self.motions[j].apply(*p)).collect()
    }

    /// True squared lengths of the first three points.
    pub fn triangle(&self) -> TriangleDistances {
        let p = self.points();
        TriangleDistances::new(p[0].sq_dist(&p[1]), p[1].sq_dist(&p[2]), p[2].sq_dist(&p[0]))
    }

    /// True squared lengths of the first four points in `PQ, QR, RP, TR, TP, TQ` order.
    pub fn tetra(&self) -> crate::geometry::TetraDistances {
        let p = self.points();
        crate::geometry::TetraDistances::from_array([
            p[0].sq_dist(&p[1]),
            p[1].sq_dist(&p[2]),
            p[2].sq_dist(&p[0]),
            p[3].sq_dist(&p[2]),
            p[3].sq_dist(&p[0]),
            p[3].sq_dist(&p[1]),
        ])
    }
}

fn triangle_shape(a: &Vector3<f64>, b: &Vector3<f64>, c: &Vector3<f64>) -> f64 {
    let area = 0.5 * (b - a).cross(&(c - a)).norm();
    let longest = (b - a)
        .norm_squared()
        .max((c - b).norm_squared())
        .max((a - c).norm_squared());
    if longest == 0.0 {
        0.0
    } else {
        area / longest
    }
}

fn tetra_shape(a: &Vector3<f64>, b: &Vector3<f64>, c: &Vector3<f64>, d: &Vector3<f64>) -> f64 {
    let vol = (b - a).cross(&(c - a)).dot(&(d - a)).abs() / 6.0;
    let pts = [a, b, c, d];
    let mut longest = 0.0_f64;
    for i in 0..4 {
        for j in i + 1..4 {
            longest = longest.max((pts[i] - pts[j]).norm());
        }
    }
    if longest == 0.0 {
        0.0
    } else {
        vol / longest.powi(3)
    }
}

fn max_triangle_shape(pts: &[Point3]) -> f64 {
    let v: Vec<_> = pts.iter().map(|p| p.to_vector()).collect();
    let mut best = 0.0_f64;
    for i in 0..v.len() {
        for j in i + 1..v.len() {
            for k in j + 1..v.len() {
                best = best.max(triangle_shape(&v[i], &v[j], &v[k]));
            }
        }
    }
    best
}

/// Every pair separated, every triple well shaped and, for four or more
/// points, every quadruple well spread in volume.
pub fn body_is_generic(pts: &[Point3]) -> bool {
    let v: Vec<_> = pts.iter().map(|p| p.to_vector()).collect();
    let n = v.len();
    for i in 0..n {
        for j in i + 1..n {
            if (v[i] - v[j]).norm() < MIN_POINT_SEPARATION {
                return false;
            }
            for k in j + 1..n {
                if triangle_shape(&v[i], &v[j], &v[k]) < MIN_TRIANGLE_SHAPE {
                    return false;
                }
                for l in k + 1..n {
                    if tetra_shape(&v[i], &v[j], &v[k], &v[l]) < MIN_TETRA_SHAPE {
                        return false;
                    }
                }
            }
        }
    }
    true
}

/// Every projected triple well shaped.
pub fn frame_is_generic(points: &[Point2]) -> bool {
    let v: Vec<_> = points.iter().map(|p| Vector3::new(p.x, p.y, 0.0)).collect();
    let n = v.len();
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                if triangle_shape(&v[i], &v[j], &v[k]) < MIN_PROJECTED_SHAPE {
                    return false;
                }
            }
        }
    }
    true
}

/// Builds a body one point at a time, redrawing each new point until the
/// partial body passes [`body_is_generic`]. A point that cannot be placed
/// within [`POINT_DRAWS`] draws restarts the body. Returns the body and
/// the total number of draws.
pub fn gen_body_from(n: usize, mut draw: impl FnMut() -> Point3) -> Result<(Vec<(String, Point3)>, usize)> {
    if n < 3 {
        return Err(Error::InvalidInput(format!("a body needs at least 3 points, got {n}")));
    }
    let mut draws = 0;
    for _ in 0..MAX_DRAWS {
        let mut pts: Vec<Point3> = Vec::with_capacity(n);
        'grow: while pts.len() < n {
            for _ in 0..POINT_DRAWS {
                draws += 1;
                pts.push(draw());
                if body_is_generic(&pts) {
                    continue 'grow;
                }
                pts.pop();
            }
            break;
        }
        if pts.len() == n {
            return Ok((point_labels(n).into_iter().zip(pts).collect(), draws));
        }
    }
    Err(Error::InvalidInput(format!(
        "no generic {n}-point body after {draws} draws"
    )))
}

fn unit_cube_point(rng: &mut impl Rng) -> Point3 {
    Point3::new(rng.random(), rng.random(), rng.random())
}

/// `n` labeled points in the unit cube.
pub fn gen_body(n: usize, seed: u64) -> Vec<(String, Point3)> {
    let mut rng = rng_from_seed(seed);
    gen_body_from(n, || unit_cube_point(&mut rng))
        .expect("unit-cube sampling produces a generic body well within the draw limit")
        .0
}

/// Uniform rotation (Shoemake's quaternion construction).
pub fn random_rotation(rng: &mut impl Rng) -> Rotation3<f64> {
    let u1: f64 = rng.random();
    let u2: f64 = rng.random();
    let u3: f64 = rng.random();
    let (s1, s2) = ((1.0 - u1).sqrt(), u1.sqrt());
    let q = Quaternion::new(
        s2 * (2.0 * PI * u3).cos(),
        s1 * (2.0 * PI * u2).sin(),
        s1 * (2.0 * PI * u2).cos(),
        s2 * (2.0 * PI * u3).sin(),
    );
    UnitQuaternion::from_quaternion(q).to_rotation_matrix()
}

/// Rotation angle and tilt of the viewing direction, in radians.
pub fn motion_angles(m: &RigidMotion) -> (f64, f64) {
    let r = m.rotation();
    let angle = ((r.trace() - 1.0) / 2.0).clamp(-1.0, 1.0).acos();
    let tilt = r[(2, 2)].clamp(-1.0, 1.0).acos();
    (angle, tilt)
}

/// A motion is degenerate when it barely rotates, or when it leaves the
/// viewing direction (anti)parallel to the original one: the image then
/// carries no information a single frame does not.
pub fn motion_is_degenerate(m: &RigidMotion) -> bool {
    let (angle, tilt) = motion_angles(m);
    angle < MIN_MOTION_ANGLE || !(MIN_MOTION_ANGLE..=PI - MIN_MOTION_ANGLE).contains(&tilt)
}

/// Draws motions from `rng` until a non-degenerate one appears.
pub fn gen_motion_with(rng: &mut impl Rng) -> RigidMotion {
    loop {
        let rotation = random_rotation(rng);
        let t = Vector2::new(rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0));
        let m = RigidMotion::new(*rotation.matrix(), t)
            .expect("quaternion rotations are orthonormal to machine precision");
        if !motion_is_degenerate(&m) {
            return m;
        }
    }
}

pub fn gen_motion(seed: u64) -> RigidMotion {
    gen_motion_with(&mut rng_from_seed(seed))
}

/// Viewing directions of all frames are pairwise separated by the same
/// margin as a single motion from the identity.
pub fn motions_are_generic(motions: &[RigidMotion]) -> bool {
    let dirs: Vec<_> = motions.iter().map(RigidMotion::viewing_direction).collect();
    for i in 0..dirs.len() {
        for j in i + 1..dirs.len() {
            let ang = dirs[i].dot(&dirs[j]).clamp(-1.0, 1.0).acos();
            if !(MIN_MOTION_ANGLE..=PI - MIN_MOTION_ANGLE).contains(&ang) {
                return false;
            }
        }
    }
    true
}

fn draw_motions(frames: usize, rng: &mut impl Rng) -> Vec<RigidMotion> {
    let mut motions = vec![RigidMotion::identity()];
    while motions.len() < frames {
        let m = gen_motion_with(rng);
        motions.push(m);
        if !motions_are_generic(&motions) {
            motions.pop();
        }
    }
    motions
}

fn scene_is_generic(body: &[(String, Point3)], motions: &[RigidMotion]) -> bool {
    motions.iter().all(|m| {
        let pts: Vec<Point2> = body.iter().map(|(_, p)| project(m.apply(*p))).collect();
        frame_is_generic(&pts)
    })
}

/// A random generic scene: body in the unit cube, `frames` motions.
pub fn gen_scene(points: usize, frames: usize, seed: u64) -> Result<Scene> {
    if frames < 1 {
        return Err(Error::InvalidInput("at least one frame is required".into()));
    }
    let mut rng = rng_from_seed(seed);
    for _ in 0..MAX_DRAWS {
        let (body, _) = gen_body_from(points, || unit_cube_point(&mut rng))?;
        let motions = draw_motions(frames, &mut rng);
        if scene_is_generic(&body, &motions) {
            return Scene::new(body, motions, seed);
        }
    }
    Err(Error::InvalidInput(format!(
        "no generic scene after {MAX_DRAWS} draws"
    )))
}

/// A three-point body with the given squared lengths, placed in a random
/// orientation and viewed over `frames` random motions.
pub fn scene_from_triangle(lengths: TriangleDistances, frames: usize, seed: u64) -> Result<Scene> {
    if !lengths.is_valid() {
        return Err(Error::InvalidInput(format!("{lengths:?} is not a triangle")));
    }
    let (a, c) = (lengths.a_sq.sqrt(), lengths.c_sq.sqrt());
    let cos_p = ((lengths.a_sq + lengths.c_sq - lengths.b_sq) / (2.0 * a * c)).clamp(-1.0, 1.0);
    let sin_p = (1.0 - cos_p * cos_p).sqrt();
    let flat = [
        Vector3::zeros(),
        Vector3::new(a, 0.0, 0.0),
        Vector3::new(c * cos_p, c * sin_p, 0.0),
    ];
    let mut rng = rng_from_seed(seed);
    for _ in 0..MAX_DRAWS {
        let orient = random_rotation(&mut rng);
        let body: Vec<(String, Point3)> = point_labels(3)
            .into_iter()
            .zip(flat.iter().map(|v| Point3::from_vector(&(orient * v))))
            .collect();
        let motions = draw_motions(frames, &mut rng);
        if scene_is_generic(&body, &motions) {
            return Scene::new(body, motions, seed);
        }
    }
    Err(Error::InvalidInput(format!(
        "no generic placement of {lengths:?} after {MAX_DRAWS} draws"
    )))
}

/// Frame `j` is the projection of `motion_j · body`.
pub fn render(scene: &Scene) -> Vec<FrameObservation> {
    scene
        .motions
        .iter()
        .map(|m| {
            let pts = scene
                .body
                .iter()
                .map(|(l, p)| (l.clone(), project(m.apply(*p))))
                .collect();
            FrameObservation::new(pts).expect("scene labels are unique and finite")
        })
        .collect()
}

/// Same points and labels in a seeded random order.
pub fn shuffle_frame(frame: &FrameObservation, seed: u64) -> FrameObservation {
    let mut pts = frame.points().to_vec();
    pts.shuffle(&mut rng_from_seed(seed));
    FrameObservation::new(pts).expect("a permutation keeps labels unique")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseDistribution {
    Uniform,
    Gaussian,
}

/// Multiplicative coordinate noise. `level` bounds the relative change for
/// the uniform distribution and is three standard deviations for the
/// gaussian one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub level: f64,
    pub distribution: NoiseDistribution,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn uniform(level: f64, seed: u64) -> Self {
        Self {
            level,
            distribution: NoiseDistribution::Uniform,
            seed,
        }
    }
}

/// Replaces every coordinate `x` by `x·(1+ε)`.
pub fn add_noise(frames: &[FrameObservation], spec: &NoiseSpec) -> Result<Vec<FrameObservation>> {
    if !(spec.level >= 0.0) || !spec.level.is_finite() {
        return Err(Error::InvalidInput(format!("noise level {} must be ≥ 0", spec.level)));
    }
    if spec.level == 0.0 {
        return Ok(frames.to_vec());
    }
    let mut rng = rng_from_seed(spec.seed);
    let gauss = Normal::new(0.0, spec.level / 3.0).expect("positive finite sigma");
    let mut eps = || match spec.distribution {
        NoiseDistribution::Uniform => rng.random_range(-spec.level..=spec.level),
        NoiseDistribution::Gaussian => gauss.sample(&mut rng),
    };
    frames
        .iter()
        .map(|f| {
            let pts = f
                .points()
                .iter()
                .map(|(l, p)| {
                    let ex = eps();
                    let ey = eps();
                    (l.clone(), Point2::new(p.x * (1.0 + ex), p.y * (1.0 + ey)))
                })
                .collect();
            FrameObservation::new(pts)
        })
        .collect()
}
