use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{FrameObservation, Point2, Tolerance};

use super::reconstruct::{triad_models, triad_models_scanning, TriadModel};

/// Residual above which two frames are declared inconsistent with a single
/// rigid body, relative to the observation diameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidityThreshold {
    pub rel: f64,
}

impl Default for RigidityThreshold {
    fn default() -> Self {
        Self { rel: 1e-6 }
    }
}

impl RigidityThreshold {
    /// Ten times the relative coordinate noise, never below the noise-free
    /// default.
    pub fn for_noise(level: f64) -> Self {
        Self {
            rel: (10.0 * level).max(Self::default().rel),
        }
    }

    pub fn absolute(&self, scale: f64) -> f64 {
        self.rel * scale
    }
}

/// Frame-1 label to frame-2 label for the four probe points, in
/// `P, Q, R, T` order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub pairs: [(String, String); 4],
}

impl Assignment {
    pub fn identity(labels: [&str; 4]) -> Self {
        Self {
            pairs: labels.map(|l| (l.to_string(), l.to_string())),
        }
    }

    pub fn is_injective(&self) -> bool {
        (0..4).all(|i| {
            (i + 1..4).all(|j| {
                self.pairs[i].0 != self.pairs[j].0 && self.pairs[i].1 != self.pairs[j].1
            })
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredAssignment {
    pub assignment: Assignment,
    /// Distance of the fourth point from its predicted line; infinite when
    /// the triangle admits no rigid interpretation.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchReport {
    /// Frame-1 probe labels in `P, Q, R, T` order.
    pub probes: [String; 4],
    /// Every scored assignment, best first; ties keep enumeration order.
    pub ranking: Vec<ScoredAssignment>,
    pub assignments_scored: usize,
    pub best: ScoredAssignment,
    /// Runner-up residual minus best residual.
    pub margin: f64,
    /// Full correspondence: the probes from `best`, the remaining points
    /// assigned greedily by distance from their predicted lines.
    pub bijection: Vec<(String, String)>,
    /// Observation diameter over both frames.
    pub scale: f64,
}

fn images_diameter(pts: &[Point2]) -> f64 {
    let mut best = 0.0_f64;
    for (i, a) in pts.iter().enumerate() {
        for b in &pts[i + 1..] {
            best = best.max(a.sq_dist(b));
        }
    }
    best.sqrt()
}

fn best_line_residual(models: &[TriadModel], t1: Point2, t2: Point2, scale: f64) -> Result<(f64, usize)> {
    let mut best: Option<(f64, usize)> = None;
    let mut collapsed = None;
    for (i, m) in models.iter().enumerate() {
        let line = m.predict_line(t1)?;
        if line.is_degenerate(scale) {
            collapsed = Some(line.distance(t2.to_vector()));
            continue;
        }
        let d = line.distance(t2.to_vector());
        if best.is_none_or(|(b, _)| d < b) {
            best = Some((d, i));
        }
    }
    best.ok_or(Error::DegenerateLine {
        point_distance: collapsed.unwrap_or(f64::NAN),
    })
}

fn split(img: [Point2; 4]) -> ([Point2; 3], Point2) {
    ([img[0], img[1], img[2]], img[3])
}

/// Distance of the fourth image point in frame 2 from the line predicted
/// by the first three, at a fixed `c²`; minimum over all interpretations.
pub fn collinearity_residual_points(img1: [Point2; 4], img2: [Point2; 4], c_sq: f64, tol: Tolerance) -> Result<f64> {
    let scale = images_diameter(&img1).max(images_diameter(&img2));
    let (tri1, t1) = split(img1);
    let (tri2, t2) = split(img2);
    let models = triad_models(tri1, tri2, c_sq, tol)?;
    best_line_residual(&models, t1, t2, scale).map(|(d, _)| d)
}

fn assigned_images(frames: [&FrameObservation; 2], assignment: &Assignment) -> Result<([Point2; 4], [Point2; 4])> {
    if !assignment.is_injective() {
        return Err(Error::InvalidInput("assignment is not injective".into()));
    }
    let mut img1 = [Point2::default(); 4];
    let mut img2 = [Point2::default(); 4];
    for (k, (l1, l2)) in assignment.pairs.iter().enumerate() {
        img1[k] = frames[0].require(l1)?;
        img2[k] = frames[1].require(l2)?;
    }
    Ok((img1, img2))
}

/// [`collinearity_residual_points`] on labeled frames under an assignment.
pub fn collinearity_residual_4pt(
    frames: [&FrameObservation; 2],
    assignment: &Assignment,
    c_sq: f64,
    tol: Tolerance,
) -> Result<f64> {
    let (img1, img2) = assigned_images(frames, assignment)?;
    collinearity_residual_points(img1, img2, c_sq, tol)
}

/// Residual with `c` chosen by the upward scan; also returns the model
/// that achieved it.
fn scanned_residual(img1: [Point2; 4], img2: [Point2; 4], tol: Tolerance) -> Result<(f64, TriadModel)> {
    let scale = images_diameter(&img1).max(images_diameter(&img2));
    let (tri1, t1) = split(img1);
    let (tri2, t2) = split(img2);
    let (models, _) = triad_models_scanning(tri1, tri2, tol)?;
    let (d, i) = best_line_residual(&models, t1, t2, scale)?;
    Ok((d, models[i].clone()))
}

pub fn rigidity_score_points(img1: [Point2; 4], img2: [Point2; 4], tol: Tolerance) -> Result<f64> {
    scanned_residual(img1, img2, tol).map(|(d, _)| d)
}

/// Collinearity residual of four labeled points under their known
/// correspondence. Small values are consistent with one rigid body.
pub fn rigidity_score(frames: [&FrameObservation; 2], labels: [&str; 4], tol: Tolerance) -> Result<f64> {
    let (img1, img2) = assigned_images(frames, &Assignment::identity(labels))?;
    rigidity_score_points(img1, img2, tol)
}

fn triangle_area(a: Point2, b: Point2, c: Point2) -> f64 {
    0.5 * ((b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)).abs()
}

fn hull_area4(p: [Point2; 4]) -> f64 {
    let shoelace = |o: [usize; 4]| {
        let mut s = 0.0;
        for k in 0..4 {
            let (a, b) = (p[o[k]], p[o[(k + 1) % 4]]);
            s += a.x * b.y - a.y * b.x;
        }
        0.5 * s.abs()
    };
    let quads = [[0, 1, 2, 3], [0, 1, 3, 2], [0, 2, 1, 3]].map(shoelace);
    let tris = [
        triangle_area(p[0], p[1], p[2]),
        triangle_area(p[0], p[1], p[3]),
        triangle_area(p[0], p[2], p[3]),
        triangle_area(p[1], p[2], p[3]),
    ];
    quads.into_iter().chain(tris).fold(0.0, f64::max)
}

/// Four frame-1 points spanning the largest convex hull, ordered so that
/// the first three form the largest triangle.
fn select_probes(pts: &[Point2]) -> [usize; 4] {
    let n = pts.len();
    let mut best = ([0, 1, 2, 3], -1.0);
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                for l in k + 1..n {
                    let area = hull_area4([pts[i], pts[j], pts[k], pts[l]]);
                    if area > best.1 {
                        best = ([i, j, k, l], area);
                    }
                }
            }
        }
    }
    let q = best.0;
    let orders = [
        [q[0], q[1], q[2], q[3]],
        [q[0], q[1], q[3], q[2]],
        [q[0], q[2], q[3], q[1]],
        [q[1], q[2], q[3], q[0]],
    ];
    *orders
        .iter()
        .max_by(|a, b| {
            let fa = triangle_area(pts[a[0]], pts[a[1]], pts[a[2]]);
            let fb = triangle_area(pts[b[0]], pts[b[1]], pts[b[2]]);
            fa.total_cmp(&fb).then(std::cmp::Ordering::Greater)
        })
        .unwrap()
}

/// Scores every ordered assignment of the four probe points into frame 2
/// (`n·(n−1)·(n−2)·(n−3)` of them) and extends the best one to all points.
/// No rigidity threshold is applied.
pub fn rank_assignments(frame1: &FrameObservation, frame2: &FrameObservation, tol: Tolerance) -> Result<MatchReport> {
    let n = frame1.len();
    if n != frame2.len() {
        return Err(Error::InvalidInput(format!(
            "frames hold {n} and {} points",
            frame2.len()
        )));
    }
    if n < 4 {
        return Err(Error::InvalidInput(format!(
            "matching needs at least 4 points, got {n}"
        )));
    }
    let pts1: Vec<Point2> = frame1.points().iter().map(|(_, p)| *p).collect();
    let pts2: Vec<Point2> = frame2.points().iter().map(|(_, p)| *p).collect();
    let labels1: Vec<&str> = frame1.labels().collect();
    let labels2: Vec<&str> = frame2.labels().collect();
    let scale = frame1.diameter().max(frame2.diameter());

    let probes = select_probes(&pts1);
    let img1 = probes.map(|i| pts1[i]);

    let mut scored: Vec<([usize; 4], f64)> = Vec::with_capacity(n * (n - 1) * (n - 2) * (n - 3));
    for a in 0..n {
        for b in (0..n).filter(|&b| b != a) {
            for c in (0..n).filter(|&c| c != a && c != b) {
                for d in (0..n).filter(|&d| d != a && d != b && d != c) {
                    let targets = [a, b, c, d];
                    let img2 = targets.map(|j| pts2[j]);
                    let residual = rigidity_score_points(img1, img2, tol).unwrap_or(f64::INFINITY);
                    scored.push((targets, residual));
                }
            }
        }
    }
    let assignments_scored = scored.len();
    // stable: ties stay in lexicographic enumeration order
    scored.sort_by(|x, y| x.1.total_cmp(&y.1));

    let to_assignment = |targets: &[usize; 4]| Assignment {
        pairs: [0, 1, 2, 3].map(|k| {
            (
                labels1[probes[k]].to_string(),
                labels2[targets[k]].to_string(),
            )
        }),
    };
    let ranking: Vec<ScoredAssignment> = scored
        .iter()
        .map(|(t, r)| ScoredAssignment {
            assignment: to_assignment(t),
            residual: *r,
        })
        .collect();
    let best = ranking[0].clone();
    let margin = ranking.get(1).map_or(f64::INFINITY, |r| r.residual - best.residual);

    let best_targets = scored[0].0;
    let mut bijection: Vec<(String, String)> = best.assignment.pairs.to_vec();
    if n > 4 && best.residual.is_finite() {
        let img2 = best_targets.map(|j| pts2[j]);
        let (_, model) = scanned_residual(img1, img2, tol)?;
        let mut rest1: Vec<usize> = (0..n).filter(|i| !probes.contains(i)).collect();
        let mut rest2: Vec<usize> = (0..n).filter(|j| !best_targets.contains(j)).collect();
        let lines = rest1
            .iter()
            .map(|&i| model.predict_line(pts1[i]).map(|l| (i, l)))
            .collect::<Result<Vec<_>>>()?;
        while !rest1.is_empty() {
            let mut pick = (0, 0, f64::INFINITY);
            for (a, &i) in rest1.iter().enumerate() {
                let line = lines.iter().find(|(k, _)| *k == i).unwrap().1;
                for (b, &j) in rest2.iter().enumerate() {
                    let d = line.distance(pts2[j].to_vector());
                    if d < pick.2 {
                        pick = (a, b, d);
                    }
                }
            }
            let i = rest1.remove(pick.0);
            let j = rest2.remove(pick.1);
            bijection.push((labels1[i].to_string(), labels2[j].to_string()));
        }
    }

    Ok(MatchReport {
        probes: probes.map(|i| labels1[i].to_string()),
        ranking,
        assignments_scored,
        best,
        margin,
        bijection,
        scale,
    })
}

/// [`rank_assignments`], failing when even the best assignment exceeds the
/// rigidity threshold.
pub fn match_points(
    frame1: &FrameObservation,
    frame2: &FrameObservation,
    threshold: RigidityThreshold,
    tol: Tolerance,
) -> Result<MatchReport> {
    let report = rank_assignments(frame1, frame2, tol)?;
    let limit = threshold.absolute(report.scale);
    if !(report.best.residual <= limit) {
        return Err(Error::NoConsistentAssignment {
            best: report.best.residual,
            threshold: limit,
        });
    }
    Ok(report)
}
