//! File formats, command back-ends and the Monte-Carlo noise study.
//!
//! Everything here returns plain data; printing and exit codes belong to
//! the command-line front end.

mod files;
mod study;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    dof_balance, tetra_projection, triangle_projection, DofBalance, FrameObservation, Point3,
    Tolerance,
};
use crate::solvers::{solve_p3f3, solve_p3f4, solve_p4f3, Candidate, RecoveryResult, SquaredLengths};
use crate::two_frame::{
    ambiguity_family, interpretation_from_frames, max_displacement, rank_assignments,
    reprojection_residuals, rigidity_score, AmbiguitySample, Interpretation, MatchReport,
    RigidityThreshold,
};

pub use files::{
    parse_frames, write_frames, FileError, MotionRecord, PointRecord, SceneFile, FRAMES_HEADER,
};
pub use study::{noise_study, write_study_csv, LevelStats, StudyConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverMode {
    P3f3,
    P3f4,
    P4f3,
    Auto,
}

impl SolverMode {
    /// Points and frames consumed by a concrete solver.
    pub fn requirements(self) -> Option<(usize, usize)> {
        match self {
            SolverMode::P3f3 => Some((3, 3)),
            SolverMode::P3f4 => Some((3, 4)),
            SolverMode::P4f3 => Some((4, 3)),
            SolverMode::Auto => None,
        }
    }

    /// Concrete solver for the given counts. The linear solvers win
    /// whenever the counts allow them.
    pub fn resolve(self, points: usize, frames: usize) -> Result<SolverMode> {
        let mode = match self {
            SolverMode::Auto if points >= 4 && frames >= 3 => SolverMode::P4f3,
            SolverMode::Auto if points >= 3 && frames >= 4 => SolverMode::P3f4,
            SolverMode::Auto => SolverMode::P3f3,
            m => m,
        };
        let (p, k) = mode.requirements().expect("concrete mode");
        if points < p || frames < k {
            return Err(Error::InvalidInput(format!(
                "{mode} needs {p} points over {k} frames, input has {points} over {frames}"
            )));
        }
        Ok(mode)
    }
}

impl fmt::Display for SolverMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolverMode::P3f3 => "p3f3",
            SolverMode::P3f4 => "p3f4",
            SolverMode::P4f3 => "p4f3",
            SolverMode::Auto => "auto",
        })
    }
}

impl FromStr for SolverMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "p3f3" => Ok(SolverMode::P3f3),
            "p3f4" => Ok(SolverMode::P3f4),
            "p4f3" => Ok(SolverMode::P4f3),
            "auto" => Ok(SolverMode::Auto),
            other => Err(format!("unknown mode `{other}` (p3f3, p3f4, p4f3, auto)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthEntry {
    /// `"P-Q"` style edge name.
    pub edge: String,
    pub squared: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateReport {
    pub lengths: Vec<LengthEntry>,
    pub feasible: bool,
    pub residuals: Vec<f64>,
    pub max_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoverReport {
    pub solver: SolverMode,
    pub requested: SolverMode,
    pub labels: Vec<String>,
    pub frames_used: usize,
    pub frames_available: usize,
    pub dof: DofBalance,
    pub tolerance: f64,
    pub candidates: Vec<CandidateReport>,
    pub measurement_inconsistent: bool,
    pub elapsed_ms: f64,
    pub seed: Option<u64>,
}

impl RecoverReport {
    pub fn has_feasible(&self) -> bool {
        self.candidates.iter().any(|c| c.feasible)
    }
}

fn edge_names(labels: &[String]) -> Vec<String> {
    let pairs: &[(usize, usize)] = if labels.len() == 3 {
        &[(0, 1), (1, 2), (2, 0)]
    } else {
        &[(0, 1), (1, 2), (2, 0), (3, 2), (3, 0), (3, 1)]
    };
    pairs
        .iter()
        .map(|&(i, j)| format!("{}-{}", labels[i], labels[j]))
        .collect()
}

fn candidate_reports<L: SquaredLengths>(result: &RecoveryResult<L>, edges: &[String]) -> Vec<CandidateReport> {
    result
        .candidates
        .iter()
        .map(|c: &Candidate<L>| CandidateReport {
            lengths: edges
                .iter()
                .zip(c.lengths.values())
                .map(|(e, v)| LengthEntry {
                    edge: e.clone(),
                    squared: v,
                })
                .collect(),
            feasible: c.feasible,
            residuals: c.residuals.clone(),
            max_residual: c.max_residual(),
        })
        .collect()
}

/// Runs a solver on the first points of the first frame and as many
/// frames as it needs.
pub fn recover(frames: &[FrameObservation], mode: SolverMode, tol: Tolerance) -> Result<RecoverReport> {
    let start = Instant::now();
    let first = frames
        .first()
        .ok_or_else(|| Error::InvalidInput("no frames".into()))?;
    let solver = mode.resolve(first.len(), frames.len())?;
    let (p, k) = solver.requirements().expect("concrete mode");
    let labels: Vec<String> = first.labels().take(p).map(String::from).collect();
    let l: Vec<&str> = labels.iter().map(String::as_str).collect();
    let edges = edge_names(&labels);
    let used = &frames[..k];

    let (candidates, inconsistent) = match solver {
        SolverMode::P3f3 | SolverMode::P3f4 => {
            let tri = used
                .iter()
                .map(|f| triangle_projection(f, [l[0], l[1], l[2]]))
                .collect::<Result<Vec<_>>>()?;
            let result = if solver == SolverMode::P3f3 {
                solve_p3f3(&[tri[0], tri[1], tri[2]], tol)?
            } else {
                solve_p3f4(&[tri[0], tri[1], tri[2], tri[3]], tol)?
            };
            (candidate_reports(&result, &edges), result.measurement_inconsistent)
        }
        SolverMode::P4f3 => {
            let tet = used
                .iter()
                .map(|f| tetra_projection(f, [l[0], l[1], l[2], l[3]]))
                .collect::<Result<Vec<_>>>()?;
            let result = solve_p4f3(&[tet[0], tet[1], tet[2]], tol)?;
            (candidate_reports(&result, &edges), result.measurement_inconsistent)
        }
        SolverMode::Auto => unreachable!("resolved above"),
    };

    Ok(RecoverReport {
        solver,
        requested: mode,
        labels,
        frames_used: k,
        frames_available: frames.len(),
        dof: dof_balance(p as u32, k as u32),
        tolerance: tol.rel,
        candidates,
        measurement_inconsistent: inconsistent,
        elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
        seed: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RigidityVerdict {
    pub labels: [String; 4],
    pub residual: f64,
    pub threshold: f64,
    /// `"consistent"` or `"inconsistent"`.
    pub verdict: String,
}

impl RigidityVerdict {
    pub fn is_consistent(&self) -> bool {
        self.verdict == "consistent"
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchOutput {
    pub threshold: f64,
    pub consistent: bool,
    pub rigidity: Option<RigidityVerdict>,
    pub elapsed_ms: f64,
    pub report: MatchReport,
}

/// Ranks assignments between the first two frames. With `labeled`, the
/// first four shared labels also get a rigidity verdict under their known
/// correspondence.
pub fn match_frames(
    frames: &[FrameObservation],
    labeled: bool,
    threshold: RigidityThreshold,
    tol: Tolerance,
) -> Result<MatchOutput> {
    let start = Instant::now();
    if frames.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "matching needs 2 frames, got {}",
            frames.len()
        )));
    }
    let report = rank_assignments(&frames[0], &frames[1], tol)?;
    let limit = threshold.absolute(report.scale);
    let rigidity = if labeled {
        let labels: Vec<&str> = frames[0].labels().take(4).collect();
        let labels = [labels[0], labels[1], labels[2], labels[3]];
        let residual = rigidity_score([&frames[0], &frames[1]], labels, tol)?;
        Some(RigidityVerdict {
            labels: labels.map(String::from),
            residual,
            threshold: limit,
            verdict: if residual <= limit { "consistent" } else { "inconsistent" }.into(),
        })
    } else {
        None
    };
    Ok(MatchOutput {
        threshold: limit,
        consistent: report.best.residual <= limit,
        rigidity,
        elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
        report,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AmbiguityRow {
    pub angle: f64,
    pub skipped: bool,
    pub residuals: Option<[f64; 2]>,
    pub max_displacement: Option<f64>,
    pub points: Vec<(String, Point3)>,
}

/// Samples the ambiguity family. Without a `base`, one interpretation is
/// reconstructed from the frames.
pub fn ambiguity_rows(
    frames: &[FrameObservation],
    base: Option<Interpretation>,
    angles: &[f64],
    tol: Tolerance,
) -> Result<Vec<AmbiguityRow>> {
    if frames.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "the ambiguity family needs 2 frames, got {}",
            frames.len()
        )));
    }
    let pair = [&frames[0], &frames[1]];
    let base = match base {
        Some(b) => b,
        None => interpretation_from_frames(pair, tol)?,
    };
    let samples = ambiguity_family(pair, &base, angles, tol)?;
    samples
        .into_iter()
        .map(|s| match s {
            AmbiguitySample::Skipped { angle } => Ok(AmbiguityRow {
                angle,
                skipped: true,
                residuals: None,
                max_displacement: None,
                points: Vec::new(),
            }),
            AmbiguitySample::Member(m) => Ok(AmbiguityRow {
                angle: m.angle,
                skipped: false,
                residuals: Some(reprojection_residuals(pair, &m.points, &m.motion)?),
                max_displacement: Some(max_displacement(&base.points, &m.points)),
                points: m.points,
            }),
        })
        .collect()
}

/// Shortest round-trip decimal, in exponent form for very small or large
/// magnitudes.
fn num(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && a.is_finite() && !(1e-4..1e15).contains(&a) {
        format!("{v:e}")
    } else {
        v.to_string()
    }
}

/// One row per angle: residuals, displacement and every point's
/// coordinates. Skipped angles leave the numeric fields empty.
pub fn write_ambiguity_csv(rows: &[AmbiguityRow], labels: &[String]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = [
        "angle",
        "status",
        "residual_frame1",
        "residual_frame2",
        "max_displacement",
    ]
    .map(String::from)
    .to_vec();
    for l in labels {
        header.extend(["x", "y", "z"].map(|c| format!("{l}_{c}")));
    }
    w.write_record(&header).expect("in-memory write");
    for row in rows {
        let mut rec = vec![num(row.angle)];
        if row.skipped {
            rec.push("skipped_parallel_rays".into());
            rec.resize(header.len(), String::new());
        } else {
            let [r1, r2] = row.residuals.unwrap_or([f64::NAN; 2]);
            rec.push("ok".into());
            rec.push(num(r1));
            rec.push(num(r2));
            rec.push(num(row.max_displacement.unwrap_or(f64::NAN)));
            for l in labels {
                match row.points.iter().find(|(m, _)| m == l) {
                    Some((_, p)) => rec.extend([p.x, p.y, p.z].map(num)),
                    None => rec.extend([String::new(), String::new(), String::new()]),
                }
            }
        }
        w.write_record(&rec).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is UTF-8")
}
