//! On-disk formats: JSON scene files and CSV frame files.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{FrameObservation, Point2, Point3, RigidMotion};
use crate::scene_sim::Scene;

/// Malformed input file.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum FileError {
    #[error("line {line}: {message}")]
    Line { line: u64, message: String },
    #[error("{0}")]
    Format(String),
}

fn at(line: u64, message: impl Into<String>) -> FileError {
    FileError::Line {
        line,
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointRecord {
    pub label: String,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MotionRecord {
    /// Row-major.
    pub rotation: [f64; 9],
    pub tx: f64,
    pub ty: f64,
}

/// Ground-truth scene as stored on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneFile {
    pub points: Vec<PointRecord>,
    pub motions: Vec<MotionRecord>,
    pub seed: u64,
}

impl SceneFile {
    pub fn from_scene(scene: &Scene) -> Self {
        let points = scene
            .body
            .iter()
            .map(|(label, p)| PointRecord {
                label: label.clone(),
                x: p.x,
                y: p.y,
                z: p.z,
            })
            .collect();
        let motions = scene
            .motions
            .iter()
            .map(|m| {
                let r = m.rotation();
                MotionRecord {
                    rotation: [
                        r[(0, 0)], r[(0, 1)], r[(0, 2)],
                        r[(1, 0)], r[(1, 1)], r[(1, 2)],
                        r[(2, 0)], r[(2, 1)], r[(2, 2)],
                    ],
                    tx: m.translation().x,
                    ty: m.translation().y,
                }
            })
            .collect();
        Self {
            points,
            motions,
            seed: scene.seed,
        }
    }

    pub fn to_scene(&self) -> Result<Scene, FileError> {
        let body = self
            .points
            .iter()
            .map(|p| (p.label.clone(), Point3::new(p.x, p.y, p.z)))
            .collect();
        let motions = self
            .motions
            .iter()
            .enumerate()
            .map(|(i, m)| {
                RigidMotion::new(
                    nalgebra::Matrix3::from_row_slice(&m.rotation),
                    nalgebra::Vector2::new(m.tx, m.ty),
                )
                .map_err(|e| FileError::Format(format!("motion {}: {e}", i + 1)))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Scene::new(body, motions, self.seed).map_err(|e| FileError::Format(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scene file serializes")
    }

    pub fn parse(text: &str) -> Result<Self, FileError> {
        let file: Self = serde_json::from_str(text).map_err(|e| at(e.line() as u64, e.to_string()))?;
        file.to_scene()?;
        Ok(file)
    }
}

pub const FRAMES_HEADER: [&str; 4] = ["frame_index", "label", "x", "y"];

#[derive(Debug, Serialize)]
struct FrameRow<'a> {
    frame_index: usize,
    label: &'a str,
    x: f64,
    y: f64,
}

/// CSV with one row per point per frame; `frame_index` counts from 1.
pub fn write_frames(frames: &[FrameObservation]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    if frames.is_empty() {
        w.write_record(FRAMES_HEADER).expect("in-memory write");
    }
    for (i, f) in frames.iter().enumerate() {
        for (label, p) in f.points() {
            w.serialize(FrameRow {
                frame_index: i + 1,
                label,
                x: p.x,
                y: p.y,
            })
            .expect("in-memory write");
        }
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is UTF-8")
}

/// Parses a frames file. With `require_same_labels`, every frame must hold
/// the same label set as the first; without it, only the point counts must
/// agree (correspondence unknown).
pub fn parse_frames(text: &str, require_same_labels: bool) -> Result<Vec<FrameObservation>, FileError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| at(1, e.to_string()))?.clone();
    if header.iter().ne(FRAMES_HEADER) {
        return Err(at(
            1,
            format!("expected header `{}`", FRAMES_HEADER.join(",")),
        ));
    }

    let mut rows: Vec<Vec<(String, Point2)>> = Vec::new();
    let mut first_line: Vec<u64> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            at(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |k: usize| record.get(k).unwrap_or("");
        let index: usize = field(0)
            .parse()
            .map_err(|_| at(line, format!("frame_index `{}` is not a positive integer", field(0))))?;
        let label = field(1);
        if label.is_empty() {
            return Err(at(line, "empty label"));
        }
        let coord = |k: usize, name: &str| -> Result<f64, FileError> {
            let v: f64 = field(k)
                .parse()
                .map_err(|_| at(line, format!("{name} `{}` is not a number", field(k))))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(at(line, format!("{name} is not finite")))
            }
        };
        let p = Point2::new(coord(2, "x")?, coord(3, "y")?);
        if index == rows.len() + 1 {
            rows.push(Vec::new());
            first_line.push(line);
        } else if index != rows.len() || index == 0 {
            return Err(at(
                line,
                if rows.is_empty() {
                    format!("frame_index {index} out of order; frames start at 1")
                } else {
                    format!(
                        "frame_index {index} out of order; expected {} or {}",
                        rows.len(),
                        rows.len() + 1
                    )
                },
            ));
        }
        let frame = rows.last_mut().expect("frame started above");
        if frame.iter().any(|(l, _)| l == label) {
            return Err(at(line, format!("label `{label}` repeated in frame {index}")));
        }
        frame.push((label.to_string(), p));
    }
    if rows.is_empty() {
        return Err(FileError::Format("no frames".into()));
    }

    let mut frames = Vec::with_capacity(rows.len());
    for (i, pts) in rows.into_iter().enumerate() {
        let line = first_line[i];
        if let Some(first) = frames.first() {
            let first: &FrameObservation = first;
            if pts.len() != first.len() {
                return Err(at(
                    line,
                    format!("frame {} has {} points, frame 1 has {}", i + 1, pts.len(), first.len()),
                ));
            }
            if require_same_labels {
                if let Some((l, _)) = pts.iter().find(|(l, _)| first.get(l).is_none()) {
                    return Err(at(line, format!("label `{l}` of frame {} is absent from frame 1", i + 1)));
                }
            }
        }
        frames.push(FrameObservation::new(pts).map_err(|e| at(line, e.to_string()))?);
    }
    Ok(frames)
}
