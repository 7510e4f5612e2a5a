//! Error of recovered squared lengths under coordinate noise.
//!
//! Trial `t` uses the same scene and the same noise seed at every level, so
//! levels differ only in amplitude. Trials run in parallel; each derives
//! its seeds from `(seed, t)` alone, so the table matches a serial run.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{tetra_projection, triangle_projection, Tolerance};
use crate::scene_sim::{add_noise, derive_seed, gen_scene, render, NoiseDistribution, NoiseSpec};
use crate::solvers::{solve_p3f3, solve_p3f4, solve_p4f3, SquaredLengths};

use super::SolverMode;

const SCENE_STREAM: u64 = 0;
const NOISE_STREAM: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub mode: SolverMode,
    pub levels: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub distribution: NoiseDistribution,
}

/// Statistics of the pooled per-length relative errors at one level.
/// Failed trials contribute no errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelStats {
    pub level: f64,
    pub trials: usize,
    pub failures: usize,
    pub median: f64,
    pub mean: f64,
    pub p95: f64,
}

fn closest<L: SquaredLengths>(candidates: impl Iterator<Item = L>, truth: &[f64]) -> Option<Vec<f64>> {
    candidates
        .map(|c| {
            c.values()
                .iter()
                .zip(truth)
                .map(|(v, t)| ((v - t) / t).abs())
                .collect::<Vec<_>>()
        })
        .min_by(|a, b| {
            let ma = a.iter().fold(0.0, |m: f64, v| m.max(*v));
            let mb = b.iter().fold(0.0, |m: f64, v| m.max(*v));
            ma.total_cmp(&mb)
        })
}

/// Relative errors of one trial, or `None` when the solver fails. Of
/// several candidates, the one nearest the truth is scored.
fn trial(mode: SolverMode, level: f64, distribution: NoiseDistribution, seed: u64, t: u64) -> Option<Vec<f64>> {
    let (p, k) = mode.requirements()?;
    let scene = gen_scene(p, k, derive_seed(seed, SCENE_STREAM, t)).ok()?;
    let spec = NoiseSpec {
        level,
        distribution,
        seed: derive_seed(seed, NOISE_STREAM, t),
    };
    let frames = add_noise(&render(&scene), &spec).ok()?;
    let tol = Tolerance::default();
    let errors = match mode {
        SolverMode::P4f3 => {
            let tet: Vec<_> = frames
                .iter()
                .map(|f| tetra_projection(f, ["P", "Q", "R", "T"]))
                .collect::<Result<_>>()
                .ok()?;
            let r = solve_p4f3(&[tet[0], tet[1], tet[2]], tol).ok()?;
            closest(r.candidates.iter().map(|c| c.lengths), &scene.tetra().values())
        }
        _ => {
            let tri: Vec<_> = frames
                .iter()
                .map(|f| triangle_projection(f, ["P", "Q", "R"]))
                .collect::<Result<_>>()
                .ok()?;
            let r = if mode == SolverMode::P3f3 {
                solve_p3f3(&[tri[0], tri[1], tri[2]], tol).ok()?
            } else {
                solve_p3f4(&[tri[0], tri[1], tri[2], tri[3]], tol).ok()?
            };
            closest(r.candidates.iter().map(|c| c.lengths), &scene.triangle().values())
        }
    }?;
    errors.iter().all(|e| e.is_finite()).then_some(errors)
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let rank = (q * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    match n {
        0 => f64::NAN,
        _ if n % 2 == 1 => sorted[n / 2],
        _ => 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]),
    }
}

pub fn noise_study(config: &StudyConfig) -> Result<Vec<LevelStats>> {
    // auto: the linear three-point solver
    let mode = match config.mode {
        SolverMode::Auto => SolverMode::P3f4,
        m => m,
    };
    if config.trials == 0 {
        return Err(Error::InvalidInput("trials must be at least 1".into()));
    }
    if let Some(bad) = config.levels.iter().find(|l| !(**l >= 0.0) || !l.is_finite()) {
        return Err(Error::InvalidInput(format!("noise level {bad} must be ≥ 0")));
    }
    Ok(config
        .levels
        .iter()
        .map(|&level| {
            let outcomes: Vec<Option<Vec<f64>>> = (0..config.trials as u64)
                .into_par_iter()
                .map(|t| trial(mode, level, config.distribution, config.seed, t))
                .collect();
            let failures = outcomes.iter().filter(|o| o.is_none()).count();
            let mut errors: Vec<f64> = outcomes.into_iter().flatten().flatten().collect();
            errors.sort_by(f64::total_cmp);
            let mean = if errors.is_empty() {
                f64::NAN
            } else {
                errors.iter().sum::<f64>() / errors.len() as f64
            };
            LevelStats {
                level,
                trials: config.trials,
                failures,
                median: median(&errors),
                mean,
                p95: percentile(&errors, 0.95),
            }
        })
        .collect())
}

pub fn write_study_csv(stats: &[LevelStats]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for s in stats {
        w.serialize(s).expect("in-memory write");
    }
    if stats.is_empty() {
        w.write_record(["level", "trials", "failures", "median", "mean", "p95"])
            .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is UTF-8")
}
