//! `orthosfm`: recover rigid point geometry from orthographic frames.
//!
//! Exit codes: 0 success, 1 input error, 2 no solution or no consistent
//! assignment, 3 degenerate input.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use orthosfm::geometry::{dof_balance, FrameObservation, Tolerance, TriangleDistances};
use orthosfm::harness::{
    ambiguity_rows, match_frames, noise_study, parse_frames, recover, write_ambiguity_csv,
    write_frames, write_study_csv, SceneFile, SolverMode, StudyConfig,
};
use orthosfm::scene_sim::{
    add_noise, derive_seed, gen_scene, render, scene_from_triangle, shuffle_frame,
    NoiseDistribution, NoiseSpec,
};
use orthosfm::two_frame::{interpretation_from_scene, RigidityThreshold};
use orthosfm::Error;

#[derive(Parser)]
#[command(name = "orthosfm", version, about = "Rigid point-body geometry from orthographic frames")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    P3f3,
    P3f4,
    P4f3,
    Auto,
}

impl From<Mode> for SolverMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::P3f3 => SolverMode::P3f3,
            Mode::P3f4 => SolverMode::P3f4,
            Mode::P4f3 => SolverMode::P4f3,
            Mode::Auto => SolverMode::Auto,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Distribution {
    Uniform,
    Gaussian,
}

impl From<Distribution> for NoiseDistribution {
    fn from(d: Distribution) -> Self {
        match d {
            Distribution::Uniform => NoiseDistribution::Uniform,
            Distribution::Gaussian => NoiseDistribution::Gaussian,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Recover true squared lengths from a frames file.
    Recover {
        frames: PathBuf,
        #[arg(long, value_enum, default_value = "auto")]
        mode: Mode,
        /// Relative tolerance, scaled by the observation diameter.
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        /// Recorded in the report as provenance.
        #[arg(long, env = "ORTHOSFM_SEED")]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rank point assignments between two frames and test rigidity.
    Match {
        frames: PathBuf,
        /// Ignore labels; correspondence is unknown.
        #[arg(long)]
        unlabeled: bool,
        /// Rigidity threshold relative to the observation diameter.
        #[arg(long, default_value_t = RigidityThreshold::default().rel)]
        threshold: f64,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        /// Keep only the best N assignments in the printed ranking.
        #[arg(long)]
        top: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a random scene and its frames.
    Simulate {
        #[arg(long, default_value_t = 3)]
        points: usize,
        #[arg(long, default_value_t = 4)]
        frames: usize,
        /// Relative coordinate noise level.
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long, value_enum, default_value = "uniform")]
        distribution: Distribution,
        #[arg(long, env = "ORTHOSFM_SEED", default_value_t = 0)]
        seed: u64,
        /// Output directory for scene.json and frames.csv.
        #[arg(long)]
        out: PathBuf,
        /// Fix the true squared lengths PQ,QR,RP of a three-point body.
        #[arg(long, value_delimiter = ',')]
        triangle_sq: Option<Vec<f64>>,
        /// Shuffle the point order of every frame after the first.
        #[arg(long)]
        shuffle: bool,
    },
    /// Error statistics of recovered squared lengths versus noise level.
    NoiseStudy {
        #[arg(long, value_enum, default_value = "p3f4")]
        mode: Mode,
        #[arg(long, value_delimiter = ',', default_value = "0.001,0.01,0.1")]
        levels: Vec<f64>,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, env = "ORTHOSFM_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "uniform")]
        distribution: Distribution,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample the family of bodies indistinguishable from two frames.
    Ambiguity {
        frames: PathBuf,
        /// Base interpretation from a scene file instead of the frames.
        #[arg(long)]
        scene: Option<PathBuf>,
        /// Rotation angles in radians.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "0,0.25,0.5,1")]
        angles: Vec<f64>,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Unknowns versus measurements for a point and frame count.
    Dof {
        #[arg(long)]
        points: u32,
        #[arg(long)]
        frames: u32,
    },
}

enum Failure {
    Input(String),
    NoSolution(String),
    Degenerate(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => 1,
            Failure::NoSolution(_) => 2,
            Failure::Degenerate(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Input(m) | Failure::NoSolution(m) | Failure::Degenerate(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        if e.is_degenerate() {
            Failure::Degenerate(format!("degenerate: {msg}"))
        } else {
            match e {
                Error::NoSolution { .. }
                | Error::NoConsistentAssignment { .. }
                | Error::InconsistentLengths { .. } => Failure::NoSolution(msg),
                _ => Failure::Input(msg),
            }
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn read_frames(path: &Path, same_labels: bool) -> Result<Vec<FrameObservation>, Failure> {
    parse_frames(&read(path)?, same_labels).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn emit(text: &str, out: Option<&Path>) -> Result<(), Failure> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| Failure::Input(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

fn tolerance(rel: f64) -> Result<Tolerance, Failure> {
    if rel > 0.0 && rel.is_finite() {
        Ok(Tolerance::new(rel))
    } else {
        Err(Failure::Input(format!("--tol {rel} must be positive")))
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Recover {
            frames,
            mode,
            tol,
            seed,
            out,
        } => {
            let frames = read_frames(&frames, true)?;
            let mut report = recover(&frames, mode.into(), tolerance(tol)?)?;
            report.seed = seed;
            emit(&json(&report), out.as_deref())?;
            if !report.has_feasible() {
                return Err(Failure::NoSolution("no feasible candidate".into()));
            }
        }
        Command::Match {
            frames,
            unlabeled,
            threshold,
            tol,
            top,
            out,
        } => {
            if threshold.is_nan() || threshold <= 0.0 {
                return Err(Failure::Input(format!("--threshold {threshold} must be positive")));
            }
            let frames = read_frames(&frames, !unlabeled)?;
            let mut output = match_frames(
                &frames,
                !unlabeled,
                RigidityThreshold { rel: threshold },
                tolerance(tol)?,
            )?;
            if let Some(n) = top {
                output.report.ranking.truncate(n);
            }
            emit(&json(&output), out.as_deref())?;
            if !output.consistent {
                return Err(Failure::NoSolution(format!(
                    "no consistent assignment (best residual {:.3e} > threshold {:.3e})",
                    output.report.best.residual, output.threshold
                )));
            }
            if output.rigidity.as_ref().is_some_and(|r| !r.is_consistent()) {
                return Err(Failure::NoSolution("labeled points are not rigid".into()));
            }
        }
        Command::Simulate {
            points,
            frames,
            noise,
            distribution,
            seed,
            out,
            triangle_sq,
            shuffle,
        } => {
            if frames < 2 {
                return Err(Failure::Input("--frames must be at least 2".into()));
            }
            let scene = match triangle_sq {
                Some(v) => {
                    if points != 3 || v.len() != 3 {
                        return Err(Failure::Input(
                            "--triangle-sq takes three values and needs --points 3".into(),
                        ));
                    }
                    scene_from_triangle(TriangleDistances::new(v[0], v[1], v[2]), frames, seed)?
                }
                None => {
                    if points < 3 {
                        return Err(Failure::Input("--points must be at least 3".into()));
                    }
                    gen_scene(points, frames, seed)?
                }
            };
            let spec = NoiseSpec {
                level: noise,
                distribution: distribution.into(),
                seed: derive_seed(seed, 2, 0),
            };
            let mut rendered = add_noise(&render(&scene), &spec)?;
            if shuffle {
                for (j, f) in rendered.iter_mut().enumerate().skip(1) {
                    *f = shuffle_frame(f, derive_seed(seed, 3, j as u64));
                }
            }
            fs::create_dir_all(&out).map_err(|e| Failure::Input(format!("{}: {e}", out.display())))?;
            emit(&SceneFile::from_scene(&scene).to_json(), Some(&out.join("scene.json")))?;
            emit(&write_frames(&rendered), Some(&out.join("frames.csv")))?;
        }
        Command::NoiseStudy {
            mode,
            levels,
            trials,
            seed,
            distribution,
            out,
        } => {
            let stats = noise_study(&StudyConfig {
                mode: mode.into(),
                levels,
                trials,
                seed,
                distribution: distribution.into(),
            })?;
            emit(&write_study_csv(&stats), out.as_deref())?;
        }
        Command::Ambiguity {
            frames,
            scene,
            angles,
            tol,
            out,
        } => {
            let frames = read_frames(&frames, true)?;
            let base = match scene {
                Some(p) => {
                    let file = SceneFile::parse(&read(&p)?)
                        .map_err(|e| Failure::Input(format!("{}: {e}", p.display())))?;
                    let scene = file
                        .to_scene()
                        .map_err(|e| Failure::Input(format!("{}: {e}", p.display())))?;
                    Some(interpretation_from_scene(&scene)?)
                }
                None => None,
            };
            let rows = ambiguity_rows(&frames, base, &angles, tolerance(tol)?)?;
            let labels: Vec<String> = frames[0].labels().map(String::from).collect();
            emit(&write_ambiguity_csv(&rows, &labels), out.as_deref())?;
        }
        Command::Dof { points, frames } => {
            if frames == 0 {
                return Err(Failure::Input("--frames must be at least 1".into()));
            }
            emit(&json(&dof_balance(points, frames)), None)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("orthosfm: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
