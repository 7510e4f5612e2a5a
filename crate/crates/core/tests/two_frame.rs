use nalgebra::{Matrix3, Rotation2, Vector2};
use orthosfm::geometry::{
    project, triangle_projection, FrameObservation, Point2, Point3, RigidMotion, Tolerance,
    TriangleDistances,
};
use orthosfm::scene_sim::{gen_scene, render, shuffle_frame, Scene};
use orthosfm::two_frame::*;
use orthosfm::Error;

const TOL: Tolerance = Tolerance::new(1e-9);

fn pair(frames: &[FrameObservation]) -> [&FrameObservation; 2] {
    [&frames[0], &frames[1]]
}

fn scale(frames: &[FrameObservation]) -> f64 {
    frames[0].diameter().max(frames[1].diameter())
}

fn images(f: &FrameObservation, labels: [&str; 3]) -> [Point2; 3] {
    labels.map(|l| f.get(l).unwrap())
}

fn sign_free(l: [f64; 3], p: [f64; 3]) -> f64 {
    let [x, y, z] = l;
    let [a, b, c] = p;
    x * x + y * y + z * z - 2.0 * (x * y + x * z + y * z)
        + 2.0 * (-a + b + c) * x
        + 2.0 * (a - b + c) * y
        + 2.0 * (a + b - c) * z
        + (a * a + b * b + c * c - 2.0 * (a * b + a * c + b * c))
}

/// The frame-1 relation after `a²` has been eliminated, built numerically:
/// the frame difference is linear in `a²`, so two evaluations locate its
/// root.
fn eliminated(f1: [f64; 3], f2: [f64; 3], b: f64, c: f64) -> f64 {
    let diff = |a: f64| sign_free([a, b, c], f1) - sign_free([a, b, c], f2);
    let (d0, d1) = (diff(0.0), diff(1.0));
    let a = -d0 / (d1 - d0);
    sign_free([a, b, c], f1)
}

#[test]
fn elimination_coefficients_match_sampled_expansion() {
    for seed in 0..100 {
        let scene = gen_scene(3, 2, seed).unwrap();
        let frames = render(&scene);
        let p1 = triangle_projection(&frames[0], ["P", "Q", "R"]).unwrap();
        let p2 = triangle_projection(&frames[1], ["P", "Q", "R"]).unwrap();
        let k = b_of_c_coeffs(&p1, &p2).unwrap();
        let g = |b: f64, c: f64| eliminated(p1.to_array(), p2.to_array(), b, c);
        // exact for a quadratic in (b², c²)
        let g00 = g(0.0, 0.0);
        let f_b2 = 0.5 * (g(1.0, 0.0) + g(-1.0, 0.0)) - g00;
        let f_b = 0.5 * (g(1.0, 0.0) - g(-1.0, 0.0));
        let f_c2 = 0.5 * (g(0.0, 1.0) + g(0.0, -1.0)) - g00;
        let f_c = 0.5 * (g(0.0, 1.0) - g(0.0, -1.0));
        let f_cb = g(1.0, 1.0) - f_b2 - f_b - f_c2 - f_c - g00;
        let oracle = [f_cb, f_c, f_b, g00, f_b2, f_c2];
        let ours = [k.f_cb, k.f_c, k.f_b, k.f_cst, k.f_b2, k.f_c2];
        let size = oracle.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        for (o, m) in oracle.iter().zip(ours) {
            assert!((o - m).abs() <= 1e-12 * size.max(1.0), "seed {seed}: {oracle:?} vs {ours:?}");
        }
    }
}

#[test]
fn biquadratic_vanishes_at_ground_truth() {
    for seed in 0..200 {
        let scene = gen_scene(3, 2, seed).unwrap();
        let frames = render(&scene);
        let p1 = triangle_projection(&frames[0], ["P", "Q", "R"]).unwrap();
        let p2 = triangle_projection(&frames[1], ["P", "Q", "R"]).unwrap();
        let truth = scene.triangle();
        let k = b_of_c_coeffs(&p1, &p2).unwrap();
        let s4 = truth.max_sq().powi(2);
        assert!(k.eval(truth.b_sq, truth.c_sq).abs() < 1e-9 * s4);
        assert!((k.a_sq(truth.b_sq, truth.c_sq) - truth.a_sq).abs() < 1e-9 * truth.max_sq());
    }
}

#[test]
fn ground_truth_b_is_one_of_the_branches() {
    for seed in 0..200 {
        let scene = gen_scene(3, 2, seed).unwrap();
        let frames = render(&scene);
        let p1 = triangle_projection(&frames[0], ["P", "Q", "R"]).unwrap();
        let p2 = triangle_projection(&frames[1], ["P", "Q", "R"]).unwrap();
        let truth = scene.triangle();
        let k = b_of_c_coeffs(&p1, &p2).unwrap();
        let roots = solve_b_given_c(&k, truth.c_sq, TOL).unwrap();
        assert!(roots.len() <= 2);
        assert!(
            roots.iter().any(|b| ((b - truth.b_sq) / truth.b_sq).abs() < 1e-9),
            "seed {seed}: {roots:?} vs {}",
            truth.b_sq
        );
    }
}

#[test]
fn short_c_has_no_solution() {
    // scan c² downward from the truth until the discriminant turns negative
    let mut found = 0;
    for seed in 0..50 {
        let scene = gen_scene(3, 2, seed).unwrap();
        let frames = render(&scene);
        let p1 = triangle_projection(&frames[0], ["P", "Q", "R"]).unwrap();
        let p2 = triangle_projection(&frames[1], ["P", "Q", "R"]).unwrap();
        let k = b_of_c_coeffs(&p1, &p2).unwrap();
        let mut c = scene.triangle().c_sq;
        for _ in 0..200 {
            if k.discriminant(c) < -1e-6 * k.discriminant(scene.triangle().c_sq).abs().max(1e-12) {
                assert!(matches!(
                    solve_b_given_c(&k, c, TOL),
                    Err(Error::NoSolution { .. })
                ));
                found += 1;
                break;
            }
            c *= 0.95;
        }
    }
    assert!(found > 0);
    assert!(matches!(
        solve_b_given_c(&b_of_c_coeffs(
            &TriangleDistances::new(1.0, 1.0, 1.0),
            &TriangleDistances::new(0.9, 0.5, 0.6)
        )
        .unwrap(), -1.0, TOL),
        Err(Error::InvalidInput(_))
    ));
}

#[test]
fn point_on_predicted_line_scores_zero() {
    let scene = gen_scene(4, 2, 3).unwrap();
    let frames = render(&scene);
    let img1 = images(&frames[0], ["P", "Q", "R"]);
    let img2 = images(&frames[1], ["P", "Q", "R"]);
    let c = default_c_sq(&img1, &img2);
    let models = triad_models(img1, img2, c, TOL).unwrap();
    let t1 = Point2::new(0.3, -0.2);
    let line = models[0].predict_line(t1).unwrap();
    let on = line.origin + line.direction * 0.7;
    let r = collinearity_residual_points(
        [img1[0], img1[1], img1[2], t1],
        [img2[0], img2[1], img2[2], Point2::new(on.x, on.y)],
        c,
        TOL,
    )
    .unwrap();
    assert!(r < 1e-12);
}

#[test]
fn collinearity_residual_separates_assignments() {
    let correct = Assignment::identity(["P", "Q", "R", "T"]);
    let (mut large, n) = (0, 300);
    for seed in 0..n {
        let scene = gen_scene(4, 2, seed).unwrap();
        let frames = render(&scene);
        let s = scale(&frames);
        let c = default_c_sq(
            &images(&frames[0], ["P", "Q", "R"]),
            &images(&frames[1], ["P", "Q", "R"]),
        );
        let good = collinearity_residual_4pt(pair(&frames), &correct, c, TOL).unwrap();
        assert!(good < 1e-9 * s, "seed {seed}: {good:e}");
        let bad = rigidity_score_points(
            ["P", "Q", "R", "T"].map(|l| frames[0].get(l).unwrap()),
            ["P", "R", "Q", "T"].map(|l| frames[1].get(l).unwrap()),
            TOL,
        )
        .unwrap_or(f64::INFINITY);
        assert!(bad > 1e3 * TOL.rel * s, "seed {seed}");
        if bad > 1e-3 * s {
            large += 1;
        }
    }
    // a few random bodies are close enough to symmetric to fall below
    assert!(large * 100 >= 99 * n, "{large}/{n}");
}

fn shuffled_second(scene: &Scene, seed: u64) -> Vec<FrameObservation> {
    let frames = render(scene);
    vec![frames[0].clone(), shuffle_frame(&frames[1], seed)]
}

#[test]
fn matcher_recovers_bijection() {
    for (n, expected) in [(4, 24), (5, 120), (6, 360)] {
        for seed in 0..40 {
            let scene = gen_scene(n, 2, seed).unwrap();
            let frames = shuffled_second(&scene, seed + 1000);
            let report = match_points(&frames[0], &frames[1], RigidityThreshold::default(), TOL).unwrap();
            assert_eq!(report.assignments_scored, expected);
            assert_eq!(report.ranking.len(), expected);
            assert_eq!(report.bijection.len(), n);
            assert!(report.bijection.iter().all(|(a, b)| a == b), "n {n} seed {seed}: {:?}", report.bijection);
            assert!(report.best.residual < 1e-9 * report.scale);
            assert!(report.ranking.windows(2).all(|w| w[0].residual <= w[1].residual));
            assert!(report.ranking.iter().all(|r| r.residual >= 0.0));
            assert_eq!(report.margin, report.ranking[1].residual - report.best.residual);
        }
    }
}

#[test]
fn unrelated_bodies_have_no_consistent_assignment() {
    for seed in 0..30 {
        let a = render(&gen_scene(4, 2, seed).unwrap());
        let b = render(&gen_scene(4, 2, seed + 500).unwrap());
        let err = match_points(&a[0], &b[1], RigidityThreshold::default(), TOL).unwrap_err();
        assert!(matches!(err, Error::NoConsistentAssignment { .. }), "seed {seed}: {err}");
    }
}

#[test]
fn independently_moving_point_is_not_rigid() {
    for seed in 0..100 {
        let scene = gen_scene(4, 2, seed).unwrap();
        let mut frames = render(&scene);
        let other = gen_scene(4, 2, seed + 7777).unwrap();
        // T follows the motion of an unrelated body
        let t = project(other.motions[1].apply(scene.body[3].1));
        let pts: Vec<_> = frames[1]
            .points()
            .iter()
            .map(|(l, p)| (l.clone(), if l == "T" { t } else { *p }))
            .collect();
        frames[1] = FrameObservation::new(pts).unwrap();
        let r = rigidity_score(pair(&frames), ["P", "Q", "R", "T"], TOL).unwrap();
        assert!(r > 1e3 * TOL.rel * scale(&frames), "seed {seed}: {r:e}");
    }
}

#[test]
fn planar_body_moving_in_plane_is_flagged() {
    let body = vec![
        ("P".to_string(), Point3::new(0.0, 0.0, 0.0)),
        ("Q".to_string(), Point3::new(1.0, 0.2, 0.0)),
        ("R".to_string(), Point3::new(0.3, 0.9, 0.0)),
        ("T".to_string(), Point3::new(0.7, 0.6, 0.0)),
    ];
    let spin = Matrix3::new(0.6, -0.8, 0.0, 0.8, 0.6, 0.0, 0.0, 0.0, 1.0);
    let motions = vec![
        RigidMotion::identity(),
        RigidMotion::new(spin, Vector2::new(0.3, -0.1)).unwrap(),
    ];
    let scene = Scene::new(body, motions, 0).unwrap();
    let frames = render(&scene);
    let err = rigidity_score(pair(&frames), ["P", "Q", "R", "T"], TOL).unwrap_err();
    assert!(err.is_degenerate(), "{err}");
}

#[test]
fn five_point_residual() {
    for seed in 0..200 {
        let scene = gen_scene(5, 2, seed).unwrap();
        let mut frames = render(&scene);
        let s = scale(&frames);
        let labels = ["P", "Q", "R", "T", "S"];
        let r = residual_5pt(pair(&frames), labels).unwrap();
        assert!(r < 1e-9 * s, "seed {seed}: {r:e}");

        let pts: Vec<_> = frames[1]
            .points()
            .iter()
            .map(|(l, p)| {
                let p = if l == "S" { Point2::new(p.x + 0.05 * s, p.y - 0.03 * s) } else { *p };
                (l.clone(), p)
            })
            .collect();
        frames[1] = FrameObservation::new(pts).unwrap();
        let off = residual_5pt(pair(&frames), labels).unwrap_or(f64::INFINITY);
        assert!(off > 1e3 * TOL.rel * s, "seed {seed}: {off:e}");
    }
}

#[test]
fn five_point_with_s_at_p() {
    let scene = gen_scene(4, 2, 9).unwrap();
    let frames: Vec<FrameObservation> = render(&scene)
        .into_iter()
        .map(|f| {
            let mut pts = f.points().to_vec();
            pts.push(("S".to_string(), f.get("P").unwrap()));
            FrameObservation::new(pts).unwrap()
        })
        .collect();
    match residual_5pt(pair(&frames), ["P", "Q", "R", "T", "S"]) {
        Ok(r) => assert!(r < 1e-12 * scale(&frames)),
        Err(e) => assert!(e.is_degenerate()),
    }
}

#[test]
fn five_and_four_point_verdicts_agree() {
    let labels = ["P", "Q", "R", "T", "S"];
    for seed in 0..100 {
        let scene = gen_scene(5, 2, seed).unwrap();
        let rigid = render(&scene);
        let mut moved = rigid.clone();
        let pts: Vec<_> = moved[1]
            .points()
            .iter()
            .map(|(l, p)| (l.clone(), if l == "S" { Point2::new(p.x + 0.04, p.y + 0.02) } else { *p }))
            .collect();
        moved[1] = FrameObservation::new(pts).unwrap();
        for frames in [&rigid, &moved] {
            let s = scale(frames);
            let five = residual_5pt(pair(frames), labels).unwrap() < 1e-6 * s;
            let subsets = [
                ["P", "Q", "R", "T"],
                ["P", "Q", "R", "S"],
                ["P", "Q", "T", "S"],
                ["P", "R", "T", "S"],
                ["Q", "R", "T", "S"],
            ];
            let four = subsets
                .iter()
                .all(|sub| rigidity_score(pair(frames), *sub, TOL).unwrap() < 1e-6 * s);
            assert_eq!(five, four, "seed {seed}");
        }
    }
}

#[test]
fn residuals_invariant_under_in_plane_motion_of_a_frame() {
    for seed in 0..50 {
        let scene = gen_scene(5, 2, seed).unwrap();
        let frames = render(&scene);
        let rot = Rotation2::new(0.3 + seed as f64 * 0.1);
        let moved = FrameObservation::new(
            frames[1]
                .points()
                .iter()
                .map(|(l, p)| {
                    let v = rot * p.to_vector() + Vector2::new(0.4, -1.2);
                    (l.clone(), Point2::new(v.x, v.y))
                })
                .collect(),
        )
        .unwrap();
        let other = vec![frames[0].clone(), moved];
        let s = scale(&frames);
        let a = rigidity_score(pair(&frames), ["P", "Q", "R", "T"], TOL).unwrap();
        let b = rigidity_score(pair(&other), ["P", "Q", "R", "T"], TOL).unwrap();
        assert!((a - b).abs() < 1e-9 * s);
        let a5 = residual_5pt(pair(&frames), ["P", "Q", "R", "T", "S"]).unwrap();
        let b5 = residual_5pt(pair(&other), ["P", "Q", "R", "T", "S"]).unwrap();
        assert!((a5 - b5).abs() < 1e-9 * s);
    }
}

#[test]
fn ambiguity_members_reproject_and_differ() {
    let angles: Vec<f64> = (1..=8).map(|k| -1.2 + 0.3 * k as f64).collect();
    for seed in 0..100 {
        let scene = gen_scene(5, 2, seed).unwrap();
        let frames = render(&scene);
        let s = scale(&frames);
        let base = interpretation_from_scene(&scene).unwrap();
        let family = ambiguity_family(pair(&frames), &base, &angles, TOL).unwrap();
        for sample in &family {
            let m = sample.member().expect("generic scenes have no parallel rays");
            let [r1, r2] = reprojection_residuals(pair(&frames), &m.points, &m.motion).unwrap();
            assert!(r1 < 1e-9 * s && r2 < 1e-9 * s, "seed {seed} angle {}", m.angle);
            if m.angle != 0.0 {
                assert!(max_displacement(&base.points, &m.points) > 1e-6 * s);
            }
        }
    }
}

#[test]
fn angle_zero_returns_base() {
    let scene = gen_scene(4, 2, 17).unwrap();
    let frames = render(&scene);
    let base = interpretation_from_scene(&scene).unwrap();
    let family = ambiguity_family(pair(&frames), &base, &[0.0], TOL).unwrap();
    let m = family[0].member().unwrap();
    assert!(max_displacement(&base.points, &m.points) < 1e-12);
}

#[test]
fn reconstructed_interpretation_reprojects() {
    for seed in 0..200 {
        let scene = gen_scene(5, 2, seed).unwrap();
        let frames = render(&scene);
        let s = scale(&frames);
        let base = interpretation_from_frames(pair(&frames), TOL).unwrap();
        let [r1, r2] = reprojection_residuals(pair(&frames), &base.points, &base.motion).unwrap();
        assert!(r1 < 1e-9 * s && r2 < 1e-9 * s, "seed {seed}: {r1:e} {r2:e}");
        let family = ambiguity_family(pair(&frames), &base, &[0.4, -0.7], TOL).unwrap();
        assert_eq!(family.len(), 2);
    }
}

/// The worked example: first-frame rays along the example's x axis, stored
/// here as our z axis, so example `(x, y, z)` is our `(y, z, x)`.
fn worked_example() -> (Vec<FrameObservation>, Interpretation, f64) {
    let theta = 60.47563_f64.to_radians();
    let (s, c) = theta.sin_cos();
    let rotation = Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c);
    let motion = RigidMotion::new(rotation, Vector2::zeros()).unwrap();
    let ours = |x: f64, y: f64, z: f64| Point3::new(y, z, x);
    let points = vec![
        ("P".to_string(), ours(0.0, 0.0, 0.0)),
        ("Q".to_string(), ours(3.46537, 2.0, -2.0)),
        ("R".to_string(), ours(0.68697, 5.0, 4.0)),
    ];
    let frames = vec![
        FrameObservation::new(points.iter().map(|(l, p)| (l.clone(), project(*p))).collect()).unwrap(),
        FrameObservation::new(
            points
                .iter()
                .map(|(l, p)| (l.clone(), project(motion.apply(*p))))
                .collect(),
        )
        .unwrap(),
    ];
    (frames, Interpretation { points, motion }, theta)
}

fn example_coords(p: Point3) -> [f64; 3] {
    [p.z, p.x, p.y]
}

#[test]
fn worked_example_reproduces_rotated_points() {
    let (frames, base, _) = worked_example();
    let phi = 31.4257819_f64.to_radians();
    let family = ambiguity_family(pair(&frames), &base, &[0.0, -phi], TOL).unwrap();

    let at = |k: usize, l: &str| {
        let m = family[k].member().unwrap();
        example_coords(m.points.iter().find(|(n, _)| n == l).unwrap().1)
    };
    let close = |a: [f64; 3], b: [f64; 3]| a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-4);
    assert!(close(at(0, "Q"), [3.46537, 2.0, -2.0]));
    assert!(close(at(0, "R"), [0.68697, 5.0, 4.0]));
    assert!(close(at(1, "Q"), [4.63902, 2.0, -2.0]), "{:?}", at(1, "Q"));
    assert!(close(at(1, "R"), [4.37296, 5.0, 4.0]), "{:?}", at(1, "R"));
    assert!(close(at(1, "P"), [0.0, 0.0, 0.0]));
}

#[test]
fn parallel_rays_are_skipped() {
    let (frames, base, theta) = worked_example();
    let family = ambiguity_family(pair(&frames), &base, &[theta, -theta], TOL).unwrap();
    assert_eq!(
        family
            .iter()
            .filter(|s| matches!(s, AmbiguitySample::Skipped { .. }))
            .count(),
        1
    );
}

#[test]
fn shared_viewing_direction_is_degenerate() {
    let scene = gen_scene(4, 2, 4).unwrap();
    let frames = render(&scene);
    let base = Interpretation {
        points: scene.body.clone(),
        motion: RigidMotion::identity(),
    };
    let same = vec![frames[0].clone(), frames[0].clone()];
    assert!(matches!(
        ambiguity_family(pair(&same), &base, &[0.3], TOL),
        Err(Error::DegenerateMotion)
    ));
    assert!(matches!(
        ambiguity_family(pair(&frames), &base, &[0.3], TOL),
        Err(Error::InvalidInput(_))
    ));
}
