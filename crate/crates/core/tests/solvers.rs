use orthosfm::geometry::{
    embed_depths, tetra_projection, triangle_projection, FrameObservation, Point3, TetraDistances,
    Tolerance, TriangleDistances,
};
use orthosfm::scene_sim::{gen_scene, render, scene_from_triangle, Scene};
use orthosfm::solvers::{eq1_residual, feasibility_check, solve_p3f3, solve_p3f4, solve_p4f3};
use orthosfm::Error;
use proptest::prelude::*;

const TOL: Tolerance = Tolerance::new(1e-9);

fn max_rel(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| ((x - y) / y).abs())
        .fold(0.0, f64::max)
}

fn triangles(frames: &[FrameObservation]) -> Vec<TriangleDistances> {
    frames
        .iter()
        .map(|f| triangle_projection(f, ["P", "Q", "R"]).unwrap())
        .collect()
}

fn tetras(frames: &[FrameObservation]) -> Vec<TetraDistances> {
    frames
        .iter()
        .map(|f| tetra_projection(f, ["P", "Q", "R", "T"]).unwrap())
        .collect()
}

// Written out independently of the library: depth differences satisfy
// dz_pq + dz_qr + dz_rp = 0 with dz² = true² − projected².
fn sign_free(l: [f64; 3], p: [f64; 3]) -> f64 {
    let [x, y, z] = l;
    let [a, b, c] = p;
    x * x + y * y + z * z - 2.0 * (x * y + x * z + y * z)
        + 2.0 * (-a + b + c) * x
        + 2.0 * (a - b + c) * y
        + 2.0 * (a + b - c) * z
        + (a * a + b * b + c * c - 2.0 * (a * b + a * c + b * c))
}

#[test]
fn sign_free_relation_vanishes_on_simulated_frames() {
    for seed in 0..50 {
        let scene = gen_scene(3, 3, seed).unwrap();
        let truth = scene.triangle();
        let scale4 = truth.max_sq().powi(2);
        for f in triangles(&render(&scene)) {
            let oracle = sign_free(truth.to_array(), f.to_array());
            assert!(oracle.abs() < 1e-12 * scale4);
            assert!((eq1_residual(&truth, &f) - oracle).abs() < 1e-12 * scale4);
        }
    }
}

#[test]
fn p3f3_round_trip() {
    for seed in 0..200 {
        let scene = gen_scene(3, 3, seed).unwrap();
        let tri = triangles(&render(&scene));
        let result = solve_p3f3(&[tri[0], tri[1], tri[2]], TOL).unwrap();
        assert!(!result.candidates.is_empty() && result.candidates.len() <= 2);
        let truth = scene.triangle().to_array();
        let hit = result
            .candidates
            .iter()
            .find(|c| max_rel(&c.lengths.to_array(), &truth) < 1e-9)
            .unwrap_or_else(|| panic!("seed {seed}: truth missing from {:?}", result.candidates));
        assert!(hit.feasible);
        assert!(hit.max_residual() < 1e-9);
    }
}

#[test]
fn p3f4_round_trip() {
    for seed in 0..200 {
        let scene = gen_scene(3, 4, seed).unwrap();
        let tri = triangles(&render(&scene));
        let result = solve_p3f4(&[tri[0], tri[1], tri[2], tri[3]], TOL).unwrap();
        assert_eq!(result.candidates.len(), 1);
        let c = &result.candidates[0];
        assert!(c.feasible);
        assert!(max_rel(&c.lengths.to_array(), &scene.triangle().to_array()) < 1e-9);
    }
}

#[test]
fn p4f3_round_trip() {
    for seed in 0..200 {
        let scene = gen_scene(4, 3, seed).unwrap();
        let tet = tetras(&render(&scene));
        let result = solve_p4f3(&[tet[0], tet[1], tet[2]], TOL).unwrap();
        assert_eq!(result.candidates.len(), 1);
        let c = &result.candidates[0];
        assert!(c.feasible);
        assert!(max_rel(&c.lengths.to_array(), &scene.tetra().to_array()) < 1e-9);
    }
}

#[test]
fn solvers_agree_on_shared_triangle() {
    for seed in 0..50 {
        let scene = gen_scene(4, 4, seed).unwrap();
        let frames = render(&scene);
        let tri = triangles(&frames);
        let tet = tetras(&frames);
        let linear = solve_p3f4(&[tri[0], tri[1], tri[2], tri[3]], TOL).unwrap();
        let quad = solve_p3f3(&[tri[0], tri[1], tri[2]], TOL).unwrap();
        let four = solve_p4f3(&[tet[0], tet[1], tet[2]], TOL).unwrap();
        let l = linear.candidates[0].lengths.to_array();
        let f = four.candidates[0].lengths.to_array();
        assert!(max_rel(&f[..3], &l) < 1e-8);
        assert!(quad
            .candidates
            .iter()
            .any(|c| max_rel(&c.lengths.to_array(), &l) < 1e-8));
    }
}

#[test]
fn golden_triangle_over_four_frames() {
    let truth = TriangleDistances::new(4.0, 9.0, 12.6878);
    let scene = scene_from_triangle(truth, 4, 1).unwrap();
    let tri = triangles(&render(&scene));
    let result = solve_p3f4(&[tri[0], tri[1], tri[2], tri[3]], TOL).unwrap();
    let got = result.candidates[0].lengths.to_array();
    assert!(max_rel(&got, &[4.0, 9.0, 12.6878]) < 1e-6, "{got:?}");
    assert!(feasibility_check(
        &got,
        &tri.iter().map(|t| t.to_array().to_vec()).collect::<Vec<_>>(),
        TOL
    ));
}

#[test]
fn identical_frames_are_singular() {
    let scene = gen_scene(4, 3, 5).unwrap();
    let frames = render(&scene);
    let tri = triangle_projection(&frames[0], ["P", "Q", "R"]).unwrap();
    assert!(matches!(
        solve_p3f4(&[tri; 4], TOL),
        Err(Error::SingularSystem { .. })
    ));
    let tet = tetra_projection(&frames[0], ["P", "Q", "R", "T"]).unwrap();
    assert!(matches!(
        solve_p4f3(&[tet; 3], TOL),
        Err(Error::SingularSystem { .. })
    ));
    assert!(solve_p3f3(&[tri; 3], TOL).unwrap_err().is_degenerate());
}

#[test]
fn depth_embedding_reproduces_scene_depths() {
    for seed in 0..100 {
        let scene = gen_scene(3, 3, seed).unwrap();
        let truth = scene.triangle();
        for (j, f) in render(&scene).iter().enumerate() {
            let posed = scene.posed(j);
            let z: Vec<f64> = posed.iter().map(|p| p.z).collect();
            let expected = [z[1] - z[0], z[2] - z[1], z[0] - z[2]];
            let proj = triangle_projection(f, ["P", "Q", "R"]).unwrap();
            let [d, mirrored] = embed_depths(&truth, &proj, TOL).unwrap();
            let diam = truth.max_sq().sqrt();
            let close = |got: [f64; 3]| got.iter().zip(expected).all(|(g, e)| (g - e).abs() < 1e-6 * diam);
            assert!(close(d.to_array()) || close(mirrored.to_array()), "seed {seed} frame {j}");
        }
    }
}

#[test]
fn embedding_rebuilds_true_lengths() {
    // lifting the images with the embedded depths gives back the body
    for seed in 0..100 {
        let scene = gen_scene(3, 2, seed).unwrap();
        let truth = scene.triangle();
        let f = &render(&scene)[1];
        let proj = triangle_projection(f, ["P", "Q", "R"]).unwrap();
        let [d, _] = embed_depths(&truth, &proj, TOL).unwrap();
        let z = d.depths();
        let pts: Vec<Point3> = ["P", "Q", "R"]
            .iter()
            .enumerate()
            .map(|(i, l)| {
                let p = f.get(l).unwrap();
                Point3::new(p.x, p.y, z[i])
            })
            .collect();
        let rebuilt = [
            pts[0].sq_dist(&pts[1]),
            pts[1].sq_dist(&pts[2]),
            pts[2].sq_dist(&pts[0]),
        ];
        assert!(max_rel(&rebuilt, &truth.to_array()) < 1e-7);
    }
}

fn scene_strategy() -> impl Strategy<Value = Scene> {
    any::<u64>().prop_map(|s| gen_scene(3, 4, s).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn p3f4_is_scale_equivariant(scene in scene_strategy(), k in 0.01f64..100.0) {
        let tri = triangles(&render(&scene));
        let base = solve_p3f4(&[tri[0], tri[1], tri[2], tri[3]], TOL).unwrap();
        let scaled: Vec<_> = tri.iter().map(|t| t.scaled(k * k)).collect();
        let r = solve_p3f4(&[scaled[0], scaled[1], scaled[2], scaled[3]], TOL).unwrap();
        let expect: Vec<f64> = base.candidates[0].lengths.to_array().iter().map(|v| v * k * k).collect();
        prop_assert!(max_rel(&r.candidates[0].lengths.to_array(), &expect) < 1e-9);
    }

    #[test]
    fn p3f3_candidates_follow_frame_order(scene in any::<u64>().prop_map(|s| gen_scene(3, 3, s).unwrap())) {
        let tri = triangles(&render(&scene));
        let a = solve_p3f3(&[tri[0], tri[1], tri[2]], TOL).unwrap();
        let b = solve_p3f3(&[tri[2], tri[0], tri[1]], TOL).unwrap();
        prop_assert_eq!(a.candidates.len(), b.candidates.len());
        for c in &a.candidates {
            prop_assert!(b.candidates.iter().any(|d| max_rel(&d.lengths.to_array(), &c.lengths.to_array()) < 1e-8));
        }
    }

    #[test]
    fn p3f4_covariant_under_relabeling(scene in scene_strategy()) {
        // P,Q,R → Q,R,P rotates the edge order PQ,QR,RP
        let frames = render(&scene);
        let base: Vec<_> = triangles(&frames);
        let rot: Vec<_> = frames.iter().map(|f| triangle_projection(f, ["Q", "R", "P"]).unwrap()).collect();
        let a = solve_p3f4(&[base[0], base[1], base[2], base[3]], TOL).unwrap().candidates[0].lengths.to_array();
        let b = solve_p3f4(&[rot[0], rot[1], rot[2], rot[3]], TOL).unwrap().candidates[0].lengths.to_array();
        prop_assert!(max_rel(&b, &[a[1], a[2], a[0]]) < 1e-9);
    }
}
