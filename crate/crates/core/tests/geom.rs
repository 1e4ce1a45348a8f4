mod common;

use fmse_core::calib::CalibrationGraph;
use fmse_core::fixtures;
use fmse_core::geom::{
    convex_hull_3d, deskew_point, distort_point, ego_state_at, hidden_point_removal_points, project_points,
    rectification_map, redistort_point, undistort_point, Radius,
};
use fmse_core::model::{Agent, CameraIntrinsics, EgoMotionState, InsRecord};
use nalgebra::{Matrix3, Vector3};
use proptest::prelude::*;
use rand::Rng;

use common::geometry::{homogeneous, hpr_oracle, hull_vertices_oracle, project_oracle};

fn ball<R: Rng>(rng: &mut R, n: usize, radius: f64) -> Vec<Vector3<f64>> {
    (0..n)
        .map(|_| loop {
            let p = Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            if p.norm() <= 1.0 {
                break p * radius;
            }
        })
        .collect()
}

fn check_hull(points: &[Vector3<f64>]) {
    let hull = convex_hull_3d(points).unwrap();
    assert_eq!(hull.vertices, hull_vertices_oracle(points));
    let mut edges = std::collections::HashSet::new();
    for f in &hull.facets {
        for k in 0..3 {
            assert!(edges.insert((f[k], f[(k + 1) % 3])));
        }
    }
    for &(a, b) in &edges {
        assert!(edges.contains(&(b, a)), "hull surface is open");
    }
    for f in &hull.facets {
        let n = (points[f[1]] - points[f[0]]).cross(&(points[f[2]] - points[f[0]]));
        for p in points {
            assert!(n.dot(&(p - points[f[0]])) <= 1e-9 * n.norm().max(1.0), "point outside facet");
        }
    }
}

#[test]
fn hull_matches_oracle_on_random_balls() {
    let mut rng = fixtures::rng(21);
    for n in [4usize, 5, 9, 17, 40, 80] {
        check_hull(&ball(&mut rng, n, 10.0));
    }
}

#[test]
fn hull_matches_oracle_on_lattice_points() {
    // Small integer grids are full of coplanar and collinear subsets.
    let mut rng = fixtures::rng(22);
    for _ in 0..25 {
        let n = rng.gen_range(6..40);
        let pts: Vec<_> = (0..n)
            .map(|_| Vector3::new(rng.gen_range(0..4) as f64, rng.gen_range(0..4) as f64, rng.gen_range(0..3) as f64))
            .collect();
        if convex_hull_3d(&pts).is_ok() {
            check_hull(&pts);
        }
    }
}

#[test]
fn hpr_matches_oracle() {
    let mut rng = fixtures::rng(23);
    for _ in 0..40 {
        let n = rng.gen_range(1..30);
        let pts = ball(&mut rng, n, 20.0);
        let c = Vector3::new(rng.gen_range(-30.0..30.0), rng.gen_range(-30.0..30.0), rng.gen_range(-5.0..5.0));
        let got = hidden_point_removal_points(&pts, &c, Radius::Auto).unwrap();
        if got.degenerate {
            continue;
        }
        assert_eq!(got.visible, hpr_oracle(&pts, &c, got.radius));
    }
}

#[test]
fn nearest_point_on_each_ray_is_visible() {
    let mut rng = fixtures::rng(24);
    for _ in 0..20 {
        let c = Vector3::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
        let mut pts = Vec::new();
        let mut rays = Vec::new();
        // well-separated directions: the vertices of an icosahedron, slightly jittered
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        for &(a, b) in &[(1.0, phi), (-1.0, phi), (1.0, -phi), (-1.0, -phi)] {
            for dir in [Vector3::new(0.0, a, b), Vector3::new(a, b, 0.0), Vector3::new(b, 0.0, a)] {
                let jitter = Vector3::new(rng.gen_range(-0.05..0.05), rng.gen_range(-0.05..0.05), rng.gen_range(-0.05..0.05));
                let d = (dir.normalize() + jitter).normalize();
                let first = pts.len();
                let mut dists: Vec<f64> = (0..rng.gen_range(1..4)).map(|_| rng.gen_range(1.0..30.0)).collect();
                dists.sort_by(f64::total_cmp);
                dists.dedup();
                for r in dists {
                    pts.push(c + d * r);
                }
                rays.push(first..pts.len());
            }
        }
        let res = hidden_point_removal_points(&pts, &c, Radius::Scaled(1e4)).unwrap();
        for ray in rays {
            assert!(res.visible.contains(&ray.start), "nearest point on a ray hidden");
            for far in ray.start + 1..ray.end {
                assert!(!res.visible.contains(&far), "point behind another on its ray visible");
            }
        }
    }
}

#[test]
fn projection_matches_oracle_and_chains() {
    let meta = fixtures::meta();
    let graph = CalibrationGraph::load_from_meta(&meta).unwrap();
    let lidar = meta.root_of(Agent::Vehicle).unwrap().clone();
    let cam = meta.find_by_name("FRONT_LEFT")[0].clone();
    let mid = meta.find_by_name("LIDAR_LEFT")[0].clone();
    let k = meta.intrinsics[&cam].clone();
    let direct = graph.transform_between(&cam, &lidar).unwrap();
    let chained = graph
        .transform_between(&cam, &mid)
        .unwrap()
        .compose(&graph.transform_between(&mid, &lidar).unwrap());
    let mut rng = fixtures::rng(25);
    let pts: Vec<_> = (0..2000)
        .map(|_| Vector3::new(rng.gen_range(-50.0..50.0), rng.gen_range(-50.0..50.0), rng.gen_range(-3.0..5.0)))
        .collect();
    let a = project_points(&pts, &direct, &k, false);
    let b = project_points(&pts, &chained, &k, false);
    let o = project_oracle(&pts, &homogeneous(&direct), &k);
    assert!(!a.is_empty());
    assert_eq!(a.len(), o.len());
    for ((p, q), r) in a.iter().zip(&b).zip(&o) {
        assert_eq!((p.source_index, q.source_index), (r.0, r.0));
        assert!((p.u - r.1).abs() < 1e-9 && (p.v - r.2).abs() < 1e-9);
        assert!((p.u - q.u).abs() < 1e-6 && (p.v - q.v).abs() < 1e-6);
        assert!(p.depth > 0.0);
    }
}

#[test]
fn rectifying_identity_keeps_pixels() {
    let k = CameraIntrinsics::ideal(1746.1, 1746.1, 192, 120);
    let map = rectification_map(&k, &k, &Matrix3::identity());
    for (i, [x, y]) in map.coords().iter().enumerate() {
        assert!((x - (i % 192) as f64).abs() < 1e-9 && (y - (i / 192) as f64).abs() < 1e-9);
    }
}

fn supported_coefficients() -> impl Strategy<Value = [f64; 5]> {
    (-0.5..0.5f64, -0.1..0.1f64, -0.01..0.01f64, -0.01..0.01f64, -0.01..0.01f64).prop_map(|(a, b, c, d, e)| [a, b, c, d, e])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn distortion_round_trip(d in supported_coefficients(), r in 0.0..0.7f64, theta in 0.0..std::f64::consts::TAU) {
        let mut k = CameraIntrinsics::ideal(1000.0, 1000.0, 1920, 1200);
        k.distortion = d;
        let p = [r * theta.cos(), r * theta.sin()];
        let back = undistort_point(&k, distort_point(&k, p)).unwrap();
        prop_assert!((back[0] - p[0]).abs() < 1e-8 && (back[1] - p[1]).abs() < 1e-8);
    }

    #[test]
    fn deskew_inverts(
        v in prop::array::uniform3(-30.0..30.0f64),
        w in prop::array::uniform3(-2.0..2.0f64),
        p in prop::array::uniform3(-100.0..100.0f64),
        dt in 0.0..0.1f64,
    ) {
        let p = Vector3::from(p);
        let m = EgoMotionState::new(Vector3::from(v), Vector3::from(w)).unwrap();
        prop_assert!((redistort_point(&deskew_point(&p, &m, dt), &m, dt) - p).norm() < 1e-9);
        // negated pure twists undo each other
        let trans = EgoMotionState::new(Vector3::from(v), Vector3::zeros()).unwrap();
        let trans_neg = EgoMotionState::new(-Vector3::from(v), Vector3::zeros()).unwrap();
        prop_assert!((deskew_point(&deskew_point(&p, &trans, dt), &trans_neg, dt) - p).norm() < 1e-9);
        let rot = EgoMotionState::new(Vector3::zeros(), Vector3::from(w)).unwrap();
        let rot_neg = EgoMotionState::new(Vector3::zeros(), -Vector3::from(w)).unwrap();
        prop_assert!((deskew_point(&deskew_point(&p, &rot, dt), &rot_neg, dt) - p).norm() < 1e-9);
    }

    #[test]
    fn ego_state_stays_between_samples(
        va in prop::array::uniform3(-20.0..20.0f64),
        vb in prop::array::uniform3(-20.0..20.0f64),
        gap in 1u64..10_000_000,
        frac in 0.0..=1.0f64,
    ) {
        let mut a = InsRecord::at_rest(1_000, 0.0, 0.0, 0.0);
        a.velocity = va;
        let mut b = InsRecord::at_rest(1_000 + gap, 0.0, 0.0, 0.0);
        b.velocity = vb;
        let t = 1_000 + (gap as f64 * frac) as u64;
        let s = ego_state_at(&[a, b], t).unwrap();
        for i in 0..3 {
            let (lo, hi) = (va[i].min(vb[i]), va[i].max(vb[i]));
            prop_assert!(s.linear_velocity[i] >= lo - 1e-12 && s.linear_velocity[i] <= hi + 1e-12);
        }
    }

    #[test]
    fn hpr_returns_sorted_subset(seed in any::<u64>(), n in 1usize..40) {
        let mut rng = fixtures::rng(seed);
        let pts = ball(&mut rng, n, 15.0);
        let c = Vector3::new(0.0, 0.0, 20.0);
        let r = hidden_point_removal_points(&pts, &c, Radius::Auto).unwrap();
        prop_assert!(!r.visible.is_empty());
        prop_assert!(r.visible.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(r.visible.iter().all(|&i| i < n));
    }

    #[test]
    fn projection_never_emits_points_behind(seed in any::<u64>()) {
        let mut rng = fixtures::rng(seed);
        let t = common::geometry::random_transform(&mut rng, 5.0);
        let k = CameraIntrinsics::ideal(800.0, 800.0, 640, 480);
        let pts: Vec<_> = (0..200)
            .map(|_| Vector3::new(rng.gen_range(-20.0..20.0), rng.gen_range(-20.0..20.0), rng.gen_range(-20.0..20.0)))
            .collect();
        for p in project_points(&pts, &t, &k, true) {
            prop_assert!(t.apply(&pts[p.source_index]).z > 0.0);
            prop_assert!(p.u >= 0.0 && p.u < 640.0 && p.v >= 0.0 && p.v < 480.0);
        }
    }
}
