#![allow(dead_code)]

use posecomp_core::pose::{joint, Keypoint, NUM_KEYPOINTS};
use posecomp_core::{Point, Pose, PoseScene};
use rand::Rng;

pub const WIDTH: u32 = 1000;
pub const HEIGHT: u32 = 800;

/// A random upright figure with every joint valid.
pub fn random_pose<R: Rng>(rng: &mut R) -> Pose {
    let neck = Point::new(
        rng.random_range(150.0..850.0),
        rng.random_range(150.0..550.0),
    );
    let s = rng.random_range(0.6..1.4);
    let facing: f64 = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    let tilt: f64 = rng.random_range(-0.6..0.6);
    let at = |dx: f64, dy: f64| Keypoint::new(neck.x + s * dx, neck.y + s * dy, 0.9);
    let mut k = [Keypoint::new(0.0, 0.0, 0.0); NUM_KEYPOINTS];
    k[joint::NECK] = at(0.0, 0.0);
    k[joint::NOSE] = at(
        40.0 * tilt.sin() * facing + 15.0 * facing,
        -40.0 * tilt.cos(),
    );
    k[joint::R_EYE] = at(20.0 * facing - 6.0, -48.0);
    k[joint::L_EYE] = at(20.0 * facing + 6.0, -48.0);
    k[joint::R_EAR] = at(-10.0, -44.0);
    k[joint::L_EAR] = at(10.0, -44.0);
    k[joint::R_SHOULDER] = at(-40.0, 5.0);
    k[joint::L_SHOULDER] = at(40.0, 5.0);
    k[joint::R_ELBOW] = at(-50.0, 70.0);
    k[joint::L_ELBOW] = at(50.0, 70.0);
    k[joint::R_WRIST] = at(-45.0, 130.0);
    k[joint::L_WRIST] = at(45.0, 130.0);
    let lean = rng.random_range(-30.0..30.0);
    k[joint::R_HIP] = at(-25.0 + lean * 0.3, 150.0);
    k[joint::L_HIP] = at(25.0 + lean * 0.3, 150.0);
    k[joint::R_KNEE] = at(-28.0 + lean * 0.6, 230.0);
    k[joint::L_KNEE] = at(28.0 + lean * 0.6, 230.0);
    k[joint::R_ANKLE] = at(-30.0 + lean, 310.0);
    k[joint::L_ANKLE] = at(30.0 + lean, 310.0);
    Pose::new(k)
}

pub fn random_scene<R: Rng>(rng: &mut R, id: &str, max_poses: usize) -> PoseScene {
    let n = rng.random_range(1..=max_poses);
    PoseScene {
        image_id: id.to_owned(),
        width: WIDTH,
        height: HEIGHT,
        class_label: None,
        poses: (0..n).map(|_| random_pose(rng)).collect(),
    }
}

pub fn map_scene(
    scene: &PoseScene,
    width: u32,
    height: u32,
    f: impl Fn(Point) -> Point,
) -> PoseScene {
    PoseScene {
        width,
        height,
        poses: scene.poses.iter().map(|p| p.map_points(&f)).collect(),
        ..scene.clone()
    }
}

pub fn close(a: Point, b: Point, tol: f64) -> bool {
    (a.x - b.x).abs() <= tol && (a.y - b.y).abs() <= tol
}

/// Shoelace area, independent of the library's geometry module.
pub fn shoelace(poly: &[Point]) -> f64 {
    let n = poly.len();
    let mut s = 0.0;
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        s += a.x * b.y - b.x * a.y;
    }
    s.abs() / 2.0
}

/// Minimum total weight over all maximum-cardinality matchings.
pub fn brute_force_min_matching(w: &[Vec<f64>]) -> f64 {
    fn go(w: &[Vec<f64>], row: usize, used: &mut Vec<bool>, take: usize) -> f64 {
        if take == 0 {
            return 0.0;
        }
        if w.len() - row < take {
            return f64::INFINITY;
        }
        let mut best = go(w, row + 1, used, take);
        for j in 0..used.len() {
            if !used[j] {
                used[j] = true;
                best = best.min(w[row][j] + go(w, row + 1, used, take - 1));
                used[j] = false;
            }
        }
        best
    }
    let nt = w.first().map_or(0, |r| r.len());
    let take = w.len().min(nt);
    go(w, 0, &mut vec![false; nt], take)
}

/// Every permutation of `0..n`.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for i in 0..=p.len() {
            let mut q = p.clone();
            q.insert(i, n - 1);
            out.push(q);
        }
    }
    out
}
