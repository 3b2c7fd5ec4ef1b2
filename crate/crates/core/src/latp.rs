//! Pose-distance baseline: neck-normalized keypoint distances between the
//! figures of two scenes, with optional RANSAC inlier verification.
//!
//! The verification step is a stand-in; the original baseline's procedure is
//! not public.

use crate::geometry::Point;
use crate::pose::{derive_joints, joint, Pose, PoseScene, DEFAULT_CONF_THRESHOLD, NUM_KEYPOINTS};
use crate::similarity::greedy_match_by;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeckNormalizedPose {
    pub keypoints: [Option<Point>; NUM_KEYPOINTS],
}

impl NeckNormalizedPose {
    /// Translates again by the (already zero) neck; a no-op for valid input.
    pub fn renormalize(&self) -> Option<NeckNormalizedPose> {
        let neck = self.keypoints[joint::NECK]?;
        Some(NeckNormalizedPose {
            keypoints: self.keypoints.map(|k| k.map(|p| p - neck)),
        })
    }
}

/// Subtracts the neck from every valid keypoint; `None` without a valid neck.
pub fn neck_normalize(pose: &Pose, conf_threshold: f64) -> Option<NeckNormalizedPose> {
    let neck = pose.valid_point(joint::NECK, conf_threshold)?;
    let mut keypoints = [None; NUM_KEYPOINTS];
    for (i, slot) in keypoints.iter_mut().enumerate() {
        *slot = pose.valid_point(i, conf_threshold).map(|p| p - neck);
    }
    keypoints[joint::NECK] = Some(Point::new(0.0, 0.0));
    Some(NeckNormalizedPose { keypoints })
}

fn common(a: &NeckNormalizedPose, b: &NeckNormalizedPose) -> Vec<(Point, Point)> {
    a.keypoints
        .iter()
        .zip(&b.keypoints)
        .filter_map(|(x, y)| x.zip(*y))
        .collect()
}

fn mean_distance(pairs: &[(Point, Point)]) -> f64 {
    if pairs.is_empty() {
        return f64::INFINITY;
    }
    pairs.iter().map(|(a, b)| a.distance(*b)).sum::<f64>() / pairs.len() as f64
}

/// Mean Euclidean distance over keypoints valid in both poses; +∞ when they
/// share none.
pub fn pose_pair_distance(a: &NeckNormalizedPose, b: &NeckNormalizedPose) -> f64 {
    mean_distance(&common(a, b))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LatpMode {
    #[default]
    Min,
    Bipart,
}

impl fmt::Display for LatpMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LatpMode::Min => "min",
            LatpMode::Bipart => "bipart",
        })
    }
}

impl FromStr for LatpMode {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "min" => Ok(LatpMode::Min),
            "bipart" => Ok(LatpMode::Bipart),
            other => Err(crate::Error::Parameter(format!(
                "unknown LATP mode `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RansacParams {
    pub iterations: usize,
    /// Pixels at 1000px image scale.
    pub inlier_threshold: f64,
    pub min_inliers: usize,
    pub seed: u64,
}

impl Default for RansacParams {
    fn default() -> Self {
        Self {
            iterations: 200,
            inlier_threshold: 10.0,
            min_inliers: 6,
            seed: 0x1a7f,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LatpOptions {
    pub mode: LatpMode,
    pub robust: bool,
    pub ransac: RansacParams,
    /// Divide by the neck–mid-hip length after translation. Off by default.
    pub torso_scale: bool,
    pub conf_threshold: f64,
}

impl Default for LatpOptions {
    fn default() -> Self {
        Self {
            mode: LatpMode::Min,
            robust: false,
            ransac: RansacParams::default(),
            torso_scale: false,
            conf_threshold: DEFAULT_CONF_THRESHOLD,
        }
    }
}

fn prepare(scene: &PoseScene, opts: &LatpOptions) -> Vec<NeckNormalizedPose> {
    scene
        .poses
        .iter()
        .filter_map(|pose| {
            let mut n = neck_normalize(pose, opts.conf_threshold)?;
            if opts.torso_scale {
                let j = derive_joints(pose, opts.conf_threshold);
                if let Some(len) = j
                    .mid_hip
                    .zip(j.neck)
                    .map(|(h, n)| h.distance(n))
                    .filter(|&l| l > 0.0)
                {
                    n.keypoints = n.keypoints.map(|k| k.map(|p| p * (1.0 / len)));
                }
            }
            Some(n)
        })
        .collect()
}

/// Similarity transform `z ↦ scale_rot · z + shift` in complex form.
#[derive(Clone, Copy)]
struct Similarity {
    a: Point,
    shift: Point,
}

impl Similarity {
    /// Maps `src0 → dst0` and `src1 → dst1`.
    fn from_pairs(src0: Point, dst0: Point, src1: Point, dst1: Point) -> Option<Similarity> {
        let ds = src1 - src0;
        let dd = dst1 - dst0;
        let den = ds.dot(ds);
        if den < 1e-12 {
            return None;
        }
        // dd / ds as complex division
        let a = Point::new(
            (dd.x * ds.x + dd.y * ds.y) / den,
            (dd.y * ds.x - dd.x * ds.y) / den,
        );
        let shift = dst0
            - Similarity {
                a,
                shift: Point::default(),
            }
            .apply(src0);
        Some(Similarity { a, shift })
    }

    fn apply(&self, p: Point) -> Point {
        Point::new(
            self.a.x * p.x - self.a.y * p.y,
            self.a.x * p.y + self.a.y * p.x,
        ) + self.shift
    }
}

fn robust_distance(
    q: &NeckNormalizedPose,
    t: &NeckNormalizedPose,
    ransac: &RansacParams,
    sub_seed: u64,
) -> f64 {
    let pairs = common(q, t);
    if pairs.len() < 2 || pairs.len() < ransac.min_inliers {
        return f64::INFINITY;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(sub_seed);
    let mut best: Vec<usize> = Vec::new();
    for _ in 0..ransac.iterations {
        let i = rng.random_range(0..pairs.len());
        let mut j = rng.random_range(0..pairs.len() - 1);
        if j >= i {
            j += 1;
        }
        let Some(tf) = Similarity::from_pairs(pairs[i].1, pairs[i].0, pairs[j].1, pairs[j].0)
        else {
            continue;
        };
        let inliers: Vec<usize> = (0..pairs.len())
            .filter(|&k| tf.apply(pairs[k].1).distance(pairs[k].0) < ransac.inlier_threshold)
            .collect();
        if inliers.len() > best.len() {
            best = inliers;
            if best.len() == pairs.len() {
                break;
            }
        }
    }
    if best.len() < ransac.min_inliers {
        return f64::INFINITY;
    }
    let kept: Vec<_> = best.iter().map(|&k| pairs[k]).collect();
    mean_distance(&kept)
}

fn pair_seed(base: u64, i: usize, j: usize) -> u64 {
    base.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ ((i as u64) << 32 | j as u64)
}

/// Scene-to-scene baseline distance; +∞ when either side has no usable pose.
pub fn latp_distance(query: &PoseScene, target: &PoseScene, opts: &LatpOptions) -> f64 {
    let qs = prepare(query, opts);
    let ts = prepare(target, opts);
    if qs.is_empty() || ts.is_empty() {
        return f64::INFINITY;
    }
    let dist: Vec<Vec<f64>> = qs
        .iter()
        .map(|q| ts.iter().map(|t| pose_pair_distance(q, t)).collect())
        .collect();
    let verify = |i: usize, j: usize| {
        if opts.robust {
            robust_distance(
                &qs[i],
                &ts[j],
                &opts.ransac,
                pair_seed(opts.ransac.seed, i, j),
            )
        } else {
            dist[i][j]
        }
    };
    match opts.mode {
        LatpMode::Min => {
            let mut best = (f64::INFINITY, None);
            for (i, row) in dist.iter().enumerate() {
                for (j, &d) in row.iter().enumerate() {
                    if d < best.0 {
                        best = (d, Some((i, j)));
                    }
                }
            }
            best.1.map_or(f64::INFINITY, |(i, j)| verify(i, j))
        }
        LatpMode::Bipart => {
            let m = greedy_match_by(qs.len(), ts.len(), |i, j| dist[i][j]);
            if m.pairs.is_empty() {
                return f64::INFINITY;
            }
            m.pairs.iter().map(|&(i, j)| verify(i, j)).sum::<f64>() / m.pairs.len() as f64
        }
    }
}
