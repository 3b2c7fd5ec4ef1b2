//! Keypoint file ingestion and anatomical anchor derivation.
//!
//! Poses use the 18-joint COCO ordering; see [`joint`] for indices.

use crate::error::{Error, Result};
use crate::geometry::Point;
use serde::{Deserialize, Serialize};

/// Default validity cutoff on keypoint confidence.
pub const DEFAULT_CONF_THRESHOLD: f64 = 0.1;

pub const NUM_KEYPOINTS: usize = 18;

/// COCO-18 joint indices.
pub mod joint {
    pub const NOSE: usize = 0;
    pub const NECK: usize = 1;
    pub const R_SHOULDER: usize = 2;
    pub const R_ELBOW: usize = 3;
    pub const R_WRIST: usize = 4;
    pub const L_SHOULDER: usize = 5;
    pub const L_ELBOW: usize = 6;
    pub const L_WRIST: usize = 7;
    pub const R_HIP: usize = 8;
    pub const R_KNEE: usize = 9;
    pub const R_ANKLE: usize = 10;
    pub const L_HIP: usize = 11;
    pub const L_KNEE: usize = 12;
    pub const L_ANKLE: usize = 13;
    pub const R_EYE: usize = 14;
    pub const L_EYE: usize = 15;
    pub const R_EAR: usize = 16;
    pub const L_EAR: usize = 17;

    /// Limb pairs used when drawing skeletons.
    pub const LIMBS: [(usize, usize); 17] = [
        (NECK, NOSE),
        (NECK, R_SHOULDER),
        (R_SHOULDER, R_ELBOW),
        (R_ELBOW, R_WRIST),
        (NECK, L_SHOULDER),
        (L_SHOULDER, L_ELBOW),
        (L_ELBOW, L_WRIST),
        (NECK, R_HIP),
        (R_HIP, R_KNEE),
        (R_KNEE, R_ANKLE),
        (NECK, L_HIP),
        (L_HIP, L_KNEE),
        (L_KNEE, L_ANKLE),
        (NOSE, R_EYE),
        (R_EYE, R_EAR),
        (NOSE, L_EYE),
        (L_EYE, L_EAR),
    ];
}

/// A single detected keypoint, serialized as `[x, y, confidence]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Keypoint {
    pub x: f64,
    pub y: f64,
    pub confidence: f64,
}

impl From<[f64; 3]> for Keypoint {
    fn from([x, y, confidence]: [f64; 3]) -> Self {
        Self { x, y, confidence }
    }
}

impl From<Keypoint> for [f64; 3] {
    fn from(k: Keypoint) -> Self {
        [k.x, k.y, k.confidence]
    }
}

impl Keypoint {
    pub const fn new(x: f64, y: f64, confidence: f64) -> Self {
        Self { x, y, confidence }
    }

    pub fn point(&self) -> Point {
        Point::new(self.x, self.y)
    }

    pub fn is_valid(&self, conf_threshold: f64) -> bool {
        self.confidence > conf_threshold
    }
}

/// One detected figure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub keypoints: [Keypoint; NUM_KEYPOINTS],
}

impl Pose {
    pub fn new(keypoints: [Keypoint; NUM_KEYPOINTS]) -> Self {
        Self { keypoints }
    }

    /// Position of keypoint `idx` if its confidence clears the threshold.
    pub fn valid_point(&self, idx: usize, conf_threshold: f64) -> Option<Point> {
        let k = &self.keypoints[idx];
        k.is_valid(conf_threshold).then(|| k.point())
    }

    pub fn valid_points(&self, conf_threshold: f64) -> impl Iterator<Item = Point> + '_ {
        self.keypoints
            .iter()
            .filter(move |k| k.is_valid(conf_threshold))
            .map(Keypoint::point)
    }

    /// Applies `f` to every keypoint position, leaving confidences untouched.
    pub fn map_points(&self, f: impl Fn(Point) -> Point) -> Pose {
        let mut out = self.clone();
        for k in &mut out.keypoints {
            let p = f(k.point());
            k.x = p.x;
            k.y = p.y;
        }
        out
    }
}

/// All poses detected in one image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseScene {
    pub image_id: String,
    pub width: u32,
    pub height: u32,
    #[serde(default)]
    pub class_label: Option<String>,
    pub poses: Vec<Pose>,
}

impl PoseScene {
    /// Uniformly rescales keypoints and dimensions so the longer image side
    /// equals `target`. Dimensions are rounded to whole pixels.
    pub fn rescaled_longest_side(&self, target: f64) -> PoseScene {
        let longest = self.width.max(self.height) as f64;
        let s = target / longest;
        if s == 1.0 {
            return self.clone();
        }
        PoseScene {
            image_id: self.image_id.clone(),
            width: ((self.width as f64 * s).round() as u32).max(1),
            height: ((self.height as f64 * s).round() as u32).max(1),
            class_label: self.class_label.clone(),
            poses: self.poses.iter().map(|p| p.map_points(|q| q * s)).collect(),
        }
    }
}

#[derive(Deserialize)]
struct RawScene {
    image_id: String,
    width: i64,
    height: i64,
    #[serde(default)]
    class_label: Option<String>,
    #[serde(default)]
    poses: Vec<RawPose>,
}

#[derive(Deserialize)]
struct RawPose {
    keypoints: Vec<[f64; 3]>,
}

fn schema(image_id: &str, message: impl Into<String>) -> Error {
    Error::Schema {
        image_id: image_id.to_owned(),
        message: message.into(),
    }
}

impl TryFrom<RawScene> for PoseScene {
    type Error = Error;

    fn try_from(raw: RawScene) -> Result<Self> {
        let id = raw.image_id.as_str();
        let width = u32::try_from(raw.width)
            .ok()
            .filter(|&w| w > 0)
            .ok_or_else(|| schema(id, format!("width must be positive, got {}", raw.width)))?;
        let height = u32::try_from(raw.height)
            .ok()
            .filter(|&h| h > 0)
            .ok_or_else(|| schema(id, format!("height must be positive, got {}", raw.height)))?;
        let mut poses = Vec::with_capacity(raw.poses.len());
        for (pi, rp) in raw.poses.into_iter().enumerate() {
            if rp.keypoints.len() != NUM_KEYPOINTS {
                return Err(schema(
                    id,
                    format!(
                        "pose {pi} has {} keypoints, expected {NUM_KEYPOINTS}",
                        rp.keypoints.len()
                    ),
                ));
            }
            let mut kps = [Keypoint::default(); NUM_KEYPOINTS];
            for (ki, (slot, [x, y, c])) in kps.iter_mut().zip(rp.keypoints).enumerate() {
                if !(x.is_finite() && y.is_finite() && c.is_finite()) {
                    return Err(schema(id, format!("pose {pi} keypoint {ki} is not finite")));
                }
                if !(0.0..=1.0).contains(&c) {
                    return Err(schema(
                        id,
                        format!("pose {pi} keypoint {ki} confidence {c} outside [0, 1]"),
                    ));
                }
                *slot = Keypoint::new(x, y, c);
            }
            poses.push(Pose::new(kps));
        }
        Ok(PoseScene {
            image_id: raw.image_id,
            width,
            height,
            class_label: raw.class_label,
            poses,
        })
    }
}

/// Parses a keypoint file: a JSON array of scene objects.
pub fn parse_keypoint_file(bytes: &[u8]) -> Result<Vec<PoseScene>> {
    let raw: Vec<RawScene> = serde_json::from_slice(bytes).map_err(|e| Error::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    raw.into_iter().map(PoseScene::try_from).collect()
}

pub fn serialize_keypoint_file(scenes: &[PoseScene]) -> Result<Vec<u8>> {
    Ok(serde_json::to_vec_pretty(scenes)?)
}

/// Anchor points derived from the valid keypoints of one pose.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DerivedJoints {
    pub nose: Option<Point>,
    pub neck: Option<Point>,
    pub mid_hip: Option<Point>,
    pub ankle_mid: Option<Point>,
    pub neck_nose_len: Option<f64>,
    /// `mid_hip` came from a single valid hip.
    pub single_hip: bool,
    /// `ankle_mid` came from a single valid ankle.
    pub single_ankle: bool,
}

fn pair_mid(a: Option<Point>, b: Option<Point>) -> (Option<Point>, bool) {
    match (a, b) {
        (Some(a), Some(b)) => (Some(a.midpoint(b)), false),
        (Some(p), None) | (None, Some(p)) => (Some(p), true),
        (None, None) => (None, false),
    }
}

pub fn derive_joints(pose: &Pose, conf_threshold: f64) -> DerivedJoints {
    let at = |i| pose.valid_point(i, conf_threshold);
    let nose = at(joint::NOSE);
    let neck = at(joint::NECK);
    let (mid_hip, single_hip) = pair_mid(at(joint::R_HIP), at(joint::L_HIP));
    let (ankle_mid, single_ankle) = pair_mid(at(joint::R_ANKLE), at(joint::L_ANKLE));
    let neck_nose_len = nose.zip(neck).map(|(a, b)| a.distance(b));
    DerivedJoints {
        nose,
        neck,
        mid_hip,
        ankle_mid,
        neck_nose_len,
        single_hip,
        single_ankle,
    }
}
