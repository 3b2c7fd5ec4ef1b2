//! Composition canvas extraction: poselines, corrected bisection rays, view
//! cones, action regions and global action lines for one scene.

use crate::error::{Error, Result};
use crate::geometry::{self, Point, Rect};
use crate::pose::{derive_joints, DerivedJoints, PoseScene, DEFAULT_CONF_THRESHOLD};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const CANVAS_VERSION: u32 = 1;

/// Pieces of cone overlap smaller than this (px²) are discarded.
pub const AREA_EPSILON: f64 = 1e-6;

/// Below this norm the nose and hip directions are considered antipodal.
const DEGENERATE_BISECTOR: f64 = 1e-6;

/// Hyperparameters that affect canvas extraction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExtractParams {
    /// Correction angle in degrees.
    pub rho: f64,
    /// Cone opening angle in degrees.
    pub omega: f64,
    /// Cone length in units of neck–nose length.
    pub sigma: f64,
    /// Cone near-edge half-width in units of neck–nose length.
    pub eta: f64,
    pub poseline_fallback: bool,
    pub bisection_fallback: bool,
    pub fallback_multiplier: f64,
    pub conf_threshold: f64,
}

impl Default for ExtractParams {
    /// Baseline constraints: ρ = 20°, ω = 80°, σ = 10, η = 0, fallbacks off.
    fn default() -> Self {
        Self {
            rho: 20.0,
            omega: 80.0,
            sigma: 10.0,
            eta: 0.0,
            poseline_fallback: false,
            bisection_fallback: false,
            fallback_multiplier: 3.0,
            conf_threshold: DEFAULT_CONF_THRESHOLD,
        }
    }
}

impl ExtractParams {
    /// Baseline with poseline fallback enabled, the best untuned setting.
    pub fn untuned_best() -> Self {
        Self {
            poseline_fallback: true,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.rho,
            self.omega,
            self.sigma,
            self.eta,
            self.fallback_multiplier,
            self.conf_threshold,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::Parameter("extract parameters must be finite".into()));
        }
        if !(0.0..180.0).contains(&self.omega) {
            return Err(Error::Parameter(format!(
                "omega must be in [0, 180), got {}",
                self.omega
            )));
        }
        if self.sigma <= 0.0 {
            return Err(Error::Parameter(format!(
                "sigma must be positive, got {}",
                self.sigma
            )));
        }
        if self.eta < 0.0 {
            return Err(Error::Parameter(format!(
                "eta must be non-negative, got {}",
                self.eta
            )));
        }
        if self.fallback_multiplier <= 0.0 {
            return Err(Error::Parameter(format!(
                "fallback multiplier must be positive, got {}",
                self.fallback_multiplier
            )));
        }
        Ok(())
    }

    /// Stable hex digest identifying these parameters.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_vec(self).expect("params serialize");
        hex::encode(Sha256::digest(&json))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Poseline {
    pub top: Point,
    pub bottom: Point,
    pub is_fallback: bool,
    pub pose_index: usize,
}

impl Poseline {
    pub fn midpoint(&self) -> Point {
        self.top.midpoint(self.bottom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BisectionRay {
    pub origin: Point,
    pub direction: Point,
    pub pose_index: usize,
    /// Built from the perpendicular fallback rather than the bisector.
    #[serde(default)]
    pub is_fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConePolygon {
    /// Counter-clockwise; 3 vertices when the near edge collapses to the apex.
    pub vertices: Vec<Point>,
    pub pose_index: usize,
    pub axis: BisectionRay,
    pub length: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionRegion {
    pub polygons: Vec<Vec<Point>>,
    pub center: Point,
    /// Sorted, deduplicated pose indices.
    pub contributing_poses: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionLine {
    pub p1: Point,
    pub p2: Point,
    pub region_index: usize,
    /// The contributing directions cancelled and a horizontal line was used.
    #[serde(default)]
    pub horizontal_fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositionCanvas {
    pub canvas_version: u32,
    pub image_id: String,
    pub width: u32,
    pub height: u32,
    pub poselines: Vec<Poseline>,
    pub rays: Vec<BisectionRay>,
    pub cones: Vec<ConePolygon>,
    pub regions: Vec<ActionRegion>,
    pub action_lines: Vec<ActionLine>,
    /// Bounding box over all valid keypoints of all poses.
    pub keypoint_bbox: Option<Rect>,
    pub params: ExtractParams,
}

impl CompositionCanvas {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let c: CompositionCanvas = serde_json::from_str(s)?;
        if c.canvas_version != CANVAS_VERSION {
            return Err(Error::IncompatibleVersion {
                found: c.canvas_version,
                supported: CANVAS_VERSION,
            });
        }
        Ok(c)
    }

    pub fn image_rect(&self) -> Rect {
        Rect::new(
            Point::new(0.0, 0.0),
            Point::new(self.width as f64, self.height as f64),
        )
    }
}

pub fn make_poseline(
    joints: &DerivedJoints,
    params: &ExtractParams,
    pose_index: usize,
) -> Option<Poseline> {
    if let Some(bottom) = joints.ankle_mid {
        let top = joints.nose.or(joints.neck)?;
        return (top != bottom).then_some(Poseline {
            top,
            bottom,
            is_fallback: false,
            pose_index,
        });
    }
    if !params.poseline_fallback {
        return None;
    }
    let (nose, neck) = joints.nose.zip(joints.neck)?;
    let bottom = neck + (neck - nose) * params.fallback_multiplier;
    (nose != bottom).then_some(Poseline {
        top: nose,
        bottom,
        is_fallback: true,
        pose_index,
    })
}

pub fn make_bisection_ray(
    joints: &DerivedJoints,
    params: &ExtractParams,
    pose_index: usize,
) -> Option<BisectionRay> {
    let (nose, neck, hip) = (joints.nose?, joints.neck?, joints.mid_hip?);
    let to_nose = (nose - neck).unit()?;
    let to_hip = (hip - neck).unit()?;
    let sum = to_nose + to_hip;
    if sum.norm() < DEGENERATE_BISECTOR {
        if !params.bisection_fallback {
            return None;
        }
        let perp = to_hip.perp();
        let offset = nose.x - neck.x;
        let toward = if offset.abs() > 1e-9 {
            offset.signum()
        } else {
            1.0
        };
        let direction = if perp.x * toward > 0.0 || (perp.x == 0.0 && perp.y < 0.0) {
            perp
        } else {
            -perp
        };
        return Some(BisectionRay {
            origin: neck,
            direction,
            pose_index,
            is_fallback: true,
        });
    }
    let raw = sum.unit()?;
    // rotate towards the nose direction
    let turn = raw.cross(to_nose).signum();
    let direction = if raw.cross(to_nose) == 0.0 {
        raw
    } else {
        raw.rotate(turn * params.rho.to_radians()).unit()?
    };
    Some(BisectionRay {
        origin: neck,
        direction,
        pose_index,
        is_fallback: false,
    })
}

pub fn build_cone(
    ray: &BisectionRay,
    neck_nose_len: f64,
    params: &ExtractParams,
) -> Result<ConePolygon> {
    if neck_nose_len.is_nan() || neck_nose_len <= 0.0 || neck_nose_len.is_infinite() {
        return Err(Error::Parameter(format!(
            "neck-nose length must be positive, got {neck_nose_len}"
        )));
    }
    let length = params.sigma * neck_nose_len;
    let near = params.eta * neck_nose_len;
    let far = near + length * (params.omega.to_radians() * 0.5).tan();
    let d = ray.direction;
    let n = d.perp();
    let o = ray.origin;
    let end = o + d * length;
    let vertices = if near == 0.0 {
        vec![o, end - n * far, end + n * far]
    } else {
        vec![o - n * near, end - n * far, end + n * far, o + n * near]
    };
    Ok(ConePolygon {
        vertices,
        pose_index: ray.pose_index,
        axis: *ray,
        length,
    })
}

struct Piece {
    polygon: Vec<Point>,
    poses: [usize; 2],
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Pairwise cone intersections merged into action regions.
pub fn intersect_cones(cones: &[ConePolygon]) -> Vec<ActionRegion> {
    let mut pieces = Vec::new();
    for (i, a) in cones.iter().enumerate() {
        for b in &cones[i + 1..] {
            if a.pose_index == b.pose_index {
                continue;
            }
            let poly = geometry::clip_convex(&a.vertices, &b.vertices);
            if geometry::area(&poly) >= AREA_EPSILON {
                pieces.push(Piece {
                    polygon: poly,
                    poses: [a.pose_index, b.pose_index],
                });
            }
        }
    }

    let mut parent: Vec<usize> = (0..pieces.len()).collect();
    for i in 0..pieces.len() {
        for j in i + 1..pieces.len() {
            if find(&mut parent, i) == find(&mut parent, j) {
                continue;
            }
            let overlap = geometry::clip_convex(&pieces[i].polygon, &pieces[j].polygon);
            if geometry::area(&overlap) >= AREA_EPSILON {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                parent[ri.max(rj)] = ri.min(rj);
            }
        }
    }

    // groups ordered by their first piece
    let mut groups: Vec<(usize, Vec<usize>)> = Vec::new();
    for i in 0..pieces.len() {
        let root = find(&mut parent, i);
        match groups.iter_mut().find(|(r, _)| *r == root) {
            Some((_, members)) => members.push(i),
            None => groups.push((root, vec![i])),
        }
    }

    groups
        .into_iter()
        .map(|(_, members)| {
            let mut weighted = Point::default();
            let mut total = 0.0;
            let mut poses = Vec::new();
            let mut polygons = Vec::with_capacity(members.len());
            for &m in &members {
                let piece = &pieces[m];
                let a = geometry::area(&piece.polygon);
                weighted = weighted + geometry::centroid(&piece.polygon) * a;
                total += a;
                poses.extend_from_slice(&piece.poses);
                polygons.push(piece.polygon.clone());
            }
            poses.sort_unstable();
            poses.dedup();
            ActionRegion {
                polygons,
                center: weighted * (1.0 / total),
                contributing_poses: poses,
            }
        })
        .collect()
}

/// Folds a direction into the half-plane of angles `[0°, 180°)`.
fn fold_axial(d: Point) -> Point {
    if d.y < 0.0 || (d.y == 0.0 && d.x < 0.0) {
        -d
    } else {
        d
    }
}

/// One line per region through its center along the mean contributing ray
/// direction, clipped to the image. Regions whose line misses the image
/// entirely produce no line.
pub fn make_action_lines(
    regions: &[ActionRegion],
    rays: &[BisectionRay],
    width: u32,
    height: u32,
) -> Vec<ActionLine> {
    let rect = Rect::new(
        Point::new(0.0, 0.0),
        Point::new(width as f64, height as f64),
    );
    let mut lines = Vec::with_capacity(regions.len());
    for (region_index, region) in regions.iter().enumerate() {
        let sum = rays
            .iter()
            .filter(|r| region.contributing_poses.contains(&r.pose_index))
            .fold(Point::default(), |acc, r| acc + fold_axial(r.direction));
        let (dir, horizontal_fallback) = match sum.unit() {
            Some(d) => (d, false),
            None => (Point::new(1.0, 0.0), true),
        };
        let Some((a, b)) = geometry::clip_line_to_rect(region.center, dir, &rect) else {
            continue;
        };
        let (p1, p2) = if (a.x, a.y) <= (b.x, b.y) {
            (a, b)
        } else {
            (b, a)
        };
        lines.push(ActionLine {
            p1,
            p2,
            region_index,
            horizontal_fallback,
        });
    }
    lines
}

/// Full canvas extraction for one scene.
pub fn extract_canvas(scene: &PoseScene, params: &ExtractParams) -> CompositionCanvas {
    let mut poselines = Vec::new();
    let mut rays = Vec::new();
    let mut cones = Vec::new();
    for (idx, pose) in scene.poses.iter().enumerate() {
        let joints = derive_joints(pose, params.conf_threshold);
        if let Some(pl) = make_poseline(&joints, params, idx) {
            poselines.push(pl);
        }
        if let Some(ray) = make_bisection_ray(&joints, params, idx) {
            if let Some(cone) = joints
                .neck_nose_len
                .and_then(|len| build_cone(&ray, len, params).ok())
            {
                cones.push(cone);
            }
            rays.push(ray);
        }
    }
    let regions = intersect_cones(&cones);
    let action_lines = make_action_lines(&regions, &rays, scene.width, scene.height);
    let keypoint_bbox = Rect::bounding(
        scene
            .poses
            .iter()
            .flat_map(|p| p.valid_points(params.conf_threshold)),
    );
    CompositionCanvas {
        canvas_version: CANVAS_VERSION,
        image_id: scene.image_id.clone(),
        width: scene.width,
        height: scene.height,
        poselines,
        rays,
        cones,
        regions,
        action_lines,
        keypoint_bbox,
        params: *params,
    }
}
