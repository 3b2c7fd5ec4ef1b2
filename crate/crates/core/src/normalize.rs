//! Poseline normalization for cross-image comparison.

use crate::canvas::CompositionCanvas;
use crate::error::{Error, Result};
use crate::geometry::Point;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NormMode {
    #[serde(rename = "none")]
    None,
    #[serde(rename = "image")]
    Image,
    #[serde(rename = "bbox")]
    Bbox,
    #[serde(rename = "ar")]
    ActionRegion,
}

impl NormMode {
    pub const ALL: [NormMode; 4] = [
        NormMode::None,
        NormMode::Image,
        NormMode::Bbox,
        NormMode::ActionRegion,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            NormMode::None => "none",
            NormMode::Image => "image",
            NormMode::Bbox => "bbox",
            NormMode::ActionRegion => "ar",
        }
    }

    /// Modes whose output lives in `[0, 1]` rather than pixels.
    pub fn is_min_max(self) -> bool {
        matches!(self, NormMode::Image | NormMode::Bbox)
    }

    /// Filter threshold matching 150px at 1000px image scale.
    pub fn default_beta(self) -> f64 {
        if self.is_min_max() {
            0.15
        } else {
            150.0
        }
    }
}

impl fmt::Display for NormMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NormMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(NormMode::None),
            "image" => Ok(NormMode::Image),
            "bbox" => Ok(NormMode::Bbox),
            "ar" | "action_region" => Ok(NormMode::ActionRegion),
            other => Err(Error::Parameter(format!("unknown norm mode `{other}`"))),
        }
    }
}

/// A normalized poseline (top, bottom).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub top: Point,
    pub bottom: Point,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PoselineSet {
    pub poselines: Vec<Segment>,
    /// Point subtracted from every coordinate, when applicable.
    pub frame_tag: Option<Point>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedCanvas {
    pub image_id: String,
    pub sets: Vec<PoselineSet>,
    pub mode: NormMode,
}

impl NormalizedCanvas {
    /// A single empty set; used when a canvas cannot be normalized.
    pub fn empty(image_id: &str, mode: NormMode) -> Self {
        Self {
            image_id: image_id.to_owned(),
            sets: vec![PoselineSet::default()],
            mode,
        }
    }
}

fn mapped(canvas: &CompositionCanvas, f: impl Fn(Point) -> Point) -> Vec<Segment> {
    canvas
        .poselines
        .iter()
        .map(|p| Segment {
            top: f(p.top),
            bottom: f(p.bottom),
        })
        .collect()
}

pub fn normalize(canvas: &CompositionCanvas, mode: NormMode) -> Result<NormalizedCanvas> {
    let sets = match mode {
        NormMode::None => vec![PoselineSet {
            poselines: mapped(canvas, |p| p),
            frame_tag: None,
        }],
        NormMode::Image => {
            if canvas.width == 0 || canvas.height == 0 {
                return Err(Error::Parameter(format!(
                    "image `{}` has non-positive dimensions",
                    canvas.image_id
                )));
            }
            let (w, h) = (canvas.width as f64, canvas.height as f64);
            vec![PoselineSet {
                poselines: mapped(canvas, |p| Point::new(p.x / w, p.y / h)),
                frame_tag: None,
            }]
        }
        NormMode::Bbox => {
            let bb = canvas
                .keypoint_bbox
                .filter(|b| b.width() > 0.0 && b.height() > 0.0)
                .ok_or_else(|| Error::DegenerateBbox(canvas.image_id.clone()))?;
            let (bw, bh) = (bb.width(), bb.height());
            vec![PoselineSet {
                poselines: mapped(canvas, |p| {
                    Point::new((p.x - bb.min.x) / bw, (p.y - bb.min.y) / bh)
                }),
                frame_tag: Some(bb.min),
            }]
        }
        NormMode::ActionRegion if canvas.regions.is_empty() => {
            // no interaction: center on the mean poseline midpoint instead
            let frame = if canvas.poselines.is_empty() {
                None
            } else {
                let n = canvas.poselines.len() as f64;
                let sum = canvas
                    .poselines
                    .iter()
                    .fold(Point::default(), |acc, p| acc + p.midpoint());
                Some(sum * (1.0 / n))
            };
            let c = frame.unwrap_or_default();
            vec![PoselineSet {
                poselines: mapped(canvas, |p| p - c),
                frame_tag: frame,
            }]
        }
        NormMode::ActionRegion => canvas
            .regions
            .iter()
            .map(|r| PoselineSet {
                poselines: mapped(canvas, |p| p - r.center),
                frame_tag: Some(r.center),
            })
            .collect(),
    };
    Ok(NormalizedCanvas {
        image_id: canvas.image_id.clone(),
        sets,
        mode,
    })
}
