//! Explainable compositional image retrieval from human-pose keypoints.
//!
//! Each artwork is abstracted into a composition canvas (poselines, view
//! cones, action regions and action lines) built from its detected poses.
//! Canvases are normalized, compared by greedy bipartite poseline matching
//! and ranked. The crate also carries the evaluation harness, a pose-distance
//! baseline, SVG overlays and a persistent corpus index.

pub mod canvas;
pub mod error;
pub mod eval;
pub mod exec;
pub mod geometry;
pub mod index;
pub mod latp;
pub mod normalize;
pub mod overlay;
pub mod pose;
pub mod similarity;

pub use canvas::{extract_canvas, CompositionCanvas, ExtractParams};
pub use error::{Error, Result};
pub use exec::Exec;
pub use geometry::Point;
pub use index::{build_index, CorpusIndex, QueryParams, QueryRequest, RankedResults};
pub use normalize::{normalize, NormMode, NormalizedCanvas};
pub use pose::{parse_keypoint_file, Pose, PoseScene};
pub use similarity::{compare_canvases, rank, SimilarityParams, SimilarityRecord, SortMethod};
