//! Persistent corpus index and ranked queries against it.
//!
//! File layout: magic `ICCX`, format version as little-endian `u32`, then the
//! gzip-compressed JSON payload. Gzip's CRC trailer doubles as the integrity
//! check for truncated files.

use crate::canvas::{extract_canvas, CompositionCanvas, ExtractParams};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::latp::{latp_distance, LatpOptions};
use crate::normalize::{normalize, NormMode, NormalizedCanvas};
use crate::pose::PoseScene;
use crate::similarity::{
    combine, compare_canvases, rank, CombineMode, SimilarityParams, SimilarityRecord, SortMethod,
};
use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

pub const INDEX_MAGIC: &[u8; 4] = b"ICCX";
pub const INDEX_VERSION: u32 = 1;

/// Normalized poselines for every mode, computed once at build time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormCache {
    pub none: NormalizedCanvas,
    pub image: NormalizedCanvas,
    pub bbox: NormalizedCanvas,
    pub ar: NormalizedCanvas,
}

impl NormCache {
    /// Canvases that cannot be normalized in a mode (degenerate keypoint box)
    /// get a single empty set and never match anything.
    pub fn build(canvas: &CompositionCanvas) -> NormCache {
        let get = |mode| {
            normalize(canvas, mode)
                .unwrap_or_else(|_| NormalizedCanvas::empty(&canvas.image_id, mode))
        };
        NormCache {
            none: get(NormMode::None),
            image: get(NormMode::Image),
            bbox: get(NormMode::Bbox),
            ar: get(NormMode::ActionRegion),
        }
    }

    pub fn get(&self, mode: NormMode) -> &NormalizedCanvas {
        match mode {
            NormMode::None => &self.none,
            NormMode::Image => &self.image,
            NormMode::Bbox => &self.bbox,
            NormMode::ActionRegion => &self.ar,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub scene: PoseScene,
    pub canvas: CompositionCanvas,
    pub normalized: NormCache,
    pub features: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureMetric {
    Euclidean,
    /// `1 − cos`, so 0 is most similar and the range is `[0, 2]`.
    NegCosine,
}

impl FeatureMetric {
    pub fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            FeatureMetric::Euclidean => a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt(),
            FeatureMetric::NegCosine => {
                let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
                let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
                let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
                let cos = if na > 0.0 && nb > 0.0 {
                    dot / (na * nb)
                } else {
                    0.0
                };
                (1.0 - cos).clamp(0.0, 2.0)
            }
        }
    }
}

impl fmt::Display for FeatureMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeatureMetric::Euclidean => "euclidean",
            FeatureMetric::NegCosine => "neg_cosine",
        })
    }
}

impl FromStr for FeatureMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euclidean" => Ok(FeatureMetric::Euclidean),
            "neg_cosine" => Ok(FeatureMetric::NegCosine),
            other => Err(Error::Parameter(format!(
                "unknown feature metric `{other}`"
            ))),
        }
    }
}

/// Immutable snapshot of an extracted corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusIndex {
    pub version: u32,
    pub params: ExtractParams,
    pub params_fingerprint: String,
    pub entries: BTreeMap<String, IndexEntry>,
    pub feature_metric: Option<FeatureMetric>,
}

pub fn build_index(
    scenes: &[PoseScene],
    params: &ExtractParams,
    exec: Exec,
) -> Result<CorpusIndex> {
    params.validate()?;
    let mut seen = BTreeSet::new();
    for s in scenes {
        if !seen.insert(s.image_id.as_str()) {
            return Err(Error::DuplicateId(s.image_id.clone()));
        }
    }
    let built = exec.map(scenes, |scene| {
        let canvas = extract_canvas(scene, params);
        let normalized = NormCache::build(&canvas);
        IndexEntry {
            scene: scene.clone(),
            canvas,
            normalized,
            features: None,
        }
    });
    Ok(CorpusIndex {
        version: INDEX_VERSION,
        params: *params,
        params_fingerprint: params.fingerprint(),
        entries: built
            .into_iter()
            .map(|e| (e.scene.image_id.clone(), e))
            .collect(),
        feature_metric: None,
    })
}

impl CorpusIndex {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn labels(&self) -> BTreeMap<&str, Option<&str>> {
        self.entries
            .iter()
            .map(|(id, e)| (id.as_str(), e.scene.class_label.as_deref()))
            .collect()
    }

    pub fn get(&self, id: &str) -> Result<&IndexEntry> {
        self.entries
            .get(id)
            .ok_or_else(|| Error::NotFound(id.to_owned()))
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        out.extend_from_slice(INDEX_MAGIC);
        out.extend_from_slice(&self.version.to_le_bytes());
        let mut enc = GzEncoder::new(out, Compression::default());
        serde_json::to_writer(&mut enc, self)?;
        Ok(enc.finish()?)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<CorpusIndex> {
        if bytes.len() < 8 || &bytes[..4] != INDEX_MAGIC {
            return Err(Error::Integrity("missing ICCX header".into()));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
        if version != INDEX_VERSION {
            return Err(Error::IncompatibleVersion {
                found: version,
                supported: INDEX_VERSION,
            });
        }
        let mut json = Vec::new();
        GzDecoder::new(&bytes[8..])
            .read_to_end(&mut json)
            .map_err(|e| Error::Integrity(format!("payload: {e}")))?;
        let index: CorpusIndex = serde_json::from_slice(&json)
            .map_err(|e| Error::Integrity(format!("payload json: {e}")))?;
        if index.version != version {
            return Err(Error::Integrity(
                "header and payload versions differ".into(),
            ));
        }
        if index.params_fingerprint != index.params.fingerprint() {
            return Err(Error::Integrity("parameter fingerprint mismatch".into()));
        }
        Ok(index)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let bytes = self.to_bytes()?;
        let mut f = std::fs::File::create(path)?;
        f.write_all(&bytes)?;
        f.sync_all()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<CorpusIndex> {
        CorpusIndex::from_bytes(&std::fs::read(path)?)
    }

    /// Returns a new snapshot with the given feature vectors attached.
    pub fn attach_features(
        &self,
        table: &BTreeMap<String, Vec<f64>>,
        metric: FeatureMetric,
    ) -> Result<CorpusIndex> {
        let mut dim = self
            .entries
            .values()
            .find_map(|e| e.features.as_ref().map(Vec::len));
        for (id, v) in table {
            if !self.entries.contains_key(id) {
                return Err(Error::NotFound(id.clone()));
            }
            match dim {
                Some(d) if d != v.len() => {
                    return Err(Error::DimensionMismatch {
                        id: id.clone(),
                        expected: d,
                        found: v.len(),
                    })
                }
                None => dim = Some(v.len()),
                _ => {}
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::Parameter(format!(
                    "feature vector for `{id}` is not finite"
                )));
            }
        }
        let mut out = self.clone();
        for (id, v) in table {
            if let Some(e) = out.entries.get_mut(id) {
                e.features = Some(v.clone());
            }
        }
        out.feature_metric = Some(metric);
        Ok(out)
    }
}

/// Parses a feature file: a JSON object mapping image id to a float array.
pub fn parse_feature_file(bytes: &[u8]) -> Result<BTreeMap<String, Vec<f64>>> {
    Ok(serde_json::from_slice(bytes)?)
}

/// Retrieval settings shared by the CLI, the HTTP API and the harness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QueryParams {
    pub norm: NormMode,
    pub beta: Option<f64>,
    pub sort: SortMethod,
    pub w_a: f64,
    pub combine: CombineMode,
    /// When set, rank by the pose-distance baseline instead.
    pub baseline: Option<LatpOptions>,
}

impl Default for QueryParams {
    fn default() -> Self {
        Self {
            norm: NormMode::ActionRegion,
            beta: None,
            sort: SortMethod::CrDesc,
            w_a: 0.5,
            combine: CombineMode::None,
            baseline: None,
        }
    }
}

impl QueryParams {
    pub fn similarity(&self) -> SimilarityParams {
        SimilarityParams {
            beta: self.beta,
            sort_method: self.sort,
            w_a: self.w_a,
            combine_mode: self.combine,
        }
    }

    pub fn effective_sort(&self) -> SortMethod {
        if self.baseline.is_some() {
            SortMethod::LatpAsc
        } else {
            self.sort
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.similarity().validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryRequest {
    /// Corpus member to query with.
    #[serde(default)]
    pub query_id: Option<String>,
    /// Inline scene, extracted with the index parameters.
    #[serde(default)]
    pub scene: Option<PoseScene>,
    /// Feature vector for an inline scene when fusion is on.
    #[serde(default)]
    pub features: Option<Vec<f64>>,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default)]
    pub params: QueryParams,
}

fn default_k() -> usize {
    10
}

impl QueryRequest {
    pub fn by_id(id: impl Into<String>, k: usize, params: QueryParams) -> Self {
        Self {
            query_id: Some(id.into()),
            scene: None,
            features: None,
            k,
            params,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedResults {
    pub query_id: String,
    pub k: usize,
    pub results: Vec<SimilarityRecord>,
    pub params: QueryParams,
}

/// A query resolved against an index: its scene, normalized poselines and
/// optional features.
struct ResolvedQuery<'a> {
    id: String,
    scene: std::borrow::Cow<'a, PoseScene>,
    normalized: std::borrow::Cow<'a, NormalizedCanvas>,
    features: Option<std::borrow::Cow<'a, [f64]>>,
}

impl CorpusIndex {
    fn resolve<'a>(&'a self, req: &'a QueryRequest) -> Result<ResolvedQuery<'a>> {
        use std::borrow::Cow;
        match (&req.query_id, &req.scene) {
            (_, Some(scene)) => {
                let canvas = extract_canvas(scene, &self.params);
                let normalized = normalize(&canvas, req.params.norm)
                    .unwrap_or_else(|_| NormalizedCanvas::empty(&canvas.image_id, req.params.norm));
                Ok(ResolvedQuery {
                    id: scene.image_id.clone(),
                    scene: Cow::Borrowed(scene),
                    normalized: Cow::Owned(normalized),
                    features: req.features.as_deref().map(Cow::Borrowed),
                })
            }
            (Some(id), None) => {
                let e = self.get(id)?;
                Ok(ResolvedQuery {
                    id: id.clone(),
                    scene: Cow::Borrowed(&e.scene),
                    normalized: Cow::Borrowed(e.normalized.get(req.params.norm)),
                    features: e.features.as_deref().map(Cow::Borrowed),
                })
            }
            (None, None) => Err(Error::Parameter("query needs `query_id` or `scene`".into())),
        }
    }

    /// Scores the query against every other entry and returns the full ranking.
    pub fn rank_all(&self, req: &QueryRequest, exec: Exec) -> Result<Vec<SimilarityRecord>> {
        req.params.validate()?;
        let q = self.resolve(req)?;
        let params = req.params.similarity();
        let fuse = params.combine_mode != CombineMode::None;
        let metric = self.feature_metric.unwrap_or(FeatureMetric::Euclidean);
        if fuse && q.features.is_none() {
            return Err(Error::MissingFeatures(q.id.clone()));
        }
        let targets: Vec<&IndexEntry> = self
            .entries
            .iter()
            .filter(|(id, _)| **id != q.id)
            .map(|(_, e)| e)
            .collect();
        let records = exec.try_map(&targets, |t| -> Result<SimilarityRecord> {
            let mut rec =
                compare_canvases(&q.normalized, t.normalized.get(req.params.norm), &params)?;
            rec.query_id = q.id.clone();
            if fuse {
                let tf = t
                    .features
                    .as_deref()
                    .ok_or_else(|| Error::MissingFeatures(t.scene.image_id.clone()))?;
                let qf = q.features.as_deref().expect("checked above");
                if qf.len() != tf.len() {
                    return Err(Error::DimensionMismatch {
                        id: t.scene.image_id.clone(),
                        expected: qf.len(),
                        found: tf.len(),
                    });
                }
                rec = combine(&rec, metric.distance(qf, tf), params.w_a)?;
            }
            if let Some(opts) = &req.params.baseline {
                rec.latp_distance = Some(latp_distance(&q.scene, &t.scene, opts));
            }
            Ok(rec)
        })?;
        rank(records, req.params.effective_sort())
    }

    pub fn query(&self, req: &QueryRequest, exec: Exec) -> Result<RankedResults> {
        if req.k == 0 {
            return Err(Error::Parameter("k must be at least 1".into()));
        }
        if self.is_empty() {
            return Err(Error::Parameter("index is empty".into()));
        }
        let mut results = self.rank_all(req, exec)?;
        results.truncate(req.k);
        let query_id = req
            .query_id
            .clone()
            .or_else(|| req.scene.as_ref().map(|s| s.image_id.clone()))
            .unwrap_or_default();
        Ok(RankedResults {
            query_id,
            k: req.k,
            results,
            params: req.params,
        })
    }
}
