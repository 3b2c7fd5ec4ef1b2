//! Compositional similarity between normalized canvases.
//!
//! Two images are compared by greedily matching their poselines on a
//! complete bipartite graph, filtering matched pairs by the threshold β and
//! summarizing the survivors as hit ratio, normalized mean distance and their
//! product (the combined ratio).

use crate::error::{Error, Result};
use crate::normalize::{NormMode, NormalizedCanvas, Segment};
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SortMethod {
    /// r_cr ↓, r_hr ↓, r_nmd ↓
    CrDesc,
    /// r_hr ↓, r_nmd ↓
    HrDesc,
    /// r_nmd ↓, r_hr ↓
    NmdDesc,
    /// r_hr ↓, mean matched distance ↑
    HrMdLex,
    Combi1Asc,
    Combi2Asc,
    AAsc,
    /// Pose-distance baseline, ascending.
    LatpAsc,
}

impl SortMethod {
    pub const ALL: [SortMethod; 8] = [
        SortMethod::CrDesc,
        SortMethod::HrDesc,
        SortMethod::NmdDesc,
        SortMethod::HrMdLex,
        SortMethod::Combi1Asc,
        SortMethod::Combi2Asc,
        SortMethod::AAsc,
        SortMethod::LatpAsc,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SortMethod::CrDesc => "cr_desc",
            SortMethod::HrDesc => "hr_desc",
            SortMethod::NmdDesc => "nmd_desc",
            SortMethod::HrMdLex => "hr_md_lex",
            SortMethod::Combi1Asc => "combi1_asc",
            SortMethod::Combi2Asc => "combi2_asc",
            SortMethod::AAsc => "a_asc",
            SortMethod::LatpAsc => "latp_asc",
        }
    }
}

impl fmt::Display for SortMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SortMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SortMethod::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Parameter(format!("unknown sort method `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CombineMode {
    Multiplicative,
    Additive,
    #[default]
    None,
}

impl CombineMode {
    pub const ALL: [CombineMode; 3] = [
        CombineMode::None,
        CombineMode::Multiplicative,
        CombineMode::Additive,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CombineMode::Multiplicative => "multiplicative",
            CombineMode::Additive => "additive",
            CombineMode::None => "none",
        }
    }
}

impl fmt::Display for CombineMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CombineMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "multiplicative" => Ok(CombineMode::Multiplicative),
            "additive" => Ok(CombineMode::Additive),
            "none" => Ok(CombineMode::None),
            other => Err(Error::Parameter(format!("unknown combine mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimilarityParams {
    /// Filter threshold; `None` picks the default for the active norm mode.
    pub beta: Option<f64>,
    pub sort_method: SortMethod,
    pub w_a: f64,
    pub combine_mode: CombineMode,
}

impl Default for SimilarityParams {
    fn default() -> Self {
        Self {
            beta: None,
            sort_method: SortMethod::CrDesc,
            w_a: 0.5,
            combine_mode: CombineMode::None,
        }
    }
}

impl SimilarityParams {
    pub fn beta_for(&self, mode: NormMode) -> f64 {
        self.beta.unwrap_or_else(|| mode.default_beta())
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(b) = self.beta {
            if !(b > 0.0 && b.is_finite()) {
                return Err(Error::Parameter(format!("beta must be positive, got {b}")));
            }
        }
        if !(0.0..=1.0).contains(&self.w_a) {
            return Err(Error::Parameter(format!(
                "w_a must be in [0, 1], got {}",
                self.w_a
            )));
        }
        Ok(())
    }
}

/// Accepted edges of the greedy matching, in acceptance order.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MatchList {
    pub distances: Vec<f64>,
    pub pairs: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityRecord {
    pub query_id: String,
    pub target_id: String,
    pub r_hr: f64,
    pub r_nmd: f64,
    pub r_cr: f64,
    /// Mean distance of the matches that survived the β filter.
    pub r_md: Option<f64>,
    pub r_a: Option<f64>,
    pub r_combi1: Option<f64>,
    pub r_combi2: Option<f64>,
    pub latp_distance: Option<f64>,
    pub matched: MatchList,
    pub chosen_set_pair: Option<(usize, usize)>,
    pub beta: f64,
}

/// Mean of the endpoint distances between two poselines.
pub fn poseline_distance(q: &Segment, t: &Segment) -> f64 {
    (q.top.distance(t.top) + q.bottom.distance(t.bottom)) / 2.0
}

/// Greedy minimum-weight bipartite matching on a complete `nq × nt` graph.
///
/// Edges are scanned once in ascending (weight, query index, target index)
/// order and accepted when both endpoints are still free. Edges whose weight
/// is not finite are never accepted.
pub fn greedy_match_by(nq: usize, nt: usize, weight: impl Fn(usize, usize) -> f64) -> MatchList {
    let mut edges = Vec::with_capacity(nq * nt);
    for i in 0..nq {
        for j in 0..nt {
            edges.push((weight(i, j), i, j));
        }
    }
    edges.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut q_used = vec![false; nq];
    let mut t_used = vec![false; nt];
    let mut out = MatchList::default();
    let cap = nq.min(nt);
    for (w, i, j) in edges {
        if out.pairs.len() == cap {
            break;
        }
        if q_used[i] || t_used[j] || !w.is_finite() {
            continue;
        }
        q_used[i] = true;
        t_used[j] = true;
        out.distances.push(w);
        out.pairs.push((i, j));
    }
    out
}

pub fn greedy_bipartite_match(query: &[Segment], target: &[Segment]) -> MatchList {
    greedy_match_by(query.len(), target.len(), |i, j| {
        poseline_distance(&query[i], &target[j])
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub r_hr: f64,
    pub r_nmd: f64,
    pub r_cr: f64,
    pub r_md: Option<f64>,
}

/// Hit ratio, normalized mean distance and combined ratio of a matching.
/// An empty filtered set yields zeros.
pub fn summarize(matched: &[f64], nq: usize, nt: usize, beta: f64) -> Summary {
    let zero = Summary {
        r_hr: 0.0,
        r_nmd: 0.0,
        r_cr: 0.0,
        r_md: None,
    };
    let denom = nq.max(nt);
    if denom == 0 {
        return zero;
    }
    let kept: Vec<f64> = matched.iter().copied().filter(|&d| d < beta).collect();
    if kept.is_empty() {
        return zero;
    }
    let r_hr = kept.len() as f64 / denom as f64;
    let r_md = kept.iter().sum::<f64>() / kept.len() as f64;
    let r_nmd = (beta - r_md) / beta;
    Summary {
        r_hr,
        r_nmd,
        r_cr: r_hr * r_nmd,
        r_md: Some(r_md),
    }
}

fn better(a: &Summary, b: &Summary) -> bool {
    a.r_cr > b.r_cr || (a.r_cr == b.r_cr && a.r_hr > b.r_hr)
}

pub fn compare_canvases(
    query: &NormalizedCanvas,
    target: &NormalizedCanvas,
    params: &SimilarityParams,
) -> Result<SimilarityRecord> {
    if query.mode != target.mode {
        return Err(Error::Parameter(format!(
            "norm mode mismatch: query `{}` vs target `{}`",
            query.mode, target.mode
        )));
    }
    let beta = params.beta_for(query.mode);
    let mut best: Option<(Summary, MatchList, (usize, usize))> = None;
    for (qi, qs) in query.sets.iter().enumerate() {
        for (ti, ts) in target.sets.iter().enumerate() {
            let m = greedy_bipartite_match(&qs.poselines, &ts.poselines);
            let s = summarize(&m.distances, qs.poselines.len(), ts.poselines.len(), beta);
            if best.as_ref().is_none_or(|(b, _, _)| better(&s, b)) {
                best = Some((s, m, (qi, ti)));
            }
        }
    }
    let (summary, matched, pair) =
        best.unwrap_or_else(|| (summarize(&[], 0, 0, beta), MatchList::default(), (0, 0)));
    Ok(SimilarityRecord {
        query_id: query.image_id.clone(),
        target_id: target.image_id.clone(),
        r_hr: summary.r_hr,
        r_nmd: summary.r_nmd,
        r_cr: summary.r_cr,
        r_md: summary.r_md,
        r_a: None,
        r_combi1: None,
        r_combi2: None,
        latp_distance: None,
        matched,
        chosen_set_pair: (query.mode == NormMode::ActionRegion).then_some(pair),
        beta,
    })
}

/// Fuses an external dissimilarity `r_a` (0 = most similar) with `r_cr`.
/// Lower fused values are more similar.
pub fn combine(record: &SimilarityRecord, r_a: f64, w_a: f64) -> Result<SimilarityRecord> {
    if !(0.0..=1.0).contains(&w_a) {
        return Err(Error::Parameter(format!(
            "w_a must be in [0, 1], got {w_a}"
        )));
    }
    if r_a.is_nan() || r_a < 0.0 {
        return Err(Error::Parameter(format!(
            "r_a must be non-negative, got {r_a}"
        )));
    }
    let external = r_a * (1.0 - w_a);
    let composition = 1.0 - record.r_cr * w_a;
    Ok(SimilarityRecord {
        r_a: Some(r_a),
        r_combi1: Some(external * composition),
        r_combi2: Some(external + composition),
        ..record.clone()
    })
}

fn desc(a: f64, b: f64) -> Ordering {
    b.total_cmp(&a)
}

fn asc_opt(a: Option<f64>, b: Option<f64>) -> Ordering {
    a.unwrap_or(f64::INFINITY)
        .total_cmp(&b.unwrap_or(f64::INFINITY))
}

fn key_order(a: &SimilarityRecord, b: &SimilarityRecord, method: SortMethod) -> Ordering {
    match method {
        SortMethod::CrDesc => desc(a.r_cr, b.r_cr)
            .then(desc(a.r_hr, b.r_hr))
            .then(desc(a.r_nmd, b.r_nmd)),
        SortMethod::HrDesc => desc(a.r_hr, b.r_hr).then(desc(a.r_nmd, b.r_nmd)),
        SortMethod::NmdDesc => desc(a.r_nmd, b.r_nmd).then(desc(a.r_hr, b.r_hr)),
        SortMethod::HrMdLex => desc(a.r_hr, b.r_hr).then(asc_opt(a.r_md, b.r_md)),
        SortMethod::Combi1Asc => asc_opt(a.r_combi1, b.r_combi1),
        SortMethod::Combi2Asc => asc_opt(a.r_combi2, b.r_combi2),
        SortMethod::AAsc => asc_opt(a.r_a, b.r_a),
        SortMethod::LatpAsc => asc_opt(a.latp_distance, b.latp_distance),
    }
}

/// Orders records by the method's key chain, then by target id.
pub fn rank(
    mut records: Vec<SimilarityRecord>,
    method: SortMethod,
) -> Result<Vec<SimilarityRecord>> {
    let missing = |r: &SimilarityRecord| match method {
        SortMethod::Combi1Asc => r.r_combi1.is_none(),
        SortMethod::Combi2Asc => r.r_combi2.is_none(),
        SortMethod::AAsc => r.r_a.is_none(),
        SortMethod::LatpAsc => r.latp_distance.is_none(),
        _ => false,
    };
    if let Some(r) = records.iter().find(|r| missing(r)) {
        return Err(Error::Parameter(format!(
            "sort method `{method}` needs values absent for target `{}`",
            r.target_id
        )));
    }
    records.sort_by(|a, b| key_order(a, b, method).then_with(|| a.target_id.cmp(&b.target_id)));
    Ok(records)
}
