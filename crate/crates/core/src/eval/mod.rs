//! Retrieval evaluation: precision/recall at k, mean average precision,
//! whole-corpus leave-one-out evaluation and grid search.

mod cluster;
mod grid;
mod synth;

pub use cluster::{cluster_feature_vector, percentile, write_cluster_csv, ClusterRow};
pub use grid::{grid_search, GridResult, GridSpec};
pub use synth::{
    builtin_templates, generate_synthetic_corpus, ClassTemplate, FigurePlacement, Posture,
    SyntheticSpec,
};

use crate::canvas::ExtractParams;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::index::{build_index, CorpusIndex, QueryParams, QueryRequest};
use crate::pose::PoseScene;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::fmt::Write as _;
use std::hash::Hash;

/// Largest k reported.
pub const MAX_K: usize = 10;

/// Longer image side after pre-evaluation rescaling.
pub const EVAL_SCALE: f64 = 1000.0;

/// `(P@k, R@k)`; `None` when there are no relevant items.
pub fn precision_recall_at_k<T: Eq + Hash>(
    ranked: &[T],
    relevant: &HashSet<T>,
    k: usize,
) -> Option<(f64, f64)> {
    if relevant.is_empty() || k == 0 {
        return None;
    }
    let hits = ranked
        .iter()
        .take(k)
        .filter(|id| relevant.contains(id))
        .count() as f64;
    Some((hits / k as f64, hits / relevant.len() as f64))
}

/// Mean of the precision at each relevant item's rank; relevant items that
/// never appear contribute zero.
pub fn average_precision<T: Eq + Hash>(ranked: &[T], relevant: &HashSet<T>) -> Option<f64> {
    if relevant.is_empty() {
        return None;
    }
    let mut hits = 0usize;
    let mut acc = 0.0;
    for (i, id) in ranked.iter().enumerate() {
        if relevant.contains(id) {
            hits += 1;
            acc += hits as f64 / (i + 1) as f64;
        }
    }
    Some(acc / relevant.len() as f64)
}

/// mAP over queries with non-empty relevance; also returns how many were skipped.
pub fn mean_average_precision<T: Eq + Hash>(queries: &[(Vec<T>, HashSet<T>)]) -> (f64, usize) {
    let aps: Vec<f64> = queries
        .iter()
        .filter_map(|(ranked, rel)| average_precision(ranked, rel))
        .collect();
    let skipped = queries.len() - aps.len();
    let map = if aps.is_empty() {
        0.0
    } else {
        aps.iter().sum::<f64>() / aps.len() as f64
    };
    (map, skipped)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryMetrics {
    pub query_id: String,
    /// `precision[k - 1]` is P@k.
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
    pub average_precision: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalParams {
    pub extract: ExtractParams,
    pub query: QueryParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub per_query: Vec<QueryMetrics>,
    /// `mean_precision[k - 1]` is mP@k.
    pub mean_precision: Vec<f64>,
    pub mean_recall: Vec<f64>,
    pub map: f64,
    pub query_count: usize,
    pub skipped: Vec<String>,
    pub params: EvalParams,
}

impl MetricsReport {
    pub fn mp_at(&self, k: usize) -> f64 {
        self.mean_precision[k - 1]
    }

    pub fn mr_at(&self, k: usize) -> f64 {
        self.mean_recall[k - 1]
    }

    pub fn table_header() -> String {
        format!(
            "{:<44} {:>7} {:>7} {:>7} {:>7}",
            "method", "mP@1", "mP@2", "mP@5", "mAP"
        )
    }

    /// One aligned row, values in percent.
    pub fn table_row(&self, label: &str) -> String {
        format!(
            "{:<44} {:>7.2} {:>7.2} {:>7.2} {:>7.2}",
            label,
            100.0 * self.mp_at(1),
            100.0 * self.mp_at(2),
            100.0 * self.mp_at(5),
            100.0 * self.map
        )
    }

    pub fn to_table(&self, label: &str) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{}", Self::table_header());
        let _ = writeln!(s, "{}", self.table_row(label));
        s
    }
}

/// Leave-one-out evaluation: every entry queries the rest of the corpus and
/// entries sharing its class label are relevant.
pub fn evaluate(index: &CorpusIndex, params: &QueryParams, exec: Exec) -> Result<MetricsReport> {
    let unlabeled: Vec<String> = index
        .entries
        .iter()
        .filter(|(_, e)| e.scene.class_label.is_none())
        .map(|(id, _)| id.clone())
        .collect();
    if !unlabeled.is_empty() {
        return Err(Error::Unlabeled(unlabeled));
    }
    params.validate()?;
    let ids: Vec<&String> = index.entries.keys().collect();
    let label = |id: &str| index.entries[id].scene.class_label.as_deref();

    let outcomes = exec.try_map(&ids, |id| -> Result<Option<QueryMetrics>> {
        let relevant: HashSet<&str> = index
            .entries
            .iter()
            .filter(|(other, e)| *other != *id && e.scene.class_label.as_deref() == label(id))
            .map(|(other, _)| other.as_str())
            .collect();
        if relevant.is_empty() {
            return Ok(None);
        }
        let req = QueryRequest::by_id(id.as_str(), usize::MAX, *params);
        let ranked = index.rank_all(&req, Exec::Sequential)?;
        let ranked: Vec<&str> = ranked.iter().map(|r| r.target_id.as_str()).collect();
        let (precision, recall): (Vec<f64>, Vec<f64>) = (1..=MAX_K)
            .map(|k| precision_recall_at_k(&ranked, &relevant, k).expect("non-empty relevance"))
            .unzip();
        Ok(Some(QueryMetrics {
            query_id: id.to_string(),
            precision,
            recall,
            average_precision: average_precision(&ranked, &relevant).expect("non-empty relevance"),
        }))
    })?;

    let mut per_query = Vec::new();
    let mut skipped = Vec::new();
    for (id, o) in ids.iter().zip(outcomes) {
        match o {
            Some(m) => per_query.push(m),
            None => skipped.push(id.to_string()),
        }
    }
    let n = per_query.len().max(1) as f64;
    let mean_at = |f: fn(&QueryMetrics) -> &Vec<f64>| -> Vec<f64> {
        (0..MAX_K)
            .map(|k| per_query.iter().map(|q| f(q)[k]).sum::<f64>() / n)
            .collect()
    };
    let mean_precision = mean_at(|q| &q.precision);
    let mean_recall = mean_at(|q| &q.recall);
    let map = per_query.iter().map(|q| q.average_precision).sum::<f64>() / n;
    Ok(MetricsReport {
        query_count: per_query.len(),
        per_query,
        mean_precision,
        mean_recall,
        map,
        skipped,
        params: EvalParams {
            extract: index.params,
            query: *params,
        },
    })
}

/// Rescales every scene to the evaluation scale, builds an index and
/// evaluates it.
pub fn evaluate_scenes(
    scenes: &[PoseScene],
    extract: &ExtractParams,
    params: &QueryParams,
    exec: Exec,
) -> Result<MetricsReport> {
    let scaled: Vec<PoseScene> = scenes
        .iter()
        .map(|s| s.rescaled_longest_side(EVAL_SCALE))
        .collect();
    let index = build_index(&scaled, extract, exec)?;
    evaluate(&index, params, exec)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(xs: &[u32]) -> HashSet<u32> {
        xs.iter().copied().collect()
    }

    #[test]
    fn precision_recall_counts() {
        // 3 of the top 5 relevant; class of 100 minus the query
        let ranked: Vec<u32> = vec![1, 200, 2, 3, 201, 4, 5];
        let relevant: HashSet<u32> = (1..=99).collect();
        let (p, r) = precision_recall_at_k(&ranked, &relevant, 5).unwrap();
        assert_eq!(p, 0.6);
        assert_eq!(r, 3.0 / 99.0);
        assert_eq!(
            precision_recall_at_k(&[1, 2], &set(&[1, 2]), 2).unwrap().0,
            1.0
        );
        assert_eq!(precision_recall_at_k(&[9], &set(&[1]), 1).unwrap().0, 0.0);
        assert!(precision_recall_at_k(&[9], &set(&[]), 1).is_none());
    }

    #[test]
    fn average_precision_cases() {
        assert_eq!(average_precision(&[1, 2], &set(&[1, 2])), Some(1.0));
        assert_eq!(average_precision(&[9, 1], &set(&[1])), Some(0.5));
        // relevant item never retrieved contributes zero
        assert_eq!(average_precision(&[1, 9], &set(&[1, 2])), Some(0.5));
        let (map, skipped) = mean_average_precision(&[
            (vec![1, 2], set(&[1, 2])),
            (vec![9, 1], set(&[1])),
            (vec![3], set(&[])),
        ]);
        assert_eq!(map, 0.75);
        assert_eq!(skipped, 1);
    }
}
