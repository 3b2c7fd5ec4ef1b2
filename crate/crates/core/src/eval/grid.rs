use super::{evaluate, MetricsReport, EVAL_SCALE};
use crate::canvas::ExtractParams;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::index::{build_index, CorpusIndex, QueryParams};
use crate::latp::LatpOptions;
use crate::normalize::NormMode;
use crate::pose::PoseScene;
use crate::similarity::{CombineMode, SortMethod};
use serde::{Deserialize, Serialize};

/// Value lists per hyperparameter; every combination is evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSpec {
    pub rho: Vec<f64>,
    pub omega: Vec<f64>,
    pub sigma: Vec<f64>,
    pub eta: Vec<f64>,
    /// `null` entries use the default threshold of the norm mode.
    pub beta: Vec<Option<f64>>,
    pub norm: Vec<NormMode>,
    pub sort: Vec<SortMethod>,
    pub poseline_fallback: Vec<bool>,
    pub bisection_fallback: Vec<bool>,
    pub w_a: Vec<f64>,
    pub combine: Vec<CombineMode>,
    pub baseline: Vec<Option<LatpOptions>>,
}

impl Default for GridSpec {
    /// A single cell at the baseline constraints.
    fn default() -> Self {
        let e = ExtractParams::default();
        let q = QueryParams::default();
        Self {
            rho: vec![e.rho],
            omega: vec![e.omega],
            sigma: vec![e.sigma],
            eta: vec![e.eta],
            beta: vec![None],
            norm: vec![NormMode::None],
            sort: vec![q.sort],
            poseline_fallback: vec![e.poseline_fallback],
            bisection_fallback: vec![e.bisection_fallback],
            w_a: vec![q.w_a],
            combine: vec![q.combine],
            baseline: vec![None],
        }
    }
}

impl GridSpec {
    fn axis_lengths(&self) -> [(&'static str, usize); 12] {
        [
            ("rho", self.rho.len()),
            ("omega", self.omega.len()),
            ("sigma", self.sigma.len()),
            ("eta", self.eta.len()),
            ("beta", self.beta.len()),
            ("norm", self.norm.len()),
            ("sort", self.sort.len()),
            ("poseline_fallback", self.poseline_fallback.len()),
            ("bisection_fallback", self.bisection_fallback.len()),
            ("w_a", self.w_a.len()),
            ("combine", self.combine.len()),
            ("baseline", self.baseline.len()),
        ]
    }

    /// Number of cells in the cartesian product.
    pub fn size(&self) -> usize {
        self.axis_lengths().iter().map(|(_, n)| n).product()
    }

    pub fn validate(&self) -> Result<()> {
        match self.axis_lengths().iter().find(|(_, n)| *n == 0) {
            Some((name, _)) => Err(Error::Parameter(format!("grid axis `{name}` is empty"))),
            None => Ok(()),
        }
    }

    /// Distinct extraction settings, in grid order.
    pub fn extract_points(&self, base: &ExtractParams) -> Vec<ExtractParams> {
        let mut out = Vec::new();
        for &rho in &self.rho {
            for &omega in &self.omega {
                for &sigma in &self.sigma {
                    for &eta in &self.eta {
                        for &poseline_fallback in &self.poseline_fallback {
                            for &bisection_fallback in &self.bisection_fallback {
                                out.push(ExtractParams {
                                    rho,
                                    omega,
                                    sigma,
                                    eta,
                                    poseline_fallback,
                                    bisection_fallback,
                                    ..*base
                                });
                            }
                        }
                    }
                }
            }
        }
        out
    }

    /// Retrieval settings, in grid order.
    pub fn query_points(&self) -> Vec<QueryParams> {
        let mut out = Vec::new();
        for &beta in &self.beta {
            for &norm in &self.norm {
                for &sort in &self.sort {
                    for &w_a in &self.w_a {
                        for &combine in &self.combine {
                            for &baseline in &self.baseline {
                                out.push(QueryParams {
                                    norm,
                                    beta,
                                    sort,
                                    w_a,
                                    combine,
                                    baseline,
                                });
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub extract: ExtractParams,
    pub query: QueryParams,
    pub report: MetricsReport,
}

/// Exhaustive evaluation of every grid cell, best first (mP@1, then mAP).
///
/// Scenes are rescaled to the evaluation scale once; canvases are extracted
/// once per distinct extraction setting and shared by all retrieval settings.
pub fn grid_search(
    spec: &GridSpec,
    scenes: &[PoseScene],
    base: &ExtractParams,
    exec: Exec,
) -> Result<Vec<GridResult>> {
    spec.validate()?;
    let scaled: Vec<PoseScene> = scenes
        .iter()
        .map(|s| s.rescaled_longest_side(EVAL_SCALE))
        .collect();
    let extracts = spec.extract_points(base);
    let queries = spec.query_points();
    let indexes: Vec<CorpusIndex> = extracts
        .iter()
        .map(|e| build_index(&scaled, e, exec))
        .collect::<Result<_>>()?;
    let cells: Vec<(usize, QueryParams)> = (0..indexes.len())
        .flat_map(|i| queries.iter().map(move |q| (i, *q)))
        .collect();
    let mut results = exec.try_map(&cells, |(i, q)| -> Result<GridResult> {
        Ok(GridResult {
            extract: extracts[*i],
            query: *q,
            report: evaluate(&indexes[*i], q, Exec::Sequential)?,
        })
    })?;
    results.sort_by(|a, b| {
        b.report
            .mp_at(1)
            .total_cmp(&a.report.mp_at(1))
            .then(b.report.map.total_cmp(&a.report.map))
    });
    Ok(results)
}
