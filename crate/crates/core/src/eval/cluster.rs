use crate::canvas::CompositionCanvas;
use crate::error::Result;
use crate::normalize::{normalize, NormMode};
use std::io::Write;

/// Linear-interpolation percentile of an ascending slice (`p` in `[0, 100]`).
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    match sorted.len() {
        0 => 0.0,
        1 => sorted[0],
        n => {
            let rank = p / 100.0 * (n - 1) as f64;
            let lo = rank.floor() as usize;
            let hi = rank.ceil() as usize;
            let frac = rank - lo as f64;
            sorted[lo] + (sorted[hi] - sorted[lo]) * frac
        }
    }
}

/// `[mean, std, median, p5, p25, p75, p95]` over the flattened scalars of
/// the action-region-normalized poseline endpoints and the action-line
/// endpoints (each line relative to its own region center). Standard
/// deviation is the population form; an empty canvas gives zeros.
pub fn cluster_feature_vector(canvas: &CompositionCanvas) -> [f64; 7] {
    let mut values = Vec::new();
    if let Ok(n) = normalize(canvas, NormMode::ActionRegion) {
        for set in &n.sets {
            for s in &set.poselines {
                values.extend([s.top.x, s.top.y, s.bottom.x, s.bottom.y]);
            }
        }
    }
    for line in &canvas.action_lines {
        let c = canvas.regions[line.region_index].center;
        let (a, b) = (line.p1 - c, line.p2 - c);
        values.extend([a.x, a.y, b.x, b.y]);
    }
    if values.is_empty() {
        return [0.0; 7];
    }
    values.sort_by(f64::total_cmp);
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    [
        mean,
        var.sqrt(),
        percentile(&values, 50.0),
        percentile(&values, 5.0),
        percentile(&values, 25.0),
        percentile(&values, 75.0),
        percentile(&values, 95.0),
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterRow {
    pub image_id: String,
    pub features: [f64; 7],
}

/// CSV with header `image_id,mean,std,median,p5,p25,p75,p95`.
pub fn write_cluster_csv<W: Write>(rows: &[ClusterRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "image_id", "mean", "std", "median", "p5", "p25", "p75", "p95",
    ])?;
    for row in rows {
        let mut rec = vec![row.image_id.clone()];
        rec.extend(row.features.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
