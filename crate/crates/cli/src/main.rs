use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use posecomp_core::eval::{
    cluster_feature_vector, evaluate, generate_synthetic_corpus, grid_search, write_cluster_csv,
    ClusterRow, GridSpec, MetricsReport, SyntheticSpec, EVAL_SCALE,
};
use posecomp_core::index::{parse_feature_file, FeatureMetric, QueryRequest};
use posecomp_core::latp::{LatpMode, LatpOptions};
use posecomp_core::overlay::{render_match, render_overlay_with_scene, OverlayOptions};
use posecomp_core::pose::serialize_keypoint_file;
use posecomp_core::similarity::{CombineMode, SimilarityParams};
use posecomp_core::{
    build_index, compare_canvases, extract_canvas, parse_keypoint_file, CorpusIndex, Exec,
    ExtractParams, NormMode, PoseScene, QueryParams, RankedResults, SortMethod,
};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "posecomp",
    version,
    about = "Pose-based compositional image retrieval"
)]
struct Cli {
    /// Disable data-parallel scoring.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract composition canvases from a keypoint file.
    Extract {
        #[arg(long)]
        input: PathBuf,
        /// Canvas JSON output; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the 7-statistic cluster features as CSV.
        #[arg(long)]
        cluster_csv: Option<PathBuf>,
        #[command(flatten)]
        extract: ExtractArgs,
        #[command(flatten)]
        scale: ScaleArgs,
    },
    /// Build and save a corpus index.
    Index {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        extract: ExtractArgs,
        #[command(flatten)]
        scale: ScaleArgs,
        #[command(flatten)]
        features: FeatureArgs,
    },
    /// Rank the corpus against one query image.
    Query {
        #[arg(long)]
        index: PathBuf,
        /// Corpus member to query with.
        #[arg(long, conflicts_with = "scene", required_unless_present = "scene")]
        id: Option<String>,
        /// Keypoint file holding a single inline query scene.
        #[arg(long)]
        scene: Option<PathBuf>,
        #[command(flatten)]
        query: QueryArgs,
        #[command(flatten)]
        scale: ScaleArgs,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Leave-one-out evaluation over a labeled corpus.
    Evaluate {
        /// Labeled keypoint file.
        #[arg(long, conflicts_with = "index", required_unless_present = "index")]
        input: Option<PathBuf>,
        /// Prebuilt index instead of a keypoint file.
        #[arg(long)]
        index: Option<PathBuf>,
        #[command(flatten)]
        extract: ExtractArgs,
        #[command(flatten)]
        scale: ScaleArgs,
        #[command(flatten)]
        query: QueryArgs,
        #[command(flatten)]
        features: FeatureArgs,
        /// Full JSON report output.
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
    /// Exhaustive hyperparameter search.
    Gridsearch {
        #[arg(long)]
        input: PathBuf,
        /// Grid specification JSON; unspecified axes keep a single default value.
        #[arg(long)]
        grid: Option<PathBuf>,
        #[command(flatten)]
        extract: ExtractArgs,
        /// JSON output with every cell.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Rows shown in the table.
        #[arg(long, default_value_t = 20)]
        top: usize,
    },
    /// Write SVG overlays, one `<image_id>.svg` per image.
    Render {
        #[arg(long)]
        index: PathBuf,
        /// Images to render; all when omitted.
        #[arg(long)]
        id: Vec<String>,
        /// Render the match view against this target instead, as `<id>_vs_<target>.svg`.
        #[arg(long)]
        target: Option<String>,
        #[arg(long, default_value = "poselines,cones,regions,centers,lines")]
        elements: String,
        #[arg(long, default_value = "ar")]
        norm: NormMode,
        #[arg(long)]
        beta: Option<f64>,
        /// Artwork href template, `{id}` is replaced by the image id.
        #[arg(long)]
        media: Option<String>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Generate a synthetic labeled corpus with planted compositions.
    Synth {
        #[arg(long, default_value_t = 20)]
        per_class: usize,
        #[arg(long, default_value_t = 15.0)]
        jitter: f64,
        #[arg(long, default_value_t = 0.05)]
        drop: f64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Serve the HTTP API over an index.
    Serve {
        #[arg(long)]
        index: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
        #[arg(long)]
        media: Option<String>,
    },
}

#[derive(Args, Clone)]
struct ExtractArgs {
    /// Correction angle in degrees.
    #[arg(long, default_value_t = 20.0)]
    rho: f64,
    /// Cone opening angle in degrees.
    #[arg(long, default_value_t = 80.0)]
    omega: f64,
    /// Cone length in neck–nose lengths.
    #[arg(long, default_value_t = 10.0)]
    sigma: f64,
    /// Cone near-edge half-width in neck–nose lengths.
    #[arg(long, default_value_t = 0.0)]
    eta: f64,
    #[arg(long)]
    fallback_poseline: bool,
    #[arg(long)]
    fallback_bisection: bool,
    #[arg(long, default_value_t = posecomp_core::pose::DEFAULT_CONF_THRESHOLD)]
    conf_threshold: f64,
}

impl ExtractArgs {
    fn params(&self) -> Result<ExtractParams> {
        let p = ExtractParams {
            rho: self.rho,
            omega: self.omega,
            sigma: self.sigma,
            eta: self.eta,
            poseline_fallback: self.fallback_poseline,
            bisection_fallback: self.fallback_bisection,
            conf_threshold: self.conf_threshold,
            ..ExtractParams::default()
        };
        p.validate()?;
        Ok(p)
    }
}

#[derive(Args, Clone)]
struct ScaleArgs {
    /// Keep original coordinates instead of rescaling the longest side to 1000 px.
    #[arg(long)]
    no_rescale: bool,
}

impl ScaleArgs {
    fn apply(&self, scenes: Vec<PoseScene>) -> Vec<PoseScene> {
        if self.no_rescale {
            scenes
        } else {
            scenes
                .iter()
                .map(|s| s.rescaled_longest_side(EVAL_SCALE))
                .collect()
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Baseline {
    Latp,
}

#[derive(Args, Clone)]
struct QueryArgs {
    #[arg(long, default_value = "ar")]
    norm: NormMode,
    /// Match filter threshold; defaults to 150 (none/ar) or 0.15 (image/bbox).
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long, default_value = "cr_desc")]
    sort: SortMethod,
    #[arg(long, default_value_t = 0.5)]
    wa: f64,
    #[arg(long, default_value = "none")]
    combine: CombineMode,
    /// Rank with a pose-distance baseline instead.
    #[arg(long, value_enum)]
    baseline: Option<Baseline>,
    #[arg(long, default_value = "min")]
    latp_mode: LatpMode,
    #[arg(long)]
    latp_robust: bool,
    #[arg(long, default_value_t = 10)]
    k: usize,
}

impl QueryArgs {
    fn params(&self) -> Result<QueryParams> {
        let p = QueryParams {
            norm: self.norm,
            beta: self.beta,
            sort: self.sort,
            w_a: self.wa,
            combine: self.combine,
            baseline: self.baseline.map(|Baseline::Latp| LatpOptions {
                mode: self.latp_mode,
                robust: self.latp_robust,
                ..LatpOptions::default()
            }),
        };
        p.validate()?;
        if self.k == 0 {
            bail!("--k must be at least 1");
        }
        Ok(p)
    }
}

#[derive(Args, Clone)]
struct FeatureArgs {
    /// JSON map of image id to feature vector, used for score fusion.
    #[arg(long)]
    features: Option<PathBuf>,
    #[arg(long, default_value = "euclidean")]
    metric: FeatureMetric,
}

impl FeatureArgs {
    fn attach(&self, index: CorpusIndex) -> Result<CorpusIndex> {
        match &self.features {
            None => Ok(index),
            Some(path) => {
                let table = parse_feature_file(&read(path)?)?;
                Ok(index.attach_features(&table, self.metric)?)
            }
        }
    }
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Format {
    Json,
    Table,
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).with_context(|| format!("reading {}", path.display()))
}

fn load_scenes(path: &Path) -> Result<Vec<PoseScene>> {
    parse_keypoint_file(&read(path)?).with_context(|| format!("parsing {}", path.display()))
}

fn load_index(path: &Path) -> Result<CorpusIndex> {
    CorpusIndex::load(path).with_context(|| format!("loading index {}", path.display()))
}

fn write_out(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) => fs::write(p, bytes).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes)?;
            Ok(out.flush()?)
        }
    }
}

fn to_json<T: serde::Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(value)?;
    v.push(b'\n');
    Ok(v)
}

fn results_table(res: &RankedResults) -> String {
    let mut s = format!(
        "query {}\n{:>4}  {:<24} {:>8} {:>8} {:>8} {:>10}\n",
        res.query_id, "rank", "target", "r_cr", "r_hr", "r_nmd", "extra"
    );
    for (i, r) in res.results.iter().enumerate() {
        let extra = match (r.latp_distance, r.r_combi1, r.r_combi2) {
            (Some(d), _, _) => format!("{d:.3}"),
            (_, Some(c1), Some(c2)) => format!("{c1:.3}/{c2:.3}"),
            _ => String::new(),
        };
        s.push_str(&format!(
            "{:>4}  {:<24} {:>8.4} {:>8.4} {:>8.4} {:>10}\n",
            i + 1,
            r.target_id,
            r.r_cr,
            r.r_hr,
            r.r_nmd,
            extra
        ));
    }
    s
}

fn method_label(q: &QueryParams) -> String {
    match q.baseline {
        Some(b) => format!("latp {}{}", b.mode, if b.robust { " robust" } else { "" }),
        None => format!("norm {} sort {} combine {}", q.norm, q.sort, q.combine),
    }
}

fn run(cli: Cli) -> Result<()> {
    let exec = if cli.sequential {
        Exec::Sequential
    } else {
        Exec::Parallel
    };
    match cli.command {
        Command::Extract {
            input,
            out,
            cluster_csv,
            extract,
            scale,
        } => {
            let params = extract.params()?;
            let scenes = scale.apply(load_scenes(&input)?);
            let canvases = exec.map(&scenes, |s| extract_canvas(s, &params));
            if let Some(path) = cluster_csv {
                let rows: Vec<ClusterRow> = canvases
                    .iter()
                    .map(|c| ClusterRow {
                        image_id: c.image_id.clone(),
                        features: cluster_feature_vector(c),
                    })
                    .collect();
                let file = fs::File::create(&path)
                    .with_context(|| format!("creating {}", path.display()))?;
                write_cluster_csv(&rows, file)?;
            }
            write_out(out.as_deref(), &to_json(&canvases)?)
        }
        Command::Index {
            input,
            out,
            extract,
            scale,
            features,
        } => {
            let scenes = scale.apply(load_scenes(&input)?);
            let index = features.attach(build_index(&scenes, &extract.params()?, exec)?)?;
            index.save(&out)?;
            eprintln!(
                "indexed {} images ({}) into {}",
                index.len(),
                index.params_fingerprint,
                out.display()
            );
            Ok(())
        }
        Command::Query {
            index,
            id,
            scene,
            query,
            scale,
            format,
        } => {
            let index = load_index(&index)?;
            let params = query.params()?;
            let req = match (id, scene) {
                (Some(id), _) => QueryRequest::by_id(id, query.k, params),
                (None, Some(path)) => {
                    let mut scenes = scale.apply(load_scenes(&path)?);
                    if scenes.len() != 1 {
                        bail!(
                            "{} must hold exactly one scene, found {}",
                            path.display(),
                            scenes.len()
                        );
                    }
                    QueryRequest {
                        query_id: None,
                        scene: scenes.pop(),
                        features: None,
                        k: query.k,
                        params,
                    }
                }
                (None, None) => bail!("pass --id or --scene"),
            };
            let res = index.query(&req, exec)?;
            match format {
                Format::Json => write_out(None, &to_json(&res)?),
                Format::Table => write_out(None, results_table(&res).as_bytes()),
            }
        }
        Command::Evaluate {
            input,
            index,
            extract,
            scale,
            query,
            features,
            report,
            format,
        } => {
            let params = query.params()?;
            let idx = match (input, index) {
                (Some(path), _) => {
                    build_index(&scale.apply(load_scenes(&path)?), &extract.params()?, exec)?
                }
                (None, Some(path)) => load_index(&path)?,
                (None, None) => bail!("pass --input or --index"),
            };
            let idx = features.attach(idx)?;
            let rep: MetricsReport = evaluate(&idx, &params, exec)?;
            if let Some(path) = report {
                write_out(Some(&path), &to_json(&rep)?)?;
            }
            match format {
                Format::Json => write_out(None, &to_json(&rep)?),
                Format::Table => write_out(None, rep.to_table(&method_label(&params)).as_bytes()),
            }
        }
        Command::Gridsearch {
            input,
            grid,
            extract,
            out,
            top,
        } => {
            let spec: GridSpec = match grid {
                Some(p) => serde_json::from_slice(&read(&p)?)
                    .with_context(|| format!("parsing {}", p.display()))?,
                None => GridSpec::default(),
            };
            spec.validate()?;
            eprintln!("evaluating {} grid cells", spec.size());
            let scenes = load_scenes(&input)?;
            let results = grid_search(&spec, &scenes, &extract.params()?, exec)?;
            if let Some(path) = out {
                write_out(Some(&path), &to_json(&results)?)?;
            }
            let mut table = MetricsReport::table_header() + "\n";
            for r in results.iter().take(top) {
                let e = &r.extract;
                let label = format!(
                    "ρ{} ω{} σ{} η{} fb{}{} {}",
                    e.rho,
                    e.omega,
                    e.sigma,
                    e.eta,
                    u8::from(e.poseline_fallback),
                    u8::from(e.bisection_fallback),
                    method_label(&r.query)
                );
                table.push_str(&r.report.table_row(&label));
                table.push('\n');
            }
            write_out(None, table.as_bytes())
        }
        Command::Render {
            index,
            id,
            target,
            elements,
            norm,
            beta,
            media,
            out_dir,
        } => {
            let index = load_index(&index)?;
            fs::create_dir_all(&out_dir)?;
            let ids: Vec<String> = if id.is_empty() {
                index.entries.keys().cloned().collect()
            } else {
                id
            };
            let mut opts = OverlayOptions::from_element_list(&elements)?;
            for id in &ids {
                let entry = index.get(id)?;
                let svg = match &target {
                    Some(t) => {
                        let te = index.get(t)?;
                        let sp = SimilarityParams {
                            beta,
                            ..SimilarityParams::default()
                        };
                        sp.validate()?;
                        let rec = compare_canvases(
                            entry.normalized.get(norm),
                            te.normalized.get(norm),
                            &sp,
                        )?;
                        render_match(&entry.canvas, &te.canvas, &rec)?
                    }
                    None => {
                        opts.image_href = media.as_ref().map(|m| m.replace("{id}", id));
                        render_overlay_with_scene(&entry.canvas, Some(&entry.scene), &opts)?
                    }
                };
                let name = match &target {
                    Some(t) => format!("{id}_vs_{t}.svg"),
                    None => format!("{id}.svg"),
                };
                let path = out_dir.join(name);
                fs::write(&path, svg).with_context(|| format!("writing {}", path.display()))?;
            }
            eprintln!("wrote {} overlays to {}", ids.len(), out_dir.display());
            Ok(())
        }
        Command::Synth {
            per_class,
            jitter,
            drop,
            seed,
            out,
        } => {
            if !(0.0..=1.0).contains(&drop) || jitter < 0.0 {
                bail!("--drop must be in [0, 1] and --jitter non-negative");
            }
            let scenes =
                generate_synthetic_corpus(&SyntheticSpec::builtin(per_class, jitter, drop, seed));
            fs::write(&out, serialize_keypoint_file(&scenes)?)
                .with_context(|| format!("writing {}", out.display()))?;
            eprintln!("wrote {} scenes to {}", scenes.len(), out.display());
            Ok(())
        }
        Command::Serve { index, addr, media } => {
            let mut state = posecomp_server::AppState::new(load_index(&index)?).with_exec(exec);
            if let Some(m) = media {
                state = state.with_media_template(m);
            }
            let rt = tokio::runtime::Runtime::new()?;
            eprintln!("listening on http://{addr}");
            rt.block_on(posecomp_server::serve(state, &addr))?;
            Ok(())
        }
    }
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
