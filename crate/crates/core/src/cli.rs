//! `asc` subcommands. Every run directory gets a `config.echo` that can be
//! passed back through `--config` to reproduce it.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::clustering::{
    read_assignments_csv, write_assignments_csv, write_k_selection_csv, ClusterMethod, KScore,
};
use crate::error::{Error, ErrorKind, Result};
use crate::evaluation::{
    adjusted_rand_index, dataset_summary, summary_csv, word_frequency_ratio, write_profile_csv,
    write_summary_csv, ClusterProfile, MetricBundle,
};
use crate::ingest::{
    generate_synthetic, load_constraints, load_numeric_csv, load_term_frequency, write_constraints,
    write_file, write_lexicon, write_numeric_csv, write_term_frequency, ConstraintSets,
    NumericDataset, SyntheticSpec, TextDataset,
};
use crate::pipeline::{
    cluster_similarity, run_asc, run_single_modality, AscConfig, AscResult, MetricSpace, Modality,
    SpectralRun,
};
use crate::similarity::{
    fuse_similarity, numeric_similarity_matrix, optimize_lambda, read_similarity_bin, rescale_unit,
    text_similarity_matrix, write_lambda_grid_csv, write_similarity_bin, LambdaOptions,
};
use crate::seed;
use crate::spectral::{write_eigen_report_csv, LaplacianKind};

pub const METRICS_SCHEMA_VERSION: u32 = 1;
pub const CONFIG_ECHO: &str = "config.echo";

#[derive(Debug, Parser)]
#[command(name = "asc", version, about = "Spectral clustering of numeric + text data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Full pipeline: fusion weight, eigengap candidates, clustering, reports.
    Cluster(ClusterArgs),
    /// Grid search for the fusion weight only.
    OptimizeLambda(RunArgs),
    /// Candidate k and clustering for a fused graph or a saved similarity.
    SelectK(SelectKArgs),
    /// Pipeline on one modality alone.
    Ablate(AblateArgs),
    /// Per-cluster word frequency ratios for existing assignments.
    Profile(ProfileArgs),
    /// Write a synthetic dataset with planted clusters.
    Synth(SynthArgs),
    /// ARI against known labels, or a per-feature summary table.
    Eval(EvalArgs),
}

#[derive(Debug, Args, Default, Clone)]
pub struct InputArgs {
    /// Numeric CSV: header `id,<feature>...`.
    #[arg(long)]
    pub numeric: Option<PathBuf>,
    /// Term counts as `doc_id,term_index,count` triplets.
    #[arg(long)]
    pub text: Option<PathBuf>,
    /// One term per line.
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    /// JSON with `must_link` and `cannot_link` index arrays.
    #[arg(long)]
    pub constraints: Option<PathBuf>,
}

#[derive(Debug, Args, Default, Clone)]
pub struct PipelineArgs {
    /// Start from a previous run's config.echo; flags below override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Fixed weight in [0, 1], or `optimize` to search the grid.
    #[arg(long)]
    pub lambda: Option<String>,
    #[arg(long)]
    pub lambda_step: Option<f64>,
    #[arg(long)]
    pub max_triples: Option<usize>,
    /// unnormalized | symmetric | random_walk
    #[arg(long)]
    pub laplacian: Option<LaplacianKind>,
    /// Number of smallest non-zero eigenvalues inspected for gaps.
    #[arg(long)]
    pub window: Option<usize>,
    /// Cluster at this k instead of choosing among candidates.
    #[arg(long)]
    pub k: Option<usize>,
    /// kmeans | kmedians | kmedoids
    #[arg(long)]
    pub method: Option<ClusterMethod>,
    #[arg(long)]
    pub restarts: Option<usize>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// embedding | numeric
    #[arg(long)]
    pub metric_space: Option<MetricSpace>,
    /// Fuse the raw numeric similarity instead of its [0, 1] rescaling.
    #[arg(long)]
    pub no_rescale: bool,
    /// Compare must-link fused similarity against raw numeric similarity
    /// when checking constraint triples.
    #[arg(long = "literal-lambda-rhs", visible_alias = "eq7-literal")]
    pub literal_lambda_rhs: bool,
    /// Choose k by the per-cluster gap + separation score, minimized.
    #[arg(long = "literal-k-score", visible_alias = "eq10-literal")]
    pub literal_k_score: bool,
    /// Scale embedding rows to unit length before clustering.
    #[arg(long)]
    pub row_normalize: bool,
}

#[derive(Debug, Args, Clone)]
pub struct OutputArgs {
    #[arg(long)]
    pub out: PathBuf,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Args, Clone)]
pub struct RunArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args, Clone)]
pub struct ClusterArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Also write the fused graph as similarity.bin.
    #[arg(long)]
    pub save_similarity: bool,
}

#[derive(Debug, Args, Clone)]
pub struct SelectKArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Binary similarity written by `cluster --save-similarity`; replaces
    /// the numeric/text inputs.
    #[arg(long)]
    pub similarity: Option<PathBuf>,
}

#[derive(Debug, Args, Clone)]
pub struct AblateArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// numeric | text
    #[arg(long)]
    pub modality: Modality,
}

#[derive(Debug, Args, Clone)]
pub struct ProfileArgs {
    #[arg(long)]
    pub assignments: PathBuf,
    #[arg(long)]
    pub text: PathBuf,
    #[arg(long)]
    pub lexicon: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Clone)]
pub struct SynthArgs {
    /// JSON spec; missing fields take defaults. Flags override.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub clusters: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub features: Option<usize>,
    #[arg(long)]
    pub numeric_noise: Option<f64>,
    #[arg(long)]
    pub text_noise: Option<f64>,
    #[arg(long)]
    pub topic_rate: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Clone)]
pub struct EvalArgs {
    #[arg(long, requires = "truth")]
    pub assignments: Option<PathBuf>,
    /// `id,label` ground truth, e.g. labels.csv from `synth`.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Numeric CSV to summarize (mean, SD, coefficient of variation).
    #[arg(long, conflicts_with = "assignments")]
    pub summary_of: Option<PathBuf>,
    /// Write eval.json or summary.csv here instead of only printing.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Everything needed to repeat a run, minus output location and threads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub command: String,
    #[serde(default)]
    pub numeric: Option<PathBuf>,
    #[serde(default)]
    pub text: Option<PathBuf>,
    #[serde(default)]
    pub lexicon: Option<PathBuf>,
    #[serde(default)]
    pub constraints: Option<PathBuf>,
    #[serde(default)]
    pub similarity: Option<PathBuf>,
    #[serde(default)]
    pub modality: Modality,
    #[serde(default)]
    pub pipeline: AscConfig,
}

impl PipelineConfig {
    fn new(command: &str) -> Self {
        Self {
            command: command.to_owned(),
            numeric: None,
            text: None,
            lexicon: None,
            constraints: None,
            similarity: None,
            modality: Modality::Fused,
            pipeline: AscConfig::default(),
        }
    }

    fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    fn build(command: &str, input: &InputArgs, args: &PipelineArgs) -> Result<Self> {
        let mut cfg = match &args.config {
            Some(p) => {
                let mut c = Self::load(p)?;
                c.command = command.to_owned();
                c
            }
            None => Self::new(command),
        };
        let pick = |flag: &Option<PathBuf>, slot: &mut Option<PathBuf>| {
            if flag.is_some() {
                slot.clone_from(flag);
            }
        };
        pick(&input.numeric, &mut cfg.numeric);
        pick(&input.text, &mut cfg.text);
        pick(&input.lexicon, &mut cfg.lexicon);
        pick(&input.constraints, &mut cfg.constraints);

        let p = &mut cfg.pipeline;
        if let Some(l) = &args.lambda {
            p.lambda = parse_lambda(l)?;
        }
        if let Some(v) = args.lambda_step {
            p.lambda_step = v;
        }
        if let Some(v) = args.max_triples {
            p.max_triples = v;
        }
        if let Some(v) = args.laplacian {
            p.laplacian = v;
        }
        if let Some(v) = args.window {
            p.eigengap_window = v;
        }
        if args.k.is_some() {
            p.k = args.k;
        }
        if let Some(v) = args.method {
            p.method = v;
        }
        if let Some(v) = args.restarts {
            p.restarts = v;
        }
        if let Some(v) = args.max_iter {
            p.max_iter = v;
        }
        if let Some(v) = args.seed {
            p.seed = v;
        }
        if let Some(v) = args.metric_space {
            p.metric_space = v;
        }
        if args.no_rescale {
            p.rescale_numeric = false;
        }
        if args.literal_lambda_rhs {
            p.literal_lambda_rhs = true;
        }
        if args.literal_k_score {
            p.k_score = KScore::Literal;
        }
        if args.row_normalize {
            p.row_normalize = true;
        }
        p.validate()?;
        Ok(cfg)
    }

    fn write_echo(&self, dir: &Path) -> Result<()> {
        let mut json = serde_json::to_string_pretty(self).expect("config serializes");
        json.push('\n');
        write_file(&dir.join(CONFIG_ECHO), json.as_bytes())
    }
}

fn parse_lambda(s: &str) -> Result<Option<f64>> {
    if s.eq_ignore_ascii_case("optimize") {
        return Ok(None);
    }
    let v: f64 = s
        .parse()
        .map_err(|_| Error::Config(format!("lambda `{s}` is neither a number nor `optimize`")))?;
    Ok(Some(v))
}

/// Schema of `metrics.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub schema_version: u32,
    pub modality: Modality,
    pub metric_space: MetricSpace,
    pub n: usize,
    pub k: usize,
    pub method: ClusterMethod,
    pub lambda: Option<f64>,
    pub lambda_feasible: Option<bool>,
    pub lambda_satisfied_fraction: Option<f64>,
    pub candidates: Vec<usize>,
    pub cluster_sizes: Vec<usize>,
    pub objective: f64,
    #[serde(flatten)]
    pub metrics: MetricBundle,
}

impl MetricsReport {
    pub fn from_result(r: &AscResult) -> Self {
        let a = &r.spectral.assignment;
        Self {
            schema_version: METRICS_SCHEMA_VERSION,
            modality: r.modality,
            metric_space: r.metric_space,
            n: a.labels.len(),
            k: a.k,
            method: a.method,
            lambda: r.lambda,
            lambda_feasible: r.lambda_search.as_ref().map(|s| s.feasible),
            lambda_satisfied_fraction: r.lambda_search.as_ref().map(|s| s.satisfied_fraction),
            candidates: r.spectral.gaps.candidates.clone(),
            cluster_sizes: a.sizes(),
            objective: a.objective,
            metrics: r.metrics.clone(),
        }
    }
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut json = serde_json::to_string_pretty(value).expect("report serializes");
    json.push('\n');
    write_file(path, json.as_bytes())
}

fn prepare_out(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn need<'a>(slot: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
    slot.as_deref()
        .ok_or_else(|| Error::Config(format!("missing --{flag}")))
}

struct Inputs {
    numeric: Option<NumericDataset>,
    text: Option<TextDataset>,
    constraints: Option<ConstraintSets>,
}

fn load_inputs(cfg: &PipelineConfig, want_numeric: bool, want_text: bool) -> Result<Inputs> {
    let numeric = if want_numeric || cfg.numeric.is_some() {
        Some(load_numeric_csv(need(&cfg.numeric, "numeric")?)?)
    } else {
        None
    };
    let text = if want_text || cfg.text.is_some() {
        let tf = need(&cfg.text, "text")?;
        let lex = need(&cfg.lexicon, "lexicon")?;
        let samples = numeric
            .as_ref()
            .map(|d| d.samples.clone())
            .ok_or_else(|| Error::Config("text rows are aligned to --numeric ids".into()))?;
        Some(load_term_frequency(tf, lex, &samples)?)
    } else {
        None
    };
    let constraints = match (&cfg.constraints, &numeric) {
        (Some(p), Some(d)) => Some(load_constraints(p, d.n())?),
        (Some(_), None) => {
            return Err(Error::Config("constraints need the numeric dataset".into()))
        }
        _ => None,
    };
    Ok(Inputs {
        numeric,
        text,
        constraints,
    })
}

fn write_spectral(run: &SpectralRun, ids: &[String], out: &Path) -> Result<()> {
    write_assignments_csv(ids, &run.assignment.labels, out.join("assignments.csv"))?;
    write_k_selection_csv(&run.selection, out.join("k_selection.csv"))?;
    write_eigen_report_csv(&run.decomposition, &run.gaps, out.join("eigen_report.csv"))
}

fn write_run(r: &AscResult, inputs: &Inputs, out: &Path) -> Result<()> {
    let ids = match (&inputs.numeric, &inputs.text) {
        (Some(d), _) => d.samples.clone(),
        (None, Some(t)) => t.samples.clone(),
        (None, None) => unreachable!("a run always has one modality"),
    };
    write_spectral(&r.spectral, &ids, out)?;
    write_json(&MetricsReport::from_result(r), &out.join("metrics.json"))?;
    let grid = r.lambda_search.as_ref().map_or(&[][..], |s| &s.grid[..]);
    write_lambda_grid_csv(grid, out.join("lambda_grid.csv"))?;
    let profile = match &inputs.text {
        Some(t) => word_frequency_ratio(t, r.labels())?,
        None => ClusterProfile {
            terms: Vec::new(),
            k: r.k(),
            ratios: Vec::new(),
            dominant: Vec::new(),
        },
    };
    write_profile_csv(&profile, out.join("profile.csv"))
}

fn summary_line(r: &AscResult) -> String {
    let lambda = r.lambda.map_or_else(|| "-".to_owned(), |l| format!("{l:.2}"));
    format!(
        "{}: lambda={lambda} k={} candidates={:?} silhouette={:.4}",
        r.modality, r.k(), r.spectral.gaps.candidates, r.metrics.silhouette
    )
}

fn cmd_cluster(args: &ClusterArgs) -> Result<String> {
    let cfg = PipelineConfig::build("cluster", &args.run.input, &args.run.pipeline)?;
    let out = &args.run.output.out;
    let inputs = load_inputs(&cfg, true, true)?;
    let (numeric, text) = (inputs.numeric.as_ref().unwrap(), inputs.text.as_ref().unwrap());
    let r = run_asc(numeric, text, inputs.constraints.as_ref(), &cfg.pipeline)?;
    prepare_out(out)?;
    write_run(&r, &inputs, out)?;
    if args.save_similarity {
        write_similarity_bin(&r.similarity, out.join("similarity.bin"))?;
    }
    cfg.write_echo(out)?;
    Ok(summary_line(&r))
}

fn cmd_optimize_lambda(args: &RunArgs) -> Result<String> {
    let cfg = PipelineConfig::build("optimize-lambda", &args.input, &args.pipeline)?;
    let inputs = load_inputs(&cfg, true, true)?;
    let c = inputs
        .constraints
        .as_ref()
        .ok_or_else(|| Error::Config("optimize-lambda needs --constraints".into()))?;
    let p = &cfg.pipeline;
    let mut wn = numeric_similarity_matrix(inputs.numeric.as_ref().unwrap())?;
    if p.rescale_numeric {
        wn = rescale_unit(&wn);
    }
    let wt = text_similarity_matrix(inputs.text.as_ref().unwrap())?;
    let opts = LambdaOptions {
        step: p.lambda_step,
        max_triples: p.max_triples,
        seed: seed::derive(p.seed, "lambda/triples"),
        literal_rhs: p.literal_lambda_rhs,
    };
    let s = optimize_lambda(&wn, &wt, c, &opts).map_err(|e| e.at_step(3, "fusion weight"))?;
    let out = &args.output.out;
    prepare_out(out)?;
    write_lambda_grid_csv(&s.grid, out.join("lambda_grid.csv"))?;
    cfg.write_echo(out)?;
    Ok(format!(
        "lambda={:.2} objective={:.4} feasible={} satisfied={:.4} triples={}",
        s.lambda, s.objective, s.feasible, s.satisfied_fraction, s.triples
    ))
}

fn cmd_select_k(args: &SelectKArgs) -> Result<String> {
    let mut cfg = PipelineConfig::build("select-k", &args.run.input, &args.run.pipeline)?;
    if args.similarity.is_some() {
        cfg.similarity.clone_from(&args.similarity);
    }
    let out = &args.run.output.out;
    let (w, ids) = match &cfg.similarity {
        Some(path) => {
            let w = read_similarity_bin(path)?;
            let ids = (0..w.n()).map(|i| i.to_string()).collect();
            (w, ids)
        }
        None => {
            let inputs = load_inputs(&cfg, true, true)?;
            let numeric = inputs.numeric.as_ref().unwrap();
            let mut wn = numeric_similarity_matrix(numeric)?;
            if cfg.pipeline.rescale_numeric {
                wn = rescale_unit(&wn);
            }
            let wt = text_similarity_matrix(inputs.text.as_ref().unwrap())?;
            let lambda = cfg.pipeline.lambda.ok_or_else(|| {
                Error::Config("select-k without --similarity needs a fixed --lambda".into())
            })?;
            (fuse_similarity(&wn, &wt, lambda)?, numeric.samples.clone())
        }
    };
    let run = cluster_similarity(&w, &cfg.pipeline)?;
    prepare_out(out)?;
    write_spectral(&run, &ids, out)?;
    cfg.write_echo(out)?;
    Ok(format!(
        "k={} candidates={:?}",
        run.selection.chosen_k, run.gaps.candidates
    ))
}

fn cmd_ablate(args: &AblateArgs) -> Result<String> {
    let mut cfg = PipelineConfig::build("ablate", &args.run.input, &args.run.pipeline)?;
    cfg.modality = args.modality;
    let want_text = match args.modality {
        Modality::Numeric => false,
        Modality::Text => true,
        Modality::Fused => return Err(Error::Config("ablate takes numeric or text; use cluster for fused runs".into())),
    };
    // Text rows are keyed by the numeric ids, so numeric is always loaded.
    let inputs = load_inputs(&cfg, true, want_text)?;
    let numeric = match (args.modality, cfg.pipeline.metric_space) {
        (Modality::Numeric, _) | (_, MetricSpace::Numeric) => inputs.numeric.as_ref(),
        _ => None,
    };
    let r = run_single_modality(numeric, inputs.text.as_ref(), args.modality, &cfg.pipeline)?;
    let out = &args.run.output.out;
    prepare_out(out)?;
    write_run(&r, &inputs, out)?;
    cfg.write_echo(out)?;
    Ok(summary_line(&r))
}

fn cmd_profile(args: &ProfileArgs) -> Result<String> {
    let (ids, labels) = read_assignments_csv(&args.assignments)?;
    let text = load_term_frequency(&args.text, &args.lexicon, &ids)?;
    let profile = word_frequency_ratio(&text, &labels)?;
    prepare_out(&args.out)?;
    write_profile_csv(&profile, args.out.join("profile.csv"))?;
    Ok(format!("{} terms over {} clusters", profile.terms.len(), profile.k))
}

fn cmd_synth(args: &SynthArgs) -> Result<String> {
    let mut spec = match &args.spec {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            serde_json::from_str::<SyntheticSpec>(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
        }
        None => SyntheticSpec::default(),
    };
    macro_rules! set {
        ($($field:ident),*) => {$(
            if let Some(v) = args.$field {
                spec.$field = v;
            }
        )*};
    }
    set!(n, clusters, seed, features, numeric_noise, text_noise, topic_rate);
    let b = generate_synthetic(&spec)?;
    let out = &args.out;
    prepare_out(out)?;
    write_numeric_csv(&b.numeric, out.join("numeric.csv"))?;
    write_term_frequency(&b.text, out.join("text.csv"))?;
    write_lexicon(&b.text.lexicon, out.join("lexicon.txt"))?;
    write_constraints(&b.constraints, out.join("constraints.json"))?;
    write_assignments_csv(&b.numeric.samples, &b.labels, out.join("labels.csv"))?;
    Ok(format!(
        "{} samples, {} features, {} terms, {} clusters",
        b.numeric.n(),
        b.numeric.p(),
        b.text.q(),
        spec.clusters
    ))
}

#[derive(Debug, Serialize)]
struct EvalReport {
    n: usize,
    ari: f64,
}

fn cmd_eval(args: &EvalArgs) -> Result<String> {
    if let Some(path) = &args.summary_of {
        let summary = dataset_summary(&load_numeric_csv(path)?)?;
        if let Some(dir) = &args.out {
            prepare_out(dir)?;
            write_summary_csv(&summary, dir.join("summary.csv"))?;
        }
        let table = summary_csv(&summary);
        return Ok(table.trim_end().to_owned());
    }
    let (Some(a), Some(t)) = (&args.assignments, &args.truth) else {
        return Err(Error::Config("eval needs --assignments with --truth, or --summary-of".into()));
    };
    let (ids, labels) = read_assignments_csv(a)?;
    let (truth_ids, truth) = read_assignments_csv(t)?;
    let index: std::collections::HashMap<&str, usize> =
        truth_ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let aligned = ids
        .iter()
        .map(|id| {
            index
                .get(id.as_str())
                .map(|&i| truth[i])
                .ok_or_else(|| Error::InvalidInput(format!("id `{id}` missing from {}", t.display())))
        })
        .collect::<Result<Vec<_>>>()?;
    let report = EvalReport {
        n: labels.len(),
        ari: adjusted_rand_index(&labels, &aligned)?,
    };
    if let Some(dir) = &args.out {
        prepare_out(dir)?;
        write_json(&report, &dir.join("eval.json"))?;
    }
    Ok(format!("ari={:.6} n={}", report.ari, report.n))
}

fn threads_of(command: &Command) -> Option<usize> {
    match command {
        Command::Cluster(a) => a.run.output.threads,
        Command::OptimizeLambda(a) => a.output.threads,
        Command::SelectK(a) => a.run.output.threads,
        Command::Ablate(a) => a.run.output.threads,
        _ => None,
    }
}

/// Run a parsed command; the returned line is meant for stdout.
pub fn run(cli: &Cli) -> Result<String> {
    let work = || match &cli.command {
        Command::Cluster(a) => cmd_cluster(a),
        Command::OptimizeLambda(a) => cmd_optimize_lambda(a),
        Command::SelectK(a) => cmd_select_k(a),
        Command::Ablate(a) => cmd_ablate(a),
        Command::Profile(a) => cmd_profile(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Eval(a) => cmd_eval(a),
    };
    match threads_of(&cli.command) {
        Some(0) => Err(Error::Config("--threads must be positive".into())),
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(work),
        None => work(),
    }
}

/// Process exit status for an error: 1 input, 2 numerical, 3 configuration.
pub fn exit_code(e: &Error) -> i32 {
    match e.kind() {
        ErrorKind::Input => 1,
        ErrorKind::Numerical => 2,
        ErrorKind::Config => 3,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lambda_flag_parses() {
        assert_eq!(parse_lambda("optimize").unwrap(), None);
        assert_eq!(parse_lambda("0.65").unwrap(), Some(0.65));
        assert!(matches!(parse_lambda("lots"), Err(Error::Config(_))));
    }

    #[test]
    fn flags_override_loaded_config() {
        let dir = tempfile::tempdir().unwrap();
        let mut base = PipelineConfig::new("cluster");
        base.pipeline.restarts = 3;
        base.numeric = Some("a.csv".into());
        base.write_echo(dir.path()).unwrap();
        let args = PipelineArgs {
            config: Some(dir.path().join(CONFIG_ECHO)),
            seed: Some(7),
            no_rescale: true,
            ..Default::default()
        };
        let cfg = PipelineConfig::build("cluster", &InputArgs::default(), &args).unwrap();
        assert_eq!(cfg.pipeline.restarts, 3);
        assert_eq!(cfg.pipeline.seed, 7);
        assert!(!cfg.pipeline.rescale_numeric);
        assert_eq!(cfg.numeric.as_deref(), Some(Path::new("a.csv")));
    }

    #[test]
    fn bad_step_is_a_config_error() {
        let args = PipelineArgs {
            lambda_step: Some(0.3),
            ..Default::default()
        };
        let e = PipelineConfig::build("cluster", &InputArgs::default(), &args).unwrap_err();
        assert_eq!(exit_code(&e), 3);
    }

    #[test]
    fn clap_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
