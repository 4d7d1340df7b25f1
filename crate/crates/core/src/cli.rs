//! Command-line front end: `cluster`, `tune`, `gen`, `validate`, `vectorize`
//! and `render`.
//!
//! Exit codes: 0 success, 1 data or validation error, 2 usage error.
//! Failures print one line to stderr naming the stage that failed.

use std::ffi::OsString;
use std::fs;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::corpus::{Corpus, Document};
use crate::error::Error;
use crate::eval::{self, doc_label, DocLabel, TuneOptions};
use crate::hierarchy::{hierarchical_cluster, ClusterConfig, KChoice, PhaseSpec};
use crate::kb::KnowledgeBase;
use crate::report::{self, ClusterReport, ConfigEcho, EntropyRow, TuneSummary};
use crate::synth::{self, SyntheticParams};
use crate::vsm::{parse_spaces, FeatureSpace, SpaceModel};

pub const EXIT_DATA: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "neclust",
    version,
    about = "Cluster documents by their named entities"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Cluster a corpus hierarchically and write a JSON report.
    Cluster(ClusterArgs),
    /// Sweep k on one feature space and report entropies per k.
    Tune(TuneArgs),
    /// Generate a synthetic knowledge base and corpus with planted groups.
    Gen(GenArgs),
    /// Check that a knowledge base and corpus load cleanly.
    Validate(InputArgs),
    /// Dump per-document tf.idf vectors as JSON-Lines.
    Vectorize(VectorizeArgs),
    /// Re-render the HTML tree of an existing JSON report.
    Render(RenderArgs),
}

#[derive(Debug, Args)]
struct InputArgs {
    /// Knowledge base (JSON).
    #[arg(long)]
    kb: PathBuf,
    /// Annotated corpus (JSON-Lines).
    #[arg(long)]
    corpus: PathBuf,
}

#[derive(Debug, Args)]
struct ModelArgs {
    #[arg(long, default_value_t = eval::DEFAULT_ALPHA)]
    alpha: f64,
    /// Confidence threshold as a fraction of a document's total weight.
    #[arg(long, default_value_t = eval::DEFAULT_TC_FRACTION)]
    tc: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 4)]
    restarts: usize,
    #[arg(long = "max-iter", default_value_t = 100)]
    max_iter: usize,
    /// Sweep k over 1..=N when tuning instead of 2..=min(N, 50).
    #[arg(long)]
    full_sweep: bool,
    /// Worker threads (0 = one per core). Does not affect results.
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

#[derive(Debug, Args)]
struct ClusterArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    model: ModelArgs,
    /// Comma-separated feature spaces, one per phase: name|type|nametype|identifier.
    #[arg(long, default_value = "type")]
    phases: String,
    /// Comma-separated k per phase (`auto` to tune); the last value repeats.
    #[arg(long, default_value = "auto")]
    k: String,
    #[arg(long, default_value_t = 2)]
    min_split_size: usize,
    /// Recompute document frequencies within each cluster before splitting it.
    #[arg(long)]
    rescope_idf: bool,
    /// JSON report path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write a static HTML tree here.
    #[arg(long)]
    html: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TuneArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    model: ModelArgs,
    /// Feature space to cluster on.
    #[arg(long, default_value = "type")]
    space: String,
    /// Inclusive range `LO..HI` or a comma-separated list of k values.
    #[arg(long)]
    k_range: Option<String>,
    /// CSV table path (stdout when omitted).
    #[arg(long)]
    csv: Option<PathBuf>,
    /// JSON summary path.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GenArgs {
    #[arg(long, default_value_t = 3)]
    groups: usize,
    #[arg(long, default_value_t = 20)]
    docs_per_group: usize,
    #[arg(long, default_value_t = 10)]
    mentions_per_doc: usize,
    #[arg(long, default_value_t = 0.1)]
    noise: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 4)]
    entities_per_group: usize,
    #[arg(long, default_value_t = 1)]
    aliases_per_entity: usize,
    /// Probability that an in-group mention refers to the document's focus entity.
    #[arg(long, default_value_t = 0.8)]
    focus: f64,
    /// Output knowledge base path.
    #[arg(long)]
    kb: PathBuf,
    /// Output corpus path.
    #[arg(long)]
    corpus: PathBuf,
}

#[derive(Debug, Args)]
struct VectorizeArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, default_value = "name,type,nametype,identifier")]
    phases: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RenderArgs {
    /// JSON report written by `cluster`.
    #[arg(long)]
    report: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

/// A failed stage with the exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub stage: &'static str,
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn usage(stage: &'static str, message: impl Into<String>) -> Self {
        Failure {
            stage,
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
}

trait Stage<T> {
    fn stage(self, stage: &'static str) -> Result<T, Failure>;
}

impl<T> Stage<T> for Result<T, Error> {
    fn stage(self, stage: &'static str) -> Result<T, Failure> {
        self.map_err(|e| Failure {
            stage,
            code: if e.is_usage() { EXIT_USAGE } else { EXIT_DATA },
            message: e.to_string(),
        })
    }
}

impl<T> Stage<T> for io::Result<T> {
    fn stage(self, stage: &'static str) -> Result<T, Failure> {
        self.map_err(|e| Failure {
            stage,
            code: EXIT_DATA,
            message: e.to_string(),
        })
    }
}

fn open(path: &Path, stage: &'static str) -> Result<BufReader<fs::File>, Failure> {
    fs::File::open(path).map(BufReader::new).map_err(|e| {
        let code = if e.kind() == io::ErrorKind::NotFound {
            EXIT_USAGE
        } else {
            EXIT_DATA
        };
        Failure {
            stage,
            code,
            message: format!("{}: {e}", path.display()),
        }
    })
}

fn load_inputs(input: &InputArgs) -> Result<(KnowledgeBase, Corpus), Failure> {
    let kb = KnowledgeBase::load(open(&input.kb, "load_kb")?).stage("load_kb")?;
    let corpus = Corpus::load(open(&input.corpus, "load_corpus")?, &kb).stage("load_corpus")?;
    Ok((kb, corpus))
}

fn emit(path: Option<&Path>, contents: &str, stage: &'static str) -> Result<(), Failure> {
    match path {
        Some(p) => fs::write(p, contents).stage(stage),
        None => io::stdout().lock().write_all(contents.as_bytes()).stage(stage),
    }
}

fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T, Failure> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Failure::usage("threads", e.to_string()))?;
    Ok(pool.install(f))
}

fn cluster_config(m: &ModelArgs, min_split_size: usize, rescope_idf: bool) -> ClusterConfig {
    ClusterConfig {
        seed: m.seed,
        max_iterations: m.max_iter,
        restarts: m.restarts,
        min_split_size,
        alpha: m.alpha,
        tc_fraction: m.tc,
        rescope_idf,
        full_sweep: m.full_sweep,
    }
}

/// Pairs spaces with per-phase k values, repeating the last k.
pub fn phase_specs(phases: &str, ks: &str) -> crate::Result<Vec<PhaseSpec>> {
    let spaces = parse_spaces(phases)?;
    let ks: Vec<KChoice> = ks.split(',').map(str::parse).collect::<crate::Result<_>>()?;
    if ks.len() > spaces.len() {
        return Err(Error::InvalidParameter(format!(
            "{} k values for {} phases",
            ks.len(),
            spaces.len()
        )));
    }
    Ok(spaces
        .into_iter()
        .enumerate()
        .map(|(i, space)| PhaseSpec {
            space,
            k: ks[i.min(ks.len() - 1)],
        })
        .collect())
}

/// `LO..HI` (inclusive) or `k1,k2,...`.
pub fn parse_k_range(s: &str) -> crate::Result<Vec<usize>> {
    let bad = || Error::InvalidParameter(format!("malformed k range '{s}'"));
    let range: Vec<usize> = if let Some((lo, hi)) = s.split_once("..") {
        let lo: usize = lo.trim().parse().map_err(|_| bad())?;
        let hi: usize = hi.trim_start_matches('=').trim().parse().map_err(|_| bad())?;
        (lo..=hi).collect()
    } else {
        s.split(',')
            .filter(|p| !p.trim().is_empty())
            .map(|p| p.trim().parse().map_err(|_| bad()))
            .collect::<crate::Result<_>>()?
    };
    if range.is_empty() {
        return Err(Error::InvalidParameter(format!("empty k range '{s}'")));
    }
    Ok(range)
}

fn cmd_cluster(args: &ClusterArgs) -> Result<(), Failure> {
    let phases = phase_specs(&args.phases, &args.k).stage("config")?;
    let cfg = cluster_config(&args.model, args.min_split_size, args.rescope_idf);
    cfg.validate().stage("config")?;
    let (kb, corpus) = load_inputs(&args.input)?;
    if corpus.is_empty() {
        return Err(Failure {
            stage: "load_corpus",
            code: EXIT_DATA,
            message: "corpus has no documents".into(),
        });
    }
    let hierarchy = with_threads(args.model.threads, || {
        hierarchical_cluster(&corpus, &phases, &cfg, &kb)
    })?
    .stage("cluster")?;
    let echo = ConfigEcho::new(
        &args.input.kb.to_string_lossy(),
        &args.input.corpus.to_string_lossy(),
        &phases,
        &cfg,
    );
    let report = ClusterReport::new(echo, &hierarchy, &corpus);
    emit(args.out.as_deref(), &report.to_json(), "write_report")?;
    if let Some(html) = &args.html {
        fs::write(html, report::render_html(&report)).stage("write_html")?;
    }
    Ok(())
}

fn cmd_tune(args: &TuneArgs) -> Result<(), Failure> {
    let space: FeatureSpace = args.space.parse::<FeatureSpace>().stage("config")?;
    let explicit = args
        .k_range
        .as_deref()
        .map(parse_k_range)
        .transpose()
        .stage("config")?;
    let cfg = cluster_config(&args.model, 2, false);
    cfg.validate().stage("config")?;
    let (kb, corpus) = load_inputs(&args.input)?;
    let n = corpus.len();
    let range = match explicit {
        Some(r) => r,
        None if args.model.full_sweep => (1..=n).collect(),
        None => eval::default_k_range(n),
    };
    let opts = TuneOptions {
        alpha: cfg.alpha,
        restarts: cfg.restarts,
        seed: cfg.seed,
        max_iterations: cfg.max_iterations,
    };
    let result = with_threads(args.model.threads, || -> crate::Result<_> {
        let docs: Vec<&Document> = corpus.documents.iter().collect();
        let model = SpaceModel::build(&docs, space, &kb)?;
        let labels = model
            .vectors
            .iter()
            .map(|v| doc_label(v, &model.index, cfg.tc_fraction))
            .collect::<crate::Result<Vec<DocLabel>>>()?;
        eval::tune_k(&model.vectors, &labels, &range, &opts)
    })?
    .stage("tune")?;
    emit(
        args.csv.as_deref(),
        &report::tuning_csv(&result.table),
        "write_csv",
    )?;
    let best = result
        .table
        .iter()
        .find(|r| r.k == result.best_k)
        .expect("best k is in the table");
    let summary = TuneSummary {
        space,
        documents: n,
        alpha: cfg.alpha,
        tc_fraction: cfg.tc_fraction,
        seed: cfg.seed,
        restarts: cfg.restarts,
        k_range: range,
        best_k: result.best_k,
        best: EntropyRow::from(best),
    };
    let mut json = serde_json::to_string_pretty(&summary).expect("summary serialization is infallible");
    json.push('\n');
    match &args.out {
        Some(p) => fs::write(p, json).stage("write_summary")?,
        None => eprintln!("best_k={}", result.best_k),
    }
    Ok(())
}

fn cmd_gen(args: &GenArgs) -> Result<(), Failure> {
    let params = SyntheticParams {
        groups: args.groups,
        docs_per_group: args.docs_per_group,
        mentions_per_doc: args.mentions_per_doc,
        noise_rate: args.noise,
        seed: args.seed,
        entities_per_group: args.entities_per_group,
        aliases_per_entity: args.aliases_per_entity,
        focus_rate: args.focus,
    };
    let s = synth::generate(&params).stage("gen")?;
    let mut kb_json = s.kb.to_json_string();
    kb_json.push('\n');
    fs::write(&args.kb, kb_json).stage("write_kb")?;
    fs::write(&args.corpus, s.corpus.to_jsonl()).stage("write_corpus")?;
    let mut out = io::stdout().lock();
    let summary = (|| -> io::Result<()> {
        writeln!(
            out,
            "generated {} documents in {} groups ({} mentions each, noise {}), seed {}",
            s.corpus.len(),
            params.groups,
            params.mentions_per_doc,
            params.noise_rate,
            params.seed
        )?;
        for g in 0..params.groups {
            let ids: Vec<String> = (0..params.entities_per_group)
                .map(|e| synth::entity_id(g, e))
                .collect();
            writeln!(
                out,
                "g{g}: type {} | {} documents | entities {}",
                synth::group_type(g),
                params.docs_per_group,
                ids.join(",")
            )?;
        }
        Ok(())
    })();
    summary.stage("gen")
}

fn cmd_validate(args: &InputArgs) -> Result<(), Failure> {
    let (kb, corpus) = load_inputs(args)?;
    println!(
        "ok: {} types, {} entities, {} documents",
        kb.hierarchy().len(),
        kb.entities().len(),
        corpus.len()
    );
    Ok(())
}

fn cmd_vectorize(args: &VectorizeArgs) -> Result<(), Failure> {
    let spaces = parse_spaces(&args.phases).stage("config")?;
    let (kb, corpus) = load_inputs(&args.input)?;
    let docs: Vec<&Document> = corpus.documents.iter().collect();
    let mut out = String::new();
    for space in spaces {
        let model = SpaceModel::build(&docs, space, &kb).stage("vectorize")?;
        out.push_str(&report::vectors_jsonl(&corpus, &model));
    }
    emit(args.out.as_deref(), &out, "write_vectors")
}

fn cmd_render(args: &RenderArgs) -> Result<(), Failure> {
    let text = fs::read_to_string(&args.report).map_err(|e| Failure {
        stage: "load_report",
        code: if e.kind() == io::ErrorKind::NotFound {
            EXIT_USAGE
        } else {
            EXIT_DATA
        },
        message: format!("{}: {e}", args.report.display()),
    })?;
    let report = ClusterReport::from_json(&text).map_err(|e| Failure {
        stage: "load_report",
        code: EXIT_DATA,
        message: e.to_string(),
    })?;
    fs::write(&args.out, report::render_html(&report)).stage("write_html")
}

/// Parses `args` (program name first) and runs the subcommand. Returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let result = match &cli.command {
        Command::Cluster(a) => cmd_cluster(a),
        Command::Tune(a) => cmd_tune(a),
        Command::Gen(a) => cmd_gen(a),
        Command::Validate(a) => cmd_validate(a),
        Command::Vectorize(a) => cmd_vectorize(a),
        Command::Render(a) => cmd_render(a),
    };
    match result {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("neclust: stage={}: {}", f.stage, f.message.replace('\n', " "));
            f.code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phase_parsing() {
        let p = phase_specs("type,identifier", "3,auto").unwrap();
        assert_eq!(
            p[0],
            PhaseSpec {
                space: FeatureSpace::Type,
                k: KChoice::Fixed(3)
            }
        );
        assert_eq!(
            p[1],
            PhaseSpec {
                space: FeatureSpace::Identifier,
                k: KChoice::Auto
            }
        );
        let p = phase_specs("type,identifier", "auto").unwrap();
        assert!(p.iter().all(|s| s.k == KChoice::Auto));
        assert!(phase_specs("type", "1,2").is_err());
        assert!(phase_specs("types", "1").is_err());
    }

    #[test]
    fn k_range_parsing() {
        assert_eq!(parse_k_range("2..10").unwrap(), (2..=10).collect::<Vec<_>>());
        assert_eq!(parse_k_range("2..=4").unwrap(), [2, 3, 4]);
        assert_eq!(parse_k_range("3,5").unwrap(), [3, 5]);
        assert!(parse_k_range("5..2").unwrap_err().is_usage());
        assert!(parse_k_range("").is_err());
        assert!(parse_k_range("a..b").is_err());
    }
}
