use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};

use mas_attribution::config::{Config, EmbedderKind};
use mas_attribution::features::{HttpSimilarity, LexicalSimilarity, SimilarityProvider};
use mas_attribution::graph::{build_data_graph, invert, project_to_agent_graph};
use mas_attribution::pipeline::{attribute, evaluate_corpus, Method};
use mas_attribution::ranking::FinalScoreWeights;
use mas_attribution::synth::{generate_corpus, load_corpus, write_corpus, SynthSpec};
use mas_attribution::trace::{infer_io_links, read_bundle_file, read_trace_file};
use mas_attribution::Error;

#[derive(Parser)]
#[command(name = "mas-attribution", version, about = "Failure attribution for multi-agent execution traces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: GlobalOpts,
}

#[derive(Args)]
struct GlobalOpts {
    /// JSON config file; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long = "theta-success", global = true)]
    theta_success: Option<f64>,
    #[arg(long = "alpha-sig", global = true)]
    alpha_sig: Option<f64>,
    #[arg(long, global = true)]
    permutations: Option<usize>,
    #[arg(long, global = true)]
    bootstrap: Option<usize>,
    /// Final score weights `w1,w2,w3`.
    #[arg(long, global = true)]
    weights: Option<String>,
    #[arg(long, global = true, value_enum)]
    embedder: Option<Embedder>,
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Embedder {
    Mock,
    Http,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Causal,
    Random,
}

#[derive(Subcommand)]
enum Command {
    /// Attribute one or more failed traces.
    Attribute {
        traces: Vec<PathBuf>,
        /// Reference runs (native bundle). Defaults to `<id>.reference.jsonl`
        /// next to a `<id>.trace.jsonl` input when present.
        #[arg(long)]
        reference: Option<PathBuf>,
    },
    /// Score a corpus with ground-truth sidecars.
    Evaluate {
        corpus: PathBuf,
        #[arg(long, value_enum, default_value = "causal")]
        method: MethodArg,
    },
    /// Generate a synthetic corpus.
    Synth {
        spec: PathBuf,
        #[arg(long, default_value_t = 200)]
        count: usize,
    },
    /// Write the data-dependency and performance graphs as DOT.
    ExportGraph { trace: PathBuf },
}

enum Failure {
    Input(String),
    Internal(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Input(e.to_string())
    }
}

fn build_config(o: &GlobalOpts) -> Result<Config, Error> {
    let mut c = match &o.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    if let Some(v) = o.seed {
        c.seed = v;
    }
    if let Some(v) = o.theta_success {
        c.success_threshold = v;
    }
    if let Some(v) = o.alpha_sig {
        c.cdc.alpha_sig = v;
    }
    if let Some(v) = o.permutations {
        c.shapley.permutations = v;
    }
    if let Some(v) = o.bootstrap {
        c.ranking.bootstrap = v;
    }
    if let Some(w) = &o.weights {
        c.ranking.weights = FinalScoreWeights::parse(w)?;
    }
    if let Some(e) = o.embedder {
        c.embedder.kind = match e {
            Embedder::Mock => EmbedderKind::Mock,
            Embedder::Http => EmbedderKind::Http,
        };
    }
    if let Some(j) = o.jobs {
        c.jobs = j;
    }
    c.validate()?;
    // Only the first call takes effect; each process runs one command.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(c.jobs).build_global();
    Ok(c)
}

fn provider(c: &Config) -> Result<Box<dyn SimilarityProvider>, Error> {
    Ok(match c.embedder.kind {
        EmbedderKind::Mock => Box::new(LexicalSimilarity),
        EmbedderKind::Http => Box::new(HttpSimilarity::from_env(
            Duration::from_millis(c.embedder.timeout_ms),
            c.embedder.max_in_flight,
        )?),
    })
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn out_dir(o: &GlobalOpts, default: &str) -> Result<PathBuf, Failure> {
    let dir = o.out.clone().unwrap_or_else(|| PathBuf::from(default));
    std::fs::create_dir_all(&dir).map_err(|e| Failure::Input(format!("{}: {e}", dir.display())))?;
    Ok(dir)
}

fn sibling_reference(trace: &Path) -> Option<PathBuf> {
    let name = trace.file_name()?.to_string_lossy().to_string();
    let id = name.strip_suffix(".trace.jsonl")?;
    let p = trace.with_file_name(format!("{id}.reference.jsonl"));
    p.exists().then_some(p)
}

fn cmd_attribute(o: &GlobalOpts, traces: &[PathBuf], reference: Option<&Path>) -> Result<u8, Failure> {
    let config = build_config(o)?;
    if traces.is_empty() {
        return Err(Failure::Input("no trace paths given".into()));
    }
    let provider = provider(&config)?;
    let dir = out_dir(o, ".")?;
    let mut code = 0u8;
    for path in traces {
        let trace = read_trace_file(path).map_err(|e| Failure::Input(format!("stage ingest: {e}")))?;
        let ref_path = reference.map(Path::to_path_buf).or_else(|| sibling_reference(path));
        let refs = match &ref_path {
            Some(p) => Some(read_bundle_file(p).map_err(|e| Failure::Input(format!("stage ingest: {e}")))?),
            None => None,
        };
        let run = attribute(&trace, refs.as_deref(), &config, provider.as_ref())
            .map_err(|e| Failure::Input(format!("stage ingest: {e}")))?;
        let report = &run.report;
        let json_path = dir.join(format!("{}.report.json", report.trace_id));
        let md_path = dir.join(format!("{}.report.md", report.trace_id));
        write(&json_path, &report.to_json())?;
        write(&md_path, &report.to_markdown(Some(&run.timings)))?;
        match (&report.failure, &report.diagnosis) {
            (Some(f), _) => {
                eprintln!("{}: stage {} failed: {}", report.trace_id, f.stage, f.message);
                code = code.max(3);
            }
            (None, Some(d)) => println!("{}: {d}", report.trace_id),
            (None, None) => {}
        }
        if report.low_confidence() {
            eprintln!("{}: all bottleneck scores were zero; low-confidence fallback", report.trace_id);
            code = code.max(1);
        }
    }
    Ok(code)
}

fn cmd_evaluate(o: &GlobalOpts, corpus: &Path, method: MethodArg) -> Result<u8, Failure> {
    let config = build_config(o)?;
    let provider = provider(&config)?;
    let entries = load_corpus(corpus)?;
    let method = match method {
        MethodArg::Causal => Method::Causal,
        MethodArg::Random => Method::Random,
    };
    let metrics = evaluate_corpus(&entries, method, &config, provider.as_ref());
    if metrics.n_instances == 0 {
        return Err(Failure::Input(format!("no instances with ground truth in {}", corpus.display())));
    }
    let dir = out_dir(o, ".")?;
    let name = match method {
        Method::Causal => "evaluation.causal.json",
        Method::Random => "evaluation.random.json",
    };
    let mut text = serde_json::to_string_pretty(&metrics).map_err(|e| Failure::Internal(e.to_string()))?;
    text.push('\n');
    write(&dir.join(name), &text)?;
    println!("| instances | agent accuracy | step accuracy | missing |");
    println!("|---:|---:|---:|---:|");
    println!(
        "| {} | {:.4} | {:.4} | {} |",
        metrics.n_instances,
        metrics.agent_accuracy,
        metrics.step_accuracy,
        metrics.missing.len()
    );
    Ok(0)
}

fn cmd_synth(o: &GlobalOpts, spec_path: &Path, count: usize) -> Result<u8, Failure> {
    let text = std::fs::read_to_string(spec_path).map_err(|e| Failure::Input(format!("{}: {e}", spec_path.display())))?;
    let mut spec = SynthSpec::from_json(&text)?;
    if let Some(seed) = o.seed {
        spec.seed = seed;
    }
    let dir = out_dir(o, "corpus")?;
    let corpus = generate_corpus(&spec, count)?;
    write_corpus(&dir, &corpus)?;
    println!("wrote {} instances to {}", corpus.len(), dir.display());
    Ok(0)
}

fn cmd_export_graph(o: &GlobalOpts, path: &Path) -> Result<u8, Failure> {
    let config = build_config(o)?;
    let mut trace = read_trace_file(path)?;
    trace.validate()?;
    if trace.steps.iter().all(|s| s.inputs.is_empty()) {
        trace = infer_io_links(&trace, config.overlap_threshold);
    }
    let id = trace.id.clone().unwrap_or_else(|| "trace".into());
    let data = build_data_graph(&trace);
    let perf = if config.invert { invert(&data) } else { data.without_inversion() };
    let dir = out_dir(o, ".")?;
    write(&dir.join(format!("{id}.data.dot")), &data.without_inversion().to_dot("data"))?;
    write(&dir.join(format!("{id}.perf.dot")), &perf.to_dot("performance"))?;
    let agents = project_to_agent_graph(&perf);
    let mut text = serde_json::to_string_pretty(&agents).map_err(|e| Failure::Internal(e.to_string()))?;
    text.push('\n');
    write(&dir.join(format!("{id}.agents.json")), &text)?;
    println!("wrote {id}.data.dot, {id}.perf.dot, {id}.agents.json to {}", dir.display());
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Attribute { traces, reference } => cmd_attribute(&cli.opts, traces, reference.as_deref()),
        Command::Evaluate { corpus, method } => cmd_evaluate(&cli.opts, corpus, *method),
        Command::Synth { spec, count } => cmd_synth(&cli.opts, spec, *count),
        Command::ExportGraph { trace } => cmd_export_graph(&cli.opts, trace),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Input(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Internal(m)) => {
            eprintln!("internal error: {m}");
            ExitCode::from(3)
        }
    }
}
