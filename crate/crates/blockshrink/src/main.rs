use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process;

use blockshrink::error::{Error, Result};
use blockshrink::experiment::{
    candidate_docs, run_experiment, simulate, ExperimentConfig, ModelKind,
};
use blockshrink::formats::{scores_csv, EstimateDoc};
use blockshrink::io::{labels_bytes, read_dataset, read_graph, write_atomic};
use blockshrink::pipeline::{choose, fit_candidates, parse_k_range};
use blockshrink::realdata::{medians, split_protocol, splits_csv};
use blockshrink_core::community::VemOptions;
use blockshrink_core::eval::{theta_star, TRAIN_FRACTION};
use blockshrink_core::select::{Criterion, CvrpMode};
use clap::{Args, Parser, Subcommand, ValueEnum};

const OUT_ENV: &str = "BLOCKSHRINK_OUT";
const DEFAULT_ROOT: &str = "blockshrink-out";

/// Empirical-Bayes block-model and graphon estimation.
#[derive(Debug, Parser)]
#[command(name = "blockshrink", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample graphs from a generative model, with truth sidecars.
    Simulate(SimulateArgs),
    /// Detect communities and estimate connectivity for each K.
    Estimate(EstimateArgs),
    /// Score every K and report the selected one.
    Select(SelectArgs),
    /// Held-out likelihood of MLE, EB and fixed-prior estimates on an annotated graph.
    Evaluate(EvaluateArgs),
    /// Replicated simulation or real-data experiment with summary tables.
    Experiment(ExperimentArgs),
    /// Convert a SNAP-style edge list and label file to integer ids.
    Ingest(IngestArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CriterionArg {
    Eb,
    Cvrp,
}

impl From<CriterionArg> for Criterion {
    fn from(c: CriterionArg) -> Self {
        match c {
            CriterionArg::Eb => Criterion::Eb,
            CriterionArg::Cvrp => Criterion::Cvrp,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CvrpModeArg {
    Literal,
    Squared,
}

impl From<CvrpModeArg> for CvrpMode {
    fn from(c: CvrpModeArg) -> Self {
        match c {
            CvrpModeArg::Literal => CvrpMode::Literal,
            CvrpModeArg::Squared => CvrpMode::Squared,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModelArg {
    SbmAffiliation,
    GraphonPowerlaw,
    File,
}

impl From<ModelArg> for ModelKind {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::SbmAffiliation => ModelKind::SbmAffiliation,
            ModelArg::GraphonPowerlaw => ModelKind::GraphonPowerlaw,
            ModelArg::File => ModelKind::File,
        }
    }
}

/// Model and replicate settings; unset flags fall back to `--config`, then
/// to the dense affiliation defaults.
#[derive(Debug, Args)]
struct ModelArgs {
    /// JSON experiment config, or a manifest.json from an earlier run.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    model: Option<ModelArg>,
    /// Number of nodes [default: 200]
    #[arg(long)]
    n: Option<usize>,
    /// Number of planted blocks [default: 10]
    #[arg(long)]
    k_star: Option<usize>,
    /// Within-block probability, or the graphon exponent [default: 0.9]
    #[arg(long)]
    lambda: Option<f64>,
    /// Between-block probability [default: 0.1]
    #[arg(long)]
    epsilon: Option<f64>,
    /// Density scale [default: 1]
    #[arg(long)]
    rho: Option<f64>,
    /// Replicates (or splits for real data) [default: 20]
    #[arg(long)]
    replicates: Option<usize>,
    /// Base seed; replicate r uses seed + r [default: 1]
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads [default: available cores]
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Debug, Args)]
struct OutArg {
    /// Output directory [default: $BLOCKSHRINK_OUT/<command>, or blockshrink-out/<command>]
    #[arg(long)]
    out: Option<PathBuf>,
}

impl OutArg {
    fn resolve(&self, command: &str) -> PathBuf {
        match &self.out {
            Some(p) => p.clone(),
            None => std::env::var_os(OUT_ENV)
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from(DEFAULT_ROOT))
                .join(command),
        }
    }
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Debug, Args)]
struct DetectArgs {
    /// Edge list, one `u v` pair per line
    #[arg(long)]
    graph: PathBuf,
    /// `K`, `a..b`, `a..=b` or `a,b,c`
    #[arg(long, default_value = "2")]
    k_range: String,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = CvrpModeArg::Squared)]
    cvrp_mode: CvrpModeArg,
    #[arg(long, default_value_t = VemOptions::default().max_iter)]
    vem_max_iter: usize,
    #[arg(long, default_value_t = VemOptions::default().tol)]
    vem_tol: f64,
}

impl DetectArgs {
    fn vem(&self) -> VemOptions {
        VemOptions {
            max_iter: self.vem_max_iter,
            tol: self.vem_tol,
        }
    }
}

#[derive(Debug, Args)]
struct EstimateArgs {
    #[command(flatten)]
    detect: DetectArgs,
    /// Write estimates.json here instead of standard output
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SelectArgs {
    #[command(flatten)]
    detect: DetectArgs,
    #[arg(long, value_enum, default_value_t = CriterionArg::Eb)]
    criterion: CriterionArg,
    /// Also write scores.csv and the chosen partition here
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(long)]
    graph: PathBuf,
    /// `node label` lines covering every node
    #[arg(long)]
    labels: PathBuf,
    /// Number of random splits
    #[arg(long, default_value_t = 100)]
    replicates: usize,
    /// Training share of the nodes
    #[arg(long, default_value_t = TRAIN_FRACTION)]
    fraction: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    threads: Option<usize>,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Input K values for detection [default: 8..12]
    #[arg(long)]
    k_range: Option<String>,
    /// Criterion reported on standard output; both are always tabulated
    #[arg(long, value_enum, default_value_t = CriterionArg::Eb)]
    criterion: CriterionArg,
    #[arg(long, value_enum)]
    cvrp_mode: Option<CvrpModeArg>,
    /// Edge list for `--model file`
    #[arg(long)]
    graph: Option<PathBuf>,
    /// Label file for `--model file`
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Training share for the held-out likelihood splits
    #[arg(long)]
    fraction: Option<f64>,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Debug, Args)]
struct IngestArgs {
    /// Edge list with arbitrary node tokens
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    labels: Option<PathBuf>,
    #[command(flatten)]
    out: OutArg,
}

fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    let inner = match value.get("config") {
        Some(c) if value.get("tool").is_some() => c.clone(),
        _ => value,
    };
    serde_json::from_value(inner).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn build_config(m: &ModelArgs) -> Result<ExperimentConfig> {
    let mut c = match &m.config {
        Some(p) => load_config(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(v) = m.model {
        c.model = v.into();
    }
    macro_rules! set {
        ($($f:ident),*) => { $(if let Some(v) = m.$f { c.$f = v; })* };
    }
    set!(n, k_star, lambda, epsilon, rho, replicates, seed);
    Ok(c)
}

fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    let config = build_config(&args.model)?;
    let out = args.out.resolve("simulate");
    let manifest = simulate(&config, &out, args.model.threads)?;
    eprintln!(
        "wrote {} replicate(s) to {} ({} failed)",
        manifest.completed,
        out.display(),
        manifest.failed.len()
    );
    Ok(())
}

fn cmd_estimate(args: &EstimateArgs) -> Result<()> {
    let d = &args.detect;
    let graph = read_graph(&d.graph)?;
    let ks = parse_k_range(&d.k_range)?;
    let candidates = fit_candidates(&graph, &ks, d.seed, d.vem(), d.cvrp_mode.into())?;
    let mut bytes = serde_json::to_vec_pretty(&candidate_docs(&candidates)?)?;
    bytes.push(b'\n');
    match &args.out {
        Some(dir) => {
            write_atomic(&dir.join("estimates.json"), &bytes)?;
            for c in &candidates {
                write_atomic(
                    &dir.join(format!("partition-k{}.txt", c.k_input)),
                    &labels_bytes(c.partition.labels()),
                )?;
            }
            eprintln!(
                "wrote {} estimate record(s) to {}",
                candidates.len(),
                dir.display()
            );
        }
        None => stdout_write(&bytes)?,
    }
    Ok(())
}

fn cmd_select(args: &SelectArgs) -> Result<()> {
    let d = &args.detect;
    let graph = read_graph(&d.graph)?;
    let ks = parse_k_range(&d.k_range)?;
    let candidates = fit_candidates(&graph, &ks, d.seed, d.vem(), d.cvrp_mode.into())?;
    let scores: Vec<_> = candidates.iter().map(|c| (c.k_input, c.score)).collect();
    let table = scores_csv(&scores)?;
    let best = &candidates[choose(&candidates, args.criterion.into()).expect("nonempty range")];
    if let Some(dir) = &args.out {
        write_atomic(&dir.join("scores.csv"), &table)?;
        write_atomic(
            &dir.join("partition.txt"),
            &labels_bytes(best.partition.labels()),
        )?;
        let mut doc = serde_json::to_vec_pretty(&serde_json::json!({
            "criterion": format!("{:?}", args.criterion).to_lowercase(),
            "K_input": best.k_input,
            "K_hat": best.k_returned(),
            "estimate": EstimateDoc::from(&best.eb),
        }))?;
        doc.push(b'\n');
        write_atomic(&dir.join("selection.json"), &doc)?;
    }
    let mut text = table;
    text.extend(format!("K_hat={}\n", best.k_returned()).into_bytes());
    stdout_write(&text)
}

fn cmd_evaluate(args: &EvaluateArgs) -> Result<()> {
    let data = read_dataset(&args.graph, Some(&args.labels))?;
    let annotation = data.annotation.expect("labels were given");
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let results = pool.install(|| {
        split_protocol(
            &data.graph,
            &annotation,
            args.replicates,
            args.fraction,
            args.seed,
        )
    })?;
    let star = theta_star(&data.graph, &annotation)?;
    let out = args.out.resolve("evaluate");
    write_atomic(&out.join("test_loglik.csv"), &splits_csv(&results)?)?;
    let mut doc = serde_json::to_vec_pretty(&EstimateDoc::from(&star))?;
    doc.push(b'\n');
    write_atomic(&out.join("theta_star.json"), &doc)?;
    let (mle, eb, fixed) = medians(&results);
    stdout_write(
        format!("method,median_test_loglik\nMLE,{mle:?}\nEB,{eb:?}\nfixed-prior,{fixed:?}\n")
            .as_bytes(),
    )
}

fn cmd_experiment(args: &ExperimentArgs) -> Result<()> {
    let mut config = build_config(&args.model)?;
    if let Some(r) = &args.k_range {
        config.k_range = parse_k_range(r)?;
    }
    if let Some(m) = args.cvrp_mode {
        config.cvrp_mode = m.into();
    }
    if let Some(f) = args.fraction {
        config.train_fraction = f;
    }
    if args.graph.is_some() {
        config.graph = args.graph.clone();
    }
    if args.labels.is_some() {
        config.labels = args.labels.clone();
    }
    let out = args.out.resolve("experiment");
    let report = run_experiment(&config, &out, args.model.threads)?;
    let mut text = String::from("K_input,median_eb_over_mle,median_eb_over_vbem\n");
    for row in &report.summary {
        text.push_str(&format!(
            "{},{:?},{:?}\n",
            row.k_input, row.median_eb_over_mle, row.median_eb_over_vbem
        ));
    }
    let criterion: Criterion = args.criterion.into();
    for s in &report.selection {
        let k = match criterion {
            Criterion::Eb => s.k_hat_eb,
            Criterion::Cvrp => s.k_hat_cvrp,
        };
        text.push_str(&format!("replicate {} K_hat={k}\n", s.replicate));
    }
    if let Some((mle, eb, fixed)) = (!report.splits.is_empty()).then(|| medians(&report.splits)) {
        text.push_str(&format!(
            "median test loglik: MLE {mle:?} EB {eb:?} fixed-prior {fixed:?}\n"
        ));
    }
    stdout_write(text.as_bytes())?;
    let failed = &report.manifest.failed;
    if !failed.is_empty() {
        eprintln!(
            "{} replicate(s) failed, see {}",
            failed.len(),
            out.join("manifest.json").display()
        );
    }
    Ok(())
}

fn cmd_ingest(args: &IngestArgs) -> Result<()> {
    let data = read_dataset(&args.graph, args.labels.as_deref())?;
    let out = args.out.resolve("ingest");
    blockshrink::io::write_edge_list(&out.join("graph.txt"), &data.graph)?;
    let mut names = String::new();
    for (v, name) in data.nodes.names().iter().enumerate() {
        names.push_str(&format!("{v} {name}\n"));
    }
    write_atomic(&out.join("nodes.txt"), names.as_bytes())?;
    if let Some(z) = &data.annotation {
        write_atomic(&out.join("labels.txt"), &labels_bytes(z.labels()))?;
        let mut names = String::new();
        for (l, name) in data.label_names.iter().enumerate() {
            names.push_str(&format!("{l} {name}\n"));
        }
        write_atomic(&out.join("label_names.txt"), names.as_bytes())?;
    }
    let mut doc = serde_json::to_vec_pretty(&data.stats)?;
    doc.push(b'\n');
    write_atomic(&out.join("ingest.json"), &doc)?;
    let s = data.stats;
    stdout_write(
        format!(
            "nodes {}\nedges {}\nlabels {}\nself_loops {}\nduplicates {}\n",
            s.nodes, s.edges, s.labels, s.self_loops, s.duplicates
        )
        .as_bytes(),
    )
}

fn stdout_write(bytes: &[u8]) -> Result<()> {
    let mut out = std::io::stdout().lock();
    out.write_all(bytes)
        .and_then(|_| out.flush())
        .map_err(|e| Error::io("<stdout>", e))
}

fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Estimate(a) => cmd_estimate(a),
        Command::Select(a) => cmd_select(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Experiment(a) => cmd_experiment(a),
        Command::Ingest(a) => cmd_ingest(a),
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            process::exit(if e.use_stderr() { 1 } else { 0 });
        }
    };
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        process::exit(e.exit_code() as i32);
    }
}
