//! Replicated experiments: simulate or load graphs, fit every K in a range,
//! compare estimates against the truth and tabulate model selection.
//!
//! Output layout under the experiment directory:
//!
//! ```text
//! manifest.json     config, seeds, version, completed/failed replicates
//! records.jsonl     one ExperimentRecord per (replicate, K)
//! records.csv       the same, flattened
//! summary.csv       per input K: median MSE ratios
//! selection.csv     per replicate: selected K by each criterion and K̃
//! deviations.csv    E_K* and E_K̃ per criterion
//! rep-NNNN/         per-replicate graph, truth and score table
//! ```
//!
//! Replicate `r` uses seed `seed + r` for sampling and detection.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use blockshrink_core::community::VemOptions;
use blockshrink_core::eval::{deviation_metrics, k_tilde, mse_sbm, theta_star, ExperimentRecord};
use blockshrink_core::graph::{Graph, Partition};
use blockshrink_core::graphon::{build_step_graphon, mse_graphon_aligned};
use blockshrink_core::samplers::{affiliation_theta, sample_graphon, sample_sbm, GraphonSpec};
use blockshrink_core::select::{Criterion, CvrpMode};
use blockshrink_core::Matrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formats::{records_csv, records_jsonl, scores_csv, EstimateDoc, StepGraphonDoc};
use crate::io::{edge_list_bytes, labels_bytes, read_dataset, write_atomic};
use crate::pipeline::{check_k_range, choose, fit_candidates, Candidate};
use crate::realdata::{median, split_protocol, splits_csv};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    SbmAffiliation,
    GraphonPowerlaw,
    File,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub model: ModelKind,
    pub n: usize,
    pub k_star: usize,
    pub lambda: f64,
    pub epsilon: f64,
    pub rho: f64,
    pub k_range: Vec<usize>,
    pub replicates: usize,
    pub seed: u64,
    pub cvrp_mode: CvrpMode,
    /// Edge list and annotation for `model = file`.
    pub graph: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    /// Training share for the held-out likelihood protocol.
    pub train_fraction: f64,
    pub vem_max_iter: usize,
    pub vem_tol: f64,
}

impl Default for ExperimentConfig {
    /// Dense affiliation model with ten blocks.
    fn default() -> Self {
        ExperimentConfig {
            model: ModelKind::SbmAffiliation,
            n: 200,
            k_star: 10,
            lambda: 0.9,
            epsilon: 0.1,
            rho: 1.0,
            k_range: (8..=12).collect(),
            replicates: 20,
            seed: 1,
            cvrp_mode: CvrpMode::Squared,
            graph: None,
            labels: None,
            train_fraction: blockshrink_core::eval::TRAIN_FRACTION,
            vem_max_iter: VemOptions::default().max_iter,
            vem_tol: VemOptions::default().tol,
        }
    }
}

impl ExperimentConfig {
    pub fn vem(&self) -> VemOptions {
        VemOptions {
            max_iter: self.vem_max_iter,
            tol: self.vem_tol,
        }
    }

    pub fn replicate_seed(&self, r: usize) -> u64 {
        self.seed.wrapping_add(r as u64)
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::Config("replicates must be at least 1".into()));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Config("train fraction must lie in (0, 1)".into()));
        }
        match self.model {
            ModelKind::SbmAffiliation => {
                affiliation_theta(self.k_star, self.lambda, self.epsilon, self.rho)
                    .map_err(|e| Error::Config(e.to_string()))?;
                check_k_range(&self.k_range, self.n)
            }
            ModelKind::GraphonPowerlaw => {
                GraphonSpec::power_law(self.rho, self.lambda)
                    .map_err(|e| Error::Config(e.to_string()))?;
                check_k_range(&self.k_range, self.n)
            }
            ModelKind::File => {
                if self.graph.is_none() || self.labels.is_none() {
                    return Err(Error::Config(
                        "model file needs --graph and --labels".into(),
                    ));
                }
                if self.k_range.is_empty() {
                    return Err(Error::Config("K range is empty".into()));
                }
                Ok(())
            }
        }
    }
}

/// Ground truth a replicate is compared against.
#[derive(Debug, Clone)]
pub enum Truth {
    Blocks {
        theta: Matrix,
        partition: Partition,
    },
    Graphon {
        spec: GraphonSpec,
        latents: Vec<f64>,
    },
}

#[derive(Debug, Clone)]
pub struct Sample {
    pub graph: Graph,
    pub truth: Truth,
}

/// Draws replicate `r` of a simulated model.
pub fn sample_replicate(config: &ExperimentConfig, r: usize) -> Result<Sample> {
    let seed = config.replicate_seed(r);
    match config.model {
        ModelKind::SbmAffiliation => {
            let spec = affiliation_theta(config.k_star, config.lambda, config.epsilon, config.rho)?;
            let s = sample_sbm(&spec, config.n, seed)?;
            Ok(Sample {
                graph: s.graph,
                truth: Truth::Blocks {
                    theta: s.theta,
                    partition: s.partition,
                },
            })
        }
        ModelKind::GraphonPowerlaw => {
            let spec = GraphonSpec::power_law(config.rho, config.lambda)?;
            let (graph, latents) = sample_graphon(&spec, config.n, seed)?;
            Ok(Sample {
                graph,
                truth: Truth::Graphon { spec, latents },
            })
        }
        ModelKind::File => Err(Error::Config("file model has no sampler".into())),
    }
}

fn mse(c: &Candidate, theta: &Matrix, truth: &Truth) -> Result<f64> {
    match truth {
        Truth::Blocks {
            theta: t,
            partition: z,
        } => Ok(mse_sbm(theta, &c.partition, t, z)?),
        Truth::Graphon { spec, .. } => Ok(mse_graphon_aligned(
            &build_step_graphon(&c.partition, theta)?,
            spec,
        )),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionRow {
    pub replicate: usize,
    pub seed: u64,
    pub k_hat_eb: usize,
    pub k_hat_cvrp: usize,
    pub k_tilde: usize,
}

#[derive(Debug, Clone)]
pub struct ReplicateResult {
    pub records: Vec<ExperimentRecord>,
    pub selection: SelectionRow,
    pub candidates: Vec<Candidate>,
}

/// Fits every K on one graph and compares against the truth.
pub fn evaluate_replicate(
    config: &ExperimentConfig,
    r: usize,
    graph: &Graph,
    truth: &Truth,
) -> Result<ReplicateResult> {
    let seed = config.replicate_seed(r);
    let candidates = fit_candidates(graph, &config.k_range, seed, config.vem(), config.cvrp_mode)?;
    let mut records = Vec::with_capacity(candidates.len());
    for c in &candidates {
        records.push(ExperimentRecord {
            replicate: r,
            k_input: c.k_input,
            k_returned: c.k_returned(),
            mse_mle: mse(c, &c.mle.theta, truth)?,
            mse_eb: mse(c, &c.eb.theta, truth)?,
            mse_vbem: mse(c, &c.vbem.theta, truth)?,
            scores: vec![c.score],
            seed,
        });
    }
    let pick =
        |criterion| candidates[choose(&candidates, criterion).expect("nonempty")].k_returned();
    let curve: Vec<(usize, f64)> = records.iter().map(|r| (r.k_returned, r.mse_mle)).collect();
    let selection = SelectionRow {
        replicate: r,
        seed,
        k_hat_eb: pick(Criterion::Eb),
        k_hat_cvrp: pick(Criterion::Cvrp),
        k_tilde: k_tilde(&curve)?,
    };
    Ok(ReplicateResult {
        records,
        selection,
        candidates,
    })
}

/// Median MSE ratios per input K.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    #[serde(rename = "K_input")]
    pub k_input: usize,
    pub replicates: usize,
    pub median_eb_over_mle: f64,
    pub median_eb_over_vbem: f64,
    pub median_mse_mle: f64,
    pub median_mse_eb: f64,
    pub median_mse_vbem: f64,
}

fn ratio(a: f64, b: f64) -> f64 {
    if b > 0.0 {
        a / b
    } else if a == 0.0 {
        1.0
    } else {
        f64::INFINITY
    }
}

pub fn summarize(records: &[ExperimentRecord]) -> Vec<SummaryRow> {
    let mut by_k: BTreeMap<usize, Vec<&ExperimentRecord>> = BTreeMap::new();
    for r in records {
        by_k.entry(r.k_input).or_default().push(r);
    }
    by_k.into_iter()
        .map(|(k, rs)| {
            let col = |f: &dyn Fn(&ExperimentRecord) -> f64| {
                median(&mut rs.iter().map(|r| f(r)).collect::<Vec<_>>())
            };
            SummaryRow {
                k_input: k,
                replicates: rs.len(),
                median_eb_over_mle: col(&|r| ratio(r.mse_eb, r.mse_mle)),
                median_eb_over_vbem: col(&|r| ratio(r.mse_eb, r.mse_vbem)),
                median_mse_mle: col(&|r| r.mse_mle),
                median_mse_eb: col(&|r| r.mse_eb),
                median_mse_vbem: col(&|r| r.mse_vbem),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationRow {
    pub criterion: String,
    pub e_kstar: Option<f64>,
    pub e_ktilde: f64,
    pub replicates: usize,
}

pub fn deviations(rows: &[SelectionRow], k_star: Option<usize>) -> Result<Vec<DeviationRow>> {
    let tildes: Vec<usize> = rows.iter().map(|r| r.k_tilde).collect();
    [
        ("EB", rows.iter().map(|r| r.k_hat_eb).collect::<Vec<_>>()),
        ("CVRP", rows.iter().map(|r| r.k_hat_cvrp).collect()),
    ]
    .into_iter()
    .map(|(name, hats)| {
        let (e_star, e_tilde) = deviation_metrics(&hats, k_star.unwrap_or(0), &tildes)?;
        Ok(DeviationRow {
            criterion: name.into(),
            e_kstar: k_star.map(|_| e_star),
            e_ktilde: e_tilde,
            replicates: rows.len(),
        })
    })
    .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub replicate: usize,
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: ExperimentConfig,
    pub seeds: Vec<u64>,
    pub completed: usize,
    pub failed: Vec<Failure>,
}

impl Manifest {
    pub fn new(command: &str, config: &ExperimentConfig) -> Self {
        Manifest {
            tool: "blockshrink".into(),
            version: VERSION.into(),
            command: command.into(),
            config: config.clone(),
            seeds: (0..config.replicates)
                .map(|r| config.replicate_seed(r))
                .collect(),
            completed: 0,
            failed: Vec::new(),
        }
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(self)?;
        bytes.push(b'\n');
        write_atomic(&dir.join("manifest.json"), &bytes)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

fn rows_csv<T: Serialize>(rows: &[T]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    Ok(w.into_inner().expect("in-memory writer"))
}

fn pretty_json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Writes a directory by filling `<name>.tmp` and renaming it into place.
pub fn write_dir_atomic(dir: &Path, files: &[(&str, Vec<u8>)]) -> Result<()> {
    let mut tmp = dir.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    if tmp.exists() {
        fs::remove_dir_all(&tmp).map_err(|e| Error::io(&tmp, e))?;
    }
    fs::create_dir_all(&tmp).map_err(|e| Error::io(&tmp, e))?;
    for (name, bytes) in files {
        let p = tmp.join(name);
        fs::write(&p, bytes).map_err(|e| Error::io(&p, e))?;
    }
    if dir.exists() {
        fs::remove_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::rename(&tmp, dir).map_err(|e| Error::io(dir, e))
}

/// Sidecar files describing a simulated replicate.
pub fn sample_files(sample: &Sample) -> Result<Vec<(&'static str, Vec<u8>)>> {
    let mut files = vec![("graph.txt", edge_list_bytes(&sample.graph))];
    match &sample.truth {
        Truth::Blocks { theta, partition } => {
            files.push(("truth.txt", labels_bytes(partition.labels())));
            let rows: Vec<Vec<f64>> = (0..theta.rows()).map(|r| theta.row(r).to_vec()).collect();
            files.push(("theta.json", pretty_json(&rows)?));
        }
        Truth::Graphon { latents, .. } => {
            let mut out = Vec::new();
            for (v, u) in latents.iter().enumerate() {
                out.extend(format!("{v} {u:?}\n").into_bytes());
            }
            files.push(("latents.txt", out));
        }
    }
    Ok(files)
}

pub fn replicate_dir(out: &Path, r: usize) -> PathBuf {
    out.join(format!("rep-{r:04}"))
}

fn pool(threads: Option<usize>) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

/// Writes `config.replicates` simulated graphs with their truth sidecars.
pub fn simulate(config: &ExperimentConfig, out: &Path, threads: Option<usize>) -> Result<Manifest> {
    config.validate()?;
    if config.model == ModelKind::File {
        return Err(Error::Config("simulate needs a generative model".into()));
    }
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let results: Vec<Result<()>> = pool(threads)?.install(|| {
        (0..config.replicates)
            .into_par_iter()
            .map(|r| {
                let sample = sample_replicate(config, r)?;
                write_dir_atomic(&replicate_dir(out, r), &sample_files(&sample)?)
            })
            .collect()
    });
    let mut manifest = Manifest::new("simulate", config);
    for (r, res) in results.into_iter().enumerate() {
        match res {
            Ok(()) => manifest.completed += 1,
            Err(e @ Error::Io { .. }) => return Err(e),
            Err(e) => manifest.failed.push(Failure {
                replicate: r,
                seed: config.replicate_seed(r),
                error: e.to_string(),
            }),
        }
    }
    manifest.write(out)?;
    Ok(manifest)
}

/// Summary of a finished experiment.
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub manifest: Manifest,
    pub records: Vec<ExperimentRecord>,
    pub summary: Vec<SummaryRow>,
    pub selection: Vec<SelectionRow>,
    pub deviations: Vec<DeviationRow>,
    pub splits: Vec<crate::realdata::SplitResult>,
}

/// Runs a full experiment and writes its report under `out`.
pub fn run_experiment(
    config: &ExperimentConfig,
    out: &Path,
    threads: Option<usize>,
) -> Result<ExperimentOutput> {
    config.validate()?;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let pool = pool(threads)?;
    let mut manifest = Manifest::new("experiment", config);
    let mut splits = Vec::new();

    let (results, k_star): (Vec<Result<ReplicateResult>>, Option<usize>) = match config.model {
        ModelKind::File => {
            let graph_path = config.graph.as_deref().expect("validated");
            let data = read_dataset(graph_path, config.labels.as_deref())?;
            let annotation = data.annotation.expect("validated");
            check_k_range(&config.k_range, data.graph.n())?;
            let star = theta_star(&data.graph, &annotation)?;
            let truth = Truth::Blocks {
                theta: star.theta,
                partition: annotation.clone(),
            };
            splits = pool.install(|| {
                split_protocol(
                    &data.graph,
                    &annotation,
                    config.replicates,
                    config.train_fraction,
                    config.seed,
                )
            })?;
            write_atomic(&out.join("test_loglik.csv"), &splits_csv(&splits)?)?;
            let res = pool.install(|| evaluate_replicate(config, 0, &data.graph, &truth));
            (vec![res], Some(annotation.k()))
        }
        _ => {
            let results = pool.install(|| {
                (0..config.replicates)
                    .into_par_iter()
                    .map(|r| -> Result<ReplicateResult> {
                        let sample = sample_replicate(config, r)?;
                        let res = evaluate_replicate(config, r, &sample.graph, &sample.truth)?;
                        let mut files = sample_files(&sample)?;
                        let scores: Vec<_> = res
                            .candidates
                            .iter()
                            .map(|c| (c.k_input, c.score))
                            .collect();
                        files.push(("scores.csv", scores_csv(&scores)?));
                        files.push(("estimates.json", estimates_json(&res.candidates)?));
                        write_dir_atomic(&replicate_dir(out, r), &files)?;
                        Ok(res)
                    })
                    .collect()
            });
            let k_star = (config.model == ModelKind::SbmAffiliation).then_some(config.k_star);
            (results, k_star)
        }
    };

    let mut records = Vec::new();
    let mut selection = Vec::new();
    for (r, res) in results.into_iter().enumerate() {
        match res {
            Ok(res) => {
                manifest.completed += 1;
                records.extend(res.records);
                selection.push(res.selection);
            }
            Err(e @ Error::Io { .. }) => return Err(e),
            Err(e) => manifest.failed.push(Failure {
                replicate: r,
                seed: config.replicate_seed(r),
                error: e.to_string(),
            }),
        }
    }
    let summary = summarize(&records);
    let deviations = if selection.is_empty() {
        Vec::new()
    } else {
        deviations(&selection, k_star)?
    };
    write_atomic(&out.join("records.jsonl"), &records_jsonl(&records)?)?;
    write_atomic(&out.join("records.csv"), &records_csv(&records)?)?;
    write_atomic(&out.join("summary.csv"), &rows_csv(&summary)?)?;
    write_atomic(&out.join("selection.csv"), &rows_csv(&selection)?)?;
    write_atomic(&out.join("deviations.csv"), &rows_csv(&deviations)?)?;
    manifest.write(out)?;
    Ok(ExperimentOutput {
        manifest,
        records,
        summary,
        selection,
        deviations,
        splits,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CandidateDoc {
    #[serde(rename = "K_input")]
    pub k_input: usize,
    #[serde(rename = "K_returned")]
    pub k_returned: usize,
    pub vem_converged: bool,
    pub estimates: Vec<EstimateDoc>,
    pub step_graphon: StepGraphonDoc,
}

pub fn candidate_docs(candidates: &[Candidate]) -> Result<Vec<CandidateDoc>> {
    candidates
        .iter()
        .map(|c| {
            Ok(CandidateDoc {
                k_input: c.k_input,
                k_returned: c.k_returned(),
                vem_converged: c.vem_converged,
                estimates: vec![
                    EstimateDoc::from(&c.mle),
                    EstimateDoc::from(&c.eb),
                    EstimateDoc::from(&c.vbem),
                ],
                step_graphon: StepGraphonDoc::from(&c.step_graphon()?),
            })
        })
        .collect()
}

pub fn estimates_json(candidates: &[Candidate]) -> Result<Vec<u8>> {
    pretty_json(&candidate_docs(candidates)?)
}
