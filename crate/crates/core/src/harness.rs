//! Experiment orchestration: planted-model sweeps, dataset runs, kernel
//! dumps and row replay, with CSV, JSON and SVG output.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dendrogram::Dendrogram;
use crate::engine::Partition;
use crate::error::{Error, Result};
use crate::eval::{aari, cosine_similarity_matrix, dasgupta_cost};
use crate::four_al::{four_al, InitialPartitionConfig};
use crate::io;
use crate::kernel::{active_kernel, average_linkage_on_kernel, passive_kernel, ActiveKernelConfig, KernelMatrix};
use crate::oracle::{expected_passive_count, ingest_quadruplets, ingest_triplets, sample_passive, ActiveOracle, QuadrupletSet};
use crate::ordinal::{complete_linkage, single_linkage};
use crate::pairs::num_pairs;
use crate::planted::{generate_planted, GroundTruthHierarchy, PlantedConfig, SimilarityMatrix};
use crate::plot;

/// Version of the CSV and manifest layouts written by this module.
pub const SCHEMA_VERSION: u32 = 1;

pub const RESULTS_HEADER: &[&str] = &[
    "schema", "method", "delta_index", "p_index", "trial", "delta", "p", "data_seed", "method_seed",
    "status", "aari", "dasgupta_cost", "queries", "comparisons", "wall_ms", "error",
];

pub const SUMMARY_HEADER: &[&str] = &[
    "schema", "method", "delta", "p", "trials", "completed", "metric", "mean", "std", "mean_queries",
    "mean_comparisons",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Method {
    SingleLinkage,
    CompleteLinkage,
    /// Average linkage on the passive quadruplet kernel.
    KernelAl,
    /// Average linkage on the actively queried kernel.
    KernelAlActive,
    /// 4-AL from singletons.
    FourAl,
    /// 4-AL from ground-truth chunks of the given size.
    FourAlInit(usize),
}

impl Method {
    /// Stable identifier mixed into per-method seeds.
    pub fn id(self) -> u64 {
        match self {
            Method::SingleLinkage => 1,
            Method::CompleteLinkage => 2,
            Method::KernelAl => 3,
            Method::KernelAlActive => 4,
            Method::FourAl => 5,
            Method::FourAlInit(m) => 1000 + m as u64,
        }
    }

    pub fn is_active(self) -> bool {
        matches!(self, Method::SingleLinkage | Method::CompleteLinkage | Method::KernelAlActive)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::SingleLinkage => f.write_str("SL"),
            Method::CompleteLinkage => f.write_str("CL"),
            Method::KernelAl => f.write_str("4K-AL"),
            Method::KernelAlActive => f.write_str("4K-AL-act"),
            Method::FourAl => f.write_str("4-AL"),
            Method::FourAlInit(m) => write!(f, "4-AL-I{m}"),
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "SL" => Method::SingleLinkage,
            "CL" => Method::CompleteLinkage,
            "4K-AL" => Method::KernelAl,
            "4K-AL-act" => Method::KernelAlActive,
            "4-AL" => Method::FourAl,
            _ => match s.strip_prefix("4-AL-I").and_then(|m| m.parse().ok()) {
                Some(m) if m > 0 => Method::FourAlInit(m),
                _ => return Err(Error::InvalidConfig(format!("unknown method {s:?}"))),
            },
        })
    }
}

impl TryFrom<String> for Method {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Method> for String {
    fn from(m: Method) -> String {
        m.to_string()
    }
}

fn default_eta() -> f64 {
    0.25
}

fn default_threads() -> usize {
    1
}

/// Planted-model sweep over a grid of separations and sampling rates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Template for the planted model; `delta` and `seed` are overridden per cell.
    pub planted: PlantedConfig,
    pub delta_grid: Vec<f64>,
    pub p_grid: Vec<f64>,
    pub methods: Vec<Method>,
    pub trials: usize,
    #[serde(default = "default_eta")]
    pub eta: f64,
    pub master_seed: u64,
    /// Worker threads for running trials in parallel.
    #[serde(default = "default_threads")]
    pub threads: usize,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        self.planted.validate()?;
        if self.planted.levels == 0 {
            return Err(Error::InvalidConfig("AARI needs levels >= 1".into()));
        }
        if self.delta_grid.is_empty() || self.p_grid.is_empty() || self.methods.is_empty() {
            return Err(Error::InvalidConfig("delta grid, p grid and methods must be non-empty".into()));
        }
        if self.trials == 0 {
            return Err(Error::InvalidConfig("trials must be at least 1".into()));
        }
        if self.threads == 0 {
            return Err(Error::InvalidConfig("threads must be at least 1".into()));
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(Error::InvalidConfig(format!("eta {} is outside (0, 1)", self.eta)));
        }
        for &d in &self.delta_grid {
            PlantedConfig { delta: d, ..self.planted.clone() }.validate()?;
        }
        for &p in &self.p_grid {
            check_prob(p)?;
        }
        for m in &self.methods {
            if let Method::FourAlInit(size) = *m {
                if size > self.planted.n0 {
                    return Err(Error::InvalidConfig(format!(
                        "{m} needs initial clusters no larger than n0 = {}",
                        self.planted.n0
                    )));
                }
            }
        }
        Ok(())
    }

    /// Reads TOML or JSON, chosen by file extension.
    pub fn load(path: &Path) -> Result<Self> {
        let text = io::read_text(path)?;
        if path.extension().is_some_and(|e| e == "json") {
            Self::from_json_str(&text)
        } else {
            Self::from_toml_str(&text, &path.display().to_string())
        }
    }

    /// Parses and validates a TOML config; `source` names it in errors.
    pub fn from_toml_str(text: &str, source: &str) -> Result<Self> {
        let cfg: SweepConfig = toml::from_str(text).map_err(|e| {
            let line = e
                .span()
                .map_or(1, |s| 1 + text.as_bytes()[..s.start.min(text.len())].iter().filter(|&&b| b == b'\n').count());
            Error::parse(source, line, e.message().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let cfg: SweepConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn check_prob(p: f64) -> Result<()> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::InvalidConfig(format!("sampling probability {p} is outside (0, 1]")));
    }
    Ok(())
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Order-sensitive mix of seed components.
pub fn derive_seed(parts: &[u64]) -> u64 {
    parts.iter().fold(0x5EED_u64, |acc, &p| splitmix(acc ^ splitmix(p)))
}

const PASSIVE_STREAM: u64 = 0x7061_7373_6976_65;

/// Seed of the planted data (and everything shared by methods) of one trial.
pub fn data_seed(master: u64, delta_index: usize, p_index: usize, trial: usize) -> u64 {
    derive_seed(&[master, delta_index as u64, p_index as u64, trial as u64])
}

pub fn method_seed(data_seed: u64, method: Method) -> u64 {
    derive_seed(&[data_seed, method.id()])
}

pub fn passive_seed(data_seed: u64) -> u64 {
    derive_seed(&[data_seed, PASSIVE_STREAM])
}

/// Landmark probability and reference count for the active kernel, chosen
/// so the expected number of queries matches a passive sample at rate `p`.
pub fn active_kernel_budget(n: usize, p: f64) -> (f64, usize) {
    let nf = n as f64;
    let q = (nf.ln() / nf).min(1.0);
    let expected_landmarks = q * nf;
    let refs = (expected_passive_count(n, p) / (nf * expected_landmarks)).round() as usize;
    (q, refs.clamp(1, num_pairs(n)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Ok,
    Failed,
    Skipped,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Ok => "ok",
            Status::Failed => "failed",
            Status::Skipped => "skipped",
        })
    }
}

// JSON has no NaN; serde_json writes it as null.
fn nan_if_null<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
}

/// One method run on one trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub method: Method,
    pub delta_index: usize,
    pub p_index: usize,
    pub trial: usize,
    /// `NaN` for dataset runs.
    #[serde(deserialize_with = "nan_if_null")]
    pub delta: f64,
    /// `NaN` for comparison-file inputs.
    #[serde(deserialize_with = "nan_if_null")]
    pub p: f64,
    pub data_seed: u64,
    pub method_seed: u64,
    pub status: Status,
    pub aari: Option<f64>,
    pub dasgupta_cost: Option<f64>,
    /// Distinct active queries.
    pub queries: Option<u64>,
    /// Passively observed comparisons.
    pub comparisons: Option<u64>,
    pub wall_ms: f64,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub command: String,
    pub config: serde_json::Value,
    pub rows: Vec<ResultRow>,
    pub warnings: Vec<String>,
    pub wall_time_s: f64,
}

impl RunManifest {
    pub fn all_completed(&self) -> bool {
        self.rows.iter().all(|r| r.status != Status::Failed)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json_str(&io::read_text(path)?)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

struct Outcome {
    dendrogram: Dendrogram,
    queries: Option<u64>,
    comparisons: Option<u64>,
}

fn run_active(method: Method, w: &SimilarityMatrix, p: f64, seed: u64) -> Result<Outcome> {
    let n = w.n();
    let mut oracle = ActiveOracle::new(w)?;
    let (dendrogram, queries) = match method {
        Method::SingleLinkage => single_linkage(&mut oracle, n)?,
        Method::CompleteLinkage => complete_linkage(&mut oracle, n)?,
        Method::KernelAlActive => {
            let (landmark_prob, num_references) = active_kernel_budget(n, p);
            let cfg = ActiveKernelConfig {
                landmark_prob,
                num_references,
                seed,
            };
            oracle.reserve((expected_passive_count(n, p) as usize).min(1 << 27));
            let (k, q) = active_kernel(&mut oracle, n, &cfg)?;
            (average_linkage_on_kernel(&k)?, q)
        }
        _ => unreachable!("{method} is not an active method"),
    };
    Ok(Outcome {
        dendrogram,
        queries: Some(queries),
        comparisons: None,
    })
}

fn run_passive(
    method: Method,
    qs: &QuadrupletSet,
    hierarchy: Option<&GroundTruthHierarchy>,
    seed: u64,
) -> Result<Outcome> {
    let n = qs.n();
    let dendrogram = match method {
        Method::KernelAl => average_linkage_on_kernel(&passive_kernel(qs)?)?,
        Method::FourAl => four_al(qs, &Partition::singletons(n))?,
        Method::FourAlInit(m) => {
            let init = InitialPartitionConfig::FromGroundTruth { m }.build(n, hierarchy, seed)?;
            four_al(qs, &init)?
        }
        _ => unreachable!("{method} is not a passive method"),
    };
    Ok(Outcome {
        dendrogram,
        queries: None,
        comparisons: Some(qs.len() as u64),
    })
}

/// A trial's planted data.
pub struct TrialData {
    pub similarities: SimilarityMatrix,
    pub hierarchy: GroundTruthHierarchy,
    pub data_seed: u64,
}

pub fn trial_data(cfg: &SweepConfig, delta_index: usize, p_index: usize, trial: usize) -> Result<TrialData> {
    let seed = data_seed(cfg.master_seed, delta_index, p_index, trial);
    let planted = PlantedConfig {
        delta: cfg.delta_grid[delta_index],
        seed,
        ..cfg.planted.clone()
    };
    let (similarities, hierarchy) = generate_planted(&planted)?;
    Ok(TrialData {
        similarities,
        hierarchy,
        data_seed: seed,
    })
}

/// Runs the given methods on one trial. Active methods run first so the
/// passive sample is only materialised afterwards.
pub fn run_trial(
    cfg: &SweepConfig,
    delta_index: usize,
    p_index: usize,
    trial: usize,
    methods: &[Method],
) -> Vec<ResultRow> {
    let p = cfg.p_grid[p_index];
    let delta = cfg.delta_grid[delta_index];
    let seed = data_seed(cfg.master_seed, delta_index, p_index, trial);
    let row = |method: Method| ResultRow {
        method,
        delta_index,
        p_index,
        trial,
        delta,
        p,
        data_seed: seed,
        method_seed: method_seed(seed, method),
        status: Status::Failed,
        aari: None,
        dasgupta_cost: None,
        queries: None,
        comparisons: None,
        wall_ms: 0.0,
        error: None,
    };
    let data = match trial_data(cfg, delta_index, p_index, trial) {
        Ok(d) => d,
        Err(e) => {
            return methods
                .iter()
                .map(|&m| ResultRow {
                    error: Some(e.to_string()),
                    ..row(m)
                })
                .collect()
        }
    };
    let finish = |mut r: ResultRow, start: Instant, outcome: Result<Outcome>| {
        r.wall_ms = start.elapsed().as_secs_f64() * 1e3;
        match outcome.and_then(|o| {
            let score = aari(&data.hierarchy, &o.dendrogram)?;
            Ok((o, score))
        }) {
            Ok((o, score)) => {
                r.status = Status::Ok;
                r.aari = Some(score);
                r.queries = o.queries;
                r.comparisons = o.comparisons;
            }
            Err(e) => r.error = Some(e.to_string()),
        }
        r
    };

    let mut rows = Vec::with_capacity(methods.len());
    for &m in methods.iter().filter(|m| m.is_active()) {
        let start = Instant::now();
        let r = row(m);
        let outcome = run_active(m, &data.similarities, p, r.method_seed);
        rows.push(finish(r, start, outcome));
    }
    let passive: Vec<Method> = methods.iter().copied().filter(|m| !m.is_active()).collect();
    if !passive.is_empty() {
        let start = Instant::now();
        let sampled = sample_passive(&data.similarities, p, passive_seed(seed));
        let sample_ms = start.elapsed().as_secs_f64() * 1e3;
        for m in passive {
            let start = Instant::now();
            let r = row(m);
            let outcome = match &sampled {
                Ok(qs) => run_passive(m, qs, Some(&data.hierarchy), r.method_seed),
                Err(e) => Err(Error::InvalidArgument(e.to_string())),
            };
            let mut r = finish(r, start, outcome);
            r.wall_ms += sample_ms;
            rows.push(r);
        }
    }
    let order = |m: Method| methods.iter().position(|&x| x == m).unwrap_or(usize::MAX);
    rows.sort_by_key(|r| order(r.method));
    rows
}

fn with_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Runs every (delta, p, trial) cell. Method failures are recorded in their
/// rows and do not stop the sweep.
pub fn planted_sweep(cfg: &SweepConfig) -> Result<RunManifest> {
    cfg.validate()?;
    let start = Instant::now();
    let mut cells = Vec::new();
    for di in 0..cfg.delta_grid.len() {
        for pi in 0..cfg.p_grid.len() {
            for t in 0..cfg.trials {
                cells.push((di, pi, t));
            }
        }
    }
    let mut rows: Vec<ResultRow> = with_pool(cfg.threads, || {
        cells
            .par_iter()
            .with_max_len(1)
            .flat_map_iter(|&(di, pi, t)| run_trial(cfg, di, pi, t, &cfg.methods))
            .collect()
    })?;
    let order = |m: Method| cfg.methods.iter().position(|&x| x == m).unwrap_or(usize::MAX);
    rows.sort_by_key(|r| (r.delta_index, r.p_index, r.trial, order(r.method)));

    let mut warnings = Vec::new();
    let n = cfg.planted.n_items()?;
    if n > 240 && cfg.methods.iter().any(|m| matches!(m, Method::FourAl | Method::FourAlInit(_))) {
        warnings.push(format!("4-AL on {n} items costs O(N |Q|) per merge round and may be slow"));
    }
    Ok(RunManifest {
        schema_version: SCHEMA_VERSION,
        command: "planted-sweep".into(),
        config: serde_json::to_value(cfg)?,
        rows,
        warnings,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

/// Recomputes one row of a planted sweep manifest in isolation.
pub fn replay(manifest: &RunManifest, row_index: usize) -> Result<ResultRow> {
    if manifest.command != "planted-sweep" {
        return Err(Error::InvalidArgument(format!(
            "only planted-sweep rows can be replayed, manifest is from {}",
            manifest.command
        )));
    }
    let cfg: SweepConfig = serde_json::from_value(manifest.config.clone())?;
    let row = manifest.rows.get(row_index).ok_or(Error::IndexOutOfRange {
        index: row_index,
        n: manifest.rows.len(),
    })?;
    if row.delta_index >= cfg.delta_grid.len() || row.p_index >= cfg.p_grid.len() {
        return Err(Error::InvalidArgument("row grid indices do not match the config".into()));
    }
    let mut out = run_trial(&cfg, row.delta_index, row.p_index, row.trial, &[row.method]);
    Ok(out.remove(0))
}

/// Comparison data for [`dataset_run`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetInput {
    Features(PathBuf),
    Quadruplets(PathBuf),
    Triplets(PathBuf),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub input: DatasetInput,
    /// Sampling rates for feature input; ignored for comparison files.
    pub p_grid: Vec<f64>,
    pub methods: Vec<Method>,
    pub seed: u64,
    #[serde(default = "default_threads")]
    pub threads: usize,
}

/// Dendrograms produced by a dataset run, keyed by method and p index.
pub type DatasetTrees = BTreeMap<(Method, usize), Dendrogram>;

enum Loaded {
    Similarities(SimilarityMatrix),
    Comparisons(QuadrupletSet),
}

fn load_dataset(input: &DatasetInput) -> Result<Loaded> {
    let read = |p: &PathBuf| Ok::<_, Error>((io::read_text(p)?, p.display().to_string()));
    Ok(match input {
        DatasetInput::Features(p) => {
            let (text, src) = read(p)?;
            let (values, dim) = io::parse_features_csv(&text, &src)?;
            Loaded::Similarities(cosine_similarity_matrix(&values, dim)?)
        }
        DatasetInput::Quadruplets(p) => {
            let (text, src) = read(p)?;
            Loaded::Comparisons(ingest_quadruplets(&io::parse_quadruplets_csv(&text, &src)?, None)?)
        }
        DatasetInput::Triplets(p) => {
            let (text, src) = read(p)?;
            Loaded::Comparisons(ingest_triplets(&io::parse_triplets_csv(&text, &src)?, None)?)
        }
    })
}

/// Runs methods on a dataset. With features, comparisons come from cosine
/// similarities and trees are scored by Dasgupta cost; comparison files are
/// used as given, and methods that need active queries are skipped.
pub fn dataset_run(cfg: &DatasetConfig) -> Result<(RunManifest, DatasetTrees)> {
    if cfg.methods.is_empty() {
        return Err(Error::InvalidConfig("no methods requested".into()));
    }
    if let Some(m) = cfg.methods.iter().find(|m| matches!(m, Method::FourAlInit(_))) {
        return Err(Error::InvalidConfig(format!("{m} needs a planted hierarchy")));
    }
    let start = Instant::now();
    let loaded = load_dataset(&cfg.input)?;
    let mut warnings = Vec::new();
    let p_grid: Vec<f64> = match &loaded {
        Loaded::Similarities(_) => {
            if cfg.p_grid.is_empty() {
                return Err(Error::InvalidConfig("p grid must be non-empty".into()));
            }
            for &p in &cfg.p_grid {
                check_prob(p)?;
            }
            cfg.p_grid.clone()
        }
        Loaded::Comparisons(_) => vec![f64::NAN],
    };
    let n = match &loaded {
        Loaded::Similarities(w) => w.n(),
        Loaded::Comparisons(q) => q.n(),
    };
    if n > 240 {
        warnings.push(format!("{n} items exceed the usual scale; 4-AL costs O(N |Q|) per merge round"));
    }

    let mut rows = Vec::new();
    let mut trees = DatasetTrees::new();
    for (pi, &p) in p_grid.iter().enumerate() {
        let seed = derive_seed(&[cfg.seed, pi as u64]);
        let sampled = match &loaded {
            Loaded::Similarities(w) => {
                if cfg.methods.iter().any(|m| !m.is_active()) {
                    Some(sample_passive(w, p, passive_seed(seed)))
                } else {
                    None
                }
            }
            Loaded::Comparisons(q) => Some(Ok(q.clone())),
        };
        let results: Vec<(ResultRow, Option<Dendrogram>)> = with_pool(cfg.threads, || {
            cfg.methods
                .par_iter()
                .with_max_len(1)
                .map(|&m| {
                    let mut row = ResultRow {
                        method: m,
                        delta_index: 0,
                        p_index: pi,
                        trial: 0,
                        delta: f64::NAN,
                        p,
                        data_seed: seed,
                        method_seed: method_seed(seed, m),
                        status: Status::Failed,
                        aari: None,
                        dasgupta_cost: None,
                        queries: None,
                        comparisons: None,
                        wall_ms: 0.0,
                        error: None,
                    };
                    let started = Instant::now();
                    let outcome = match (&loaded, m.is_active()) {
                        (Loaded::Comparisons(_), true) => {
                            row.status = Status::Skipped;
                            row.error = Some("active queries need similarities".into());
                            return (row, None);
                        }
                        (Loaded::Similarities(w), true) => run_active(m, w, p, row.method_seed),
                        (_, false) => match sampled.as_ref().expect("sampled for passive methods") {
                            Ok(qs) => run_passive(m, qs, None, row.method_seed),
                            Err(e) => Err(Error::InvalidArgument(e.to_string())),
                        },
                    };
                    row.wall_ms = started.elapsed().as_secs_f64() * 1e3;
                    let scored = outcome.and_then(|o| {
                        let cost = match &loaded {
                            Loaded::Similarities(w) => Some(dasgupta_cost(w, &o.dendrogram)?),
                            Loaded::Comparisons(_) => None,
                        };
                        Ok((o, cost))
                    });
                    match scored {
                        Ok((o, cost)) => {
                            row.status = Status::Ok;
                            row.dasgupta_cost = cost;
                            row.queries = o.queries;
                            row.comparisons = o.comparisons;
                            (row, Some(o.dendrogram))
                        }
                        Err(e) => {
                            row.error = Some(e.to_string());
                            (row, None)
                        }
                    }
                })
                .collect()
        })?;
        for (row, tree) in results {
            if let Some(t) = tree {
                trees.insert((row.method, pi), t);
            }
            rows.push(row);
        }
    }
    let manifest = RunManifest {
        schema_version: SCHEMA_VERSION,
        command: "dataset-run".into(),
        config: serde_json::to_value(cfg)?,
        rows,
        warnings,
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    Ok((manifest, trees))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelMode {
    Active,
    Passive,
}

/// Source data for [`kernel_dump`].
#[derive(Clone, Debug)]
pub enum KernelSource {
    Similarities(SimilarityMatrix),
    Comparisons(QuadrupletSet),
}

#[derive(Clone, Debug, PartialEq)]
pub struct KernelDumpParams {
    pub mode: KernelMode,
    /// Sampling rate when a passive kernel is built from similarities.
    pub p: f64,
    pub landmark_prob: f64,
    pub num_references: usize,
    pub seed: u64,
}

/// Computes a kernel and returns it as CSV, with the active query count in
/// a footer for active mode.
pub fn kernel_dump(source: &KernelSource, params: &KernelDumpParams) -> Result<(KernelMatrix, String)> {
    match (params.mode, source) {
        (KernelMode::Active, KernelSource::Similarities(w)) => {
            let mut oracle = ActiveOracle::new(w)?;
            let cfg = ActiveKernelConfig {
                landmark_prob: params.landmark_prob,
                num_references: params.num_references,
                seed: params.seed,
            };
            let (k, q) = active_kernel(&mut oracle, w.n(), &cfg)?;
            let text = io::write_kernel_csv(&k, Some(q));
            Ok((k, text))
        }
        (KernelMode::Active, KernelSource::Comparisons(_)) => Err(Error::InvalidArgument(
            "an active kernel needs a similarity matrix to query".into(),
        )),
        (KernelMode::Passive, src) => {
            let sampled;
            let qs = match src {
                KernelSource::Comparisons(q) => q,
                KernelSource::Similarities(w) => {
                    check_prob(params.p)?;
                    sampled = sample_passive(w, params.p, params.seed)?;
                    &sampled
                }
            };
            let k = passive_kernel(qs)?;
            let text = io::write_kernel_csv(&k, None);
            Ok((k, text))
        }
    }
}

fn fmt_opt<T: fmt::Display>(v: Option<T>) -> String {
    v.map_or(String::new(), |x| x.to_string())
}

fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v:?}")
    }
}

pub fn results_csv(rows: &[ResultRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(RESULTS_HEADER).map_err(csv_err)?;
    for r in rows {
        w.write_record([
            SCHEMA_VERSION.to_string(),
            r.method.to_string(),
            r.delta_index.to_string(),
            r.p_index.to_string(),
            r.trial.to_string(),
            fmt_f64(r.delta),
            fmt_f64(r.p),
            r.data_seed.to_string(),
            r.method_seed.to_string(),
            r.status.to_string(),
            r.aari.map_or(String::new(), |v| format!("{v:?}")),
            r.dasgupta_cost.map_or(String::new(), |v| format!("{v:?}")),
            fmt_opt(r.queries),
            fmt_opt(r.comparisons),
            format!("{:.3}", r.wall_ms),
            r.error.clone().unwrap_or_default(),
        ])
        .map_err(csv_err)?;
    }
    finish_csv(w)
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

fn finish_csv(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

/// Mean and sample standard deviation per (method, delta, p) cell.
#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub method: Method,
    pub delta_index: usize,
    pub p_index: usize,
    pub delta: f64,
    pub p: f64,
    pub trials: usize,
    pub completed: usize,
    pub metric: &'static str,
    pub mean: f64,
    pub std: f64,
    pub mean_queries: Option<f64>,
    pub mean_comparisons: Option<f64>,
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    let var = if v.len() > 1 {
        v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (v.len() - 1) as f64
    } else {
        0.0
    };
    (mean, var.sqrt())
}

pub fn summarize(rows: &[ResultRow]) -> Vec<SummaryRow> {
    let mut cells: BTreeMap<(usize, usize, Method), Vec<&ResultRow>> = BTreeMap::new();
    for r in rows {
        cells.entry((r.delta_index, r.p_index, r.method)).or_default().push(r);
    }
    cells
        .into_iter()
        .map(|((di, pi, method), rs)| {
            let ok: Vec<&&ResultRow> = rs.iter().filter(|r| r.status == Status::Ok).collect();
            let (metric, values): (&'static str, Vec<f64>) = if ok.iter().any(|r| r.aari.is_some()) {
                ("aari", ok.iter().filter_map(|r| r.aari).collect())
            } else {
                ("dasgupta_cost", ok.iter().filter_map(|r| r.dasgupta_cost).collect())
            };
            let (mean, std) = mean_std(&values);
            let avg = |f: &dyn Fn(&ResultRow) -> Option<u64>| {
                let v: Vec<f64> = ok.iter().filter_map(|r| f(r)).map(|x| x as f64).collect();
                (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
            };
            SummaryRow {
                method,
                delta_index: di,
                p_index: pi,
                delta: rs[0].delta,
                p: rs[0].p,
                trials: rs.len(),
                completed: ok.len(),
                metric,
                mean,
                std,
                mean_queries: avg(&|r| r.queries),
                mean_comparisons: avg(&|r| r.comparisons),
            }
        })
        .collect()
}

pub fn summary_csv(rows: &[SummaryRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SUMMARY_HEADER).map_err(csv_err)?;
    for s in rows {
        w.write_record([
            SCHEMA_VERSION.to_string(),
            s.method.to_string(),
            fmt_f64(s.delta),
            fmt_f64(s.p),
            s.trials.to_string(),
            s.completed.to_string(),
            s.metric.to_string(),
            fmt_f64(s.mean),
            fmt_f64(s.std),
            s.mean_queries.map_or(String::new(), |v| format!("{v:?}")),
            s.mean_comparisons.map_or(String::new(), |v| format!("{v:?}")),
        ])
        .map_err(csv_err)?;
    }
    finish_csv(w)
}

/// Writes `results.csv`, `summary.csv`, `manifest.json` and one SVG chart
/// per sampling rate (metric against delta) or, for datasets, per method
/// set (metric against p). Returns the written paths.
pub fn write_outputs(dir: &Path, manifest: &RunManifest) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut put = |name: String, text: String| -> Result<()> {
        let path = dir.join(name);
        std::fs::write(&path, text)?;
        written.push(path);
        Ok(())
    };
    put("results.csv".into(), results_csv(&manifest.rows)?)?;
    let summary = summarize(&manifest.rows);
    put("summary.csv".into(), summary_csv(&summary)?)?;
    put("manifest.json".into(), serde_json::to_string_pretty(manifest)?)?;
    for (name, svg) in plot::charts(&summary) {
        put(name, svg)?;
    }
    Ok(written)
}

/// Writes each dataset tree as a linkage CSV and a Newick file.
pub fn write_trees(dir: &Path, trees: &DatasetTrees) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for ((method, pi), d) in trees {
        let stem = format!("tree_{method}_p{pi}");
        for (ext, text) in [("csv", io::write_linkage_csv(d)), ("nwk", d.to_newick())] {
            let path = dir.join(format!("{stem}.{ext}"));
            std::fs::write(&path, text)?;
            written.push(path);
        }
    }
    Ok(written)
}
