//! Labeled dataset construction: sample graphs, label each with BFGS-optimized
//! angles started from a per-graph TQA grid search, and persist as JSONL.

use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::write_atomic;
use crate::error::{Error, Result};
use crate::graph::{gen_er_constant, gen_er_random, max_cut_bruteforce, Graph};
use crate::initializers::{best_tqa_dt, default_dt_grid, tqa_init, InitMethod};
use crate::optimizer::{optimize_circuit, OptimizerConfig};
use crate::seed;
use crate::simulator::QaoaCircuit;

/// A graph with its optimized QAOA angles: one training example for the predictor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledInstance {
    pub dataset_id: String,
    pub instance_id: String,
    pub graph: Graph,
    pub p: usize,
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
    pub final_cost: f64,
    pub approx_ratio: f64,
    pub init_method: InitMethod,
    pub optimizer_iters: usize,
    pub cost_evals: usize,
    pub grad_evals: usize,
    pub converged: bool,
}

impl LabeledInstance {
    pub fn validate(&self) -> Result<()> {
        let id = &self.instance_id;
        if self.p == 0 || self.beta.len() != self.p || self.gamma.len() != self.p {
            return Err(Error::Validation(format!(
                "{id}: angle vectors do not have length p={}",
                self.p
            )));
        }
        let c_max = self
            .graph
            .c_max()
            .ok_or_else(|| Error::Validation(format!("{id}: graph has no c_max")))?;
        if c_max == 0 {
            return Err(Error::Validation(format!("{id}: edgeless graph")));
        }
        if (self.approx_ratio - self.final_cost / c_max as f64).abs() > 1e-12 {
            return Err(Error::Validation(format!(
                "{id}: approx_ratio disagrees with final_cost / c_max"
            )));
        }
        if !(self.approx_ratio > 0.0 && self.approx_ratio <= 1.0 + 1e-12) {
            return Err(Error::Validation(format!(
                "{id}: approx_ratio {} outside (0, 1]",
                self.approx_ratio
            )));
        }
        Ok(())
    }

    #[cfg(test)]
    pub(crate) fn example() -> Self {
        let mut g = Graph::from_edges(2, [(0, 1)]).unwrap().with_id("ex");
        g.set_c_max(1);
        LabeledInstance {
            dataset_id: "test".into(),
            instance_id: "ex".into(),
            graph: g,
            p: 1,
            beta: vec![0.0],
            gamma: vec![0.0],
            final_cost: 0.5,
            approx_ratio: 0.5,
            init_method: InitMethod::Custom,
            optimizer_iters: 0,
            cost_evals: 0,
            grad_evals: 0,
            converged: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnsembleSpec {
    Constant { edge_prob: f64 },
    Random { prob_lo: f64, prob_hi: f64 },
}

impl EnsembleSpec {
    pub fn sample(&self, n: usize, seed: u64) -> Result<Graph> {
        match *self {
            EnsembleSpec::Constant { edge_prob } => gen_er_constant(n, edge_prob, seed),
            EnsembleSpec::Random { prob_lo, prob_hi } => gen_er_random(n, prob_lo, prob_hi, seed),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            EnsembleSpec::Constant { .. } => "constant",
            EnsembleSpec::Random { .. } => "random",
        }
    }
}

impl Default for EnsembleSpec {
    fn default() -> Self {
        EnsembleSpec::Random {
            prob_lo: 0.3,
            prob_hi: 0.9,
        }
    }
}

/// Draws the `index`-th non-empty graph of a seeded stream. Edgeless draws are
/// replaced by redraws from a perturbed seed.
pub fn sample_graph(ensemble: &EnsembleSpec, n: usize, master_seed: u64, purpose: &str, index: u64) -> Result<Graph> {
    let mut g = ensemble.sample(n, seed::derive_seed(master_seed, purpose, index))?;
    let mut attempt = 0;
    while g.num_edges() == 0 {
        attempt += 1;
        if attempt > 1000 {
            return Err(Error::InvalidInstance(format!(
                "could not draw a graph with edges for {purpose}[{index}]"
            )));
        }
        log::info!("{purpose}[{index}]: edgeless draw, resampling (attempt {attempt})");
        let label = format!("{purpose}-retry-{attempt}");
        g = ensemble.sample(n, seed::derive_seed(master_seed, &label, index))?;
    }
    Ok(g)
}

/// `count` non-empty graphs with ids `{prefix}-{index:05}`, computed in parallel.
pub fn sample_graphs(
    ensemble: &EnsembleSpec,
    n: usize,
    count: usize,
    master_seed: u64,
    purpose: &str,
    prefix: &str,
) -> Result<Vec<Graph>> {
    (0..count)
        .into_par_iter()
        .map(|i| {
            let mut g = sample_graph(ensemble, n, master_seed, purpose, i as u64)?.with_id(format!("{prefix}-{i:05}"));
            g.ensure_c_max()?;
            Ok(g)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetConfig {
    pub dataset_id: String,
    pub n: usize,
    pub p: usize,
    pub ensemble: EnsembleSpec,
    pub count: usize,
    pub master_seed: u64,
    pub optimizer: OptimizerConfig,
    pub tqa_grid: Vec<f64>,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            dataset_id: "dataset".into(),
            n: 10,
            p: 2,
            ensemble: EnsembleSpec::default(),
            count: 1000,
            master_seed: 0,
            optimizer: OptimizerConfig::default(),
            tqa_grid: default_dt_grid(),
        }
    }
}

impl DatasetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.count == 0 || self.p == 0 || self.n < 2 || self.tqa_grid.is_empty() {
            return Err(Error::InvalidArgument(
                "dataset needs count >= 1, p >= 1, n >= 2 and a non-empty dt grid".into(),
            ));
        }
        self.optimizer.validate()
    }
}

#[derive(Debug, Clone)]
pub struct SkippedInstance {
    pub index: usize,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct DatasetBuild {
    pub records: Vec<LabeledInstance>,
    pub skipped: Vec<SkippedInstance>,
}

fn label_one(cfg: &DatasetConfig, index: usize) -> Result<LabeledInstance> {
    let id = format!("{}-{index:05}", cfg.dataset_id);
    let mut graph = sample_graph(&cfg.ensemble, cfg.n, cfg.master_seed, "graph", index as u64)?.with_id(id.clone());
    let c_max = max_cut_bruteforce(&graph)?.c_max;
    graph.set_c_max(c_max);
    let circuit = QaoaCircuit::new(&graph)?;
    let (dt, _) = best_tqa_dt(&circuit, cfg.p, &cfg.tqa_grid)?;
    let (params, trace) = optimize_circuit(&circuit, c_max, &tqa_init(cfg.p, dt), &cfg.optimizer)?;
    let final_cost = trace.iterates.last().expect("trace has a start point").cost;
    let rec = LabeledInstance {
        dataset_id: cfg.dataset_id.clone(),
        instance_id: id,
        graph,
        p: cfg.p,
        beta: params.beta,
        gamma: params.gamma,
        final_cost,
        approx_ratio: final_cost / c_max as f64,
        init_method: InitMethod::FullTqa,
        optimizer_iters: trace.iterations(),
        cost_evals: trace.cost_evaluations,
        grad_evals: trace.gradient_evaluations,
        converged: trace.converged,
    };
    rec.validate()?;
    Ok(rec)
}

/// Generates and labels `cfg.count` instances. Output order follows the
/// instance index, whatever the worker count.
pub fn build_dataset(cfg: &DatasetConfig) -> Result<DatasetBuild> {
    cfg.validate()?;
    let results: Vec<Result<LabeledInstance>> = (0..cfg.count).into_par_iter().map(|i| label_one(cfg, i)).collect();
    let mut build = DatasetBuild {
        records: Vec::with_capacity(cfg.count),
        skipped: Vec::new(),
    };
    for (index, r) in results.into_iter().enumerate() {
        match r {
            Ok(rec) => build.records.push(rec),
            Err(e) => {
                log::warn!("{}[{index}] skipped: {e}", cfg.dataset_id);
                build.skipped.push(SkippedInstance {
                    index,
                    reason: e.to_string(),
                });
            }
        }
    }
    Ok(build)
}

pub fn to_jsonl(records: &[LabeledInstance]) -> Result<String> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn write_dataset(path: &Path, records: &[LabeledInstance]) -> Result<String> {
    let body = to_jsonl(records)?;
    write_atomic(path, body.as_bytes())?;
    Ok(sha256_hex(body.as_bytes()))
}

pub fn read_dataset(path: &Path) -> Result<Vec<LabeledInstance>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: LabeledInstance = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: i + 1,
            column: e.column(),
            message: e.to_string(),
        })?;
        rec.validate()?;
        out.push(rec);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub config: DatasetConfig,
    pub file: String,
    pub records: usize,
    pub skipped: Vec<usize>,
    pub sha256: String,
}

pub fn manifest_path(dataset: &Path) -> PathBuf {
    let stem = dataset.file_stem().and_then(|s| s.to_str()).unwrap_or("dataset");
    dataset.with_file_name(format!("{stem}.manifest.json"))
}

/// Builds the dataset, writes it as JSONL and records a manifest alongside it.
pub fn build_dataset_file(cfg: &DatasetConfig, path: &Path) -> Result<DatasetManifest> {
    let build = build_dataset(cfg)?;
    let sha256 = write_dataset(path, &build.records)?;
    let manifest = DatasetManifest {
        config: cfg.clone(),
        file: path
            .file_name()
            .and_then(|s| s.to_str())
            .unwrap_or_default()
            .to_string(),
        records: build.records.len(),
        skipped: build.skipped.iter().map(|s| s.index).collect(),
        sha256,
    };
    write_atomic(
        &manifest_path(path),
        serde_json::to_string_pretty(&manifest)?.as_bytes(),
    )?;
    Ok(manifest)
}

/// Seeded shuffle split into disjoint train/test parts; each part keeps the input order.
pub fn split_dataset<T: Clone>(records: &[T], train_fraction: f64, seed: u64) -> Result<(Vec<T>, Vec<T>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    if records.is_empty() {
        return Err(Error::InvalidDataset("cannot split an empty dataset".into()));
    }
    let mut order: Vec<usize> = (0..records.len()).collect();
    order.shuffle(&mut seed::stream(seed, "split", 0));
    let n_train = (train_fraction * records.len() as f64).round() as usize;
    let mut train_idx = order[..n_train].to_vec();
    let mut test_idx = order[n_train..].to_vec();
    train_idx.sort_unstable();
    test_idx.sort_unstable();
    let pick = |idx: &[usize]| idx.iter().map(|&i| records[i].clone()).collect();
    Ok((pick(&train_idx), pick(&test_idx)))
}

pub fn split_dataset_file(
    input: &Path,
    train_fraction: f64,
    seed: u64,
    train_out: &Path,
    test_out: &Path,
) -> Result<(usize, usize)> {
    let records = read_dataset(input)?;
    let (train, test) = split_dataset(&records, train_fraction, seed)?;
    write_dataset(train_out, &train)?;
    write_dataset(test_out, &test)?;
    Ok((train.len(), test.len()))
}
