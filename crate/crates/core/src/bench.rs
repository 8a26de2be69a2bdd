//! Benchmark harness: convergence curves, zeroth-iteration size sweeps and
//! per-graph parameter dumps, with CSV and SVG output.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::write_atomic;
use crate::error::{Error, Result};
use crate::graph::{Ensemble, Graph};
use crate::initializers::{
    average_init, batches_fit, calibrate_tqa_dt, default_dt_grid, tqa_init, FixedInit, InitMethod, Initializer,
    TqaCalibration,
};
use crate::neuralnet::{train, MlpModel, TrainConfig, TrainReport};
use crate::optimizer::{optimize_circuit, OptimizerConfig};
use crate::pipeline::LabeledInstance;
use crate::plot::{self, Chart, Series};
use crate::simulator::{QaoaCircuit, QaoaParams};

/// Thresholds for the iterations-to-within-epsilon report.
pub const EPSILONS: [f64; 3] = [0.01, 0.005, 0.001];

/// Mean and standard error (sample sd / sqrt(count)). Values are sorted
/// before summing so the result does not depend on input order.
pub fn mean_sem(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let mut dev: Vec<f64> = v.iter().map(|x| (x - mean).powi(2)).collect();
    dev.sort_by(f64::total_cmp);
    let var = dev.iter().sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn with_c_max(g: &Graph) -> Result<(Graph, usize)> {
    let mut g = g.clone();
    if g.num_edges() == 0 {
        return Err(Error::UndefinedRatio { graph_id: g.id.clone() });
    }
    let c = g.ensure_c_max()?;
    Ok((g, c))
}

fn check_shared_n(graphs: &[Graph]) -> Result<usize> {
    let n = graphs
        .first()
        .ok_or_else(|| Error::InvalidArgument("benchmark needs at least one graph".into()))?
        .n();
    if let Some(g) = graphs.iter().find(|g| g.n() != n) {
        return Err(Error::InvalidArgument(format!(
            "graphs must share n: `{}` has {} nodes, expected {n}",
            g.id,
            g.n()
        )));
    }
    Ok(n)
}

/// One optimizer run of one method on one graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodRun {
    pub graph_id: String,
    pub method: InitMethod,
    /// Approximation ratio at the start point and after each accepted step.
    pub ratios: Vec<f64>,
    pub cost_evals: usize,
    pub grad_evals: usize,
    pub converged: bool,
    pub init: QaoaParams,
    pub optimized: QaoaParams,
}

impl MethodRun {
    pub fn iterations(&self) -> usize {
        self.ratios.len() - 1
    }

    pub fn final_ratio(&self) -> f64 {
        *self.ratios.last().expect("ratios hold the start point")
    }

    /// First iteration whose ratio is within `eps` of the final one.
    pub fn iterations_to_within(&self, eps: f64) -> usize {
        let target = self.final_ratio() - eps;
        self.ratios
            .iter()
            .position(|&r| r >= target)
            .unwrap_or(self.iterations())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exclusion {
    pub graph_id: String,
    pub method: InitMethod,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceResult {
    pub method: InitMethod,
    pub mean_ar: Vec<f64>,
    pub sem: Vec<f64>,
    pub count: usize,
    pub n: usize,
    pub p: usize,
    pub ensemble: Ensemble,
    pub final_mean_ar: f64,
    pub mean_iterations: f64,
    /// `(eps, mean iterations to reach final ratio - eps)` for each of [`EPSILONS`].
    pub iterations_to_within: Vec<(f64, f64)>,
    pub cost_evals_per_iteration: f64,
}

impl ConvergenceResult {
    pub fn zeroth_mean_ar(&self) -> f64 {
        self.mean_ar[0]
    }

    pub fn iterations_within(&self, eps: f64) -> Option<f64> {
        self.iterations_to_within
            .iter()
            .find(|(e, _)| *e == eps)
            .map(|(_, v)| *v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub results: Vec<ConvergenceResult>,
    pub runs: Vec<MethodRun>,
    pub exclusions: Vec<Exclusion>,
}

impl ConvergenceReport {
    pub fn result(&self, method: InitMethod) -> Option<&ConvergenceResult> {
        self.results.iter().find(|r| r.method == method)
    }
}

fn run_one(g: &Graph, method: &Initializer, p: usize, cfg: &OptimizerConfig) -> Result<MethodRun> {
    let (g, c_max) = with_c_max(g)?;
    let init = method.init(&g, p)?;
    let circuit = QaoaCircuit::new(&g)?;
    let (optimized, trace) = optimize_circuit(&circuit, c_max, &init, cfg)?;
    Ok(MethodRun {
        graph_id: g.id.clone(),
        method: method.method(),
        ratios: trace.iterates.iter().map(|e| e.cost / c_max as f64).collect(),
        cost_evals: trace.cost_evaluations,
        grad_evals: trace.gradient_evaluations,
        converged: trace.converged,
        init,
        optimized,
    })
}

/// Optimizes every graph from every method's start point and aggregates the
/// approximation-ratio curves. Shorter traces are padded with their final
/// value up to the longest trace of the whole run.
pub fn run_convergence(
    graphs: &[Graph],
    methods: &[Initializer],
    p: usize,
    cfg: &OptimizerConfig,
) -> Result<ConvergenceReport> {
    let n = check_shared_n(graphs)?;
    cfg.validate()?;
    let pairs: Vec<(usize, usize)> = (0..methods.len())
        .flat_map(|m| (0..graphs.len()).map(move |g| (m, g)))
        .collect();
    let outcomes: Vec<Result<MethodRun>> = pairs
        .par_iter()
        .map(|&(m, g)| run_one(&graphs[g], &methods[m], p, cfg))
        .collect();

    let mut runs = Vec::new();
    let mut exclusions = Vec::new();
    for (&(m, g), out) in pairs.iter().zip(outcomes) {
        match out {
            Ok(run) => runs.push(run),
            Err(e) => {
                log::warn!("excluding {} on `{}`: {e}", methods[m].method(), graphs[g].id);
                exclusions.push(Exclusion {
                    graph_id: graphs[g].id.clone(),
                    method: methods[m].method(),
                    reason: e.to_string(),
                });
            }
        }
    }

    let len = runs.iter().map(|r| r.ratios.len()).max().unwrap_or(1);
    let ensemble = graphs[0].ensemble();
    let mut results = Vec::new();
    for method in methods {
        let tag = method.method();
        let mine: Vec<&MethodRun> = runs.iter().filter(|r| r.method == tag).collect();
        if mine.is_empty() {
            continue;
        }
        let at = |r: &MethodRun, k: usize| r.ratios[k.min(r.ratios.len() - 1)];
        let (mean_ar, sem): (Vec<f64>, Vec<f64>) = (0..len)
            .map(|k| mean_sem(&mine.iter().map(|r| at(r, k)).collect::<Vec<_>>()))
            .unzip();
        let avg = |f: &dyn Fn(&MethodRun) -> f64| mean_sem(&mine.iter().map(|r| f(r)).collect::<Vec<_>>()).0;
        let total_iters: usize = mine.iter().map(|r| r.iterations()).sum();
        let total_cost: usize = mine.iter().map(|r| r.cost_evals).sum();
        results.push(ConvergenceResult {
            method: tag,
            final_mean_ar: avg(&|r| r.final_ratio()),
            mean_iterations: avg(&|r| r.iterations() as f64),
            iterations_to_within: EPSILONS
                .iter()
                .map(|&eps| (eps, avg(&|r| r.iterations_to_within(eps) as f64)))
                .collect(),
            cost_evals_per_iteration: if total_iters > 0 {
                total_cost as f64 / total_iters as f64
            } else {
                0.0
            },
            mean_ar,
            sem,
            count: mine.len(),
            n,
            p,
            ensemble,
        });
    }
    Ok(ConvergenceReport {
        results,
        runs,
        exclusions,
    })
}

/// Test graphs and methods for one graph size.
#[derive(Debug, Clone)]
pub struct SizeSetup {
    pub graphs: Vec<Graph>,
    pub methods: Vec<Initializer>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeRow {
    pub method: InitMethod,
    pub n: usize,
    pub mean_ar: f64,
    pub sem: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeSweepResult {
    pub p: usize,
    pub rows: Vec<SizeRow>,
    pub exclusions: Vec<Exclusion>,
}

impl SizeSweepResult {
    pub fn get(&self, method: InitMethod, n: usize) -> Option<&SizeRow> {
        self.rows.iter().find(|r| r.method == method && r.n == n)
    }
}

fn zeroth_ratio(g: &Graph, method: &Initializer, p: usize) -> Result<f64> {
    let (g, c_max) = with_c_max(g)?;
    let params = method.init(&g, p)?;
    Ok(QaoaCircuit::new(&g)?.expectation(&params) / c_max as f64)
}

/// Zeroth-iteration approximation ratio of each method at each size. Every
/// size needs a setup that includes a trained network.
pub fn run_size_sweep(sizes: &[usize], setups: &BTreeMap<usize, SizeSetup>, p: usize) -> Result<SizeSweepResult> {
    for &n in sizes {
        let has_model = setups
            .get(&n)
            .is_some_and(|s| s.methods.iter().any(Initializer::is_personalized));
        if !has_model {
            return Err(Error::MissingArtifact {
                size: n,
                what: "trained model".into(),
            });
        }
    }
    let mut rows = Vec::new();
    let mut exclusions = Vec::new();
    for &n in sizes {
        let setup = &setups[&n];
        for method in &setup.methods {
            let outcomes: Vec<Result<f64>> = setup.graphs.par_iter().map(|g| zeroth_ratio(g, method, p)).collect();
            let mut values = Vec::new();
            for (g, out) in setup.graphs.iter().zip(outcomes) {
                match out {
                    Ok(r) => values.push(r),
                    Err(e) => exclusions.push(Exclusion {
                        graph_id: g.id.clone(),
                        method: method.method(),
                        reason: e.to_string(),
                    }),
                }
            }
            if values.is_empty() {
                continue;
            }
            let (mean_ar, sem) = mean_sem(&values);
            rows.push(SizeRow {
                method: method.method(),
                n,
                mean_ar,
                sem,
                count: values.len(),
            });
        }
    }
    Ok(SizeSweepResult { p, rows, exclusions })
}

pub const OPTIMIZED: &str = "optimized";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonalizationRow {
    pub graph_id: String,
    pub method: String,
    /// 1-based layer index.
    pub layer: usize,
    pub beta: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonalizationTable {
    pub p: usize,
    pub rows: Vec<PersonalizationRow>,
}

impl PersonalizationTable {
    pub fn methods(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.method) {
                out.push(r.method.clone());
            }
        }
        out
    }

    /// Mean of |method - optimized| over graphs, layers and both angles.
    pub fn deviation_from_optimized(&self, method: &str) -> Option<f64> {
        let mut diffs = Vec::new();
        for r in self.rows.iter().filter(|r| r.method == method) {
            let opt = self
                .rows
                .iter()
                .find(|o| o.method == OPTIMIZED && o.graph_id == r.graph_id && o.layer == r.layer)?;
            diffs.push((r.beta - opt.beta).abs());
            diffs.push((r.gamma - opt.gamma).abs());
        }
        (!diffs.is_empty()).then(|| mean_sem(&diffs).0)
    }
}

/// Per-graph parameter table: the network prediction, BFGS-optimized angles
/// started from it, and every other method's start point.
pub fn dump_personalization(
    graphs: &[Graph],
    methods: &[Initializer],
    p: usize,
    cfg: &OptimizerConfig,
) -> Result<PersonalizationTable> {
    let n = check_shared_n(graphs)?;
    let nn = methods
        .iter()
        .find(|m| m.is_personalized())
        .ok_or_else(|| Error::MissingArtifact {
            size: n,
            what: "trained model".into(),
        })?;
    let per_graph: Vec<Result<Vec<PersonalizationRow>>> = graphs
        .par_iter()
        .map(|g| {
            let (g, c_max) = with_c_max(g)?;
            let start = nn.init(&g, p)?;
            let (optimized, _) = optimize_circuit(&QaoaCircuit::new(&g)?, c_max, &start, cfg)?;
            let mut sets = vec![
                (InitMethod::NeuralNet.as_str().to_string(), start),
                (OPTIMIZED.to_string(), optimized),
            ];
            for m in methods.iter().filter(|m| !m.is_personalized()) {
                sets.push((m.method().as_str().to_string(), m.init(&g, p)?));
            }
            Ok(sets
                .into_iter()
                .flat_map(|(method, params)| {
                    let id = g.id.clone();
                    (0..p).map(move |l| PersonalizationRow {
                        graph_id: id.clone(),
                        method: method.clone(),
                        layer: l + 1,
                        beta: params.beta[l],
                        gamma: params.gamma[l],
                    })
                })
                .collect())
        })
        .collect();
    let mut rows = Vec::new();
    for r in per_graph {
        rows.extend(r?);
    }
    Ok(PersonalizationTable { p, rows })
}

/// Settings for fitting the baselines and the network from a labeled corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SuiteConfig {
    pub calibration_graphs: usize,
    pub batch_graphs: usize,
    pub average_labels: usize,
    pub tqa_grid: Vec<f64>,
    pub optimizer: OptimizerConfig,
    pub training: TrainConfig,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            calibration_graphs: 50,
            batch_graphs: 200,
            average_labels: 100,
            tqa_grid: default_dt_grid(),
            optimizer: OptimizerConfig::default(),
            training: TrainConfig::default(),
        }
    }
}

/// Every fitted initializer for one (ensemble, n, p) setting.
#[derive(Debug, Clone)]
pub struct MethodSuite {
    pub calibration: TqaCalibration,
    pub batches: FixedInit,
    pub average: FixedInit,
    pub model: Arc<MlpModel>,
    pub train_report: TrainReport,
}

impl MethodSuite {
    /// Fits TQA(dt*), batches and average on prefixes of `labeled` and trains
    /// the network on all of it.
    pub fn fit(labeled: &[LabeledInstance], p: usize, cfg: &SuiteConfig) -> Result<Self> {
        if labeled.iter().any(|r| r.p != p) {
            return Err(Error::InvalidDataset(format!("records must all have p={p}")));
        }
        let prefix = |k: usize| &labeled[..k.min(labeled.len())];
        let graphs = |k: usize| prefix(k).iter().map(|r| r.graph.clone()).collect::<Vec<_>>();
        let calibration = calibrate_tqa_dt(&graphs(cfg.calibration_graphs), p, &cfg.tqa_grid)?;
        let start = tqa_init(p, calibration.dt_star);
        let batches = batches_fit(&graphs(cfg.batch_graphs), p, &cfg.optimizer, &start)?;
        let average = average_init(prefix(cfg.average_labels))?;
        let (model, train_report) = train(labeled, &cfg.training)?;
        Ok(MethodSuite {
            calibration,
            batches,
            average,
            model: Arc::new(model),
            train_report,
        })
    }

    pub fn initializer(&self, method: InitMethod) -> Result<Initializer> {
        Ok(match method {
            InitMethod::Linear => Initializer::Linear,
            InitMethod::Tqa => Initializer::Tqa {
                dt: self.calibration.dt_star,
            },
            InitMethod::Batches => Initializer::Fixed(self.batches.clone()),
            InitMethod::Average => Initializer::Fixed(self.average.clone()),
            InitMethod::NeuralNet => Initializer::Neural(self.model.clone()),
            other => return Err(Error::InvalidArgument(format!("`{other}` is not a benchmark method"))),
        })
    }

    pub fn initializers(&self, methods: &[InitMethod]) -> Result<Vec<Initializer>> {
        methods.iter().map(|&m| self.initializer(m)).collect()
    }
}

fn csv_bytes<T: Serialize>(rows: &[T]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| Error::io("<csv buffer>", e.into_error()))
}

#[derive(Serialize)]
struct ConvergenceCsvRow {
    method: InitMethod,
    iteration: usize,
    mean_ar: f64,
    sem: f64,
    count: usize,
    n: usize,
    p: usize,
    ensemble: Ensemble,
}

#[derive(Serialize)]
struct SummaryCsvRow {
    method: InitMethod,
    count: usize,
    zeroth_mean_ar: f64,
    final_mean_ar: f64,
    mean_iterations: f64,
    iters_within_0_01: f64,
    iters_within_0_005: f64,
    iters_within_0_001: f64,
    cost_evals_per_iteration: f64,
}

/// Writes `convergence.csv`, `convergence_summary.csv`, `convergence_exclusions.csv`
/// (only when something was excluded) and `convergence.svg` into `dir`.
pub fn write_convergence(dir: &Path, report: &ConvergenceReport) -> Result<Vec<PathBuf>> {
    let curve: Vec<ConvergenceCsvRow> = report
        .results
        .iter()
        .flat_map(|r| {
            r.mean_ar
                .iter()
                .zip(&r.sem)
                .enumerate()
                .map(move |(k, (&mean_ar, &sem))| ConvergenceCsvRow {
                    method: r.method,
                    iteration: k,
                    mean_ar,
                    sem,
                    count: r.count,
                    n: r.n,
                    p: r.p,
                    ensemble: r.ensemble,
                })
        })
        .collect();
    let summary: Vec<SummaryCsvRow> = report
        .results
        .iter()
        .map(|r| SummaryCsvRow {
            method: r.method,
            count: r.count,
            zeroth_mean_ar: r.zeroth_mean_ar(),
            final_mean_ar: r.final_mean_ar,
            mean_iterations: r.mean_iterations,
            iters_within_0_01: r.iterations_within(0.01).unwrap_or(f64::NAN),
            iters_within_0_005: r.iterations_within(0.005).unwrap_or(f64::NAN),
            iters_within_0_001: r.iterations_within(0.001).unwrap_or(f64::NAN),
            cost_evals_per_iteration: r.cost_evals_per_iteration,
        })
        .collect();
    let chart = Chart {
        title: report
            .results
            .first()
            .map(|r| format!("{} ER, n={}, p={}", r.ensemble, r.n, r.p))
            .unwrap_or_default(),
        x_label: "iteration".into(),
        y_label: "mean approximation ratio".into(),
        series: report
            .results
            .iter()
            .map(|r| Series {
                label: r.method.to_string(),
                points: r.mean_ar.iter().enumerate().map(|(k, &v)| (k as f64, v)).collect(),
            })
            .collect(),
    };
    let mut out = vec![
        put(dir, "convergence.csv", &csv_bytes(&curve)?)?,
        put(dir, "convergence_summary.csv", &csv_bytes(&summary)?)?,
        put(dir, "convergence.svg", plot::render(&[chart]).as_bytes())?,
    ];
    if !report.exclusions.is_empty() {
        out.push(put(dir, "convergence_exclusions.csv", &csv_bytes(&report.exclusions)?)?);
    }
    Ok(out)
}

/// Writes `size_sweep.csv` and `size_sweep.svg` into `dir`.
pub fn write_size_sweep(dir: &Path, result: &SizeSweepResult) -> Result<Vec<PathBuf>> {
    let mut by_method: BTreeMap<InitMethod, Vec<(f64, f64)>> = BTreeMap::new();
    for r in &result.rows {
        by_method.entry(r.method).or_default().push((r.n as f64, r.mean_ar));
    }
    let chart = Chart {
        title: format!("iteration 0, p={}", result.p),
        x_label: "graph size n".into(),
        y_label: "mean approximation ratio".into(),
        series: by_method
            .into_iter()
            .map(|(m, points)| Series {
                label: m.to_string(),
                points,
            })
            .collect(),
    };
    Ok(vec![
        put(dir, "size_sweep.csv", &csv_bytes(&result.rows)?)?,
        put(dir, "size_sweep.svg", plot::render(&[chart]).as_bytes())?,
    ])
}

/// Writes `personalization.csv` and `personalization.svg` (beta and gamma panels).
pub fn write_personalization(dir: &Path, table: &PersonalizationTable) -> Result<Vec<PathBuf>> {
    let mut graphs: Vec<&str> = Vec::new();
    for r in &table.rows {
        if !graphs.contains(&r.graph_id.as_str()) {
            graphs.push(&r.graph_id);
        }
    }
    let series = |pick: fn(&PersonalizationRow) -> f64| -> Vec<Series> {
        let mut out = Vec::new();
        for m in table.methods() {
            let personal = m == InitMethod::NeuralNet.as_str() || m == OPTIMIZED;
            let shown: &[&str] = if personal {
                &graphs
            } else {
                &graphs[..graphs.len().min(1)]
            };
            for g in shown {
                let points = table
                    .rows
                    .iter()
                    .filter(|r| r.method == m && r.graph_id == *g)
                    .map(|r| (r.layer as f64, pick(r)))
                    .collect();
                let label = if personal { format!("{m} {g}") } else { m.clone() };
                out.push(Series { label, points });
            }
        }
        out
    };
    let charts = [
        Chart {
            title: "initial beta".into(),
            x_label: "layer".into(),
            y_label: "beta".into(),
            series: series(|r| r.beta),
        },
        Chart {
            title: "initial gamma".into(),
            x_label: "layer".into(),
            y_label: "gamma".into(),
            series: series(|r| r.gamma),
        },
    ];
    Ok(vec![
        put(dir, "personalization.csv", &csv_bytes(&table.rows)?)?,
        put(dir, "personalization.svg", plot::render(&charts).as_bytes())?,
    ])
}

fn put(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf> {
    let path = dir.join(name);
    write_atomic(&path, bytes)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::initializers::linear_init;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_8};

    fn graphs(count: usize, n: usize, seed: u64) -> Vec<Graph> {
        crate::pipeline::sample_graphs(&Default::default(), n, count, seed, "bench-test", "g").unwrap()
    }

    #[test]
    fn mean_sem_matches_textbook() {
        let (m, s) = mean_sem(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        // sample variance 5/3
        assert!((s - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
        assert_eq!(mean_sem(&[0.7]), (0.7, 0.0));
    }

    #[test]
    fn curves_are_monotone_and_padded() {
        let gs = graphs(6, 6, 1);
        let methods = [Initializer::Linear, Initializer::Tqa { dt: 0.8 }];
        let rep = run_convergence(&gs, &methods, 2, &OptimizerConfig::default()).unwrap();
        assert!(rep.exclusions.is_empty());
        assert_eq!(rep.results.len(), 2);
        let len = rep.results[0].mean_ar.len();
        for r in &rep.results {
            assert_eq!(r.mean_ar.len(), len);
            assert_eq!(r.count, 6);
            for w in r.mean_ar.windows(2) {
                assert!(w[1] >= w[0] - 1e-12);
            }
            assert!(r.mean_ar.iter().all(|&v| (0.0..=1.0).contains(&v)));
            assert!(r.sem.iter().all(|&s| s >= 0.0));
            assert!((r.mean_ar[len - 1] - r.final_mean_ar).abs() < 1e-12);
            let within: Vec<f64> = r.iterations_to_within.iter().map(|x| x.1).collect();
            assert!(within[0] <= within[1] && within[1] <= within[2]);
        }
    }

    #[test]
    fn start_at_optimum_gives_flat_curve() {
        let g = Graph::from_edges(2, [(0, 1)]).unwrap().with_id("edge");
        let opt = FixedInit {
            params: QaoaParams::new(vec![FRAC_PI_8], vec![FRAC_PI_2]).unwrap(),
            method: InitMethod::Custom,
            provenance: "analytic".into(),
        };
        let rep = run_convergence(&[g], &[Initializer::Fixed(opt)], 1, &OptimizerConfig::default()).unwrap();
        let r = &rep.results[0];
        assert!(r.mean_ar.iter().all(|&v| (v - 1.0).abs() < 1e-12), "{:?}", r.mean_ar);
        assert_eq!(r.iterations_within(0.001), Some(0.0));
    }

    #[test]
    fn incompatible_pairs_are_excluded() {
        let mut gs = graphs(3, 6, 2);
        gs.push(Graph::from_edges(6, []).unwrap().with_id("empty"));
        let wrong_p = FixedInit {
            params: linear_init(3),
            method: InitMethod::Batches,
            provenance: String::new(),
        };
        let rep = run_convergence(
            &gs,
            &[Initializer::Linear, Initializer::Fixed(wrong_p)],
            2,
            &Default::default(),
        )
        .unwrap();
        assert_eq!(rep.results.len(), 1);
        assert_eq!(rep.results[0].count, 3);
        assert_eq!(rep.exclusions.len(), 5);
        assert!(run_convergence(
            &[graphs(1, 6, 0)[0].clone(), graphs(1, 7, 0)[0].clone()],
            &[Initializer::Linear],
            2,
            &Default::default()
        )
        .is_err());
    }

    #[test]
    fn aggregation_ignores_graph_order() {
        let gs = graphs(5, 5, 3);
        let mut rev = gs.clone();
        rev.reverse();
        let cfg = OptimizerConfig::default();
        let a = run_convergence(&gs, &[Initializer::Linear], 1, &cfg).unwrap();
        let b = run_convergence(&rev, &[Initializer::Linear], 1, &cfg).unwrap();
        assert_eq!(a.results, b.results);
    }

    #[test]
    fn size_sweep_requires_a_model_per_size() {
        let mut setups = BTreeMap::new();
        let model = Arc::new(MlpModel::zeros(15, 4, 2));
        setups.insert(
            6,
            SizeSetup {
                graphs: graphs(4, 6, 4),
                methods: vec![Initializer::Linear, Initializer::Neural(model)],
            },
        );
        setups.insert(
            8,
            SizeSetup {
                graphs: graphs(4, 8, 4),
                methods: vec![Initializer::Linear],
            },
        );
        match run_size_sweep(&[6, 8], &setups, 2) {
            Err(Error::MissingArtifact { size, .. }) => assert_eq!(size, 8),
            other => panic!("expected missing artifact, got {other:?}"),
        }
        let res = run_size_sweep(&[6], &setups, 2).unwrap();
        assert_eq!(res.rows.len(), 2);
        assert!(res
            .rows
            .iter()
            .all(|r| (0.0..=1.0).contains(&r.mean_ar) && r.count == 4));
        // zero network predicts all-zero angles: the uniform state, ratio |E| / (2 c_max)
        let nn = res.get(InitMethod::NeuralNet, 6).unwrap();
        let expect: Vec<f64> = setups[&6]
            .graphs
            .iter()
            .map(|g| g.num_edges() as f64 / 2.0 / g.c_max().unwrap() as f64)
            .collect();
        assert!((nn.mean_ar - mean_sem(&expect).0).abs() < 1e-12);
        assert_eq!(run_size_sweep(&[6], &setups, 2).unwrap(), res);
    }

    #[test]
    fn personalization_rows_and_fixed_baselines() {
        let gs = graphs(3, 6, 5);
        let mut rng = crate::seed::stream(1, "model", 0);
        let model = Arc::new(MlpModel::init_uniform(6, 2, 8, Ensemble::RandomEr, &mut rng));
        let avg = FixedInit {
            params: QaoaParams::new(vec![0.3, 0.2], vec![0.4, 0.7]).unwrap(),
            method: InitMethod::Average,
            provenance: String::new(),
        };
        let methods = [Initializer::Neural(model), Initializer::Linear, Initializer::Fixed(avg)];
        let t = dump_personalization(&gs, &methods, 2, &Default::default()).unwrap();
        assert_eq!(t.rows.len(), 3 * 4 * 2);
        assert_eq!(t.methods(), ["nn", OPTIMIZED, "linear", "average"]);
        for m in ["linear", "average"] {
            let rows: Vec<(usize, f64, f64)> = t
                .rows
                .iter()
                .filter(|r| r.method == m)
                .map(|r| (r.layer, r.beta, r.gamma))
                .collect();
            assert_eq!(rows[0..2], rows[2..4]);
            assert_eq!(rows[0..2], rows[4..6]);
        }
        let nn: Vec<f64> = t.rows.iter().filter(|r| r.method == "nn").map(|r| r.beta).collect();
        assert_ne!(nn[0..2], nn[2..4]);
        assert!(t.deviation_from_optimized("linear").unwrap() >= 0.0);
        assert!(dump_personalization(&gs, &methods[1..], 2, &Default::default()).is_err());
    }

    #[test]
    fn outputs_are_byte_reproducible() {
        let gs = graphs(4, 5, 6);
        let rep = run_convergence(&gs, &[Initializer::Linear], 1, &Default::default()).unwrap();
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let fa = write_convergence(a.path(), &rep).unwrap();
        let rep2 = run_convergence(&gs, &[Initializer::Linear], 1, &Default::default()).unwrap();
        let fb = write_convergence(b.path(), &rep2).unwrap();
        for (x, y) in fa.iter().zip(&fb) {
            assert_eq!(std::fs::read(x).unwrap(), std::fs::read(y).unwrap());
        }
        let text = std::fs::read_to_string(&fa[0]).unwrap();
        assert!(text.starts_with("method,iteration,mean_ar,sem,count,n,p,ensemble\n"));
    }

    proptest! {
        #[test]
        fn mean_sem_is_order_free(mut v in prop::collection::vec(0.0f64..1.0, 1..40), seed in any::<u64>()) {
            let before = mean_sem(&v);
            use rand::seq::SliceRandom;
            v.shuffle(&mut crate::seed::stream(seed, "shuffle", 0));
            prop_assert_eq!(before, mean_sem(&v));
            prop_assert!(before.1 >= 0.0);
        }
    }
}
