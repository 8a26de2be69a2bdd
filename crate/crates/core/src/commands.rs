//! Subcommand bodies behind the `qaoa-ws` binary. Each reads its inputs from
//! the resolved [`RunConfig`], records them in the manifest, and writes its
//! artifacts under `cfg.out`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::bench::{
    dump_personalization, run_convergence, run_size_sweep, write_convergence, write_personalization, write_size_sweep,
    SizeSetup,
};
use crate::config::{read_json, write_json, Command, RunConfig, RunManifest};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::initializers::{
    average_init, batches_fit, calibrate_tqa_dt, linear_init, tqa_init, FixedInit, InitMethod, Initializer,
    TqaCalibration,
};
use crate::neuralnet::{load_model, save_model, train};
use crate::pipeline::{
    build_dataset_file, manifest_path, read_dataset, split_dataset_file, DatasetConfig, LabeledInstance,
};

pub const DATASET_FILE: &str = "dataset.jsonl";
pub const TRAIN_FILE: &str = "train.jsonl";
pub const TEST_FILE: &str = "test.jsonl";
pub const MODEL_FILE: &str = "model.json";
pub const TRAIN_REPORT_FILE: &str = "train_report.json";
pub const CALIBRATION_FILE: &str = "calibration.json";
pub const BATCHES_FILE: &str = "batches.json";
pub const AVERAGE_FILE: &str = "average.json";

/// Runs one subcommand, appending consumed inputs and produced outputs to `manifest`.
pub fn run(command: Command, cfg: &RunConfig, manifest: &mut RunManifest) -> Result<()> {
    match command {
        Command::GenData => gen_data(cfg, manifest),
        Command::Split => split(cfg, manifest),
        Command::TrainNn => train_nn(cfg, manifest),
        Command::CalibrateTqa => calibrate(cfg, manifest),
        Command::FitBatches => fit_batches(cfg, manifest),
        Command::FitAverage => fit_average(cfg, manifest),
        Command::BenchConverge => bench_converge(cfg, manifest),
        Command::BenchSize => bench_size(cfg, manifest),
        Command::DumpPersonalization => personalization(cfg, manifest),
    }
}

fn required<'a>(value: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
    value
        .as_deref()
        .ok_or_else(|| Error::Usage(format!("--{flag} is required")))
}

/// The first `count` records (all of them when `count` is 0).
fn load_records(cfg: &RunConfig, manifest: &mut RunManifest) -> Result<Vec<LabeledInstance>> {
    let path = required(&cfg.dataset, "dataset")?;
    manifest.add_input(path)?;
    let mut records = read_dataset(path)?;
    if records.is_empty() {
        return Err(Error::InvalidDataset(format!("{} holds no records", path.display())));
    }
    if cfg.count > 0 {
        records.truncate(cfg.count);
    }
    if let Some(r) = records.iter().find(|r| r.p != cfg.p) {
        return Err(Error::InvalidDataset(format!(
            "record `{}` has p={}, but --p is {}",
            r.instance_id, r.p, cfg.p
        )));
    }
    Ok(records)
}

fn graphs_of(records: &[LabeledInstance]) -> Vec<Graph> {
    records.iter().map(|r| r.graph.clone()).collect()
}

fn output(cfg: &RunConfig, manifest: &mut RunManifest, name: &str) -> PathBuf {
    let path = cfg.out.join(name);
    manifest.add_output(&path);
    path
}

fn gen_data(cfg: &RunConfig, manifest: &mut RunManifest) -> Result<()> {
    let n = cfg.n.ok_or_else(|| Error::Usage("gen-data requires --n".into()))?;
    let ensemble = cfg.ensemble_spec();
    let dataset = DatasetConfig {
        dataset_id: format!("{}-n{n}-p{}-s{}", ensemble.label(), cfg.p, cfg.seed),
        n,
        p: cfg.p,
        ensemble,
        count: cfg.count,
        master_seed: cfg.seed,
        optimizer: cfg.optimizer.clone(),
        tqa_grid: cfg.tqa_grid.clone(),
    };
    let path = output(cfg, manifest, DATASET_FILE);
    let built = build_dataset_file(&dataset, &path)?;
    manifest.add_output(&manifest_path(&path));
    log::info!(
        "wrote {} records to {} (sha256 {}, {} skipped)",
        built.records,
        path.display(),
        built.sha256,
        built.skipped.len()
    );
    Ok(())
}

fn split(cfg: &RunConfig, manifest: &mut RunManifest) -> Result<()> {
    let input = required(&cfg.dataset, "dataset")?;
    manifest.add_input(input)?;
    let train = output(cfg, manifest, TRAIN_FILE);
    let test = output(cfg, manifest, TEST_FILE);
    let (a, b) = split_dataset_file(input, cfg.train_fraction, cfg.seed, &train, &test)?;
    log::info!("split into {a} train and {b} test records");
    Ok(())
}

fn train_nn(cfg: &RunConfig, manifest: &mut RunManifest) -> Result<()> {
    let records = load_records(cfg, manifest)?;
    let (model, report) = train(&records, &cfg.train_config())?;
    save_model(&model, &output(cfg, manifest, MODEL_FILE))?;
    write_json(&output(cfg, manifest, TRAIN_REPORT_FILE), &report)?;
    log::info!(
        "trained on {} records: best epoch {}, validation loss {:.6}",
        records.len(),
        report.best_epoch,
        report.validation_loss[report.best_epoch]
    );
    Ok(())
}

fn calibrate(cfg: &RunConfig, manifest: &mut RunManifest) -> Result<()> {
    let records = load_records(cfg, manifest)?;
    let cal = calibrate_tqa_dt(&graphs_of(&records), cfg.p, &cfg.tqa_grid)?;
    write_json(&output(cfg, manifest, CALIBRATION_FILE), &cal)?;
    log::info!("dt* = {} over {} graphs", cal.dt_star, cal.per_graph_best.len());
    Ok(())
}

fn fit_batches(cfg: &RunConfig, manifest: &mut RunManifest) -> Result<()> {
    let records = load_records(cfg, manifest)?;
    let start = match &cfg.calibration {
        Some(path) => {
            manifest.add_input(path)?;
            tqa_init(cfg.p, read_json::<TqaCalibration>(path)?.dt_star)
        }
        None => linear_init(cfg.p),
    };
    let fit = batches_fit(&graphs_of(&records), cfg.p, &cfg.optimizer, &start)?;
    write_json(&output(cfg, manifest, BATCHES_FILE), &fit)?;
    log::info!("{}", fit.provenance);
    Ok(())
}

fn fit_average(cfg: &RunConfig, manifest: &mut RunManifest) -> Result<()> {
    let records = load_records(cfg, manifest)?;
    let fit = average_init(&records)?;
    write_json(&output(cfg, manifest, AVERAGE_FILE), &fit)?;
    log::info!("{}", fit.provenance);
    Ok(())
}

/// Where each method's artifact comes from.
struct Artifacts {
    size: usize,
    model: Option<PathBuf>,
    calibration: Option<PathBuf>,
    batches: Option<PathBuf>,
    average: Option<PathBuf>,
}

impl Artifacts {
    fn from_flags(cfg: &RunConfig, size: usize) -> Self {
        Artifacts {
            size,
            model: cfg.model.clone(),
            calibration: cfg.calibration.clone(),
            batches: cfg.batches.clone(),
            average: cfg.average.clone(),
        }
    }

    /// Files from a per-size setup directory; absent files stay `None`.
    fn from_dir(dir: &Path, size: usize) -> Self {
        let file = |name: &str| Some(dir.join(name)).filter(|p| p.exists());
        Artifacts {
            size,
            model: file(MODEL_FILE),
            calibration: file(CALIBRATION_FILE),
            batches: file(BATCHES_FILE),
            average: file(AVERAGE_FILE),
        }
    }

    fn need<'a>(&self, path: &'a Option<PathBuf>, what: &str) -> Result<&'a Path> {
        path.as_deref().ok_or_else(|| Error::MissingArtifact {
            size: self.size,
            what: what.into(),
        })
    }

    fn fixed(path: &Path, method: InitMethod) -> Result<Initializer> {
        let fit: FixedInit = read_json(path)?;
        if fit.method != method {
            return Err(Error::InvalidArgument(format!(
                "{} holds a `{}` parameter set, expected `{method}`",
                path.display(),
                fit.method
            )));
        }
        Ok(Initializer::Fixed(fit))
    }

    fn initializers(&self, methods: &[InitMethod], manifest: &mut RunManifest) -> Result<Vec<Initializer>> {
        let mut out = Vec::new();
        for &m in methods {
            let init = match m {
                InitMethod::Linear => Initializer::Linear,
                InitMethod::Tqa => {
                    let path = self.need(&self.calibration, "TQA calibration")?;
                    manifest.add_input(path)?;
                    Initializer::Tqa {
                        dt: read_json::<TqaCalibration>(path)?.dt_star,
                    }
                }
                InitMethod::Batches | InitMethod::Average => {
                    let (path, what) = if m == InitMethod::Batches {
                        (&self.batches, "batches parameter set")
                    } else {
                        (&self.average, "average parameter set")
                    };
                    let path = self.need(path, what)?;
                    manifest.add_input(path)?;
                    Self::fixed(path, m)?
                }
                InitMethod::NeuralNet => {
                    let path = self.need(&self.model, "trained model")?;
                    manifest.add_input(path)?;
                    Initializer::Neural(Arc::new(load_model(path)?))
                }
                InitMethod::FullTqa | InitMethod::Custom => {
                    return Err(Error::Usage(format!(
                        "`{m}` cannot be benchmarked from the command line"
                    )))
                }
            };
            out.push(init);
        }
        Ok(out)
    }
}

fn bench_converge(cfg: &RunConfig, manifest: &mut RunManifest) -> Result<()> {
    let records = load_records(cfg, manifest)?;
    let n = records[0].graph.n();
    let methods = Artifacts::from_flags(cfg, n).initializers(&cfg.methods, manifest)?;
    let report = run_convergence(&graphs_of(&records), &methods, cfg.p, &cfg.optimizer)?;
    for r in &report.results {
        log::info!(
            "{:>8}: iteration-0 AR {:.4}, final AR {:.4}, {:.1} iterations",
            r.method.as_str(),
            r.zeroth_mean_ar(),
            r.final_mean_ar,
            r.mean_iterations
        );
    }
    for e in &report.exclusions {
        log::warn!("excluded {} on `{}`: {}", e.method, e.graph_id, e.reason);
    }
    for path in write_convergence(&cfg.out, &report)? {
        manifest.add_output(&path);
    }
    Ok(())
}

/// Setup directory layout: `<setup_dir>/n<N>/{test.jsonl, model.json, calibration.json, batches.json, average.json}`.
pub fn size_dir(setup_dir: &Path, n: usize) -> PathBuf {
    setup_dir.join(format!("n{n}"))
}

fn bench_size(cfg: &RunConfig, manifest: &mut RunManifest) -> Result<()> {
    let root = required(&cfg.setup_dir, "setup-dir")?;
    let mut setups = BTreeMap::new();
    for &n in &cfg.sizes {
        let dir = size_dir(root, n);
        let art = Artifacts::from_dir(&dir, n);
        art.need(&art.model, "trained model")?;
        let test = dir.join(TEST_FILE);
        if !test.exists() {
            return Err(Error::MissingArtifact {
                size: n,
                what: "test set".into(),
            });
        }
        manifest.add_input(&test)?;
        let mut records = read_dataset(&test)?;
        if cfg.count > 0 {
            records.truncate(cfg.count);
        }
        let methods = art.initializers(&cfg.methods, manifest)?;
        setups.insert(
            n,
            SizeSetup {
                graphs: graphs_of(&records),
                methods,
            },
        );
    }
    let result = run_size_sweep(&cfg.sizes, &setups, cfg.p)?;
    for path in write_size_sweep(&cfg.out, &result)? {
        manifest.add_output(&path);
    }
    Ok(())
}

fn personalization(cfg: &RunConfig, manifest: &mut RunManifest) -> Result<()> {
    let records = load_records(cfg, manifest)?;
    let n = records[0].graph.n();
    let methods = Artifacts::from_flags(cfg, n).initializers(&cfg.methods, manifest)?;
    let table = dump_personalization(&graphs_of(&records), &methods, cfg.p, &cfg.optimizer)?;
    for m in table.methods() {
        if let Some(dev) = table.deviation_from_optimized(&m) {
            log::info!("{m:>9}: mean |deviation from optimized| {dev:.4}");
        }
    }
    for path in write_personalization(&cfg.out, &table)? {
        manifest.add_output(&path);
    }
    Ok(())
}
