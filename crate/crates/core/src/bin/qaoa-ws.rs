use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

use qaoa_warmstart::commands;
use qaoa_warmstart::config::{resolve_config, write_manifest, Command, RunManifest, SEED_ENV};
use qaoa_warmstart::InitMethod;

#[derive(Parser)]
#[command(
    name = "qaoa-ws",
    version,
    about = "Warm-start QAOA on MaxCut: datasets, baselines, training and benchmarks"
)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Sample graphs and label them with optimized angles
    GenData(Flags),
    /// Seeded train/test split of a dataset
    Split(Flags),
    /// Train the angle predictor on a dataset
    TrainNn(Flags),
    /// Average the best TQA time step over dataset graphs
    CalibrateTqa(Flags),
    /// Optimize one shared parameter vector over dataset graphs
    FitBatches(Flags),
    /// Average the optimized labels of a dataset
    FitAverage(Flags),
    /// Approximation ratio per optimizer iteration for each method
    BenchConverge(Flags),
    /// Iteration-zero approximation ratio across graph sizes
    BenchSize(Flags),
    /// Per-graph parameters of each method next to the optimized ones
    DumpPersonalization(Flags),
}

#[derive(Clone, Copy, ValueEnum)]
enum EnsembleArg {
    Constant,
    Random,
}

#[derive(Args)]
struct Flags {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    p: Option<usize>,
    #[arg(long, value_enum)]
    ensemble: Option<EnsembleArg>,
    #[arg(long)]
    edge_prob: Option<f64>,
    #[arg(long, num_args = 2, value_names = ["LO", "HI"])]
    prob_range: Option<Vec<f64>>,
    #[arg(long)]
    count: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    calibration: Option<PathBuf>,
    #[arg(long)]
    batches: Option<PathBuf>,
    #[arg(long)]
    average: Option<PathBuf>,
    /// Directory with one `n<N>/` subdirectory of artifacts per size
    #[arg(long)]
    setup_dir: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated: linear,tqa,batches,average,nn
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<InitMethod>>,
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
    #[arg(long)]
    train_fraction: Option<f64>,
    /// Flat JSON file of settings; flags take precedence
    #[arg(long)]
    config: Option<PathBuf>,
}

impl Flags {
    fn to_map(&self) -> Map<String, Value> {
        let mut m = Map::new();
        let mut put = |k: &str, v: Option<Value>| {
            if let Some(v) = v {
                m.insert(k.into(), v);
            }
        };
        put("n", self.n.map(Value::from));
        put("p", self.p.map(Value::from));
        put(
            "ensemble",
            self.ensemble.map(|e| match e {
                EnsembleArg::Constant => json!("constant"),
                EnsembleArg::Random => json!("random"),
            }),
        );
        put("edge_prob", self.edge_prob.map(Value::from));
        put("prob_range", self.prob_range.as_ref().map(|v| json!(v)));
        put("count", self.count.map(Value::from));
        put("seed", self.seed.map(Value::from));
        for (k, v) in [
            ("dataset", &self.dataset),
            ("model", &self.model),
            ("calibration", &self.calibration),
            ("batches", &self.batches),
            ("average", &self.average),
            ("setup_dir", &self.setup_dir),
            ("out", &self.out),
        ] {
            put(k, v.as_ref().map(|p| json!(p)));
        }
        put("methods", self.methods.as_ref().map(|v| json!(v)));
        put("sizes", self.sizes.as_ref().map(|v| json!(v)));
        put("train_fraction", self.train_fraction.map(Value::from));
        m
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let (command, flags) = match &cli.command {
        Sub::GenData(f) => (Command::GenData, f),
        Sub::Split(f) => (Command::Split, f),
        Sub::TrainNn(f) => (Command::TrainNn, f),
        Sub::CalibrateTqa(f) => (Command::CalibrateTqa, f),
        Sub::FitBatches(f) => (Command::FitBatches, f),
        Sub::FitAverage(f) => (Command::FitAverage, f),
        Sub::BenchConverge(f) => (Command::BenchConverge, f),
        Sub::BenchSize(f) => (Command::BenchSize, f),
        Sub::DumpPersonalization(f) => (Command::DumpPersonalization, f),
    };
    let env_seed = std::env::var(SEED_ENV).ok();
    let cfg = match resolve_config(command, &flags.to_map(), flags.config.as_deref(), env_seed.as_deref()) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let mut manifest = RunManifest::start(command, std::env::args().collect(), cfg.clone());
    let mut result = match &flags.config {
        Some(path) => manifest.add_input(path),
        None => Ok(()),
    };
    if result.is_ok() {
        result = commands::run(command, &cfg, &mut manifest);
    }
    manifest.finish(&result);
    if let Err(e) = write_manifest(&cfg.out, &manifest) {
        eprintln!("error: could not write run manifest: {e}");
        return ExitCode::FAILURE;
    }
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
