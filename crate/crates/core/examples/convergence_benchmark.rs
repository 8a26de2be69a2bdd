//! Fit every initializer on one setting and compare optimizer convergence from each start.
//!
//! `cargo run --release --example convergence_benchmark -- [OUT_DIR]`

use std::path::PathBuf;

use qaoa_warmstart::bench::{run_convergence, write_convergence, MethodSuite, SuiteConfig};
use qaoa_warmstart::initializers::InitMethod;
use qaoa_warmstart::neuralnet::TrainConfig;
use qaoa_warmstart::optimizer::OptimizerConfig;
use qaoa_warmstart::pipeline::{build_dataset, sample_graphs, DatasetConfig, EnsembleSpec};

const METHODS: [InitMethod; 5] = [
    InitMethod::Linear,
    InitMethod::Tqa,
    InitMethod::Batches,
    InitMethod::Average,
    InitMethod::NeuralNet,
];

fn main() -> qaoa_warmstart::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("qaoa-ws-examples/convergence"));
    let (n, p, seed) = (8, 2, 3);
    let ensemble = EnsembleSpec::Random {
        prob_lo: 0.3,
        prob_hi: 0.9,
    };
    let data = build_dataset(&DatasetConfig {
        dataset_id: "conv".into(),
        n,
        p,
        ensemble,
        count: 400,
        master_seed: seed,
        ..Default::default()
    })?;
    let cfg = SuiteConfig {
        training: TrainConfig {
            seed,
            ..Default::default()
        },
        ..Default::default()
    };
    let suite = MethodSuite::fit(&data.records, p, &cfg)?;
    println!(
        "dt* = {:.3}, network best epoch {}",
        suite.calibration.dt_star, suite.train_report.best_epoch
    );

    let test = sample_graphs(&ensemble, n, 30, seed, "test", "test")?;
    let report = run_convergence(&test, &suite.initializers(&METHODS)?, p, &OptimizerConfig::default())?;
    println!(
        "{:>8} {:>8} {:>8} {:>8} {:>10}",
        "method", "iter 0", "final", "iters", "to 0.01"
    );
    for r in &report.results {
        println!(
            "{:>8} {:>8.4} {:>8.4} {:>8.2} {:>10.2}",
            r.method.as_str(),
            r.zeroth_mean_ar(),
            r.final_mean_ar,
            r.mean_iterations,
            r.iterations_within(0.01).unwrap_or(f64::NAN)
        );
    }
    for path in write_convergence(&dir, &report)? {
        println!("wrote {}", path.display());
    }
    Ok(())
}
