//! Per-graph angles: network prediction and optimized angles next to the fixed baselines.
//!
//! `cargo run --release --example personalization -- [OUT_DIR]`

use std::path::PathBuf;

use qaoa_warmstart::bench::{dump_personalization, write_personalization, MethodSuite, SuiteConfig, OPTIMIZED};
use qaoa_warmstart::initializers::InitMethod;
use qaoa_warmstart::neuralnet::TrainConfig;
use qaoa_warmstart::optimizer::OptimizerConfig;
use qaoa_warmstart::pipeline::{build_dataset, sample_graphs, DatasetConfig, EnsembleSpec};

fn main() -> qaoa_warmstart::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("qaoa-ws-examples/personalization"));
    let (n, p, seed) = (8, 3, 21);
    let ensemble = EnsembleSpec::Random {
        prob_lo: 0.3,
        prob_hi: 0.9,
    };
    let data = build_dataset(&DatasetConfig {
        dataset_id: "pers".into(),
        n,
        p,
        ensemble,
        count: 300,
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
    let methods = suite.initializers(&[
        InitMethod::Linear,
        InitMethod::Tqa,
        InitMethod::Batches,
        InitMethod::Average,
        InitMethod::NeuralNet,
    ])?;

    let graphs = sample_graphs(&ensemble, n, 3, seed, "test", "test")?;
    let table = dump_personalization(&graphs, &methods, p, &OptimizerConfig::default())?;
    for g in &graphs {
        println!("{} (|E|={})", g.id, g.num_edges());
        for m in table.methods() {
            let rows: Vec<_> = table
                .rows
                .iter()
                .filter(|r| r.graph_id == g.id && r.method == m)
                .collect();
            let beta: Vec<f64> = rows.iter().map(|r| r.beta).collect();
            let gamma: Vec<f64> = rows.iter().map(|r| r.gamma).collect();
            println!("  {m:>9}: beta={beta:.3?} gamma={gamma:.3?}");
        }
    }
    for m in table.methods().iter().filter(|m| m.as_str() != OPTIMIZED) {
        println!(
            "mean |{m} - optimized| = {:.4}",
            table.deviation_from_optimized(m).unwrap_or(f64::NAN)
        );
    }
    for path in write_personalization(&dir, &table)? {
        println!("wrote {}", path.display());
    }
    Ok(())
}
