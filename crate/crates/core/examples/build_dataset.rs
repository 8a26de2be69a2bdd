//! Labeled dataset generation, JSONL persistence and a seeded train/test split.
//!
//! `cargo run --example build_dataset -- [OUT_DIR]`

use std::path::PathBuf;

use qaoa_warmstart::pipeline::{build_dataset_file, read_dataset, split_dataset_file, DatasetConfig, EnsembleSpec};

fn main() -> qaoa_warmstart::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("qaoa-ws-examples/build_dataset"));

    let cfg = DatasetConfig {
        dataset_id: "demo".into(),
        n: 8,
        p: 2,
        ensemble: EnsembleSpec::Random {
            prob_lo: 0.3,
            prob_hi: 0.9,
        },
        count: 60,
        master_seed: 2024,
        ..Default::default()
    };
    let path = dir.join("dataset.jsonl");
    let manifest = build_dataset_file(&cfg, &path)?;
    println!(
        "{} records -> {} (sha256 {})",
        manifest.records,
        path.display(),
        manifest.sha256
    );

    let records = read_dataset(&path)?;
    let mean = records.iter().map(|r| r.approx_ratio).sum::<f64>() / records.len() as f64;
    let iters = records.iter().map(|r| r.optimizer_iters).sum::<usize>() as f64 / records.len() as f64;
    println!("mean label ratio {mean:.4}, mean BFGS iterations {iters:.1}");
    let r = &records[0];
    println!(
        "first: {} |E|={} beta={:.3?} gamma={:.3?}",
        r.instance_id,
        r.graph.num_edges(),
        r.beta,
        r.gamma
    );

    let (n_train, n_test) = split_dataset_file(&path, 0.8, 2024, &dir.join("train.jsonl"), &dir.join("test.jsonl"))?;
    println!("split: {n_train} train / {n_test} test");
    Ok(())
}
