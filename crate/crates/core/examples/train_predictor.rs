//! Train the angle predictor on a small corpus, save it, reload it and predict.
//!
//! `cargo run --example train_predictor -- [OUT_DIR]`

use std::path::PathBuf;

use qaoa_warmstart::initializers::nn_init;
use qaoa_warmstart::neuralnet::{load_model, save_model, train, TrainConfig};
use qaoa_warmstart::pipeline::{build_dataset, sample_graphs, DatasetConfig, EnsembleSpec};
use qaoa_warmstart::simulator::{approximation_ratio, QaoaCircuit};

fn main() -> qaoa_warmstart::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("qaoa-ws-examples/train_predictor"));

    let ensemble = EnsembleSpec::Random {
        prob_lo: 0.3,
        prob_hi: 0.9,
    };
    let data = build_dataset(&DatasetConfig {
        dataset_id: "train".into(),
        n: 8,
        p: 2,
        ensemble,
        count: 300,
        master_seed: 11,
        ..Default::default()
    })?;
    let (model, report) = train(
        &data.records,
        &TrainConfig {
            seed: 11,
            ..Default::default()
        },
    )?;
    println!(
        "trained on {} labels: best epoch {} of {}, validation loss {:.4} (epoch 0: {:.4})",
        data.records.len(),
        report.best_epoch,
        report.stopped_epoch,
        report.validation_loss[report.best_epoch],
        report.validation_loss[0]
    );

    let path = dir.join("model.json");
    save_model(&model, &path)?;
    let model = load_model(&path)?;
    println!(
        "saved and reloaded {} (checksum {})",
        path.display(),
        &model.checksum()[..16]
    );

    for mut g in sample_graphs(&ensemble, 8, 4, 11, "test", "test")? {
        let c_max = g.ensure_c_max()?;
        let params = nn_init(&model, &g)?;
        let ratio = approximation_ratio(QaoaCircuit::new(&g)?.expectation(&params), c_max)?;
        println!(
            "{} |E|={:>2}: beta={:.3?} gamma={:.3?} ratio {ratio:.4}",
            g.id,
            g.num_edges(),
            params.beta,
            params.gamma
        );
    }
    Ok(())
}
