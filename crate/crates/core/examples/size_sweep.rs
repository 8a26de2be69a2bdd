//! Iteration-zero approximation ratio of every initializer across graph sizes.
//!
//! `cargo run --release --example size_sweep -- [OUT_DIR]`

use std::collections::BTreeMap;
use std::path::PathBuf;

use qaoa_warmstart::bench::{run_size_sweep, write_size_sweep, MethodSuite, SizeSetup, SuiteConfig};
use qaoa_warmstart::initializers::InitMethod;
use qaoa_warmstart::neuralnet::TrainConfig;
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
        .unwrap_or_else(|| std::env::temp_dir().join("qaoa-ws-examples/size_sweep"));
    let (p, sizes) = (2, [5usize, 6, 7, 8]);
    let ensemble = EnsembleSpec::Random {
        prob_lo: 0.3,
        prob_hi: 0.9,
    };

    // one model and one set of fixed baselines per size
    let mut setups = BTreeMap::new();
    for n in sizes {
        let seed = 100 + n as u64;
        let data = build_dataset(&DatasetConfig {
            dataset_id: format!("n{n}"),
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
        setups.insert(
            n,
            SizeSetup {
                graphs: sample_graphs(&ensemble, n, 40, seed, "test", "test")?,
                methods: suite.initializers(&METHODS)?,
            },
        );
    }

    let result = run_size_sweep(&sizes, &setups, p)?;
    print!("{:>8}", "method");
    for n in sizes {
        print!(" {:>8}", format!("n={n}"));
    }
    println!();
    for m in METHODS {
        print!("{:>8}", m.as_str());
        for n in sizes {
            print!(" {:>8.4}", result.get(m, n).map_or(f64::NAN, |r| r.mean_ar));
        }
        println!();
    }
    for path in write_size_sweep(&dir, &result)? {
        println!("wrote {}", path.display());
    }
    Ok(())
}
