//! Shared TQA time step from a set of training graphs, and the fixed baselines built on it.

use std::collections::BTreeMap;

use qaoa_warmstart::initializers::{
    batch_mean_ratio, batches_fit, calibrate_tqa_dt, default_dt_grid, linear_init, tqa_init,
};
use qaoa_warmstart::optimizer::OptimizerConfig;
use qaoa_warmstart::pipeline::{sample_graphs, EnsembleSpec};

fn main() -> qaoa_warmstart::Result<()> {
    let p = 2;
    let ensemble = EnsembleSpec::Random {
        prob_lo: 0.3,
        prob_hi: 0.9,
    };
    let train = sample_graphs(&ensemble, 8, 40, 5, "train", "train")?;
    let test = sample_graphs(&ensemble, 8, 20, 5, "test", "test")?;

    let cal = calibrate_tqa_dt(&train, p, &default_dt_grid())?;
    let mut hist: BTreeMap<String, usize> = BTreeMap::new();
    for b in &cal.per_graph_best {
        *hist.entry(format!("{:.1}", b.dt)).or_default() += 1;
    }
    println!("per-graph best dt: {hist:?}");
    println!("dt* = {:.3}", cal.dt_star);

    let tqa = tqa_init(p, cal.dt_star);
    let batches = batches_fit(&train, p, &OptimizerConfig::default(), &tqa)?;
    for (name, params) in [("linear", linear_init(p)), ("tqa", tqa), ("batches", batches.params)] {
        println!(
            "{name:>8}: beta={:.3?} gamma={:.3?} test mean ratio {:.4}",
            params.beta,
            params.gamma,
            batch_mean_ratio(&test, &params)?
        );
    }
    Ok(())
}
