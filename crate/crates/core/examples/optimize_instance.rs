//! BFGS from a TQA start on one random graph, printing the ascent trace.

use qaoa_warmstart::graph::{gen_er_random, max_cut_bruteforce};
use qaoa_warmstart::initializers::{best_tqa_dt, default_dt_grid, tqa_init};
use qaoa_warmstart::optimizer::{optimize_circuit, OptimizerConfig};
use qaoa_warmstart::simulator::QaoaCircuit;

fn main() -> qaoa_warmstart::Result<()> {
    let p = 3;
    let g = gen_er_random(10, 0.3, 0.9, 42)?;
    let c_max = max_cut_bruteforce(&g)?.c_max;
    let circuit = QaoaCircuit::new(&g)?;
    let (dt, _) = best_tqa_dt(&circuit, p, &default_dt_grid())?;
    let start = tqa_init(p, dt);
    println!("n={} |E|={} c_max={c_max}, start TQA dt={dt:.1}", g.n(), g.num_edges());

    let (params, trace) = optimize_circuit(&circuit, c_max, &start, &OptimizerConfig::default())?;
    for (k, e) in trace.iterates.iter().enumerate() {
        println!(
            "  iter {k:>2}: F={:.6} ratio={:.6}",
            e.cost,
            e.approx_ratio.unwrap_or(f64::NAN)
        );
    }
    println!(
        "{:?} after {} iterations, {} cost / {} gradient evaluations",
        trace.termination,
        trace.iterations(),
        trace.cost_evaluations,
        trace.gradient_evaluations
    );
    println!("beta  = {:.4?}\ngamma = {:.4?}", params.beta, params.gamma);
    Ok(())
}
