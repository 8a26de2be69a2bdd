mod common;

use common::{grid_scan_p1, max_cut_enumerate, DenseQaoa};
use qaoa_warmstart::graph::{gen_er_random, Graph};
use qaoa_warmstart::initializers::{best_tqa_dt, default_dt_grid, tqa_init};
use qaoa_warmstart::optimizer::{optimize_instance, OptimizerConfig};
use qaoa_warmstart::simulator::{QaoaCircuit, QaoaParams};

#[test]
fn four_cycle_reaches_grid_oracle_maximum() {
    let g = Graph::cycle(4).unwrap();
    let oracle = DenseQaoa::new(4, g.edges());
    let (best, b, c) = grid_scan_p1(&oracle);
    let start = QaoaParams::new(vec![0.3], vec![0.5]).unwrap();
    let rec = optimize_instance(&g, &start, &OptimizerConfig::default()).unwrap();
    assert!(
        (rec.approx_ratio - best / 4.0).abs() < 1e-4,
        "optimizer {} vs grid {} at ({b}, {c})",
        rec.approx_ratio,
        best / 4.0
    );
    // the optimizer's own point, re-evaluated with the general matrix exponential
    assert!((oracle.expectation(&rec.beta, &rec.gamma) - rec.final_cost).abs() < 1e-10);
}

#[test]
fn single_edge_from_tqa_grid_start() {
    let g = Graph::from_edges(2, [(0, 1)]).unwrap();
    let circuit = QaoaCircuit::new(&g).unwrap();
    let (dt, _) = best_tqa_dt(&circuit, 1, &default_dt_grid()).unwrap();
    let rec = optimize_instance(&g, &tqa_init(1, dt), &OptimizerConfig::default()).unwrap();
    assert!((rec.approx_ratio - 1.0).abs() < 1e-8, "{}", rec.approx_ratio);
}

#[test]
fn recorded_c_max_matches_enumeration() {
    for seed in 0..15 {
        let g = gen_er_random(6, 0.3, 0.9, seed).unwrap();
        if g.num_edges() == 0 {
            continue;
        }
        let rec = optimize_instance(&g, &tqa_init(2, 0.8), &OptimizerConfig::default()).unwrap();
        assert_eq!(rec.graph.c_max(), Some(max_cut_enumerate(6, g.edges())));
        assert!(rec.approx_ratio <= 1.0 + 1e-12);
    }
}
