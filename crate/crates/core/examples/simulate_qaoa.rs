//! Statevector simulation: expectation, adjoint gradient and the most likely cuts.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_8};

use qaoa_warmstart::graph::Graph;
use qaoa_warmstart::simulator::{approximation_ratio, QaoaCircuit, QaoaParams};

fn main() -> qaoa_warmstart::Result<()> {
    // single edge: F = 1/2 + 1/2 sin(4 beta) sin(gamma), maximal at (pi/8, pi/2)
    let edge = QaoaCircuit::new(&Graph::from_edges(2, [(0, 1)])?)?;
    let top = QaoaParams::new(vec![FRAC_PI_8], vec![FRAC_PI_2])?;
    println!("single edge at (pi/8, pi/2): F = {:.12}", edge.expectation(&top));

    let g = Graph::cycle(6)?;
    let circuit = QaoaCircuit::new(&g)?;
    let params = QaoaParams::new(vec![0.55, 0.30], vec![0.40, 0.75])?;
    let (f, grad) = circuit.value_and_gradient(&params);
    println!("C6, p=2: F = {f:.6}, ratio = {:.6}", approximation_ratio(f, 6)?);
    println!("gradient [dbeta.., dgamma..] = {grad:.6?}");

    let state = circuit.evolve(&params);
    let mut probs: Vec<(usize, f64)> = state.amplitudes().iter().map(|a| a.norm_sqr()).enumerate().collect();
    probs.sort_by(|a, b| b.1.total_cmp(&a.1));
    for (z, pr) in probs.iter().take(4) {
        // bit i of z is the side of node i
        println!("  z={z:06b} cut={} prob={pr:.4}", circuit.table().values()[*z]);
    }
    Ok(())
}
