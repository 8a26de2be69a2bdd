//! Exact maximum cut of a few small graphs by enumeration.

use qaoa_warmstart::graph::{cut_value, gen_er_random, max_cut_bruteforce, Graph};

fn main() -> qaoa_warmstart::Result<()> {
    let graphs = [
        Graph::cycle(5)?.with_id("C5"),
        Graph::complete(6)?.with_id("K6"),
        gen_er_random(10, 0.3, 0.9, 7)?.with_id("er10"),
    ];
    for g in &graphs {
        let cut = max_cut_bruteforce(g)?;
        let side: String = cut.witness.iter().map(|&s| if s { '1' } else { '0' }).collect();
        println!(
            "{:>5}: n={} |E|={} c_max={} witness={side} (check {})",
            g.id,
            g.n(),
            g.num_edges(),
            cut.c_max,
            cut_value(&cut.witness, g)?
        );
    }
    Ok(())
}
