//! MaxCut problem instances: Erdős–Rényi generation, exact cut values and the
//! adjacency encoding fed to the predictor.

use std::collections::BTreeSet;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest node count handled by exhaustive enumeration and the simulator.
pub const MAX_NODES: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ensemble {
    ConstantEr,
    RandomEr,
    Manual,
}

impl fmt::Display for Ensemble {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Ensemble::ConstantEr => "constant_er",
            Ensemble::RandomEr => "random_er",
            Ensemble::Manual => "manual",
        })
    }
}

/// Undirected, unweighted graph. Edges are kept as sorted `(i, j)` pairs with
/// `i < j`, so two graphs with the same edge set serialize identically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGraph")]
pub struct Graph {
    pub id: String,
    n: usize,
    #[serde(rename = "ensemble")]
    ensemble: Ensemble,
    edge_prob: f64,
    edges: Vec<(usize, usize)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    c_max: Option<usize>,
}

#[derive(Deserialize)]
struct RawGraph {
    #[serde(default)]
    id: String,
    n: usize,
    ensemble: Ensemble,
    edge_prob: f64,
    edges: Vec<(usize, usize)>,
    #[serde(default)]
    c_max: Option<usize>,
}

impl TryFrom<RawGraph> for Graph {
    type Error = Error;

    fn try_from(raw: RawGraph) -> Result<Self> {
        let mut g = Graph::from_edges(raw.n, raw.edges)?;
        if !(0.0..=1.0).contains(&raw.edge_prob) {
            return Err(Error::InvalidInstance(format!(
                "edge_prob {} outside [0, 1]",
                raw.edge_prob
            )));
        }
        g.id = raw.id;
        g.ensemble = raw.ensemble;
        g.edge_prob = raw.edge_prob;
        if let Some(c) = raw.c_max {
            if c > g.edges.len() {
                return Err(Error::InvalidInstance(format!(
                    "c_max {c} exceeds edge count {}",
                    g.edges.len()
                )));
            }
        }
        g.c_max = raw.c_max;
        Ok(g)
    }
}

impl Graph {
    /// Builds a manual graph. Pairs are normalized to `i < j` and deduplicated.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidInstance(format!("need at least 2 nodes, got {n}")));
        }
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            if a == b {
                return Err(Error::InvalidInstance(format!("self-loop on node {a}")));
            }
            if a >= n || b >= n {
                return Err(Error::InvalidInstance(format!(
                    "edge ({a}, {b}) has an endpoint outside [0, {n})"
                )));
            }
            set.insert((a.min(b), a.max(b)));
        }
        Ok(Graph {
            id: String::new(),
            n,
            ensemble: Ensemble::Manual,
            edge_prob: 0.0,
            edges: set.into_iter().collect(),
            c_max: None,
        })
    }

    pub fn complete(n: usize) -> Result<Self> {
        Self::from_edges(n, (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))))
    }

    pub fn cycle(n: usize) -> Result<Self> {
        Self::from_edges(n, (0..n).map(|i| (i, (i + 1) % n)))
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edge_prob(&self) -> f64 {
        self.edge_prob
    }

    pub fn ensemble(&self) -> Ensemble {
        self.ensemble
    }

    /// Cached maximum cut, if it has been computed or loaded.
    pub fn c_max(&self) -> Option<usize> {
        self.c_max
    }

    /// Returns the maximum cut, computing and caching it on first use.
    pub fn ensure_c_max(&mut self) -> Result<usize> {
        match self.c_max {
            Some(c) => Ok(c),
            None => {
                let c = max_cut_bruteforce(self)?.c_max;
                self.c_max = Some(c);
                Ok(c)
            }
        }
    }

    pub fn set_c_max(&mut self, c_max: usize) {
        self.c_max = Some(c_max);
    }

    /// Per-node neighbour bitmasks. Callers check `n <= MAX_NODES` first.
    pub(crate) fn adjacency_masks(&self) -> Vec<u64> {
        let mut masks = vec![0u64; self.n];
        for &(i, j) in &self.edges {
            masks[i] |= 1 << j;
            masks[j] |= 1 << i;
        }
        masks
    }

    /// Rebuilds a graph from [`encode_upper_triangle`] output.
    pub fn from_upper_triangle(n: usize, features: &[f64]) -> Result<Self> {
        let expected = n * n.saturating_sub(1) / 2;
        if features.len() != expected {
            return Err(Error::DimensionMismatch {
                what: "upper-triangle encoding",
                expected,
                found: features.len(),
            });
        }
        let pairs = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j)));
        let edges = pairs.zip(features).filter(|(_, &x)| x != 0.0).map(|(e, _)| e);
        Self::from_edges(n, edges)
    }
}

fn sample_edges(n: usize, prob: f64, rng: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen::<f64>() < prob {
                edges.push((i, j));
            }
        }
    }
    edges
}

fn check_prob(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("edge probability {p} outside [0, 1]")))
    }
}

/// G(n, p) with a fixed edge probability shared by every graph in the ensemble.
pub fn gen_er_constant(n: usize, p_edge: f64, seed: u64) -> Result<Graph> {
    if n < 2 {
        return Err(Error::InvalidInstance(format!("need at least 2 nodes, got {n}")));
    }
    check_prob(p_edge)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = Graph::from_edges(n, sample_edges(n, p_edge, &mut rng))?;
    g.ensemble = Ensemble::ConstantEr;
    g.edge_prob = p_edge;
    Ok(g)
}

/// Draws one edge probability `q ~ U[lo, hi]` for the whole graph, then samples G(n, q).
pub fn gen_er_random(n: usize, prob_lo: f64, prob_hi: f64, seed: u64) -> Result<Graph> {
    if n < 2 {
        return Err(Error::InvalidInstance(format!("need at least 2 nodes, got {n}")));
    }
    if !(0.0..=1.0).contains(&prob_lo) || !(0.0..=1.0).contains(&prob_hi) || prob_lo > prob_hi {
        return Err(Error::InvalidRange {
            lo: prob_lo,
            hi: prob_hi,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let q = prob_lo + (prob_hi - prob_lo) * rng.gen::<f64>();
    let mut g = Graph::from_edges(n, sample_edges(n, q, &mut rng))?;
    g.ensemble = Ensemble::RandomEr;
    g.edge_prob = q;
    Ok(g)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CutResult {
    pub c_max: usize,
    /// `witness[i]` is the side of node `i`.
    pub witness: Vec<bool>,
}

/// Number of edges whose endpoints land on different sides.
pub fn cut_value(assignment: &[bool], g: &Graph) -> Result<usize> {
    if assignment.len() != g.n {
        return Err(Error::DimensionMismatch {
            what: "cut assignment",
            expected: g.n,
            found: assignment.len(),
        });
    }
    Ok(g.edges.iter().filter(|&&(i, j)| assignment[i] != assignment[j]).count())
}

/// Exact MaxCut by enumerating the 2^(n-1) partitions with node 0 pinned to
/// side 0. Walks the partitions in Gray-code order so each step flips a single
/// node and updates the cut in O(1).
pub fn max_cut_bruteforce(g: &Graph) -> Result<CutResult> {
    let n = g.n;
    if n > MAX_NODES {
        return Err(Error::Capacity {
            what: "node count",
            n,
            max: MAX_NODES,
        });
    }
    let adj = g.adjacency_masks();
    let mut z: u64 = 0;
    let mut cut: i64 = 0;
    let mut best = 0i64;
    let mut best_z = 0u64;
    let steps: u64 = 1 << (n - 1);
    for k in 1..steps {
        // bit that changes between gray(k-1) and gray(k), shifted past node 0
        let node = k.trailing_zeros() as usize + 1;
        let bit = 1u64 << node;
        let neighbours = adj[node];
        let same = if z & bit == 0 {
            (neighbours & !z).count_ones()
        } else {
            (neighbours & z).count_ones()
        } as i64;
        let other = neighbours.count_ones() as i64 - same;
        cut += same - other;
        z ^= bit;
        if cut > best {
            best = cut;
            best_z = z;
        }
    }
    let witness = (0..n).map(|i| best_z >> i & 1 == 1).collect();
    Ok(CutResult {
        c_max: best as usize,
        witness,
    })
}

/// Row-major upper triangle of the adjacency matrix: `(0,1), (0,2), …, (n-2,n-1)`.
pub fn encode_upper_triangle(g: &Graph) -> Vec<f64> {
    let n = g.n;
    let mut out = vec![0.0; n * (n - 1) / 2];
    for &(i, j) in &g.edges {
        // offset of row i is i*n - i*(i+1)/2
        let idx = i * n - i * (i + 1) / 2 + (j - i - 1);
        out[idx] = 1.0;
    }
    out
}
