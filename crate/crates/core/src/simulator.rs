//! Exact statevector simulation of the p-layer QAOA ansatz for MaxCut.
//!
//! Basis index `z` encodes node `q` in bit `q` (little-endian). The cost
//! unitary is a diagonal phase taken from a precomputed [`CostTable`], and the
//! mixer is a product of single-qubit `exp(-i beta X)` rotations.
//!
//! Layer `l` applies `cost(gamma_l)` then `mixer(beta_l)`, starting from
//! `|+>^n`, with `l = 1` first.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, MAX_NODES};

/// Variational angles: `beta` drives the mixer, `gamma` the cost layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaoaParams {
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
}

impl QaoaParams {
    pub fn new(beta: Vec<f64>, gamma: Vec<f64>) -> Result<Self> {
        if beta.is_empty() || beta.len() != gamma.len() {
            return Err(Error::InvalidArgument(format!(
                "beta and gamma must have equal non-zero length, got {} and {}",
                beta.len(),
                gamma.len()
            )));
        }
        if beta.iter().chain(&gamma).any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("non-finite QAOA angle".into()));
        }
        Ok(QaoaParams { beta, gamma })
    }

    pub fn zeros(p: usize) -> Self {
        QaoaParams {
            beta: vec![0.0; p],
            gamma: vec![0.0; p],
        }
    }

    pub fn p(&self) -> usize {
        self.beta.len()
    }

    /// Flat layout `[beta_1..beta_p, gamma_1..gamma_p]`, shared with gradients
    /// and the predictor's output layer.
    pub fn to_vec(&self) -> Vec<f64> {
        self.beta.iter().chain(&self.gamma).copied().collect()
    }

    pub fn from_slice(x: &[f64]) -> Result<Self> {
        if x.is_empty() || !x.len().is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "flat parameter vector must have even non-zero length, got {}",
                x.len()
            )));
        }
        let p = x.len() / 2;
        Self::new(x[..p].to_vec(), x[p..].to_vec())
    }
}

/// Diagonal of the MaxCut Hamiltonian: `values[z]` is the cut size of basis state `z`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostTable {
    n: usize,
    values: Vec<u32>,
    max_value: u32,
}

impl CostTable {
    pub fn new(g: &Graph) -> Result<Self> {
        let n = g.n();
        check_qubits(n)?;
        let adj = g.adjacency_masks();
        let len = 1usize << n;
        let mut values = vec![0u32; len];
        // Setting the lowest set bit k of z, starting from z with that bit
        // cleared, cuts edges to k's 0-side neighbours and uncuts the 1-side ones.
        for z in 1..len {
            let k = z.trailing_zeros() as usize;
            let rest = z & (z - 1);
            let ones = (adj[k] & rest as u64).count_ones();
            let deg = adj[k].count_ones();
            values[z] = (values[rest] as i64 + deg as i64 - 2 * ones as i64) as u32;
        }
        let max_value = values.iter().copied().max().unwrap_or(0);
        Ok(CostTable { n, values, max_value })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[u32] {
        &self.values
    }

    /// Largest entry, i.e. the maximum cut.
    pub fn max_value(&self) -> u32 {
        self.max_value
    }

    /// `exp(-i gamma c)` for every distinct cut value `c`.
    fn phases(&self, gamma: f64) -> Vec<Complex64> {
        (0..=self.max_value)
            .map(|c| Complex64::from_polar(1.0, -gamma * c as f64))
            .collect()
    }
}

fn check_qubits(n: usize) -> Result<()> {
    if (1..=MAX_NODES).contains(&n) {
        Ok(())
    } else {
        Err(Error::Capacity {
            what: "qubit count",
            n,
            max: MAX_NODES,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    pub fn from_amplitudes(n: usize, amps: Vec<Complex64>) -> Result<Self> {
        check_qubits(n)?;
        if amps.len() != 1 << n {
            return Err(Error::DimensionMismatch {
                what: "state vector",
                expected: 1 << n,
                found: amps.len(),
            });
        }
        let s = StateVector { n, amps };
        let norm = s.norm_sqr();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!("state has squared norm {norm}")));
        }
        Ok(s)
    }

    /// Computational basis state `|z>`.
    pub fn basis(n: usize, z: usize) -> Result<Self> {
        check_qubits(n)?;
        if z >= 1 << n {
            return Err(Error::InvalidArgument(format!("basis index {z} out of range")));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n];
        amps[z] = Complex64::new(1.0, 0.0);
        Ok(StateVector { n, amps })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// `<psi| H_C |psi>` for the given cost diagonal.
    pub fn expectation(&self, table: &CostTable) -> Result<f64> {
        check_table(self, table)?;
        Ok(self
            .amps
            .iter()
            .zip(&table.values)
            .map(|(a, &c)| a.norm_sqr() * c as f64)
            .sum())
    }

    fn apply_phases(&mut self, table: &CostTable, gamma: f64) {
        let phases = table.phases(gamma);
        for (a, &c) in self.amps.iter_mut().zip(&table.values) {
            *a *= phases[c as usize];
        }
    }

    fn apply_rx_all(&mut self, beta: f64) {
        let (s, c) = beta.sin_cos();
        let cos = Complex64::new(c, 0.0);
        let misin = Complex64::new(0.0, -s);
        for q in 0..self.n {
            let stride = 1usize << q;
            for block in (0..self.amps.len()).step_by(stride << 1) {
                for i in block..block + stride {
                    let a0 = self.amps[i];
                    let a1 = self.amps[i + stride];
                    self.amps[i] = cos * a0 + misin * a1;
                    self.amps[i + stride] = misin * a0 + cos * a1;
                }
            }
        }
    }
}

fn check_table(state: &StateVector, table: &CostTable) -> Result<()> {
    if table.values.len() != state.amps.len() {
        return Err(Error::DimensionMismatch {
            what: "cost table",
            expected: state.amps.len(),
            found: table.values.len(),
        });
    }
    Ok(())
}

pub fn prepare_plus_state(n: usize) -> Result<StateVector> {
    check_qubits(n)?;
    let amp = Complex64::new((0.5f64).powf(n as f64 / 2.0), 0.0);
    Ok(StateVector {
        n,
        amps: vec![amp; 1 << n],
    })
}

/// Multiplies amplitude `z` by `exp(-i gamma table[z])`.
pub fn apply_cost_layer(mut state: StateVector, table: &CostTable, gamma: f64) -> Result<StateVector> {
    check_table(&state, table)?;
    state.apply_phases(table, gamma);
    Ok(state)
}

/// Applies `exp(-i beta X)` to every qubit.
pub fn apply_mixer_layer(mut state: StateVector, beta: f64) -> StateVector {
    state.apply_rx_all(beta);
    state
}

/// A graph's cost diagonal bundled with the circuit routines, so repeated
/// evaluations (optimizer loops, grid scans) reuse the table.
#[derive(Debug, Clone)]
pub struct QaoaCircuit {
    table: CostTable,
}

impl QaoaCircuit {
    pub fn new(g: &Graph) -> Result<Self> {
        Ok(QaoaCircuit {
            table: CostTable::new(g)?,
        })
    }

    pub fn table(&self) -> &CostTable {
        &self.table
    }

    pub fn n(&self) -> usize {
        self.table.n
    }

    pub fn evolve(&self, params: &QaoaParams) -> StateVector {
        let mut state = prepare_plus_state(self.table.n).expect("qubit count checked at construction");
        for (&beta, &gamma) in params.beta.iter().zip(&params.gamma) {
            state.apply_phases(&self.table, gamma);
            state.apply_rx_all(beta);
        }
        state
    }

    pub fn expectation(&self, params: &QaoaParams) -> f64 {
        self.evolve(params)
            .expectation(&self.table)
            .expect("table matches state")
    }

    /// Cost expectation and its gradient `[dF/dbeta.., dF/dgamma..]` from one
    /// forward pass and one reverse (adjoint) sweep.
    pub fn value_and_gradient(&self, params: &QaoaParams) -> (f64, Vec<f64>) {
        let p = params.p();
        let mut psi = self.evolve(params);
        let values = &self.table.values;
        let mut lambda = StateVector {
            n: psi.n,
            amps: psi.amps.iter().zip(values).map(|(a, &c)| a * c as f64).collect(),
        };
        let value: f64 = psi.amps.iter().zip(&lambda.amps).map(|(a, l)| (a.conj() * l).re).sum();

        let mut grad = vec![0.0; 2 * p];
        let mut scratch = vec![Complex64::new(0.0, 0.0); psi.amps.len()];
        for l in (0..p).rev() {
            // dF/dbeta_l = 2 Im <lambda| H_M |psi>, both taken right after mixer l
            mixer_hamiltonian(&psi, &mut scratch);
            grad[l] = 2.0 * inner(&lambda.amps, &scratch).im;
            psi.apply_rx_all(-params.beta[l]);
            lambda.apply_rx_all(-params.beta[l]);

            // dF/dgamma_l = 2 Im <lambda| H_C |psi>, right after cost layer l
            let z: Complex64 = lambda
                .amps
                .iter()
                .zip(&psi.amps)
                .zip(values)
                .map(|((l, a), &c)| l.conj() * a * c as f64)
                .sum();
            grad[p + l] = 2.0 * z.im;
            psi.apply_phases(&self.table, -params.gamma[l]);
            lambda.apply_phases(&self.table, -params.gamma[l]);
        }
        (value, grad)
    }

    pub fn gradient(&self, params: &QaoaParams) -> Vec<f64> {
        self.value_and_gradient(params).1
    }
}

/// `out = (sum_q X_q) psi`.
fn mixer_hamiltonian(psi: &StateVector, out: &mut [Complex64]) {
    for (z, o) in out.iter_mut().enumerate() {
        *o = (0..psi.n).map(|q| psi.amps[z ^ (1 << q)]).sum();
    }
}

fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn evolve(g: &Graph, params: &QaoaParams) -> Result<StateVector> {
    Ok(QaoaCircuit::new(g)?.evolve(params))
}

pub fn cost_expectation(g: &Graph, params: &QaoaParams) -> Result<f64> {
    Ok(QaoaCircuit::new(g)?.expectation(params))
}

pub fn cost_gradient(g: &Graph, params: &QaoaParams) -> Result<Vec<f64>> {
    Ok(QaoaCircuit::new(g)?.gradient(params))
}

/// `f / c_max`. Edgeless graphs (`c_max == 0`) have no defined ratio.
pub fn approximation_ratio(f: f64, c_max: usize) -> Result<f64> {
    if c_max == 0 {
        return Err(Error::UndefinedRatio {
            graph_id: String::new(),
        });
    }
    Ok(f / c_max as f64)
}
