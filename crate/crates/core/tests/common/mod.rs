//! Dense reference implementations used as independent oracles.
#![allow(dead_code)]

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{Complex, DMatrix, DVector};

pub type C = Complex<f64>;

/// Cut value of every basis state, straight from the edge list.
pub fn cost_diagonal(n: usize, edges: &[(usize, usize)]) -> Vec<f64> {
    (0..1usize << n)
        .map(|z| edges.iter().filter(|&&(i, j)| (z >> i & 1) != (z >> j & 1)).count() as f64)
        .collect()
}

/// Sum of Pauli X over all qubits as a dense matrix.
pub fn mixer_hamiltonian(n: usize) -> DMatrix<C> {
    let dim = 1usize << n;
    let mut h = DMatrix::from_element(dim, dim, C::new(0.0, 0.0));
    for z in 0..dim {
        for q in 0..n {
            h[(z ^ (1 << q), z)] += C::new(1.0, 0.0);
        }
    }
    h
}

/// `exp(-i t H)` via the general matrix exponential.
fn propagator(h: &DMatrix<C>, t: f64) -> DMatrix<C> {
    (h * C::new(0.0, -t)).exp()
}

/// Dense QAOA evolution: `prod_l exp(-i beta_l H_M) exp(-i gamma_l H_C)` applied to |+>^n.
pub struct DenseQaoa {
    n: usize,
    diag: Vec<f64>,
    hc: DMatrix<C>,
    hm: DMatrix<C>,
    hm_vectors: DMatrix<f64>,
    hm_values: DVector<f64>,
}

impl DenseQaoa {
    pub fn new(n: usize, edges: &[(usize, usize)]) -> Self {
        let diag = cost_diagonal(n, edges);
        let hc = DMatrix::from_diagonal(&DVector::from_iterator(
            diag.len(),
            diag.iter().map(|&v| C::new(v, 0.0)),
        ));
        let hm = mixer_hamiltonian(n);
        let eig = hm.map(|c| c.re).symmetric_eigen();
        DenseQaoa {
            n,
            diag,
            hc,
            hm,
            hm_vectors: eig.eigenvectors,
            hm_values: eig.eigenvalues,
        }
    }

    pub fn state(&self, beta: &[f64], gamma: &[f64]) -> DVector<C> {
        let dim = 1usize << self.n;
        let amp = C::new((dim as f64).sqrt().recip(), 0.0);
        let mut psi = DVector::from_element(dim, amp);
        for (&b, &g) in beta.iter().zip(gamma) {
            psi = propagator(&self.hc, g) * psi;
            psi = propagator(&self.hm, b) * psi;
        }
        psi
    }

    pub fn expectation(&self, beta: &[f64], gamma: &[f64]) -> f64 {
        let psi = self.state(beta, gamma);
        (psi.adjoint() * &self.hc * &psi)[(0, 0)].re
    }

    /// Same evolution with the mixer exponentiated through its eigendecomposition
    /// and the diagonal cost phase applied entrywise. Used for large scans.
    pub fn expectation_eig(&self, beta: &[f64], gamma: &[f64]) -> f64 {
        let dim = 1usize << self.n;
        let v = self.hm_vectors.map(|x| C::new(x, 0.0));
        let vt = v.transpose();
        let mut psi = DVector::from_element(dim, C::new((dim as f64).sqrt().recip(), 0.0));
        for (&b, &g) in beta.iter().zip(gamma) {
            for (a, &c) in psi.iter_mut().zip(&self.diag) {
                *a *= C::from_polar(1.0, -g * c);
            }
            let mut rot = &vt * psi;
            for (a, &e) in rot.iter_mut().zip(self.hm_values.iter()) {
                *a *= C::from_polar(1.0, -b * e);
            }
            psi = &v * rot;
        }
        psi.iter().zip(&self.diag).map(|(a, &c)| a.norm_sqr() * c).sum()
    }
}

/// Maximum of the p = 1 expectation over beta in [0, pi/2), gamma in [0, 2 pi):
/// a 200 x 200 grid, then a second 200 x 200 grid over the 5 x 5 cell
/// neighbourhood of the best coarse point.
pub fn grid_scan_p1(oracle: &DenseQaoa) -> (f64, f64, f64) {
    const K: usize = 200;
    let scan = |b0: f64, bw: f64, g0: f64, gw: f64| {
        let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
        for i in 0..K {
            for j in 0..K {
                let b = b0 + bw * i as f64 / (K - 1) as f64;
                let g = g0 + gw * j as f64 / (K - 1) as f64;
                let f = oracle.expectation_eig(&[b], &[g]);
                if f > best.0 {
                    best = (f, b, g);
                }
            }
        }
        best
    };
    let (db, dg) = (FRAC_PI_2 / K as f64, 2.0 * PI / K as f64);
    let coarse = scan(0.0, FRAC_PI_2 - db, 0.0, 2.0 * PI - dg);
    scan(coarse.1 - 2.0 * db, 4.0 * db, coarse.2 - 2.0 * dg, 4.0 * dg)
}

/// Maximum cut by plain enumeration of all 2^n assignments.
pub fn max_cut_enumerate(n: usize, edges: &[(usize, usize)]) -> usize {
    cost_diagonal(n, edges).into_iter().fold(0.0f64, f64::max) as usize
}

/// Single edge at p = 1.
pub fn single_edge_closed_form(beta: f64, gamma: f64) -> f64 {
    0.5 + 0.5 * (4.0 * beta).sin() * gamma.sin()
}
