#![allow(dead_code)]

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tnbp::graph::Graph;

/// Tree on `n` vertices where vertex `k` attaches to a uniformly random
/// earlier vertex.
pub fn random_tree(n: usize, seed: u64) -> Graph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let edges: Vec<(usize, usize)> = (1..n).map(|k| (rng.random_range(0..k), k)).collect();
    Graph::from_edges(n, &edges).unwrap()
}

/// Reduced density matrix of a qubit statevector (vertex 0 most
/// significant) on `sites`, in the order given, by brute-force summation.
pub fn partial_trace(psi: &[Complex64], n: usize, sites: &[usize]) -> DMatrix<Complex64> {
    let k = sites.len();
    let bit = |idx: usize, a: usize| (idx >> (n - 1 - a)) & 1;
    let rest: Vec<usize> = (0..n).filter(|a| !sites.contains(a)).collect();
    // psi as a (kept × rest) matrix, then rho = M M†
    let mut m = DMatrix::zeros(1 << k, 1 << rest.len());
    for (idx, amp) in psi.iter().enumerate() {
        let r = sites.iter().fold(0, |acc, &a| (acc << 1) | bit(idx, a));
        let c = rest.iter().fold(0, |acc, &a| (acc << 1) | bit(idx, a));
        m[(r, c)] = *amp;
    }
    let rho = &m * m.adjoint();
    let tr: Complex64 = rho.trace();
    rho / tr
}

/// `(1/2) ‖A − B‖₁` for Hermitian matrices.
pub fn trace_distance(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
    let d = a - b;
    let d = (&d + d.adjoint()) * Complex64::new(0.5, 0.0);
    d.symmetric_eigenvalues().iter().map(|x| x.abs()).sum::<f64>() / 2.0
}
