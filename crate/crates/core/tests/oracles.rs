mod common;

use common::random_tree;
use tnbp::bp::{run_bp, site_expectations, BpConfig};
use tnbp::graph::Graph;
use tnbp::hamiltonian::{apply_star_terms, sqrt_parent_hamiltonian, transverse_field_ising};
use tnbp::oracles::{
    classical_exact_expectations, classical_ising_mc_chains, ed_observables, exact_diagonalize, McConfig,
};
use tnbp::states::square_root_state;
use tnbp::tensor::{pauli_x, pauli_z};

fn statevector_x_z(psi: &[num_complex::Complex64], n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut z = vec![0.0; n];
    for a in 0..n {
        let bit = 1 << (n - 1 - a);
        for i in 0..psi.len() {
            x[a] += (psi[i].conj() * psi[i ^ bit]).re;
            z[a] += psi[i].norm_sqr() * if i & bit == 0 { 1.0 } else { -1.0 };
        }
    }
    (x, z)
}

#[test]
fn enumeration_matches_statevector() {
    let g = Graph::random_regular(10, 3, 4).unwrap();
    for (beta, j) in [(0.2, 1.0), (0.7, 1.0), (0.5, -0.8)] {
        let psi: Vec<_> = square_root_state(&g, beta, j).unwrap().to_statevector().unwrap().iter().copied().collect();
        let (x, z) = statevector_x_z(&psi, 10);
        let ex = classical_exact_expectations(&g, beta, j).unwrap();
        for a in 0..10 {
            assert!((x[a] - ex.x[a]).abs() < 1e-12);
            assert!((z[a] - ex.z[a]).abs() < 1e-12);
        }
    }
}

#[test]
fn bp_matches_enumeration_on_trees() {
    let g = random_tree(11, 9);
    let s = square_root_state(&g, 0.8, 1.0).unwrap();
    let run = run_bp(&s, &BpConfig::default()).unwrap();
    let ex = classical_exact_expectations(&g, 0.8, 1.0).unwrap();
    let x = site_expectations(&s, &run.messages, &pauli_x()).unwrap();
    let z = site_expectations(&s, &run.messages, &pauli_z()).unwrap();
    for a in 0..11 {
        assert!((x[a] - ex.x[a]).abs() < 1e-10);
        assert!((z[a] - ex.z[a]).abs() < 1e-10);
    }
}

#[test]
fn square_root_state_is_parent_ground_state() {
    let g = Graph::random_regular(12, 3, 6).unwrap();
    for beta in [0.1, 0.6, 1.2] {
        let psi = square_root_state(&g, beta, 1.0).unwrap().to_statevector().unwrap();
        let h_psi = apply_star_terms(&sqrt_parent_hamiltonian(&g, beta, 1.0), 12, &psi).unwrap();
        assert!(h_psi.norm() < 1e-8, "β = {beta}: {}", h_psi.norm());
    }
}

#[test]
fn strong_field_transverse_magnetization() {
    // Second order in 1/hx: each bond flips a spin pair with probability
    // 1/(4hx)², so ⟨X⟩ ≈ 1 − 2·3/(16hx²) = 0.977 at hx = 4 on a 3-regular
    // graph.
    let g = Graph::random_regular(12, 3, 1).unwrap();
    let ed = exact_diagonalize(&transverse_field_ising(&g, 4.0).unwrap()).unwrap();
    let obs = ed_observables(&g, &ed).unwrap();
    assert!((obs.mean_x - (1.0 - 3.0 / 128.0)).abs() < 0.01, "{}", obs.mean_x);
    // no quasi-degenerate pair in the paramagnet
    assert!(obs.e1 - obs.e0 > 1.0);
    let ed = exact_diagonalize(&transverse_field_ising(&g, 0.5).unwrap()).unwrap();
    let obs = ed_observables(&g, &ed).unwrap();
    assert!(obs.e1 - obs.e0 < 1e-3);
    assert!(obs.mean_abs_z_broken > 0.95);
}

#[test]
fn monte_carlo_agrees_with_enumeration() {
    // Batches must outlast the tunneling time between the two ordered
    // states, which at β = 1.2 and N = 12 needs about 5·10⁵ sweeps.
    let g = Graph::random_regular(12, 3, 2).unwrap();
    let betas: Vec<f64> = (1..=12).map(|k| 0.1 * k as f64).collect();
    let runs: Vec<_> = betas
        .iter()
        .enumerate()
        .map(|(k, &beta)| {
            let cfg = McConfig::new(beta, 1.0, 501_000, 1000, 0);
            classical_ising_mc_chains(&g, &cfg, &[k as u64]).unwrap().remove(0)
        })
        .collect();
    let (mut hits, mut total) = (0, 0);
    for (mc, &beta) in runs.iter().zip(&betas) {
        let ex = classical_exact_expectations(&g, beta, 1.0).unwrap();
        for (a, (m, e)) in mc.magnetization.iter().zip(&mc.magnetization_err).enumerate() {
            total += 1;
            if (m - ex.z[a]).abs() <= 3.0 * e {
                hits += 1;
            }
        }
    }
    assert!(hits as f64 >= 0.95 * total as f64, "{hits}/{total}");
}
