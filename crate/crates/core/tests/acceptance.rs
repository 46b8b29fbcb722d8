//! Acceptance run: one PASS/FAIL line per criterion. Runs without the test
//! harness so the lines are always printed; exits nonzero if any criterion
//! fails.

mod common;

use std::f64::consts::{FRAC_1_SQRT_2, LN_2, PI};
use std::time::{Duration, Instant};

use common::{partial_trace, random_tree, trace_distance};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tnbp::bp::{
    bp_step, init_messages, rdm, run_bp, site_averaged_observables, site_expectations, BpConfig, MessageInit,
    MessageSet,
};
use tnbp::cli::graphstate_rows;
use tnbp::graph::Graph;
use tnbp::hamiltonian::{apply_star_terms, mixed_field_ising, sqrt_parent_hamiltonian, transverse_field_ising};
use tnbp::oracles::{
    classical_exact_expectations, classical_ising_mc, classical_ising_mc_with, exact_diagonalize, fidelity,
    ground_space_overlap, McConfig, McStart,
};
use tnbp::states::{random_state, square_root_state};
use tnbp::tensor::{c64, hermitian_deviation, hermitian_eigenvalues, pauli_x, pauli_y, pauli_z, trace};
use tnbp::variational::{energy, energy_gradient, sweep, variational_prepare, VarConfig, VarInit};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn within(elapsed: Duration, limit_s: u64) -> bool {
    elapsed.as_secs() < limit_s
}

fn plus() -> VarInit {
    VarInit::Product {
        local: vec![c64(FRAC_1_SQRT_2, 0.0), c64(FRAC_1_SQRT_2, 0.0)],
    }
}

fn tree_exactness() -> Outcome {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for case in 0..50u64 {
        let n = rng.random_range(2..=14);
        let chi = rng.random_range(1..=3);
        let g = random_tree(n, 1000 + case);
        let s = random_state(&g, 2, chi, 2000 + case).unwrap();
        let run = run_bp(&s, &BpConfig { max_steps: 2 * n + 2, ..BpConfig::default() }).unwrap();
        let psi: Vec<_> = s.to_statevector().unwrap().iter().copied().collect();
        let sites: Vec<Vec<usize>> = (0..n).map(|a| vec![a]).chain(g.edges().iter().map(|&(a, b)| vec![a, b])).collect();
        for set in sites {
            let bp = rdm(&s, &run.messages, &set).unwrap();
            worst = worst.max(trace_distance(&bp.matrix, &partial_trace(&psi, n, &set)));
        }
    }
    let dt = t0.elapsed();
    outcome(
        worst <= 1e-9 && within(dt, 60),
        format!("50 trees, max trace distance {worst:.2e}, {:.1}s", dt.as_secs_f64()),
    )
}

fn graph_state_fixed_point() -> Outcome {
    let t0 = Instant::now();
    let g = Graph::random_regular(50, 3, 1).unwrap();
    let rows = graphstate_rows(&g, 5, MessageInit::Identity).unwrap();
    let r = &rows[5];
    let pauli = r.mean_x.abs().max(r.mean_y.abs()).max(r.mean_z.abs());
    let dev = (r.edge_entropy - 2.0 * LN_2).abs();
    let first_exact = rows.iter().position(|r| (r.edge_entropy - 2.0 * LN_2).abs() <= 1e-8);
    outcome(
        pauli <= 1e-8 && dev <= 1e-8,
        format!(
            "step 5: max |Pauli| {pauli:.1e}, entropy deviation {dev:.1e}; entropy exact from step {first_exact:?}, {:.2}s",
            t0.elapsed().as_secs_f64()
        ),
    )
}

/// Both halves use the same BP protocol: random initial messages (seeded),
/// so that in the ordered phase BP lands on a symmetry-broken fixed point.
fn sqrt_bp(g: &Graph, beta: f64) -> (tnbp::states::TensorNetworkState, MessageSet, bool) {
    let s = square_root_state(g, beta, 1.0).unwrap();
    let cfg = BpConfig {
        max_steps: 2000,
        init: MessageInit::Random(1),
        ..BpConfig::default()
    };
    let run = run_bp(&s, &cfg).unwrap();
    (s, run.messages, run.diagnostics.converged)
}

fn square_root_cross_validation() -> Outcome {
    let t0 = Instant::now();
    let betas: Vec<f64> = (1..=12).map(|k| 0.1 * k as f64).collect();
    let mut notes = Vec::new();
    let mut pass = true;

    let g = Graph::random_regular(20, 3, 1).unwrap();
    let mut mc_fail = Vec::new();
    for &beta in &betas {
        let (s, msgs, conv) = sqrt_bp(&g, beta);
        let bp = site_averaged_observables(&s, &msgs).unwrap().mean_abs_z;
        let mc = classical_ising_mc_with(
            &g,
            &McConfig {
                start: McStart::Cold,
                ..McConfig::new(beta, 1.0, 101_000, 1000, 7)
            },
        )
        .unwrap();
        let (m, err) = (mc.mean_abs_magnetization, mc.mean_abs_magnetization_err);
        let ok = (bp - m).abs() <= 3.0 * err;
        println!("    N=20 β={beta:.1}: BP {bp:.4} (converged {conv}) MC {m:.4} ± {err:.4} {}", if ok { "ok" } else { "MISMATCH" });
        if !ok {
            mc_fail.push(format!("{beta:.1}"));
        }
    }
    if !mc_fail.is_empty() {
        pass = false;
        notes.push(format!("N=20 BP vs MC outside 3σ at β ∈ {{{}}}", mc_fail.join(", ")));
    }

    // Bethe-lattice transition of the 3-regular Ising model: tanh βc = 1/2.
    let beta_c = 0.5f64.atanh();
    let window = (beta_c - 0.15, beta_c + 0.15);
    let g = Graph::random_regular(12, 3, 1).unwrap();
    let mut enum_fail = Vec::new();
    for &beta in &betas {
        let (s, msgs, _) = sqrt_bp(&g, beta);
        let ex = classical_exact_expectations(&g, beta, 1.0).unwrap();
        let z = site_expectations(&s, &msgs, &pauli_z()).unwrap();
        let x = site_expectations(&s, &msgs, &pauli_x()).unwrap();
        let max_dev = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        let (dz, dx) = (max_dev(&z, &ex.z), max_dev(&x, &ex.x));
        let inside = beta >= window.0 && beta <= window.1;
        let ok = inside || (dz <= 0.02 && dx <= 0.02);
        println!(
            "    N=12 β={beta:.1}: max|ΔZ| {dz:.4} max|ΔX| {dx:.4} {}",
            if inside { "(transition window, reported only)" } else if ok { "ok" } else { "MISMATCH" }
        );
        if !ok {
            enum_fail.push(format!("{beta:.1}"));
        }
    }
    if !enum_fail.is_empty() {
        pass = false;
        notes.push(format!("N=12 enumeration deviation > 0.02 at β ∈ {{{}}}", enum_fail.join(", ")));
    }
    let dt = t0.elapsed();
    pass &= within(dt, 600);
    notes.push(format!(
        "window [{:.2}, {:.2}] not gated, {:.0}s",
        window.0,
        window.1,
        dt.as_secs_f64()
    ));
    outcome(pass, notes.join("; "))
}

fn variational_benchmark() -> Outcome {
    let t0 = Instant::now();
    let g = Graph::random_regular(10, 3, 1).unwrap();
    let h = mixed_field_ising(&g, -1.0, -2.0, -0.5).unwrap();
    let ed = exact_diagonalize(&h).unwrap();
    let cfg = VarConfig {
        t_var: 200,
        chi: 2,
        init: plus(),
        ..VarConfig::default()
    };
    let trace = variational_prepare(&g, &h, &cfg).unwrap();
    let rel = (trace.final_energy - ed.energies[0]).abs() / ed.energies[0].abs();
    let gso = ground_space_overlap(&trace.final_state, &ed).unwrap();
    let fid = fidelity(&trace.final_state, &ed.vectors[0]).unwrap();
    let dt = t0.elapsed();
    outcome(
        rel <= 1e-2 && gso >= 0.95 && within(dt, 300),
        format!(
            "E {:.6} vs ED {:.6} (rel {rel:.2e}), ground-space overlap {gso:.4}, fidelity {fid:.4}, {:.1}s",
            trace.final_energy,
            ed.energies[0],
            dt.as_secs_f64()
        ),
    )
}

fn bond_dimension_convergence() -> Outcome {
    let t0 = Instant::now();
    let g = Graph::random_regular(40, 3, 1).unwrap();
    let h = mixed_field_ising(&g, -1.0, -2.0, -0.5).unwrap();
    let e: Vec<f64> = (1..=3)
        .map(|chi| {
            let cfg = VarConfig {
                t_var: 200,
                chi,
                init: plus(),
                ..VarConfig::default()
            };
            variational_prepare(&g, &h, &cfg).unwrap().final_energy
        })
        .collect();
    let rel = (e[1] - e[2]).abs() / e[2].abs();
    let dt = t0.elapsed();
    outcome(
        e[0] >= e[1] && e[1] >= e[2] && rel <= 1e-2 && within(dt, 1800),
        format!(
            "E(χ=1,2,3) = {:.4}, {:.4}, {:.4}; |E2−E3|/|E3| {rel:.2e}, {:.1}s",
            e[0],
            e[1],
            e[2],
            dt.as_secs_f64()
        ),
    )
}

fn tfim_phase_diagram() -> Outcome {
    let t0 = Instant::now();
    let g = Graph::random_regular(40, 3, 1).unwrap();
    let hx: Vec<f64> = (0..15).map(|k| 0.5 + 0.25 * k as f64).collect();
    let cfg = VarConfig {
        t_var: 100,
        init: VarInit::Product {
            local: vec![c64((PI / 8.0).cos(), 0.0), c64((PI / 8.0).sin(), 0.0)],
        },
        ..VarConfig::default()
    };
    let res = sweep(&g, &hx, &cfg, 3).unwrap();
    let z: Vec<f64> = res.points.iter().map(|p| p.mean_abs_z).collect();
    let (k, drop) = z
        .windows(2)
        .map(|w| w[0] - w[1])
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (k, d)| if d > best.1 { (k, d) } else { best });
    let (lo, hi) = (hx[k], hx[k + 1]);
    let steep_ok = lo >= 2.0 && hi <= 3.0;
    let spread_outside: Vec<String> = res
        .points
        .iter()
        .filter(|p| p.abs_z_spread > 0.05 && !(2.0..=3.0).contains(&p.hx))
        .map(|p| format!("{:.2}", p.hx))
        .collect();
    let max_spread = res.points.iter().map(|p| p.abs_z_spread).fold(0.0, f64::max);
    for p in &res.points {
        println!(
            "    hx={:.2}: mean|Z| {:.4} mean X {:.4} E/N {:.4} spread {:.4}",
            p.hx, p.mean_abs_z, p.mean_x, p.energy_density, p.abs_z_spread
        );
    }
    let first = z[0];
    let last = *z.last().unwrap();
    outcome(
        first >= 0.9 && last <= 0.1 && steep_ok && spread_outside.is_empty(),
        format!(
            "mean|Z| {first:.3} at hx=0.5, {last:.1e} at hx=4; steepest drop {drop:.3} in [{lo}, {hi}]; \
             max spread {max_spread:.3}, spread > 0.05 outside [2,3] at {spread_outside:?}; {:.0}s",
            t0.elapsed().as_secs_f64()
        ),
    )
}

fn gradient_correctness() -> Outcome {
    let t0 = Instant::now();
    let eps = 1e-6;
    let mut worst: f64 = 0.0;
    for case in 0..20u64 {
        let n = [6, 8, 10][case as usize % 3];
        let g = Graph::random_regular(n, 3, 300 + case).unwrap();
        let s = random_state(&g, 2, 2, 400 + case).unwrap();
        let mut msgs = init_messages(&s, MessageInit::Random(case));
        for _ in 0..2 {
            msgs = bp_step(&s, &msgs, 0.0).unwrap();
        }
        let h = if case % 2 == 0 {
            mixed_field_ising(&g, -1.0, -2.0, -0.5).unwrap()
        } else {
            transverse_field_ising(&g, 1.0 + 0.1 * case as f64).unwrap()
        };
        let grad = energy_gradient(&s, &msgs, &h).unwrap();
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..n {
            for idx in 0..s.tensor(i).len() {
                for dir in [c64(1.0, 0.0), c64(0.0, 1.0)] {
                    let shifted = |sign: f64| {
                        let mut t = s.tensor(i).clone();
                        t.data_mut()[idx] += dir * (sign * eps);
                        let mut p = s.clone();
                        p.set_tensor(i, t).unwrap();
                        energy(&p, &msgs, &h).unwrap()
                    };
                    let fd = (shifted(1.0) - shifted(-1.0)) / (2.0 * eps);
                    let zg = grad[i].data()[idx];
                    let an = 2.0 * if dir.re == 1.0 { zg.re } else { zg.im };
                    num += (fd - an).powi(2);
                    den += an * an;
                }
            }
        }
        worst = worst.max((num / den).sqrt());
    }
    let dt = t0.elapsed();
    outcome(
        worst <= 1e-4,
        format!("20 instances, worst ‖FD − ∇‖/‖∇‖ = {worst:.2e}, {:.1}s", dt.as_secs_f64()),
    )
}

fn invariant_suite() -> Outcome {
    let mut failures = Vec::new();
    for seed in 0..6u64 {
        let g = Graph::random_regular(12, 3, 500 + seed).unwrap();
        let chi = 1 + seed as usize % 3;
        let s = random_state(&g, 2, chi, 600 + seed).unwrap();
        let mut msgs = init_messages(&s, MessageInit::Random(seed));
        for _ in 0..10 {
            msgs = bp_step(&s, &msgs, 0.1 * (seed % 3) as f64).unwrap();
            for m in msgs.iter() {
                let tr = trace(m);
                let min = hermitian_eigenvalues(m).unwrap()[0];
                if (tr - c64(1.0, 0.0)).norm() > 1e-12 || hermitian_deviation(m) > 1e-12 || min < -1e-10 {
                    failures.push(format!("message not a density matrix (seed {seed})"));
                }
            }
            for &(a, b) in g.edges() {
                let r = rdm(&s, &msgs, &[a, b]).unwrap();
                if hermitian_deviation(&r.matrix) > 1e-12 || (trace(&r.matrix) - c64(1.0, 0.0)).norm() > 1e-12 {
                    failures.push(format!("RDM not Hermitian/unit trace (seed {seed})"));
                }
            }
        }
        let base = site_averaged_observables(&s, &msgs).unwrap();
        let scaled = MessageSet::new(msgs.iter().map(|m| m * c64(7.5, 0.0)).collect());
        let mut t = s.clone();
        t.set_tensor(3, s.tensor(3).scale(c64(-0.4, 2.2))).unwrap();
        for obs in [
            site_averaged_observables(&s, &scaled).unwrap(),
            site_averaged_observables(&t, &msgs).unwrap(),
        ] {
            let d = [
                obs.mean_x - base.mean_x,
                obs.mean_y - base.mean_y,
                obs.mean_z - base.mean_z,
                obs.mean_zz - base.mean_zz,
                obs.edge_entropy - base.edge_entropy,
            ];
            if d.iter().any(|v| v.abs() > 1e-10) {
                failures.push(format!("gauge rescaling changed observables (seed {seed})"));
            }
        }
        let cfg = BpConfig {
            max_steps: 30,
            init: MessageInit::Random(seed),
            ..BpConfig::default()
        };
        let pool = |k| rayon::ThreadPoolBuilder::new().num_threads(k).build().unwrap();
        let one = pool(1).install(|| run_bp(&s, &cfg)).unwrap();
        let many = pool(8).install(|| run_bp(&s, &cfg)).unwrap();
        if one != many {
            failures.push(format!("thread count changed BP output (seed {seed})"));
        }
    }
    // keep pauli_y in the suite: Y expectations must be real and bounded
    let g = Graph::random_regular(8, 3, 9).unwrap();
    let s = random_state(&g, 2, 2, 9).unwrap();
    let run = run_bp(&s, &BpConfig::default()).unwrap();
    let y = site_expectations(&s, &run.messages, &pauli_y()).unwrap();
    if y.iter().any(|v| v.abs() > 1.0 + 1e-12) {
        failures.push("⟨Y⟩ out of range".into());
    }
    failures.dedup();
    outcome(
        failures.is_empty(),
        if failures.is_empty() {
            "PSD/unit-trace messages, Hermitian unit-trace RDMs, gauge no-ops, 1 vs 8 threads bit-identical".to_string()
        } else {
            failures.join("; ")
        },
    )
}

fn oracle_self_consistency() -> Outcome {
    let g = Graph::path(2).unwrap();
    let ed = exact_diagonalize(&transverse_field_ising(&g, 1.0).unwrap()).unwrap();
    let ed_dev = (ed.energies[0] + 5f64.sqrt()).abs();
    let mc = classical_ising_mc(&g, 0.5, 1.0, 101_000, 1000, 11).unwrap();
    let mc_dev = (mc.edge_correlation[0] - 0.5f64.tanh()).abs();
    let mc_ok = mc_dev <= 3.0 * mc.edge_correlation_err[0];
    let mut parent: f64 = 0.0;
    for (n, seed) in [(8, 1), (10, 2), (12, 3)] {
        let g = Graph::random_regular(n, 3, seed).unwrap();
        for beta in [0.2, 0.7, 1.2] {
            let psi = square_root_state(&g, beta, 1.0).unwrap().to_statevector().unwrap();
            let hp = apply_star_terms(&sqrt_parent_hamiltonian(&g, beta, 1.0), n, &psi).unwrap();
            parent = parent.max(hp.norm());
        }
    }
    outcome(
        ed_dev <= 1e-10 && mc_ok && parent <= 1e-8,
        format!(
            "ED |E0 + √5| {ed_dev:.1e}; MC ⟨s1 s2⟩ − tanh(0.5) = {:.4} (σ {:.4}); max ‖H_parent ψ‖ {parent:.1e}",
            mc.edge_correlation[0] - 0.5f64.tanh(),
            mc.edge_correlation_err[0]
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("tree exactness", tree_exactness),
        ("graph-state fixed point", graph_state_fixed_point),
        ("square-root-state cross-validation", square_root_cross_validation),
        ("variational benchmark", variational_benchmark),
        ("bond-dimension convergence", bond_dimension_convergence),
        ("TFIM phase diagram", tfim_phase_diagram),
        ("gradient correctness", gradient_correctness),
        ("invariant suite", invariant_suite),
        ("oracle self-consistency", oracle_self_consistency),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let id = (k + 1).to_string();
        if !filter.is_empty() && !filter.contains(&id) {
            continue;
        }
        let o = run();
        if !o.pass {
            failed += 1;
        }
        println!("criterion {id} ({name}): {} | {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    if failed > 0 {
        println!("{failed} criterion/criteria failed");
        std::process::exit(1);
    }
}
