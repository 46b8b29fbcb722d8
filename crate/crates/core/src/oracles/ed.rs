//! Exact diagonalization for the two lowest eigenpairs.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::hamiltonian::{apply_local_add, Hamiltonian};
use crate::states::{complex_normal, TensorNetworkState};
use crate::tensor::{c64, hermitian_eig, kron, pauli_x, pauli_z, CMatrix, CVector};

pub const MAX_ED_VERTICES: usize = 14;
/// Up to this Hilbert-space dimension the dense eigensolver is used.
pub const DENSE_DIM_LIMIT: usize = 256;
pub const RESIDUAL_TOL: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct EdResult {
    /// `E₀ ≤ E₁`.
    pub energies: [f64; 2],
    pub vectors: [CVector; 2],
    pub residuals: [f64; 2],
}

#[derive(Clone, Debug, Serialize)]
pub struct EdSummary {
    pub e0: f64,
    pub e1: f64,
    pub residual0: f64,
    pub residual1: f64,
}

impl EdResult {
    pub fn summary(&self) -> EdSummary {
        EdSummary {
            e0: self.energies[0],
            e1: self.energies[1],
            residual0: self.residuals[0],
            residual1: self.residuals[1],
        }
    }
}

pub fn exact_diagonalize(h: &Hamiltonian) -> Result<EdResult> {
    let n = h.graph().n_vertices();
    if n > MAX_ED_VERTICES {
        return Err(Error::TooLarge {
            what: "vertex count for exact diagonalization",
            limit: MAX_ED_VERTICES,
            got: n,
        });
    }
    let dim = h.phys_dim().pow(n as u32);
    if dim < 2 {
        return Err(Error::InvalidArgument("need at least two states".into()));
    }
    let (energies, vectors) = if dim <= DENSE_DIM_LIMIT {
        let (vals, vecs) = hermitian_eig(&h.dense_matrix()?)?;
        (
            [vals[0], vals[1]],
            [vecs.column(0).into_owned(), vecs.column(1).into_owned()],
        )
    } else {
        let apply = |v: &CVector| h.apply(v);
        let (e0, v0) = lanczos_lowest(&apply, dim, &[], 1)?;
        let (e1, v1) = lanczos_lowest(&apply, dim, std::slice::from_ref(&v0), 2)?;
        ([e0, e1], [v0, v1])
    };
    let mut residuals = [0.0; 2];
    for k in 0..2 {
        residuals[k] = (h.apply(&vectors[k])? - &vectors[k] * c64(energies[k], 0.0)).norm();
        if residuals[k] > RESIDUAL_TOL {
            return Err(Error::Numerical(format!(
                "eigenpair {k} residual {:.3e} exceeds {RESIDUAL_TOL:e}",
                residuals[k]
            )));
        }
    }
    Ok(EdResult {
        energies,
        vectors,
        residuals,
    })
}

/// Lowest eigenpair of a Hermitian operator restricted to the orthogonal
/// complement of `deflate`, by restarted Lanczos with full
/// reorthogonalization.
pub fn lanczos_lowest(
    apply: &dyn Fn(&CVector) -> Result<CVector>,
    dim: usize,
    deflate: &[CVector],
    seed: u64,
) -> Result<(f64, CVector)> {
    const KRYLOV: usize = 120;
    const RESTARTS: usize = 60;
    let project = |v: &mut CVector| {
        for d in deflate {
            let c = d.dotc(v);
            *v -= d * c;
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut start = CVector::from_fn(dim, |_, _| complex_normal(&mut rng));
    project(&mut start);
    let mut best = (f64::NAN, start.clone());
    let m_max = KRYLOV.min(dim - deflate.len());
    for _ in 0..RESTARTS {
        let norm = start.norm();
        if norm == 0.0 {
            return Err(Error::Numerical("Lanczos start vector vanished".into()));
        }
        let mut basis: Vec<CVector> = vec![start.unscale(norm)];
        let mut alpha = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        for j in 0..m_max {
            let mut w = apply(&basis[j])?;
            project(&mut w);
            let a = basis[j].dotc(&w).re;
            alpha.push(a);
            // two passes of full reorthogonalization
            for _ in 0..2 {
                for q in &basis {
                    let c = q.dotc(&w);
                    w -= q * c;
                }
                project(&mut w);
            }
            let b = w.norm();
            if j + 1 == m_max || b < 1e-13 {
                break;
            }
            beta.push(b);
            basis.push(w.unscale(b));
        }
        let m = alpha.len();
        let tri = DMatrix::<f64>::from_fn(m, m, |i, j| {
            if i == j {
                alpha[i]
            } else if i + 1 == j {
                beta[i]
            } else if j + 1 == i {
                beta[j]
            } else {
                0.0
            }
        });
        let eig = tri.symmetric_eigen();
        let k = (0..m)
            .min_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]))
            .unwrap();
        let theta = eig.eigenvalues[k];
        let mut ritz = CVector::zeros(dim);
        for (i, q) in basis.iter().enumerate().take(m) {
            ritz += q * c64(eig.eigenvectors[(i, k)], 0.0);
        }
        project(&mut ritz);
        let ritz = ritz.unscale(ritz.norm());
        let residual = (apply(&ritz)? - &ritz * c64(theta, 0.0)).norm();
        best = (theta, ritz.clone());
        if residual <= 1e-11 {
            break;
        }
        start = ritz;
    }
    // Rayleigh quotient of the final vector
    let v = best.1;
    let e = v.dotc(&apply(&v)?).re;
    Ok((e, v))
}

/// `|⟨v|ψ⟩|²` with `ψ` the normalized contraction of `s`.
pub fn fidelity(s: &TensorNetworkState, v: &CVector) -> Result<f64> {
    let psi = s.to_statevector()?;
    vector_fidelity(&psi, v)
}

pub fn vector_fidelity(psi: &CVector, v: &CVector) -> Result<f64> {
    if psi.len() != v.len() {
        return Err(Error::ShapeMismatch(format!("{} vs {}", psi.len(), v.len())));
    }
    let nv = v.norm_squared();
    if nv == 0.0 {
        return Err(Error::ZeroNorm("reference vector".into()));
    }
    Ok(v.dotc(psi).norm_sqr() / (nv * psi.norm_squared()))
}

/// Weight of the state in the span of the two lowest eigenvectors.
pub fn ground_space_overlap(s: &TensorNetworkState, ed: &EdResult) -> Result<f64> {
    let n = s.graph().n_vertices();
    if n > MAX_ED_VERTICES {
        return Err(Error::TooLarge {
            what: "vertex count for ground-space overlap",
            limit: MAX_ED_VERTICES,
            got: n,
        });
    }
    let psi = s.to_statevector()?;
    vector_ground_space_overlap(&psi, ed)
}

pub fn vector_ground_space_overlap(psi: &CVector, ed: &EdResult) -> Result<f64> {
    Ok(vector_fidelity(psi, &ed.vectors[0])? + vector_fidelity(psi, &ed.vectors[1])?)
}

/// Qubit observables of the exact low-energy states.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EdObservables {
    pub e0: f64,
    pub e1: f64,
    /// Site average of `⟨X_a⟩` in the ground state.
    pub mean_x: f64,
    /// Edge average of `⟨Z_a Z_b⟩` in the ground state.
    pub mean_zz: f64,
    /// Site average of `|⟨Z_a⟩|` in the state of `span{v₀, v₁}` with the
    /// largest total magnetization. In a ferromagnet with a quasi-degenerate
    /// pair this is the symmetry-broken order parameter.
    pub mean_abs_z_broken: f64,
}

pub fn ed_observables(g: &Graph, ed: &EdResult) -> Result<EdObservables> {
    let n = g.n_vertices();
    if ed.vectors[0].len() != 1 << n {
        return Err(Error::ShapeMismatch("observables need qubits on every vertex".into()));
    }
    let (x, z) = (pauli_x(), pauli_z());
    let zz = kron(&z, &z);
    let local = |op: &CMatrix, sites: &[usize], v: &CVector| -> Result<CVector> {
        let mut out = CVector::zeros(v.len());
        apply_local_add(op, sites, 2, n, v, &mut out)?;
        Ok(out)
    };
    let (v0, v1) = (&ed.vectors[0], &ed.vectors[1]);
    let mut mean_x = 0.0;
    // magnetization projected onto span{v0, v1}
    let mut m = [[c64(0.0, 0.0); 2]; 2];
    for a in 0..n {
        mean_x += v0.dotc(&local(&x, &[a], v0)?).re / n as f64;
        let z0 = local(&z, &[a], v0)?;
        let z1 = local(&z, &[a], v1)?;
        m[0][0] += v0.dotc(&z0);
        m[0][1] += v0.dotc(&z1);
        m[1][1] += v1.dotc(&z1);
    }
    let mut mean_zz = 0.0;
    for &(a, b) in g.edges() {
        mean_zz += v0.dotc(&local(&zz, &[a, b], v0)?).re / g.n_edges().max(1) as f64;
    }
    // top eigenvector of the 2x2 block is the most polarized ground-space state
    let (p, q, c) = (m[0][0].re, m[1][1].re, m[0][1]);
    let lambda = 0.5 * (p + q) + (0.25 * (p - q).powi(2) + c.norm_sqr()).sqrt();
    let (u0, u1) = if c.norm() > 1e-14 {
        (c, c64(lambda - p, 0.0))
    } else if p >= q {
        (c64(1.0, 0.0), c64(0.0, 0.0))
    } else {
        (c64(0.0, 0.0), c64(1.0, 0.0))
    };
    let scale = (u0.norm_sqr() + u1.norm_sqr()).sqrt();
    let broken = (v0 * u0 + v1 * u1) / c64(scale, 0.0);
    let mut mean_abs_z_broken = 0.0;
    for a in 0..n {
        mean_abs_z_broken += broken.dotc(&local(&z, &[a], &broken)?).re.abs() / n as f64;
    }
    Ok(EdObservables {
        e0: ed.energies[0],
        e1: ed.energies[1],
        mean_x,
        mean_zz,
        mean_abs_z_broken,
    })
}
