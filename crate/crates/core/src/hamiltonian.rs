//! Graph-local spin Hamiltonians `H = Σ_edges h_ab + Σ_sites h_a`.
//!
//! Edge terms act on `site_a ⊗ site_b` with the smaller vertex id as the
//! left factor. Statevectors use vertex 0 as the most significant digit.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, GraphJson};
use crate::tensor::{c64, hermitian_deviation, kron, pauli_x, pauli_z, CMatrix, CVector};

const TERM_HERMITIAN_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct Hamiltonian {
    graph: Graph,
    phys_dim: usize,
    edge_terms: Vec<CMatrix>,
    vertex_terms: Vec<CMatrix>,
}

impl Hamiltonian {
    pub fn new(graph: Graph, edge_terms: Vec<CMatrix>, vertex_terms: Vec<CMatrix>) -> Result<Self> {
        if edge_terms.len() != graph.n_edges() || vertex_terms.len() != graph.n_vertices() {
            return Err(Error::ShapeMismatch(format!(
                "{} edge and {} vertex terms for a graph with {} edges and {} vertices",
                edge_terms.len(),
                vertex_terms.len(),
                graph.n_edges(),
                graph.n_vertices()
            )));
        }
        let d = vertex_terms[0].nrows();
        for m in &vertex_terms {
            check_term(m, d)?;
        }
        for m in &edge_terms {
            check_term(m, d * d)?;
        }
        Ok(Hamiltonian {
            graph,
            phys_dim: d,
            edge_terms,
            vertex_terms,
        })
    }

    /// Uniform couplings: the same edge term on every edge and vertex term on
    /// every site.
    pub fn uniform(g: &Graph, edge: &CMatrix, vertex: &CMatrix) -> Result<Self> {
        Hamiltonian::new(
            g.clone(),
            vec![edge.clone(); g.n_edges()],
            vec![vertex.clone(); g.n_vertices()],
        )
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn phys_dim(&self) -> usize {
        self.phys_dim
    }

    pub fn edge_term(&self, e: usize) -> &CMatrix {
        &self.edge_terms[e]
    }

    pub fn vertex_term(&self, a: usize) -> &CMatrix {
        &self.vertex_terms[a]
    }

    /// `H v` on a full statevector.
    pub fn apply(&self, v: &CVector) -> Result<CVector> {
        let n = self.graph.n_vertices();
        let mut out = CVector::zeros(v.len());
        for (a, h) in self.vertex_terms.iter().enumerate() {
            apply_local_add(h, &[a], self.phys_dim, n, v, &mut out)?;
        }
        for (&(a, b), h) in self.graph.edges().iter().zip(&self.edge_terms) {
            apply_local_add(h, &[a, b], self.phys_dim, n, v, &mut out)?;
        }
        Ok(out)
    }

    /// `⟨v|H|v⟩ / ⟨v|v⟩`.
    pub fn expectation(&self, v: &CVector) -> Result<f64> {
        let hv = self.apply(v)?;
        Ok(v.dotc(&hv).re / v.norm_squared())
    }

    /// Dense `d^N × d^N` matrix (small systems only).
    pub fn dense_matrix(&self) -> Result<CMatrix> {
        let dim = self.phys_dim.pow(self.graph.n_vertices() as u32);
        let mut m = CMatrix::zeros(dim, dim);
        let mut e = CVector::zeros(dim);
        for col in 0..dim {
            e[col] = c64(1.0, 0.0);
            m.set_column(col, &self.apply(&e)?);
            e[col] = c64(0.0, 0.0);
        }
        Ok(m)
    }
}

fn check_term(m: &CMatrix, dim: usize) -> Result<()> {
    if m.shape() != (dim, dim) {
        return Err(Error::ShapeMismatch(format!("term {:?}, expected {dim}x{dim}", m.shape())));
    }
    let dev = hermitian_deviation(m);
    if dev > TERM_HERMITIAN_TOL {
        return Err(Error::NotHermitian(dev));
    }
    Ok(())
}

/// `out += (op on sites) v`. `op` acts on `sites` in the listed order, the
/// first listed site being the most significant factor.
pub fn apply_local_add(
    op: &CMatrix,
    sites: &[usize],
    d: usize,
    n: usize,
    v: &CVector,
    out: &mut CVector,
) -> Result<()> {
    let k = sites.len();
    let local = d.pow(k as u32);
    if op.shape() != (local, local) || v.len() != d.pow(n as u32) || out.len() != v.len() {
        return Err(Error::ShapeMismatch("local operator does not fit the statevector".into()));
    }
    let strides: Vec<usize> = sites.iter().map(|&s| d.pow((n - 1 - s) as u32)).collect();
    let digits = |idx: usize| -> usize {
        strides
            .iter()
            .fold(0, |acc, &st| acc * d + (idx / st) % d)
    };
    let offsets: Vec<usize> = (0..local)
        .map(|l| {
            let mut rem = l;
            let mut off = 0;
            for q in (0..k).rev() {
                off += (rem % d) * strides[q];
                rem /= d;
            }
            off
        })
        .collect();
    for idx in 0..v.len() {
        let amp = v[idx];
        if amp == c64(0.0, 0.0) {
            continue;
        }
        let col = digits(idx);
        let base = idx - offsets[col];
        for row in 0..local {
            let w = op[(row, col)];
            if w != c64(0.0, 0.0) {
                out[base + offsets[row]] += w * amp;
            }
        }
    }
    Ok(())
}

/// `Σ jzz Z_a Z_b + Σ (hx X_a + hz Z_a)`. The values `(-1, -2, -0.5)`
/// reproduce the mixed-field benchmark model.
pub fn mixed_field_ising(g: &Graph, jzz: f64, hx: f64, hz: f64) -> Result<Hamiltonian> {
    let z = pauli_z();
    let edge = kron(&z, &z).scale(jzz);
    let vertex = pauli_x().scale(hx) + z.scale(hz);
    Hamiltonian::uniform(g, &edge, &vertex)
}

/// `H = -Σ_edges Z_a Z_b - h_x Σ_sites X_a`.
pub fn transverse_field_ising(g: &Graph, hx: f64) -> Result<Hamiltonian> {
    let z = pauli_z();
    let edge = -kron(&z, &z);
    let vertex = pauli_x().scale(-hx);
    Hamiltonian::uniform(g, &edge, &vertex)
}

/// One `(r+1)`-body term `−X_a + exp(−βJ Z_a Σ_b Z_b)` of the parent
/// Hamiltonian of the square-root state. `sites` lists the center first,
/// then its neighbors in ascending order.
#[derive(Clone, Debug, PartialEq)]
pub struct StarTerm {
    pub sites: Vec<usize>,
    pub matrix: CMatrix,
}

pub fn sqrt_parent_hamiltonian(g: &Graph, beta: f64, j: f64) -> Vec<StarTerm> {
    (0..g.n_vertices())
        .map(|a| {
            let mut sites = vec![a];
            sites.extend_from_slice(g.neighbors(a));
            let k = sites.len();
            let dim = 1usize << k;
            let mut m = CMatrix::zeros(dim, dim);
            for idx in 0..dim {
                let spin = |q: usize| if (idx >> (k - 1 - q)) & 1 == 0 { 1.0 } else { -1.0 };
                let field: f64 = (1..k).map(spin).sum();
                m[(idx, idx)] = c64((-beta * j * spin(0) * field).exp(), 0.0);
                // −X on the center flips its (most significant) bit
                m[(idx ^ (1 << (k - 1)), idx)] -= c64(1.0, 0.0);
            }
            StarTerm { sites, matrix: m }
        })
        .collect()
}

/// `Σ_terms (term on its sites) v`.
pub fn apply_star_terms(terms: &[StarTerm], n: usize, v: &CVector) -> Result<CVector> {
    let mut out = CVector::zeros(v.len());
    for t in terms {
        apply_local_add(&t.matrix, &t.sites, 2, n, v, &mut out)?;
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", content = "params", rename_all = "snake_case")]
pub enum ModelParams {
    MixedFieldIsing { jzz: f64, hx: f64, hz: f64 },
    Tfim { hx: f64 },
}

/// `{"model": ..., "params": {...}, "graph": <graph JSON>}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    #[serde(flatten)]
    pub params: ModelParams,
    pub graph: GraphJson,
}

impl ModelSpec {
    pub fn build(&self) -> Result<Hamiltonian> {
        let g = Graph::from_json(&self.graph)?;
        self.params.build(&g)
    }
}

impl ModelParams {
    pub fn build(&self, g: &Graph) -> Result<Hamiltonian> {
        match *self {
            ModelParams::MixedFieldIsing { jzz, hx, hz } => mixed_field_ising(g, jzz, hx, hz),
            ModelParams::Tfim { hx } => transverse_field_ising(g, hx),
        }
    }
}

/// Global spin flip `∏ X` applied to a qubit statevector.
pub fn global_flip(v: &CVector) -> CVector {
    let mask = v.len() - 1;
    CVector::from_fn(v.len(), |i, _| v[i ^ mask])
}

pub fn zero_hamiltonian(g: &Graph, d: usize) -> Result<Hamiltonian> {
    Hamiltonian::uniform(g, &CMatrix::zeros(d * d, d * d), &CMatrix::zeros(d, d))
}
