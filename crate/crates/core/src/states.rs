//! Tensor network states on a [`Graph`].
//!
//! The tensor at vertex `a` has shape `(d, χ_1, ..., χ_r)` where the virtual
//! legs follow the (ascending) neighbor order of `a`. States are kept
//! unnormalized; observables are normalized downstream.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, GraphJson};
use crate::network::Labeled;
use crate::tensor::{c64, symmetric_factor, CMatrix, CVector, DenseTensor, TensorJson, C64};

/// Largest vertex count for exact full contraction.
pub const MAX_STATEVECTOR_VERTICES: usize = 16;

#[derive(Clone, Debug, PartialEq)]
pub struct TensorNetworkState {
    graph: Graph,
    tensors: Vec<DenseTensor>,
    phys_dim: usize,
    bond_dims: Vec<usize>,
}

impl TensorNetworkState {
    /// Assembles a state, checking ranks, physical dimension and that the
    /// virtual extents agree across every edge.
    pub fn new(graph: Graph, tensors: Vec<DenseTensor>) -> Result<Self> {
        if tensors.len() != graph.n_vertices() {
            return Err(Error::ShapeMismatch(format!(
                "{} tensors for {} vertices",
                tensors.len(),
                graph.n_vertices()
            )));
        }
        let phys_dim = tensors[0].shape()[0];
        for (a, t) in tensors.iter().enumerate() {
            if t.rank() != graph.degree(a) + 1 {
                return Err(Error::ShapeMismatch(format!(
                    "tensor at vertex {a} has rank {}, expected {}",
                    t.rank(),
                    graph.degree(a) + 1
                )));
            }
            if t.shape()[0] != phys_dim {
                return Err(Error::ShapeMismatch(format!(
                    "vertex {a} has physical dimension {}, expected {phys_dim}",
                    t.shape()[0]
                )));
            }
            if t.norm_sqr() == 0.0 {
                return Err(Error::ZeroNorm(format!("site tensor at vertex {a}")));
            }
        }
        let mut bond_dims = Vec::with_capacity(graph.n_edges());
        for &(a, b) in graph.edges() {
            let da = tensors[a].shape()[1 + graph.leg(a, b).unwrap()];
            let db = tensors[b].shape()[1 + graph.leg(b, a).unwrap()];
            if da != db {
                return Err(Error::ShapeMismatch(format!(
                    "bond ({a}, {b}) has extents {da} and {db}"
                )));
            }
            bond_dims.push(da);
        }
        Ok(TensorNetworkState {
            graph,
            tensors,
            phys_dim,
            bond_dims,
        })
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn tensors(&self) -> &[DenseTensor] {
        &self.tensors
    }

    pub fn tensor(&self, a: usize) -> &DenseTensor {
        &self.tensors[a]
    }

    pub fn phys_dim(&self) -> usize {
        self.phys_dim
    }

    /// Bond dimension per undirected edge, in the graph's edge order.
    pub fn bond_dims(&self) -> &[usize] {
        &self.bond_dims
    }

    pub fn bond_dim(&self, a: usize, b: usize) -> Option<usize> {
        self.graph.edge_id(a, b).map(|e| self.bond_dims[e])
    }

    pub fn max_bond_dim(&self) -> usize {
        self.bond_dims.iter().copied().max().unwrap_or(1)
    }

    /// Replaces the tensor at `a` with one of identical shape.
    pub fn set_tensor(&mut self, a: usize, t: DenseTensor) -> Result<()> {
        if t.shape() != self.tensors[a].shape() {
            return Err(Error::ShapeMismatch(format!(
                "replacement tensor {:?} vs {:?}",
                t.shape(),
                self.tensors[a].shape()
            )));
        }
        self.tensors[a] = t;
        Ok(())
    }

    /// Returns a copy with every site tensor scaled to unit Frobenius norm.
    /// The physical state changes only by a global factor.
    pub fn normalized_sites(&self) -> Self {
        let mut out = self.clone();
        for t in &mut out.tensors {
            let n = t.norm();
            *t = t.scale(c64(1.0 / n, 0.0));
        }
        out
    }

    /// Embeds the state into bond dimension `chi` on every edge (zero
    /// padding), then adds seeded complex Gaussian noise of standard
    /// deviation `noise` to every entry.
    pub fn padded(&self, chi: usize, noise: f64, seed: u64) -> Result<Self> {
        if self.bond_dims.iter().any(|&c| c > chi) {
            return Err(Error::InvalidArgument(format!(
                "cannot pad bond dimension {} down to {chi}",
                self.max_bond_dim()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut tensors = Vec::with_capacity(self.tensors.len());
        for (a, t) in self.tensors.iter().enumerate() {
            let mut shape = vec![self.phys_dim];
            shape.extend(std::iter::repeat_n(chi, self.graph.degree(a)));
            let mut big = DenseTensor::zeros(shape.clone());
            for_each_index(t.shape(), |idx| big.set(idx, t.get(idx)));
            if noise > 0.0 {
                for z in big.data_mut() {
                    *z += complex_normal(&mut rng) * noise;
                }
            }
            tensors.push(big);
        }
        TensorNetworkState::new(self.graph.clone(), tensors)
    }

    /// Adds seeded complex Gaussian noise of standard deviation `noise`.
    pub fn perturbed(&self, noise: f64, seed: u64) -> Result<Self> {
        let chi = self.max_bond_dim();
        if self.bond_dims.iter().all(|&c| c == chi) {
            self.padded(chi, noise, seed)
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let tensors = self
                .tensors
                .iter()
                .map(|t| {
                    let mut t = t.clone();
                    for z in t.data_mut() {
                        *z += complex_normal(&mut rng) * noise;
                    }
                    t
                })
                .collect();
            TensorNetworkState::new(self.graph.clone(), tensors)
        }
    }

    /// Applies a single-site operator `op` (d×d) to the physical leg of
    /// every vertex.
    pub fn apply_to_all_sites(&self, op: &CMatrix) -> Result<Self> {
        let tensors = self
            .tensors
            .iter()
            .map(|t| t.contract_axis_matrix(0, &op.transpose()))
            .collect::<Result<Vec<_>>>()?;
        TensorNetworkState::new(self.graph.clone(), tensors)
    }

    /// Unnormalized amplitudes of the fully contracted network, indexed with
    /// vertex 0 as the most significant digit.
    pub fn amplitudes(&self) -> Result<Vec<C64>> {
        let n = self.graph.n_vertices();
        if n > MAX_STATEVECTOR_VERTICES {
            return Err(Error::TooLarge {
                what: "vertex count for full contraction",
                limit: MAX_STATEVECTOR_VERTICES,
                got: n,
            });
        }
        let order = self.contraction_order();
        let mut acc: Option<Labeled<Axis>> = None;
        for &v in &order {
            let site = self.labeled_site(v);
            acc = Some(match acc {
                None => site,
                Some(prev) => prev.contract(&site)?,
            });
        }
        let acc = acc.expect("graph has at least one vertex");
        let phys: Vec<Axis> = (0..n).map(Axis::Phys).collect();
        Ok(acc.permute_to(&phys)?.into_data())
    }

    /// Normalized statevector of the fully contracted network.
    pub fn to_statevector(&self) -> Result<CVector> {
        let amps = self.amplitudes()?;
        let norm = amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::ZeroNorm("state contracts to zero".into()));
        }
        Ok(CVector::from_iterator(amps.len(), amps.into_iter().map(|z| z / norm)))
    }

    fn labeled_site(&self, v: usize) -> Labeled<Axis> {
        let mut labels = vec![Axis::Phys(v)];
        labels.extend(
            self.graph
                .neighbors(v)
                .iter()
                .map(|&w| Axis::Bond(self.graph.edge_id(v, w).unwrap())),
        );
        Labeled::new(self.tensors[v].clone(), labels)
    }

    /// Greedy order: start at vertex 0, then repeatedly take the vertex with
    /// the most already-contracted neighbors (ties by id).
    fn contraction_order(&self) -> Vec<usize> {
        let n = self.graph.n_vertices();
        let mut done = vec![false; n];
        let mut order = Vec::with_capacity(n);
        for _ in 0..n {
            let next = (0..n)
                .filter(|&v| !done[v])
                .max_by_key(|&v| {
                    let linked = self.graph.neighbors(v).iter().filter(|&&w| done[w]).count();
                    (linked, std::cmp::Reverse(v))
                })
                .unwrap();
            done[next] = true;
            order.push(next);
        }
        order
    }

    pub fn to_json(&self) -> StateJson {
        StateJson {
            graph: self.graph.to_json(),
            phys_dim: self.phys_dim,
            bond_dims: self.bond_dims.clone(),
            tensors: self.tensors.iter().map(TensorJson::from).collect(),
        }
    }

    pub fn from_json(json: &StateJson) -> Result<Self> {
        let graph = Graph::from_json(&json.graph)?;
        let tensors = json
            .tensors
            .iter()
            .map(DenseTensor::try_from)
            .collect::<Result<Vec<_>>>()?;
        let state = TensorNetworkState::new(graph, tensors)?;
        if state.phys_dim != json.phys_dim || state.bond_dims != json.bond_dims {
            return Err(Error::ShapeMismatch(
                "recorded dimensions disagree with the tensors".into(),
            ));
        }
        Ok(state)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string(&self.to_json())?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let json: StateJson = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        TensorNetworkState::from_json(&json)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Axis {
    Phys(usize),
    Bond(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateJson {
    pub graph: GraphJson,
    pub phys_dim: usize,
    pub bond_dims: Vec<usize>,
    pub tensors: Vec<TensorJson>,
}

fn for_each_index(shape: &[usize], mut f: impl FnMut(&[usize])) {
    let total: usize = shape.iter().product();
    let mut idx = vec![0; shape.len()];
    for _ in 0..total {
        f(&idx);
        for k in (0..shape.len()).rev() {
            idx[k] += 1;
            if idx[k] < shape[k] {
                break;
            }
            idx[k] = 0;
        }
    }
}

/// Complex standard normal: `E|z|^2 = 1`.
pub(crate) fn complex_normal(rng: &mut impl Rng) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    c64(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// State with amplitudes `∏_{ab ∈ E} M(s_a, s_b)`, built from `M = A Aᵀ` by
/// attaching `A[s, α]` to each virtual leg of a diagonal (generalized
/// identity) tensor.
pub fn generalized_graph_state(g: &Graph, m: &CMatrix) -> Result<TensorNetworkState> {
    let a = symmetric_factor(m)?;
    generalized_graph_state_with_factor(g, &a)
}

/// Same construction with an explicit factor `A` (any `A` with `A Aᵀ = M`).
pub fn generalized_graph_state_with_factor(g: &Graph, a: &CMatrix) -> Result<TensorNetworkState> {
    if !a.is_square() {
        return Err(Error::ShapeMismatch("factor must be square".into()));
    }
    let d = a.nrows();
    let mut tensors = Vec::with_capacity(g.n_vertices());
    for v in 0..g.n_vertices() {
        let r = g.degree(v);
        let mut shape = vec![d];
        shape.extend(std::iter::repeat_n(d, r));
        let mut t = DenseTensor::zeros(shape.clone());
        for_each_index(&shape, |idx| {
            let s = idx[0];
            let amp = idx[1..].iter().fold(c64(1.0, 0.0), |acc, &alpha| acc * a[(s, alpha)]);
            t.set(idx, amp);
        });
        if t.norm_sqr() == 0.0 {
            return Err(Error::ZeroNorm(format!("factor gives a zero tensor at vertex {v}")));
        }
        tensors.push(t);
    }
    TensorNetworkState::new(g.clone(), tensors)
}

/// Edge matrix of the square-root state of the classical Ising model.
pub fn ising_edge_matrix(beta: f64, j: f64) -> CMatrix {
    let p = c64((beta * j / 2.0).exp(), 0.0);
    let q = c64((-beta * j / 2.0).exp(), 0.0);
    CMatrix::from_row_slice(2, 2, &[p, q, q, p])
}

/// Amplitudes `exp((βJ/2) Σ_{ab} s_a s_b)` with basis state 0 ↔ spin +1.
pub fn square_root_state(g: &Graph, beta: f64, j: f64) -> Result<TensorNetworkState> {
    if beta < 0.0 {
        return Err(Error::InvalidArgument("beta must be nonnegative".into()));
    }
    generalized_graph_state(g, &ising_edge_matrix(beta, j))
}

pub fn graph_state_matrix() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[c64(1., 0.), c64(1., 0.), c64(1., 0.), c64(-1., 0.)])
}

/// `∏_{ab} CZ_ab |+⟩^N` as a χ = 2 network.
pub fn graph_state(g: &Graph) -> Result<TensorNetworkState> {
    generalized_graph_state(g, &graph_state_matrix())
}

/// χ = 1 product state with the same local vector at every site.
pub fn product_state(g: &Graph, local: &[C64]) -> Result<TensorNetworkState> {
    if local.is_empty() || local.iter().all(|z| z.norm_sqr() == 0.0) {
        return Err(Error::ZeroNorm("local vector is zero".into()));
    }
    let tensors = (0..g.n_vertices())
        .map(|v| {
            let mut shape = vec![local.len()];
            shape.extend(std::iter::repeat_n(1, g.degree(v)));
            DenseTensor::new(shape, local.to_vec())
        })
        .collect::<Result<Vec<_>>>()?;
    TensorNetworkState::new(g.clone(), tensors)
}

/// i.i.d. complex standard normal entries (vertex order, row-major), each
/// site tensor then scaled to unit norm.
pub fn random_state(g: &Graph, phys_dim: usize, chi: usize, seed: u64) -> Result<TensorNetworkState> {
    if chi == 0 || phys_dim == 0 {
        return Err(Error::InvalidArgument("dimensions must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tensors = (0..g.n_vertices())
        .map(|v| {
            let mut shape = vec![phys_dim];
            shape.extend(std::iter::repeat_n(chi, g.degree(v)));
            let len: usize = shape.iter().product();
            let data: Vec<C64> = (0..len).map(|_| complex_normal(&mut rng)).collect();
            let t = DenseTensor::new(shape, data)?;
            let n = t.norm();
            Ok(t.scale(c64(1.0 / n, 0.0)))
        })
        .collect::<Result<Vec<_>>>()?;
    TensorNetworkState::new(g.clone(), tensors)
}
