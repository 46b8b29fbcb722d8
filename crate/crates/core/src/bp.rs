//! Belief-propagation contraction of the doubled (ket ⊗ bra) network.
//!
//! A message `m_{k→i}` is a χ×χ matrix on the bond `ki`; its row index pairs
//! with the ket copy of the bond and its column index with the bra copy. The
//! update for `i → j` contracts `ψ_i`, `ψ_i*` and every incoming message
//! except the one from `j` over the physical leg and the paired virtual legs.

use std::collections::BTreeMap;
use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::network::{contract_all, Labeled};
use crate::states::{complex_normal, TensorNetworkState};
use crate::tensor::{
    c64, hermitian_deviation, hermitian_eigenvalues, hermitize, identity, kron, pauli_x, pauli_y,
    pauli_z, trace, CMatrix, DenseTensor, TensorJson,
};

/// Eigenvalues of an RDM below `-CLAMP_WARN` trigger a warning when clamped.
pub const CLAMP_WARN: f64 = 1e-6;
/// Eigenvalues at or below this are dropped from the entropy sum.
pub const ENTROPY_CUTOFF: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct MessageSet {
    messages: Vec<CMatrix>,
}

impl MessageSet {
    pub fn new(messages: Vec<CMatrix>) -> Self {
        MessageSet { messages }
    }

    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }

    /// Message on directed edge `id`.
    pub fn get(&self, id: usize) -> &CMatrix {
        &self.messages[id]
    }

    pub fn get_mut(&mut self, id: usize) -> &mut CMatrix {
        &mut self.messages[id]
    }

    pub fn iter(&self) -> impl Iterator<Item = &CMatrix> {
        self.messages.iter()
    }

    /// Largest Frobenius norm of the difference over all directed edges.
    pub fn max_delta(&self, other: &MessageSet) -> f64 {
        self.messages
            .iter()
            .zip(&other.messages)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Checks shape, Hermiticity, unit trace and PSD of every message.
    pub fn validate(&self, s: &TensorNetworkState) -> Result<()> {
        let g = s.graph();
        if self.messages.len() != g.n_directed_edges() {
            return Err(Error::ShapeMismatch(format!(
                "{} messages for {} directed edges",
                self.messages.len(),
                g.n_directed_edges()
            )));
        }
        for de in g.directed_edges() {
            let m = &self.messages[de.id];
            let chi = s.bond_dim(de.from, de.to).unwrap();
            if m.shape() != (chi, chi) {
                return Err(Error::ShapeMismatch(format!(
                    "message {}->{} is {:?}, bond dimension {chi}",
                    de.from,
                    de.to,
                    m.shape()
                )));
            }
            let dev = hermitian_deviation(m);
            if dev > 1e-10 {
                return Err(Error::NotHermitian(dev));
            }
            if (trace(m).re - 1.0).abs() > 1e-10 {
                return Err(Error::Numerical(format!(
                    "message {}->{} has trace {}",
                    de.from,
                    de.to,
                    trace(m)
                )));
            }
            let min = hermitian_eigenvalues(m)?[0];
            if min < -1e-10 {
                return Err(Error::Numerical(format!(
                    "message {}->{} has eigenvalue {min:.3e}",
                    de.from, de.to
                )));
            }
        }
        Ok(())
    }

    /// JSON keyed by `"from->to"`, each message in the tensor format.
    pub fn to_json(&self, g: &Graph) -> BTreeMap<String, TensorJson> {
        g.directed_edges()
            .map(|de| {
                let t = DenseTensor::from_matrix(&self.messages[de.id]);
                (format!("{}->{}", de.from, de.to), TensorJson::from(&t))
            })
            .collect()
    }

    pub fn from_json(g: &Graph, json: &BTreeMap<String, TensorJson>) -> Result<Self> {
        let mut messages = vec![None; g.n_directed_edges()];
        for (key, tj) in json {
            let (from, to) = key
                .split_once("->")
                .and_then(|(a, b)| Some((a.trim().parse().ok()?, b.trim().parse().ok()?)))
                .ok_or_else(|| Error::InvalidArgument(format!("bad message key {key:?}")))?;
            let id = g
                .directed_id(from, to)
                .ok_or_else(|| Error::InvalidArgument(format!("{key} is not an edge")))?;
            messages[id] = Some(DenseTensor::try_from(tj)?.to_matrix()?);
        }
        let messages = messages
            .into_iter()
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| Error::InvalidArgument("missing messages".into()))?;
        Ok(MessageSet { messages })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "seed")]
pub enum MessageInit {
    /// `I/χ` on every directed edge.
    Identity,
    /// `G†G / Tr(G†G)` for a seeded complex Gaussian `G`.
    Random(u64),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schedule {
    /// Every new message is computed from the previous set.
    #[default]
    Synchronous,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BpConfig {
    pub max_steps: usize,
    pub rdm_tolerance: f64,
    pub damping: f64,
    pub schedule: Schedule,
    pub init: MessageInit,
}

impl Default for BpConfig {
    fn default() -> Self {
        BpConfig {
            max_steps: 100,
            rdm_tolerance: 1e-8,
            damping: 0.0,
            schedule: Schedule::Synchronous,
            init: MessageInit::Identity,
        }
    }
}

impl BpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_steps == 0 {
            return Err(Error::InvalidArgument("max_steps must be at least 1".into()));
        }
        if !(self.rdm_tolerance > 0.0) {
            return Err(Error::InvalidArgument("rdm_tolerance must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.damping) {
            return Err(Error::InvalidArgument("damping must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BpStepRecord {
    pub step: usize,
    pub max_rdm_trace_distance: f64,
    pub max_message_delta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BpDiagnostics {
    pub steps_run: usize,
    pub converged: bool,
    pub series: Vec<BpStepRecord>,
}

impl BpDiagnostics {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for rec in &self.series {
            w.serialize(rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn init_messages(s: &TensorNetworkState, init: MessageInit) -> MessageSet {
    let g = s.graph();
    let mut rng = match init {
        MessageInit::Random(seed) => Some(ChaCha8Rng::seed_from_u64(seed)),
        MessageInit::Identity => None,
    };
    let messages = g
        .directed_edges()
        .map(|de| {
            let chi = s.bond_dim(de.from, de.to).unwrap();
            match rng.as_mut() {
                None => identity(chi).scale(1.0 / chi as f64),
                Some(rng) => {
                    let gm = CMatrix::from_fn(chi, chi, |_, _| complex_normal(rng));
                    let gram = gm.adjoint() * gm;
                    let tr = trace(&gram).re;
                    gram.unscale(tr)
                }
            }
        })
        .collect();
    MessageSet { messages }
}

/// Axis labels for clusters of the doubled network.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Leg {
    Ket(usize),
    Bra(usize),
    BondKet(usize),
    BondBra(usize),
    /// A closed leg: ket index already multiplied by the incoming message,
    /// so it pairs directly with the bra.
    Env(usize),
}

/// Ket tensor of site `i` with the message from every neighbor outside
/// `open` multiplied into its leg.
pub(crate) fn absorbed_ket(
    s: &TensorNetworkState,
    msgs: &MessageSet,
    i: usize,
    open: &[usize],
) -> Result<Labeled<Leg>> {
    let g = s.graph();
    let mut t = s.tensor(i).clone();
    let mut labels = vec![Leg::Ket(i)];
    for (leg, &k) in g.neighbors(i).iter().enumerate() {
        if open.contains(&k) {
            labels.push(Leg::BondKet(g.edge_id(i, k).unwrap()));
        } else {
            let id = g.directed_id(k, i).unwrap();
            t = t.contract_axis_matrix(1 + leg, msgs.get(id))?;
            labels.push(Leg::Env(id));
        }
    }
    Ok(Labeled::new(t, labels))
}

pub(crate) fn bra_site(s: &TensorNetworkState, i: usize, open: &[usize]) -> Labeled<Leg> {
    let g = s.graph();
    let mut labels = vec![Leg::Bra(i)];
    for &k in g.neighbors(i) {
        labels.push(if open.contains(&k) {
            Leg::BondBra(g.edge_id(i, k).unwrap())
        } else {
            Leg::Env(g.directed_id(k, i).unwrap())
        });
    }
    Labeled::new(s.tensor(i).conj(), labels)
}

/// Raw (unnormalized) update for directed edge `id`.
fn raw_message(s: &TensorNetworkState, msgs: &MessageSet, id: usize) -> Result<CMatrix> {
    let de = s.graph().directed_edge(id);
    let i = de.from;
    let g = s.graph();
    let leg_j = g.leg(i, de.to).unwrap();
    let mut ket = s.tensor(i).clone();
    for (leg, k) in g.incoming(i).enumerate() {
        if leg != leg_j {
            ket = ket.contract_axis_matrix(1 + leg, msgs.get(k))?;
        }
    }
    let bra = s.tensor(i).conj();
    let pairs: Vec<(usize, usize)> = (0..ket.rank()).filter(|&a| a != 1 + leg_j).map(|a| (a, a)).collect();
    crate::tensor::contract(&ket, &bra, &pairs)?.to_matrix()
}

/// One synchronous BP update of every directed edge. Each output message is
/// Hermitized, normalized to unit trace and mixed with the previous one as
/// `(1 - damping) new + damping old`.
pub fn bp_step(s: &TensorNetworkState, msgs: &MessageSet, damping: f64) -> Result<MessageSet> {
    let g = s.graph();
    let messages = (0..g.n_directed_edges())
        .into_par_iter()
        .map(|id| {
            let raw = hermitize(&raw_message(s, msgs, id)?);
            let tr = trace(&raw).re;
            if !(tr > 0.0) || !tr.is_finite() {
                let de = g.directed_edge(id);
                return Err(Error::Numerical(format!(
                    "message {}->{} has non-positive trace {tr:e}",
                    de.from, de.to
                )));
            }
            let new = raw.unscale(tr);
            Ok(if damping > 0.0 {
                new.scale(1.0 - damping) + msgs.get(id).scale(damping)
            } else {
                new
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MessageSet { messages })
}

#[derive(Clone, Debug, PartialEq)]
pub struct BpRun {
    pub messages: MessageSet,
    pub diagnostics: BpDiagnostics,
}

/// Iterates [`bp_step`] until successive 2-site RDMs agree within the
/// tolerance on every edge, or the step budget runs out.
pub fn run_bp(s: &TensorNetworkState, cfg: &BpConfig) -> Result<BpRun> {
    run_bp_with(s, cfg, init_messages(s, cfg.init), |_, _| Ok(()))
}

/// [`run_bp`] from an explicit starting message set, calling `observe` with
/// the step number and messages after every step.
pub fn run_bp_with(
    s: &TensorNetworkState,
    cfg: &BpConfig,
    start: MessageSet,
    mut observe: impl FnMut(usize, &MessageSet) -> Result<()>,
) -> Result<BpRun> {
    cfg.validate()?;
    let mut msgs = start;
    let mut prev_rdms = edge_rdms(s, &msgs)?;
    let mut series = Vec::new();
    let mut converged = false;
    for step in 1..=cfg.max_steps {
        let next = bp_step(s, &msgs, cfg.damping)?;
        let rdms = edge_rdms(s, &next)?;
        let mut dist: f64 = 0.0;
        for (a, b) in rdms.iter().zip(&prev_rdms) {
            dist = dist.max(rdm_trace_distance(a, b)?);
        }
        series.push(BpStepRecord {
            step,
            max_rdm_trace_distance: dist,
            max_message_delta: next.max_delta(&msgs),
        });
        msgs = next;
        prev_rdms = rdms;
        observe(step, &msgs)?;
        if dist <= cfg.rdm_tolerance {
            converged = true;
            break;
        }
    }
    Ok(BpRun {
        messages: msgs,
        diagnostics: BpDiagnostics {
            steps_run: series.len(),
            converged,
            series,
        },
    })
}

/// Reduced density matrix on a small cluster.
#[derive(Clone, Debug, PartialEq)]
pub struct Rdm {
    pub sites: Vec<usize>,
    pub matrix: CMatrix,
}

impl Rdm {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn from_matrix(sites: Vec<usize>, matrix: CMatrix) -> Self {
        Rdm { sites, matrix }
    }

    /// Eigenvalues with negative parts clamped to zero and renormalized.
    pub fn clamped_spectrum(&self) -> Result<Vec<f64>> {
        let vals = hermitian_eigenvalues(&self.matrix)?;
        let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
        if min < -CLAMP_WARN {
            log::warn!(
                "RDM on sites {:?} has eigenvalue {min:.3e}; clamping to zero",
                self.sites
            );
        }
        let clamped: Vec<f64> = vals.iter().map(|&v| v.max(0.0)).collect();
        let total: f64 = clamped.iter().sum();
        if total <= 0.0 {
            return Err(Error::Numerical("RDM has no positive spectrum".into()));
        }
        Ok(clamped.into_iter().map(|v| v / total).collect())
    }
}

/// BP estimate of the reduced density matrix on `sites` (1 to 3 vertices
/// inducing a connected subgraph). Basis order follows `sites`, first site
/// as the most significant factor.
pub fn rdm(s: &TensorNetworkState, msgs: &MessageSet, sites: &[usize]) -> Result<Rdm> {
    let raw = unnormalized_rdm(s, msgs, sites)?;
    let m = hermitize(&raw);
    let tr = trace(&m).re;
    if !(tr > 0.0) || !tr.is_finite() {
        return Err(Error::Numerical(format!("RDM on {sites:?} has trace {tr:e}")));
    }
    Ok(Rdm {
        sites: sites.to_vec(),
        matrix: m.unscale(tr),
    })
}

pub(crate) fn check_cluster(g: &Graph, sites: &[usize]) -> Result<()> {
    if sites.is_empty() || sites.len() > 3 {
        return Err(Error::InvalidArgument(format!(
            "RDMs cover 1 to 3 sites, got {}",
            sites.len()
        )));
    }
    if sites.iter().any(|&v| v >= g.n_vertices()) {
        return Err(Error::InvalidArgument(format!("site out of range in {sites:?}")));
    }
    for (i, a) in sites.iter().enumerate() {
        if sites[i + 1..].contains(a) {
            return Err(Error::InvalidArgument(format!("repeated site in {sites:?}")));
        }
    }
    if !g.induces_connected(sites) {
        return Err(Error::Disconnected(sites.to_vec()));
    }
    Ok(())
}

/// Contraction behind [`rdm`] before Hermitization and normalization.
pub(crate) fn unnormalized_rdm(s: &TensorNetworkState, msgs: &MessageSet, sites: &[usize]) -> Result<CMatrix> {
    check_cluster(s.graph(), sites)?;
    let mut parts = Vec::with_capacity(2 * sites.len());
    for &i in sites {
        parts.push(absorbed_ket(s, msgs, i, sites)?);
        parts.push(bra_site(s, i, sites));
    }
    let net = contract_all(&parts)?;
    let order: Vec<Leg> = sites
        .iter()
        .map(|&i| Leg::Ket(i))
        .chain(sites.iter().map(|&i| Leg::Bra(i)))
        .collect();
    let t = net.permute_to(&order)?;
    let dim = s.phys_dim().pow(sites.len() as u32);
    DenseTensor::new(vec![dim, dim], t.into_data())?.to_matrix()
}

/// 2-site RDMs of every edge in graph order.
pub fn edge_rdms(s: &TensorNetworkState, msgs: &MessageSet) -> Result<Vec<Rdm>> {
    s.graph()
        .edges()
        .par_iter()
        .map(|&(a, b)| rdm(s, msgs, &[a, b]))
        .collect()
}

pub fn site_rdms(s: &TensorNetworkState, msgs: &MessageSet) -> Result<Vec<Rdm>> {
    (0..s.graph().n_vertices())
        .into_par_iter()
        .map(|a| rdm(s, msgs, &[a]))
        .collect()
}

/// `Re Tr(ρ op)` for Hermitian `op`.
pub fn expectation(rho: &Rdm, op: &CMatrix) -> Result<f64> {
    if op.shape() != rho.matrix.shape() {
        return Err(Error::ShapeMismatch(format!(
            "operator {:?} vs RDM {:?}",
            op.shape(),
            rho.matrix.shape()
        )));
    }
    let scale = op.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let dev = hermitian_deviation(op);
    if dev > 1e-10 * scale {
        return Err(Error::NotHermitian(dev));
    }
    let value = (&rho.matrix * op).trace();
    if value.im.abs() > 1e-8 * scale {
        return Err(Error::Numerical(format!("expectation has imaginary part {:e}", value.im)));
    }
    Ok(value.re)
}

/// Von Neumann entropy (natural log) after clamping negative eigenvalues.
pub fn entanglement_entropy(rho: &Rdm) -> Result<f64> {
    Ok(rho
        .clamped_spectrum()?
        .into_iter()
        .filter(|&l| l > ENTROPY_CUTOFF)
        .map(|l| -l * l.ln())
        .sum())
}

/// `½ Σ |eig(ρ1 − ρ2)|`.
pub fn rdm_trace_distance(r1: &Rdm, r2: &Rdm) -> Result<f64> {
    if r1.matrix.shape() != r2.matrix.shape() {
        return Err(Error::ShapeMismatch(format!(
            "{:?} vs {:?}",
            r1.matrix.shape(),
            r2.matrix.shape()
        )));
    }
    let diff = hermitize(&(&r1.matrix - &r2.matrix));
    Ok(0.5 * hermitian_eigenvalues(&diff)?.iter().map(|l| l.abs()).sum::<f64>())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observables {
    pub mean_abs_z: f64,
    pub mean_z: f64,
    pub mean_x: f64,
    pub mean_y: f64,
    pub edge_entropy: f64,
    pub mean_zz: f64,
}

/// Site- and edge-averaged Pauli expectations and edge entropy (qubits).
pub fn site_averaged_observables(s: &TensorNetworkState, msgs: &MessageSet) -> Result<Observables> {
    if s.phys_dim() != 2 {
        return Err(Error::InvalidArgument("Pauli observables need d = 2".into()));
    }
    let (x, y, z) = (pauli_x(), pauli_y(), pauli_z());
    let zz = kron(&z, &z);
    let sites = site_rdms(s, msgs)?;
    let n = sites.len() as f64;
    let mut obs = Observables {
        mean_abs_z: 0.0,
        mean_z: 0.0,
        mean_x: 0.0,
        mean_y: 0.0,
        edge_entropy: 0.0,
        mean_zz: 0.0,
    };
    for r in &sites {
        let zv = expectation(r, &z)?;
        obs.mean_abs_z += zv.abs() / n;
        obs.mean_z += zv / n;
        obs.mean_x += expectation(r, &x)? / n;
        obs.mean_y += expectation(r, &y)? / n;
    }
    let edges = edge_rdms(s, msgs)?;
    if !edges.is_empty() {
        let m = edges.len() as f64;
        for r in &edges {
            obs.edge_entropy += entanglement_entropy(r)? / m;
            obs.mean_zz += expectation(r, &zz)? / m;
        }
    }
    Ok(obs)
}

/// Per-site `⟨op⟩` for a single-site operator.
pub fn site_expectations(s: &TensorNetworkState, msgs: &MessageSet, op: &CMatrix) -> Result<Vec<f64>> {
    site_rdms(s, msgs)?.iter().map(|r| expectation(r, op)).collect()
}

pub fn pure_rdm(sites: Vec<usize>, v: &[f64]) -> Rdm {
    let col = CMatrix::from_iterator(v.len(), 1, v.iter().map(|&x| c64(x, 0.0)));
    Rdm {
        sites,
        matrix: &col * col.adjoint(),
    }
}
