//! Variational ground states: alternate BP message updates with gradient
//! steps on the site tensors while the messages are held fixed.
//!
//! The energy functional is a sum of per-term quotients `N_t / D_t`. For a
//! term on cluster `C`, `N_t` is the doubled-network contraction of the
//! sites in `C` with the term's operator inserted and the BP messages on all
//! other legs; `D_t` is the same contraction with the identity. Both are
//! sesquilinear in each site tensor, so the Wirtinger derivative with
//! respect to `conj(ψ_i)` is the network with `conj(ψ_i)` removed.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bp::{
    absorbed_ket, bp_step, bra_site, init_messages, run_bp_with, site_averaged_observables,
    unnormalized_rdm, BpConfig, Leg, MessageInit, MessageSet, Observables,
};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::hamiltonian::{transverse_field_ising, Hamiltonian};
use crate::network::{contract_all, Labeled};
use crate::states::{product_state, random_state, square_root_state, TensorNetworkState};
use crate::tensor::{c64, identity, DenseTensor, CMatrix, C64};

/// Energies of the last three outer iterations must agree this well for a
/// run to count as converged.
pub const CONVERGENCE_WINDOW: usize = 3;
pub const CONVERGENCE_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VarInit {
    /// The same single-site vector on every vertex.
    Product { local: Vec<C64> },
    /// Square-root state of the Ising model at inverse temperature `beta`.
    SqrtState { beta: f64, j: f64 },
    /// Seeded random tensors at the target bond dimension.
    Random { seed: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarConfig {
    pub t_var: usize,
    pub t_bp: usize,
    pub n_gd: usize,
    pub gamma: f64,
    pub chi: usize,
    pub init: VarInit,
    /// Standard deviation of the complex Gaussian noise added to the initial
    /// tensors.
    pub noise: f64,
    pub seed: u64,
    pub damping: f64,
    /// Abort when a gradient step raises the fixed-message energy.
    pub strict_descent: bool,
    /// BP run after the last outer iteration, warm-started, that produces
    /// the reported final energy.
    pub final_bp: BpConfig,
}

impl Default for VarConfig {
    fn default() -> Self {
        VarConfig {
            t_var: 20,
            t_bp: 5,
            n_gd: 10,
            gamma: 0.01,
            chi: 2,
            init: VarInit::Random { seed: 0 },
            noise: 1e-2,
            seed: 0,
            damping: 0.0,
            strict_descent: true,
            final_bp: BpConfig {
                max_steps: 200,
                ..BpConfig::default()
            },
        }
    }
}

impl VarConfig {
    pub fn validate(&self) -> Result<()> {
        if self.t_var == 0 || self.t_bp == 0 || self.n_gd == 0 || self.chi == 0 {
            return Err(Error::InvalidArgument(
                "t_var, t_bp, n_gd and chi must all be at least 1".into(),
            ));
        }
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return Err(Error::InvalidArgument("gamma must be positive".into()));
        }
        if !(self.noise >= 0.0) {
            return Err(Error::InvalidArgument("noise must be non-negative".into()));
        }
        if !(0.0..1.0).contains(&self.damping) {
            return Err(Error::InvalidArgument("damping must lie in [0, 1)".into()));
        }
        self.final_bp.validate()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarRecord {
    pub iteration: usize,
    /// BP energy after this iteration's message updates.
    pub energy: f64,
    pub mean_abs_z: f64,
    pub mean_x: f64,
    pub mean_zz: f64,
    /// Fixed-message energy before and after the gradient steps.
    pub gd_start: f64,
    pub gd_end: f64,
}

#[derive(Clone, Debug)]
pub struct VarTrace {
    pub records: Vec<VarRecord>,
    pub final_state: TensorNetworkState,
    pub final_messages: MessageSet,
    pub final_energy: f64,
    pub final_observables: Observables,
    pub final_bp_converged: bool,
}

impl VarTrace {
    /// Whether the last three recorded energies agree within
    /// [`CONVERGENCE_TOL`].
    pub fn converged(&self) -> bool {
        if self.records.len() < CONVERGENCE_WINDOW {
            return false;
        }
        let tail = &self.records[self.records.len() - CONVERGENCE_WINDOW..];
        let lo = tail.iter().map(|r| r.energy).fold(f64::INFINITY, f64::min);
        let hi = tail.iter().map(|r| r.energy).fold(f64::NEG_INFINITY, f64::max);
        hi - lo <= CONVERGENCE_TOL
    }
}

fn check_graphs(s: &TensorNetworkState, h: &Hamiltonian) -> Result<()> {
    if s.graph() != h.graph() {
        return Err(Error::GraphMismatch("state and Hamiltonian live on different graphs".into()));
    }
    if s.phys_dim() != h.phys_dim() {
        return Err(Error::ShapeMismatch(format!(
            "state has d = {}, Hamiltonian d = {}",
            s.phys_dim(),
            h.phys_dim()
        )));
    }
    Ok(())
}

/// Term operator `O(s', s)` as a tensor labeled `[Bra.., Ket..]`.
fn labeled_op(op: &CMatrix, sites: &[usize], d: usize) -> Result<Labeled<Leg>> {
    let t = DenseTensor::from_matrix(op).reshape(vec![d; 2 * sites.len()])?;
    let labels = sites
        .iter()
        .map(|&i| Leg::Bra(i))
        .chain(sites.iter().map(|&i| Leg::Ket(i)))
        .collect();
    Ok(Labeled::new(t, labels))
}

/// BP energy: normalized local expectations summed over vertex and edge
/// terms.
pub fn energy(s: &TensorNetworkState, msgs: &MessageSet, h: &Hamiltonian) -> Result<f64> {
    check_graphs(s, h)?;
    let g = s.graph();
    let vertex: Vec<f64> = (0..g.n_vertices())
        .into_par_iter()
        .map(|a| local_energy(s, msgs, &[a], h.vertex_term(a)))
        .collect::<Result<_>>()?;
    let edge: Vec<f64> = g
        .edges()
        .par_iter()
        .enumerate()
        .map(|(e, &(a, b))| local_energy(s, msgs, &[a, b], h.edge_term(e)))
        .collect::<Result<_>>()?;
    Ok(vertex.iter().sum::<f64>() + edge.iter().sum::<f64>())
}

fn local_energy(s: &TensorNetworkState, msgs: &MessageSet, sites: &[usize], op: &CMatrix) -> Result<f64> {
    let raw = unnormalized_rdm(s, msgs, sites)?;
    let den = raw.trace().re;
    if !(den > 0.0) || !den.is_finite() {
        return Err(Error::ZeroNorm(format!("local norm on {sites:?} is {den:e}")));
    }
    Ok((&raw * op).trace().re / den)
}

struct TermGrad {
    num: f64,
    den: f64,
    g_num: DenseTensor,
    g_den: DenseTensor,
}

/// Numerator, denominator and their derivatives with respect to
/// `conj(ψ_i)` for the term with operator `op` on `sites` (which contain
/// `i`).
fn term_gradient(
    s: &TensorNetworkState,
    msgs: &MessageSet,
    sites: &[usize],
    op: &CMatrix,
    i: usize,
) -> Result<TermGrad> {
    let d = s.phys_dim();
    let mut parts = Vec::with_capacity(2 * sites.len());
    for &k in sites.iter().filter(|&&k| k != i) {
        parts.push(bra_site(s, k, sites));
        parts.push(absorbed_ket(s, msgs, k, sites)?);
    }
    parts.push(absorbed_ket(s, msgs, i, sites)?);
    let env = contract_all(&parts)?;
    let bra = bra_site(s, i, sites);
    let local = d.pow(sites.len() as u32);
    let g_num = env.contract(&labeled_op(op, sites, d)?)?.permute_to(&bra.labels)?;
    let g_den = env
        .contract(&labeled_op(&identity(local), sites, d)?)?
        .permute_to(&bra.labels)?;
    let pair = |g: &DenseTensor| -> f64 {
        bra.tensor
            .data()
            .iter()
            .zip(g.data())
            .map(|(c, z)| c * z)
            .sum::<C64>()
            .re
    };
    let num = pair(&g_num);
    let den = pair(&g_den);
    if !(den > 0.0) || !den.is_finite() {
        return Err(Error::ZeroNorm(format!("local norm on {sites:?} is {den:e}")));
    }
    Ok(TermGrad {
        num,
        den,
        g_num,
        g_den,
    })
}

/// Fixed-message energy and its Wirtinger gradient `G_i = ∂E/∂conj(ψ_i)`
/// per site. With `ψ = x + iy`, `∂E/∂x = 2 Re G` and `∂E/∂y = 2 Im G`.
pub fn energy_and_gradient(
    s: &TensorNetworkState,
    msgs: &MessageSet,
    h: &Hamiltonian,
) -> Result<(f64, Vec<DenseTensor>)> {
    check_graphs(s, h)?;
    let g = s.graph();
    let per_site: Vec<(f64, DenseTensor)> = (0..g.n_vertices())
        .into_par_iter()
        .map(|i| {
            let mut grad = DenseTensor::zeros(s.tensor(i).shape().to_vec());
            let mut e_own = 0.0;
            let mut add = |t: TermGrad, owned: bool| -> Result<()> {
                let ratio = t.num / t.den;
                if owned {
                    e_own += ratio;
                }
                let diff = t.g_num.axpy(c64(-ratio, 0.0), &t.g_den)?;
                grad = grad.axpy(c64(1.0 / t.den, 0.0), &diff)?;
                Ok(())
            };
            add(term_gradient(s, msgs, &[i], h.vertex_term(i), i)?, true)?;
            for &k in g.neighbors(i) {
                let (a, b) = (i.min(k), i.max(k));
                let e = g.edge_id(a, b).unwrap();
                add(term_gradient(s, msgs, &[a, b], h.edge_term(e), i)?, i == a)?;
            }
            Ok((e_own, grad))
        })
        .collect::<Result<_>>()?;
    let energy = per_site.iter().map(|p| p.0).sum();
    Ok((energy, per_site.into_iter().map(|p| p.1).collect()))
}

/// `∂E/∂conj(ψ_i)` of the fixed-message energy functional; see
/// [`energy_and_gradient`].
pub fn energy_gradient(s: &TensorNetworkState, msgs: &MessageSet, h: &Hamiltonian) -> Result<Vec<DenseTensor>> {
    Ok(energy_and_gradient(s, msgs, h)?.1)
}

/// `ψ_i ← ψ_i − γ G_i` on every site.
pub fn gradient_step(s: &TensorNetworkState, grad: &[DenseTensor], gamma: f64) -> Result<TensorNetworkState> {
    let mut out = s.clone();
    for (i, gi) in grad.iter().enumerate() {
        out.set_tensor(i, s.tensor(i).axpy(c64(-gamma, 0.0), gi)?)?;
    }
    Ok(out)
}

/// Rescales every site tensor so that its single-site BP norm under `msgs`
/// is 1. This is a gauge change: states, energies and observables are
/// unaffected, but the curvature of the fixed-message functional no longer
/// depends on how the messages happen to be normalized.
pub fn local_norm_gauge(s: &TensorNetworkState, msgs: &MessageSet) -> Result<TensorNetworkState> {
    let norms: Vec<f64> = (0..s.graph().n_vertices())
        .into_par_iter()
        .map(|i| Ok(unnormalized_rdm(s, msgs, &[i])?.trace().re))
        .collect::<Result<_>>()?;
    let mut out = s.clone();
    for (i, &d) in norms.iter().enumerate() {
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::ZeroNorm(format!("local norm of site {i} is {d:e}")));
        }
        out.set_tensor(i, s.tensor(i).scale(c64(1.0 / d.sqrt(), 0.0)))?;
    }
    Ok(out)
}

/// Initial state for `cfg` on `g`, with site tensors scaled to unit norm.
pub fn initial_state(g: &Graph, cfg: &VarConfig) -> Result<TensorNetworkState> {
    let base = match &cfg.init {
        VarInit::Product { local } => product_state(g, local)?,
        VarInit::SqrtState { beta, j } => square_root_state(g, *beta, *j)?,
        VarInit::Random { seed } => random_state(g, 2, cfg.chi, *seed)?,
    };
    if base.max_bond_dim() > cfg.chi {
        return Err(Error::InvalidArgument(format!(
            "initial state needs bond dimension {}, chi is {}",
            base.max_bond_dim(),
            cfg.chi
        )));
    }
    Ok(base.padded(cfg.chi, cfg.noise, cfg.seed)?.normalized_sites())
}

/// Runs the alternating optimization from the configured initial state.
pub fn variational_prepare(g: &Graph, h: &Hamiltonian, cfg: &VarConfig) -> Result<VarTrace> {
    cfg.validate()?;
    if h.graph() != g {
        return Err(Error::GraphMismatch("Hamiltonian graph differs from the input graph".into()));
    }
    let state = initial_state(g, cfg)?;
    variational_prepare_from(state, h, cfg)
}

/// [`variational_prepare`] from an explicit initial state.
pub fn variational_prepare_from(s: TensorNetworkState, h: &Hamiltonian, cfg: &VarConfig) -> Result<VarTrace> {
    variational_prepare_observed(s, h, cfg, |_, _| Ok(()))
}

/// [`variational_prepare_from`], calling `observe` with each record and the
/// state at the end of that outer iteration.
pub fn variational_prepare_observed(
    mut s: TensorNetworkState,
    h: &Hamiltonian,
    cfg: &VarConfig,
    mut observe: impl FnMut(&VarRecord, &TensorNetworkState) -> Result<()>,
) -> Result<VarTrace> {
    cfg.validate()?;
    check_graphs(&s, h)?;
    let mut msgs = init_messages(&s, MessageInit::Identity);
    let mut records = Vec::with_capacity(cfg.t_var);
    for iteration in 1..=cfg.t_var {
        for _ in 0..cfg.t_bp {
            msgs = bp_step(&s, &msgs, cfg.damping)?;
        }
        s = local_norm_gauge(&s, &msgs)?;
        let obs = site_averaged_observables(&s, &msgs)?;
        let (mut e_prev, mut grad) = energy_and_gradient(&s, &msgs, h)?;
        let gd_start = e_prev;
        for step in 0..cfg.n_gd {
            s = gradient_step(&s, &grad, cfg.gamma)?;
            let (e, gnew) = if step + 1 < cfg.n_gd {
                energy_and_gradient(&s, &msgs, h)?
            } else {
                (energy(&s, &msgs, h)?, Vec::new())
            };
            if cfg.strict_descent && e > e_prev + 1e-10 * e_prev.abs().max(1.0) {
                return Err(Error::StepSize {
                    before: e_prev,
                    after: e,
                    gamma: cfg.gamma,
                });
            }
            e_prev = e;
            grad = gnew;
        }
        log::debug!("iteration {iteration}: E = {gd_start:.10} -> {e_prev:.10}");
        records.push(VarRecord {
            iteration,
            energy: gd_start,
            mean_abs_z: obs.mean_abs_z,
            mean_x: obs.mean_x,
            mean_zz: obs.mean_zz,
            gd_start,
            gd_end: e_prev,
        });
        observe(records.last().unwrap(), &s)?;
    }
    let run = run_bp_with(&s, &cfg.final_bp, msgs, |_, _| Ok(()))?;
    let final_energy = energy(&s, &run.messages, h)?;
    let final_observables = site_averaged_observables(&s, &run.messages)?;
    Ok(VarTrace {
        records,
        final_state: s,
        final_messages: run.messages,
        final_energy,
        final_observables,
        final_bp_converged: run.diagnostics.converged,
    })
}

#[derive(Clone, Debug)]
pub struct SweepRun {
    pub hx: f64,
    pub restart: usize,
    pub trace: VarTrace,
}

/// Restart-aggregated observables at one field value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub hx: f64,
    pub mean_abs_z: f64,
    pub mean_x: f64,
    pub mean_zz: f64,
    pub energy_density: f64,
    /// `max − min` of the final mean `|⟨Z⟩|` across restarts.
    pub abs_z_spread: f64,
    pub per_restart_abs_z: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct SweepResult {
    pub points: Vec<SweepPoint>,
    /// Field-major, restart-minor.
    pub runs: Vec<SweepRun>,
}

/// Transverse-field Ising scan. Restart `k` perturbs the initial state with
/// seed `cfg.seed + k`, so every field value sees the same set of
/// perturbations.
pub fn sweep(g: &Graph, hx_values: &[f64], cfg: &VarConfig, restarts: usize) -> Result<SweepResult> {
    if restarts == 0 {
        return Err(Error::InvalidArgument("restarts must be at least 1".into()));
    }
    cfg.validate()?;
    let jobs: Vec<(f64, usize)> = hx_values
        .iter()
        .flat_map(|&hx| (0..restarts).map(move |k| (hx, k)))
        .collect();
    let runs: Vec<SweepRun> = jobs
        .par_iter()
        .map(|&(hx, restart)| {
            let h = transverse_field_ising(g, hx)?;
            let job_cfg = VarConfig {
                seed: cfg.seed.wrapping_add(restart as u64),
                ..cfg.clone()
            };
            let trace = variational_prepare(g, &h, &job_cfg)?;
            Ok(SweepRun { hx, restart, trace })
        })
        .collect::<Result<_>>()?;
    let n = g.n_vertices() as f64;
    let points = runs
        .chunks(restarts)
        .map(|chunk| {
            let r = chunk.len() as f64;
            let zs: Vec<f64> = chunk.iter().map(|c| c.trace.final_observables.mean_abs_z).collect();
            let lo = zs.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = zs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            SweepPoint {
                hx: chunk[0].hx,
                mean_abs_z: zs.iter().sum::<f64>() / r,
                mean_x: chunk.iter().map(|c| c.trace.final_observables.mean_x).sum::<f64>() / r,
                mean_zz: chunk.iter().map(|c| c.trace.final_observables.mean_zz).sum::<f64>() / r,
                energy_density: chunk.iter().map(|c| c.trace.final_energy).sum::<f64>() / (r * n),
                abs_z_spread: hi - lo,
                per_restart_abs_z: zs,
            }
        })
        .collect();
    Ok(SweepResult { points, runs })
}

#[derive(Serialize)]
struct TraceRow {
    hx: f64,
    restart: usize,
    iteration: usize,
    energy: f64,
    energy_density: f64,
    mean_abs_z: f64,
    mean_x: f64,
    mean_zz: f64,
    converged: bool,
}

/// Per-iteration rows of every sweep run.
pub fn write_sweep_csv<W: Write>(result: &SweepResult, n_vertices: usize, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for run in &result.runs {
        write_trace_rows(&mut w, run.hx, run.restart, &run.trace, n_vertices)?;
    }
    w.flush()?;
    Ok(())
}

/// Per-iteration rows of a single trace, with `hx` and `restart` columns
/// filled in by the caller.
pub fn write_trace_csv<W: Write>(trace: &VarTrace, hx: f64, restart: usize, n_vertices: usize, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    write_trace_rows(&mut w, hx, restart, trace, n_vertices)?;
    w.flush()?;
    Ok(())
}

fn write_trace_rows<W: Write>(
    w: &mut csv::Writer<W>,
    hx: f64,
    restart: usize,
    trace: &VarTrace,
    n_vertices: usize,
) -> Result<()> {
    let converged = trace.converged();
    for r in &trace.records {
        w.serialize(TraceRow {
            hx,
            restart,
            iteration: r.iteration,
            energy: r.energy,
            energy_density: r.energy / n_vertices as f64,
            mean_abs_z: r.mean_abs_z,
            mean_x: r.mean_x,
            mean_zz: r.mean_zz,
            converged,
        })?;
    }
    Ok(())
}
