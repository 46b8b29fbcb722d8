//! Experiment driver behind the `tnbp` binary. Every subcommand resolves its
//! arguments into a serializable config, writes that config to
//! `<out-dir>/config.json`, and emits CSV for curves and JSON for objects.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::bp::{
    bp_step, init_messages, rdm_trace_distance, run_bp, edge_rdms, site_averaged_observables,
    site_expectations, BpConfig, MessageInit, Schedule,
};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::hamiltonian::ModelParams;
use crate::oracles::{
    classical_exact_expectations, classical_ising_mc_with, ed_observables, exact_diagonalize,
    vector_fidelity, vector_ground_space_overlap, McConfig, McStart, EdObservables,
    MAX_ED_VERTICES, MAX_ENUMERATION_VERTICES,
};
use crate::states::{graph_state, product_state, random_state, square_root_state, TensorNetworkState};
use crate::tensor::{c64, pauli_x, pauli_z};
use crate::variational::{
    sweep, variational_prepare_observed, initial_state, write_sweep_csv, VarConfig, VarInit,
};

pub const CONFIG_FILE: &str = "config.json";

#[derive(Parser, Debug)]
#[command(name = "tnbp", version, about = "Belief-propagation tensor network experiments")]
pub struct Cli {
    /// Run a previously written config.json instead of parsing flags.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed for every random choice of the run.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Subcommand, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Generate a random regular graph or a tree.
    GraphGen(GraphGenConfig),
    /// Run BP on a state and report messages and observables.
    BpRun(BpRunConfig),
    /// Square-root-state observables over an inverse-temperature grid,
    /// checked against Monte Carlo and, when small, exact enumeration.
    SqrtSweep(SqrtSweepConfig),
    /// Graph-state observables after each BP step.
    GraphstateCheck(GraphStateCheckConfig),
    /// Variational ground-state preparation.
    VarPrep(VarPrepConfig),
    /// Transverse-field Ising scan with restarts.
    TfimSweep(TfimSweepConfig),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::GraphGen(_) => "graph-gen",
            Command::BpRun(_) => "bp-run",
            Command::SqrtSweep(_) => "sqrt-sweep",
            Command::GraphstateCheck(_) => "graphstate-check",
            Command::VarPrep(_) => "var-prep",
            Command::TfimSweep(_) => "tfim-sweep",
        }
    }
}

/// What `config.json` holds: the seed plus the fully resolved command.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub experiment: Command,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSource {
    /// Graph JSON file; when given, the generation flags are ignored.
    #[arg(long)]
    pub graph: Option<PathBuf>,
    /// Vertex count of a generated random regular graph.
    #[arg(long, default_value_t = 20)]
    pub n: usize,
    /// Degree of a generated random regular graph.
    #[arg(long, default_value_t = 3)]
    pub r: usize,
    /// Generation seed (defaults to the master seed).
    #[arg(long)]
    pub graph_seed: Option<u64>,
}

impl GraphSource {
    fn resolve(&mut self, seed: u64) {
        if self.graph.is_none() && self.graph_seed.is_none() {
            self.graph_seed = Some(seed);
        }
    }

    pub fn build(&self) -> Result<Graph> {
        match &self.graph {
            Some(path) => Graph::load(path),
            None => Graph::random_regular(self.n, self.r, self.graph_seed.unwrap_or(0)),
        }
    }
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphGenConfig {
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 3)]
    pub r: usize,
    /// Build a complete tree instead of a random regular graph.
    #[arg(long)]
    pub tree: bool,
    #[arg(long, default_value_t = 2)]
    pub branching: usize,
    /// Output graph file, relative to the output directory.
    #[arg(long, default_value = "graph.json")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 6)]
    pub max_cycle_len: usize,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StateKind {
    GraphState,
    Sqrt,
    Random,
    Plus,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BpInitKind {
    Identity,
    Random,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BpArgs {
    #[arg(long, default_value_t = 100)]
    pub max_steps: usize,
    /// Convergence threshold on the largest 2-site RDM trace distance
    /// between steps.
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, default_value_t = 0.0)]
    pub damping: f64,
    #[arg(long, value_enum, default_value_t = BpInitKind::Identity)]
    pub bp_init: BpInitKind,
}

impl BpArgs {
    fn to_config(&self, seed: u64) -> BpConfig {
        BpConfig {
            max_steps: self.max_steps,
            rdm_tolerance: self.tol,
            damping: self.damping,
            schedule: Schedule::Synchronous,
            init: match self.bp_init {
                BpInitKind::Identity => MessageInit::Identity,
                BpInitKind::Random => MessageInit::Random(seed),
            },
        }
    }
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BpRunConfig {
    #[command(flatten)]
    pub graph: GraphSource,
    /// State JSON file; when given, `--kind` is ignored.
    #[arg(long)]
    pub state: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = StateKind::GraphState)]
    pub kind: StateKind,
    #[arg(long, default_value_t = 0.5)]
    pub beta: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub j: f64,
    /// Bond dimension of a random state.
    #[arg(long, default_value_t = 2)]
    pub chi: usize,
    #[command(flatten)]
    pub bp: BpArgs,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SqrtSweepConfig {
    #[command(flatten)]
    pub graph: GraphSource,
    #[arg(long, default_value_t = 0.1)]
    pub beta_min: f64,
    #[arg(long, default_value_t = 1.2)]
    pub beta_max: f64,
    #[arg(long, default_value_t = 0.1)]
    pub beta_step: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub j: f64,
    #[arg(long, default_value_t = 1000)]
    pub max_steps: usize,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    /// `random` lets BP settle into a symmetry-broken fixed point in the
    /// ordered phase; `identity` keeps the symmetric one where it is stable.
    #[arg(long, value_enum, default_value_t = BpInitKind::Identity)]
    pub bp_init: BpInitKind,
    /// Total Metropolis sweeps per temperature, burn-in included.
    #[arg(long, default_value_t = 101_000)]
    pub sweeps: usize,
    #[arg(long, default_value_t = 1000)]
    pub burn_in: usize,
    #[arg(long, default_value_t = 50)]
    pub batches: usize,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphStateCheckConfig {
    #[command(flatten)]
    pub graph: GraphSource,
    /// Build a complete tree with this many vertices instead.
    #[arg(long)]
    pub tree: Option<usize>,
    #[arg(long, default_value_t = 10)]
    pub steps: usize,
    #[arg(long, value_enum, default_value_t = BpInitKind::Identity)]
    pub bp_init: BpInitKind,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    MixedFieldIsing,
    Tfim,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelArgs {
    #[arg(long, value_enum, default_value_t = ModelKind::MixedFieldIsing)]
    pub model: ModelKind,
    #[arg(long, default_value_t = -1.0, allow_negative_numbers = true)]
    pub jzz: f64,
    /// Transverse field. The mixed-field model adds `hx X`; the TFIM uses
    /// `−hx X`.
    #[arg(long, default_value_t = -2.0, allow_negative_numbers = true)]
    pub hx: f64,
    #[arg(long, default_value_t = -0.5, allow_negative_numbers = true)]
    pub hz: f64,
}

impl ModelArgs {
    pub fn params(&self) -> ModelParams {
        match self.model {
            ModelKind::MixedFieldIsing => ModelParams::MixedFieldIsing {
                jzz: self.jzz,
                hx: self.hx,
                hz: self.hz,
            },
            ModelKind::Tfim => ModelParams::Tfim { hx: self.hx },
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitKind {
    /// `|+⟩` on every site.
    Plus,
    /// `|0⟩` on every site.
    Up,
    /// `cos(π/8)|0⟩ + sin(π/8)|1⟩` on every site.
    Tilted,
    Random,
    Sqrt,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VarArgs {
    #[arg(long, default_value_t = 100)]
    pub t_var: usize,
    #[arg(long, default_value_t = 5)]
    pub t_bp: usize,
    #[arg(long, default_value_t = 10)]
    pub n_gd: usize,
    #[arg(long, default_value_t = 0.01)]
    pub gamma: f64,
    #[arg(long, default_value_t = 2)]
    pub chi: usize,
    #[arg(long, value_enum)]
    pub init: Option<InitKind>,
    /// Inverse temperature of a square-root-state initialization.
    #[arg(long, default_value_t = 0.3)]
    pub init_beta: f64,
    #[arg(long, default_value_t = 1e-2)]
    pub noise: f64,
    #[arg(long, default_value_t = 0.0)]
    pub var_damping: f64,
    #[arg(long, default_value_t = true, action = ArgAction::Set)]
    pub strict_descent: bool,
}

impl VarArgs {
    fn resolve(&mut self, default: InitKind) {
        self.init.get_or_insert(default);
    }

    pub fn to_config(&self, seed: u64) -> VarConfig {
        let init = match self.init.unwrap_or(InitKind::Plus) {
            InitKind::Plus => VarInit::Product {
                local: vec![c64(FRAC_1_SQRT_2, 0.0), c64(FRAC_1_SQRT_2, 0.0)],
            },
            InitKind::Up => VarInit::Product {
                local: vec![c64(1.0, 0.0), c64(0.0, 0.0)],
            },
            InitKind::Tilted => VarInit::Product {
                local: vec![c64((PI / 8.0).cos(), 0.0), c64((PI / 8.0).sin(), 0.0)],
            },
            InitKind::Random => VarInit::Random { seed },
            InitKind::Sqrt => VarInit::SqrtState {
                beta: self.init_beta,
                j: 1.0,
            },
        };
        VarConfig {
            t_var: self.t_var,
            t_bp: self.t_bp,
            n_gd: self.n_gd,
            gamma: self.gamma,
            chi: self.chi,
            init,
            noise: self.noise,
            seed,
            damping: self.var_damping,
            strict_descent: self.strict_descent,
            ..VarConfig::default()
        }
    }
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VarPrepConfig {
    #[command(flatten)]
    pub graph: GraphSource,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub var: VarArgs,
    /// Compare with exact diagonalization (at most 14 vertices).
    #[arg(long)]
    pub oracle: bool,
    /// Also write the final state as JSON.
    #[arg(long)]
    pub save_state: bool,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TfimSweepConfig {
    #[command(flatten)]
    pub graph: GraphSource,
    /// Explicit field values; otherwise the min/max/step grid is used.
    #[arg(long = "hx-values", value_delimiter = ',')]
    pub hx_values: Vec<f64>,
    #[arg(long, default_value_t = 0.5)]
    pub hx_min: f64,
    #[arg(long, default_value_t = 4.0)]
    pub hx_max: f64,
    #[arg(long, default_value_t = 0.25)]
    pub hx_step: f64,
    #[arg(long, default_value_t = 3)]
    pub restarts: usize,
    #[command(flatten)]
    pub var: VarArgs,
    /// Add exact-diagonalization columns (at most 14 vertices).
    #[arg(long)]
    pub oracle: bool,
}

/// Inclusive grid `min, min + step, …` up to `max` (with a small tolerance so
/// that decimal steps land on `max`).
pub fn grid(min: f64, max: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || max < min {
        return Err(Error::InvalidArgument(format!("bad grid {min}..{max} step {step}")));
    }
    let count = ((max - min) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|k| min + step * k as f64).collect())
}

/// Parses arguments, applies the thread setting and runs the command.
pub fn run(cli: Cli) -> Result<()> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(Error::InvalidArgument("threads must be at least 1".into()));
        }
        // A second call within one process (tests) keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    let config = resolve(&cli)?;
    execute(&config, &cli.out_dir)
}

/// Merges `--config`, `--seed` and the subcommand into one resolved config.
pub fn resolve(cli: &Cli) -> Result<ExperimentConfig> {
    let mut config = match (&cli.config, &cli.command) {
        (Some(path), cmd) => {
            let text = fs::read_to_string(path)?;
            let cfg: ExperimentConfig = serde_json::from_str(&text)?;
            if let Some(cmd) = cmd {
                if cmd.name() != cfg.experiment.name() {
                    return Err(Error::InvalidArgument(format!(
                        "config file is for {}, not {}",
                        cfg.experiment.name(),
                        cmd.name()
                    )));
                }
            }
            cfg
        }
        (None, Some(cmd)) => ExperimentConfig {
            seed: 0,
            experiment: cmd.clone(),
        },
        (None, None) => return Err(Error::InvalidArgument("no subcommand or --config given".into())),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    let seed = config.seed;
    match &mut config.experiment {
        Command::GraphGen(_) => {}
        Command::BpRun(c) => c.graph.resolve(seed),
        Command::SqrtSweep(c) => c.graph.resolve(seed),
        Command::GraphstateCheck(c) => c.graph.resolve(seed),
        Command::VarPrep(c) => {
            c.graph.resolve(seed);
            c.var.resolve(InitKind::Plus);
        }
        Command::TfimSweep(c) => {
            c.graph.resolve(seed);
            c.var.resolve(InitKind::Tilted);
        }
    }
    Ok(config)
}

/// Runs a resolved config, writing all outputs into `out_dir`.
pub fn execute(config: &ExperimentConfig, out_dir: &Path) -> Result<()> {
    fs::create_dir_all(out_dir)?;
    fs::write(out_dir.join(CONFIG_FILE), serde_json::to_string_pretty(config)?)?;
    let seed = config.seed;
    match &config.experiment {
        Command::GraphGen(c) => graph_gen(c, seed, out_dir),
        Command::BpRun(c) => bp_run(c, seed, out_dir),
        Command::SqrtSweep(c) => sqrt_sweep(c, seed, out_dir),
        Command::GraphstateCheck(c) => graphstate_check(c, seed, out_dir),
        Command::VarPrep(c) => var_prep(c, seed, out_dir),
        Command::TfimSweep(c) => tfim_sweep(c, seed, out_dir),
    }
}

fn csv_writer(path: PathBuf) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::Writer::from_writer(BufWriter::new(File::create(path)?)))
}

fn write_json<T: Serialize>(path: PathBuf, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

fn graph_gen(c: &GraphGenConfig, seed: u64, out: &Path) -> Result<()> {
    let g = if c.tree {
        Graph::build_tree(c.n, c.branching)?
    } else {
        Graph::random_regular(c.n, c.r, seed)?
    };
    g.save(out.join(&c.out))?;
    let d = g.diagnostics(c.max_cycle_len)?;
    let mut w = csv_writer(out.join("graph_diagnostics.csv"))?;
    w.write_record(["metric", "value"])?;
    w.write_record(["n_vertices".to_string(), d.n_vertices.to_string()])?;
    w.write_record(["n_edges".to_string(), d.n_edges.to_string()])?;
    w.write_record(["is_tree".to_string(), g.is_tree().to_string()])?;
    w.write_record([
        "diameter".to_string(),
        d.diameter.map_or("inf".to_string(), |x| x.to_string()),
    ])?;
    w.write_record([
        "expansion".to_string(),
        d.expansion.map_or(String::new(), |x| x.value().to_string()),
    ])?;
    for (deg, count) in &d.degree_histogram {
        w.write_record([format!("degree_{deg}"), count.to_string()])?;
    }
    for len in 3..=c.max_cycle_len {
        let count = d.cycle_counts.get(&len).copied().unwrap_or(0);
        w.write_record([format!("cycles_{len}"), count.to_string()])?;
    }
    w.flush()?;
    log::info!("graph with {} vertices and {} edges", g.n_vertices(), g.n_edges());
    Ok(())
}

fn bp_run(c: &BpRunConfig, seed: u64, out: &Path) -> Result<()> {
    let state = match &c.state {
        Some(path) => TensorNetworkState::load(path)?,
        None => {
            let g = c.graph.build()?;
            g.save(out.join("graph.json"))?;
            match c.kind {
                StateKind::GraphState => graph_state(&g)?,
                StateKind::Sqrt => square_root_state(&g, c.beta, c.j)?,
                StateKind::Random => random_state(&g, 2, c.chi, seed)?,
                StateKind::Plus => product_state(&g, &[c64(FRAC_1_SQRT_2, 0.0), c64(FRAC_1_SQRT_2, 0.0)])?,
            }
        }
    };
    let run = run_bp(&state, &c.bp.to_config(seed))?;
    let file = BufWriter::new(File::create(out.join("bp_diagnostics.csv"))?);
    run.diagnostics.write_csv(file)?;
    write_json(out.join("messages.json"), &run.messages.to_json(state.graph()))?;
    #[derive(Serialize)]
    struct Summary {
        converged: bool,
        steps_run: usize,
        observables: Option<crate::bp::Observables>,
    }
    let observables = if state.phys_dim() == 2 {
        Some(site_averaged_observables(&state, &run.messages)?)
    } else {
        None
    };
    write_json(
        out.join("observables.json"),
        &Summary {
            converged: run.diagnostics.converged,
            steps_run: run.diagnostics.steps_run,
            observables,
        },
    )?;
    log::info!(
        "BP {} after {} steps",
        if run.diagnostics.converged { "converged" } else { "did not converge" },
        run.diagnostics.steps_run
    );
    Ok(())
}

/// One row of a square-root-state sweep.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SqrtSweepRow {
    pub beta: f64,
    pub bp_mean_abs_z: f64,
    pub mc_mean_abs_z: f64,
    pub mc_err: f64,
    pub bp_mean_x: f64,
    pub bp_edge_entropy: f64,
    pub bp_converged: bool,
    pub bp_steps: usize,
    /// `max_a |⟨Z_a⟩_BP − ⟨Z_a⟩_exact|`, when enumeration is feasible.
    pub exact_max_dev_z: Option<f64>,
    pub exact_max_dev_x: Option<f64>,
}

/// BP, Monte Carlo and (for at most 16 vertices) enumeration at one
/// temperature. MC uses seed `seed` for every temperature.
pub fn sqrt_sweep_row(g: &Graph, beta: f64, c: &SqrtSweepConfig, seed: u64) -> Result<SqrtSweepRow> {
    let s = square_root_state(g, beta, c.j)?;
    let bp_cfg = BpArgs {
        max_steps: c.max_steps,
        tol: c.tol,
        damping: 0.0,
        bp_init: c.bp_init,
    }
    .to_config(seed);
    let run = run_bp(&s, &bp_cfg)?;
    let obs = site_averaged_observables(&s, &run.messages)?;
    let mc = classical_ising_mc_with(
        g,
        &McConfig {
            beta,
            j: c.j,
            sweeps: c.sweeps,
            burn_in: c.burn_in,
            batches: c.batches,
            seed,
            start: McStart::Cold,
        },
    )?;
    let (mut dz, mut dx) = (None, None);
    if g.n_vertices() <= MAX_ENUMERATION_VERTICES {
        let ex = classical_exact_expectations(g, beta, c.j)?;
        let z = site_expectations(&s, &run.messages, &pauli_z())?;
        let x = site_expectations(&s, &run.messages, &pauli_x())?;
        let max_dev = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        dz = Some(max_dev(&z, &ex.z));
        dx = Some(max_dev(&x, &ex.x));
    }
    Ok(SqrtSweepRow {
        beta,
        bp_mean_abs_z: obs.mean_abs_z,
        mc_mean_abs_z: mc.mean_abs_magnetization,
        mc_err: mc.mean_abs_magnetization_err,
        bp_mean_x: obs.mean_x,
        bp_edge_entropy: obs.edge_entropy,
        bp_converged: run.diagnostics.converged,
        bp_steps: run.diagnostics.steps_run,
        exact_max_dev_z: dz,
        exact_max_dev_x: dx,
    })
}

fn sqrt_sweep(c: &SqrtSweepConfig, seed: u64, out: &Path) -> Result<()> {
    use rayon::prelude::*;
    let g = c.graph.build()?;
    g.save(out.join("graph.json"))?;
    let betas = grid(c.beta_min, c.beta_max, c.beta_step)?;
    let rows: Vec<SqrtSweepRow> = betas
        .par_iter()
        .map(|&beta| sqrt_sweep_row(&g, beta, c, seed))
        .collect::<Result<_>>()?;
    let mut w = csv_writer(out.join("sqrt_sweep.csv"))?;
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush()?;
    if let (Some(z), Some(x)) = (
        rows.iter().filter_map(|r| r.exact_max_dev_z).reduce(f64::max),
        rows.iter().filter_map(|r| r.exact_max_dev_x).reduce(f64::max),
    ) {
        log::info!("largest deviation from enumeration: Z {z:.3e}, X {x:.3e}");
        #[derive(Serialize)]
        struct Report {
            max_dev_z: f64,
            max_dev_x: f64,
        }
        write_json(out.join("exact_deviation.json"), &Report { max_dev_z: z, max_dev_x: x })?;
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GraphStateRow {
    pub step: usize,
    pub mean_x: f64,
    pub mean_y: f64,
    pub mean_z: f64,
    pub edge_entropy: f64,
    /// Largest 2-site RDM change from the previous step (empty at step 0).
    pub max_rdm_trace_distance: Option<f64>,
}

/// Graph-state observables at BP steps `0..=steps`.
pub fn graphstate_rows(g: &Graph, steps: usize, init: MessageInit) -> Result<Vec<GraphStateRow>> {
    let s = graph_state(g)?;
    let mut msgs = init_messages(&s, init);
    let mut prev = edge_rdms(&s, &msgs)?;
    let mut rows = Vec::with_capacity(steps + 1);
    for step in 0..=steps {
        let mut dist = None;
        if step > 0 {
            msgs = bp_step(&s, &msgs, 0.0)?;
            let now = edge_rdms(&s, &msgs)?;
            let mut d: f64 = 0.0;
            for (a, b) in now.iter().zip(&prev) {
                d = d.max(rdm_trace_distance(a, b)?);
            }
            dist = Some(d);
            prev = now;
        }
        let obs = site_averaged_observables(&s, &msgs)?;
        rows.push(GraphStateRow {
            step,
            mean_x: obs.mean_x,
            mean_y: obs.mean_y,
            mean_z: obs.mean_z,
            edge_entropy: obs.edge_entropy,
            max_rdm_trace_distance: dist,
        });
    }
    Ok(rows)
}

fn graphstate_check(c: &GraphStateCheckConfig, seed: u64, out: &Path) -> Result<()> {
    let g = match c.tree {
        Some(n) => Graph::build_tree(n, 2)?,
        None => c.graph.build()?,
    };
    g.save(out.join("graph.json"))?;
    let init = match c.bp_init {
        BpInitKind::Identity => MessageInit::Identity,
        BpInitKind::Random => MessageInit::Random(seed),
    };
    let mut w = csv_writer(out.join("graphstate_check.csv"))?;
    for r in graphstate_rows(&g, c.steps, init)? {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct VarRow {
    iteration: usize,
    energy: f64,
    energy_density: f64,
    mean_abs_z: f64,
    mean_x: f64,
    mean_zz: f64,
    gd_start: f64,
    gd_end: f64,
    ed_e0: Option<f64>,
    fidelity: Option<f64>,
    ground_space_overlap: Option<f64>,
}

#[derive(Serialize)]
struct VarSummary {
    final_energy: f64,
    energy_density: f64,
    converged: bool,
    final_bp_converged: bool,
    observables: crate::bp::Observables,
    ed: Option<EdObservables>,
    relative_error: Option<f64>,
    fidelity: Option<f64>,
    ground_space_overlap: Option<f64>,
}

fn var_prep(c: &VarPrepConfig, seed: u64, out: &Path) -> Result<()> {
    let g = c.graph.build()?;
    g.save(out.join("graph.json"))?;
    let h = c.model.params().build(&g)?;
    let cfg = c.var.to_config(seed);
    let n = g.n_vertices();
    let ed = if c.oracle {
        if n > MAX_ED_VERTICES {
            return Err(Error::TooLarge {
                what: "vertex count for the exact oracle",
                limit: MAX_ED_VERTICES,
                got: n,
            });
        }
        Some(exact_diagonalize(&h)?)
    } else {
        None
    };
    let mut rows = Vec::new();
    let trace = variational_prepare_observed(initial_state(&g, &cfg)?, &h, &cfg, |rec, s| {
        let (mut fid, mut gso) = (None, None);
        if let Some(ed) = &ed {
            let psi = s.to_statevector()?;
            fid = Some(vector_fidelity(&psi, &ed.vectors[0])?);
            gso = Some(vector_ground_space_overlap(&psi, ed)?);
        }
        rows.push(VarRow {
            iteration: rec.iteration,
            energy: rec.energy,
            energy_density: rec.energy / n as f64,
            mean_abs_z: rec.mean_abs_z,
            mean_x: rec.mean_x,
            mean_zz: rec.mean_zz,
            gd_start: rec.gd_start,
            gd_end: rec.gd_end,
            ed_e0: ed.as_ref().map(|e| e.energies[0]),
            fidelity: fid,
            ground_space_overlap: gso,
        });
        Ok(())
    })?;
    let mut w = csv_writer(out.join("var_trace.csv"))?;
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush()?;
    let mut summary = VarSummary {
        final_energy: trace.final_energy,
        energy_density: trace.final_energy / n as f64,
        converged: trace.converged(),
        final_bp_converged: trace.final_bp_converged,
        observables: trace.final_observables,
        ed: None,
        relative_error: None,
        fidelity: None,
        ground_space_overlap: None,
    };
    if let Some(ed) = &ed {
        let psi = trace.final_state.to_statevector()?;
        summary.ed = Some(ed_observables(&g, ed)?);
        summary.relative_error = Some((trace.final_energy - ed.energies[0]).abs() / ed.energies[0].abs());
        summary.fidelity = Some(vector_fidelity(&psi, &ed.vectors[0])?);
        summary.ground_space_overlap = Some(vector_ground_space_overlap(&psi, ed)?);
    }
    write_json(out.join("var_summary.json"), &summary)?;
    if c.save_state {
        trace.final_state.save(out.join("final_state.json"))?;
    }
    log::info!("final energy {:.10}", trace.final_energy);
    Ok(())
}

#[derive(Serialize)]
struct TfimSummaryRow {
    hx: f64,
    mean_abs_z: f64,
    mean_x: f64,
    mean_zz: f64,
    energy_density: f64,
    abs_z_spread: f64,
    /// Final mean |⟨Z⟩| of each restart, `;`-separated.
    restart_abs_z: String,
    ed_energy_density: Option<f64>,
    ed_mean_x: Option<f64>,
    ed_mean_zz: Option<f64>,
    ed_mean_abs_z_broken: Option<f64>,
}

fn tfim_sweep(c: &TfimSweepConfig, seed: u64, out: &Path) -> Result<()> {
    let g = c.graph.build()?;
    g.save(out.join("graph.json"))?;
    let n = g.n_vertices();
    if c.oracle && n > MAX_ED_VERTICES {
        return Err(Error::TooLarge {
            what: "vertex count for the exact oracle",
            limit: MAX_ED_VERTICES,
            got: n,
        });
    }
    let hx = if c.hx_values.is_empty() {
        grid(c.hx_min, c.hx_max, c.hx_step)?
    } else {
        c.hx_values.clone()
    };
    let cfg = c.var.to_config(seed);
    let res = sweep(&g, &hx, &cfg, c.restarts)?;
    write_sweep_csv(&res, n, BufWriter::new(File::create(out.join("tfim_sweep.csv"))?))?;
    let mut w = csv_writer(out.join("tfim_summary.csv"))?;
    for p in &res.points {
        let ed = if c.oracle {
            let h = crate::hamiltonian::transverse_field_ising(&g, p.hx)?;
            Some(ed_observables(&g, &exact_diagonalize(&h)?)?)
        } else {
            None
        };
        w.serialize(TfimSummaryRow {
            hx: p.hx,
            mean_abs_z: p.mean_abs_z,
            mean_x: p.mean_x,
            mean_zz: p.mean_zz,
            energy_density: p.energy_density,
            abs_z_spread: p.abs_z_spread,
            restart_abs_z: p
                .per_restart_abs_z
                .iter()
                .map(|z| z.to_string())
                .collect::<Vec<_>>()
                .join(";"),
            ed_energy_density: ed.map(|e| e.e0 / n as f64),
            ed_mean_x: ed.map(|e| e.mean_x),
            ed_mean_zz: ed.map(|e| e.mean_zz),
            ed_mean_abs_z_broken: ed.map(|e| e.mean_abs_z_broken),
        })?;
    }
    w.flush()?;
    Ok(())
}
