//! Scenario orchestration: resolve a config, run one or all solvers and
//! write the scalar series, snapshot distributions and provenance.

mod config;
mod output;
mod presets;

use std::time::Instant;

use log::{info, warn};
use serde::Serialize;

pub use config::{
    parse_config, parse_config_with_preset, preset_config, GridSpec, InitialState, Qubit, ReservoirConfig,
    ScenarioConfig, SolverChoice, TruncChoice, DEFAULT_SNAPSHOTS,
};
pub use output::{dist_file_name, postselected_dist_file_name, scalar_header, simulate, write_outputs, Provenance};
pub use presets::{list_presets, parse_preset_name};

use crate::bare::BareCoefficients;
use crate::dressed::{
    compute_rates, compute_w_tensors, dressed_basis, dressed_to_bare, evolve_dme_bare_with, evolve_dme_dressed_with,
    DmeBareRhs, DressedPropagation, RateTable, Reservoir, SpectralDensity, WEvaluation,
};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::gksl::evolve_gksl_with;
use crate::hilbert::TruncationScheme;
use crate::observables::{
    observe, photon_distribution, postselected_distribution, ObservableRecord, PhotonDistribution, PostSelectedRecord,
};
use crate::states::{initial_bare_state, project_to_dressed, FieldState, MAX_AUTO_Q1};

/// Samples buffered before observables are evaluated in parallel.
const OBSERVE_CHUNK: usize = 64;

/// Lower bound on an automatically chosen `Q1`.
pub const AUTO_Q1_FLOOR: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RunKind {
    Gksl,
    DmeDressed(Reservoir),
    DmeBare(Reservoir),
}

impl RunKind {
    /// File tag: `gksl`, `dme_dressed_white`, `dme_bare_ohmic`, ...
    pub fn tag(self) -> String {
        match self {
            RunKind::Gksl => "gksl".into(),
            RunKind::DmeDressed(r) => format!("dme_dressed_{}", r.name()),
            RunKind::DmeBare(r) => format!("dme_bare_{}", r.name()),
        }
    }
}

/// Runs implied by the solver choice. `all` pairs GKSL with both
/// reservoirs, using the dressed solver unless the Hamiltonian is modulated.
pub fn planned_runs(cfg: &ScenarioConfig) -> Vec<RunKind> {
    let own = cfg.reservoir.kind;
    match cfg.solver {
        SolverChoice::Gksl => vec![RunKind::Gksl],
        SolverChoice::DmeDressed => vec![RunKind::DmeDressed(own)],
        SolverChoice::DmeBare => vec![RunKind::DmeBare(own)],
        SolverChoice::All => {
            let dme = if cfg.model.is_modulated() { RunKind::DmeBare } else { RunKind::DmeDressed };
            vec![RunKind::Gksl, dme(Reservoir::White), dme(Reservoir::Ohmic)]
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RunDiagnostics {
    pub max_trace_error: f64,
    /// Largest population of the top Fock level over the run.
    pub max_boundary_population: f64,
    pub rhs_evals: usize,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub w_nnz: Option<usize>,
    pub w_fill_ratio: Option<f64>,
    pub factored_dissipator: Option<bool>,
    #[serde(skip)]
    pub wall_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub run: RunKind,
    pub records: Vec<ObservableRecord>,
    pub distributions: Vec<PhotonDistribution>,
    /// Field conditioned on `|g⟩` at the snapshots; empty unless post-selecting.
    pub postselected_distributions: Vec<PhotonDistribution>,
    pub diagnostics: RunDiagnostics,
}

#[derive(Debug, Clone)]
pub struct ScenarioOutput {
    pub config: ScenarioConfig,
    pub config_hash: String,
    pub trunc: TruncationScheme,
    pub tail_mass: f64,
    /// Initial tail and boundary population both within the tail policy.
    pub converged: bool,
    pub trajectories: Vec<Trajectory>,
}

impl ScenarioOutput {
    pub fn trajectory(&self, run: RunKind) -> Option<&Trajectory> {
        self.trajectories.iter().find(|t| t.run == run)
    }
}

/// `Q1` for the config: either fixed, or the smallest cutoff meeting the
/// tail policy plus a margin of `max(5, 10%)`, never below [`AUTO_Q1_FLOOR`].
pub fn choose_truncation(cfg: &ScenarioConfig) -> Result<TruncationScheme> {
    match cfg.trunc {
        TruncChoice::Fixed(q1) => Ok(TruncationScheme::new(q1)),
        TruncChoice::Auto => {
            let minimal = cfg.initial.field.minimal_q1(cfg.tail_tol)?;
            let q1 = (minimal + 5.max(minimal.div_ceil(10))).max(AUTO_Q1_FLOOR);
            if q1 > MAX_AUTO_Q1 {
                return Err(Error::Validation(format!("automatic truncation Q1 = {q1} exceeds {MAX_AUTO_Q1}")));
            }
            info!("auto truncation: minimal Q1 = {minimal}, using Q1 = {q1}");
            Ok(TruncationScheme::new(q1))
        }
    }
}

fn spectral_density(cfg: &ScenarioConfig, kind: Reservoir) -> SpectralDensity {
    let r = cfg.rates;
    let m = cfg.model;
    let sd = SpectralDensity::new(kind, r.kappa0, r.gamma0, r.gamma_phi, m.omega, m.omega0);
    let qc = cfg.reservoir.qubit_cutoff.unwrap_or(sd.qubit_cutoff);
    let cc = cfg.reservoir.cavity_cutoff.unwrap_or(sd.cavity_cutoff);
    sd.with_cutoffs(qc, cc)
}

fn observe_sample(t: f64, s: &BareCoefficients, postselect: bool) -> Result<ObservableRecord> {
    match observe(t, s, postselect) {
        Err(Error::ZeroProbability(p_g)) => {
            let mut rec = observe(t, s, false)?;
            let nan = f64::NAN;
            rec.postselected =
                Some(PostSelectedRecord { p_g, n_mean_ps: nan, mandel_q_ps: nan, f_ph: nan, m_av: nan, m_opt: nan });
            Ok(rec)
        }
        other => other,
    }
}

/// Buffers samples and evaluates their observables chunk by chunk.
struct Collector {
    exec: Exec,
    postselect: bool,
    snapshots: Vec<usize>,
    pending: Vec<(f64, BareCoefficients)>,
    records: Vec<ObservableRecord>,
    distributions: Vec<PhotonDistribution>,
    postselected: Vec<PhotonDistribution>,
    diagnostics: RunDiagnostics,
}

impl Collector {
    fn new(cfg: &ScenarioConfig, exec: Exec) -> Result<Self> {
        Ok(Self {
            exec,
            postselect: cfg.postselect,
            snapshots: cfg.snapshot_indices()?,
            pending: Vec::with_capacity(OBSERVE_CHUNK),
            records: Vec::with_capacity(cfg.grid.n_samples),
            distributions: Vec::new(),
            postselected: Vec::new(),
            diagnostics: RunDiagnostics::default(),
        })
    }

    fn push(&mut self, i: usize, t: f64, s: &BareCoefficients) -> Result<()> {
        let top = s.trunc.q1();
        let d = &mut self.diagnostics;
        d.max_trace_error = d.max_trace_error.max((s.trace() - 1.0).abs());
        d.max_boundary_population = d.max_boundary_population.max(s.a[(top, top)].re + s.b[(top, top)].re);
        if self.snapshots.contains(&i) {
            self.distributions.push(photon_distribution(s, t));
            if self.postselect {
                self.postselected.push(match postselected_distribution(s, t) {
                    Err(Error::ZeroProbability(_)) => {
                        PhotonDistribution { t, probabilities: vec![f64::NAN; s.trunc.field_dim()] }
                    }
                    other => other?,
                });
            }
        }
        self.pending.push((t, s.clone()));
        if self.pending.len() >= OBSERVE_CHUNK {
            self.flush()?;
        }
        Ok(())
    }

    fn flush(&mut self) -> Result<()> {
        let postselect = self.postselect;
        let batch = self.exec.map_slice(&self.pending, |(t, s)| observe_sample(*t, s, postselect));
        for r in batch {
            self.records.push(r?);
        }
        self.pending.clear();
        Ok(())
    }

    fn finish(mut self, run: RunKind) -> Result<Trajectory> {
        self.flush()?;
        Ok(Trajectory {
            run,
            records: self.records,
            distributions: self.distributions,
            postselected_distributions: self.postselected,
            diagnostics: self.diagnostics,
        })
    }
}

fn dressed_setup(
    cfg: &ScenarioConfig,
    trunc: TruncationScheme,
    kind: Reservoir,
) -> Result<(crate::dressed::DressedBasis, RateTable)> {
    let basis = dressed_basis(&cfg.model.unmodulated(), trunc, 0.0)?;
    let rates = compute_rates(&basis, &spectral_density(cfg, kind));
    Ok((basis, rates))
}

/// Propagates one run, handing every sample to `observer` in the bare basis.
/// Returns step statistics and W-tensor details; sample diagnostics are
/// left to the caller.
pub fn evolve_run<O>(
    cfg: &ScenarioConfig,
    run: RunKind,
    field: &FieldState,
    trunc: TruncationScheme,
    exec: Exec,
    mut observer: O,
) -> Result<RunDiagnostics>
where
    O: FnMut(usize, f64, &BareCoefficients) -> Result<()>,
{
    let grid = cfg.time_grid()?;
    let excited = cfg.initial.excited;
    let mut diag = RunDiagnostics::default();
    let record_stats = |stats: crate::integrator::IntegrationStats, diag: &mut RunDiagnostics| {
        diag.rhs_evals = stats.rhs_evals;
        diag.accepted_steps = stats.accepted;
        diag.rejected_steps = stats.rejected;
    };
    match run {
        RunKind::Gksl => {
            let rho0 = initial_bare_state(field, excited, trunc)?;
            let stats = evolve_gksl_with(&rho0, &cfg.model, &cfg.rates, &grid, &cfg.integrator, observer)?;
            record_stats(stats, &mut diag);
        }
        RunKind::DmeDressed(kind) => {
            if cfg.model.is_modulated() {
                return Err(Error::Validation("the dressed-basis solver needs a time-independent Hamiltonian".into()));
            }
            let (basis, rates) = dressed_setup(cfg, trunc, kind)?;
            let r0 = project_to_dressed(field, excited, &basis)?;
            evolve_dme_dressed_with(&r0, &basis, &rates, &grid, DressedPropagation::Exact, |i, t, r| {
                observer(i, t, &dressed_to_bare(r, &basis))
            })?;
        }
        RunKind::DmeBare(kind) => {
            let (basis, rates) = dressed_setup(cfg, trunc, kind)?;
            let w = compute_w_tensors(&basis, &rates, cfg.prune_epsilon, exec);
            let rho0 = initial_bare_state(field, excited, trunc)?;
            diag.factored_dissipator = Some(DmeBareRhs::new(&cfg.model, &w, WEvaluation::Auto).is_factored());
            diag.w_nnz = Some(w.nnz());
            diag.w_fill_ratio = Some(w.fill_ratio());
            let stats =
                evolve_dme_bare_with(&rho0, &cfg.model, &w, &grid, &cfg.integrator, WEvaluation::Auto, observer)?;
            record_stats(stats, &mut diag);
        }
    }
    Ok(diag)
}

/// Runs one solver and evaluates every observable; the initial field must
/// already match `trunc`.
pub fn run_single(
    cfg: &ScenarioConfig,
    run: RunKind,
    field: &FieldState,
    trunc: TruncationScheme,
    exec: Exec,
) -> Result<Trajectory> {
    let started = Instant::now();
    let mut col = Collector::new(cfg, exec)?;
    let diag = evolve_run(cfg, run, field, trunc, exec, |i, t, s| col.push(i, t, s))?;
    let mut traj = col.finish(run)?;
    let sampled = &traj.diagnostics;
    traj.diagnostics = RunDiagnostics {
        max_trace_error: sampled.max_trace_error,
        max_boundary_population: sampled.max_boundary_population,
        wall_seconds: started.elapsed().as_secs_f64(),
        ..diag
    };
    info!("{}: {} samples in {:.2} s", run.tag(), traj.records.len(), traj.diagnostics.wall_seconds);
    Ok(traj)
}

/// Runs every planned solver, concurrently under a parallel strategy.
pub fn run_scenario(cfg: &ScenarioConfig, exec: Exec) -> Result<ScenarioOutput> {
    let trunc = choose_truncation(cfg)?;
    let field = cfg.initial.field.generate(trunc, cfg.tail_tol)?;
    let runs = planned_runs(cfg);
    let results = exec.map_slice(&runs, |&run| run_single(cfg, run, &field, trunc, exec));
    let trajectories = results.into_iter().collect::<Result<Vec<_>>>()?;
    let boundary = trajectories.iter().map(|t| t.diagnostics.max_boundary_population).fold(0.0, f64::max);
    let converged = field.tail_mass <= cfg.tail_tol && boundary < cfg.tail_tol;
    if !converged {
        warn!("truncation Q1 = {} not converged: top-level population reaches {boundary:.3e}", trunc.q1());
    }
    Ok(ScenarioOutput {
        config: cfg.clone(),
        config_hash: cfg.hash(),
        trunc,
        tail_mass: field.tail_mass,
        converged,
        trajectories,
    })
}
