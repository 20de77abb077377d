//! Scenario documents: parsing, preset overlay, defaults and validation.

use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dressed::Reservoir;
use crate::error::{Error, Result};
use crate::gksl::RateParams;
use crate::hilbert::{ModelParams, ModulationParams};
use crate::integrator::{IntegratorConfig, TimeGrid};
use crate::states::{FieldStateSpec, DEFAULT_TAIL_TOL};

use super::presets::preset;

/// Number of snapshot times chosen when a document does not list any.
pub const DEFAULT_SNAPSHOTS: usize = 3;

/// Relative tolerance used to match snapshot times against grid times.
const SNAPSHOT_MATCH_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverChoice {
    Gksl,
    DmeDressed,
    DmeBare,
    All,
}

impl FromStr for SolverChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "gksl" => Ok(SolverChoice::Gksl),
            "dme_dressed" => Ok(SolverChoice::DmeDressed),
            "dme_bare" => Ok(SolverChoice::DmeBare),
            "all" => Ok(SolverChoice::All),
            other => Err(Error::Parse(format!("unknown solver `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TruncChoice {
    Auto,
    #[serde(untagged)]
    Fixed(usize),
}

impl FromStr for TruncChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "auto" {
            return Ok(TruncChoice::Auto);
        }
        s.parse()
            .map(TruncChoice::Fixed)
            .map_err(|_| Error::Parse(format!("Q1 must be an integer or `auto`, got `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Qubit {
    #[serde(alias = "ground")]
    G,
    #[serde(alias = "excited")]
    E,
}

// Raw document: every key optional, unknown keys rejected.

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct RawConfig {
    pub figure: Option<u32>,
    pub solver: Option<SolverChoice>,
    pub postselect: Option<bool>,
    pub snapshots: Option<Vec<f64>>,
    pub output: Option<PathBuf>,
    pub model: Option<RawModel>,
    pub rates: Option<RawRates>,
    pub reservoir: Option<RawReservoir>,
    pub initial: Option<RawInitial>,
    pub trunc: Option<RawTrunc>,
    pub grid: Option<RawGrid>,
    pub integrator: Option<RawIntegrator>,
    pub prune: Option<RawPrune>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct RawModel {
    pub omega: Option<f64>,
    #[serde(rename = "Omega0")]
    pub omega0: Option<f64>,
    pub g: Option<f64>,
    pub modulation: Option<RawModulation>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct RawModulation {
    pub epsilon: Option<f64>,
    pub eta0: Option<f64>,
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct RawRates {
    pub kappa0: Option<f64>,
    pub gamma0: Option<f64>,
    pub gamma_phi: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct RawReservoir {
    pub kind: Option<Reservoir>,
    #[serde(rename = "Omega_c")]
    pub qubit_cutoff: Option<f64>,
    pub omega_c: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct RawInitial {
    pub kind: Option<String>,
    pub alpha: Option<f64>,
    pub s: Option<f64>,
    pub beta: Option<f64>,
    pub fock_n: Option<usize>,
    pub nbar: Option<f64>,
    pub qubit: Option<Qubit>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct RawTrunc {
    #[serde(rename = "Q1")]
    pub q1: Option<TruncChoice>,
    pub tail_tol: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct RawGrid {
    pub t_max: Option<f64>,
    pub n_samples: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct RawIntegrator {
    pub rel_tol: Option<f64>,
    pub abs_tol: Option<f64>,
    pub initial_step: Option<f64>,
    pub max_step: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct RawPrune {
    pub epsilon: Option<f64>,
}

fn over<T>(base: Option<T>, top: Option<T>) -> Option<T> {
    top.or(base)
}

fn over_section<T, F: FnOnce(T, T) -> T>(base: Option<T>, top: Option<T>, f: F) -> Option<T> {
    match (base, top) {
        (Some(b), Some(t)) => Some(f(b, t)),
        (b, t) => t.or(b),
    }
}

impl RawConfig {
    /// Keys in `top` win; sections merge key by key. A new `initial.kind`
    /// replaces the whole field-state section except the qubit.
    pub(crate) fn overlay(self, top: RawConfig) -> RawConfig {
        RawConfig {
            figure: over(self.figure, top.figure),
            solver: over(self.solver, top.solver),
            postselect: over(self.postselect, top.postselect),
            snapshots: over(self.snapshots, top.snapshots),
            output: over(self.output, top.output),
            model: over_section(self.model, top.model, |b, t| RawModel {
                omega: over(b.omega, t.omega),
                omega0: over(b.omega0, t.omega0),
                g: over(b.g, t.g),
                modulation: over_section(b.modulation, t.modulation, |b, t| RawModulation {
                    epsilon: over(b.epsilon, t.epsilon),
                    eta0: over(b.eta0, t.eta0),
                    alpha: over(b.alpha, t.alpha),
                }),
            }),
            rates: over_section(self.rates, top.rates, |b, t| RawRates {
                kappa0: over(b.kappa0, t.kappa0),
                gamma0: over(b.gamma0, t.gamma0),
                gamma_phi: over(b.gamma_phi, t.gamma_phi),
            }),
            reservoir: over_section(self.reservoir, top.reservoir, |b, t| RawReservoir {
                kind: over(b.kind, t.kind),
                qubit_cutoff: over(b.qubit_cutoff, t.qubit_cutoff),
                omega_c: over(b.omega_c, t.omega_c),
            }),
            initial: over_section(self.initial, top.initial, |b, t| {
                if t.kind.is_some() {
                    RawInitial { qubit: over(b.qubit, t.qubit), ..t }
                } else {
                    RawInitial {
                        kind: b.kind,
                        alpha: over(b.alpha, t.alpha),
                        s: over(b.s, t.s),
                        beta: over(b.beta, t.beta),
                        fock_n: over(b.fock_n, t.fock_n),
                        nbar: over(b.nbar, t.nbar),
                        qubit: over(b.qubit, t.qubit),
                    }
                }
            }),
            trunc: over_section(self.trunc, top.trunc, |b, t| RawTrunc {
                q1: over(b.q1, t.q1),
                tail_tol: over(b.tail_tol, t.tail_tol),
            }),
            grid: over_section(self.grid, top.grid, |b, t| RawGrid {
                t_max: over(b.t_max, t.t_max),
                n_samples: over(b.n_samples, t.n_samples),
            }),
            integrator: over_section(self.integrator, top.integrator, |b, t| RawIntegrator {
                rel_tol: over(b.rel_tol, t.rel_tol),
                abs_tol: over(b.abs_tol, t.abs_tol),
                initial_step: over(b.initial_step, t.initial_step),
                max_step: over(b.max_step, t.max_step),
            }),
            prune: over_section(self.prune, top.prune, |b, t| RawPrune { epsilon: over(b.epsilon, t.epsilon) }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReservoirConfig {
    pub kind: Reservoir,
    /// `Ω_c`; `None` means `10 Ω₀`.
    pub qubit_cutoff: Option<f64>,
    /// `ω_c`; `None` means `10 ω`.
    pub cavity_cutoff: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InitialState {
    pub field: FieldStateSpec,
    pub excited: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridSpec {
    pub t_max: f64,
    pub n_samples: usize,
}

impl GridSpec {
    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::uniform(self.t_max, self.n_samples)
    }
}

/// A fully resolved and validated scenario.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioConfig {
    pub figure: Option<u32>,
    pub model: ModelParams,
    pub rates: RateParams,
    pub reservoir: ReservoirConfig,
    pub solver: SolverChoice,
    pub trunc: TruncChoice,
    pub tail_tol: f64,
    pub initial: InitialState,
    pub grid: GridSpec,
    pub snapshots: Vec<f64>,
    pub postselect: bool,
    pub integrator: IntegratorConfig,
    pub prune_epsilon: f64,
    /// Not part of the hash.
    #[serde(skip)]
    pub output: Option<PathBuf>,
}

fn missing(key: &str) -> Error {
    Error::Validation(format!("missing required key `{key}`"))
}

fn field_state(raw: &RawInitial) -> Result<FieldStateSpec> {
    let kind = raw.kind.as_deref().ok_or_else(|| missing("initial.kind"))?;
    let used: &[&str] = match kind {
        "coherent" | "odd_cat" => &["alpha"],
        "squeezed_coherent" => &["s", "beta"],
        "squeezed_vacuum" => &["s"],
        "thermal" => &["nbar"],
        "fock" => &["fock_n"],
        "vacuum" => &[],
        other => return Err(Error::Validation(format!("unknown initial.kind `{other}`"))),
    };
    let present = [
        ("alpha", raw.alpha.is_some()),
        ("s", raw.s.is_some()),
        ("beta", raw.beta.is_some()),
        ("fock_n", raw.fock_n.is_some()),
        ("nbar", raw.nbar.is_some()),
    ];
    for (key, set) in present {
        if set && !used.contains(&key) {
            return Err(Error::Validation(format!("initial.{key} is not used by kind `{kind}`")));
        }
    }
    let need = |v: Option<f64>, key: &str| v.ok_or_else(|| missing(&format!("initial.{key}")));
    let spec = match kind {
        "coherent" => FieldStateSpec::Coherent { alpha: need(raw.alpha, "alpha")? },
        "odd_cat" => FieldStateSpec::OddCat { alpha: need(raw.alpha, "alpha")? },
        "squeezed_coherent" => FieldStateSpec::SqueezedCoherent { s: need(raw.s, "s")?, beta: need(raw.beta, "beta")? },
        "squeezed_vacuum" => FieldStateSpec::SqueezedVacuum { s: need(raw.s, "s")? },
        "thermal" => FieldStateSpec::Thermal { nbar: need(raw.nbar, "nbar")? },
        "fock" => FieldStateSpec::Fock { n: raw.fock_n.ok_or_else(|| missing("initial.fock_n"))? },
        _ => FieldStateSpec::Fock { n: 0 },
    };
    spec.validate()?;
    Ok(spec)
}

/// Grid times nearest to `k t_max / 3` for `k = 1, 2, 3`.
fn default_snapshots(grid: &TimeGrid) -> Vec<f64> {
    let last = grid.len() - 1;
    let mut idx: Vec<usize> =
        (1..=DEFAULT_SNAPSHOTS).map(|k| ((k * last) as f64 / DEFAULT_SNAPSHOTS as f64).round() as usize).collect();
    idx.dedup();
    idx.retain(|&i| i > 0);
    idx.into_iter().map(|i| grid.times()[i]).collect()
}

fn positive(v: f64, key: &str) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(Error::Validation(format!("{key} must be positive and finite, got {v}")))
    }
}

impl ScenarioConfig {
    pub(crate) fn resolve(raw: RawConfig) -> Result<Self> {
        let raw = match raw.figure {
            Some(n) => preset(n).ok_or_else(|| Error::Validation(format!("no preset for figure {n}")))?.overlay(raw),
            None => raw,
        };
        let m = raw.model.ok_or_else(|| missing("model"))?;
        let mut model = ModelParams::new(
            m.omega.unwrap_or(1.0),
            m.omega0.ok_or_else(|| missing("model.Omega0"))?,
            m.g.ok_or_else(|| missing("model.g"))?,
        );
        if let Some(md) = m.modulation {
            model = model.with_modulation(ModulationParams {
                epsilon: md.epsilon.ok_or_else(|| missing("model.modulation.epsilon"))?,
                eta0: md.eta0.ok_or_else(|| missing("model.modulation.eta0"))?,
                alpha: md.alpha.unwrap_or(0.0),
            });
        }
        model.validate().map_err(Error::Validation)?;

        let r = raw.rates.unwrap_or_default();
        let rates = RateParams::new(r.kappa0.unwrap_or(0.0), r.gamma0.unwrap_or(0.0), r.gamma_phi.unwrap_or(0.0));
        rates.validate().map_err(Error::Validation)?;

        let res = raw.reservoir.unwrap_or_default();
        let reservoir = ReservoirConfig {
            kind: res.kind.unwrap_or(Reservoir::White),
            qubit_cutoff: res.qubit_cutoff.map(|v| positive(v, "reservoir.Omega_c")).transpose()?,
            cavity_cutoff: res.omega_c.map(|v| positive(v, "reservoir.omega_c")).transpose()?,
        };

        let solver = raw.solver.unwrap_or(SolverChoice::All);
        if solver == SolverChoice::DmeDressed && model.is_modulated() {
            return Err(Error::Validation(
                "a modulated Hamiltonian needs solver = dme_bare (or gksl); the dressed basis is time dependent".into(),
            ));
        }

        let ini = raw.initial.ok_or_else(|| missing("initial"))?;
        let initial = InitialState { field: field_state(&ini)?, excited: ini.qubit == Some(Qubit::E) };

        let t = raw.trunc.unwrap_or_default();
        let tail_tol = t.tail_tol.unwrap_or(DEFAULT_TAIL_TOL);
        if !(tail_tol > 0.0 && tail_tol < 1.0) {
            return Err(Error::Validation(format!("trunc.tail_tol must lie in (0, 1), got {tail_tol}")));
        }

        let g = raw.grid.ok_or_else(|| missing("grid"))?;
        let grid = GridSpec {
            t_max: positive(g.t_max.ok_or_else(|| missing("grid.t_max"))?, "grid.t_max")?,
            n_samples: g.n_samples.ok_or_else(|| missing("grid.n_samples"))?,
        };
        let times = grid.grid()?;

        let snapshots = match raw.snapshots {
            Some(list) => {
                for &s in &list {
                    if times.index_of(s, SNAPSHOT_MATCH_TOL).is_none() {
                        return Err(Error::Validation(format!("snapshot time {s} is not a grid time")));
                    }
                }
                list
            }
            None => default_snapshots(&times),
        };

        let ri = raw.integrator.unwrap_or_default();
        let mut integrator = IntegratorConfig::default();
        integrator.rel_tol = ri.rel_tol.unwrap_or(integrator.rel_tol);
        integrator.abs_tol = ri.abs_tol.unwrap_or(integrator.abs_tol);
        integrator.initial_step = ri.initial_step.unwrap_or(integrator.initial_step);
        integrator.max_step = ri.max_step.unwrap_or(integrator.max_step);
        integrator.validate()?;

        let prune_epsilon = raw.prune.and_then(|p| p.epsilon).unwrap_or(crate::dressed::DEFAULT_PRUNE);
        if !(0.0..1.0).contains(&prune_epsilon) {
            return Err(Error::Validation(format!("prune.epsilon must lie in [0, 1), got {prune_epsilon}")));
        }

        Ok(ScenarioConfig {
            figure: raw.figure,
            model,
            rates,
            reservoir,
            solver,
            trunc: t.q1.unwrap_or(TruncChoice::Auto),
            tail_tol,
            initial,
            grid,
            snapshots,
            postselect: raw.postselect.unwrap_or(false),
            integrator,
            prune_epsilon,
            output: raw.output,
        })
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let json = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(json.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Replaces the solver, re-checking the modulation constraint.
    pub fn with_solver(mut self, solver: SolverChoice) -> Result<Self> {
        if solver == SolverChoice::DmeDressed && self.model.is_modulated() {
            return Err(Error::Validation("a modulated Hamiltonian needs solver = dme_bare (or gksl)".into()));
        }
        self.solver = solver;
        Ok(self)
    }

    pub fn time_grid(&self) -> Result<TimeGrid> {
        self.grid.grid()
    }

    /// Grid index of every snapshot time.
    pub fn snapshot_indices(&self) -> Result<Vec<usize>> {
        let grid = self.time_grid()?;
        self.snapshots
            .iter()
            .map(|&s| {
                grid.index_of(s, SNAPSHOT_MATCH_TOL)
                    .ok_or_else(|| Error::Validation(format!("snapshot time {s} is not a grid time")))
            })
            .collect()
    }
}

/// Parses and validates a scenario document.
pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    ScenarioConfig::resolve(parse_raw(text)?)
}

pub(crate) fn parse_raw(text: &str) -> Result<RawConfig> {
    toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
}

/// Parses a document as an overlay on preset `figure`, which replaces any
/// `figure` key in the document.
pub fn parse_config_with_preset(text: &str, figure: u32) -> Result<ScenarioConfig> {
    let raw = parse_raw(text)?;
    ScenarioConfig::resolve(RawConfig { figure: Some(figure), ..raw })
}

/// Config for preset figure `n` with no overrides.
pub fn preset_config(n: u32) -> Result<ScenarioConfig> {
    ScenarioConfig::resolve(RawConfig { figure: Some(n), ..RawConfig::default() })
}
