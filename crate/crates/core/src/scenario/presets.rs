//! Built-in scenarios, one per published figure.

use super::config::{
    Qubit, RawConfig, RawGrid, RawInitial, RawModel, RawModulation, RawRates, RawTrunc, SolverChoice, TruncChoice,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum PresetField {
    Coherent(f64),
    OddCat(f64),
    SqueezedCoherent { s: f64, beta: f64 },
    SqueezedVacuum(f64),
    Thermal(f64),
    Vacuum,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Preset {
    pub figure: u32,
    pub field: PresetField,
    pub excited: bool,
    pub g: f64,
    pub omega0: f64,
    pub rate: f64,
    /// `(ε, η₀, α)`.
    pub modulation: Option<(f64, f64, f64)>,
    pub t_max: f64,
    pub n_samples: usize,
    pub q1: Option<usize>,
    pub postselect: bool,
    pub summary: &'static str,
}

const SQRT_50: f64 = 7.0710678118654755;

const fn base(figure: u32, field: PresetField, g: f64, omega0: f64, rate: f64, summary: &'static str) -> Preset {
    let (t_max, n_samples) = if figure <= 9 { (3000.0, 3001) } else { (2000.0, 2001) };
    Preset {
        figure,
        field,
        excited: false,
        g,
        omega0,
        rate,
        modulation: None,
        t_max,
        n_samples,
        q1: None,
        postselect: false,
        summary,
    }
}

const fn multiphoton(figure: u32, g: f64, omega0: f64, summary: &'static str) -> Preset {
    let mut p = base(figure, PresetField::Vacuum, g, omega0, 1e-5, summary);
    p.excited = true;
    p.q1 = Some(20);
    p
}

const fn modulated(
    figure: u32,
    g: f64,
    omega0: f64,
    eta0: f64,
    alpha: f64,
    q1: usize,
    summary: &'static str,
) -> Preset {
    let mut p = base(figure, PresetField::Vacuum, g, omega0, 1e-6, summary);
    p.modulation = Some((0.08, eta0, alpha));
    p.t_max = 1e5;
    p.n_samples = 10001;
    p.q1 = Some(q1);
    p.postselect = true;
    p
}

pub(crate) const PRESETS: [Preset; 18] = [
    base(1, PresetField::Coherent(SQRT_50), 0.1, 2.9699, 2e-4, "coherent state, 3-photon resonance"),
    base(2, PresetField::Coherent(SQRT_50), 0.3, 4.7736, 2e-4, "coherent state, 5-photon resonance"),
    base(3, PresetField::Coherent(SQRT_50), 0.5, 6.4121, 2e-4, "coherent state, 7-photon resonance"),
    base(4, PresetField::OddCat(7.071), 0.1, 2.9699, 1e-5, "odd cat state, 3-photon resonance"),
    base(5, PresetField::OddCat(7.071), 0.3, 4.7736, 1e-5, "odd cat state, 5-photon resonance"),
    base(6, PresetField::OddCat(7.071), 0.5, 6.4121, 1e-5, "odd cat state, 7-photon resonance"),
    base(
        7,
        PresetField::SqueezedCoherent { s: 0.7, beta: 14.157 },
        0.1,
        2.9699,
        1e-5,
        "squeezed coherent state, 3-photon resonance",
    ),
    base(
        8,
        PresetField::SqueezedCoherent { s: 0.7, beta: 14.157 },
        0.3,
        4.7736,
        1e-5,
        "squeezed coherent state, 5-photon resonance",
    ),
    base(
        9,
        PresetField::SqueezedCoherent { s: 0.7, beta: 14.157 },
        0.5,
        6.4121,
        1e-5,
        "squeezed coherent state, 7-photon resonance",
    ),
    base(10, PresetField::SqueezedVacuum(1.544), 0.5, 1.5, 1e-3, "squeezed vacuum, near resonance"),
    base(11, PresetField::SqueezedVacuum(1.544), 0.8, 2.9, 1e-3, "squeezed vacuum, g = 0.8"),
    base(12, PresetField::Thermal(5.0), 0.5, 1.5, 1e-3, "thermal state, near resonance"),
    base(13, PresetField::Thermal(5.0), 0.8, 2.9, 1e-3, "thermal state, g = 0.8"),
    multiphoton(14, 0.1, 2.9699, "|e,0>, 3-photon Rabi oscillation"),
    multiphoton(15, 0.3, 4.7736, "|e,0>, 5-photon Rabi oscillation"),
    multiphoton(16, 0.5, 6.4121, "|e,0>, 7-photon Rabi oscillation"),
    modulated(17, 0.05, 0.5, 2.00715, -5e-8, 20, "modulated qubit frequency with post-selection"),
    modulated(18, 0.15, 2.9, 3.931, 8e-7, 30, "modulated qubit frequency, 4-photon transitions"),
];

pub(crate) fn find(figure: u32) -> Option<&'static Preset> {
    PRESETS.iter().find(|p| p.figure == figure)
}

/// `(figure, summary)` for every preset.
pub fn list_presets() -> Vec<(u32, &'static str)> {
    PRESETS.iter().map(|p| (p.figure, p.summary)).collect()
}

/// Parses `figureN`, `figN` or `N`.
pub fn parse_preset_name(name: &str) -> Option<u32> {
    let digits = name.trim_start_matches("figure").trim_start_matches("fig");
    digits.parse().ok().filter(|n| find(*n).is_some())
}

pub(crate) fn preset(figure: u32) -> Option<RawConfig> {
    let p = find(figure)?;
    let mut initial = RawInitial { qubit: Some(if p.excited { Qubit::E } else { Qubit::G }), ..RawInitial::default() };
    let kind = match p.field {
        PresetField::Coherent(a) => {
            initial.alpha = Some(a);
            "coherent"
        }
        PresetField::OddCat(a) => {
            initial.alpha = Some(a);
            "odd_cat"
        }
        PresetField::SqueezedCoherent { s, beta } => {
            initial.s = Some(s);
            initial.beta = Some(beta);
            "squeezed_coherent"
        }
        PresetField::SqueezedVacuum(s) => {
            initial.s = Some(s);
            "squeezed_vacuum"
        }
        PresetField::Thermal(n) => {
            initial.nbar = Some(n);
            "thermal"
        }
        PresetField::Vacuum => {
            initial.fock_n = Some(0);
            "fock"
        }
    };
    initial.kind = Some(kind.to_string());
    Some(RawConfig {
        figure: Some(p.figure),
        solver: Some(SolverChoice::All),
        postselect: Some(p.postselect),
        model: Some(RawModel {
            omega: Some(1.0),
            omega0: Some(p.omega0),
            g: Some(p.g),
            modulation: p.modulation.map(|(epsilon, eta0, alpha)| RawModulation {
                epsilon: Some(epsilon),
                eta0: Some(eta0),
                alpha: Some(alpha),
            }),
        }),
        rates: Some(RawRates { kappa0: Some(p.rate), gamma0: Some(p.rate), gamma_phi: Some(p.rate) }),
        initial: Some(initial),
        trunc: Some(RawTrunc { q1: Some(p.q1.map_or(TruncChoice::Auto, TruncChoice::Fixed)), tail_tol: None }),
        grid: Some(RawGrid { t_max: Some(p.t_max), n_samples: Some(p.n_samples) }),
        ..RawConfig::default()
    })
}
