//! Reservoir spectral densities and the dressed dissipative rates.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::DressedBasis;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reservoir {
    White,
    Ohmic,
}

impl Reservoir {
    pub fn name(self) -> &'static str {
        match self {
            Reservoir::White => "white",
            Reservoir::Ohmic => "ohmic",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    Kappa,
    Gamma,
    GammaPhi,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralDensity {
    pub kind: Reservoir,
    pub kappa0: f64,
    pub gamma0: f64,
    pub gamma_phi: f64,
    /// Cavity frequency `ω`, reference for the Ohmic cavity channel.
    pub omega: f64,
    /// Qubit frequency `Ω`, reference for the Ohmic qubit channel.
    pub qubit_omega: f64,
    /// Qubit-channel cutoff `Ω_c`.
    pub qubit_cutoff: f64,
    /// Cavity-channel cutoff `ω_c`.
    pub cavity_cutoff: f64,
}

impl SpectralDensity {
    /// Cutoffs default to `Ω_c = 10Ω`, `ω_c = 10ω`.
    pub fn new(kind: Reservoir, kappa0: f64, gamma0: f64, gamma_phi: f64, omega: f64, qubit_omega: f64) -> Self {
        Self {
            kind,
            kappa0,
            gamma0,
            gamma_phi,
            omega,
            qubit_omega,
            qubit_cutoff: 10.0 * qubit_omega,
            cavity_cutoff: 10.0 * omega,
        }
    }

    pub fn white(kappa0: f64, gamma0: f64, gamma_phi: f64) -> Self {
        Self::new(Reservoir::White, kappa0, gamma0, gamma_phi, 1.0, 1.0)
    }

    pub fn with_cutoffs(mut self, qubit_cutoff: f64, cavity_cutoff: f64) -> Self {
        self.qubit_cutoff = qubit_cutoff;
        self.cavity_cutoff = cavity_cutoff;
        self
    }
}

/// Rate of `channel` at transition frequency `delta`; zero for `delta < 0`.
pub fn rate(sd: &SpectralDensity, channel: Channel, delta: f64) -> f64 {
    if delta < 0.0 {
        return 0.0;
    }
    match (sd.kind, channel) {
        (_, Channel::GammaPhi) => sd.gamma_phi,
        (Reservoir::White, Channel::Kappa) => sd.kappa0,
        (Reservoir::White, Channel::Gamma) => sd.gamma0,
        (Reservoir::Ohmic, Channel::Kappa) => sd.kappa0 * delta / sd.omega * (-delta / sd.cavity_cutoff).exp(),
        (Reservoir::Ohmic, Channel::Gamma) => sd.gamma0 * delta / sd.qubit_omega * (-delta / sd.qubit_cutoff).exp(),
    }
}

/// Dissipative rates of the dressed master equation at zero temperature.
///
/// `gamma*` matrices hold `Γ^{jk}` for `k > j` (row `j`, column `k`) and are
/// zero elsewhere.
#[derive(Debug, Clone, PartialEq)]
pub struct RateTable {
    /// `Φ_j = √(γ_φ(0)/2) σ_z^{jj}`.
    pub phi: Vec<f64>,
    pub gamma: DMatrix<f64>,
    pub gamma_phi: DMatrix<f64>,
    pub gamma_kappa: DMatrix<f64>,
    pub gamma_gamma: DMatrix<f64>,
    /// `Θ^{N,M}`, symmetric.
    pub theta: DMatrix<f64>,
    /// `Υ^{N,M}`; the diagonal is the total decay rate of level `N`.
    pub upsilon: DMatrix<f64>,
    /// `γ_φ(0)`.
    pub dephasing_zero: f64,
}

impl RateTable {
    pub fn dim(&self) -> usize {
        self.phi.len()
    }

    /// Total decay rate `Υ^{N,N}` of level `n`.
    pub fn decay(&self, n: usize) -> f64 {
        self.upsilon[(n, n)]
    }

    pub fn is_zero(&self) -> bool {
        self.phi.iter().all(|&p| p == 0.0) && self.gamma.iter().all(|&g| g == 0.0)
    }
}

pub fn compute_rates(basis: &DressedBasis, sd: &SpectralDensity) -> RateTable {
    let dim = basis.dim();
    let el = &basis.elements;
    let dephasing_zero = rate(sd, Channel::GammaPhi, 0.0);
    let phi_scale = (dephasing_zero / 2.0).sqrt();
    let phi: Vec<f64> = (0..dim).map(|j| phi_scale * el.sigma_z[(j, j)].re).collect();

    let mut gamma_phi = DMatrix::zeros(dim, dim);
    let mut gamma_kappa = DMatrix::zeros(dim, dim);
    let mut gamma_gamma = DMatrix::zeros(dim, dim);
    for j in 0..dim {
        for k in (j + 1)..dim {
            let delta = basis.gap(k, j);
            gamma_phi[(j, k)] = rate(sd, Channel::GammaPhi, delta) / 2.0 * el.sigma_z[(j, k)].norm_sqr();
            gamma_kappa[(j, k)] = rate(sd, Channel::Kappa, delta) * el.x[(j, k)].norm_sqr();
            gamma_gamma[(j, k)] = rate(sd, Channel::Gamma, delta) * el.sigma_x[(j, k)].norm_sqr();
        }
    }
    let gamma = &gamma_phi + &gamma_kappa + &gamma_gamma;

    let decay: Vec<f64> = (0..dim).map(|n| (0..n).map(|j| gamma[(j, n)]).sum()).collect();
    let upsilon = DMatrix::from_fn(dim, dim, |n, m| if n == m { decay[n] } else { 0.5 * (decay[n] + decay[m]) });
    let theta = DMatrix::from_fn(dim, dim, |n, m| {
        let dz = el.sigma_z[(n, n)].re - el.sigma_z[(m, m)].re;
        dephasing_zero / 4.0 * dz * dz + upsilon[(n, m)]
    });

    RateTable { phi, gamma, gamma_phi, gamma_kappa, gamma_gamma, theta, upsilon, dephasing_zero }
}
