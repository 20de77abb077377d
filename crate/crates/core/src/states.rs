//! Initial cavity states from their Fock-space recurrences, and the joint
//! initial state in the bare and dressed representations.

use log::debug;
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bare::{product_state, BareCoefficients};
use crate::dressed::{DressedBasis, DressedState};
use crate::error::{Error, Result};
use crate::hilbert::{CMatrix, TruncationScheme, ZERO};

/// Largest probability allowed beyond the photon cutoff.
pub const DEFAULT_TAIL_TOL: f64 = 1e-8;

/// Photon-number cap used when searching for a truncation.
pub const MAX_AUTO_Q1: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldStateSpec {
    Coherent {
        alpha: f64,
    },
    OddCat {
        alpha: f64,
    },
    SqueezedCoherent {
        s: f64,
        beta: f64,
    },
    SqueezedVacuum {
        s: f64,
    },
    /// `nbar` is the mean photon number.
    Thermal {
        nbar: f64,
    },
    Fock {
        n: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum FieldContent {
    /// Real amplitudes `χ_n` of a pure state.
    Pure(Vec<f64>),
    /// Diagonal populations of a mixed state.
    Mixed(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    pub content: FieldContent,
    /// Probability carried by photon numbers above the cutoff.
    pub tail_mass: f64,
}

impl FieldState {
    pub fn field_dim(&self) -> usize {
        match &self.content {
            FieldContent::Pure(v) | FieldContent::Mixed(v) => v.len(),
        }
    }

    pub fn probabilities(&self) -> Vec<f64> {
        match &self.content {
            FieldContent::Pure(v) => v.iter().map(|x| x * x).collect(),
            FieldContent::Mixed(p) => p.clone(),
        }
    }

    pub fn kept_probability(&self) -> f64 {
        self.probabilities().iter().sum()
    }

    pub fn mean_photons(&self) -> f64 {
        self.probabilities().iter().enumerate().map(|(n, p)| n as f64 * p).sum()
    }

    /// Field density matrix `Σ p_ij |i⟩⟨j|`.
    pub fn density(&self) -> CMatrix {
        let d = self.field_dim();
        match &self.content {
            FieldContent::Pure(v) => CMatrix::from_fn(d, d, |i, j| Complex64::new(v[i] * v[j], 0.0)),
            FieldContent::Mixed(p) => {
                CMatrix::from_fn(d, d, |i, j| if i == j { Complex64::new(p[i], 0.0) } else { ZERO })
            }
        }
    }
}

impl FieldStateSpec {
    pub fn name(&self) -> &'static str {
        match self {
            FieldStateSpec::Coherent { .. } => "coherent",
            FieldStateSpec::OddCat { .. } => "odd_cat",
            FieldStateSpec::SqueezedCoherent { .. } => "squeezed_coherent",
            FieldStateSpec::SqueezedVacuum { .. } => "squeezed_vacuum",
            FieldStateSpec::Thermal { .. } => "thermal",
            FieldStateSpec::Fock { .. } => "fock",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Validation(format!("{}: {what}", self.name())));
        match *self {
            FieldStateSpec::Coherent { alpha } if !(alpha.is_finite() && alpha >= 0.0) => bad("alpha must be >= 0"),
            FieldStateSpec::OddCat { alpha } if !alpha.is_finite() => bad("alpha must be finite"),
            FieldStateSpec::OddCat { alpha: 0.0 } => {
                Err(Error::DegenerateState("odd cat state with alpha = 0 is the zero vector".into()))
            }
            FieldStateSpec::SqueezedCoherent { s, beta } if !(s.is_finite() && s >= 0.0 && beta.is_finite()) => {
                bad("requires finite s >= 0 and finite beta")
            }
            FieldStateSpec::SqueezedVacuum { s } if !(s.is_finite() && s >= 0.0) => bad("s must be >= 0"),
            FieldStateSpec::Thermal { nbar } if !(nbar.is_finite() && nbar >= 0.0) => bad("nbar must be >= 0"),
            _ => Ok(()),
        }
    }

    /// Amplitudes (or populations) for a given cutoff, failing when the
    /// probability beyond the cutoff exceeds `tail_tol`.
    pub fn generate(&self, trunc: TruncationScheme, tail_tol: f64) -> Result<FieldState> {
        self.validate()?;
        let state = self.generate_unchecked(trunc.field_dim());
        if state.tail_mass > tail_tol {
            return Err(Error::TruncationTooSmall { tail: state.tail_mass, tolerance: tail_tol });
        }
        Ok(state)
    }

    /// Smallest `Q1` whose tail mass is at most `tail_tol`.
    pub fn minimal_q1(&self, tail_tol: f64) -> Result<usize> {
        self.validate()?;
        if let FieldStateSpec::Thermal { nbar } = *self {
            if nbar == 0.0 {
                return Ok(0);
            }
            // (n̄/(n̄+1))^(Q1+1) <= tol
            let r = nbar / (nbar + 1.0);
            let q1 = ((tail_tol.ln() / r.ln()).ceil() as usize).saturating_sub(1);
            return Ok(q1);
        }
        let seq = self.sequence_until_negligible(0);
        let probs: Vec<f64> = seq.iter().map(|x| x * x).collect();
        let mut tail: f64 = probs.iter().sum::<f64>();
        for (n, p) in probs.iter().enumerate() {
            tail -= p;
            // the suffix is summed directly to avoid cancellation
            if tail <= tail_tol * 2.0 {
                let exact: f64 = probs[n + 1..].iter().sum();
                if exact <= tail_tol {
                    return Ok(n);
                }
            }
        }
        Err(Error::TruncationTooSmall { tail: f64::NAN, tolerance: tail_tol })
    }

    fn generate_unchecked(&self, d: usize) -> FieldState {
        if let FieldStateSpec::Thermal { nbar } = *self {
            let r = nbar / (nbar + 1.0);
            let mut p = Vec::with_capacity(d);
            let mut chi = 1.0 / (nbar + 1.0);
            for _ in 0..d {
                p.push(chi);
                chi *= r;
            }
            return FieldState { content: FieldContent::Mixed(p), tail_mass: r.powi(d as i32) };
        }
        let seq = self.sequence_until_negligible(d);
        let tail_mass = seq.iter().skip(d).map(|x| x * x).sum();
        let mut kept = seq;
        kept.resize(d, 0.0);
        FieldState { content: FieldContent::Pure(kept), tail_mass }
    }

    /// Amplitudes continued past `min_len` until the remaining terms are negligible.
    fn sequence_until_negligible(&self, min_len: usize) -> Vec<f64> {
        let mut out = Vec::new();
        let mut gen = AmplitudeGenerator::new(*self);
        let mut small_run = 0;
        let mut peak: f64 = 0.0;
        let mut peaked = false;
        while out.len() < MAX_AUTO_Q1 * 4 {
            let x = gen.next_amplitude();
            let p = x * x;
            if p < peak {
                peaked = true;
            }
            peak = peak.max(p);
            out.push(x);
            // odd-only or even-only chains produce exact zeros; judge pairs
            small_run = if p < 1e-34 { small_run + 1 } else { 0 };
            if out.len() >= min_len && peaked && small_run >= 4 {
                break;
            }
            if matches!(self, FieldStateSpec::Fock { n } if out.len() > *n) && out.len() >= min_len {
                break;
            }
        }
        out
    }
}

/// Streams `χ₀, χ₁, …` from the Fock-space recurrences.
struct AmplitudeGenerator {
    spec: FieldStateSpec,
    n: usize,
    prev: f64,
    prev2: f64,
    /// Hermite ratio `K_n = H_{n+1}/H_n` for the squeezed coherent chain.
    k: f64,
    /// Normalized Hermite values `q^n H_n(x)/√n!` (fallback chain).
    fallback: Option<(f64, f64)>,
    sq: Option<SqueezedCoherentParams>,
}

#[derive(Clone, Copy)]
struct SqueezedCoherentParams {
    x: f64,
    q: f64,
    chi0: f64,
}

impl AmplitudeGenerator {
    fn new(spec: FieldStateSpec) -> Self {
        let sq = match spec {
            FieldStateSpec::SqueezedCoherent { s, beta } if s > 0.0 => Some(SqueezedCoherentParams {
                x: beta / (2.0 * s).sinh().sqrt(),
                q: (s.tanh() / 2.0).sqrt(),
                chi0: (-0.5 * beta * beta * (1.0 - s.tanh())).exp() / s.cosh().sqrt(),
            }),
            _ => None,
        };
        let k = sq.map_or(0.0, |p| 2.0 * p.x);
        Self { spec, n: 0, prev: 0.0, prev2: 0.0, k, fallback: None, sq }
    }

    fn next_amplitude(&mut self) -> f64 {
        let n = self.n;
        let value = match self.spec {
            FieldStateSpec::Coherent { alpha } => coherent_step(alpha, n, self.prev),
            FieldStateSpec::SqueezedCoherent { s: 0.0, beta } => coherent_step(beta, n, self.prev),
            FieldStateSpec::OddCat { alpha } => match n {
                0 => 0.0,
                1 => (2.0 / -(-2.0 * alpha * alpha).exp_m1()).sqrt() * alpha * (-alpha * alpha / 2.0).exp(),
                _ => self.prev2 * alpha * alpha / ((n as f64) * (n as f64 - 1.0)).sqrt(),
            },
            FieldStateSpec::SqueezedVacuum { s } => match n {
                0 => 1.0 / s.cosh().sqrt(),
                1 => 0.0,
                _ => -self.prev2 * ((n as f64 - 1.0) / n as f64).sqrt() * s.tanh(),
            },
            FieldStateSpec::SqueezedCoherent { .. } => self.squeezed_coherent_step(n),
            FieldStateSpec::Fock { n: k } => {
                if n == k {
                    1.0
                } else {
                    0.0
                }
            }
            FieldStateSpec::Thermal { .. } => unreachable!("thermal states have no amplitudes"),
        };
        self.prev2 = self.prev;
        self.prev = value;
        self.n += 1;
        value
    }

    fn squeezed_coherent_step(&mut self, n: usize) -> f64 {
        let p = self.sq.expect("squeezed parameters");
        if n == 0 {
            self.fallback = Some((1.0, 0.0));
            return p.chi0;
        }
        // advance the normalized Hermite chain alongside; it is the recovery path
        let (h_prev, h_prev2) = self.fallback.expect("initialized at n = 0");
        let m = (n - 1) as f64;
        let h = 2.0 * p.x * p.q / (m + 1.0).sqrt() * h_prev - 2.0 * p.q * p.q * (m / (m + 1.0)).sqrt() * h_prev2;
        self.fallback = Some((h, h_prev));

        if self.k.abs() < 1e-300 || !self.k.is_finite() || self.prev == 0.0 {
            if self.k.abs() < 1e-300 || !self.k.is_finite() {
                debug!(
                    "Hermite ratio K_{} = {:e} near a zero of H at x = {}; using the direct chain",
                    n - 1,
                    self.k,
                    p.x
                );
            }
            // restart the ratio chain from the directly evaluated values:
            // K_n = H_{n+1}/H_n = (h_{n+1}/h_n)·√(n+1)/q
            let h_next = 2.0 * p.x * p.q / ((n + 1) as f64).sqrt() * h
                - 2.0 * p.q * p.q * ((n as f64) / (n as f64 + 1.0)).sqrt() * h_prev;
            self.k = if h != 0.0 { h_next / h * ((n + 1) as f64).sqrt() / p.q } else { f64::NAN };
            return p.chi0 * h;
        }
        let value = self.prev * self.k * (p.q * p.q / n as f64).sqrt();
        self.k = 2.0 * p.x - 2.0 * n as f64 / self.k;
        value
    }
}

fn coherent_step(alpha: f64, n: usize, prev: f64) -> f64 {
    if n == 0 {
        (-alpha * alpha / 2.0).exp()
    } else {
        prev * alpha / (n as f64).sqrt()
    }
}

pub fn coherent_amplitudes(alpha: f64, trunc: TruncationScheme) -> Result<FieldState> {
    FieldStateSpec::Coherent { alpha }.generate(trunc, DEFAULT_TAIL_TOL)
}

pub fn odd_cat_amplitudes(alpha: f64, trunc: TruncationScheme) -> Result<FieldState> {
    FieldStateSpec::OddCat { alpha }.generate(trunc, DEFAULT_TAIL_TOL)
}

pub fn squeezed_coherent_amplitudes(s: f64, beta: f64, trunc: TruncationScheme) -> Result<FieldState> {
    FieldStateSpec::SqueezedCoherent { s, beta }.generate(trunc, DEFAULT_TAIL_TOL)
}

pub fn squeezed_vacuum_amplitudes(s: f64, trunc: TruncationScheme) -> Result<FieldState> {
    FieldStateSpec::SqueezedVacuum { s }.generate(trunc, DEFAULT_TAIL_TOL)
}

pub fn thermal_populations(nbar: f64, trunc: TruncationScheme) -> Result<FieldState> {
    FieldStateSpec::Thermal { nbar }.generate(trunc, DEFAULT_TAIL_TOL)
}

/// `|q⟩⟨q| ⊗ ρ_field` in block form.
pub fn initial_bare_state(field: &FieldState, excited: bool, trunc: TruncationScheme) -> Result<BareCoefficients> {
    if field.field_dim() != trunc.field_dim() {
        return Err(Error::DimensionMismatch { expected: trunc.field_dim(), found: field.field_dim() });
    }
    product_state(trunc, &field.density(), excited)
}

/// `r(0) = V† (|q⟩⟨q| ⊗ ρ_field) V`, using only the rows of the qubit block.
pub fn project_to_dressed(field: &FieldState, excited: bool, basis: &DressedBasis) -> Result<DressedState> {
    let trunc = basis.trunc;
    let d = trunc.field_dim();
    if field.field_dim() != d {
        return Err(Error::DimensionMismatch { expected: d, found: field.field_dim() });
    }
    let offset = if excited { d } else { 0 };
    let rows: DMatrix<Complex64> = basis.coefficients.rows(offset, d).into_owned();
    let mut r = match &field.content {
        FieldContent::Pure(chi) => {
            let psi = DMatrix::from_fn(d, 1, |i, _| Complex64::new(chi[i], 0.0));
            let amp = rows.adjoint() * psi;
            &amp * amp.adjoint()
        }
        FieldContent::Mixed(p) => {
            let mut weighted = rows.clone();
            for (i, &w) in p.iter().enumerate().take(d) {
                weighted.row_mut(i).iter_mut().for_each(|z| *z *= w);
            }
            rows.adjoint() * weighted
        }
    };
    let n = r.nrows();
    for i in 0..n {
        r[(i, i)].im = 0.0;
        for j in (i + 1)..n {
            let z = (r[(i, j)] + r[(j, i)].conj()) * 0.5;
            r[(i, j)] = z;
            r[(j, i)] = z.conj();
        }
    }
    Ok(DressedState::new(r))
}
