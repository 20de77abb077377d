//! Bare-basis GKSL master equation.
//!
//! Dissipators: `κ₀ D[a]`, `γ₀ D[σ₋]` and pure dephasing that damps the
//! qubit coherences at `γ_φ`, all built from bare operators. The right-hand
//! side works directly on the `A`, `B`, `C` blocks; terms whose indices
//! leave the truncation are dropped.

use log::warn;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bare::{min_population, pack, pack_into, unpack_into, BareCoefficients, BareTrajectory, PackingOffsets};
use crate::error::{Error, Result};
use crate::hilbert::{qubit_frequency, ModelParams, TruncationScheme, ZERO};
use crate::integrator::{integrate, IntegrationStats, IntegratorConfig, TimeGrid};

/// Base dissipation rates in units of `ω`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateParams {
    pub kappa0: f64,
    pub gamma0: f64,
    pub gamma_phi: f64,
}

impl RateParams {
    pub fn new(kappa0: f64, gamma0: f64, gamma_phi: f64) -> Self {
        Self { kappa0, gamma0, gamma_phi }
    }

    /// The same value for all three channels.
    pub fn uniform(rate: f64) -> Self {
        Self::new(rate, rate, rate)
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn is_zero(&self) -> bool {
        self.kappa0 == 0.0 && self.gamma0 == 0.0 && self.gamma_phi == 0.0
    }

    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [("kappa0", self.kappa0), ("gamma0", self.gamma0), ("gamma_phi", self.gamma_phi)] {
            if !v.is_finite() || v < 0.0 {
                return Err(format!("rate {name} must be finite and non-negative, got {v}"));
            }
        }
        Ok(())
    }
}

/// Reusable GKSL vector field over the packed state.
#[derive(Debug, Clone)]
pub struct GkslRhs {
    model: ModelParams,
    rates: RateParams,
    trunc: TruncationScheme,
    sqrt: Vec<f64>,
    cur: BareCoefficients,
    der: BareCoefficients,
}

impl GkslRhs {
    pub fn new(model: ModelParams, rates: RateParams, trunc: TruncationScheme) -> Self {
        let d = trunc.field_dim();
        Self {
            model,
            rates,
            trunc,
            sqrt: (0..=d + 1).map(|n| (n as f64).sqrt()).collect(),
            cur: BareCoefficients::zeros(trunc),
            der: BareCoefficients::zeros(trunc),
        }
    }

    pub fn trunc(&self) -> TruncationScheme {
        self.trunc
    }

    pub fn packed_len(&self) -> usize {
        PackingOffsets::new(self.trunc).len
    }

    /// Writes `dY/dt` for the packed state `y` at time `t`.
    pub fn eval(&mut self, t: f64, y: &[f64], dy: &mut [f64]) {
        unpack_into(y, &mut self.cur);
        derivative(&self.model, &self.rates, &self.sqrt, &self.cur, &mut self.der, t);
        pack_into(&self.der, dy);
    }
}

fn derivative(
    model: &ModelParams,
    rates: &RateParams,
    sq: &[f64],
    rho: &BareCoefficients,
    out: &mut BareCoefficients,
    t: f64,
) {
    let d = rho.trunc.field_dim();
    let (a, b, c) = (&rho.a, &rho.b, &rho.c);
    let get = |m: &crate::hilbert::CMatrix, i: isize, j: isize| -> Complex64 {
        if i < 0 || j < 0 || i as usize >= d || j as usize >= d {
            ZERO
        } else {
            m[(i as usize, j as usize)]
        }
    };
    let omega = model.omega;
    let qubit = qubit_frequency(model, t);
    let g = Complex64::new(0.0, -model.g);
    let (kappa, gamma0, gphi) = (rates.kappa0, rates.gamma0, rates.gamma_phi);

    for n in 0..d {
        let ni = n as isize;
        let (sn, sn1) = (sq[n], sq[n + 1]);
        for m in 0..d {
            let mi = m as isize;
            let (sm, sm1) = (sq[m], sq[m + 1]);
            let rot = Complex64::new(0.0, -omega * (n as f64 - m as f64));
            let loss = 0.5 * kappa * (n + m) as f64;
            let jump = kappa * sn1 * sm1;

            if m >= n {
                let coupling = get(c, mi, ni + 1).conj() * sn1 + get(c, mi, ni - 1).conj() * sn
                    - get(c, ni, mi - 1) * sm
                    - get(c, ni, mi + 1) * sm1;
                out.a[(n, m)] = rot * a[(n, m)] + g * coupling + get(a, ni + 1, mi + 1) * jump - a[(n, m)] * loss
                    + b[(n, m)] * gamma0;

                let coupling = get(c, ni + 1, mi) * sn1 + get(c, ni - 1, mi) * sn
                    - get(c, mi - 1, ni).conj() * sm
                    - get(c, mi + 1, ni).conj() * sm1;
                out.b[(n, m)] =
                    rot * b[(n, m)] + g * coupling + get(b, ni + 1, mi + 1) * jump - b[(n, m)] * (loss + gamma0);
            }

            let coupling =
                get(b, ni + 1, mi) * sn1 + get(b, ni - 1, mi) * sn - get(a, ni, mi - 1) * sm - get(a, ni, mi + 1) * sm1;
            let rot_c = Complex64::new(0.0, -(omega * (n as f64 - m as f64) - qubit));
            out.c[(n, m)] = rot_c * c[(n, m)] + g * coupling + get(c, ni + 1, mi + 1) * jump
                - c[(n, m)] * (loss + 0.5 * gamma0 + gphi);
        }
    }
}

/// `dρ/dt` in block form (upper triangles of `A`, `B` are authoritative).
pub fn gksl_rhs(model: &ModelParams, rates: &RateParams, rho: &BareCoefficients, t: f64) -> BareCoefficients {
    let d = rho.trunc.field_dim();
    let sq: Vec<f64> = (0..=d + 1).map(|n| (n as f64).sqrt()).collect();
    let mut out = BareCoefficients::zeros(rho.trunc);
    derivative(model, rates, &sq, rho, &mut out, t);
    for n in 0..d {
        for m in 0..n {
            out.a[(n, m)] = out.a[(m, n)].conj();
            out.b[(n, m)] = out.b[(m, n)].conj();
        }
    }
    out
}

/// Shared driver for the bare-basis solvers.
pub(crate) fn evolve_packed<F, O>(
    rho0: &BareCoefficients,
    mut rhs: F,
    grid: &TimeGrid,
    cfg: &IntegratorConfig,
    label: &str,
    mut observer: O,
) -> Result<IntegrationStats>
where
    F: FnMut(f64, &[f64], &mut [f64]),
    O: FnMut(usize, f64, &BareCoefficients) -> Result<()>,
{
    let y0 = pack(rho0)?;
    let mut state = BareCoefficients::zeros(rho0.trunc);
    let mut warned = false;
    integrate(
        |t, y, dy| rhs(t, y, dy),
        &y0.y,
        grid,
        cfg,
        |i, t, y| {
            unpack_into(y, &mut state);
            let worst = min_population(&state);
            if worst < -1e-8 && !warned {
                warn!("{label}: negative population {worst:.3e} at t = {t}");
                warned = true;
            }
            if !state.trace().is_finite() {
                return Err(Error::PositivityViolation(f64::NAN));
            }
            observer(i, t, &state)
        },
    )
}

pub fn evolve_gksl_with<O>(
    rho0: &BareCoefficients,
    model: &ModelParams,
    rates: &RateParams,
    grid: &TimeGrid,
    cfg: &IntegratorConfig,
    observer: O,
) -> Result<IntegrationStats>
where
    O: FnMut(usize, f64, &BareCoefficients) -> Result<()>,
{
    rates.validate().map_err(Error::Validation)?;
    let mut rhs = GkslRhs::new(*model, *rates, rho0.trunc);
    evolve_packed(rho0, |t, y, dy| rhs.eval(t, y, dy), grid, cfg, "gksl", observer)
}

pub fn evolve_gksl(
    rho0: &BareCoefficients,
    model: &ModelParams,
    rates: &RateParams,
    grid: &TimeGrid,
    cfg: &IntegratorConfig,
) -> Result<BareTrajectory> {
    let mut out = BareTrajectory::default();
    evolve_gksl_with(rho0, model, rates, grid, cfg, |_, t, s| {
        out.times.push(t);
        out.states.push(s.clone());
        Ok(())
    })?;
    Ok(out)
}
