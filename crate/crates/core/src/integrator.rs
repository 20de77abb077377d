//! Adaptive embedded Runge–Kutta–Verner 6(5) integrator.
//!
//! Tableau: Verner's eight-stage 6(5) pair (the one used by the classic
//! DVERK code). The sixth-order solution is propagated and the fifth-order
//! solution provides the error estimate. Every grid time is hit exactly by
//! clipping the step; there is no interpolation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub initial_step: f64,
    pub max_step: f64,
    pub min_step: f64,
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-9,
            abs_tol: 1e-11,
            initial_step: 1e-3,
            max_step: f64::INFINITY,
            min_step: 1e-13,
            max_steps: 200_000_000,
        }
    }
}

impl IntegratorConfig {
    pub fn with_tolerances(rel_tol: f64, abs_tol: f64) -> Self {
        Self { rel_tol, abs_tol, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(Error::Validation("integrator tolerances must be positive".into()));
        }
        if !(self.min_step < self.max_step) || !(self.min_step >= 0.0) {
            return Err(Error::Validation("integrator requires 0 <= min_step < max_step".into()));
        }
        if !(self.initial_step > 0.0) {
            return Err(Error::Validation("integrator initial_step must be positive".into()));
        }
        Ok(())
    }
}

/// Strictly increasing, finite sample times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    times: Vec<f64>,
}

impl TimeGrid {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::InvalidGrid("grid is empty".into()));
        }
        if times.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidGrid("grid contains non-finite times".into()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidGrid("grid is not strictly increasing".into()));
        }
        Ok(Self { times })
    }

    /// `n_samples` equally spaced times on `[0, t_max]`.
    pub fn uniform(t_max: f64, n_samples: usize) -> Result<Self> {
        if n_samples == 0 {
            return Err(Error::InvalidGrid("n_samples must be >= 1".into()));
        }
        if n_samples == 1 {
            return Self::new(vec![0.0]);
        }
        if !(t_max > 0.0) {
            return Err(Error::InvalidGrid(format!("t_max must be > 0, got {t_max}")));
        }
        let n = (n_samples - 1) as f64;
        Self::new((0..n_samples).map(|i| t_max * i as f64 / n).collect())
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn start(&self) -> f64 {
        self.times[0]
    }

    pub fn end(&self) -> f64 {
        *self.times.last().unwrap()
    }

    /// Index of the grid time within `rel_tol·max(1,|t|)` of `t`.
    pub fn index_of(&self, t: f64, rel_tol: f64) -> Option<usize> {
        let tol = rel_tol * t.abs().max(1.0);
        self.times.iter().position(|&s| (s - t).abs() <= tol)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IntegrationStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
}

const STAGES: usize = 8;

const C: [f64; STAGES] = [0.0, 1.0 / 6.0, 4.0 / 15.0, 2.0 / 3.0, 5.0 / 6.0, 1.0, 1.0 / 15.0, 1.0];

const A: [[f64; STAGES - 1]; STAGES] = [
    [0.0; 7],
    [1.0 / 6.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [4.0 / 75.0, 16.0 / 75.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [5.0 / 6.0, -8.0 / 3.0, 5.0 / 2.0, 0.0, 0.0, 0.0, 0.0],
    [-165.0 / 64.0, 55.0 / 6.0, -425.0 / 64.0, 85.0 / 96.0, 0.0, 0.0, 0.0],
    [12.0 / 5.0, -8.0, 4015.0 / 612.0, -11.0 / 36.0, 88.0 / 255.0, 0.0, 0.0],
    [-8263.0 / 15000.0, 124.0 / 75.0, -643.0 / 680.0, -81.0 / 250.0, 2484.0 / 10625.0, 0.0, 0.0],
    [3501.0 / 1720.0, -300.0 / 43.0, 297275.0 / 52632.0, -319.0 / 2322.0, 24068.0 / 84065.0, 0.0, 3850.0 / 26703.0],
];

const B6: [f64; STAGES] =
    [3.0 / 40.0, 0.0, 875.0 / 2244.0, 23.0 / 72.0, 264.0 / 1955.0, 0.0, 125.0 / 11592.0, 43.0 / 616.0];

const B5: [f64; STAGES] = [13.0 / 160.0, 0.0, 2375.0 / 5984.0, 5.0 / 16.0, 12.0 / 85.0, 3.0 / 44.0, 0.0, 0.0];

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 5.0;
const BETA: f64 = 0.04;
const EXPO: f64 = 1.0 / 6.0 - 0.75 * BETA;

/// Integrates `ẏ = rhs(t, y)` and hands each grid sample to `observer`.
///
/// The first sample is `y0` at `grid.start()`.
pub fn integrate<F, O>(
    mut rhs: F,
    y0: &[f64],
    grid: &TimeGrid,
    cfg: &IntegratorConfig,
    mut observer: O,
) -> Result<IntegrationStats>
where
    F: FnMut(f64, &[f64], &mut [f64]),
    O: FnMut(usize, f64, &[f64]) -> Result<()>,
{
    cfg.validate()?;
    let n = y0.len();
    let mut y = y0.to_vec();
    let mut k: Vec<Vec<f64>> = vec![vec![0.0; n]; STAGES];
    let mut stage = vec![0.0; n];
    let mut y_new = vec![0.0; n];
    let mut stats = IntegrationStats::default();

    let times = grid.times();
    let mut t = times[0];
    observer(0, t, &y)?;

    let span = grid.end() - grid.start();
    let mut h = cfg.initial_step.min(cfg.max_step).min(if span > 0.0 { span } else { 1.0 });
    let mut err_old: f64 = 1e-4;
    let mut have_k0 = false;

    for (idx, &target) in times.iter().enumerate().skip(1) {
        while t < target {
            if stats.accepted + stats.rejected >= cfg.max_steps {
                return Err(Error::MaxStepsExceeded { t, max_steps: cfg.max_steps });
            }
            let remaining = target - t;
            let clipped = h >= remaining;
            let step = if clipped { remaining } else { h };

            if !have_k0 {
                rhs(t, &y, &mut k[0]);
                stats.rhs_evals += 1;
                have_k0 = true;
            }
            for s in 1..STAGES {
                for i in 0..n {
                    let mut acc = 0.0;
                    for (j, kj) in k.iter().enumerate().take(s) {
                        let a = A[s][j];
                        if a != 0.0 {
                            acc += a * kj[i];
                        }
                    }
                    stage[i] = y[i] + step * acc;
                }
                let (head, tail) = k.split_at_mut(s);
                let _ = head;
                rhs(t + C[s] * step, &stage, &mut tail[0]);
                stats.rhs_evals += 1;
            }

            let mut y_scale: f64 = 0.0;
            let mut err_max: f64 = 0.0;
            let mut finite = true;
            for i in 0..n {
                let mut hi = 0.0;
                let mut lo = 0.0;
                for s in 0..STAGES {
                    hi += B6[s] * k[s][i];
                    lo += B5[s] * k[s][i];
                }
                y_new[i] = y[i] + step * hi;
                finite &= y_new[i].is_finite();
                err_max = err_max.max((step * (hi - lo)).abs());
                y_scale = y_scale.max(y[i].abs()).max(y_new[i].abs());
            }
            let tol = cfg.abs_tol + cfg.rel_tol * y_scale;
            let err = if finite { err_max / tol } else { f64::NAN };

            if err.is_finite() && err <= 1.0 {
                stats.accepted += 1;
                t = if clipped { target } else { t + step };
                std::mem::swap(&mut y, &mut y_new);
                have_k0 = false;
                let e = err.max(1e-10);
                let fac = (e.powf(EXPO) / err_old.powf(BETA) / SAFETY).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
                let proposal = (step / fac).min(cfg.max_step);
                // a clipped step says nothing about the natural step size
                h = if clipped { h.max(proposal) } else { proposal };
                err_old = e.max(1e-4);
            } else {
                stats.rejected += 1;
                let fac =
                    if err.is_finite() { (err.powf(EXPO) / SAFETY).clamp(1.0, 1.0 / FAC_MIN) } else { 1.0 / FAC_MIN };
                h = step / fac;
                if h < cfg.min_step {
                    return Err(Error::StepUnderflow { t, step: h });
                }
                // k[0] stays valid: same (t, y)
            }
        }
        observer(idx, t, &y)?;
    }
    Ok(stats)
}

/// Convenience wrapper collecting every sample.
pub fn integrate_samples<F>(rhs: F, y0: &[f64], grid: &TimeGrid, cfg: &IntegratorConfig) -> Result<Vec<Vec<f64>>>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let mut out = Vec::with_capacity(grid.len());
    integrate(rhs, y0, grid, cfg, |_, _, y| {
        out.push(y.to_vec());
        Ok(())
    })?;
    Ok(out)
}
