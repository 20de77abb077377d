//! Dressed master equation in the dressed basis.
//!
//! With the secular structure the coherences `r_NM` (N ≠ M) are decoupled
//! scalars rotating at `Λ_N − Λ_M` and decaying at `Θ^{N,M}`, while the
//! populations follow a downward cascade. Packing of `r` into reals reuses
//! the upper-triangle layout of the bare blocks with dimension `Q2+1`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{DressedBasis, RateTable};
use crate::bare::{upper_incl, upper_strict, BareCoefficients};
use crate::error::{Error, Result};
use crate::hilbert::CMatrix;
use crate::integrator::{integrate, IntegratorConfig, TimeGrid};

#[derive(Debug, Clone, PartialEq)]
pub struct DressedState {
    pub r: CMatrix,
}

impl DressedState {
    pub fn new(r: CMatrix) -> Self {
        Self { r }
    }

    /// Pure dressed eigenstate `|n⟩⟨n|`.
    pub fn eigenstate(dim: usize, n: usize) -> Self {
        let mut r = CMatrix::zeros(dim, dim);
        r[(n, n)] = Complex64::new(1.0, 0.0);
        Self { r }
    }

    pub fn dim(&self) -> usize {
        self.r.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.r.trace().re
    }

    pub fn populations(&self) -> Vec<f64> {
        (0..self.dim()).map(|n| self.r[(n, n)].re).collect()
    }
}

/// Packs `r` as `[Re r_pj (p ≤ j) | Im r_pj (p < j)]`.
pub fn pack_dressed(state: &DressedState) -> Vec<f64> {
    let d = state.dim();
    let re_len = d * (d + 1) / 2;
    let mut y = vec![0.0; d * d];
    for p in 0..d {
        for j in p..d {
            y[upper_incl(d, p, j)] = state.r[(p, j)].re;
            if j > p {
                y[re_len + upper_strict(d, p, j)] = state.r[(p, j)].im;
            }
        }
    }
    y
}

pub fn unpack_dressed(y: &[f64], dim: usize) -> Result<DressedState> {
    if y.len() != dim * dim {
        return Err(Error::LengthMismatch { expected: dim * dim, found: y.len() });
    }
    let re_len = dim * (dim + 1) / 2;
    let mut r = CMatrix::zeros(dim, dim);
    for p in 0..dim {
        r[(p, p)] = Complex64::new(y[upper_incl(dim, p, p)], 0.0);
        for j in (p + 1)..dim {
            let z = Complex64::new(y[upper_incl(dim, p, j)], y[re_len + upper_strict(dim, p, j)]);
            r[(p, j)] = z;
            r[(j, p)] = z.conj();
        }
    }
    Ok(DressedState { r })
}

/// `dr/dt` of the dressed master equation.
pub fn dme_rhs_dressed(state: &DressedState, basis: &DressedBasis, rates: &RateTable) -> CMatrix {
    let d = state.dim();
    let r = &state.r;
    let mut dr = CMatrix::zeros(d, d);
    for n in 0..d {
        let feed: f64 = ((n + 1)..d).map(|k| rates.gamma[(n, k)] * r[(k, k)].re).sum();
        dr[(n, n)] = Complex64::new(feed - rates.decay(n) * r[(n, n)].re, 0.0);
        for m in 0..d {
            if m != n {
                let w = basis.gap(n, m);
                dr[(n, m)] = r[(n, m)] * Complex64::new(-rates.theta[(n, m)], -w);
            }
        }
    }
    dr
}

fn dme_rhs_packed(y: &[f64], dy: &mut [f64], basis: &DressedBasis, rates: &RateTable) {
    let d = basis.dim();
    let re_len = d * (d + 1) / 2;
    for n in 0..d {
        let feed: f64 = ((n + 1)..d).map(|k| rates.gamma[(n, k)] * y[upper_incl(d, k, k)]).sum();
        let i = upper_incl(d, n, n);
        dy[i] = feed - rates.decay(n) * y[i];
        for m in (n + 1)..d {
            let ir = upper_incl(d, n, m);
            let ii = re_len + upper_strict(d, n, m);
            let w = basis.gap(n, m);
            let th = rates.theta[(n, m)];
            dy[ir] = w * y[ii] - th * y[ir];
            dy[ii] = -w * y[ir] - th * y[ii];
        }
    }
}

/// How the dressed-basis equations are propagated between samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DressedPropagation {
    /// Closed-form coherences and a matrix exponential for the cascade.
    Exact,
    /// Numerical integration of the packed real system.
    Ode(IntegratorConfig),
}

#[derive(Debug, Clone)]
pub struct DressedTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<DressedState>,
}

/// Upper-triangular generator of the population cascade.
fn cascade_generator(rates: &RateTable) -> DMatrix<f64> {
    let d = rates.dim();
    DMatrix::from_fn(d, d, |n, k| {
        if n == k {
            -rates.decay(n)
        } else if k > n {
            rates.gamma[(n, k)]
        } else {
            0.0
        }
    })
}

pub fn evolve_dme_dressed_with<O>(
    r0: &DressedState,
    basis: &DressedBasis,
    rates: &RateTable,
    grid: &TimeGrid,
    propagation: DressedPropagation,
    mut observer: O,
) -> Result<()>
where
    O: FnMut(usize, f64, &DressedState) -> Result<()>,
{
    let d = basis.dim();
    if r0.dim() != d || rates.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, found: r0.dim() });
    }
    match propagation {
        DressedPropagation::Ode(cfg) => {
            let y0 = pack_dressed(r0);
            integrate(
                |_, y, dy| dme_rhs_packed(y, dy, basis, rates),
                &y0,
                grid,
                &cfg,
                |i, t, y| observer(i, t, &unpack_dressed(y, d)?),
            )?;
            Ok(())
        }
        DressedPropagation::Exact => {
            let generator = cascade_generator(rates);
            let t0 = grid.start();
            let pops0 = DMatrix::from_fn(d, 1, |n, _| r0.r[(n, n)].re);
            let mut pops = pops0;
            let mut cached: Option<(f64, DMatrix<f64>)> = None;
            let mut prev = t0;
            let mut state = r0.clone();
            for (i, &t) in grid.times().iter().enumerate() {
                if i > 0 {
                    let dt = t - prev;
                    let reuse = matches!(&cached, Some((c, _)) if (c - dt).abs() <= 1e-12 * dt);
                    if !reuse {
                        cached = Some((dt, (&generator * dt).exp()));
                    }
                    let propagator = &cached.as_ref().unwrap().1;
                    pops = propagator * &pops;
                    prev = t;
                }
                let elapsed = t - t0;
                for n in 0..d {
                    state.r[(n, n)] = Complex64::new(pops[(n, 0)], 0.0);
                    for m in (n + 1)..d {
                        let z = Complex64::new(-rates.theta[(n, m)], -basis.gap(n, m)) * elapsed;
                        let v = r0.r[(n, m)] * z.exp();
                        state.r[(n, m)] = v;
                        state.r[(m, n)] = v.conj();
                    }
                }
                observer(i, t, &state)?;
            }
            Ok(())
        }
    }
}

pub fn evolve_dme_dressed(
    r0: &DressedState,
    basis: &DressedBasis,
    rates: &RateTable,
    grid: &TimeGrid,
    propagation: DressedPropagation,
) -> Result<DressedTrajectory> {
    let mut out = DressedTrajectory { times: Vec::with_capacity(grid.len()), states: Vec::with_capacity(grid.len()) };
    evolve_dme_dressed_with(r0, basis, rates, grid, propagation, |_, t, s| {
        out.times.push(t);
        out.states.push(s.clone());
        Ok(())
    })?;
    Ok(out)
}

/// `ρ = V r V†` split into the bare `A`, `B`, `C` blocks.
pub fn dressed_to_bare(state: &DressedState, basis: &DressedBasis) -> BareCoefficients {
    let v = &basis.coefficients;
    let mut rho = v * &state.r * v.adjoint();
    let n = rho.nrows();
    for i in 0..n {
        rho[(i, i)] = Complex64::new(rho[(i, i)].re, 0.0);
        for j in (i + 1)..n {
            let z = (rho[(i, j)] + rho[(j, i)].conj()) * 0.5;
            rho[(i, j)] = z;
            rho[(j, i)] = z.conj();
        }
    }
    BareCoefficients::from_density(basis.trunc, &rho).expect("basis and state share the truncation")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dressed::{compute_rates, dressed_basis, Reservoir, SpectralDensity};
    use crate::hilbert::{max_abs, ModelParams, TruncationScheme};
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn setup(q1: usize, omega0: f64, g: f64, rate: f64, kind: Reservoir) -> (DressedBasis, RateTable) {
        let b = dressed_basis(&ModelParams::new(1.0, omega0, g), TruncationScheme::new(q1), 0.0).unwrap();
        let sd = SpectralDensity::new(kind, rate, rate, rate, 1.0, omega0);
        let r = compute_rates(&b, &sd);
        (b, r)
    }

    fn random_density(d: usize, rng: &mut StdRng) -> DressedState {
        let m = CMatrix::from_fn(d, d, |_, _| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        let mut r = &m * m.adjoint();
        let tr = r.trace().re;
        r /= Complex64::new(tr, 0.0);
        for i in 0..d {
            r[(i, i)].im = 0.0;
        }
        DressedState { r }
    }

    #[test]
    fn ground_state_is_stationary() {
        let (b, r) = setup(5, 1.5, 0.5, 1e-3, Reservoir::White);
        let s = DressedState::eigenstate(b.dim(), 0);
        let dr = dme_rhs_dressed(&s, &b, &r);
        assert!(dr.iter().all(|z| *z == Complex64::new(0.0, 0.0)));
    }

    #[test]
    fn eigenstate_cascade_bookkeeping() {
        let (b, r) = setup(5, 1.5, 0.5, 1e-3, Reservoir::Ohmic);
        let k = 7;
        let s = DressedState::eigenstate(b.dim(), k);
        let dr = dme_rhs_dressed(&s, &b, &r);
        assert_eq!(dr[(k, k)].re, -r.decay(k));
        for j in 0..k {
            assert_eq!(dr[(j, j)].re, r.gamma[(j, k)]);
        }
        assert!(dr.trace().re.abs() < 1e-18);
    }

    #[test]
    fn trace_derivative_vanishes() {
        let (b, r) = setup(6, 2.9, 0.8, 1e-2, Reservoir::White);
        let mut rng = StdRng::seed_from_u64(11);
        for _ in 0..20 {
            let s = random_density(b.dim(), &mut rng);
            assert!(dme_rhs_dressed(&s, &b, &r).trace().norm() < 1e-14);
        }
    }

    #[test]
    fn packing_roundtrip_and_index_law() {
        let d = 6;
        let q2 = d - 1;
        let mut rng = StdRng::seed_from_u64(5);
        let s = random_density(d, &mut rng);
        let y = pack_dressed(&s);
        assert_eq!(unpack_dressed(&y, d).unwrap(), s);
        for p in 0..d {
            for j in p..d {
                // one-based index law p·Q2 + j + 1 − p(p−1)/2
                let one_based = p * q2 + j + 1 - p * p.saturating_sub(1) / 2;
                assert_eq!(y[one_based - 1], s.r[(p, j)].re);
                if j > p {
                    let one_based = (q2 + 1) * (q2 + 2) / 2 + p * q2 + j - p * (p + 1) / 2;
                    assert_eq!(y[one_based - 1], s.r[(p, j)].im);
                }
            }
        }
        assert!(unpack_dressed(&y[1..], d).is_err());
    }

    #[test]
    fn two_level_amplitude_damping() {
        let (b, r) = setup(0, 1.3, 0.0, 0.05, Reservoir::White);
        let g01 = r.gamma[(0, 1)];
        assert!(g01 > 0.0);
        let grid = TimeGrid::uniform(40.0, 41).unwrap();
        let mut r0 = DressedState::eigenstate(2, 1);
        r0.r[(0, 1)] = Complex64::new(0.3, 0.1);
        r0.r[(1, 0)] = Complex64::new(0.3, -0.1);
        for prop in [DressedPropagation::Exact, DressedPropagation::Ode(IntegratorConfig::default())] {
            let traj = evolve_dme_dressed(&r0, &b, &r, &grid, prop).unwrap();
            for (t, s) in traj.times.iter().zip(&traj.states) {
                let p1 = (-g01 * t).exp();
                assert!((s.r[(1, 1)].re - p1).abs() < 1e-9);
                assert!((s.r[(0, 0)].re - (1.0 - p1)).abs() < 1e-9);
                let coh = Complex64::new(0.3, 0.1) * Complex64::new(-r.theta[(0, 1)], -b.gap(0, 1)).scale(*t).exp();
                assert!((s.r[(0, 1)] - coh).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn unitary_limit_rotation() {
        let (b, r) = setup(4, 1.5, 0.4, 0.0, Reservoir::White);
        let mut rng = StdRng::seed_from_u64(2);
        let r0 = random_density(b.dim(), &mut rng);
        let grid = TimeGrid::uniform(10.0, 6).unwrap();
        let traj = evolve_dme_dressed(&r0, &b, &r, &grid, DressedPropagation::Exact).unwrap();
        for (t, s) in traj.times.iter().zip(&traj.states) {
            for n in 0..b.dim() {
                for m in 0..b.dim() {
                    let expect = r0.r[(n, m)] * Complex64::new(0.0, -b.gap(n, m) * t).exp();
                    assert!((s.r[(n, m)] - expect).norm() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn relaxes_to_dressed_ground_state() {
        let (b, r) = setup(3, 1.5, 0.5, 0.05, Reservoir::White);
        let d = b.dim();
        let min_rate = (1..d).map(|n| r.decay(n)).fold(f64::INFINITY, f64::min);
        assert!(min_rate > 0.0);
        let t_end = 20.0 / min_rate;
        let grid = TimeGrid::new(vec![0.0, t_end / 2.0, t_end]).unwrap();
        let r0 = DressedState::eigenstate(d, d - 1);
        let traj = evolve_dme_dressed(&r0, &b, &r, &grid, DressedPropagation::Exact).unwrap();
        assert!(traj.states[2].r[(0, 0)].re > 0.999);
        for s in &traj.states {
            assert!((s.trace() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn exact_and_ode_paths_agree() {
        let (b, r) = setup(4, 2.9699, 0.3, 1e-2, Reservoir::Ohmic);
        let mut rng = StdRng::seed_from_u64(9);
        let r0 = random_density(b.dim(), &mut rng);
        let grid = TimeGrid::uniform(30.0, 31).unwrap();
        let exact = evolve_dme_dressed(&r0, &b, &r, &grid, DressedPropagation::Exact).unwrap();
        let ode = evolve_dme_dressed(&r0, &b, &r, &grid, DressedPropagation::Ode(IntegratorConfig::default())).unwrap();
        for (a, o) in exact.states.iter().zip(&ode.states) {
            assert!(max_abs(&(&a.r - &o.r)) < 1e-8);
        }
    }

    #[test]
    fn energy_rank_is_nonincreasing() {
        let (b, r) = setup(4, 1.5, 0.5, 1e-2, Reservoir::White);
        let d = b.dim();
        let mut r0 = DressedState::new(CMatrix::zeros(d, d));
        for n in 0..d {
            r0.r[(n, n)] = Complex64::new(1.0 / d as f64, 0.0);
        }
        let grid = TimeGrid::uniform(500.0, 101).unwrap();
        let traj = evolve_dme_dressed(&r0, &b, &r, &grid, DressedPropagation::Exact).unwrap();
        let rank = |s: &DressedState| (0..d).map(|n| n as f64 * s.r[(n, n)].re).sum::<f64>();
        for w in traj.states.windows(2) {
            assert!(rank(&w[1]) <= rank(&w[0]) + 1e-13);
        }
    }

    #[test]
    fn dressed_to_bare_matches_dense_congruence() {
        let (b, _) = setup(5, 1.5, 0.4, 0.0, Reservoir::White);
        let mut rng = StdRng::seed_from_u64(4);
        let s = random_density(b.dim(), &mut rng);
        let bare = dressed_to_bare(&s, &b);
        let dense = &b.coefficients * &s.r * b.coefficients.adjoint();
        assert!(max_abs(&(&bare.to_density() - &dense)) < 1e-12);
    }

    #[test]
    fn bare_limit_is_a_relabeling() {
        let (b, _) = setup(3, 1.5, 0.0, 0.0, Reservoir::White);
        let s = DressedState::eigenstate(b.dim(), 2);
        let bare = dressed_to_bare(&s, &b);
        let rho = bare.to_density();
        let i = (0..b.dim()).find(|&i| b.coefficients[(i, 2)].norm() > 0.5).unwrap();
        assert!((rho[(i, i)].re - 1.0).abs() < 1e-15);
        assert!((rho.iter().map(|z| z.norm()).sum::<f64>() - 1.0).abs() < 1e-14);
    }
}
