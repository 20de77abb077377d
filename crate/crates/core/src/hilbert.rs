//! Truncated qubit ⊗ Fock space, Rabi Hamiltonian and bare operators.
//!
//! Canonical bare ordering: indices `0..=Q1` hold `|g, f_n⟩` with `n = index`,
//! indices `Q1+1..=Q2` hold `|e, f_n⟩` with `n = index - (Q1+1)`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub type CMatrix = DMatrix<Complex64>;

pub(crate) const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
pub(crate) const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruncationScheme {
    q1: usize,
}

impl TruncationScheme {
    pub fn new(q1: usize) -> Self {
        Self { q1 }
    }

    /// Maximum photon number kept.
    pub fn q1(&self) -> usize {
        self.q1
    }

    /// Largest dressed index, `2·Q1 + 1`.
    pub fn q2(&self) -> usize {
        2 * self.q1 + 1
    }

    /// Number of Fock states kept, `Q1 + 1`.
    pub fn field_dim(&self) -> usize {
        self.q1 + 1
    }

    /// Total bare dimension `2(Q1+1) = Q2 + 1`.
    pub fn dim(&self) -> usize {
        self.q2() + 1
    }

    #[inline]
    pub fn ground(&self, n: usize) -> usize {
        n
    }

    #[inline]
    pub fn excited(&self, n: usize) -> usize {
        self.q1 + 1 + n
    }

    /// Photon number of bare index `i`.
    #[inline]
    pub fn photons(&self, i: usize) -> usize {
        if i <= self.q1 {
            i
        } else {
            i - self.q1 - 1
        }
    }

    #[inline]
    pub fn is_excited(&self, i: usize) -> bool {
        i > self.q1
    }

    /// Eigenvalue of the parity `σ_z (−1)^n` on bare index `i`.
    pub fn parity(&self, i: usize) -> i8 {
        let sign: i8 = if self.photons(i).is_multiple_of(2) { 1 } else { -1 };
        if self.is_excited(i) {
            sign
        } else {
            -sign
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModulationParams {
    pub epsilon: f64,
    pub eta0: f64,
    pub alpha: f64,
}

impl ModulationParams {
    /// Instantaneous modulation frequency `η(t) = η₀ + α t`.
    pub fn eta(&self, t: f64) -> f64 {
        self.eta0 + self.alpha * t
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub omega: f64,
    pub omega0: f64,
    pub g: f64,
    pub modulation: Option<ModulationParams>,
}

impl ModelParams {
    pub fn new(omega: f64, omega0: f64, g: f64) -> Self {
        Self { omega, omega0, g, modulation: None }
    }

    pub fn with_modulation(mut self, m: ModulationParams) -> Self {
        self.modulation = Some(m);
        self
    }

    /// The model with the modulation switched off.
    pub fn unmodulated(&self) -> Self {
        Self { modulation: None, ..*self }
    }

    pub fn is_modulated(&self) -> bool {
        self.modulation.is_some_and(|m| m.epsilon != 0.0)
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.omega > 0.0) {
            return Err(format!("model.omega must be > 0, got {}", self.omega));
        }
        if !(self.omega0 > 0.0) {
            return Err(format!("model.Omega0 must be > 0, got {}", self.omega0));
        }
        if !(self.g >= 0.0) {
            return Err(format!("model.g must be >= 0, got {}", self.g));
        }
        if let Some(m) = self.modulation {
            if !(m.epsilon >= 0.0) {
                return Err(format!("model.modulation.epsilon must be >= 0, got {}", m.epsilon));
            }
            if m.epsilon > 0.5 {
                log::warn!("modulation amplitude epsilon = {} is not small", m.epsilon);
            }
        }
        Ok(())
    }
}

/// Qubit transition frequency `Ω(t) = Ω₀{1 + ε sin[η(t) t]}`.
pub fn qubit_frequency(params: &ModelParams, t: f64) -> f64 {
    match params.modulation {
        None => params.omega0,
        Some(m) => params.omega0 * (1.0 + m.epsilon * (m.eta(t) * t).sin()),
    }
}

#[derive(Debug, Clone)]
pub struct OperatorSet {
    pub trunc: TruncationScheme,
    pub a: CMatrix,
    pub a_dagger: CMatrix,
    pub n_op: CMatrix,
    pub x: CMatrix,
    pub sigma_minus: CMatrix,
    pub sigma_plus: CMatrix,
    pub sigma_x: CMatrix,
    pub sigma_z: CMatrix,
}

impl OperatorSet {
    /// `|e⟩⟨e| ⊗ 1`.
    pub fn excited_projector(&self) -> CMatrix {
        let d = self.trunc.dim();
        CMatrix::from_fn(d, d, |i, j| if i == j && self.trunc.is_excited(i) { ONE } else { ZERO })
    }

    /// Diagonal parity operator `σ_z (−1)^n`.
    pub fn parity(&self) -> CMatrix {
        let d = self.trunc.dim();
        CMatrix::from_fn(d, d, |i, j| if i == j { Complex64::new(self.trunc.parity(i) as f64, 0.0) } else { ZERO })
    }
}

pub fn build_operators(trunc: TruncationScheme) -> OperatorSet {
    let d = trunc.dim();
    let q1 = trunc.q1();
    let same_branch = |i: usize, j: usize| trunc.is_excited(i) == trunc.is_excited(j);

    let a = CMatrix::from_fn(d, d, |i, j| {
        if same_branch(i, j) && trunc.photons(j) == trunc.photons(i) + 1 {
            Complex64::new((trunc.photons(j) as f64).sqrt(), 0.0)
        } else {
            ZERO
        }
    });
    let a_dagger = a.adjoint();
    let n_op = CMatrix::from_fn(d, d, |i, j| if i == j { Complex64::new(trunc.photons(i) as f64, 0.0) } else { ZERO });
    let x = &a + &a_dagger;
    let sigma_minus = CMatrix::from_fn(d, d, |i, j| if i <= q1 && j == trunc.excited(i) { ONE } else { ZERO });
    let sigma_plus = sigma_minus.adjoint();
    let sigma_x = &sigma_plus + &sigma_minus;
    let sigma_z = CMatrix::from_fn(d, d, |i, j| {
        if i != j {
            ZERO
        } else if trunc.is_excited(i) {
            ONE
        } else {
            -ONE
        }
    });

    OperatorSet { trunc, a, a_dagger, n_op, x, sigma_minus, sigma_plus, sigma_x, sigma_z }
}

/// `H = ω n + Ω(t)|e⟩⟨e| + g X σ_x`, assembled entry by entry so that
/// `H = H†` holds exactly.
pub fn build_hamiltonian(params: &ModelParams, ops: &OperatorSet, t: f64) -> CMatrix {
    let trunc = ops.trunc;
    let d = trunc.dim();
    let big_omega = qubit_frequency(params, t);
    let mut h = CMatrix::zeros(d, d);
    for i in 0..d {
        let mut diag = params.omega * trunc.photons(i) as f64;
        if trunc.is_excited(i) {
            diag += big_omega;
        }
        h[(i, i)] = Complex64::new(diag, 0.0);
    }
    // X σ_x couples |g, n⟩ ↔ |e, n ± 1⟩ with amplitude g √max(n, n±1).
    for n in 0..trunc.field_dim() {
        for m in [n + 1].into_iter().chain(n.checked_sub(1)) {
            if m > trunc.q1() {
                continue;
            }
            let amp = params.g * (n.max(m) as f64).sqrt();
            let (gi, ej) = (trunc.ground(n), trunc.excited(m));
            h[(gi, ej)] = Complex64::new(amp, 0.0);
            h[(ej, gi)] = Complex64::new(amp, 0.0);
        }
    }
    h
}

pub(crate) fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn truncation_dimensions() {
        for q1 in 0..6 {
            let t = TruncationScheme::new(q1);
            assert_eq!(t.q2(), 2 * q1 + 1);
            assert_eq!(t.dim(), 2 * (q1 + 1));
            assert_eq!(t.dim(), t.q2() + 1);
        }
    }

    #[test]
    fn ladder_elements() {
        let ops = build_operators(TruncationScheme::new(1));
        let t = ops.trunc;
        assert_eq!(ops.x[(t.ground(0), t.ground(1))], c(1.0));
        assert_eq!(ops.n_op[(t.ground(1), t.ground(1))], c(1.0));

        let ops = build_operators(TruncationScheme::new(3));
        let t = ops.trunc;
        assert!((ops.a[(t.excited(2), t.excited(3))].re - 1.7320508).abs() < 1e-7);
    }

    #[test]
    fn sigma_z_single_photon_space() {
        let ops = build_operators(TruncationScheme::new(0));
        assert_eq!(ops.sigma_z[(0, 0)], c(-1.0));
        assert_eq!(ops.sigma_z[(1, 1)], c(1.0));
        assert_eq!(ops.sigma_z[(0, 1)], ZERO);
    }

    #[test]
    fn operator_relations() {
        let ops = build_operators(TruncationScheme::new(4));
        assert_eq!(ops.a_dagger, ops.a.adjoint());
        assert_eq!(ops.x, ops.x.transpose());
        assert!(ops.x.iter().all(|z| z.im == 0.0));
        assert_eq!(ops.sigma_x, &ops.sigma_plus + &ops.sigma_minus);
        assert!(max_abs(&(&ops.n_op - &ops.a_dagger * &ops.a)) < 1e-15);
    }

    #[test]
    fn commutator_is_identity_below_edge() {
        let trunc = TruncationScheme::new(5);
        let ops = build_operators(trunc);
        let comm = &ops.a * &ops.a_dagger - &ops.a_dagger * &ops.a;
        for i in 0..trunc.dim() {
            for j in 0..trunc.dim() {
                if trunc.photons(i) == trunc.q1() || trunc.photons(j) == trunc.q1() {
                    continue;
                }
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((comm[(i, j)] - c(expect)).norm() < 1e-14);
            }
        }
        // the edge state carries the truncation defect
        let edge = trunc.ground(trunc.q1());
        assert!((comm[(edge, edge)].re + trunc.q1() as f64).abs() < 1e-12);
    }

    #[test]
    fn decoupled_hamiltonian_is_diagonal() {
        let trunc = TruncationScheme::new(3);
        let ops = build_operators(trunc);
        let p = ModelParams::new(1.0, 1.5, 0.0);
        let h = build_hamiltonian(&p, &ops, 0.0);
        for i in 0..trunc.dim() {
            for j in 0..trunc.dim() {
                if i != j {
                    assert_eq!(h[(i, j)], ZERO);
                }
            }
        }
        assert_eq!(h[(trunc.excited(2), trunc.excited(2))], c(3.5));
    }

    #[test]
    fn rotating_and_counter_rotating_terms() {
        let trunc = TruncationScheme::new(3);
        let ops = build_operators(trunc);
        let p = ModelParams::new(1.0, 1.5, 0.37);
        let h = build_hamiltonian(&p, &ops, 0.0);
        assert_eq!(h[(trunc.excited(0), trunc.ground(1))], c(0.37));
        assert_eq!(h[(trunc.excited(1), trunc.ground(0))], c(0.37));
        let dense = ops.n_op.map(|z| z * 1.0) + ops.excited_projector() * c(1.5) + &ops.x * &ops.sigma_x * c(0.37);
        assert!(max_abs(&(&h - &dense)) < 1e-15);
    }

    #[test]
    fn hamiltonian_trace() {
        let ops = build_operators(TruncationScheme::new(2));
        let h = build_hamiltonian(&ModelParams::new(1.0, 1.5, 0.5), &ops, 0.0);
        assert!((h.trace().re - 10.5).abs() < 1e-14);
    }

    #[test]
    fn hermitian_and_parity_symmetric() {
        let ops = build_operators(TruncationScheme::new(6));
        let p =
            ModelParams::new(1.0, 0.5, 0.8).with_modulation(ModulationParams { epsilon: 0.08, eta0: 2.0, alpha: 1e-3 });
        let parity = ops.parity();
        for t in [0.0, 0.3, 17.0, 512.5] {
            let h = build_hamiltonian(&p, &ops, t);
            assert_eq!(h, h.adjoint());
            let comm = &h * &parity - &parity * &h;
            assert!(max_abs(&comm) < 1e-12);
        }
    }

    #[test]
    fn static_hamiltonian_is_time_independent() {
        let ops = build_operators(TruncationScheme::new(4));
        let p = ModelParams::new(1.0, 2.9699, 0.1);
        assert_eq!(build_hamiltonian(&p, &ops, 0.0), build_hamiltonian(&p, &ops, 1234.5));
    }

    #[test]
    fn qubit_frequency_modulation() {
        let mut p = ModelParams::new(1.0, 0.5, 0.05);
        assert_eq!(qubit_frequency(&p, 17.3), 0.5);
        let m = ModulationParams { epsilon: 0.08, eta0: 2.00715, alpha: -5e-8 };
        p = p.with_modulation(m);
        assert_eq!(qubit_frequency(&p, 0.0), 0.5);
        let expect = 0.5 * (1.0 + 0.08 * ((2.00715 - 5e-6) * 100.0f64).sin());
        assert!((qubit_frequency(&p, 100.0) - expect).abs() < 1e-15);
        let off = ModelParams::new(1.0, 0.5, 0.05).with_modulation(ModulationParams { epsilon: 0.0, ..m });
        assert_eq!(qubit_frequency(&off, 17.3), 0.5);
    }
}
