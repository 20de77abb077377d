//! Independent oracles shared by the integration and acceptance tests.
//! Nothing here calls into the solver code paths it is used to check.

#![allow(dead_code)]

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

pub type CM = DMatrix<Complex64>;

pub fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Dense Rabi Hamiltonian, basis `|g,0..Q1⟩` then `|e,0..Q1⟩`.
pub fn rabi_hamiltonian(q1: usize, omega: f64, qubit: f64, g: f64) -> CM {
    let d = q1 + 1;
    let mut h = CM::zeros(2 * d, 2 * d);
    for n in 0..d {
        h[(n, n)] = c(omega * n as f64);
        h[(d + n, d + n)] = c(omega * n as f64 + qubit);
    }
    // g (a + a†) σx couples |g,n⟩ ↔ |e,n±1⟩
    for n in 0..d {
        for m in [n.wrapping_sub(1), n + 1] {
            if m < d {
                let amp = g * (n.max(m) as f64).sqrt();
                h[(n, d + m)] = c(amp);
                h[(d + m, n)] = c(amp);
            }
        }
    }
    h
}

/// `ρ(t) = e^{-iHt} ρ₀ e^{iHt}` via the eigen-decomposition of `H`.
pub struct UnitaryOracle {
    vecs: CM,
    vals: Vec<f64>,
    rho0_eig: CM,
}

impl UnitaryOracle {
    pub fn new(h: &CM, rho0: &CM) -> Self {
        let eig = SymmetricEigen::new(h.clone());
        let vecs = eig.eigenvectors;
        let rho0_eig = vecs.adjoint() * rho0 * &vecs;
        Self { vecs, vals: eig.eigenvalues.iter().copied().collect(), rho0_eig }
    }

    pub fn at(&self, t: f64) -> CM {
        let d = self.vals.len();
        let r = CM::from_fn(d, d, |i, j| {
            self.rho0_eig[(i, j)] * Complex64::new(0.0, -(self.vals[i] - self.vals[j]) * t).exp()
        });
        &self.vecs * r * self.vecs.adjoint()
    }
}

pub fn trace_distance(a: &CM, b: &CM) -> f64 {
    let diff = a - b;
    0.5 * SymmetricEigen::new(diff).eigenvalues.iter().map(|x| x.abs()).sum::<f64>()
}

pub fn min_eigenvalue(m: &CM) -> f64 {
    SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

/// Random full-rank density matrix `G G† / Tr`.
pub fn random_density(rng: &mut StdRng, dim: usize) -> CM {
    let g = CM::from_fn(dim, dim, |_, _| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
    let rho = &g * g.adjoint();
    let tr = rho.trace();
    rho / tr
}

/// Random Hermitian matrix with entries of order one.
pub fn random_hermitian(rng: &mut StdRng, dim: usize) -> CM {
    let g = CM::from_fn(dim, dim, |_, _| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
    (&g + g.adjoint()) * c(0.5)
}

/// Coherent amplitudes from the closed form, no recursion.
pub fn coherent_vector(alpha: f64, q1: usize) -> Vec<f64> {
    let mut log_fact = 0.0;
    (0..=q1)
        .map(|n| {
            if n > 0 {
                log_fact += (n as f64).ln();
            }
            let log_mag = -alpha * alpha / 2.0 + n as f64 * alpha.abs().ln() - 0.5 * log_fact;
            if alpha == 0.0 {
                if n == 0 {
                    1.0
                } else {
                    0.0
                }
            } else {
                alpha.signum().powi(n as i32) * log_mag.exp()
            }
        })
        .collect()
}

pub fn projector(v: &[f64]) -> CM {
    CM::from_fn(v.len(), v.len(), |i, j| c(v[i] * v[j]))
}

/// Orthonormal basis whose first vector is `psi`, completed by Gram-Schmidt
/// over the canonical vectors.
pub fn completed_basis(psi: &[f64]) -> Vec<Vec<Complex64>> {
    let d = psi.len();
    let norm = psi.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut basis: Vec<Vec<Complex64>> = vec![psi.iter().map(|x| c(x / norm)).collect()];
    for k in 0..d {
        let mut v: Vec<Complex64> = (0..d).map(|i| if i == k { c(1.0) } else { c(0.0) }).collect();
        for _ in 0..2 {
            for b in &basis {
                let proj: Complex64 = b.iter().zip(&v).map(|(x, y)| x.conj() * y).sum();
                for (vi, bi) in v.iter_mut().zip(b) {
                    *vi -= proj * bi;
                }
            }
        }
        let n = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if n > 1e-6 && basis.len() < d {
            basis.push(v.iter().map(|x| x / n).collect());
        }
    }
    basis
}

/// `Σ_{ij} (p_i − p_j)²/(p_i + p_j) ⟨i|A|j⟩⟨j|B|i⟩` over an explicit eigenbasis.
pub fn pair_sum(p: &[f64], basis: &[Vec<Complex64>], a: &CM, b: &CM) -> f64 {
    let elem = |u: &[Complex64], op: &CM, w: &[Complex64]| -> Complex64 {
        let mut z = c(0.0);
        for r in 0..u.len() {
            for s in 0..w.len() {
                z += u[r].conj() * op[(r, s)] * w[s];
            }
        }
        z
    };
    let mut acc = 0.0;
    for i in 0..p.len() {
        for j in 0..p.len() {
            if p[i] + p[j] > 0.0 {
                let w = (p[i] - p[j]).powi(2) / (p[i] + p[j]);
                if w != 0.0 {
                    acc += w * (elem(&basis[i], a, &basis[j]) * elem(&basis[j], b, &basis[i])).re;
                }
            }
        }
    }
    acc
}

pub fn number_op(d: usize) -> CM {
    CM::from_fn(d, d, |i, j| if i == j { c(i as f64) } else { c(0.0) })
}

/// `(a + a†, −i(a − a†))`.
pub fn quadrature_ops(d: usize) -> (CM, CM) {
    let a = CM::from_fn(d, d, |i, j| if j == i + 1 { c((j as f64).sqrt()) } else { c(0.0) });
    let ad = a.adjoint();
    (&a + &ad, (&a - &ad) * Complex64::new(0.0, -1.0))
}

/// `(M_av, M_opt)` from a brute-force displacement Fisher matrix.
pub fn displacement_oracle(p: &[f64], basis: &[Vec<Complex64>]) -> (f64, f64) {
    let (x1, x2) = quadrature_ops(basis[0].len());
    let f11 = pair_sum(p, basis, &x1, &x1);
    let f22 = pair_sum(p, basis, &x2, &x2);
    let f12 = 0.5 * (pair_sum(p, basis, &x1, &x2) + pair_sum(p, basis, &x2, &x1));
    let mean = 0.5 * (f11 + f22);
    let lmax = mean + (0.25 * (f11 - f22).powi(2) + f12 * f12).sqrt();
    (0.25 * (f11 + f22), 0.5 * lmax)
}
