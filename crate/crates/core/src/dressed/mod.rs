//! Dressed (eigen) basis of the Rabi Hamiltonian and the dressed-picture
//! master equation in both the dressed and the bare representation.

mod dme;
mod rates;
mod wtensor;

pub use dme::{
    dme_rhs_dressed, dressed_to_bare, evolve_dme_dressed, evolve_dme_dressed_with, pack_dressed, unpack_dressed,
    DressedPropagation, DressedState, DressedTrajectory,
};
pub use rates::{compute_rates, rate, Channel, RateTable, Reservoir, SpectralDensity};
pub use wtensor::{
    compute_w_tensors, evolve_dme_bare, evolve_dme_bare_with, DmeBareRhs, InputBlock, OutputBlock, WEntry, WEvaluation,
    WTensors, DEFAULT_PRUNE,
};

use nalgebra::linalg::SymmetricEigen;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hilbert::{max_abs, CMatrix, TruncationScheme, ZERO};

/// Dressed matrix elements `O^{nm} = ⟨n|O|m⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixElements {
    pub sigma_z: CMatrix,
    pub sigma_x: CMatrix,
    pub x: CMatrix,
}

#[derive(Debug, Clone)]
pub struct DressedBasis {
    pub trunc: TruncationScheme,
    /// `Λ_0 ≤ Λ_1 ≤ … ≤ Λ_{Q2}`.
    pub eigenvalues: Vec<f64>,
    /// Column `n` holds `c_{i,n}` in the canonical bare ordering.
    pub coefficients: CMatrix,
    /// Parity `σ_z(−1)^n` of each eigenstate.
    pub parities: Vec<i8>,
    pub elements: MatrixElements,
}

impl DressedBasis {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `Δ_kj = Λ_k − Λ_j`.
    pub fn gap(&self, k: usize, j: usize) -> f64 {
        self.eigenvalues[k] - self.eigenvalues[j]
    }

    /// Largest `‖H c_n − Λ_n c_n‖` over all eigenpairs.
    pub fn max_residual(&self, h: &CMatrix) -> f64 {
        let hv = h * &self.coefficients;
        let mut worst: f64 = 0.0;
        for n in 0..self.dim() {
            let lam = self.eigenvalues[n];
            let r: f64 =
                (0..self.dim()).map(|i| (hv[(i, n)] - self.coefficients[(i, n)] * lam).norm_sqr()).sum::<f64>().sqrt();
            worst = worst.max(r);
        }
        worst
    }

    /// Largest `|⟨n|m⟩ − δ_nm|`.
    pub fn orthonormality_defect(&self) -> f64 {
        let g = self.coefficients.adjoint() * &self.coefficients;
        let mut worst: f64 = 0.0;
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                let expect = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g[(i, j)] - Complex64::new(expect, 0.0)).norm());
            }
        }
        worst
    }
}

fn spectral_norm_bound(h: &CMatrix) -> f64 {
    // max absolute row sum bounds the spectral norm of a Hermitian matrix
    (0..h.nrows()).map(|i| h.row(i).iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max).max(f64::MIN_POSITIVE)
}

/// Diagonalizes `H` sector by sector in the parity basis, sorts eigenpairs
/// by energy (near-degenerate ties: odd parity first) and fixes each
/// eigenvector's phase so its largest entry is real and positive.
pub fn diagonalize(h: &CMatrix, trunc: TruncationScheme) -> Result<DressedBasis> {
    let dim = trunc.dim();
    if h.nrows() != dim || h.ncols() != dim {
        return Err(Error::DimensionMismatch { expected: dim, found: h.nrows() });
    }
    let h_norm = spectral_norm_bound(h);
    let mut pairs: Vec<(f64, i8, Vec<Complex64>)> = Vec::with_capacity(dim);

    for sector in [-1i8, 1] {
        let idx: Vec<usize> = (0..dim).filter(|&i| trunc.parity(i) == sector).collect();
        let k = idx.len();
        let sub = CMatrix::from_fn(k, k, |a, b| h[(idx[a], idx[b])]);
        let eig = SymmetricEigen::try_new(sub, 1e-15 * h_norm.max(1.0), 100_000)
            .ok_or_else(|| Error::EigenFailure(format!("parity sector {sector} did not converge")))?;
        for col in 0..k {
            let mut v = vec![ZERO; dim];
            for (a, &i) in idx.iter().enumerate() {
                v[i] = eig.eigenvectors[(a, col)];
            }
            pairs.push((eig.eigenvalues[col], sector, v));
        }
    }

    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
    let tie = 1e-10 * h_norm;
    // order near-degenerate neighbours by ascending parity
    loop {
        let mut swapped = false;
        for i in 0..pairs.len().saturating_sub(1) {
            if (pairs[i + 1].0 - pairs[i].0).abs() < tie && pairs[i].1 > pairs[i + 1].1 {
                pairs.swap(i, i + 1);
                swapped = true;
            }
        }
        if !swapped {
            break;
        }
    }

    let mut coefficients = CMatrix::zeros(dim, dim);
    let mut eigenvalues = Vec::with_capacity(dim);
    let mut parities = Vec::with_capacity(dim);
    for (n, (lam, par, mut v)) in pairs.into_iter().enumerate() {
        let mut best = 0;
        for i in 1..dim {
            if v[i].norm() > v[best].norm() * (1.0 + 1e-12) {
                best = i;
            }
        }
        let phase = v[best].conj() / v[best].norm();
        let norm: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for z in v.iter_mut() {
            *z = *z * phase / norm;
        }
        v[best] = Complex64::new(v[best].re, 0.0);
        for i in 0..dim {
            coefficients[(i, n)] = v[i];
        }
        eigenvalues.push(lam);
        parities.push(par);
    }

    let elements = dressed_matrix_elements(trunc, &coefficients);
    let basis = DressedBasis { trunc, eigenvalues, coefficients, parities, elements };
    let residual = basis.max_residual(h);
    if residual > 1e-10 * h_norm.max(max_abs(h)) {
        return Err(Error::EigenFailure(format!("eigen residual {residual:.3e} too large")));
    }
    Ok(basis)
}

fn hermitize(m: &mut CMatrix) {
    let n = m.nrows();
    for i in 0..n {
        m[(i, i)] = Complex64::new(m[(i, i)].re, 0.0);
        for j in (i + 1)..n {
            let z = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
        }
    }
}

/// Dressed matrix elements of `σ_z`, `σ_x` and `X` from the eigenvector
/// coefficients via the row-shift sums (no dense bare operators).
pub fn dressed_matrix_elements(trunc: TruncationScheme, c: &CMatrix) -> MatrixElements {
    let dim = trunc.dim();
    let q1 = trunc.q1();
    let d = trunc.field_dim();

    // (σ_z V)_i = ∓ c_i
    let sz_v = CMatrix::from_fn(dim, dim, |i, m| if trunc.is_excited(i) { c[(i, m)] } else { -c[(i, m)] });
    // (σ_x V)_i = c_{partner(i)}
    let sx_v = CMatrix::from_fn(dim, dim, |i, m| if i < d { c[(i + d, m)] } else { c[(i - d, m)] });
    // (X V)_i = √(n+1) c_{i+1} + √n c_{i-1} within a qubit branch
    let x_v = CMatrix::from_fn(dim, dim, |i, m| {
        let n = trunc.photons(i);
        let mut z = ZERO;
        if n < q1 {
            z += c[(i + 1, m)] * ((n + 1) as f64).sqrt();
        }
        if n > 0 {
            z += c[(i - 1, m)] * (n as f64).sqrt();
        }
        z
    });

    let vd = c.adjoint();
    let mut sigma_z = &vd * sz_v;
    let mut sigma_x = &vd * sx_v;
    let mut x = &vd * x_v;
    hermitize(&mut sigma_z);
    hermitize(&mut sigma_x);
    hermitize(&mut x);
    MatrixElements { sigma_z, sigma_x, x }
}

/// Builds and diagonalizes the Hamiltonian at time `t`.
pub fn dressed_basis(model: &crate::hilbert::ModelParams, trunc: TruncationScheme, t: f64) -> Result<DressedBasis> {
    let ops = crate::hilbert::build_operators(trunc);
    let h = crate::hilbert::build_hamiltonian(model, &ops, t);
    diagonalize(&h, trunc)
}
