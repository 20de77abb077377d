//! Observables of the joint state: qubit and field marginals, photon
//! statistics, purities, negativity, ground-state post-selection and the
//! Fisher-information figures of merit of the field.

use log::{debug, warn};
use nalgebra::linalg::SymmetricEigen;
use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64;
use serde::Serialize;

use crate::bare::BareCoefficients;
use crate::error::{Error, Result};
use crate::hilbert::{CMatrix, ZERO};

/// Pair-sum floor on `p_i + p_j` in the Fisher-information sums.
pub const P_FLOOR: f64 = 1e-12;

/// Negative spectral mass of a field state above which metrology refuses to run.
pub const MAX_NEGATIVE_MASS: f64 = 1e-6;

/// Qubit (2×2, ordered `g, e`) and field marginals.
pub fn reduced_states(coeffs: &BareCoefficients) -> (CMatrix, CMatrix) {
    let qubit =
        CMatrix::from_row_slice(2, 2, &[coeffs.a.trace(), coeffs.c.trace(), coeffs.c.trace().conj(), coeffs.b.trace()]);
    (qubit, &coeffs.a + &coeffs.b)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalarObservables {
    pub p_e: f64,
    pub n_mean: f64,
    pub mandel_q: f64,
    pub purity_qubit: f64,
    pub purity_field: f64,
}

/// `(⟨n⟩, Q)` of a field matrix, with `Q = 0` at `⟨n⟩ = 0`.
fn photon_statistics(field: &CMatrix) -> (f64, f64) {
    let (mut n1, mut n2) = (0.0, 0.0);
    for n in 0..field.nrows() {
        let p = field[(n, n)].re;
        n1 += n as f64 * p;
        n2 += (n * n) as f64 * p;
    }
    let q = if n1 == 0.0 { 0.0 } else { (n2 - n1 * n1 - n1) / n1 };
    (n1, q)
}

pub fn scalar_observables(coeffs: &BareCoefficients) -> ScalarObservables {
    let p_g = coeffs.a.trace().re;
    let p_e = coeffs.b.trace().re;
    let c = coeffs.c.trace();
    let field = &coeffs.a + &coeffs.b;
    let (n_mean, mandel_q) = photon_statistics(&field);
    ScalarObservables {
        p_e,
        n_mean,
        mandel_q,
        purity_qubit: p_g * p_g + p_e * p_e + 2.0 * c.norm_sqr(),
        purity_field: field.iter().map(|z| z.norm_sqr()).sum(),
    }
}

fn hermitian_eigenvalues(m: &CMatrix) -> Result<Vec<f64>> {
    SymmetricEigen::try_new(m.clone(), 1e-15, 0)
        .map(|e| e.eigenvalues.iter().copied().collect())
        .ok_or_else(|| Error::EigenFailure("Hermitian eigenvalue iteration did not converge".into()))
}

/// Smallest eigenvalue of the full density matrix.
pub fn min_eigenvalue(coeffs: &BareCoefficients) -> Result<f64> {
    Ok(hermitian_eigenvalues(&coeffs.to_density())?.into_iter().fold(f64::INFINITY, f64::min))
}

/// Partial transpose over the qubit: the off-diagonal block becomes `C†`.
pub fn partial_transpose_qubit(coeffs: &BareCoefficients) -> CMatrix {
    BareCoefficients { trunc: coeffs.trunc, a: coeffs.a.clone(), b: coeffs.b.clone(), c: coeffs.c.adjoint() }
        .to_density()
}

/// Partial transpose over the field.
pub fn partial_transpose_field(coeffs: &BareCoefficients) -> CMatrix {
    let d = coeffs.trunc.field_dim();
    let mut out = CMatrix::zeros(2 * d, 2 * d);
    let rho = coeffs.to_density();
    for qi in 0..2 {
        for qj in 0..2 {
            for n in 0..d {
                for m in 0..d {
                    out[(qi * d + n, qj * d + m)] = rho[(qi * d + m, qj * d + n)];
                }
            }
        }
    }
    out
}

/// `|Σ_{λ<0} λ|` of the qubit partial transpose.
pub fn negativity(coeffs: &BareCoefficients) -> Result<f64> {
    negative_mass(&partial_transpose_qubit(coeffs))
}

fn negative_mass(m: &CMatrix) -> Result<f64> {
    Ok(-hermitian_eigenvalues(m)?.into_iter().filter(|&x| x < 0.0).sum::<f64>())
}

/// Field state conditioned on finding the qubit in `|g⟩`, and `P_g`.
pub fn postselect_ground(coeffs: &BareCoefficients) -> Result<(CMatrix, f64)> {
    let p_g = coeffs.a.trace().re;
    if p_g < 1e-12 {
        return Err(Error::ZeroProbability(p_g));
    }
    Ok((&coeffs.a / Complex64::new(p_g, 0.0), p_g))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetrologyReport {
    pub f_ph: f64,
    pub f_disp: [[f64; 2]; 2],
    pub m_av: f64,
    pub m_opt: f64,
    /// `F_ph > ⟨n⟩`.
    pub phase_advantage: bool,
    pub displacement_advantage: bool,
}

/// Eigen-decomposition of a field state with negative eigenvalues clipped
/// and the spectrum renormalized.
struct Spectrum {
    p: Vec<f64>,
    vectors: CMatrix,
}

fn spectrum(rho: &CMatrix) -> Result<Spectrum> {
    let eig = SymmetricEigen::try_new(rho.clone(), 1e-15, 0)
        .ok_or_else(|| Error::EigenFailure("field state eigen-decomposition did not converge".into()))?;
    let neg: f64 = eig.eigenvalues.iter().filter(|&&x| x < 0.0).map(|x| -x).sum();
    if neg > MAX_NEGATIVE_MASS {
        return Err(Error::PositivityViolation(-neg));
    }
    if neg > 1e-8 {
        warn!("clipping negative spectral mass {neg:.3e} before metrology");
    } else if neg > 0.0 {
        debug!("clipping negative spectral mass {neg:.3e} before metrology");
    }
    let mut p: Vec<f64> = eig.eigenvalues.iter().map(|&x| x.max(0.0)).collect();
    let total: f64 = p.iter().sum();
    if total <= 0.0 {
        return Err(Error::ZeroProbability(total));
    }
    p.iter_mut().for_each(|x| *x /= total);
    Ok(Spectrum { p, vectors: eig.eigenvectors })
}

/// `Σ_{ij} (p_i − p_j)²/(p_i + p_j) ⟨i|A|j⟩⟨j|B|i⟩` over the clipped spectrum.
fn pair_sum(s: &Spectrum, a: &CMatrix, b: &CMatrix) -> Complex64 {
    let u = &s.vectors;
    let ae = u.adjoint() * a * u;
    let be = u.adjoint() * b * u;
    let mut acc = ZERO;
    for i in 0..s.p.len() {
        for j in 0..s.p.len() {
            let sum = s.p[i] + s.p[j];
            if sum > P_FLOOR {
                let diff = s.p[i] - s.p[j];
                acc += ae[(i, j)] * be[(j, i)] * (diff * diff / sum);
            }
        }
    }
    acc
}

fn number_operator(d: usize) -> CMatrix {
    CMatrix::from_fn(d, d, |i, j| if i == j { Complex64::new(i as f64, 0.0) } else { ZERO })
}

fn quadratures(d: usize) -> (CMatrix, CMatrix) {
    let a = CMatrix::from_fn(d, d, |i, j| if j == i + 1 { Complex64::new((j as f64).sqrt(), 0.0) } else { ZERO });
    let ad = a.adjoint();
    let x1 = &a + &ad;
    let x2 = (&a - &ad) * Complex64::new(0.0, -1.0);
    (x1, x2)
}

/// Phase-estimation QFI `½ Σ_{ij} (p_i − p_j)²/(p_i + p_j) |⟨i|n|j⟩|²`.
pub fn qfi_phase(rho_c: &CMatrix) -> Result<f64> {
    let s = spectrum(rho_c)?;
    let n = number_operator(rho_c.nrows());
    Ok(0.5 * pair_sum(&s, &n, &n).re)
}

/// Displacement Fisher matrix with `M_av = Tr F/4` and `M_opt = λ_max/2`.
pub fn fisher_displacement(rho_c: &CMatrix) -> Result<([[f64; 2]; 2], f64, f64)> {
    let s = spectrum(rho_c)?;
    let (x1, x2) = quadratures(rho_c.nrows());
    let ops = [&x1, &x2];
    let mut f = [[0.0; 2]; 2];
    for k in 0..2 {
        for l in 0..2 {
            let z = pair_sum(&s, ops[k], ops[l]);
            debug_assert!(z.im.abs() < 1e-10 * (1.0 + z.re.abs()), "imaginary Fisher element {z}");
            f[k][l] = z.re;
        }
    }
    let sym = 0.5 * (f[0][1] + f[1][0]);
    f[0][1] = sym;
    f[1][0] = sym;
    let m = Matrix2::new(f[0][0], f[0][1], f[1][0], f[1][1]);
    let lambda_max = m.symmetric_eigenvalues().max();
    Ok((f, 0.25 * (f[0][0] + f[1][1]), 0.5 * lambda_max))
}

pub fn metrology(rho_c: &CMatrix) -> Result<MetrologyReport> {
    let f_ph = qfi_phase(rho_c)?;
    let (f_disp, m_av, m_opt) = fisher_displacement(rho_c)?;
    let (n_mean, _) = photon_statistics(rho_c);
    Ok(MetrologyReport {
        f_ph,
        f_disp,
        m_av,
        m_opt,
        phase_advantage: f_ph > n_mean,
        displacement_advantage: m_av > 1.0 || m_opt > 1.0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhotonDistribution {
    pub t: f64,
    pub probabilities: Vec<f64>,
}

pub fn photon_distribution(coeffs: &BareCoefficients, t: f64) -> PhotonDistribution {
    let d = coeffs.trunc.field_dim();
    let raw: Vec<f64> = (0..d).map(|n| coeffs.a[(n, n)].re + coeffs.b[(n, n)].re).collect();
    let worst = raw.iter().copied().fold(0.0, f64::min);
    if worst < -1e-8 {
        warn!("photon distribution at t = {t} has negative entry {worst:.3e}; clipped");
    }
    PhotonDistribution { t, probabilities: raw.into_iter().map(|p| p.max(0.0)).collect() }
}

/// Photon distribution of the field conditioned on finding the qubit in `|g⟩`.
pub fn postselected_distribution(coeffs: &BareCoefficients, t: f64) -> Result<PhotonDistribution> {
    let (rho, _) = postselect_ground(coeffs)?;
    let probabilities = (0..rho.nrows()).map(|n| rho[(n, n)].re.max(0.0)).collect();
    Ok(PhotonDistribution { t, probabilities })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PostSelectedRecord {
    pub p_g: f64,
    pub n_mean_ps: f64,
    pub mandel_q_ps: f64,
    pub f_ph: f64,
    pub m_av: f64,
    pub m_opt: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ObservableRecord {
    pub t: f64,
    pub p_e: f64,
    pub n_mean: f64,
    pub mandel_q: f64,
    pub negativity: f64,
    pub purity_qubit: f64,
    pub purity_field: f64,
    pub postselected: Option<PostSelectedRecord>,
}

pub fn postselected_record(coeffs: &BareCoefficients) -> Result<PostSelectedRecord> {
    let (rho_ps, p_g) = postselect_ground(coeffs)?;
    let (n_mean_ps, mandel_q_ps) = photon_statistics(&rho_ps);
    let m = metrology(&rho_ps)?;
    Ok(PostSelectedRecord { p_g, n_mean_ps, mandel_q_ps, f_ph: m.f_ph, m_av: m.m_av, m_opt: m.m_opt })
}

/// Every scalar observable at one instant.
pub fn observe(t: f64, coeffs: &BareCoefficients, postselect: bool) -> Result<ObservableRecord> {
    let s = scalar_observables(coeffs);
    Ok(ObservableRecord {
        t,
        p_e: s.p_e,
        n_mean: s.n_mean,
        mandel_q: s.mandel_q,
        negativity: negativity(coeffs)?,
        purity_qubit: s.purity_qubit,
        purity_field: s.purity_field,
        postselected: if postselect { Some(postselected_record(coeffs)?) } else { None },
    })
}

/// Trace distance `½‖ρ − σ‖₁` between two states of equal truncation.
pub fn trace_distance(a: &BareCoefficients, b: &BareCoefficients) -> Result<f64> {
    let diff = a.to_density() - b.to_density();
    Ok(0.5 * hermitian_eigenvalues(&diff)?.iter().map(|x| x.abs()).sum::<f64>())
}

/// Real diagonal matrix helper for tests and callers building field states.
pub fn diagonal_field(p: &[f64]) -> CMatrix {
    DMatrix::from_fn(p.len(), p.len(), |i, j| if i == j { Complex64::new(p[i], 0.0) } else { ZERO })
}
