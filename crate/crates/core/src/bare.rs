//! Bare-basis coefficient blocks and the real packing used by the GKSL and
//! bare-basis DME integrators.
//!
//! `ρ = Σ A_nm |g,n⟩⟨g,m| + B_nm |e,n⟩⟨e,m| + C_nm |g,n⟩⟨e,m| + C*_mn |e,n⟩⟨g,m|`.
//!
//! Packed layout (zero-based, `d = Q1+1`, `F1 = d(d+1)/2`, `F2 = d²`,
//! `F3 = F2+F1`, `F4 = 2d²`, `F5 = 3d²`):
//!
//! | slice          | content                            |
//! |----------------|------------------------------------|
//! | `[0, F1)`      | `Re A_pj`, `p ≤ j`, row major      |
//! | `[F1, F2)`     | `Im A_pj`, `p < j`, row major      |
//! | `[F2, F3)`     | `Re B_pj`, `p ≤ j`                 |
//! | `[F3, F4)`     | `Im B_pj`, `p < j`                 |
//! | `[F4, F5)`     | `Re C_pj`, all `p, j`              |
//! | `[F5, 4d²)`    | `Im C_pj`, all `p, j`              |
//!
//! With one-based `p, j` the offset of `Re A_pj` is
//! `(p−1)Q1 + j − (p−1)(p−2)/2`, which the zero-based helpers reproduce.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hilbert::{CMatrix, TruncationScheme, ZERO};

#[derive(Debug, Clone, PartialEq)]
pub struct BareCoefficients {
    pub trunc: TruncationScheme,
    pub a: CMatrix,
    pub b: CMatrix,
    pub c: CMatrix,
}

impl BareCoefficients {
    pub fn zeros(trunc: TruncationScheme) -> Self {
        let d = trunc.field_dim();
        Self { trunc, a: CMatrix::zeros(d, d), b: CMatrix::zeros(d, d), c: CMatrix::zeros(d, d) }
    }

    /// Partitions a full density matrix in the canonical bare ordering.
    pub fn from_density(trunc: TruncationScheme, rho: &CMatrix) -> Result<Self> {
        let dim = trunc.dim();
        if rho.nrows() != dim || rho.ncols() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: rho.nrows() });
        }
        let d = trunc.field_dim();
        Ok(Self {
            trunc,
            a: rho.view((0, 0), (d, d)).into_owned(),
            b: rho.view((d, d), (d, d)).into_owned(),
            c: rho.view((0, d), (d, d)).into_owned(),
        })
    }

    pub fn to_density(&self) -> CMatrix {
        let d = self.trunc.field_dim();
        let mut rho = CMatrix::zeros(2 * d, 2 * d);
        rho.view_mut((0, 0), (d, d)).copy_from(&self.a);
        rho.view_mut((d, d), (d, d)).copy_from(&self.b);
        rho.view_mut((0, d), (d, d)).copy_from(&self.c);
        rho.view_mut((d, 0), (d, d)).copy_from(&self.c.adjoint());
        rho
    }

    pub fn trace(&self) -> f64 {
        self.a.trace().re + self.b.trace().re
    }

    /// Largest deviation from `A = A†`, `B = B†`.
    pub fn hermiticity_defect(&self) -> f64 {
        let dev = |m: &CMatrix| {
            let mut worst: f64 = 0.0;
            for i in 0..m.nrows() {
                for j in i..m.ncols() {
                    worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
                }
            }
            worst
        };
        dev(&self.a).max(dev(&self.b))
    }

    pub fn check_hermitian(&self, tol: f64) -> Result<()> {
        for (name, m) in [("A", &self.a), ("B", &self.b)] {
            let mut worst: f64 = 0.0;
            for i in 0..m.nrows() {
                for j in i..m.ncols() {
                    worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
                }
            }
            if worst > tol {
                return Err(Error::HermiticityViolation { block: name, deviation: worst });
            }
        }
        Ok(())
    }
}

/// Sampled bare-basis states on a time grid.
#[derive(Debug, Clone, Default)]
pub struct BareTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<BareCoefficients>,
}

/// Most negative diagonal element of `ρ`; a cheap necessary positivity probe.
pub(crate) fn min_population(coeffs: &BareCoefficients) -> f64 {
    let d = coeffs.trunc.field_dim();
    (0..d).map(|n| coeffs.a[(n, n)].re.min(coeffs.b[(n, n)].re)).fold(f64::INFINITY, f64::min)
}

/// Offsets of the six packed sections for a given truncation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PackingOffsets {
    pub f1: usize,
    pub f2: usize,
    pub f3: usize,
    pub f4: usize,
    pub f5: usize,
    pub len: usize,
}

impl PackingOffsets {
    pub fn new(trunc: TruncationScheme) -> Self {
        let d = trunc.field_dim();
        let f1 = d * (d + 1) / 2;
        let f2 = d * d;
        Self { f1, f2, f3: f2 + f1, f4: 2 * f2, f5: 3 * f2, len: 4 * f2 }
    }
}

/// Zero-based offset of `Re X_pj` inside an upper-triangle section (`p ≤ j`).
#[inline]
pub(crate) fn upper_incl(d: usize, p: usize, j: usize) -> usize {
    debug_assert!(p <= j);
    p * d - p * p.saturating_sub(1) / 2 + j - p
}

/// Zero-based offset of `Im X_pj` inside a strict upper-triangle section (`p < j`).
#[inline]
pub(crate) fn upper_strict(d: usize, p: usize, j: usize) -> usize {
    debug_assert!(p < j);
    p * d - p * (p + 1) / 2 + (j - p - 1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PackedState {
    pub y: Vec<f64>,
    pub trunc: TruncationScheme,
}

impl PackedState {
    pub fn new(trunc: TruncationScheme, y: Vec<f64>) -> Result<Self> {
        let len = PackingOffsets::new(trunc).len;
        if y.len() != len {
            return Err(Error::LengthMismatch { expected: len, found: y.len() });
        }
        Ok(Self { y, trunc })
    }
}

pub fn pack(coeffs: &BareCoefficients) -> Result<PackedState> {
    coeffs.check_hermitian(1e-12)?;
    let mut y = vec![0.0; PackingOffsets::new(coeffs.trunc).len];
    pack_into(coeffs, &mut y);
    Ok(PackedState { y, trunc: coeffs.trunc })
}

/// Writes the independent reals of `coeffs` into `y` without checks; only the
/// upper triangles of `A` and `B` are read.
pub(crate) fn pack_into(coeffs: &BareCoefficients, y: &mut [f64]) {
    let d = coeffs.trunc.field_dim();
    let off = PackingOffsets::new(coeffs.trunc);
    for p in 0..d {
        for j in p..d {
            let ui = upper_incl(d, p, j);
            y[ui] = coeffs.a[(p, j)].re;
            y[off.f2 + ui] = coeffs.b[(p, j)].re;
            if j > p {
                let us = upper_strict(d, p, j);
                y[off.f1 + us] = coeffs.a[(p, j)].im;
                y[off.f3 + us] = coeffs.b[(p, j)].im;
            }
        }
        for j in 0..d {
            y[off.f4 + p * d + j] = coeffs.c[(p, j)].re;
            y[off.f5 + p * d + j] = coeffs.c[(p, j)].im;
        }
    }
}

pub fn unpack(state: &PackedState) -> Result<BareCoefficients> {
    let len = PackingOffsets::new(state.trunc).len;
    if state.y.len() != len {
        return Err(Error::LengthMismatch { expected: len, found: state.y.len() });
    }
    let mut out = BareCoefficients::zeros(state.trunc);
    unpack_into(&state.y, &mut out);
    Ok(out)
}

pub(crate) fn unpack_into(y: &[f64], out: &mut BareCoefficients) {
    let d = out.trunc.field_dim();
    let off = PackingOffsets::new(out.trunc);
    for p in 0..d {
        let ui = upper_incl(d, p, p);
        out.a[(p, p)] = Complex64::new(y[ui], 0.0);
        out.b[(p, p)] = Complex64::new(y[off.f2 + ui], 0.0);
        for j in (p + 1)..d {
            let ui = upper_incl(d, p, j);
            let us = upper_strict(d, p, j);
            let a = Complex64::new(y[ui], y[off.f1 + us]);
            let b = Complex64::new(y[off.f2 + ui], y[off.f3 + us]);
            out.a[(p, j)] = a;
            out.a[(j, p)] = a.conj();
            out.b[(p, j)] = b;
            out.b[(j, p)] = b.conj();
        }
        for j in 0..d {
            out.c[(p, j)] = Complex64::new(y[off.f4 + p * d + j], y[off.f5 + p * d + j]);
        }
    }
}

/// Product state `|q⟩⟨q| ⊗ field` in block form.
pub fn product_state(trunc: TruncationScheme, field: &DMatrix<Complex64>, excited: bool) -> Result<BareCoefficients> {
    let d = trunc.field_dim();
    if field.nrows() != d || field.ncols() != d {
        return Err(Error::DimensionMismatch { expected: d, found: field.nrows() });
    }
    let mut out = BareCoefficients::zeros(trunc);
    if excited {
        out.b.copy_from(field);
    } else {
        out.a.copy_from(field);
    }
    out.c.fill(ZERO);
    Ok(out)
}
