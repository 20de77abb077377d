//! Dressed master equation expressed in the bare basis.
//!
//! The dissipator of the dressed master equation is a fixed linear map on
//! `ρ`. Its bare-basis matrix elements are the `W` tensors:
//!
//! `dX_{NM}/dt ⊃ Σ_{n,m} W_{X,Y}^{(N,M,n,m)} Y_{nm}`
//!
//! for output blocks `X ∈ {A, B, C}` and input blocks `Y ∈ {A, B, C, D}`,
//! where `D_{nm} = C*_{mn}` is the `⟨e,n|ρ|g,m⟩` block. With
//! `S = V diag(Φ) V†`, `K = V diag(Φ_k² + Υ^{kk}) V†` and
//! `G^k_{PQ} = Σ_{j<k} Γ^{jk} V_{Pj} V*_{Qj}` the element for
//! `|p⟩⟨q| → |P⟩⟨Q|` is
//!
//! `S_{Pp} S_{qQ} − ½ δ_{qQ} K_{Pp} − ½ δ_{pP} K_{qQ} + Σ_k G^k_{PQ} V*_{pk} V_{qk}`.
//!
//! The `A` and `B` outputs are only stored for `N ≤ M`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{DressedBasis, RateTable};
use crate::bare::{upper_incl, upper_strict, BareCoefficients, BareTrajectory, PackingOffsets};
use crate::error::Result;
use crate::exec::Exec;
use crate::gksl::{evolve_packed, GkslRhs, RateParams};
use crate::hilbert::{CMatrix, ModelParams, TruncationScheme, ZERO};
use crate::integrator::{IntegrationStats, IntegratorConfig, TimeGrid};

/// Default relative pruning threshold, applied as `rel · max|W|`.
pub const DEFAULT_PRUNE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OutputBlock {
    A,
    B,
    C,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InputBlock {
    A,
    B,
    C,
    D,
}

impl OutputBlock {
    pub const ALL: [OutputBlock; 3] = [OutputBlock::A, OutputBlock::B, OutputBlock::C];

    fn index(self) -> usize {
        self as usize
    }
}

impl InputBlock {
    pub const ALL: [InputBlock; 4] = [InputBlock::A, InputBlock::B, InputBlock::C, InputBlock::D];

    fn index(self) -> usize {
        self as usize
    }
}

/// One stored `W_{X,Y}^{(N,M,n,m)}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WEntry {
    pub big_n: u32,
    pub big_m: u32,
    pub n: u32,
    pub m: u32,
    pub value: Complex64,
}

#[derive(Debug, Clone)]
pub struct WTensors {
    trunc: TruncationScheme,
    blocks: Vec<Vec<WEntry>>,
    epsilon_prune: f64,
    max_abs: f64,
    candidates: usize,
    // kept for the factored evaluation path
    v: CMatrix,
    theta: DMatrix<f64>,
    gamma: DMatrix<f64>,
}

impl WTensors {
    pub fn trunc(&self) -> TruncationScheme {
        self.trunc
    }

    pub fn block(&self, out: OutputBlock, inp: InputBlock) -> &[WEntry] {
        &self.blocks[out.index() * 4 + inp.index()]
    }

    pub fn nnz(&self) -> usize {
        self.blocks.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.nnz() == 0
    }

    /// Absolute pruning threshold that was applied.
    pub fn epsilon_prune(&self) -> f64 {
        self.epsilon_prune
    }

    pub fn max_abs(&self) -> f64 {
        self.max_abs
    }

    /// Stored entries over the number of assembled elements.
    pub fn fill_ratio(&self) -> f64 {
        if self.candidates == 0 {
            0.0
        } else {
            self.nnz() as f64 / self.candidates as f64
        }
    }

    /// Dissipative contribution `L(ρ)` contracted from the stored entries.
    /// The `A` and `B` results are completed to Hermitian matrices.
    pub fn apply(&self, rho: &BareCoefficients) -> BareCoefficients {
        let mut out = BareCoefficients::zeros(self.trunc);
        for ob in OutputBlock::ALL {
            for ib in InputBlock::ALL {
                for e in self.block(ob, ib) {
                    let (n, m) = (e.n as usize, e.m as usize);
                    let z = match ib {
                        InputBlock::A => rho.a[(n, m)],
                        InputBlock::B => rho.b[(n, m)],
                        InputBlock::C => rho.c[(n, m)],
                        InputBlock::D => rho.c[(m, n)].conj(),
                    };
                    let target = match ob {
                        OutputBlock::A => &mut out.a,
                        OutputBlock::B => &mut out.b,
                        OutputBlock::C => &mut out.c,
                    };
                    target[(e.big_n as usize, e.big_m as usize)] += e.value * z;
                }
            }
        }
        let d = self.trunc.field_dim();
        for n in 0..d {
            for m in 0..n {
                out.a[(n, m)] = out.a[(m, n)].conj();
                out.b[(n, m)] = out.b[(m, n)].conj();
            }
        }
        out
    }
}

/// Output elements in storage order: `A` upper, `B` upper, `C` full.
fn output_slots(d: usize) -> Vec<(OutputBlock, usize, usize)> {
    let mut slots = Vec::with_capacity(d * (d + 1) + d * d);
    for ob in [OutputBlock::A, OutputBlock::B] {
        for n in 0..d {
            for m in n..d {
                slots.push((ob, n, m));
            }
        }
    }
    for n in 0..d {
        for m in 0..d {
            slots.push((OutputBlock::C, n, m));
        }
    }
    slots
}

fn full_index(d: usize, block: InputBlock, n: usize, m: usize) -> (usize, usize) {
    match block {
        InputBlock::A => (n, m),
        InputBlock::B => (d + n, d + m),
        InputBlock::C => (n, d + m),
        InputBlock::D => (d + n, m),
    }
}

pub fn compute_w_tensors(basis: &DressedBasis, rates: &RateTable, prune_rel: f64, exec: Exec) -> WTensors {
    let trunc = basis.trunc;
    let d = trunc.field_dim();
    let dim = basis.dim();
    let v = &basis.coefficients;
    let vd = v.adjoint();

    let diag = |f: &dyn Fn(usize) -> f64| {
        let mut scaled = v.clone();
        for k in 0..dim {
            let s = Complex64::new(f(k), 0.0);
            scaled.column_mut(k).iter_mut().for_each(|z| *z *= s);
        }
        &scaled * &vd
    };
    let s_mat = diag(&|k| rates.phi[k]);
    let k_mat = diag(&|k| rates.phi[k] * rates.phi[k] + rates.decay(k));

    // pairs (p, q) of the full index together with V*_{pk} V_{qk} are assembled per output
    let slots = output_slots(d);
    let inputs: Vec<(InputBlock, usize, usize)> =
        InputBlock::ALL.iter().flat_map(|&b| (0..d).flat_map(move |n| (0..d).map(move |m| (b, n, m)))).collect();
    let active: Vec<usize> = (0..dim).filter(|&k| (0..k).any(|j| rates.gamma[(j, k)] != 0.0)).collect();

    let rows: Vec<Vec<(InputBlock, WEntry)>> = exec.map_range(slots.len(), |s| {
        let (ob, big_n, big_m) = slots[s];
        let (pp, qq) = match ob {
            OutputBlock::A => (big_n, big_m),
            OutputBlock::B => (d + big_n, d + big_m),
            OutputBlock::C => (big_n, d + big_m),
        };
        let g_k: Vec<(usize, Complex64)> = active
            .iter()
            .map(|&k| {
                let sum: Complex64 = (0..k).map(|j| v[(pp, j)] * v[(qq, j)].conj() * rates.gamma[(j, k)]).sum();
                (k, sum)
            })
            .filter(|(_, z)| *z != ZERO)
            .collect();
        let mut row = Vec::new();
        for &(ib, n, m) in &inputs {
            let (p, q) = full_index(d, ib, n, m);
            let mut w = s_mat[(pp, p)] * s_mat[(q, qq)];
            if q == qq {
                w -= k_mat[(pp, p)] * 0.5;
            }
            if p == pp {
                w -= k_mat[(q, qq)] * 0.5;
            }
            for &(k, gk) in &g_k {
                w += gk * v[(p, k)].conj() * v[(q, k)];
            }
            if w != ZERO {
                row.push((ib, WEntry { big_n: big_n as u32, big_m: big_m as u32, n: n as u32, m: m as u32, value: w }));
            }
        }
        row
    });

    let max_abs = rows.iter().flatten().map(|(_, e)| e.value.norm()).fold(0.0, f64::max);
    let epsilon_prune = prune_rel * max_abs;
    let mut blocks = vec![Vec::new(); 12];
    for (s, row) in rows.into_iter().enumerate() {
        let ob = slots[s].0;
        for (ib, e) in row {
            if e.value.norm() >= epsilon_prune {
                blocks[ob.index() * 4 + ib.index()].push(e);
            }
        }
    }
    WTensors {
        trunc,
        blocks,
        epsilon_prune,
        max_abs,
        candidates: slots.len() * inputs.len(),
        v: v.clone(),
        theta: rates.theta.clone(),
        gamma: rates.gamma.clone(),
    }
}

/// Real sparse matrix in compressed-row form.
#[derive(Debug, Clone)]
struct SparseOperator {
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

impl SparseOperator {
    fn nnz(&self) -> usize {
        self.vals.len()
    }

    fn apply_add(&self, y: &[f64], dy: &mut [f64]) {
        for (r, out) in dy.iter_mut().enumerate() {
            let (lo, hi) = (self.row_ptr[r], self.row_ptr[r + 1]);
            let mut acc = 0.0;
            for (c, v) in self.cols[lo..hi].iter().zip(&self.vals[lo..hi]) {
                acc += v * y[*c as usize];
            }
            *out += acc;
        }
    }
}

/// Packed location of an input element: `(re column, im column, im sign)`.
fn packed_input(
    off: &PackingOffsets,
    d: usize,
    block: InputBlock,
    n: usize,
    m: usize,
) -> (usize, Option<(usize, f64)>) {
    let herm = |re0: usize, im0: usize| {
        if n == m {
            (re0 + upper_incl(d, n, n), None)
        } else if n < m {
            (re0 + upper_incl(d, n, m), Some((im0 + upper_strict(d, n, m), 1.0)))
        } else {
            (re0 + upper_incl(d, m, n), Some((im0 + upper_strict(d, m, n), -1.0)))
        }
    };
    match block {
        InputBlock::A => herm(0, off.f1),
        InputBlock::B => herm(off.f2, off.f3),
        InputBlock::C => (off.f4 + n * d + m, Some((off.f5 + n * d + m, 1.0))),
        InputBlock::D => (off.f4 + m * d + n, Some((off.f5 + m * d + n, -1.0))),
    }
}

/// Packed rows of an output element: `(re row, im row)`.
fn packed_output(off: &PackingOffsets, d: usize, block: OutputBlock, n: usize, m: usize) -> (usize, Option<usize>) {
    let im = |im0: usize| if n == m { None } else { Some(im0 + upper_strict(d, n, m)) };
    match block {
        OutputBlock::A => (upper_incl(d, n, m), im(off.f1)),
        OutputBlock::B => (off.f2 + upper_incl(d, n, m), im(off.f3)),
        OutputBlock::C => (off.f4 + n * d + m, Some(off.f5 + n * d + m)),
    }
}

fn compile(w: &WTensors) -> SparseOperator {
    let d = w.trunc.field_dim();
    let off = PackingOffsets::new(w.trunc);
    let mut rows: Vec<Vec<(u32, f64)>> = vec![Vec::new(); off.len];
    for ob in OutputBlock::ALL {
        for ib in InputBlock::ALL {
            for e in w.block(ob, ib) {
                let (re_row, im_row) = packed_output(&off, d, ob, e.big_n as usize, e.big_m as usize);
                let (re_col, im_col) = packed_input(&off, d, ib, e.n as usize, e.m as usize);
                let (wr, wi) = (e.value.re, e.value.im);
                rows[re_row].push((re_col as u32, wr));
                if let Some(ir) = im_row {
                    rows[ir].push((re_col as u32, wi));
                }
                if let Some((ic, sign)) = im_col {
                    rows[re_row].push((ic as u32, -wi * sign));
                    if let Some(ir) = im_row {
                        rows[ir].push((ic as u32, wr * sign));
                    }
                }
            }
        }
    }
    let mut row_ptr = Vec::with_capacity(off.len + 1);
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    row_ptr.push(0);
    for mut row in rows {
        row.sort_by_key(|&(c, _)| c);
        let mut i = 0;
        while i < row.len() {
            let c = row[i].0;
            let mut acc = 0.0;
            while i < row.len() && row[i].0 == c {
                acc += row[i].1;
                i += 1;
            }
            if acc != 0.0 {
                cols.push(c);
                vals.push(acc);
            }
        }
        row_ptr.push(vals.len());
    }
    SparseOperator { row_ptr, cols, vals }
}

/// Unpruned `V L_r(V† ρ V) V†` with dense products; cost `O(D³)` per call.
#[derive(Debug, Clone)]
struct FactoredDissipator {
    trunc: TruncationScheme,
    v: DMatrix<f64>,
    vt: DMatrix<f64>,
    damp: DMatrix<f64>,
    gamma: DMatrix<f64>,
    re: DMatrix<f64>,
    im: DMatrix<f64>,
    tmp: DMatrix<f64>,
}

impl FactoredDissipator {
    /// Requires a real eigenvector matrix, as produced for the real Rabi Hamiltonian.
    fn new(w: &WTensors) -> Option<Self> {
        let imag = w.v.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
        if imag > 1e-12 {
            return None;
        }
        let dim = w.v.nrows();
        let v = w.v.map(|z| z.re);
        Some(Self {
            trunc: w.trunc,
            vt: v.transpose(),
            v,
            damp: w.theta.map(|x| -x),
            gamma: w.gamma.clone(),
            re: DMatrix::zeros(dim, dim),
            im: DMatrix::zeros(dim, dim),
            tmp: DMatrix::zeros(dim, dim),
        })
    }

    fn congruence(&mut self, left: bool) {
        // left: X ← Vᵀ X V, otherwise X ← V X Vᵀ
        let (a, b) = if left { (&self.vt, &self.v) } else { (&self.v, &self.vt) };
        for part in [&mut self.re, &mut self.im] {
            self.tmp.gemm(1.0, a, part, 0.0);
            part.gemm(1.0, &self.tmp, b, 0.0);
        }
    }

    fn apply_add(&mut self, y: &[f64], dy: &mut [f64]) {
        let d = self.trunc.field_dim();
        let dim = 2 * d;
        let off = PackingOffsets::new(self.trunc);
        let herm = |re: &mut DMatrix<f64>, im: &mut DMatrix<f64>, base: usize, re0: usize, im0: usize| {
            for n in 0..d {
                re[(base + n, base + n)] = y[re0 + upper_incl(d, n, n)];
                im[(base + n, base + n)] = 0.0;
                for m in (n + 1)..d {
                    let (xr, xi) = (y[re0 + upper_incl(d, n, m)], y[im0 + upper_strict(d, n, m)]);
                    re[(base + n, base + m)] = xr;
                    re[(base + m, base + n)] = xr;
                    im[(base + n, base + m)] = xi;
                    im[(base + m, base + n)] = -xi;
                }
            }
        };
        herm(&mut self.re, &mut self.im, 0, 0, off.f1);
        herm(&mut self.re, &mut self.im, d, off.f2, off.f3);
        for n in 0..d {
            for m in 0..d {
                let (cr, ci) = (y[off.f4 + n * d + m], y[off.f5 + n * d + m]);
                self.re[(n, d + m)] = cr;
                self.im[(n, d + m)] = ci;
                self.re[(d + m, n)] = cr;
                self.im[(d + m, n)] = -ci;
            }
        }

        self.congruence(true);
        let pops: Vec<f64> = (0..dim).map(|k| self.re[(k, k)]).collect();
        self.re.component_mul_assign(&self.damp);
        self.im.component_mul_assign(&self.damp);
        for n in 0..dim {
            let feed: f64 = ((n + 1)..dim).map(|k| self.gamma[(n, k)] * pops[k]).sum();
            self.re[(n, n)] += feed;
        }
        self.congruence(false);

        for n in 0..d {
            for m in n..d {
                dy[upper_incl(d, n, m)] += self.re[(n, m)];
                dy[off.f2 + upper_incl(d, n, m)] += self.re[(d + n, d + m)];
                if m > n {
                    dy[off.f1 + upper_strict(d, n, m)] += self.im[(n, m)];
                    dy[off.f3 + upper_strict(d, n, m)] += self.im[(d + n, d + m)];
                }
            }
            for m in 0..d {
                dy[off.f4 + n * d + m] += self.re[(n, d + m)];
                dy[off.f5 + n * d + m] += self.im[(n, d + m)];
            }
        }
    }
}

/// How the dissipative part of the bare-basis DME is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WEvaluation {
    /// Contract the pruned `W` tensors as a sparse real operator.
    Sparse,
    /// Apply the same map through dense dressed-basis products (unpruned).
    Factored,
    /// Whichever of the two has the lower operation count.
    #[default]
    Auto,
}

#[derive(Debug, Clone)]
enum Dissipator {
    Sparse(SparseOperator),
    Factored(Box<FactoredDissipator>),
}

/// Vector field of the bare-basis DME: the bare unitary part with the live
/// `Ω(t)` plus the time-independent dissipator.
#[derive(Debug, Clone)]
pub struct DmeBareRhs {
    unitary: GkslRhs,
    dissipator: Dissipator,
}

impl DmeBareRhs {
    pub fn new(model: &ModelParams, w: &WTensors, evaluation: WEvaluation) -> Self {
        let dim = w.v.nrows();
        let factored_cost = 8 * dim * dim * dim;
        let sparse_cost = 4 * w.nnz();
        let use_factored = match evaluation {
            WEvaluation::Sparse => false,
            WEvaluation::Factored => true,
            WEvaluation::Auto => factored_cost < sparse_cost,
        };
        let dissipator = match use_factored.then(|| FactoredDissipator::new(w)).flatten() {
            Some(f) => Dissipator::Factored(Box::new(f)),
            None => Dissipator::Sparse(compile(w)),
        };
        Self { unitary: GkslRhs::new(*model, RateParams::zero(), w.trunc), dissipator }
    }

    pub fn is_factored(&self) -> bool {
        matches!(self.dissipator, Dissipator::Factored(_))
    }

    /// Stored nonzeros of the compiled real operator (0 on the factored path).
    pub fn operator_nnz(&self) -> usize {
        match &self.dissipator {
            Dissipator::Sparse(s) => s.nnz(),
            Dissipator::Factored(_) => 0,
        }
    }

    pub fn eval(&mut self, t: f64, y: &[f64], dy: &mut [f64]) {
        self.unitary.eval(t, y, dy);
        match &mut self.dissipator {
            Dissipator::Sparse(s) => s.apply_add(y, dy),
            Dissipator::Factored(f) => f.apply_add(y, dy),
        }
    }
}

pub fn evolve_dme_bare_with<O>(
    rho0: &BareCoefficients,
    model: &ModelParams,
    w: &WTensors,
    grid: &TimeGrid,
    cfg: &IntegratorConfig,
    evaluation: WEvaluation,
    observer: O,
) -> Result<IntegrationStats>
where
    O: FnMut(usize, f64, &BareCoefficients) -> Result<()>,
{
    let mut rhs = DmeBareRhs::new(model, w, evaluation);
    evolve_packed(rho0, |t, y, dy| rhs.eval(t, y, dy), grid, cfg, "dme-bare", observer)
}

pub fn evolve_dme_bare(
    rho0: &BareCoefficients,
    model: &ModelParams,
    w: &WTensors,
    grid: &TimeGrid,
    cfg: &IntegratorConfig,
    evaluation: WEvaluation,
) -> Result<BareTrajectory> {
    let mut out = BareTrajectory::default();
    evolve_dme_bare_with(rho0, model, w, grid, cfg, evaluation, |_, t, s| {
        out.times.push(t);
        out.states.push(s.clone());
        Ok(())
    })?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bare::{pack, pack_into};
    use crate::dressed::{
        compute_rates, dme_rhs_dressed, dressed_basis, dressed_to_bare, evolve_dme_dressed, DressedPropagation,
        DressedState, Reservoir, SpectralDensity,
    };
    use crate::hilbert::{max_abs, ModulationParams};
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    struct Setup {
        model: ModelParams,
        basis: DressedBasis,
        rates: RateTable,
    }

    fn setup(q1: usize, omega0: f64, g: f64, rate: f64, kind: Reservoir) -> Setup {
        let model = ModelParams::new(1.0, omega0, g);
        let basis = dressed_basis(&model, TruncationScheme::new(q1), 0.0).unwrap();
        let rates = compute_rates(&basis, &SpectralDensity::new(kind, rate, rate, rate, 1.0, omega0));
        Setup { model, basis, rates }
    }

    fn random_rho(trunc: TruncationScheme, rng: &mut StdRng) -> BareCoefficients {
        let n = trunc.dim();
        let m = CMatrix::from_fn(n, n, |_, _| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        let r = &m * m.adjoint();
        let tr = r.trace();
        BareCoefficients::from_density(trunc, &(r / tr)).unwrap()
    }

    /// `V · dme_rhs_dressed(V† ρ V) · V†`, the full bare-basis DME vector field.
    fn oracle(s: &Setup, rho: &BareCoefficients) -> CMatrix {
        let v = &s.basis.coefficients;
        let r = DressedState::new(v.adjoint() * rho.to_density() * v);
        let dr = dme_rhs_dressed(&r, &s.basis, &s.rates);
        v * dr * v.adjoint()
    }

    fn rhs_blocks(rhs: &mut DmeBareRhs, rho: &BareCoefficients) -> CMatrix {
        let y = pack(rho).unwrap().y;
        let mut dy = vec![0.0; y.len()];
        rhs.eval(0.0, &y, &mut dy);
        let mut out = BareCoefficients::zeros(rho.trunc);
        crate::bare::unpack_into(&dy, &mut out);
        out.to_density()
    }

    #[test]
    fn zero_rates_give_empty_tensors() {
        let s = setup(4, 1.5, 0.4, 0.0, Reservoir::White);
        let w = compute_w_tensors(&s.basis, &s.rates, DEFAULT_PRUNE, Exec::Sequential);
        assert!(w.is_empty());
        assert_eq!(w.fill_ratio(), 0.0);
    }

    #[test]
    fn contraction_matches_dressed_transform() {
        let mut rng = StdRng::seed_from_u64(21);
        for (kind, omega0, g) in
            [(Reservoir::White, 1.5, 0.5), (Reservoir::Ohmic, 2.9, 0.8), (Reservoir::White, 1.0, 0.0)]
        {
            let s = setup(5, omega0, g, 1e-2, kind);
            let w = compute_w_tensors(&s.basis, &s.rates, 0.0, Exec::Parallel);
            for _ in 0..5 {
                let rho = random_rho(s.basis.trunc, &mut rng);
                let want = oracle(&s, &rho);
                for ev in [WEvaluation::Sparse, WEvaluation::Factored] {
                    let mut rhs = DmeBareRhs::new(&s.model, &w, ev);
                    let got = rhs_blocks(&mut rhs, &rho);
                    assert!(max_abs(&(&got - &want)) < 1e-12, "{kind:?} {ev:?}");
                }
                let mut direct = w.apply(&rho).to_density();
                let unitary = crate::gksl::gksl_rhs(&s.model, &RateParams::zero(), &rho, 0.0).to_density();
                direct += unitary;
                assert!(max_abs(&(&direct - &want)) < 1e-12);
            }
        }
    }

    #[test]
    fn dissipator_preserves_trace_and_hermiticity() {
        let mut rng = StdRng::seed_from_u64(2);
        let s = setup(4, 2.9699, 0.3, 5e-2, Reservoir::Ohmic);
        let w = compute_w_tensors(&s.basis, &s.rates, 0.0, Exec::Sequential);
        for _ in 0..10 {
            let rho = random_rho(s.basis.trunc, &mut rng);
            let l = w.apply(&rho);
            assert!(l.trace().abs() < 1e-14);
            // Hermiticity of the full result: the stored A/B diagonals must be real
            for n in 0..s.basis.trunc.field_dim() {
                assert!(l.a[(n, n)].im.abs() < 1e-15 && l.b[(n, n)].im.abs() < 1e-15);
            }
        }
    }

    #[test]
    fn pruning_respects_threshold() {
        let s = setup(6, 1.5, 0.2, 1e-3, Reservoir::White);
        let full = compute_w_tensors(&s.basis, &s.rates, 0.0, Exec::Sequential);
        let pruned = compute_w_tensors(&s.basis, &s.rates, 1e-6, Exec::Sequential);
        assert!(pruned.nnz() < full.nnz());
        assert!(pruned.fill_ratio() <= full.fill_ratio() && full.fill_ratio() <= 1.0);
        assert_eq!(pruned.epsilon_prune(), 1e-6 * pruned.max_abs());
        for ob in OutputBlock::ALL {
            for ib in InputBlock::ALL {
                assert!(pruned.block(ob, ib).iter().all(|e| e.value.norm() >= pruned.epsilon_prune()));
            }
        }
    }

    #[test]
    fn parallel_and_sequential_assembly_agree() {
        let s = setup(5, 1.5, 0.5, 1e-3, Reservoir::Ohmic);
        let a = compute_w_tensors(&s.basis, &s.rates, DEFAULT_PRUNE, Exec::Sequential);
        let b = compute_w_tensors(&s.basis, &s.rates, DEFAULT_PRUNE, Exec::Parallel);
        for ob in OutputBlock::ALL {
            for ib in InputBlock::ALL {
                assert_eq!(a.block(ob, ib), b.block(ob, ib));
            }
        }
    }

    #[test]
    fn d_block_is_populated() {
        let s = setup(3, 1.5, 0.5, 1e-2, Reservoir::White);
        let w = compute_w_tensors(&s.basis, &s.rates, 0.0, Exec::Sequential);
        assert!(!w.block(OutputBlock::A, InputBlock::D).is_empty());
        assert!(!w.block(OutputBlock::C, InputBlock::D).is_empty());
    }

    #[test]
    fn trajectory_matches_dressed_solver() {
        let s = setup(6, 1.5, 0.5, 1e-2, Reservoir::Ohmic);
        let w = compute_w_tensors(&s.basis, &s.rates, DEFAULT_PRUNE, Exec::Parallel);
        let mut rng = StdRng::seed_from_u64(17);
        let rho0 = random_rho(s.basis.trunc, &mut rng);
        let grid = TimeGrid::uniform(50.0, 26).unwrap();
        let cfg = IntegratorConfig::default();
        let v = &s.basis.coefficients;
        let r0 = DressedState::new(v.adjoint() * rho0.to_density() * v);
        let dressed = evolve_dme_dressed(&r0, &s.basis, &s.rates, &grid, DressedPropagation::Exact).unwrap();
        for ev in [WEvaluation::Sparse, WEvaluation::Factored] {
            let bare = evolve_dme_bare(&rho0, &s.model, &w, &grid, &cfg, ev).unwrap();
            for (b, r) in bare.states.iter().zip(&dressed.states) {
                let diff = &b.to_density() - &dressed_to_bare(r, &s.basis).to_density();
                assert!(max_abs(&diff) < 1e-7, "{ev:?}");
            }
        }
    }

    #[test]
    fn modulation_enters_only_the_unitary_part() {
        let s = setup(3, 0.5, 0.05, 1e-3, Reservoir::White);
        let w = compute_w_tensors(&s.basis, &s.rates, DEFAULT_PRUNE, Exec::Sequential);
        let modulated = s.model.with_modulation(ModulationParams { epsilon: 0.08, eta0: 2.0, alpha: 0.0 });
        let mut rng = StdRng::seed_from_u64(1);
        let rho = random_rho(s.basis.trunc, &mut rng);
        let y = pack(&rho).unwrap().y;
        let t = 0.7;
        let mut got = vec![0.0; y.len()];
        DmeBareRhs::new(&modulated, &w, WEvaluation::Sparse).eval(t, &y, &mut got);
        let mut want = vec![0.0; y.len()];
        pack_into(&crate::gksl::gksl_rhs(&modulated, &RateParams::zero(), &rho, t), &mut want);
        let mut diss = vec![0.0; y.len()];
        pack_into(&w.apply(&rho), &mut diss);
        for i in 0..y.len() {
            assert!((got[i] - want[i] - diss[i]).abs() < 1e-15);
        }
    }
}
