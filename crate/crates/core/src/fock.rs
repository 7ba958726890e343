//! Truncated Fock spaces: bases, pure and mixed states, and operators.
//!
//! A [`FockBasis`] enumerates occupation vectors in a fixed order: ascending
//! total photon number, lexicographic within each total. Every matrix in the
//! crate is indexed in this order.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::error::{Error, Result};
use crate::float::{factorial, ComplexExt, Float};
use crate::linalg::{self, CMatrix, C64, ONE, ZERO};

/// Photon count per mode.
pub type OccupationVector = Vec<u32>;

/// How a multimode Fock space is cut off.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Truncation {
    /// Exactly `n` photons in total.
    FixedTotal(u32),
    /// At most `n` photons in total.
    MaxTotal(u32),
    /// At most `c` photons in every mode.
    PerModeMax(u32),
}

#[derive(Clone, Debug)]
pub struct FockBasis {
    modes: usize,
    truncation: Truncation,
    states: Vec<OccupationVector>,
}

impl PartialEq for FockBasis {
    fn eq(&self, other: &Self) -> bool {
        self.modes == other.modes && self.truncation == other.truncation
    }
}

fn order_key(a: &[u32], b: &[u32]) -> Ordering {
    let ta: u64 = a.iter().map(|&x| u64::from(x)).sum();
    let tb: u64 = b.iter().map(|&x| u64::from(x)).sum();
    ta.cmp(&tb).then_with(|| a.cmp(b))
}

/// Appends every composition of `total` into `modes` parts bounded by
/// `limit`, in lexicographic order.
fn compositions(modes: usize, total: u32, limit: u32, out: &mut Vec<OccupationVector>) {
    fn rec(
        prefix: &mut Vec<u32>,
        left: usize,
        rest: u32,
        limit: u32,
        out: &mut Vec<OccupationVector>,
    ) {
        if left == 1 {
            if rest <= limit {
                prefix.push(rest);
                out.push(prefix.clone());
                prefix.pop();
            }
            return;
        }
        for k in 0..=rest.min(limit) {
            // remaining modes must be able to hold the rest
            if u64::from(rest - k) > u64::from(limit) * (left as u64 - 1) {
                continue;
            }
            prefix.push(k);
            rec(prefix, left - 1, rest - k, limit, out);
            prefix.pop();
        }
    }
    if modes == 0 {
        if total == 0 {
            out.push(Vec::new());
        }
        return;
    }
    rec(&mut Vec::with_capacity(modes), modes, total, limit, out);
}

impl FockBasis {
    pub fn new(modes: usize, truncation: Truncation) -> Result<Self> {
        if modes == 0 {
            return Err(Error::InvalidParameter(
                "a Fock basis needs at least one mode".into(),
            ));
        }
        let mut states = Vec::new();
        match truncation {
            Truncation::FixedTotal(n) => compositions(modes, n, n, &mut states),
            Truncation::MaxTotal(n) => {
                for t in 0..=n {
                    compositions(modes, t, t, &mut states);
                }
            }
            Truncation::PerModeMax(c) => {
                let max_total = c as usize * modes;
                for t in 0..=max_total as u32 {
                    compositions(modes, t, c, &mut states);
                }
            }
        }
        Ok(FockBasis {
            modes,
            truncation,
            states,
        })
    }

    pub fn fixed_total(modes: usize, n: u32) -> Result<Arc<Self>> {
        Self::new(modes, Truncation::FixedTotal(n)).map(Arc::new)
    }

    pub fn max_total(modes: usize, n: u32) -> Result<Arc<Self>> {
        Self::new(modes, Truncation::MaxTotal(n)).map(Arc::new)
    }

    pub fn per_mode(modes: usize, cutoff: u32) -> Result<Arc<Self>> {
        Self::new(modes, Truncation::PerModeMax(cutoff)).map(Arc::new)
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn truncation(&self) -> Truncation {
        self.truncation
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[OccupationVector] {
        &self.states
    }

    pub fn state(&self, index: usize) -> &[u32] {
        &self.states[index]
    }

    /// Position of `occ` in the enumeration, if it belongs to the basis.
    pub fn index_of(&self, occ: &[u32]) -> Option<usize> {
        if occ.len() != self.modes {
            return None;
        }
        self.states.binary_search_by(|s| order_key(s, occ)).ok()
    }

    /// Whether `occ` satisfies the truncation (independent of enumeration).
    pub fn admits(&self, occ: &[u32]) -> bool {
        if occ.len() != self.modes {
            return false;
        }
        let total: u32 = occ.iter().sum();
        match self.truncation {
            Truncation::FixedTotal(n) => total == n,
            Truncation::MaxTotal(n) => total <= n,
            Truncation::PerModeMax(c) => occ.iter().all(|&k| k <= c),
        }
    }

    /// Largest occupation any single mode can reach.
    pub fn mode_cutoff(&self) -> u32 {
        match self.truncation {
            Truncation::FixedTotal(n) | Truncation::MaxTotal(n) | Truncation::PerModeMax(n) => n,
        }
    }

    fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.modes {
            return Err(Error::ModeOutOfRange {
                mode,
                modes: self.modes,
            });
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    basis: Arc<FockBasis>,
    amplitudes: Vec<C64>,
}

impl PureState {
    /// Wraps amplitudes; sub-normalized vectors are allowed.
    pub fn new(basis: Arc<FockBasis>, amplitudes: Vec<C64>) -> Result<Self> {
        if amplitudes.len() != basis.dim() {
            return Err(Error::DimensionMismatch {
                expected: basis.dim(),
                found: amplitudes.len(),
            });
        }
        if amplitudes
            .iter()
            .any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(Error::InvalidParameter("non-finite amplitude".into()));
        }
        Ok(PureState { basis, amplitudes })
    }

    pub fn zero(basis: Arc<FockBasis>) -> Self {
        let n = basis.dim();
        PureState {
            basis,
            amplitudes: vec![ZERO; n],
        }
    }

    pub fn basis_state(basis: Arc<FockBasis>, occ: &[u32]) -> Result<Self> {
        let idx = basis.index_of(occ).ok_or_else(|| {
            Error::InvalidParameter(format!("occupation {occ:?} is outside the basis"))
        })?;
        let mut s = Self::zero(basis);
        s.amplitudes[idx] = ONE;
        Ok(s)
    }

    /// Single-mode state from amplitudes on `|0⟩, |1⟩, …`.
    pub fn single_mode(amplitudes: &[C64]) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(Error::InvalidParameter("empty amplitude list".into()));
        }
        let basis = FockBasis::per_mode(1, amplitudes.len() as u32 - 1)?;
        Self::new(basis, amplitudes.to_vec())
    }

    pub fn basis(&self) -> &Arc<FockBasis> {
        &self.basis
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn amplitude(&self, occ: &[u32]) -> C64 {
        self.basis
            .index_of(occ)
            .map_or(ZERO, |i| self.amplitudes[i])
    }

    pub fn norm_sqr(&self) -> f64 {
        linalg::norm_sqr(&self.amplitudes)
    }

    /// Returns the normalized state; fails on a zero vector.
    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm_sqr();
        if n <= 0.0 {
            return Err(Error::NotNormalized { norm_sqr: n });
        }
        let s = 1.0 / Float::sqrt(n);
        Ok(PureState {
            basis: self.basis.clone(),
            amplitudes: self.amplitudes.iter().map(|z| z * s).collect(),
        })
    }

    pub fn scaled(&self, s: C64) -> Self {
        PureState {
            basis: self.basis.clone(),
            amplitudes: self.amplitudes.iter().map(|z| z * s).collect(),
        }
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &PureState) -> Result<C64> {
        same_basis(&self.basis, &other.basis)?;
        Ok(linalg::dot(&self.amplitudes, &other.amplitudes))
    }

    /// `|⟨a|b⟩|² / (‖a‖²‖b‖²)`.
    pub fn fidelity(&self, other: &PureState) -> Result<f64> {
        let ov = self.inner(other)?;
        let d = self.norm_sqr() * other.norm_sqr();
        if d <= 0.0 {
            return Ok(0.0);
        }
        Ok(ov.norm_sqr() / d)
    }

    /// Re-expresses the state in another basis over the same modes. Support
    /// outside `target` is an error unless its weight is below `tol`.
    pub fn embed(&self, target: Arc<FockBasis>, tol: f64) -> Result<Self> {
        if target.modes() != self.basis.modes() {
            return Err(Error::DimensionMismatch {
                expected: target.modes(),
                found: self.basis.modes(),
            });
        }
        let mut out = Self::zero(target.clone());
        let mut dropped = 0.0;
        for (occ, a) in self.basis.states().iter().zip(&self.amplitudes) {
            match target.index_of(occ) {
                Some(j) => out.amplitudes[j] = *a,
                None => dropped += a.norm_sqr(),
            }
        }
        if dropped > tol {
            return Err(Error::TailBound(format!(
                "embedding drops weight {dropped:e}"
            )));
        }
        Ok(out)
    }

    pub fn to_mixed(&self) -> MixedState {
        let n = self.amplitudes.len();
        let a = &self.amplitudes;
        MixedState {
            basis: self.basis.clone(),
            matrix: CMatrix::from_fn(n, n, |i, j| a[i] * a[j].conj()),
        }
    }
}

fn same_basis(a: &FockBasis, b: &FockBasis) -> Result<()> {
    if a != b {
        return Err(Error::PolicyMismatch);
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct MixedState {
    basis: Arc<FockBasis>,
    matrix: CMatrix,
}

impl MixedState {
    pub fn new(basis: Arc<FockBasis>, matrix: CMatrix) -> Result<Self> {
        if matrix.rows() != basis.dim() || matrix.cols() != basis.dim() {
            return Err(Error::DimensionMismatch {
                expected: basis.dim(),
                found: matrix.rows(),
            });
        }
        Ok(MixedState { basis, matrix })
    }

    pub fn basis(&self) -> &Arc<FockBasis> {
        &self.basis
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    pub fn hermiticity_defect(&self) -> f64 {
        self.matrix.hermiticity_defect()
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        let (vals, _) = linalg::hermitian_eigen(&self.matrix)?;
        Ok(vals.first().copied().unwrap_or(0.0))
    }

    /// `⟨ψ|ρ|ψ⟩ / ‖ψ‖²`.
    pub fn expectation(&self, psi: &PureState) -> Result<f64> {
        same_basis(&self.basis, psi.basis())?;
        let rp = self.matrix.mul_vec(psi.amplitudes());
        Ok(linalg::dot(psi.amplitudes(), &rp).re / psi.norm_sqr())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FockOperator {
    domain: Arc<FockBasis>,
    codomain: Arc<FockBasis>,
    matrix: CMatrix,
}

impl FockOperator {
    pub fn new(basis: Arc<FockBasis>, matrix: CMatrix) -> Result<Self> {
        Self::between(basis.clone(), basis, matrix)
    }

    /// Operator mapping `domain` into `codomain` (rows index the codomain).
    pub fn between(
        domain: Arc<FockBasis>,
        codomain: Arc<FockBasis>,
        matrix: CMatrix,
    ) -> Result<Self> {
        if matrix.rows() != codomain.dim() || matrix.cols() != domain.dim() {
            return Err(Error::DimensionMismatch {
                expected: codomain.dim() * domain.dim(),
                found: matrix.rows() * matrix.cols(),
            });
        }
        Ok(FockOperator {
            domain,
            codomain,
            matrix,
        })
    }

    pub fn identity(basis: Arc<FockBasis>) -> Self {
        let n = basis.dim();
        FockOperator {
            domain: basis.clone(),
            codomain: basis,
            matrix: CMatrix::identity(n),
        }
    }

    /// Diagonal operator with entry `f(occupation)`.
    pub fn diagonal(basis: Arc<FockBasis>, f: impl Fn(&[u32]) -> C64) -> Self {
        let vals: Vec<C64> = basis.states().iter().map(|s| f(s)).collect();
        FockOperator {
            domain: basis.clone(),
            codomain: basis,
            matrix: CMatrix::diagonal(&vals),
        }
    }

    pub fn domain(&self) -> &Arc<FockBasis> {
        &self.domain
    }

    pub fn codomain(&self) -> &Arc<FockBasis> {
        &self.codomain
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    /// Matrix element `⟨out|Op|inp⟩`; zero outside the bases.
    pub fn element(&self, out: &[u32], inp: &[u32]) -> C64 {
        match (self.codomain.index_of(out), self.domain.index_of(inp)) {
            (Some(i), Some(j)) => self.matrix[(i, j)],
            _ => ZERO,
        }
    }

    pub fn apply(&self, state: &PureState) -> Result<PureState> {
        same_basis(&self.domain, state.basis())?;
        Ok(PureState {
            basis: self.codomain.clone(),
            amplitudes: self.matrix.mul_vec(state.amplitudes()),
        })
    }

    /// `self ∘ first`: apply `first`, then `self`.
    pub fn after(&self, first: &FockOperator) -> Result<FockOperator> {
        same_basis(&self.domain, &first.codomain)?;
        Ok(FockOperator {
            domain: first.domain.clone(),
            codomain: self.codomain.clone(),
            matrix: &self.matrix * &first.matrix,
        })
    }

    /// `Op ρ Op†`.
    pub fn conjugate(&self, rho: &MixedState) -> Result<MixedState> {
        same_basis(&self.domain, rho.basis())?;
        Ok(MixedState {
            basis: self.codomain.clone(),
            matrix: &(&self.matrix * rho.matrix()) * &self.matrix.adjoint(),
        })
    }

    pub fn adjoint(&self) -> FockOperator {
        FockOperator {
            domain: self.codomain.clone(),
            codomain: self.domain.clone(),
            matrix: self.matrix.adjoint(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Ladder {
    Create,
    Annihilate,
    Number,
}

fn shifted_basis(basis: &Arc<FockBasis>, kind: Ladder) -> Result<Arc<FockBasis>> {
    match (basis.truncation(), kind) {
        (Truncation::FixedTotal(n), Ladder::Create) => FockBasis::fixed_total(basis.modes(), n + 1),
        (Truncation::FixedTotal(n), Ladder::Annihilate) => {
            FockBasis::fixed_total(basis.modes(), n.saturating_sub(1))
        }
        _ => Ok(basis.clone()),
    }
}

/// Applies `a†`, `a` or `n̂` on one mode. In a fixed-total basis the result
/// lives in the neighbouring photon-number sector; otherwise any amplitude
/// pushed past the truncation is an error.
pub fn apply_ladder(kind: Ladder, mode: usize, state: &PureState) -> Result<PureState> {
    let basis = state.basis();
    basis.check_mode(mode)?;
    let target = shifted_basis(basis, kind)?;
    let mut out = PureState::zero(target.clone());
    for (occ, a) in basis.states().iter().zip(state.amplitudes()) {
        if *a == ZERO {
            continue;
        }
        let k = occ[mode];
        let mut next = occ.clone();
        let factor = match kind {
            Ladder::Number => f64::from(k),
            Ladder::Annihilate => {
                if k == 0 {
                    continue;
                }
                next[mode] = k - 1;
                Float::sqrt(f64::from(k))
            }
            Ladder::Create => {
                next[mode] = k + 1;
                Float::sqrt(f64::from(k + 1))
            }
        };
        match target.index_of(&next) {
            Some(j) => out.amplitudes[j] += a * factor,
            None => {
                return Err(Error::CutoffOverflow {
                    mode,
                    cutoff: basis.mode_cutoff(),
                })
            }
        }
    }
    Ok(out)
}

/// Matrix of a ladder operator on a fixed basis. Transitions leaving the
/// basis are dropped, so `a†` is the truncated creation matrix.
pub fn ladder_operator(kind: Ladder, mode: usize, basis: Arc<FockBasis>) -> Result<FockOperator> {
    basis.check_mode(mode)?;
    let n = basis.dim();
    let mut m = CMatrix::zeros(n, n);
    for (j, occ) in basis.states().iter().enumerate() {
        let k = occ[mode];
        let mut next = occ.clone();
        let factor = match kind {
            Ladder::Number => {
                m[(j, j)] = C64::new(f64::from(k), 0.0);
                continue;
            }
            Ladder::Annihilate if k == 0 => continue,
            Ladder::Annihilate => {
                next[mode] = k - 1;
                Float::sqrt(f64::from(k))
            }
            Ladder::Create => {
                next[mode] = k + 1;
                Float::sqrt(f64::from(k + 1))
            }
        };
        if let Some(i) = basis.index_of(&next) {
            m[(i, j)] = C64::new(factor, 0.0);
        }
    }
    FockOperator::new(basis, m)
}

/// `Σ_k c_k n̂^k` on `mode`, identity on the other modes.
pub fn number_polynomial(
    coeffs: &[C64],
    mode: usize,
    basis: Arc<FockBasis>,
) -> Result<FockOperator> {
    if coeffs.is_empty() {
        return Err(Error::InvalidParameter("empty polynomial".into()));
    }
    basis.check_mode(mode)?;
    Ok(FockOperator::diagonal(basis, |occ| {
        eval_poly(coeffs, C64::new(f64::from(occ[mode]), 0.0))
    }))
}

/// Horner evaluation of `Σ c_k x^k`.
pub fn eval_poly(coeffs: &[C64], x: C64) -> C64 {
    coeffs.iter().rev().fold(ZERO, |acc, c| acc * x + c)
}

/// Generalized Laguerre polynomial `L_n^{(a)}(x)` by the three-term recurrence.
fn laguerre(n: u32, a: f64, x: f64) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let mut prev = 1.0;
    let mut cur = 1.0 + a - x;
    for k in 1..n {
        let k = f64::from(k);
        let next = ((2.0 * k + 1.0 + a - x) * cur - (k + a) * prev) / (k + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// Closed-form `⟨m|D(α)|n⟩` of the untruncated displacement operator.
pub fn displacement_element(alpha: C64, m: u32, n: u32) -> C64 {
    let x = alpha.norm_sqr();
    let g = Float::exp(-0.5 * x);
    if m >= n {
        let d = m - n;
        let pre = Float::sqrt(factorial(n) / factorial(m));
        alpha.powu(d) * (pre * g * laguerre(n, f64::from(d), x))
    } else {
        let d = n - m;
        let pre = Float::sqrt(factorial(m) / factorial(n));
        (-alpha.conj()).powu(d) * (pre * g * laguerre(m, f64::from(d), x))
    }
}

/// Truncated single-mode displacement with its accuracy certificate.
#[derive(Clone, Debug)]
pub struct Displacement {
    pub operator: FockOperator,
    /// Columns `0..=accurate_levels` match the untruncated operator to 1e−10.
    pub accurate_levels: u32,
}

/// `exp(α a† − α* a)` on `{|0⟩ … |cutoff⟩}`. The matrix is the exact
/// exponential of the truncated generator, hence unitary; its high columns
/// feel the truncation. The guard band is determined adaptively by checking
/// each column against the closed-form elements.
pub fn displacement(alpha: C64, cutoff: u32) -> Result<Displacement> {
    if cutoff < 1 {
        return Err(Error::CutoffTooSmall {
            cutoff,
            reason: "displacement needs at least two levels".into(),
        });
    }
    let basis = FockBasis::per_mode(1, cutoff)?;
    let n = basis.dim();
    let mut g = CMatrix::zeros(n, n);
    for k in 0..n - 1 {
        let s = Float::sqrt((k + 1) as f64);
        g[(k + 1, k)] = alpha * s;
        g[(k, k + 1)] = -alpha.conj() * s;
    }
    let d = linalg::expm_antihermitian(&g)?;
    let mut accurate = None;
    for col in 0..n {
        let ok = (0..n).all(|row| {
            (d[(row, col)] - displacement_element(alpha, row as u32, col as u32)).modulus() <= 1e-10
        });
        if !ok {
            break;
        }
        accurate = Some(col as u32);
    }
    let accurate_levels = accurate.ok_or_else(|| Error::CutoffTooSmall {
        cutoff,
        reason: format!("no column of D({alpha}) is accurate to 1e-10"),
    })?;
    Ok(Displacement {
        operator: FockOperator::new(basis, d)?,
        accurate_levels,
    })
}

/// Convenience wrapper returning only the operator.
pub fn displacement_operator(alpha: C64, cutoff: u32) -> Result<FockOperator> {
    displacement(alpha, cutoff).map(|d| d.operator)
}

/// Basis of `a ⊗ b` with `a`'s modes first.
fn product_basis(a: &FockBasis, b: &FockBasis) -> Result<(Arc<FockBasis>, Vec<usize>)> {
    let (Truncation::PerModeMax(ca), Truncation::PerModeMax(cb)) = (a.truncation(), b.truncation())
    else {
        return Err(Error::PolicyMismatch);
    };
    if ca != cb {
        return Err(Error::PolicyMismatch);
    }
    let basis = FockBasis::per_mode(a.modes() + b.modes(), ca)?;
    // position of each (i, j) pair of the Kronecker order inside `basis`
    let mut perm = Vec::with_capacity(a.dim() * b.dim());
    for sa in a.states() {
        for sb in b.states() {
            let mut occ = sa.clone();
            occ.extend_from_slice(sb);
            perm.push(basis.index_of(&occ).ok_or(Error::PolicyMismatch)?);
        }
    }
    Ok((basis, perm))
}

pub fn tensor_states(a: &PureState, b: &PureState) -> Result<PureState> {
    let (basis, perm) = product_basis(a.basis(), b.basis())?;
    let mut out = PureState::zero(basis);
    let mut k = 0;
    for x in a.amplitudes() {
        for y in b.amplitudes() {
            out.amplitudes[perm[k]] = x * y;
            k += 1;
        }
    }
    Ok(out)
}

pub fn tensor_operators(a: &FockOperator, b: &FockOperator) -> Result<FockOperator> {
    if a.domain() != a.codomain() || b.domain() != b.codomain() {
        return Err(Error::PolicyMismatch);
    }
    let (basis, perm) = product_basis(a.domain(), b.domain())?;
    let k = a.matrix().kron(b.matrix());
    let n = basis.dim();
    let mut m = CMatrix::zeros(n, n);
    for (i, &pi) in perm.iter().enumerate() {
        for (j, &pj) in perm.iter().enumerate() {
            m[(pi, pj)] = k[(i, j)];
        }
    }
    FockOperator::new(basis, m)
}

/// Reduced density matrix on `keep` (in the given order).
pub fn partial_trace(state: &MixedState, keep: &[usize]) -> Result<MixedState> {
    if keep.is_empty() {
        return Err(Error::EmptyKeepSet);
    }
    let basis = state.basis();
    for (i, &m) in keep.iter().enumerate() {
        basis.check_mode(m)?;
        if keep[..i].contains(&m) {
            return Err(Error::InvalidPartition(format!("mode {m} listed twice")));
        }
    }
    let traced: Vec<usize> = (0..basis.modes()).filter(|m| !keep.contains(m)).collect();
    let reduced = match basis.truncation() {
        Truncation::PerModeMax(c) => FockBasis::per_mode(keep.len(), c)?,
        Truncation::FixedTotal(n) | Truncation::MaxTotal(n) => FockBasis::max_total(keep.len(), n)?,
    };
    // group basis states by the occupation of the traced modes
    let mut groups: BTreeMap<Vec<u32>, Vec<(usize, usize)>> = BTreeMap::new();
    for (idx, occ) in basis.states().iter().enumerate() {
        let env: Vec<u32> = traced.iter().map(|&m| occ[m]).collect();
        let sys: Vec<u32> = keep.iter().map(|&m| occ[m]).collect();
        let r = reduced.index_of(&sys).ok_or(Error::PolicyMismatch)?;
        groups.entry(env).or_default().push((idx, r));
    }
    let n = reduced.dim();
    let mut out = CMatrix::zeros(n, n);
    let rho = state.matrix();
    for members in groups.values() {
        for &(i, ri) in members {
            for &(j, rj) in members {
                out[(ri, rj)] += rho[(i, j)];
            }
        }
    }
    MixedState::new(reduced, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn ordering_is_total_then_lex() {
        let b = FockBasis::max_total(2, 2).unwrap();
        let want: Vec<Vec<u32>> = vec![
            vec![0, 0],
            vec![0, 1],
            vec![1, 0],
            vec![0, 2],
            vec![1, 1],
            vec![2, 0],
        ];
        assert_eq!(b.states(), &want[..]);
        for (i, s) in want.iter().enumerate() {
            assert_eq!(b.index_of(s), Some(i));
        }
        assert_eq!(b.index_of(&[3, 0]), None);
    }

    #[test]
    fn per_mode_dimension() {
        let b = FockBasis::per_mode(3, 2).unwrap();
        assert_eq!(b.dim(), 27);
        let f = FockBasis::fixed_total(3, 4).unwrap();
        assert_eq!(f.dim(), 15);
    }

    #[test]
    fn ladder_examples() {
        let b = FockBasis::per_mode(1, 3).unwrap();
        let vac = PureState::basis_state(b.clone(), &[0]).unwrap();
        let one = apply_ladder(Ladder::Create, 0, &vac).unwrap();
        assert_eq!(one.amplitude(&[1]), ONE);
        let z = apply_ladder(Ladder::Annihilate, 0, &vac).unwrap();
        assert_eq!(z.norm_sqr(), 0.0);
        let three = PureState::basis_state(b.clone(), &[3]).unwrap();
        let n3 = apply_ladder(Ladder::Number, 0, &three).unwrap();
        assert_eq!(n3.amplitude(&[3]), c(3.0));
        assert!(matches!(
            apply_ladder(Ladder::Create, 0, &three),
            Err(Error::CutoffOverflow { .. })
        ));
        assert!(matches!(
            apply_ladder(Ladder::Create, 1, &three),
            Err(Error::ModeOutOfRange { .. })
        ));
    }

    #[test]
    fn ladder_shifts_fixed_sector() {
        let b = FockBasis::fixed_total(2, 1).unwrap();
        let s = PureState::basis_state(b, &[1, 0]).unwrap();
        let up = apply_ladder(Ladder::Create, 0, &s).unwrap();
        assert_eq!(up.basis().truncation(), Truncation::FixedTotal(2));
        assert!((up.amplitude(&[2, 0]) - c(2f64.sqrt())).modulus() < 1e-15);
    }

    #[test]
    fn repeated_creation_gives_factorial_norm() {
        let b = FockBasis::per_mode(1, 6).unwrap();
        let mut s = PureState::basis_state(b, &[0]).unwrap();
        for p in 1..=6u32 {
            s = apply_ladder(Ladder::Create, 0, &s).unwrap();
            let want = factorial(p).sqrt();
            assert!((s.amplitude(&[p]).re - want).abs() <= 1e-12 * want);
        }
    }

    #[test]
    fn commutator_is_identity_in_interior() {
        let b = FockBasis::per_mode(2, 4).unwrap();
        let a = ladder_operator(Ladder::Annihilate, 1, b.clone()).unwrap();
        let ad = ladder_operator(Ladder::Create, 1, b.clone()).unwrap();
        let comm = a.matrix().commutator(ad.matrix());
        for (i, occ) in b.states().iter().enumerate() {
            if occ[1] < 4 {
                assert!((comm[(i, i)] - ONE).modulus() < 1e-14);
            }
        }
    }

    #[test]
    fn number_polynomial_examples() {
        let b = FockBasis::per_mode(1, 3).unwrap();
        let id = number_polynomial(&[c(1.0), c(0.0), c(0.0)], 0, b.clone()).unwrap();
        assert_eq!(id.matrix(), &CMatrix::identity(4));
        let kill = number_polynomial(&[c(1.0), c(-1.5), c(0.5)], 0, b.clone()).unwrap();
        assert!(kill.element(&[2], &[2]).modulus() < 1e-15);
        let swap = number_polynomial(&[c(1.0), c(-4.0), c(2.0)], 0, b).unwrap();
        for n in 0..3u32 {
            let want = if n % 2 == 0 { 1.0 } else { -1.0 };
            assert!((swap.element(&[n], &[n]).re - want).abs() < 1e-15);
        }
    }

    #[test]
    fn displacement_examples() {
        let alpha = C64::new(0.5, 0.0);
        let d = displacement(alpha, 20).unwrap();
        let want = (-0.125f64).exp();
        assert!((d.operator.element(&[0], &[0]).re - want).abs() < 1e-12);
        assert!(d.accurate_levels >= 5, "{}", d.accurate_levels);
        let dm = displacement(-alpha, 20).unwrap();
        let prod = dm.operator.matrix() * d.operator.matrix();
        let g = d.accurate_levels.min(dm.accurate_levels) as usize;
        for i in 0..=g {
            for j in 0..=g {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((prod[(i, j)] - c(want)).modulus() < 1e-8);
            }
        }
        assert!(
            displacement_operator(C64::new(0.0, 0.0), 5)
                .unwrap()
                .matrix()
                .sub(&CMatrix::identity(6))
                .max_abs()
                < 1e-15
        );
    }

    #[test]
    fn tensor_and_trace() {
        let b1 = FockBasis::per_mode(1, 2).unwrap();
        let one = PureState::basis_state(b1.clone(), &[1]).unwrap();
        let vac = PureState::basis_state(b1.clone(), &[0]).unwrap();
        let p = tensor_states(&one, &vac).unwrap();
        assert_eq!(p.amplitude(&[1, 0]), ONE);
        let n = ladder_operator(Ladder::Number, 0, b1.clone()).unwrap();
        let nn = tensor_operators(&n, &n).unwrap();
        let b2 = nn.domain().clone();
        let s11 = PureState::basis_state(b2.clone(), &[1, 1]).unwrap();
        assert_eq!(nn.apply(&s11).unwrap(), s11);
        let id = tensor_operators(
            &FockOperator::identity(b1.clone()),
            &FockOperator::identity(b1),
        )
        .unwrap();
        assert_eq!(id.matrix(), &CMatrix::identity(9));
    }

    #[test]
    fn partial_trace_of_bell_pair() {
        let b = FockBasis::per_mode(2, 1).unwrap();
        let s = 1.0 / 2f64.sqrt();
        let mut amps = vec![ZERO; b.dim()];
        amps[b.index_of(&[0, 0]).unwrap()] = c(s);
        amps[b.index_of(&[1, 1]).unwrap()] = c(s);
        let bell = PureState::new(b, amps).unwrap().to_mixed();
        let red = partial_trace(&bell, &[0]).unwrap();
        assert!((red.matrix()[(0, 0)].re - 0.5).abs() < 1e-15);
        assert!((red.matrix()[(1, 1)].re - 0.5).abs() < 1e-15);
        assert!(red.matrix()[(0, 1)].modulus() < 1e-15);
        assert!(matches!(
            partial_trace(&bell, &[]),
            Err(Error::EmptyKeepSet)
        ));
    }
}
