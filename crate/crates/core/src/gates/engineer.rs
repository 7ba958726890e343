//! State engineering and the layer-crossing single-qubit gates.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use super::phase::{cphase_gate_with, CphaseVariant};
use super::{report, GateRecipe, GateReport};
use crate::conditioning::{
    apply_unitary, extract_conditional_operator, project_modes, AncillaSpec, ConditionalOperator,
    DetectionSpec,
};
use crate::error::{Error, Result};
use crate::float::{factorial, polar, ComplexExt, Float, PI};
use crate::fock::{eval_poly, number_polynomial, FockBasis, FockOperator, PureState};
use crate::interferometer::{
    bs_matrix, compose, BeamSplitterParams, ModeUnitary, NetworkDescription,
};
use crate::linalg::{hessenberg_eigenvalues, CMatrix, C64, ONE, ZERO};
use crate::optimizer::optimize_with;

/// Highest polynomial degree [`engineer_state`] accepts.
pub const MAX_DEGREE: usize = 6;
/// Root condition numbers above this are flagged.
pub const CONDITION_WARN: f64 = 1e8;
/// Transmission of the photon-adding beam splitters.
pub const ADDER_TRANSMISSION: f64 = 0.9;
/// Default TMSV parameter of the Pauli recipes.
pub const PAULI_Q: f64 = 0.01;
/// Default restart budget of the Pauli network search.
pub const PAULI_RESTARTS: usize = 20;
/// Restart budget of the four-photon C-z inside [`hadamard_gate`].
pub const HADAMARD_CZ_RESTARTS: usize = 20;

const MAX_WORKING_CUTOFF: u32 = 1500;
const ROOT_RESIDUAL: f64 = 1e-8;
const KILL: [C64; 3] = [
    C64 { re: 1.0, im: 0.0 },
    C64 { re: 0.5, im: 0.0 },
    C64 { re: -0.5, im: 0.0 },
];

/// `K = 1 − ½n̂(n̂ − 1)` on `{|0⟩ … |cutoff⟩}`.
pub fn kill_operator(cutoff: u32) -> Result<FockOperator> {
    if cutoff < 2 {
        return Err(Error::CutoffTooSmall {
            cutoff,
            reason: "the KILL operator acts on the two-photon level".into(),
        });
    }
    number_polynomial(&KILL, 0, FockBasis::per_mode(1, cutoff)?)
}

/// Conditional photon addition `r a† t^{n̂}`: a beam splitter fed with one
/// photon whose auxiliary output is heralded in vacuum.
pub fn photon_adder(t: C64, r: C64, cutoff: u32) -> Result<FockOperator> {
    let dom = FockBasis::per_mode(1, cutoff)?;
    let cod = FockBasis::per_mode(1, cutoff + 1)?;
    let mut m = CMatrix::zeros(cutoff as usize + 2, cutoff as usize + 1);
    for n in 0..=cutoff {
        m[(n as usize + 1, n as usize)] = r * t.powu(n) * Float::sqrt(f64::from(n + 1));
    }
    FockOperator::between(dom, cod, m)
}

/// Optical resources consumed by a construction.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ResourceCount {
    pub single_photon_sources: usize,
    pub coherent_sources: usize,
    pub beam_splitters: usize,
    pub detectors: usize,
}

/// Output of [`engineer_state`].
#[derive(Clone, Debug)]
pub struct EngineeredState {
    /// Normalized state on `{|0⟩ … |n⟩}`.
    pub state: PureState,
    /// Roots `α_k*` of `Σ d_k x^k`.
    pub roots: Vec<C64>,
    /// Amplitude of the coherent state the chain starts from.
    pub initial_coherent: C64,
    /// Displacement applied after each photon addition.
    pub displacements: Vec<C64>,
    pub adder_transmission: f64,
    pub resources: ResourceCount,
    /// Largest relative condition number of the roots.
    pub condition: f64,
    pub ill_conditioned: bool,
    /// Product of the adders' heralding probabilities.
    pub success_probability: f64,
    /// Weight left above level `n` by the truncated simulation.
    pub truncation_loss: f64,
    pub working_cutoff: u32,
}

fn polynomial_roots(coeffs: &[C64]) -> Result<(Vec<C64>, f64)> {
    let n = coeffs.len() - 1;
    let lead = coeffs[n];
    let mut h = CMatrix::zeros(n, n);
    for j in 0..n {
        h[(0, j)] = -coeffs[n - 1 - j] / lead;
    }
    for i in 1..n {
        h[(i, i - 1)] = ONE;
    }
    let deriv: Vec<C64> = (1..=n).map(|k| coeffs[k] * k as f64).collect();
    let scale = |z: C64| -> f64 {
        let a = z.modulus();
        coeffs
            .iter()
            .enumerate()
            .map(|(k, d)| d.modulus() * a.powi(k as i32))
            .sum()
    };
    let mut roots = hessenberg_eigenvalues(&h).map_err(|_| Error::RootFinding {
        condition: f64::INFINITY,
    })?;
    for z in &mut roots {
        for _ in 0..4 {
            let d = eval_poly(&deriv, *z);
            if d.modulus() == 0.0 {
                break;
            }
            let step = eval_poly(coeffs, *z) / d;
            let cand = *z - step;
            if eval_poly(coeffs, cand).modulus() < eval_poly(coeffs, *z).modulus() {
                *z = cand;
            } else {
                break;
            }
        }
    }
    let mut condition: f64 = 0.0;
    for z in &roots {
        let s = scale(*z);
        let d = eval_poly(&deriv, *z).modulus();
        let k = if d == 0.0 {
            f64::INFINITY
        } else if z.modulus() > 1e-300 {
            s / (d * z.modulus())
        } else {
            s / d
        };
        condition = condition.max(k);
        if eval_poly(coeffs, *z).modulus() > ROOT_RESIDUAL * s {
            return Err(Error::RootFinding { condition });
        }
    }
    Ok((roots, condition))
}

/// `D(δ)v` on a truncated vector, by Taylor steps of the tridiagonal
/// generator `δa† − δ*a` small enough to keep every step contractive.
fn displace(v: &[C64], delta: C64) -> Vec<C64> {
    if delta == ZERO {
        return v.to_vec();
    }
    let c = v.len();
    let bound = 2.0 * delta.modulus() * Float::sqrt(c as f64);
    let steps = Float::ceil(bound / 0.5).max(1.0) as usize;
    let d = delta / steps as f64;
    let sq: Vec<f64> = (0..=c).map(|k| Float::sqrt(k as f64)).collect();
    let apply = |x: &[C64], y: &mut [C64]| {
        for k in 0..c {
            let mut acc = ZERO;
            if k > 0 {
                acc += d * sq[k] * x[k - 1];
            }
            if k + 1 < c {
                acc -= d.conj() * sq[k + 1] * x[k + 1];
            }
            y[k] = acc;
        }
    };
    let mut out = v.to_vec();
    let mut term = vec![ZERO; c];
    let mut next = vec![ZERO; c];
    for _ in 0..steps {
        term.copy_from_slice(&out);
        let scale = norm_sqr(&out).max(f64::MIN_POSITIVE);
        for j in 1..40 {
            apply(&term, &mut next);
            let inv = 1.0 / j as f64;
            for z in next.iter_mut() {
                *z *= inv;
            }
            core::mem::swap(&mut term, &mut next);
            for (o, t) in out.iter_mut().zip(&term) {
                *o += t;
            }
            if norm_sqr(&term) < 1e-36 * scale {
                break;
            }
        }
    }
    out
}

/// Coherent state `|β⟩` on `len` levels, built in log magnitude.
fn coherent_vector(beta: C64, len: usize) -> Vec<C64> {
    let x = beta.modulus();
    let phase = beta.phase();
    let mut log_fact = 0.0;
    (0..len)
        .map(|m| {
            if m > 0 {
                log_fact += Float::ln(m as f64);
            }
            if x == 0.0 {
                return if m == 0 { ONE } else { ZERO };
            }
            let lm = -0.5 * x * x + m as f64 * Float::ln(x) - 0.5 * log_fact;
            polar(Float::exp(lm), phase * m as f64)
        })
        .collect()
}

fn norm_sqr(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

fn check_coefficients(coeffs: &[C64]) -> Result<usize> {
    if coeffs.is_empty() {
        return Err(Error::InvalidParameter("empty coefficient list".into()));
    }
    if coeffs
        .iter()
        .any(|z| !(z.re.is_finite() && z.im.is_finite()))
    {
        return Err(Error::InvalidParameter("non-finite coefficient".into()));
    }
    let n = coeffs.len() - 1;
    if coeffs[n] == ZERO {
        return Err(Error::InvalidParameter(
            "leading coefficient is zero".into(),
        ));
    }
    if n > MAX_DEGREE {
        return Err(Error::DimensionTooLarge { n, max: MAX_DEGREE });
    }
    Ok(n)
}

/// Builds `Σ d_k (a†)^k|0⟩ ∝ ∏_k (a† − α_k*)|0⟩` by alternating conditional
/// photon additions and displacements, starting from a coherent state.
///
/// Each adder also applies the filter `t^{n̂}`, which rescales the
/// remaining roots by `t` and the coherent amplitude likewise, so the
/// displacements are scheduled backwards from the last root.
pub fn engineer_state(coeffs: &[C64]) -> Result<EngineeredState> {
    let n = check_coefficients(coeffs)?;
    if n == 0 {
        return Ok(EngineeredState {
            state: PureState::single_mode(&[ONE])?,
            roots: Vec::new(),
            initial_coherent: ZERO,
            displacements: Vec::new(),
            adder_transmission: ADDER_TRANSMISSION,
            resources: ResourceCount::default(),
            condition: 1.0,
            ill_conditioned: false,
            success_probability: 1.0,
            truncation_loss: 0.0,
            working_cutoff: 0,
        });
    }
    let (roots, condition) = polynomial_roots(coeffs)?;
    let t = ADDER_TRANSMISSION;
    let r = Float::sqrt(1.0 - t * t);

    let mut pending = roots.clone();
    let mut deltas = vec![ZERO; n];
    let mut beta = ZERO;
    for k in (0..n).rev() {
        let g = pending.pop().unwrap_or(ZERO);
        deltas[k] = g.conj();
        pending = pending.iter().map(|x| (x - g) * t).collect();
        beta = (beta - deltas[k]) / t;
    }
    let beta0 = beta;

    let mut reach = beta0.modulus();
    let mut b = beta0;
    for d in &deltas {
        b = b * t + d;
        reach = reach.max(b.modulus());
    }
    let spread = roots.iter().fold(0.0f64, |m, z| m.max(z.modulus()));
    let reach = reach + spread;
    let need = n as f64 + reach * reach + 12.0 * reach + 30.0;
    if need > f64::from(MAX_WORKING_CUTOFF) {
        return Err(Error::CutoffTooSmall {
            cutoff: MAX_WORKING_CUTOFF,
            reason: alloc::format!(
                "coherent amplitudes up to {reach:.3} need about {need:.0} levels"
            ),
        });
    }
    let cut = Float::ceil(need) as u32;
    let len = cut as usize + 1;

    let mut v = coherent_vector(beta0, len);
    let mut prob = 1.0;
    let tc = C64::new(t, 0.0);
    for d in &deltas {
        let before = norm_sqr(&v);
        let mut w = vec![ZERO; len];
        for m in 0..len - 1 {
            w[m + 1] = v[m] * r * tc.powu(m as u32) * Float::sqrt((m + 1) as f64);
        }
        let after = norm_sqr(&w);
        prob *= after / before;
        let s = 1.0 / Float::sqrt(after);
        for z in &mut w {
            *z *= s;
        }
        v = displace(&w, *d);
    }
    let total = norm_sqr(&v);
    let kept = norm_sqr(&v[..=n]);
    let state = PureState::single_mode(&v[..=n])?.normalized()?;
    let coherent = core::iter::once(beta0)
        .chain(deltas.iter().copied())
        .filter(|z| z.modulus() > 1e-14)
        .count();
    Ok(EngineeredState {
        state,
        roots,
        initial_coherent: beta0,
        displacements: deltas,
        adder_transmission: t,
        resources: ResourceCount {
            single_photon_sources: n,
            coherent_sources: coherent,
            beam_splitters: n + coherent,
            detectors: n,
        },
        condition,
        ill_conditioned: !(condition <= CONDITION_WARN),
        success_probability: prob,
        truncation_loss: ((total - kept) / total).max(0.0),
        working_cutoff: cut,
    })
}

/// [`engineer_state`] for Fock amplitudes `Σ c_k |k⟩`.
pub fn engineer_fock_state(amplitudes: &[C64]) -> Result<EngineeredState> {
    let d: Vec<C64> = amplitudes
        .iter()
        .enumerate()
        .map(|(k, c)| c / Float::sqrt(factorial(k as u32)))
        .collect();
    engineer_state(&d)
}

fn max_photons(basis: &FockBasis) -> u32 {
    basis
        .states()
        .iter()
        .map(|s| s.iter().sum::<u32>())
        .max()
        .unwrap_or(0)
}

/// `state ⊗ aux`, with the modes of `aux` appended.
pub(crate) fn tensor_append(state: &PureState, aux: &PureState) -> Result<PureState> {
    let sb = state.basis();
    let ab = aux.basis();
    let joint = FockBasis::max_total(sb.modes() + ab.modes(), max_photons(sb) + max_photons(ab))?;
    let mut amps = vec![ZERO; joint.dim()];
    let mut occ = Vec::with_capacity(joint.modes());
    for (s, a) in sb.states().iter().zip(state.amplitudes()) {
        if *a == ZERO {
            continue;
        }
        for (x, b) in ab.states().iter().zip(aux.amplitudes()) {
            occ.clear();
            occ.extend_from_slice(s);
            occ.extend_from_slice(x);
            let k = joint.index_of(&occ).ok_or(Error::PolicyMismatch)?;
            amps[k] += a * b;
        }
    }
    PureState::new(joint, amps)
}

/// Mixes `aux` (one mode, appended last) with `mode` of `state` and
/// heralds the auxiliary output in vacuum.
fn mix_and_herald_vacuum(
    state: &PureState,
    mode: usize,
    aux: &PureState,
    mixer: &BeamSplitterParams,
) -> Result<PureState> {
    let m = state.basis().modes();
    let joint = tensor_append(state, aux)?;
    let bs = BeamSplitterParams::new(mode, m, mixer.theta, mixer.phase_t, mixer.phase_r)?;
    let u = bs_matrix(&bs, m + 1)?;
    let out = apply_unitary(&u, &joint)?;
    project_modes(&out, &[m], &[0])
}

/// Result of [`apply_creation_polynomial`].
#[derive(Clone, Debug)]
pub struct CreationPolynomialAction {
    /// Heralded signal state, not renormalized.
    pub state: PureState,
    pub probability: f64,
    /// Signal transmission; the output carries `Λ₁₁^{n̂}`.
    pub lambda11: C64,
    /// Auxiliary-to-signal coefficient; `d_k` arrives as `d_k Λ₁₂^k`.
    pub lambda12: C64,
    pub engineered: EngineeredState,
}

/// Coefficients `c_k / Λ₁₂^k` that make the mixer realize `Σ c_k (a†)^k`
/// (still followed by `Λ₁₁^{n̂}` on the input).
pub fn compensated_coefficients(target: &[C64], lambda12: C64) -> Vec<C64> {
    target
        .iter()
        .enumerate()
        .map(|(k, c)| c / lambda12.powu(k as u32))
        .collect()
}

/// Acts with `Σ d_k Λ₁₂^k (a†)^k Λ₁₁^{n̂}` on a single-mode signal by
/// mixing it with the engineered state `Σ d_k (a†)^k|0⟩` (normalized) on
/// `mixer` (modes 0 = signal, 1 = auxiliary) and heralding vacuum.
pub fn apply_creation_polynomial(
    coeffs: &[C64],
    signal: &PureState,
    mixer: &BeamSplitterParams,
) -> Result<CreationPolynomialAction> {
    if signal.basis().modes() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            found: signal.basis().modes(),
        });
    }
    if (mixer.mode_a, mixer.mode_b) != (0, 1) {
        return Err(Error::InvalidParameter(
            "mixer must act on modes (0, 1)".into(),
        ));
    }
    let u = bs_matrix(mixer, 2)?;
    let engineered = engineer_state(coeffs)?;
    let out = mix_and_herald_vacuum(signal, 0, &engineered.state, mixer)?;
    let norm_in = signal.norm_sqr();
    let probability = out.norm_sqr() / norm_in;
    if !(probability >= 1e-12) {
        return Err(Error::Degenerate(alloc::format!(
            "vacuum heralding probability {probability:e}"
        )));
    }
    Ok(CreationPolynomialAction {
        state: out,
        probability,
        lambda11: u.entry(0, 0),
        lambda12: u.entry(0, 1),
        engineered,
    })
}

/// Smallest cutoff with `q^{cutoff+1} < 1e−12`.
pub fn tmsv_cutoff(q: f64) -> u32 {
    let mut c = 0u32;
    let mut tail = q;
    while tail >= 1e-12 && c < 10_000 {
        c += 1;
        tail *= q;
    }
    c
}

/// `√(1−q²) Σ_{n ≤ cutoff} qⁿ |n,n⟩`.
pub fn tmsv_state(q: f64, cutoff: u32) -> Result<PureState> {
    if !(0.0..1.0).contains(&q) {
        return Err(Error::InvalidParameter(alloc::format!(
            "q = {q} outside [0, 1)"
        )));
    }
    let tail = q.powi(cutoff as i32 + 1);
    if tail >= 1e-12 {
        return Err(Error::TailBound(alloc::format!(
            "q^(cutoff+1) = {tail:e} at cutoff {cutoff}"
        )));
    }
    let basis = FockBasis::per_mode(2, cutoff)?;
    let mut amps = vec![ZERO; basis.dim()];
    let norm = Float::sqrt(1.0 - q * q);
    for n in 0..=cutoff {
        let k = basis.index_of(&[n, n]).ok_or(Error::PolicyMismatch)?;
        amps[k] = C64::new(norm * q.powi(n as i32), 0.0);
    }
    PureState::new(basis, amps)
}

/// `(|0,0⟩ + λ|1,1⟩)/√(1 + |λ|²)`.
#[derive(Clone, Debug)]
pub struct BellLadderState {
    pub lambda: C64,
    pub state: PureState,
}

impl BellLadderState {
    pub fn new(lambda: C64) -> Result<Self> {
        Self::in_basis(lambda, FockBasis::per_mode(2, 1)?)
    }

    fn in_basis(lambda: C64, basis: alloc::sync::Arc<FockBasis>) -> Result<Self> {
        if !(lambda.re.is_finite() && lambda.im.is_finite()) {
            return Err(Error::InvalidParameter("non-finite lambda".into()));
        }
        let norm = 1.0 / Float::sqrt(1.0 + lambda.norm_sqr());
        let mut amps = vec![ZERO; basis.dim()];
        let i0 = basis.index_of(&[0, 0]).ok_or(Error::PolicyMismatch)?;
        let i1 = basis.index_of(&[1, 1]).ok_or(Error::PolicyMismatch)?;
        amps[i0] = C64::new(norm, 0.0);
        amps[i1] = lambda * norm;
        Ok(BellLadderState {
            lambda,
            state: PureState::new(basis, amps)?,
        })
    }
}

/// Result of [`procrustean_filter`].
#[derive(Clone, Debug)]
pub struct ProcrusteanFilter {
    /// The ideal state aimed at.
    pub target: BellLadderState,
    /// Filtered and renormalized state in the TMSV basis.
    pub realized: PureState,
    /// `√(1 − |⟨Φ(λ)|ψ⟩|²)`, the trace distance between the pure states.
    pub trace_distance: f64,
    pub success_probability: f64,
    pub beam_splitter: BeamSplitterParams,
}

/// Applies the single beam-splitter catalysis operator to mode 0 of a TMSV,
/// with the splitter chosen so that the `|1,1⟩ : |0,0⟩` ratio equals `λ`.
pub fn procrustean_filter(
    tmsv: &PureState,
    lambda_target: C64,
    q: f64,
) -> Result<ProcrusteanFilter> {
    let basis = tmsv.basis().clone();
    if basis.modes() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: basis.modes(),
        });
    }
    let big = lambda_target.modulus();
    if !big.is_finite() {
        return Err(Error::UnsolvableAngle("non-finite lambda".into()));
    }
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::UnsolvableAngle(alloc::format!(
            "q = {q} gives no one-photon layer"
        )));
    }
    // q(2x − 1)/T* = λ with x = |T|²; the branch x < 1/2 covers every |λ|.
    let l = big / q;
    let s = (Float::sqrt(l * l + 8.0) - l) / 4.0;
    let phase_t = if big > 0.0 {
        lambda_target.phase() - PI
    } else {
        0.0
    };
    let bs = BeamSplitterParams::new(0, 1, Float::acos(s.min(1.0)), phase_t, 0.0)?;
    let cutoff = basis.mode_cutoff();
    if cutoff < 1 {
        return Err(Error::CutoffTooSmall {
            cutoff,
            reason: "the filter needs the one-photon layer".into(),
        });
    }
    let u = bs_matrix(&bs, 2)?;
    let y = extract_conditional_operator(
        &u,
        &[0],
        &AncillaSpec(vec![1]),
        &DetectionSpec(vec![1]),
        cutoff,
    )?;
    let amps: Vec<C64> = basis
        .states()
        .iter()
        .zip(tmsv.amplitudes())
        .map(|(st, a)| a * y.diagonal(st[0]))
        .collect();
    let filtered = PureState::new(basis.clone(), amps)?;
    let success_probability = filtered.norm_sqr() / tmsv.norm_sqr();
    let realized = filtered.normalized()?;
    let target = BellLadderState::new(lambda_target)?;
    let ideal = BellLadderState::in_basis(lambda_target, basis)?;
    let f = ideal.state.inner(&realized)?.norm_sqr();
    Ok(ProcrusteanFilter {
        target,
        realized,
        trace_distance: Float::sqrt((1.0 - f).max(0.0)),
        success_probability,
        beam_splitter: bs,
    })
}

/// Pauli operator realized by [`pauli_xy_gate`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PauliAxis {
    X,
    Y,
}

fn pauli_couplings(u: &ModeUnitary) -> (C64, C64) {
    let m = u.matrix();
    // Λ₂₁ and per Λ(3|1) for signal mode 0 and auxiliary modes 1, 2
    (m[(1, 0)], m[(0, 1)] * m[(1, 2)] + m[(0, 2)] * m[(1, 1)])
}

/// `σ_x` or `σ_y` on a single-rail qubit: a filtered two-mode squeezed
/// vacuum feeds a three-mode network heralded on `|1,0⟩`, then KILL.
pub fn pauli_xy_gate(which: PauliAxis, q: f64, seed: u64) -> Result<(GateRecipe, GateReport)> {
    pauli_xy_gate_with(which, q, seed, PAULI_RESTARTS)
}

pub fn pauli_xy_gate_with(
    which: PauliAxis,
    q: f64,
    seed: u64,
    restarts: usize,
) -> Result<(GateRecipe, GateReport)> {
    if !(q > 0.0 && q <= 0.1) {
        return Err(Error::InvalidParameter(alloc::format!(
            "q = {q} outside (0, 0.1]"
        )));
    }
    let eval = |u: &ModeUnitary| -> Result<(f64, f64, C64)> {
        let (l, p) = pauli_couplings(u);
        let (a, b) = (l.norm_sqr(), p.norm_sqr());
        if a < 1e-12 || b < 1e-12 {
            return Ok((1.0, 0.0, ONE));
        }
        Ok((0.0, a * b / (a + b), ONE))
    };
    let best =
        optimize_with(3, seed, restarts, 1.0, &eval).map_err(|e| e.at_stage("network search"))?;
    let u = best.unitary()?;
    let (l, p) = pauli_couplings(&u);
    let sign = match which {
        PauliAxis::X => 1.0,
        PauliAxis::Y => -1.0,
    };
    let lambda = l / p * sign;

    let cutoff = tmsv_cutoff(q);
    let tm = tmsv_state(q, cutoff).map_err(|e| e.at_stage("squeezed source"))?;
    let filter =
        procrustean_filter(&tm, lambda, q).map_err(|e| e.at_stage("procrustean filter"))?;

    let mut block = CMatrix::zeros(2, 2);
    let mut leakage: f64 = 0.0;
    let mut heralded = [0.0; 2];
    for j in 0..2u32 {
        let sig = PureState::basis_state(FockBasis::per_mode(1, 1)?, &[j])?;
        let joint = tensor_append(&sig, &filter.realized)?;
        let out = apply_unitary(&u, &joint)?;
        let y = project_modes(&out, &[1, 2], &[1, 0])?;
        heralded[j as usize] = y.norm_sqr();
        let k = number_polynomial(&KILL, 0, y.basis().clone())?;
        let killed = k.apply(&y)?;
        for (st, a) in killed.basis().states().iter().zip(killed.amplitudes()) {
            if st[0] < 2 {
                block[(st[0] as usize, j as usize)] += a;
            } else {
                leakage += a.norm_sqr();
            }
        }
    }
    let i = C64::new(0.0, 1.0);
    let target = match which {
        PauliAxis::X => CMatrix::from_rows(&[vec![ZERO, ONE], vec![ONE, ZERO]])?,
        PauliAxis::Y => CMatrix::from_rows(&[vec![ZERO, -i], vec![i, ZERO]])?,
    };
    let extras = vec![
        ("lambda_re", lambda.re),
        ("lambda_im", lambda.im),
        ("q", q),
        ("tmsv_cutoff", f64::from(cutoff)),
        ("filter_distance", filter.trace_distance),
        ("filter_probability", filter.success_probability),
        ("reference_probability", heralded[0]),
        ("leakage", leakage),
        ("network_probability", best.success_probability),
    ];
    let rep = report(&block, target, extras)?;
    let name = match which {
        PauliAxis::X => "pauli-x",
        PauliAxis::Y => "pauli-y",
    };
    let recipe = GateRecipe {
        name: name.into(),
        network: best.params.to_network()?,
        signal_modes: vec![0],
        ancilla: AncillaSpec(vec![0, 0]),
        detection: DetectionSpec(vec![1, 0]),
        ancilla_state: Some(filter.realized),
        stages: stage_list(&[
            "two-mode squeezed vacuum",
            "procrustean filter on one arm",
            "three-mode network",
            "detect |1,0>",
            "KILL",
        ]),
    };
    Ok((recipe, rep))
}

fn stage_list(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

/// Source of the controlled-σ_z inside [`hadamard_gate_with`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CzComponent {
    /// The exact operator `1 − 2n̂₁n̂₂`, succeeding with probability one.
    Ideal,
    /// The closed-form vacuum-detector network.
    VacuumDetector,
    /// The optimized four-photon network.
    FourPhoton { restarts: usize },
}

fn cz_operator(cz: CzComponent, seed: u64) -> Result<Option<ConditionalOperator>> {
    let variant = match cz {
        CzComponent::Ideal => return Ok(None),
        CzComponent::VacuumDetector => (CphaseVariant::VacuumDetector, 1),
        CzComponent::FourPhoton { restarts } => (CphaseVariant::FourPhoton, restarts),
    };
    let (recipe, _) = cphase_gate_with(PI, variant.0, seed, variant.1)?;
    let u = compose(&recipe.network)?;
    Ok(Some(extract_conditional_operator(
        &u,
        &recipe.signal_modes,
        &recipe.ancilla,
        &recipe.detection,
        2,
    )?))
}

/// Hadamard gate moved onto an ancilla: prepare `(|0⟩ + |1⟩)/√2`, apply a
/// controlled-σ_z with the signal, act with `1 + a†` on the signal and
/// herald it in `|1⟩`. The output qubit lives on the former ancilla.
pub fn hadamard_gate(seed: u64) -> Result<(GateRecipe, GateReport)> {
    hadamard_gate_with(
        CzComponent::FourPhoton {
            restarts: HADAMARD_CZ_RESTARTS,
        },
        seed,
    )
}

pub fn hadamard_gate_with(cz: CzComponent, seed: u64) -> Result<(GateRecipe, GateReport)> {
    let anc = engineer_state(&[ONE, ONE]).map_err(|e| e.at_stage("ancilla preparation"))?;
    let czop = cz_operator(cz, seed).map_err(|e| e.at_stage("controlled phase"))?;
    let mixer = BeamSplitterParams::new(0, 1, PI / 4.0, 0.0, 0.0)?;
    let mu = bs_matrix(&mixer, 2)?;
    let (l11, l12) = (mu.entry(0, 0), mu.entry(0, 1));
    let d = compensated_coefficients(&[ONE, l11], l12);
    let poly = engineer_state(&d).map_err(|e| e.at_stage("polynomial source"))?;

    let mut block = CMatrix::zeros(2, 2);
    let mut p_cz = 0.0;
    let mut p_proj = 0.0;
    for j in 0..2u32 {
        let sig = PureState::basis_state(FockBasis::per_mode(1, 1)?, &[j])?;
        let joint = tensor_append(&sig, &anc.state)?;
        let after = match &czop {
            None => FockOperator::diagonal(joint.basis().clone(), |s| {
                C64::new(1.0 - 2.0 * f64::from(s[0] * s[1]), 0.0)
            })
            .apply(&joint)?,
            Some(y) => y
                .operator
                .apply(&joint.embed(y.operator.domain().clone(), 0.0)?)?,
        };
        let pc = after.norm_sqr();
        let mixed = mix_and_herald_vacuum(&after, 0, &poly.state, &mixer)
            .map_err(|e| e.at_stage("creation polynomial"))?;
        let out = project_modes(&mixed, &[0], &[1]).map_err(|e| e.at_stage("signal projection"))?;
        for (st, a) in out.basis().states().iter().zip(out.amplitudes()) {
            if st[0] < 2 {
                block[(st[0] as usize, j as usize)] += a;
            }
        }
        p_cz += pc / 2.0;
        p_proj += out.norm_sqr() / pc / 2.0;
    }
    let h = 1.0 / Float::sqrt(2.0);
    let target = CMatrix::from_real(2, 2, &[h, h, h, -h]);
    let rep = report(
        &block,
        target,
        vec![("cz_probability", p_cz), ("projection_probability", p_proj)],
    )?;
    let mut net = NetworkDescription::new(3);
    net.push_bs(0, 2, mixer.theta, mixer.phase_t, mixer.phase_r)?;
    let recipe = GateRecipe {
        name: "hadamard".into(),
        network: net,
        signal_modes: vec![0, 1],
        ancilla: AncillaSpec(vec![0]),
        detection: DetectionSpec(vec![0]),
        ancilla_state: Some(poly.state),
        stages: stage_list(&[
            "engineer (|0>+|1>)/sqrt2 on mode 1",
            "controlled sigma_z between modes 0 and 1",
            "mix mode 0 with the 1 + a^dagger source on mode 2, herald vacuum",
            "herald mode 0 in |1>",
        ]),
    };
    Ok((recipe, rep))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{apply_ladder, Ladder};

    #[test]
    fn stepped_displacement_matches_closed_form() {
        let delta = C64::new(0.7, -1.1);
        for j in 0..4usize {
            let mut e = vec![ZERO; 80];
            e[j] = ONE;
            let col = displace(&e, delta);
            for (i, z) in col.iter().enumerate().take(20) {
                let want = crate::fock::displacement_element(delta, i as u32, j as u32);
                assert!((z - want).modulus() < 1e-12);
            }
        }
        let coh = coherent_vector(C64::new(3.0, 1.0), 80);
        let disp = displace(&coherent_vector(ZERO, 80), C64::new(3.0, 1.0));
        for (a, b) in coh.iter().zip(&disp).take(50) {
            assert!((a - b).modulus() < 1e-12);
        }
    }

    #[test]
    fn kill_values() {
        let k = kill_operator(3).unwrap();
        let want = [1.0, 1.0, 0.0, -2.0];
        for (n, w) in want.iter().enumerate() {
            assert!((k.element(&[n as u32], &[n as u32]) - C64::new(*w, 0.0)).modulus() < 1e-15);
        }
        assert!(kill_operator(1).is_err());
    }

    #[test]
    fn adder_matches_extraction() {
        let bs = BeamSplitterParams::new(0, 1, 0.4, 0.3, 1.1).unwrap();
        let u = bs_matrix(&bs, 2).unwrap();
        let y = extract_conditional_operator(
            &u,
            &[0],
            &AncillaSpec(vec![1]),
            &DetectionSpec(vec![0]),
            4,
        )
        .unwrap();
        let a = photon_adder(bs.transmission(), bs.reflection(), 4).unwrap();
        for m in 0..=4u32 {
            for n in 0..=5u32 {
                assert!((y.element(&[n], &[m]) - a.element(&[n], &[m])).modulus() < 1e-12);
            }
        }
    }

    #[test]
    fn single_photon_and_superposition() {
        let e = engineer_state(&[ZERO, ONE]).unwrap();
        assert!((e.state.amplitude(&[1]).modulus() - 1.0).abs() < 1e-10);
        let h = 1.0 / Float::sqrt(2.0);
        let e = engineer_state(&[C64::new(h, 0.0), C64::new(h, 0.0)]).unwrap();
        let want = PureState::single_mode(&[C64::new(h, 0.0), C64::new(h, 0.0)]).unwrap();
        assert!(e.state.fidelity(&want).unwrap() > 1.0 - 1e-8);
        assert_eq!(e.resources.single_photon_sources, 1);
        assert!(e.resources.coherent_sources <= 2);
    }

    #[test]
    fn creation_polynomial_constant_is_filter() {
        let mixer = BeamSplitterParams::new(0, 1, 0.6, 0.2, 0.0).unwrap();
        let amps = [C64::new(0.6, 0.0), C64::new(0.0, 0.8)];
        let sig = PureState::single_mode(&amps).unwrap();
        let act = apply_creation_polynomial(&[ONE], &sig, &mixer).unwrap();
        for n in 0..2u32 {
            let want = amps[n as usize] * act.lambda11.powu(n);
            assert!((act.state.amplitude(&[n]) - want).modulus() < 1e-12);
        }
    }

    #[test]
    fn creation_on_vacuum() {
        let mixer = BeamSplitterParams::new(0, 1, PI / 4.0, 0.0, 0.0).unwrap();
        let vac = PureState::single_mode(&[ONE]).unwrap();
        let act = apply_creation_polynomial(&[ZERO, ONE], &vac, &mixer).unwrap();
        let one = apply_ladder(
            Ladder::Create,
            0,
            &PureState::single_mode(&[ONE, ZERO]).unwrap(),
        )
        .unwrap();
        let f = act
            .state
            .normalized()
            .unwrap()
            .embed(one.basis().clone(), 1e-12)
            .unwrap();
        assert!(f.fidelity(&one).unwrap() > 1.0 - 1e-12);
    }

    #[test]
    fn tmsv_norm() {
        let s = tmsv_state(0.1, 12).unwrap();
        assert!((s.norm_sqr() - 1.0).abs() < 1e-12);
        assert!(tmsv_state(0.5, 3).is_err());
        assert_eq!(tmsv_cutoff(0.01), 6);
    }

    #[test]
    fn filter_ratio_is_exact() {
        let q = 0.05;
        let tm = tmsv_state(q, tmsv_cutoff(q)).unwrap();
        let lam = C64::new(0.3, -0.7);
        let f = procrustean_filter(&tm, lam, q).unwrap();
        let r = f.realized.amplitude(&[1, 1]) / f.realized.amplitude(&[0, 0]);
        assert!((r - lam).modulus() < 1e-12);
        assert!((f.realized.norm_sqr() - 1.0).abs() < 1e-10);
    }
}
