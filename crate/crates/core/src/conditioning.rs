//! Post-selected operators of linear networks.
//!
//! The network acts on Fock states through permanents:
//! `⟨out|Û|in⟩ = per Λ[out, in] / √(∏ in! ∏ out!)`, where `Λ[out, in]`
//! repeats row `l` `out_l` times and column `j` `in_j` times. Feeding Fock
//! ancillas into some modes and projecting them onto a detection pattern
//! leaves a non-unitary [`ConditionalOperator`] on the remaining signal
//! modes.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::float::{factorial, ComplexExt, Float};
use crate::fock::{FockBasis, FockOperator, PureState, Truncation};
use crate::interferometer::{self, ModeUnitary};
use crate::linalg::{CMatrix, C64, ONE, ZERO};
use crate::permanent::{self, multiplicity_norm};
use crate::rng;

/// Photon numbers fed into the auxiliary modes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AncillaSpec(pub Vec<u32>);

/// Photon numbers the detectors on the auxiliary modes must report.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DetectionSpec(pub Vec<u32>);

impl AncillaSpec {
    pub fn photons(&self) -> u32 {
        self.0.iter().sum()
    }
}

impl DetectionSpec {
    pub fn photons(&self) -> u32 {
        self.0.iter().sum()
    }
}

/// Largest photon number handled by [`fock_lift_oracle`].
pub const ORACLE_MAX_PHOTONS: u32 = 10;

/// `⟨output|Û|input⟩` for the Fock lift of `u`; exactly zero when the
/// photon totals differ.
pub fn fock_lift_amplitude(u: &ModeUnitary, input: &[u32], output: &[u32]) -> Result<C64> {
    let n = u.dim();
    if input.len() != n || output.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: if input.len() != n {
                input.len()
            } else {
                output.len()
            },
        });
    }
    let tin: u32 = input.iter().sum();
    let tout: u32 = output.iter().sum();
    if tin != tout {
        return Ok(ZERO);
    }
    let per = permanent::repeated_index_permanent(u.matrix(), output, input)?;
    Ok(per / (multiplicity_norm(input) * multiplicity_norm(output)))
}

/// Output state of `u` on the Fock state `input`, by expanding
/// `∏_j (Σ_l Λ_{lj} a_l†)^{n_j}` monomial by monomial. Shares no code with
/// the permanent path.
pub fn fock_lift_oracle(u: &ModeUnitary, input: &[u32]) -> Result<PureState> {
    let n = u.dim();
    if input.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: input.len(),
        });
    }
    let photons: u32 = input.iter().sum();
    if photons > ORACLE_MAX_PHOTONS {
        return Err(Error::ExpansionTooLarge {
            photons,
            max: ORACLE_MAX_PHOTONS,
        });
    }
    // polynomial in the output creation operators: exponent vector -> coefficient
    let mut poly: BTreeMap<Vec<u32>, C64> = BTreeMap::new();
    poly.insert(vec![0; n], ONE);
    for (j, &count) in input.iter().enumerate() {
        for _ in 0..count {
            let mut next: BTreeMap<Vec<u32>, C64> = BTreeMap::new();
            for (mono, coef) in &poly {
                for l in 0..n {
                    let lam = u.entry(l, j);
                    if lam == ZERO {
                        continue;
                    }
                    let mut m = mono.clone();
                    m[l] += 1;
                    *next.entry(m).or_insert(ZERO) += coef * lam;
                }
            }
            poly = next;
        }
    }
    let in_norm: f64 = input.iter().map(|&k| factorial(k)).product();
    let basis = FockBasis::fixed_total(n, photons)?;
    let mut amps = vec![ZERO; basis.dim()];
    for (mono, coef) in poly {
        let out_norm: f64 = mono.iter().map(|&k| factorial(k)).product();
        let idx = basis
            .index_of(&mono)
            .ok_or_else(|| Error::InvalidParameter("monomial outside sector".into()))?;
        amps[idx] = coef * Float::sqrt(out_norm / in_norm);
    }
    PureState::new(basis, amps)
}

/// Matrix of the Fock lift of `u` on the `photons`-photon sector.
pub fn lift_sector(u: &ModeUnitary, photons: u32) -> Result<FockOperator> {
    let basis = FockBasis::fixed_total(u.dim(), photons)?;
    let d = basis.dim();
    let mut m = CMatrix::zeros(d, d);
    for j in 0..d {
        for i in 0..d {
            m[(i, j)] = fock_lift_amplitude(u, basis.state(j), basis.state(i))?;
        }
    }
    FockOperator::new(basis, m)
}

/// Applies the Fock lift of `u` to an arbitrary state. The result lives in
/// the `MaxTotal` basis bounded by the largest photon number present.
pub fn apply_unitary(u: &ModeUnitary, state: &PureState) -> Result<PureState> {
    let basis = state.basis();
    if basis.modes() != u.dim() {
        return Err(Error::DimensionMismatch {
            expected: u.dim(),
            found: basis.modes(),
        });
    }
    let top = basis
        .states()
        .iter()
        .zip(state.amplitudes())
        .filter(|(_, a)| **a != ZERO)
        .map(|(s, _)| s.iter().sum::<u32>())
        .max()
        .unwrap_or(0);
    let out_basis = FockBasis::max_total(u.dim(), top)?;
    let mut out = vec![ZERO; out_basis.dim()];
    let mut sectors: BTreeMap<u32, Vec<(usize, C64)>> = BTreeMap::new();
    for (s, a) in basis.states().iter().zip(state.amplitudes()) {
        if *a != ZERO {
            sectors
                .entry(s.iter().sum())
                .or_default()
                .push((basis.index_of(s).unwrap_or(0), *a));
        }
    }
    for (n, members) in sectors {
        let sector = FockBasis::fixed_total(u.dim(), n)?;
        for (idx, a) in members {
            let inp = basis.state(idx);
            for o in sector.states() {
                let amp = fock_lift_amplitude(u, inp, o)?;
                if amp != ZERO {
                    let k = out_basis.index_of(o).ok_or(Error::PolicyMismatch)?;
                    out[k] += a * amp;
                }
            }
        }
    }
    PureState::new(out_basis, out)
}

/// Projects `modes` of `state` onto the Fock outcome `outcome`, returning
/// the (sub-normalized) state of the other modes.
pub fn project_modes(state: &PureState, modes: &[usize], outcome: &[u32]) -> Result<PureState> {
    let basis = state.basis();
    if modes.len() != outcome.len() {
        return Err(Error::DimensionMismatch {
            expected: modes.len(),
            found: outcome.len(),
        });
    }
    for &m in modes {
        if m >= basis.modes() {
            return Err(Error::ModeOutOfRange {
                mode: m,
                modes: basis.modes(),
            });
        }
    }
    let rest: Vec<usize> = (0..basis.modes()).filter(|m| !modes.contains(m)).collect();
    if rest.is_empty() {
        return Err(Error::EmptyKeepSet);
    }
    let reduced = match basis.truncation() {
        Truncation::PerModeMax(c) => FockBasis::per_mode(rest.len(), c)?,
        Truncation::FixedTotal(n) | Truncation::MaxTotal(n) => FockBasis::max_total(rest.len(), n)?,
    };
    let mut out = vec![ZERO; reduced.dim()];
    for (s, a) in basis.states().iter().zip(state.amplitudes()) {
        if modes.iter().zip(outcome).all(|(&m, &k)| s[m] == k) {
            let r: Vec<u32> = rest.iter().map(|&m| s[m]).collect();
            let k = reduced.index_of(&r).ok_or(Error::PolicyMismatch)?;
            out[k] += a;
        }
    }
    PureState::new(reduced, out)
}

/// Non-unitary operator on the signal modes left by ancilla injection and
/// post-selection. It is kept exactly as projected, without renormalizing,
/// so that probabilities of independent stages multiply.
#[derive(Clone, Debug)]
pub struct ConditionalOperator {
    pub operator: FockOperator,
    pub unitary: ModeUnitary,
    pub signal_modes: Vec<usize>,
    pub aux_modes: Vec<usize>,
    pub ancilla: AncillaSpec,
    pub detection: DetectionSpec,
}

impl ConditionalOperator {
    pub fn matrix(&self) -> &CMatrix {
        self.operator.matrix()
    }

    /// Diagonal element on the single-signal-mode state `|n⟩`.
    pub fn diagonal(&self, n: u32) -> C64 {
        self.operator.element(&[n], &[n])
    }

    pub fn element(&self, out: &[u32], inp: &[u32]) -> C64 {
        self.operator.element(out, inp)
    }
}

fn validate_partition(n: usize, signal_modes: &[usize]) -> Result<Vec<usize>> {
    if signal_modes.is_empty() {
        return Err(Error::InvalidPartition("no signal modes".into()));
    }
    for (k, &m) in signal_modes.iter().enumerate() {
        if m >= n {
            return Err(Error::InvalidPartition(format!(
                "signal mode {m} outside a {n}-mode network"
            )));
        }
        if signal_modes[..k].contains(&m) {
            return Err(Error::InvalidPartition(format!("signal mode {m} repeated")));
        }
    }
    Ok((0..n).filter(|m| !signal_modes.contains(m)).collect())
}

/// `⟨out_s, det| Û |in_s, aux⟩` over signal inputs with at most
/// `signal_cutoff` photons. The output space is widened by the photon
/// surplus of ancilla over detection so that the matrix is exact.
pub fn extract_conditional_operator(
    u: &ModeUnitary,
    signal_modes: &[usize],
    aux: &AncillaSpec,
    det: &DetectionSpec,
    signal_cutoff: u32,
) -> Result<ConditionalOperator> {
    let n = u.dim();
    let aux_modes = validate_partition(n, signal_modes)?;
    if aux.0.len() != aux_modes.len() || det.0.len() != aux_modes.len() {
        return Err(Error::InvalidPartition(format!(
            "{} auxiliary modes but {} ancilla and {} detector entries",
            aux_modes.len(),
            aux.0.len(),
            det.0.len()
        )));
    }
    let gain = i64::from(aux.photons()) - i64::from(det.photons());
    if gain < 0 && i64::from(signal_cutoff) < -gain {
        return Err(Error::CutoffTooSmall {
            cutoff: signal_cutoff,
            reason: format!("detection removes {} photons from the signal", -gain),
        });
    }
    let ns = signal_modes.len();
    let domain = FockBasis::max_total(ns, signal_cutoff)?;
    let out_cut = (i64::from(signal_cutoff) + gain.max(0)) as u32;
    let codomain = FockBasis::max_total(ns, out_cut)?;
    let mut m = CMatrix::zeros(codomain.dim(), domain.dim());
    let mut full_in = vec![0u32; n];
    let mut full_out = vec![0u32; n];
    for (k, &a) in aux_modes.iter().enumerate() {
        full_in[a] = aux.0[k];
        full_out[a] = det.0[k];
    }
    for (j, sin) in domain.states().iter().enumerate() {
        let tin: u32 = sin.iter().sum();
        let tout = i64::from(tin) + gain;
        if tout < 0 {
            continue;
        }
        for (k, &s) in signal_modes.iter().enumerate() {
            full_in[s] = sin[k];
        }
        for (i, sout) in codomain.states().iter().enumerate() {
            if i64::from(sout.iter().sum::<u32>()) != tout {
                continue;
            }
            for (k, &s) in signal_modes.iter().enumerate() {
                full_out[s] = sout[k];
            }
            m[(i, j)] = fock_lift_amplitude(u, &full_in, &full_out)?;
        }
    }
    Ok(ConditionalOperator {
        operator: FockOperator::between(domain, codomain, m)?,
        unitary: u.clone(),
        signal_modes: signal_modes.to_vec(),
        aux_modes,
        ancilla: aux.clone(),
        detection: det.clone(),
    })
}

/// `‖Y|ψ⟩‖²` for a normalized signal state.
pub fn success_probability(y: &ConditionalOperator, input: &PureState) -> Result<f64> {
    let n = input.norm_sqr();
    if (n - 1.0).abs() > 1e-10 {
        return Err(Error::NotNormalized { norm_sqr: n });
    }
    let input = if input.basis() == y.operator.domain() {
        input.clone()
    } else {
        input.embed(y.operator.domain().clone(), 0.0)?
    };
    Ok(y.operator.apply(&input)?.norm_sqr())
}

/// Closed form of the single beam-splitter catalysis operator,
/// `Y(n) = T^{n−1}(|T|² − n|R|²)`.
pub fn catalysis_closed_form(t: C64, r: C64, n: u32) -> C64 {
    let base = t.norm_sqr() - f64::from(n) * r.norm_sqr();
    if n == 0 {
        // T^{-1}|T|² = T*
        return t.conj();
    }
    t.powu(n - 1) * base
}

/// Diagonal of the three-mode operator with ancilla and detection `|1,1⟩`
/// on `|0⟩, |1⟩, |2⟩`, in terms of permanents of `Λ` and its blocks.
pub fn su3_closed_form(u: &ModeUnitary) -> Result<[C64; 3]> {
    if u.dim() != 3 {
        return Err(Error::DimensionMismatch {
            expected: 3,
            found: u.dim(),
        });
    }
    let m = u.matrix();
    let l = |i: usize, j: usize| m[(i, j)];
    let p11 = permanent::subpermanent(m, &[0], &[0])?;
    let p = permanent::permanent_ryser(m)?;
    let y2 =
        l(0, 0) * p * 2.0 - l(0, 0) * l(0, 0) * p11 + l(0, 1) * l(1, 0) * l(0, 2) * l(2, 0) * 2.0;
    Ok([p11, p, y2])
}

/// Which closed form [`verify_proposition`] checks.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Proposition {
    /// Single photons in, vacuum detected: `∏Λ₁ᵢ (a†)^N Λ₁₁^{n̂}`.
    Creation,
    /// Vacuum in, single photons detected: `∏Λᵢ₁ Λ₁₁^{n̂} a^N`.
    Annihilation,
    /// Single photons in and detected: `Λ₁₁^{n̂−N} P_N(n̂)`.
    NumberPolynomial,
}

impl Proposition {
    pub fn from_index(k: u32) -> Result<Self> {
        match k {
            1 => Ok(Proposition::Creation),
            2 => Ok(Proposition::Annihilation),
            3 => Ok(Proposition::NumberPolynomial),
            _ => Err(Error::InvalidParameter(format!("no proposition {k}"))),
        }
    }

    pub fn index(self) -> u32 {
        match self {
            Proposition::Creation => 1,
            Proposition::Annihilation => 2,
            Proposition::NumberPolynomial => 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PropositionReport {
    pub proposition: Proposition,
    pub n_aux: usize,
    pub seed: u64,
    /// Number of draws rejected for a nearly vanishing `Λ₁₁`.
    pub reseeds: u64,
    pub cutoff: u32,
    /// Largest deviation relative to the largest analytic entry.
    pub max_deviation: f64,
    pub note: String,
}

/// Smallest `|Λ₁₁|` accepted before redrawing the unitary.
pub const DEGENERATE_L11: f64 = 1e-3;

/// Compares the extracted operator of a seeded random `(N+1)`-mode network
/// (signal mode first) with the closed form of the chosen proposition.
pub fn verify_proposition(
    which: Proposition,
    n_aux: usize,
    seed: u64,
    cutoff: u32,
) -> Result<PropositionReport> {
    if !(1..=4).contains(&n_aux) {
        return Err(Error::InvalidParameter(format!(
            "n_aux = {n_aux} outside 1..=4"
        )));
    }
    let nn = n_aux as u32;
    let min_cut = match which {
        Proposition::Creation => 0,
        Proposition::Annihilation => nn,
        Proposition::NumberPolynomial => nn + 1,
    };
    if cutoff < min_cut {
        return Err(Error::CutoffTooSmall {
            cutoff,
            reason: format!("needs at least {min_cut} signal photons"),
        });
    }
    let mut reseeds = 0u64;
    let u = loop {
        let mut r = rng::stream_rng(seed, reseeds);
        let u = interferometer::random_unitary_with(n_aux + 1, &mut r)?;
        if u.entry(0, 0).modulus() >= DEGENERATE_L11 {
            break u;
        }
        reseeds += 1;
        if reseeds > 1000 {
            return Err(Error::Degenerate(
                "no usable draw after 1000 attempts".into(),
            ));
        }
    };
    let l00 = u.entry(0, 0);
    let row: C64 = (1..=n_aux).map(|i| u.entry(0, i)).product();
    let col: C64 = (1..=n_aux).map(|i| u.entry(i, 0)).product();
    let ones = vec![1u32; n_aux];
    let zeros = vec![0u32; n_aux];
    let (aux, det) = match which {
        Proposition::Creation => (ones.clone(), zeros.clone()),
        Proposition::Annihilation => (zeros.clone(), ones.clone()),
        Proposition::NumberPolynomial => (ones.clone(), ones.clone()),
    };
    let y = extract_conditional_operator(&u, &[0], &AncillaSpec(aux), &DetectionSpec(det), cutoff)?;
    let ym = y.matrix();
    let dom = y.operator.domain().clone();
    let cod = y.operator.codomain().clone();

    let (max_deviation, note) = match which {
        Proposition::Creation | Proposition::Annihilation => {
            let mut expected = CMatrix::zeros(cod.dim(), dom.dim());
            for n in 0..=cutoff {
                let j = dom.index_of(&[n]).ok_or(Error::PolicyMismatch)?;
                let entry = match which {
                    Proposition::Creation => {
                        let i = cod.index_of(&[n + nn]).ok_or(Error::PolicyMismatch)?;
                        let f = Float::sqrt(factorial(n + nn) / factorial(n));
                        Some((i, row * l00.powu(n) * f))
                    }
                    _ if n >= nn => {
                        let i = cod.index_of(&[n - nn]).ok_or(Error::PolicyMismatch)?;
                        let f = Float::sqrt(factorial(n) / factorial(n - nn));
                        Some((i, col * l00.powu(n - nn) * f))
                    }
                    _ => None,
                };
                if let Some((i, v)) = entry {
                    expected[(i, j)] = v;
                }
            }
            let scale = expected.max_abs().max(f64::MIN_POSITIVE);
            (ym.sub(&expected).max_abs() / scale, String::new())
        }
        Proposition::NumberPolynomial => {
            // strip Λ₁₁^{n−N}, fit a degree-N polynomial on 0..=N, test the rest
            let mut off_diag: f64 = 0.0;
            for i in 0..ym.rows() {
                for j in 0..ym.cols() {
                    if i != j {
                        off_diag = off_diag.max(ym[(i, j)].modulus());
                    }
                }
            }
            let q: Vec<C64> = (0..=cutoff)
                .map(|n| {
                    let k = dom.index_of(&[n]).unwrap_or(0);
                    ym[(k, k)] * l00.powi(nn as i32 - n as i32)
                })
                .collect();
            let coeffs = interpolate(&q[..=n_aux]);
            let scale = q
                .iter()
                .fold(0.0f64, |m, z| m.max(z.modulus()))
                .max(f64::MIN_POSITIVE);
            let mut dev = off_diag / scale;
            for (n, qn) in q.iter().enumerate().skip(n_aux + 1) {
                let p = crate::fock::eval_poly(&coeffs, C64::new(n as f64, 0.0));
                dev = dev.max((p - qn).modulus() / scale);
            }
            let lead = coeffs[n_aux];
            let want = row * col;
            let lead_dev = (lead - want).modulus() / want.modulus().max(f64::MIN_POSITIVE);
            dev = dev.max(lead_dev);
            (dev, format!("leading coefficient {lead} vs {want}"))
        }
    };
    Ok(PropositionReport {
        proposition: which,
        n_aux,
        seed,
        reseeds,
        cutoff,
        max_deviation,
        note,
    })
}

/// Monomial coefficients of the polynomial through `(k, values[k])`.
fn interpolate(values: &[C64]) -> Vec<C64> {
    // Newton divided differences on nodes 0, 1, …, then expand
    let n = values.len();
    let mut dd = values.to_vec();
    for level in 1..n {
        for i in (level..n).rev() {
            dd[i] = (dd[i] - dd[i - 1]) / (level as f64);
        }
    }
    let mut coeffs = vec![ZERO; n];
    // Horner in Newton form: p = dd[n-1]; p = p*(x - k) + dd[k]
    for k in (0..n).rev() {
        // coeffs <- coeffs * (x - k) + dd[k]
        let mut next = vec![ZERO; n];
        for (p, c) in coeffs.iter().enumerate() {
            if *c == ZERO {
                continue;
            }
            if p + 1 < n {
                next[p + 1] += c;
            }
            next[p] -= c * (k as f64);
        }
        next[0] += dd[k];
        coeffs = next;
    }
    coeffs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::float::PI;
    use crate::interferometer::{bs_matrix, random_unitary, BeamSplitterParams};

    fn bs(theta: f64, pt: f64, pr: f64) -> ModeUnitary {
        bs_matrix(&BeamSplitterParams::new(0, 1, theta, pt, pr).unwrap(), 2).unwrap()
    }

    #[test]
    fn identity_lift() {
        let id = ModeUnitary::identity(3);
        assert!(
            (fock_lift_amplitude(&id, &[1, 0, 2], &[1, 0, 2]).unwrap() - ONE).modulus() < 1e-14
        );
        assert!(
            fock_lift_amplitude(&id, &[1, 0, 2], &[0, 1, 2])
                .unwrap()
                .modulus()
                < 1e-14
        );
        let s = fock_lift_oracle(&id, &[2, 1, 0]).unwrap();
        assert_eq!(s.amplitude(&[2, 1, 0]), ONE);
    }

    #[test]
    fn hong_ou_mandel_dip() {
        let u = bs(PI / 4.0, 0.0, 0.0);
        assert!(fock_lift_amplitude(&u, &[1, 1], &[1, 1]).unwrap().modulus() < 1e-15);
    }

    #[test]
    fn single_photon_on_beam_splitter() {
        let u = bs(0.4, 0.3, -0.2);
        let t = u.entry(0, 0);
        let r = u.entry(0, 1);
        let s = fock_lift_oracle(&u, &[1, 0]).unwrap();
        assert!((s.amplitude(&[1, 0]) - t).modulus() < 1e-15);
        assert!((s.amplitude(&[0, 1]) + r.conj()).modulus() < 1e-15);
    }

    #[test]
    fn photon_number_superselection() {
        let u = random_unitary(3, 1).unwrap();
        assert_eq!(
            fock_lift_amplitude(&u, &[1, 1, 0], &[1, 0, 0]).unwrap(),
            ZERO
        );
    }

    #[test]
    fn lift_columns_have_unit_norm() {
        let u = random_unitary(3, 8).unwrap();
        let l = lift_sector(&u, 3).unwrap();
        assert!(l.matrix().unitarity_defect() < 1e-10);
    }

    #[test]
    fn catalysis_at_half_transmission() {
        let u = bs(PI / 4.0, 0.0, 0.0);
        let y = extract_conditional_operator(
            &u,
            &[0],
            &AncillaSpec(vec![1]),
            &DetectionSpec(vec![1]),
            2,
        )
        .unwrap();
        let s = 1.0 / 2f64.sqrt();
        assert!((y.diagonal(0).re - s).abs() < 1e-14);
        assert!(y.diagonal(1).modulus() < 1e-15);
        assert!((y.diagonal(2).re + s / 2.0).abs() < 1e-14);
    }

    #[test]
    fn creation_and_annihilation_at_one_photon() {
        let u = bs(0.7, 0.2, 1.1);
        let (l11, l12, l21) = (u.entry(0, 0), u.entry(0, 1), u.entry(1, 0));
        let y = extract_conditional_operator(
            &u,
            &[0],
            &AncillaSpec(vec![1]),
            &DetectionSpec(vec![0]),
            3,
        )
        .unwrap();
        for n in 0..=3u32 {
            let want = l12 * l11.powu(n) * f64::from(n + 1).sqrt();
            assert!((y.element(&[n + 1], &[n]) - want).modulus() < 1e-14);
        }
        let y2 = extract_conditional_operator(
            &u,
            &[0],
            &AncillaSpec(vec![0]),
            &DetectionSpec(vec![1]),
            3,
        )
        .unwrap();
        for n in 1..=3u32 {
            let want = l21 * l11.powu(n - 1) * f64::from(n).sqrt();
            assert!((y2.element(&[n - 1], &[n]) - want).modulus() < 1e-14);
        }
    }

    #[test]
    fn propositions_small() {
        for which in [
            Proposition::Creation,
            Proposition::Annihilation,
            Proposition::NumberPolynomial,
        ] {
            let r = verify_proposition(which, 2, 5, 5).unwrap();
            assert!(r.max_deviation < 1e-9, "{which:?}: {}", r.max_deviation);
        }
    }

    #[test]
    fn interpolation_recovers_cubic() {
        let p = [
            C64::new(1.0, 0.5),
            C64::new(-2.0, 0.0),
            C64::new(0.0, 3.0),
            C64::new(0.5, 0.0),
        ];
        let vals: Vec<C64> = (0..4)
            .map(|k| crate::fock::eval_poly(&p, C64::new(k as f64, 0.0)))
            .collect();
        let c = interpolate(&vals);
        for (a, b) in c.iter().zip(&p) {
            assert!((a - b).modulus() < 1e-12);
        }
    }

    #[test]
    fn success_requires_normalized_input() {
        let u = bs(0.3, 0.0, 0.0);
        let y = extract_conditional_operator(
            &u,
            &[0],
            &AncillaSpec(vec![1]),
            &DetectionSpec(vec![1]),
            2,
        )
        .unwrap();
        let half = PureState::single_mode(&[C64::new(0.5, 0.0), ZERO, ZERO]).unwrap();
        assert!(matches!(
            success_probability(&y, &half),
            Err(Error::NotNormalized { .. })
        ));
    }
}
