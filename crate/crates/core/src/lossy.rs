//! Absorbing beam splitters and inefficient photon counters.
//!
//! An absorbing two-port is described by its transmission matrix `T` and
//! absorption matrix `A` with `T T† + A A† = I`. Together they are the top
//! block row of a unitary on two field and two device modes; the field
//! channel follows by injecting the device in vacuum and tracing it out.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::conditioning::{apply_unitary, fock_lift_amplitude};
use crate::error::{Error, Result};
use crate::float::{binomial, ComplexExt, Float};
use crate::fock::{FockBasis, FockOperator, MixedState, PureState, Truncation};
use crate::interferometer::ModeUnitary;
use crate::linalg::{complete_unitary, inverse, psd_sqrt, CMatrix, C64, ONE, ZERO};

/// Tolerance of the closure `T T† + A A† = I`.
pub const CLOSURE_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct LossyBSParams {
    t_matrix: CMatrix,
    a_matrix: CMatrix,
}

fn check_2x2(m: &CMatrix) -> Result<()> {
    if m.rows() != 2 || m.cols() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 4,
            found: m.rows() * m.cols(),
        });
    }
    Ok(())
}

impl LossyBSParams {
    pub fn new(t_matrix: CMatrix, a_matrix: CMatrix) -> Result<Self> {
        check_2x2(&t_matrix)?;
        check_2x2(&a_matrix)?;
        let p = LossyBSParams { t_matrix, a_matrix };
        let deviation = p.closure_defect();
        if !(deviation <= CLOSURE_TOL) {
            return Err(Error::ClosureViolated { deviation });
        }
        Ok(p)
    }

    /// Lossless element with unitary transmission matrix `t`.
    pub fn lossless(t: CMatrix) -> Result<Self> {
        Self::new(t, CMatrix::zeros(2, 2))
    }

    /// Reciprocal single-slab element: `T₁₁ = T₂₂ = t` real,
    /// `T₁₂ = T₂₁ = i√(1 − t² − |A|²)` and `A = |A|·I`.
    pub fn symmetric_slab(t: f64, abs_a: f64) -> Result<Self> {
        let r2 = 1.0 - t * t - abs_a * abs_a;
        if !(abs_a >= 0.0) || r2 < -CLOSURE_TOL {
            return Err(Error::InvalidParameter(format!(
                "t = {t} and |A| = {abs_a} leave no room for reflection"
            )));
        }
        let r = C64::new(0.0, Float::sqrt(r2.max(0.0)));
        let tc = C64::new(t, 0.0);
        let t_matrix = CMatrix::from_fn(2, 2, |i, j| if i == j { tc } else { r });
        let a_matrix = CMatrix::identity(2).scale(C64::new(abs_a, 0.0));
        Self::new(t_matrix, a_matrix)
    }

    pub fn t_matrix(&self) -> &CMatrix {
        &self.t_matrix
    }

    pub fn a_matrix(&self) -> &CMatrix {
        &self.a_matrix
    }

    pub fn closure_defect(&self) -> f64 {
        let t = &self.t_matrix;
        let a = &self.a_matrix;
        (&(t * &t.adjoint()) + &(a * &a.adjoint()))
            .sub(&CMatrix::identity(2))
            .max_abs()
    }

    /// `C = √(T T†)`.
    pub fn c_matrix(&self) -> Result<CMatrix> {
        psd_sqrt(&(&self.t_matrix * &self.t_matrix.adjoint()))
    }

    /// `S = √(A A†)`.
    pub fn s_matrix(&self) -> Result<CMatrix> {
        psd_sqrt(&(&self.a_matrix * &self.a_matrix.adjoint()))
    }

    /// `M = S C⁻¹ T`, the field-to-device coupling of the Kraus operators.
    pub fn m_matrix(&self) -> Result<CMatrix> {
        let c = self.c_matrix()?;
        let ci = inverse(&c).map_err(|_| Error::SingularCompletion)?;
        Ok(&(&self.s_matrix()? * &ci) * &self.t_matrix)
    }

    /// Four-mode unitary (field modes 0, 1; device modes 2, 3) whose top
    /// block row is `[T A]`.
    pub fn dilation(&self) -> Result<ModeUnitary> {
        let top = CMatrix::from_fn(2, 4, |i, j| {
            if j < 2 {
                self.t_matrix[(i, j)]
            } else {
                self.a_matrix[(i, j - 2)]
            }
        });
        ModeUnitary::new(complete_unitary(&top)?)
    }
}

/// Completely positive map `ρ ↦ Σ_d K_d ρ K_d†` on a truncated field space,
/// with one Kraus operator per device occupation pattern.
#[derive(Clone, Debug)]
pub struct ChannelOperator {
    basis: Arc<FockBasis>,
    dilation: ModeUnitary,
    kraus: Vec<(Vec<u32>, CMatrix)>,
}

impl ChannelOperator {
    /// Builds the channel of `dilation` on its first `field_modes` modes,
    /// with the remaining modes starting in vacuum, on the field space of at
    /// most `cutoff` photons.
    pub fn from_dilation(dilation: ModeUnitary, field_modes: usize, cutoff: u32) -> Result<Self> {
        let total = dilation.dim();
        if field_modes == 0 || field_modes >= total {
            return Err(Error::InvalidPartition(format!(
                "{field_modes} field modes in a {total}-mode dilation"
            )));
        }
        let basis = FockBasis::max_total(field_modes, cutoff)?;
        let device = FockBasis::max_total(total - field_modes, cutoff)?;
        let d = basis.dim();
        let mut kraus = Vec::with_capacity(device.dim());
        let mut inp = vec![0u32; total];
        let mut out = vec![0u32; total];
        for pattern in device.states() {
            let lost: u32 = pattern.iter().sum();
            out[field_modes..].copy_from_slice(pattern);
            let mut k = CMatrix::zeros(d, d);
            for (j, sin) in basis.states().iter().enumerate() {
                let tin: u32 = sin.iter().sum();
                if tin < lost {
                    continue;
                }
                inp[..field_modes].copy_from_slice(sin);
                for (i, sout) in basis.states().iter().enumerate() {
                    if sout.iter().sum::<u32>() + lost != tin {
                        continue;
                    }
                    out[..field_modes].copy_from_slice(sout);
                    k[(i, j)] = fock_lift_amplitude(&dilation, &inp, &out)?;
                }
            }
            kraus.push((pattern.clone(), k));
        }
        Ok(ChannelOperator {
            basis,
            dilation,
            kraus,
        })
    }

    pub fn basis(&self) -> &Arc<FockBasis> {
        &self.basis
    }

    pub fn dilation(&self) -> &ModeUnitary {
        &self.dilation
    }

    /// Kraus operators labelled by the device occupation they leave behind.
    pub fn kraus(&self) -> &[(Vec<u32>, CMatrix)] {
        &self.kraus
    }

    /// `max |Σ K† K − I|`.
    pub fn trace_defect(&self) -> f64 {
        let d = self.basis.dim();
        let mut sum = CMatrix::zeros(d, d);
        for (_, k) in &self.kraus {
            sum = sum.add(&(&k.adjoint() * k));
        }
        sum.sub(&CMatrix::identity(d)).max_abs()
    }

    pub fn apply(&self, rho: &MixedState) -> Result<MixedState> {
        let rho = self.embed(rho)?;
        let d = self.basis.dim();
        let mut out = CMatrix::zeros(d, d);
        for (_, k) in &self.kraus {
            out = out.add(&(&(k * &rho) * &k.adjoint()));
        }
        MixedState::new(self.basis.clone(), out)
    }

    fn embed(&self, rho: &MixedState) -> Result<CMatrix> {
        if rho.basis().as_ref() == self.basis.as_ref() {
            return Ok(rho.matrix().clone());
        }
        let src = rho.basis();
        if src.modes() != self.basis.modes() {
            return Err(Error::DimensionMismatch {
                expected: self.basis.modes(),
                found: src.modes(),
            });
        }
        let map = src
            .states()
            .iter()
            .map(|s| self.basis.index_of(s).ok_or(Error::PolicyMismatch))
            .collect::<Result<Vec<_>>>()?;
        let d = self.basis.dim();
        let mut m = CMatrix::zeros(d, d);
        for (i, &a) in map.iter().enumerate() {
            for (j, &b) in map.iter().enumerate() {
                m[(a, b)] = rho.matrix()[(i, j)];
            }
        }
        Ok(m)
    }
}

/// Channel of an absorbing beam splitter on two field modes holding at
/// most `cutoff` photons.
pub fn lossy_bs_channel(params: &LossyBSParams, cutoff: u32) -> Result<ChannelOperator> {
    ChannelOperator::from_dilation(params.dilation()?, 2, cutoff)
}

/// Channel of an absorbing beam splitter acting on `(mode_a, mode_b)` of a
/// `modes`-mode field.
pub fn lossy_bs_channel_on(
    params: &LossyBSParams,
    mode_a: usize,
    mode_b: usize,
    modes: usize,
    cutoff: u32,
) -> Result<ChannelOperator> {
    if mode_a == mode_b {
        return Err(Error::InvalidParameter(
            "beam splitter needs two distinct modes".into(),
        ));
    }
    let u = params
        .dilation()?
        .embed(&[mode_a, mode_b, modes, modes + 1], modes + 2)?;
    ChannelOperator::from_dilation(u, modes, cutoff)
}

/// Photon counter of efficiency `eta` on a mode truncated at `cutoff`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DetectorModel {
    pub eta: f64,
    pub cutoff: u32,
}

impl DetectorModel {
    pub fn new(eta: f64, cutoff: u32) -> Result<Self> {
        if !(0.0..=1.0).contains(&eta) {
            return Err(Error::InvalidParameter(format!(
                "efficiency {eta} outside [0, 1]"
            )));
        }
        Ok(DetectorModel { eta, cutoff })
    }

    pub fn perfect(cutoff: u32) -> Self {
        DetectorModel { eta: 1.0, cutoff }
    }

    /// Probability of reading `n` when `k` photons arrive.
    pub fn weight(&self, k: u32, n: u32) -> f64 {
        povm_weight(k, n, self.eta)
    }
}

/// `C(k, n) ηⁿ (1 − η)^{k−n}`.
pub fn povm_weight(k: u32, n: u32, eta: f64) -> f64 {
    if n > k {
        return 0.0;
    }
    if eta == 1.0 {
        return if k == n { 1.0 } else { 0.0 };
    }
    binomial(k, n) * Float::powi(eta, n as i32) * Float::powi(1.0 - eta, (k - n) as i32)
}

/// POVM element for reading `n` photons, on the single-mode space
/// `|0⟩ … |cutoff⟩`.
pub fn povm_element(n: u32, detector: &DetectorModel) -> Result<FockOperator> {
    if n > detector.cutoff {
        return Err(Error::CutoffTooSmall {
            cutoff: detector.cutoff,
            reason: format!("reading {n} photons"),
        });
    }
    let basis = FockBasis::per_mode(1, detector.cutoff)?;
    Ok(FockOperator::diagonal(basis, |s| {
        C64::new(detector.weight(s[0], n), 0.0)
    }))
}

/// Unnormalized state of the other modes after `mode` reads `n` photons on
/// an inefficient counter: `Tr_mode[Π(n) ρ]`.
pub fn condition_on_count(rho: &MixedState, mode: usize, n: u32, eta: f64) -> Result<MixedState> {
    let basis = rho.basis();
    if mode >= basis.modes() {
        return Err(Error::ModeOutOfRange {
            mode,
            modes: basis.modes(),
        });
    }
    if basis.modes() == 1 {
        return Err(Error::EmptyKeepSet);
    }
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::InvalidParameter(format!(
            "efficiency {eta} outside [0, 1]"
        )));
    }
    let reduced = match basis.truncation() {
        Truncation::PerModeMax(c) => FockBasis::per_mode(basis.modes() - 1, c)?,
        Truncation::FixedTotal(t) | Truncation::MaxTotal(t) => {
            FockBasis::max_total(basis.modes() - 1, t)?
        }
    };
    let mut rest_idx = Vec::with_capacity(basis.dim());
    for s in basis.states() {
        let r: Vec<u32> = s
            .iter()
            .enumerate()
            .filter(|&(m, _)| m != mode)
            .map(|(_, &k)| k)
            .collect();
        rest_idx.push(reduced.index_of(&r).ok_or(Error::PolicyMismatch)?);
    }
    let d = reduced.dim();
    let mut out = CMatrix::zeros(d, d);
    let m = rho.matrix();
    for (i, si) in basis.states().iter().enumerate() {
        let w = povm_weight(si[mode], n, eta);
        if w == 0.0 {
            continue;
        }
        for (j, sj) in basis.states().iter().enumerate() {
            if sj[mode] == si[mode] {
                out[(rest_idx[i], rest_idx[j])] += m[(i, j)] * w;
            }
        }
    }
    MixedState::new(reduced, out)
}

/// Transmission of the reciprocal slab used for the lossy σ_z attempt,
/// `(√(3 − 2|A|²) − 1)/2`.
pub fn choose_t_for_sigma_z(abs_a: f64) -> f64 {
    (Float::sqrt(3.0 - 2.0 * abs_a * abs_a) - 1.0) / 2.0
}

/// Positive root of `T² + R² = −T` for the reciprocal slab with
/// `R = i√(1 − T² − |A|²)`: `(√(9 − 8|A|²) − 1)/4`.
pub fn sigma_z_transmission_exact(abs_a: f64) -> f64 {
    (Float::sqrt(9.0 - 8.0 * abs_a * abs_a) - 1.0) / 4.0
}

/// Closed-form coefficients of the three output terms of the lossy σ_z
/// attempt at transmission [`choose_t_for_sigma_z`]: the σ_z term, the
/// detector term per `η(1 − η)|c₁|²` and the absorption term per `η|c₁|²`.
pub fn sigma_z_closed_forms(abs_a: f64) -> [f64; 3] {
    let a2 = abs_a * abs_a;
    let s = Float::sqrt(3.0 - 2.0 * a2);
    [2.0 - a2 - s, a2 * a2 - 3.0 + 2.0 * s, a2 * (1.0 - a2)]
}

#[derive(Clone, Debug)]
pub struct NoisySigmaZReport {
    pub params: LossyBSParams,
    pub transmission: f64,
    pub reflection: C64,
    pub eta: f64,
    /// Unnormalized signal state after reading one photon.
    pub density: MixedState,
    /// The same state rebuilt from the device and detector resolved
    /// contributions below.
    pub wanted: CMatrix,
    pub detector: CMatrix,
    pub absorption: CMatrix,
    /// `c₀T₂₂|0⟩ + c₁(T₁₁T₂₂ + T₁₂T₂₁)|1⟩`.
    pub wanted_state: [C64; 2],
    /// `|T₂₂|²`.
    pub success_probability: f64,
    /// `|T₁₁T₂₂ + T₁₂T₂₁ + T₂₂|`.
    pub sigma_z_defect: f64,
    /// Vacuum weight from undercounted two-photon events per `η(1 − η)|c₁|²`.
    pub detector_coefficient: f64,
    /// Vacuum weight from absorbed photons per `η|c₁|²`.
    pub absorption_coefficient: f64,
    pub closed_forms: [f64; 3],
    /// `max |wanted + detector + absorption − density|`.
    pub decomposition_defect: f64,
}

impl NoisySigmaZReport {
    /// `[|T₂₂|², detector coefficient, absorption coefficient]`.
    pub fn coefficients(&self) -> [f64; 3] {
        [
            self.success_probability,
            self.detector_coefficient,
            self.absorption_coefficient,
        ]
    }

    /// `η|T₂₂|² σ_z|ψ⟩⟨ψ|σ_z` against the wanted term.
    pub fn sigma_z_deviation(&self, c0: C64, c1: C64) -> f64 {
        let v = [c0, -c1];
        let w = self.eta * self.success_probability;
        CMatrix::from_fn(2, 2, |i, j| v[i] * v[j].conj() * w)
            .sub(&self.wanted)
            .max_abs()
    }
}

/// Signal mode 0 mixed with a single photon in mode 1 on an absorbing slab
/// of absorption `abs_a`, with mode 1 read by a counter of efficiency `eta`
/// reporting one photon. Uses [`choose_t_for_sigma_z`].
pub fn noisy_sigma_z_experiment(
    abs_a: f64,
    eta: f64,
    c0: C64,
    c1: C64,
) -> Result<NoisySigmaZReport> {
    noisy_sigma_z_experiment_with_t(abs_a, eta, c0, c1, choose_t_for_sigma_z(abs_a))
}

pub fn noisy_sigma_z_experiment_with_t(
    abs_a: f64,
    eta: f64,
    c0: C64,
    c1: C64,
    t: f64,
) -> Result<NoisySigmaZReport> {
    if !(0.0..1.0).contains(&abs_a) {
        return Err(Error::InvalidParameter(format!(
            "|A| = {abs_a} outside [0, 1)"
        )));
    }
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "efficiency {eta} outside (0, 1]"
        )));
    }
    let norm = c0.norm_sqr() + c1.norm_sqr();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::NotNormalized { norm_sqr: norm });
    }
    let params = LossyBSParams::symmetric_slab(t, abs_a)?;
    let tm = params.t_matrix().clone();
    let wanted_state = [
        c0 * tm[(1, 1)],
        c1 * (tm[(0, 0)] * tm[(1, 1)] + tm[(0, 1)] * tm[(1, 0)]),
    ];

    // channel route: field density, then the detector POVM
    let field = FockBasis::max_total(2, 2)?;
    let mut amps = vec![ZERO; field.dim()];
    amps[field.index_of(&[0, 1]).ok_or(Error::PolicyMismatch)?] = c0;
    amps[field.index_of(&[1, 1]).ok_or(Error::PolicyMismatch)?] = c1;
    let rho_in = PureState::new(field, amps)?.to_mixed();
    let channel = lossy_bs_channel(&params, 2)?;
    let density = condition_on_count(&channel.apply(&rho_in)?, 1, 1, eta)?;

    // dilation route, resolved by device occupation and photons arriving
    let u = params.dilation()?;
    let parts = resolved_parts(&u, c0, c1, eta)?;
    let unit = resolved_parts(&u, ZERO, ONE, eta)?;
    let signal_block = |m: &CMatrix| CMatrix::from_fn(2, 2, |i, j| m[(i, j)]);

    let sig = density.basis().clone();
    let i0 = sig.index_of(&[0]).ok_or(Error::PolicyMismatch)?;
    let i1 = sig.index_of(&[1]).ok_or(Error::PolicyMismatch)?;
    let mut total = CMatrix::zeros(2, 2);
    for (a, ia) in [(0, i0), (1, i1)] {
        for (b, ib) in [(0, i0), (1, i1)] {
            total[(a, b)] = density.matrix()[(ia, ib)];
        }
    }
    let leak = density.trace() - total.trace().re;
    let sum = parts.wanted.add(&parts.detector).add(&parts.absorption);
    let decomposition_defect = signal_block(&sum).sub(&total).max_abs().max(leak.abs());

    let t22 = tm[(1, 1)];
    Ok(NoisySigmaZReport {
        transmission: t,
        reflection: tm[(0, 1)],
        eta,
        density,
        wanted: parts.wanted,
        detector: parts.detector,
        absorption: parts.absorption,
        wanted_state,
        success_probability: t22.norm_sqr(),
        sigma_z_defect: (wanted_state_coefficient(&tm) + t22).modulus(),
        detector_coefficient: unit.detector_weight,
        absorption_coefficient: unit.absorption_weight,
        closed_forms: sigma_z_closed_forms(abs_a),
        decomposition_defect,
        params,
    })
}

fn wanted_state_coefficient(t: &CMatrix) -> C64 {
    t[(0, 0)] * t[(1, 1)] + t[(0, 1)] * t[(1, 0)]
}

struct Parts {
    wanted: CMatrix,
    detector: CMatrix,
    absorption: CMatrix,
    /// Detector term with `η(1 − η)` divided out.
    detector_weight: f64,
    /// Absorption term with `η` divided out.
    absorption_weight: f64,
}

/// Runs `c₀|0,1⟩ + c₁|1,1⟩` with the device in vacuum through `u` and
/// sorts the signal contributions after a one-photon reading on mode 1.
fn resolved_parts(u: &ModeUnitary, c0: C64, c1: C64, eta: f64) -> Result<Parts> {
    let basis = FockBasis::max_total(4, 2)?;
    let mut amps = vec![ZERO; basis.dim()];
    amps[basis.index_of(&[0, 1, 0, 0]).ok_or(Error::PolicyMismatch)?] = c0;
    amps[basis.index_of(&[1, 1, 0, 0]).ok_or(Error::PolicyMismatch)?] = c1;
    let out = apply_unitary(u, &PureState::new(basis, amps)?)?;
    // (device pattern, photons on mode 1) -> signal amplitudes on |0⟩, |1⟩
    let mut groups: Vec<([u32; 2], u32, [C64; 2])> = Vec::new();
    for (s, a) in out.basis().states().iter().zip(out.amplitudes()) {
        if *a == ZERO || s[0] > 1 || s[1] == 0 {
            continue;
        }
        let key = [s[2], s[3]];
        let pos = groups.iter().position(|(d, k, _)| *d == key && *k == s[1]);
        let slot = match pos {
            Some(p) => p,
            None => {
                groups.push((key, s[1], [ZERO; 2]));
                groups.len() - 1
            }
        };
        groups[slot].2[s[0] as usize] += *a;
    }
    let mut parts = Parts {
        wanted: CMatrix::zeros(2, 2),
        detector: CMatrix::zeros(2, 2),
        absorption: CMatrix::zeros(2, 2),
        detector_weight: 0.0,
        absorption_weight: 0.0,
    };
    for (d, k, v) in &groups {
        let w = povm_weight(*k, 1, eta);
        let outer = CMatrix::from_fn(2, 2, |i, j| v[i] * v[j].conj() * w);
        let p = v[0].norm_sqr() + v[1].norm_sqr();
        if d[0] + d[1] > 0 {
            parts.absorption = parts.absorption.add(&outer);
            parts.absorption_weight += p * binomial(*k, 1) * Float::powi(1.0 - eta, *k as i32 - 1);
        } else if *k > 1 {
            parts.detector = parts.detector.add(&outer);
            parts.detector_weight += p * binomial(*k, 1) * Float::powi(1.0 - eta, *k as i32 - 2);
        } else {
            parts.wanted = parts.wanted.add(&outer);
        }
    }
    Ok(parts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::float::polar;
    use crate::interferometer::random_unitary;

    fn random_params(seed: u64) -> LossyBSParams {
        let u = random_unitary(4, seed).unwrap();
        let m = u.matrix();
        LossyBSParams::new(
            CMatrix::from_fn(2, 2, |i, j| m[(i, j)]),
            CMatrix::from_fn(2, 2, |i, j| m[(i, j + 2)]),
        )
        .unwrap()
    }

    #[test]
    fn closure_is_enforced() {
        let t = CMatrix::identity(2);
        let a = CMatrix::identity(2).scale(C64::new(0.1, 0.0));
        assert!(matches!(
            LossyBSParams::new(t, a),
            Err(Error::ClosureViolated { .. })
        ));
    }

    #[test]
    fn m_matrix_identity() {
        for seed in 0..20 {
            let p = random_params(seed);
            let m = p.m_matrix().unwrap();
            let t = p.t_matrix();
            let lhs = &m * &m.adjoint();
            let rhs = CMatrix::identity(2).sub(&(t * &t.adjoint()));
            assert!(lhs.sub(&rhs).max_abs() < 1e-12);
        }
    }

    #[test]
    fn device_block_matches_kraus_coupling() {
        // any completion couples the field to the device like M does
        let p = random_params(5);
        let u = p.dilation().unwrap();
        let x = CMatrix::from_fn(2, 2, |i, j| u.matrix()[(i + 2, j)]);
        let m = p.m_matrix().unwrap();
        assert!((&x.adjoint() * &x).sub(&(&m.adjoint() * &m)).max_abs() < 1e-12);
    }

    #[test]
    fn single_photon_bookkeeping() {
        let p = random_params(11);
        let ch = lossy_bs_channel(&p, 2).unwrap();
        let inp = PureState::basis_state(ch.basis().clone(), &[1, 0])
            .unwrap()
            .to_mixed();
        let out = ch.apply(&inp).unwrap();
        assert!((out.trace() - 1.0).abs() < 1e-10);
        let t = p.t_matrix();
        let vac = out.basis().index_of(&[0, 0]).unwrap();
        let lost = 1.0 - t[(0, 0)].norm_sqr() - t[(1, 0)].norm_sqr();
        assert!((out.matrix()[(vac, vac)].re - lost).abs() < 1e-10);
        assert!(ch.trace_defect() < 1e-10);
    }

    #[test]
    fn lossless_channel_is_conjugation() {
        let u = random_unitary(2, 4).unwrap();
        let p = LossyBSParams::lossless(u.matrix().clone()).unwrap();
        let ch = lossy_bs_channel(&p, 3).unwrap();
        let basis = ch.basis().clone();
        let amps: Vec<C64> = (0..basis.dim())
            .map(|k| C64::new(1.0 + k as f64, 0.5 * k as f64))
            .collect();
        let psi = PureState::new(basis, amps).unwrap().normalized().unwrap();
        let direct = apply_unitary(&u, &psi).unwrap().to_mixed();
        let via = ch.apply(&psi.to_mixed()).unwrap();
        assert!(direct.matrix().sub(via.matrix()).max_abs() < 1e-12);
    }

    #[test]
    fn povm_values() {
        let det = DetectorModel::new(1.0, 4).unwrap();
        let p = povm_element(2, &det).unwrap();
        assert_eq!(p.element(&[2], &[2]), ONE);
        assert_eq!(p.element(&[3], &[3]), ZERO);
        let half = DetectorModel::new(0.5, 3).unwrap();
        assert!((povm_element(0, &half).unwrap().element(&[1], &[1]).re - 0.5).abs() < 1e-15);
    }

    #[test]
    fn transmission_choices() {
        assert!((choose_t_for_sigma_z(0.0) - (Float::sqrt(3.0) - 1.0) / 2.0).abs() < 1e-15);
        assert!(choose_t_for_sigma_z(1.0).abs() < 1e-15);
        for k in 0..20 {
            let a = 0.95 * k as f64 / 19.0;
            let p = LossyBSParams::symmetric_slab(sigma_z_transmission_exact(a), a).unwrap();
            let t = p.t_matrix();
            assert!((wanted_state_coefficient(t) + t[(1, 1)]).modulus() < 1e-12);
        }
    }

    #[test]
    fn sigma_z_limits() {
        let (c0, c1) = (C64::new(0.6, 0.0), C64::new(0.0, 0.8));
        let r = noisy_sigma_z_experiment(0.0, 0.7, c0, c1).unwrap();
        assert!((r.detector_coefficient - (2.0 * Float::sqrt(3.0) - 3.0)).abs() < 1e-9);
        assert!(r.absorption_coefficient.abs() < 1e-12);
        assert!(r.decomposition_defect < 1e-10);
        let r = noisy_sigma_z_experiment(0.4, 1.0, c0, c1).unwrap();
        assert!((r.absorption_coefficient - 0.16 * 0.84).abs() < 1e-9);
        assert!(r.detector.max_abs() < 1e-15);
        assert!(r.decomposition_defect < 1e-10);
    }

    #[test]
    fn exact_root_gives_sigma_z() {
        let (c0, c1) = (C64::new(0.6, 0.0), C64::new(0.0, 0.8));
        let r = noisy_sigma_z_experiment_with_t(0.0, 1.0, c0, c1, sigma_z_transmission_exact(0.0))
            .unwrap();
        assert!((r.success_probability - 0.25).abs() < 1e-12);
        assert!(r.sigma_z_deviation(c0, c1) < 1e-12);
    }

    #[test]
    fn lossless_perfect_limit_matches_conditioning() {
        use crate::conditioning::{extract_conditional_operator, AncillaSpec, DetectionSpec};
        let (c0, c1) = (C64::new(0.8, 0.0), polar(0.6, 0.4));
        let r = noisy_sigma_z_experiment(0.0, 1.0, c0, c1).unwrap();
        let u = ModeUnitary::new(r.params.t_matrix().clone()).unwrap();
        let y = extract_conditional_operator(
            &u,
            &[0],
            &AncillaSpec(vec![1]),
            &DetectionSpec(vec![1]),
            1,
        )
        .unwrap();
        let psi = PureState::single_mode(&[c0, c1])
            .unwrap()
            .embed(y.operator.domain().clone(), 0.0)
            .unwrap();
        let out = y.operator.apply(&psi).unwrap().to_mixed();
        let d = r.density.matrix();
        for (i, si) in out.basis().states().iter().enumerate() {
            for (j, sj) in out.basis().states().iter().enumerate() {
                let a = r.density.basis().index_of(si).unwrap();
                let b = r.density.basis().index_of(sj).unwrap();
                assert!((d[(a, b)] - out.matrix()[(i, j)]).modulus() < 1e-10);
            }
        }
    }
}
