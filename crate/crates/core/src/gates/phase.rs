//! Phase gates that stay inside Fock layers.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use super::{gate_residual, normalize_block, report, GateRecipe, GateReport};
use crate::conditioning::{
    apply_unitary, extract_conditional_operator, fock_lift_amplitude, lift_sector, su3_closed_form,
    AncillaSpec, ConditionalOperator, DetectionSpec,
};
use crate::error::Result;
use crate::float::{wrap_phase, ComplexExt, Float, PI};
use crate::fock::{FockBasis, PureState};
use crate::interferometer::{
    compose, BeamSplitterParams, Element, ModeUnitary, NetworkDescription,
};
use crate::linalg::{cis, CMatrix, C64, ONE, ZERO};
use crate::optimizer::{optimize_gate, Objective};
use crate::permanent;

/// Default restart budget of [`su3_phase_gate`].
pub const SU3_RESTARTS: usize = 40;
/// Default restart budget of [`nss_gate_klm`].
pub const NSS_RESTARTS: usize = 40;
/// Default restart budget of the four-photon arm in [`cphase_gate`].
pub const CPHASE_RESTARTS: usize = 500;

const QUBITS: [[u32; 2]; 4] = [[0, 0], [0, 1], [1, 0], [1, 1]];

struct Arm {
    network: NetworkDescription,
    unitary: ModeUnitary,
    residual: f64,
    restart: usize,
    evaluations: usize,
}

fn optimize_arm(
    ancilla: &[u32],
    detection: &[u32],
    targets: &[C64],
    seed: u64,
    restarts: usize,
) -> Result<Arm> {
    let objective = Objective::single_mode_diagonal(ancilla, detection, targets);
    let best = optimize_gate(&objective, 3, seed, restarts)?;
    Ok(Arm {
        network: best.params.to_network()?,
        unitary: best.unitary()?,
        residual: best.residual,
        restart: best.restart,
        evaluations: best.evaluations,
    })
}

fn single_mode_block(y: &ConditionalOperator, levels: usize) -> CMatrix {
    CMatrix::from_fn(levels, levels, |i, j| y.element(&[i as u32], &[j as u32]))
}

fn qubit_block(y: &ConditionalOperator) -> CMatrix {
    CMatrix::from_fn(4, 4, |i, j| y.element(&QUBITS[i], &QUBITS[j]))
}

fn arm_extras(arm: &Arm) -> Vec<(&'static str, f64)> {
    vec![
        ("optimizer_residual", arm.residual),
        ("restart", arm.restart as f64),
        ("evaluations", arm.evaluations as f64),
    ]
}

fn stages(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

/// Three-mode network with ancilla and detection `|1,1⟩` realizing
/// `|0⟩ → |0⟩, |1⟩ → e^{iφ₁}|1⟩, |2⟩ → e^{iφ₂}|2⟩` up to a common factor.
pub fn su3_phase_gate(phi1: f64, phi2: f64, seed: u64) -> Result<(GateRecipe, GateReport)> {
    su3_phase_gate_with(phi1, phi2, seed, SU3_RESTARTS)
}

pub fn su3_phase_gate_with(
    phi1: f64,
    phi2: f64,
    seed: u64,
    restarts: usize,
) -> Result<(GateRecipe, GateReport)> {
    let targets = [ONE, cis(phi1), cis(phi2)];
    let arm = optimize_arm(&[1, 1], &[1, 1], &targets, seed, restarts)?;
    let aux = AncillaSpec(vec![1, 1]);
    let det = DetectionSpec(vec![1, 1]);
    let y = extract_conditional_operator(&arm.unitary, &[0], &aux, &det, 2)?;
    let block = single_mode_block(&y, 3);
    let closed = su3_closed_form(&arm.unitary)?;
    let closed_dev = (0..3)
        .map(|n| (block[(n, n)] - closed[n]).modulus())
        .fold(0.0, f64::max);
    let sub = permanent::subpermanent(arm.unitary.matrix(), &[0], &[0])?;
    let mut extras = arm_extras(&arm);
    extras.push(("per_aux_block_sq", sub.norm_sqr()));
    extras.push(("closed_form_deviation", closed_dev));
    let rep = report(&block, CMatrix::diagonal(&targets), extras)?;
    let recipe = GateRecipe {
        name: "su3-phase".into(),
        network: arm.network,
        signal_modes: vec![0],
        ancilla: aux,
        detection: det,
        ancilla_state: None,
        stages: stages(&[
            "inject |1,1> into modes 1,2",
            "three-mode network",
            "detect |1,1>",
        ]),
    };
    Ok((recipe, rep))
}

/// Nonlinear sign shift `c₀|0⟩ + c₁|1⟩ + c₂|2⟩ → c₀|0⟩ + c₁|1⟩ − c₂|2⟩`
/// with one photon and one vacuum ancilla.
pub fn nss_gate_klm() -> Result<(GateRecipe, GateReport)> {
    nss_gate_klm_with(1, NSS_RESTARTS)
}

pub fn nss_gate_klm_with(seed: u64, restarts: usize) -> Result<(GateRecipe, GateReport)> {
    let targets = [ONE, ONE, -ONE];
    let arm = optimize_arm(&[1, 0], &[1, 0], &targets, seed, restarts)?;
    let aux = AncillaSpec(vec![1, 0]);
    let det = DetectionSpec(vec![1, 0]);
    let y = extract_conditional_operator(&arm.unitary, &[0], &aux, &det, 2)?;
    let block = single_mode_block(&y, 3);
    let l11 = arm.unitary.entry(0, 0);
    let mut extras = arm_extras(&arm);
    extras.push(("lambda11_re", l11.re));
    extras.push(("lambda11_im", l11.im));
    let rep = report(&block, CMatrix::diagonal(&targets), extras)?;
    let recipe = GateRecipe {
        name: "nss".into(),
        network: arm.network,
        signal_modes: vec![0],
        ancilla: aux,
        detection: det,
        ancilla_state: None,
        stages: stages(&[
            "inject |1,0> into modes 1,2",
            "three beam splitters",
            "detect |1,0>",
        ]),
    };
    Ok((recipe, rep))
}

/// Outcome of [`ralph_cz_check`].
#[derive(Clone, Debug)]
pub struct RalphReport {
    /// Both solutions of the quadratic the constraints impose on `Λ₁₁`.
    pub roots: [f64; 2],
    /// The root inside the unit disk.
    pub forced_lambda11: f64,
    pub optimized_lambda11: C64,
    /// Largest `|Λ₂₂|²` found on the constraint manifold.
    pub max_probability: f64,
    /// `|per Λ(3|3) − Λ₂₂|` and `|2Λ₁₂Λ₂₁Λ₁₁ + Λ₂₂Λ₁₁² + Λ₂₂|` at the optimum.
    pub constraint_residuals: [f64; 2],
    pub unitary: ModeUnitary,
}

/// Sign-shift arm with ancilla `|1,0⟩`: solves the constraints for `Λ₁₁`
/// and maximizes `|Λ₂₂|²` on them numerically.
pub fn ralph_cz_check() -> Result<RalphReport> {
    ralph_cz_check_with(1, NSS_RESTARTS)
}

pub fn ralph_cz_check_with(seed: u64, restarts: usize) -> Result<RalphReport> {
    // Λ₁₂Λ₂₁ = Λ₂₂(1 − Λ₁₁) from the first constraint turns the second into
    // Λ₂₂(2Λ₁₁(1 − Λ₁₁) + Λ₁₁² + 1) = 0, i.e. Λ₁₁² − 2Λ₁₁ − 1 = 0.
    let (a, b, c) = (1.0, -2.0, -1.0);
    let disc = Float::sqrt(b * b - 4.0 * a * c);
    let roots = [(-b - disc) / (2.0 * a), (-b + disc) / (2.0 * a)];
    let forced = if roots[0].abs() <= 1.0 {
        roots[0]
    } else {
        roots[1]
    };

    let arm = optimize_arm(&[1, 0], &[1, 0], &[ONE, ONE, -ONE], seed, restarts)?;
    let m = arm.unitary.matrix();
    let (l11, l12, l21, l22) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
    let per33 = permanent::subpermanent(m, &[2], &[2])?;
    let r1 = (per33 - l22).modulus();
    let r2 = (l12 * l21 * l11 * 2.0 + l22 * l11 * l11 + l22).modulus();
    Ok(RalphReport {
        roots,
        forced_lambda11: forced,
        optimized_lambda11: l11,
        max_probability: l22.norm_sqr(),
        constraint_residuals: [r1, r2],
        unitary: arm.unitary,
    })
}

/// Two symmetric beam splitters around a π plate on mode 0.
pub fn swap_network() -> Result<NetworkDescription> {
    let mut net = NetworkDescription::new(2);
    net.push_bs(0, 1, PI / 4.0, 0.0, 0.0)?;
    net.push_phase(0, PI)?;
    net.push_bs(0, 1, PI / 4.0, PI, 0.0)?;
    Ok(net)
}

/// Arm polynomial `1 + 2n(n − 2)` equivalent to the swap's phase plate.
pub fn swap_arm_polynomial(n: u32) -> f64 {
    let n = f64::from(n);
    1.0 + 2.0 * n * (n - 2.0)
}

/// Deterministic swap of two single-rail qubits.
pub fn swap_gate() -> Result<(GateRecipe, GateReport)> {
    let net = swap_network()?;
    let u = compose(&net)?;
    let mut block = CMatrix::zeros(4, 4);
    for (j, inp) in QUBITS.iter().enumerate() {
        for (i, out) in QUBITS.iter().enumerate() {
            block[(i, j)] = fock_lift_amplitude(&u, inp, out)?;
        }
    }
    let target = CMatrix::from_fn(4, 4, |i, j| {
        let (a, b) = (QUBITS[j][0], QUBITS[j][1]);
        if QUBITS[i] == [b, a] {
            ONE
        } else {
            ZERO
        }
    });
    let mut defect: f64 = 0.0;
    for n in 0..=4 {
        defect = defect.max(lift_sector(&u, n)?.matrix().unitarity_defect());
    }
    let involution = block.matmul(&block).sub(&CMatrix::identity(4)).max_abs();
    let arm = (0..=2)
        .map(|n| (swap_arm_polynomial(n) - if n % 2 == 0 { 1.0 } else { -1.0 }).abs())
        .fold(0.0, f64::max);
    let rep = report(
        &block,
        target,
        vec![
            ("full_unitarity_defect", defect),
            ("involution_defect", involution),
            ("arm_polynomial_deviation", arm),
        ],
    )?;
    let recipe = GateRecipe {
        name: "swap".into(),
        network: net,
        signal_modes: vec![0, 1],
        ancilla: AncillaSpec(vec![]),
        detection: DetectionSpec(vec![]),
        ancilla_state: None,
        stages: stages(&[
            "50:50 beam splitter",
            "pi plate on mode 0",
            "50:50 beam splitter",
        ]),
    };
    Ok((recipe, rep))
}

/// Which per-arm network realizes `N̂ = 1 − ½(1 − e^{iφ})n̂(n̂ − 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CphaseVariant {
    /// Three-mode arm, two photons in and two detected.
    FourPhoton,
    /// Catalysis beam splitter followed by a vacuum-heralded filter.
    VacuumDetector,
}

/// Closed-form transmissions of the vacuum-detector arm.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VacuumArm {
    /// `T` of the splitter fed with one photon and heralded on one photon.
    pub photon_transmission: C64,
    /// `T` of the splitter fed with vacuum and heralded on vacuum.
    pub vacuum_transmission: C64,
}

impl VacuumArm {
    /// `Y(n) = s^n t^{n−1}(|t|² − n(1 − |t|²))`.
    pub fn diagonal(&self, n: u32) -> C64 {
        let t = self.photon_transmission;
        let s = self.vacuum_transmission;
        s.powu(n)
            * crate::conditioning::catalysis_closed_form(
                t,
                C64::new(Float::sqrt(1.0 - t.norm_sqr()), 0.0),
                n,
            )
    }

    pub fn network(&self) -> Result<NetworkDescription> {
        let mut net = NetworkDescription::new(3);
        let t = self.photon_transmission;
        let s = self.vacuum_transmission;
        net.push_bs(0, 1, Float::acos(t.modulus().min(1.0)), t.phase(), 0.0)?;
        net.push_bs(0, 2, Float::acos(s.modulus().min(1.0)), s.phase(), 0.0)?;
        Ok(net)
    }
}

/// Solves the vacuum-detector arm in closed form. The ratios it can realize
/// are real, so only `φ ≡ 0` and `φ ≡ π` have a solution.
pub fn vacuum_detector_arm(phi: f64) -> Option<VacuumArm> {
    let w = wrap_phase(phi);
    if w < 1e-12 || 2.0 * PI - w < 1e-12 {
        return Some(VacuumArm {
            photon_transmission: ONE,
            vacuum_transmission: ONE,
        });
    }
    if (w - PI).abs() < 1e-12 {
        // Y(1) = Y(0) gives s = t*/(2x − 1); Y(2) = −Y(0) then needs
        // 7x² − 6x + 1 = 0 with x = |t|².
        let x = (3.0 - Float::sqrt(2.0)) / 7.0;
        let t = C64::new(Float::sqrt(x), 0.0);
        let s = t.conj() / (2.0 * x - 1.0);
        return Some(VacuumArm {
            photon_transmission: t,
            vacuum_transmission: s,
        });
    }
    None
}

fn sandwich(arm: &NetworkDescription) -> Result<NetworkDescription> {
    let bs = BeamSplitterParams::new(0, 1, PI / 4.0, 0.0, 0.0)?;
    let mut net = NetworkDescription::new(6);
    net.push(Element::BeamSplitter(bs))?;
    net.then(&arm.remapped(&[0, 2, 3], 6)?)?;
    net.then(&arm.remapped(&[1, 4, 5], 6)?)?;
    net.push(Element::BeamSplitter(bs.inverse()))?;
    Ok(net)
}

/// Controlled phase `1 − (1 − e^{iφ})n̂₁n̂₂` on two single-rail qubits,
/// from two conditional arms inside a Mach–Zehnder sandwich.
pub fn cphase_gate(
    phi: f64,
    variant: CphaseVariant,
    seed: u64,
) -> Result<(GateRecipe, GateReport)> {
    cphase_gate_with(phi, variant, seed, CPHASE_RESTARTS)
}

pub fn cphase_gate_with(
    phi: f64,
    variant: CphaseVariant,
    seed: u64,
    restarts: usize,
) -> Result<(GateRecipe, GateReport)> {
    let targets = [ONE, ONE, cis(phi)];
    let mut extras = Vec::new();
    let (arm_net, arm_anc): (NetworkDescription, [u32; 2]) = match variant {
        CphaseVariant::FourPhoton => {
            let arm = optimize_arm(&[1, 1], &[1, 1], &targets, seed, restarts)?;
            extras.extend(arm_extras(&arm));
            (arm.network, [1, 1])
        }
        CphaseVariant::VacuumDetector => match vacuum_detector_arm(phi) {
            Some(v) => {
                extras.push(("photon_transmission_abs", v.photon_transmission.modulus()));
                extras.push(("vacuum_transmission_abs", v.vacuum_transmission.modulus()));
                extras.push(("photon_transmission_arg", v.photon_transmission.phase()));
                extras.push(("vacuum_transmission_arg", v.vacuum_transmission.phase()));
                (v.network()?, [1, 0])
            }
            None => {
                let arm = optimize_arm(&[1, 0], &[1, 0], &targets, seed, restarts)?;
                extras.extend(arm_extras(&arm));
                (arm.network, [1, 0])
            }
        },
    };
    let arm_u = compose(&arm_net)?;
    let arm_aux = AncillaSpec(arm_anc.to_vec());
    let arm_det = DetectionSpec(arm_anc.to_vec());
    let y_arm = extract_conditional_operator(&arm_u, &[0], &arm_aux, &arm_det, 2)?;
    let arm_block = single_mode_block(&y_arm, 3);
    let (arm_scaled, p_arm) = normalize_block(&arm_block);
    extras.push(("arm_probability", p_arm));
    extras.push((
        "arm_residual",
        gate_residual(&arm_scaled, &CMatrix::diagonal(&targets))?,
    ));

    let net = sandwich(&arm_net)?;
    let u = compose(&net)?;
    let anc = [arm_anc[0], arm_anc[1], arm_anc[0], arm_anc[1]];
    let aux = AncillaSpec(anc.to_vec());
    let det = DetectionSpec(anc.to_vec());
    let y = extract_conditional_operator(&u, &[0, 1], &aux, &det, 2)?;
    let block = qubit_block(&y);
    let y0 = y_arm.diagonal(0).norm_sqr();
    extras.push(("vacuum_total", y.element(&[0, 0], &[0, 0]).norm_sqr()));
    extras.push(("vacuum_arm_product", y0 * y0));
    extras.push(("arm_probability_squared", p_arm * p_arm));
    let target = CMatrix::diagonal(&[ONE, ONE, ONE, cis(phi)]);
    let rep = report(&block, target, extras)?;
    let name = match variant {
        CphaseVariant::FourPhoton => "cphase-four-photon",
        CphaseVariant::VacuumDetector => "cphase-vacuum-detector",
    };
    let recipe = GateRecipe {
        name: name.into(),
        network: net,
        signal_modes: vec![0, 1],
        ancilla: aux,
        detection: det,
        ancilla_state: None,
        stages: stages(&[
            "50:50 beam splitter on the signal modes",
            "conditional arm on mode 0 (aux 2,3)",
            "conditional arm on mode 1 (aux 4,5)",
            "inverse 50:50 beam splitter",
            "detect ancillas",
        ]),
    };
    Ok((recipe, rep))
}

/// Largest deviation of `BS (N̂ ⊗ N̂) BS⁻¹` from `1 − (1 − e^{iφ})n̂₁n̂₂` on
/// the two-qubit subspace, with the ideal arm operator `N̂`.
pub fn sandwich_identity_defect(phi: f64) -> Result<f64> {
    let bs = BeamSplitterParams::new(0, 1, PI / 4.0, 0.0, 0.0)?;
    let fwd = crate::interferometer::bs_matrix(&bs, 2)?;
    let back = fwd.inverse();
    let arm = [ONE, ONE, cis(phi)];
    let basis = FockBasis::max_total(2, 2)?;
    let mut worst: f64 = 0.0;
    for (j, inp) in QUBITS.iter().enumerate() {
        let psi = PureState::basis_state(basis.clone(), inp)?;
        let mid = apply_unitary(&fwd, &psi)?;
        let amps: Vec<C64> = mid
            .basis()
            .states()
            .iter()
            .zip(mid.amplitudes())
            .map(|(s, a)| a * arm[s[0] as usize] * arm[s[1] as usize])
            .collect();
        let mid = PureState::new(mid.basis().clone(), amps)?;
        let out = apply_unitary(&back, &mid)?;
        for (s, a) in out.basis().states().iter().zip(out.amplitudes()) {
            let want = match QUBITS.iter().position(|q| q[..] == s[..]) {
                Some(i) if i == j => {
                    if j == 3 {
                        cis(phi)
                    } else {
                        ONE
                    }
                }
                _ => ZERO,
            };
            worst = worst.max((a - want).modulus());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn swap_is_exact() {
        let (recipe, rep) = swap_gate().unwrap();
        assert_eq!(recipe.network.beam_splitter_count(), 2);
        assert!(rep.residual < 1e-12);
        assert!((rep.success_probability - 1.0).abs() < 1e-12);
        assert!(rep.extra("full_unitarity_defect").unwrap() < 1e-12);
        assert!(rep.extra("involution_defect").unwrap() < 1e-12);
        assert_eq!(rep.extra("arm_polynomial_deviation"), Some(0.0));
        let u = compose(&recipe.network).unwrap();
        assert!(fock_lift_amplitude(&u, &[0, 1], &[1, 0]).unwrap().modulus() > 1.0 - 1e-12);
    }

    #[test]
    fn vacuum_arm_closed_form_matches_extraction() {
        let v = vacuum_detector_arm(PI).unwrap();
        assert!((v.photon_transmission.modulus() - 0.476).abs() < 1e-3);
        assert!((v.vacuum_transmission.modulus() - 0.87).abs() < 1e-3);
        let u = compose(&v.network().unwrap()).unwrap();
        let y = extract_conditional_operator(
            &u,
            &[0],
            &AncillaSpec(vec![1, 0]),
            &DetectionSpec(vec![1, 0]),
            3,
        )
        .unwrap();
        for n in 0..=3 {
            assert!((y.diagonal(n) - v.diagonal(n)).modulus() < 1e-12);
        }
        let r = y.diagonal(1) / y.diagonal(0);
        let r2 = y.diagonal(2) / y.diagonal(0);
        assert!((r - ONE).modulus() < 1e-12);
        assert!((r2 + ONE).modulus() < 1e-12);
        assert!(vacuum_detector_arm(1.0).is_none());
    }

    #[test]
    fn sandwich_identity_holds() {
        for k in 0..8 {
            let phi = -PI + 0.8 * k as f64;
            assert!(sandwich_identity_defect(phi).unwrap() < 1e-12);
        }
    }

    #[test]
    fn vacuum_detector_cphase_probabilities() {
        let (recipe, rep) = cphase_gate(PI, CphaseVariant::VacuumDetector, 0).unwrap();
        assert_eq!(recipe.network.beam_splitter_count(), 6);
        assert!(rep.residual < 1e-10);
        let p_arm = rep.extra("arm_probability").unwrap();
        assert!((p_arm - 0.2265).abs() < 1e-3);
        assert!((rep.success_probability - p_arm * p_arm).abs() < 1e-10);
        let vt = rep.extra("vacuum_total").unwrap();
        assert!((vt - rep.extra("vacuum_arm_product").unwrap()).abs() < 1e-12);
    }

    #[test]
    fn zero_phase_cphase_is_identity() {
        let (_, rep) = cphase_gate_with(0.0, CphaseVariant::VacuumDetector, 0, 1).unwrap();
        assert!(rep.residual < 1e-12);
        assert!((rep.success_probability - 1.0).abs() < 1e-12);
    }

    #[test]
    fn nss_reaches_quarter() {
        let (recipe, rep) = nss_gate_klm_with(3, 10).unwrap();
        assert_eq!(recipe.ancilla.0, vec![1, 0]);
        assert_eq!(recipe.network.beam_splitter_count(), 3);
        assert!(rep.residual < 1e-6, "{}", rep.residual);
        assert!((rep.success_probability - 0.25).abs() < 1e-3);
    }

    #[test]
    fn ralph_roots() {
        let r = ralph_cz_check_with(2, 10).unwrap();
        assert!((r.forced_lambda11 - (1.0 - Float::sqrt(2.0))).abs() < 1e-12);
        assert!((r.optimized_lambda11 - C64::new(r.forced_lambda11, 0.0)).modulus() < 1e-6);
        assert!(
            r.constraint_residuals[0] < 1e-6 && r.constraint_residuals[1] < 1e-6,
            "{:?}",
            r.constraint_residuals
        );
    }
}
