//! Executable gate constructions.
//!
//! Every recipe returns a [`GateRecipe`] describing the optical setup and a
//! [`GateReport`] comparing the realized operator with its target up to a
//! global phase.

use alloc::string::String;
use alloc::vec::Vec;

use crate::conditioning::{AncillaSpec, DetectionSpec};
use crate::error::{Error, Result};
use crate::float::{ComplexExt, Float};
use crate::fock::PureState;
use crate::interferometer::NetworkDescription;
use crate::linalg::{CMatrix, ONE};

mod cnot;
mod engineer;
mod phase;

pub use cnot::{
    cnot_basis, cnot_basis_bs_matrix, cnot_obstruction_search, CnotSearchReport, CNOT_BASIS,
};
pub use engineer::{
    apply_creation_polynomial, compensated_coefficients, engineer_fock_state, engineer_state,
    hadamard_gate, hadamard_gate_with, kill_operator, pauli_xy_gate, pauli_xy_gate_with,
    photon_adder, procrustean_filter, tmsv_cutoff, tmsv_state, BellLadderState,
    CreationPolynomialAction, CzComponent, EngineeredState, PauliAxis, ProcrusteanFilter,
    ResourceCount, ADDER_TRANSMISSION, CONDITION_WARN, HADAMARD_CZ_RESTARTS, MAX_DEGREE, PAULI_Q,
    PAULI_RESTARTS,
};
pub use phase::{
    cphase_gate, cphase_gate_with, nss_gate_klm, nss_gate_klm_with, ralph_cz_check,
    ralph_cz_check_with, sandwich_identity_defect, su3_phase_gate, su3_phase_gate_with,
    swap_arm_polynomial, swap_gate, swap_network, vacuum_detector_arm, CphaseVariant, RalphReport,
    VacuumArm, CPHASE_RESTARTS, NSS_RESTARTS, SU3_RESTARTS,
};

/// Optical setup of a gate.
#[derive(Clone, Debug)]
pub struct GateRecipe {
    pub name: String,
    pub network: NetworkDescription,
    pub signal_modes: Vec<usize>,
    pub ancilla: AncillaSpec,
    pub detection: DetectionSpec,
    /// Entangled ancilla fed into the auxiliary modes instead of `ancilla`.
    pub ancilla_state: Option<PureState>,
    /// Stages in the order they act.
    pub stages: Vec<String>,
}

impl GateRecipe {
    /// Checks that signal and auxiliary modes partition the network.
    pub fn validate(&self) -> Result<()> {
        let n = self.network.modes();
        let mut seen = alloc::vec![false; n];
        for &m in &self.signal_modes {
            if m >= n || seen[m] {
                return Err(Error::InvalidPartition(alloc::format!(
                    "bad signal mode {m}"
                )));
            }
            seen[m] = true;
        }
        let aux = n - self.signal_modes.len();
        if self.ancilla_state.is_none()
            && (self.ancilla.0.len() != aux || self.detection.0.len() != aux)
        {
            return Err(Error::InvalidPartition(alloc::format!(
                "{aux} auxiliary modes, {} ancilla and {} detector entries",
                self.ancilla.0.len(),
                self.detection.0.len()
            )));
        }
        Ok(())
    }
}

/// Realized operator versus target.
#[derive(Clone, Debug)]
pub struct GateReport {
    /// Realized block, rescaled by `1/√p`.
    pub achieved: CMatrix,
    pub target: CMatrix,
    /// `min_z ‖achieved − z·target‖_max` over unit `z`.
    pub residual: f64,
    /// Mean success probability over the basis inputs of the block.
    pub success_probability: f64,
    pub extras: Vec<(&'static str, f64)>,
}

impl GateReport {
    pub fn extra(&self, key: &str) -> Option<f64> {
        self.extras.iter().find(|(k, _)| *k == key).map(|(_, v)| *v)
    }
}

/// `‖A − zB‖_max` with `z` the phase of `tr(B†A)`.
pub fn gate_residual(achieved: &CMatrix, target: &CMatrix) -> Result<f64> {
    if achieved.rows() != target.rows() || achieved.cols() != target.cols() {
        return Err(Error::DimensionMismatch {
            expected: target.rows() * target.cols(),
            found: achieved.rows() * achieved.cols(),
        });
    }
    let overlap = target
        .as_slice()
        .iter()
        .zip(achieved.as_slice())
        .fold(crate::linalg::ZERO, |acc, (b, a)| acc + b.conj() * a);
    let z = if overlap.modulus() > 0.0 {
        overlap / overlap.modulus()
    } else {
        ONE
    };
    Ok(achieved.sub(&target.scale(z)).max_abs())
}

/// Rescales a conditional block to unit mean success; returns it with `p`.
pub(crate) fn normalize_block(block: &CMatrix) -> (CMatrix, f64) {
    let d = block.cols().max(1) as f64;
    let p = block.frobenius().powi(2) / d;
    if p > 0.0 {
        (block.scale(ONE / Float::sqrt(p)), p)
    } else {
        (block.clone(), 0.0)
    }
}

pub(crate) fn report(
    block: &CMatrix,
    target: CMatrix,
    extras: Vec<(&'static str, f64)>,
) -> Result<GateReport> {
    let (achieved, p) = normalize_block(block);
    let residual = gate_residual(&achieved, &target)?;
    Ok(GateReport {
        achieved,
        target,
        residual,
        success_probability: p,
        extras,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{cis, C64};

    #[test]
    fn residual_ignores_global_phase() {
        let t = CMatrix::diagonal(&[ONE, -ONE]);
        let a = t.scale(cis(0.7));
        assert!(gate_residual(&a, &t).unwrap() < 1e-15);
        let b = CMatrix::diagonal(&[ONE, ONE]);
        assert!((gate_residual(&b, &t).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn normalization_uses_mean_probability() {
        let b = CMatrix::diagonal(&[C64::new(0.5, 0.0), C64::new(0.0, 0.5)]);
        let (a, p) = normalize_block(&b);
        assert!((p - 0.25).abs() < 1e-15);
        assert!((a.frobenius().powi(2) - 2.0).abs() < 1e-12);
    }
}
