use std::f64::consts::PI;

use fockforge_core::fock::{apply_ladder, FockBasis, Ladder, PureState};
use fockforge_core::gates::*;
use fockforge_core::interferometer::BeamSplitterParams;
use fockforge_core::linalg::{CMatrix, C64};
use fockforge_core::optimizer::{constraint_residual, optimize_gate, Objective};
use fockforge_core::rng;

const ONE: C64 = C64::new(1.0, 0.0);

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// `Σ d_k (a†)^k |ψ⟩` by repeated ladder application.
fn creation_polynomial_oracle(d: &[C64], psi: &PureState, cutoff: u32) -> PureState {
    let basis = FockBasis::per_mode(1, cutoff).unwrap();
    let mut term = psi.embed(basis.clone(), 0.0).unwrap();
    let mut acc = vec![C64::new(0.0, 0.0); basis.dim()];
    for (k, dk) in d.iter().enumerate() {
        for (a, t) in acc.iter_mut().zip(term.amplitudes()) {
            *a += dk * t;
        }
        if k + 1 < d.len() {
            term = apply_ladder(Ladder::Create, 0, &term).unwrap();
        }
    }
    PureState::new(basis, acc).unwrap()
}

#[test]
fn engineered_random_cubic_states() {
    for seed in 0..5 {
        let mut r = rng::stream_rng(seed, 0);
        let d: Vec<C64> = (0..4).map(|_| rng::complex_normal(&mut r)).collect();
        let e = engineer_state(&d).unwrap();
        let vac = PureState::single_mode(&[
            ONE,
            C64::new(0.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(0.0, 0.0),
        ])
        .unwrap();
        let want = creation_polynomial_oracle(&d, &vac, 3)
            .normalized()
            .unwrap();
        let got = e.state.embed(want.basis().clone(), 1e-12).unwrap();
        assert!(got.fidelity(&want).unwrap() > 1.0 - 1e-6, "seed {seed}");
        assert_eq!(e.resources.single_photon_sources, 3);
        assert!(e.truncation_loss < 1e-8);
    }
}

#[test]
fn engineered_fock_amplitudes() {
    let amps = [c(0.5, 0.0), c(0.0, 0.5), c(0.5, 0.0), c(-0.5, 0.0)];
    let e = engineer_fock_state(&amps).unwrap();
    let want = PureState::single_mode(&amps).unwrap();
    assert!(
        e.state
            .embed(want.basis().clone(), 1e-12)
            .unwrap()
            .fidelity(&want)
            .unwrap()
            > 1.0 - 1e-6
    );
}

#[test]
fn creation_polynomial_matches_ladder_oracle() {
    let mixer = BeamSplitterParams::new(0, 1, 0.7, 0.4, 0.0).unwrap();
    let d = [c(1.0, 0.0), c(0.3, -0.2), c(0.25, 0.1)];
    let psi = PureState::single_mode(&[c(0.6, 0.0), c(0.0, 0.8)]).unwrap();
    let act = apply_creation_polynomial(&d, &psi, &mixer).unwrap();
    // Σ d_k Λ₁₂^k (a†)^k Λ₁₁^{n̂}|ψ⟩
    let filtered =
        PureState::single_mode(&[psi.amplitudes()[0], psi.amplitudes()[1] * act.lambda11]).unwrap();
    let scaled: Vec<C64> = d
        .iter()
        .enumerate()
        .map(|(k, dk)| dk * act.lambda12.powu(k as u32))
        .collect();
    let want = creation_polynomial_oracle(&scaled, &filtered, 3)
        .normalized()
        .unwrap();
    let got = act
        .state
        .normalized()
        .unwrap()
        .embed(want.basis().clone(), 1e-10)
        .unwrap();
    assert!(got.fidelity(&want).unwrap() > 1.0 - 1e-10);
    assert!(act.probability > 0.0 && act.probability <= 1.0);
}

#[test]
fn pauli_gates_via_tmsv() {
    for axis in [PauliAxis::X, PauliAxis::Y] {
        let (recipe, rep) = pauli_xy_gate(axis, PAULI_Q, 1).unwrap();
        recipe.validate().unwrap();
        assert!(rep.residual < 1e-4, "{axis:?} {}", rep.residual);
        let sq = rep.achieved.matmul(&rep.achieved);
        assert!(gate_residual(&sq, &CMatrix::identity(2)).unwrap() < 1e-4);
        assert!(rep.success_probability > 0.0);
    }
}

#[test]
fn procrustean_distance_shrinks_with_q() {
    let lambda = c(0.4, 0.3);
    let dist = |q: f64| {
        let tmsv = tmsv_state(q, tmsv_cutoff(q)).unwrap();
        procrustean_filter(&tmsv, lambda, q).unwrap().trace_distance
    };
    let (big, small) = (dist(0.05), dist(0.005));
    assert!(small < big, "{small} vs {big}");
    assert!(small < 0.01);
}

#[test]
fn procrustean_zero_target_keeps_vacuum() {
    let q = 0.05;
    let tmsv = tmsv_state(q, tmsv_cutoff(q)).unwrap();
    let f = procrustean_filter(&tmsv, c(0.0, 0.0), q).unwrap();
    assert!(f.trace_distance < 1e-2);
}

#[test]
fn hadamard_with_ideal_cz() {
    let (recipe, rep) = hadamard_gate_with(CzComponent::Ideal, 1).unwrap();
    assert_eq!(recipe.stages.len(), 4);
    assert!(rep.residual < 1e-6, "{}", rep.residual);
    let sq = rep.achieved.matmul(&rep.achieved);
    assert!(gate_residual(&sq, &CMatrix::identity(2)).unwrap() < 1e-6);
    let pc = rep.extra("cz_probability").unwrap();
    let pp = rep.extra("projection_probability").unwrap();
    assert!((rep.success_probability - pc * pp).abs() < 1e-10);
}

#[test]
fn hadamard_with_vacuum_detector_cz() {
    let (_, ideal) = hadamard_gate_with(CzComponent::Ideal, 1).unwrap();
    let (_, vac) = hadamard_gate_with(CzComponent::VacuumDetector, 1).unwrap();
    assert!(vac.residual < 1e-6);
    let x: f64 = (3.0 - 2f64.sqrt()) / 7.0;
    assert!((vac.success_probability - x * x * ideal.success_probability).abs() < 1e-10);
}

#[test]
fn su3_zero_phases_is_identity() {
    let (_, rep) = su3_phase_gate_with(0.0, 0.0, 2, 10).unwrap();
    assert!(rep.residual < 1e-6);
    assert!(rep.success_probability > 0.0);
}

#[test]
fn cphase_arms_multiply() {
    let (_, rep) = cphase_gate(PI, CphaseVariant::VacuumDetector, 1).unwrap();
    let p = rep.extra("arm_probability").unwrap();
    assert!((rep.success_probability - p * p).abs() < 1e-10);
    for k in 0..20 {
        let phi = -PI + 2.0 * PI * k as f64 / 19.0;
        assert!(sandwich_identity_defect(phi).unwrap() < 1e-10);
    }
}

#[test]
fn swap_is_unitary_everywhere() {
    let (recipe, rep) = swap_gate().unwrap();
    assert_eq!(recipe.network.beam_splitter_count(), 2);
    assert!(rep.residual < 1e-12);
    assert!((rep.success_probability - 1.0).abs() < 1e-12);
    assert!(rep.extra("full_unitarity_defect").unwrap() < 1e-12);
}

#[test]
fn optimizer_is_deterministic_and_round_trips() {
    let obj = Objective::single_mode_diagonal(&[1, 0], &[1, 0], &[ONE, ONE, -ONE]);
    let a = optimize_gate(&obj, 3, 9, 6).unwrap();
    let b = optimize_gate(&obj, 3, 9, 6).unwrap();
    assert_eq!(a, b);
    let r = constraint_residual(&a.params, &obj).unwrap();
    assert!((r - a.residual).abs() <= 1e-14);
}

#[test]
fn optimizer_best_improves_with_restarts() {
    let obj = Objective::single_mode_diagonal(&[1, 0], &[1, 0], &[ONE, ONE, -ONE]);
    let mut prev: Option<(bool, f64, f64)> = None;
    for restarts in 1..6 {
        let Ok(r) = optimize_gate(&obj, 3, 4, restarts) else {
            continue;
        };
        let cur = (r.feasible(), r.success_probability, r.residual);
        if let Some((pf, pp, pr)) = prev {
            if pf {
                assert!(cur.0 && cur.1 >= pp - 1e-9);
            } else if !cur.0 {
                assert!(cur.2 <= pr);
            }
        }
        prev = Some(cur);
    }
}
