//! Evolution of a circuit's input through its elements and detectors.

use std::sync::Arc;

use fockforge_core::conditioning::{apply_unitary, project_modes};
use fockforge_core::float::Float;
use fockforge_core::fock::{FockBasis, FockOperator, MixedState, PureState};
use fockforge_core::interferometer::{
    bs_matrix, compose, BeamSplitterParams, ModeUnitary, NetworkDescription,
};
use fockforge_core::linalg::{CMatrix, C64};
use fockforge_core::lossy::{lossy_bs_channel_on, povm_weight, LossyBSParams};
use fockforge_core::{Error, Result};

use crate::circuit::{CircuitElement, CircuitFile, InputSpec};

/// Largest basis the pure-state route will allocate.
pub const MAX_PURE_DIM: usize = 200_000;
/// Largest basis the density-matrix route will allocate.
pub const MAX_MIXED_DIM: usize = 2_000;

const TAIL: f64 = 1e-12;

fn basis_dim(modes: usize, cutoff: u32) -> usize {
    // C(modes + cutoff, modes), saturating
    let mut d: u128 = 1;
    for k in 1..=modes as u128 {
        d = d * (cutoff as u128 + k) / k;
        if d > usize::MAX as u128 {
            return usize::MAX;
        }
    }
    d as usize
}

fn coherent_levels(alpha2: f64) -> u32 {
    // Poisson tail below TAIL
    let mut p = Float::exp(-alpha2);
    let mut acc = p;
    let mut n = 0u32;
    while 1.0 - acc > TAIL && n < 100_000 {
        n += 1;
        p *= alpha2 / f64::from(n);
        acc += p;
    }
    n
}

fn tmsv_levels(q: f64) -> u32 {
    let mut n = 0;
    let mut tail = q * q;
    while tail > TAIL && n < 100_000 {
        n += 1;
        tail *= q * q;
    }
    n
}

/// Fock photons plus enough headroom for the Gaussian inputs to lose less
/// than 1e−12 of their norm each.
pub fn default_cutoff(c: &CircuitFile) -> u32 {
    c.inputs
        .iter()
        .map(|i| match *i {
            InputSpec::Fock { photons, .. } => photons,
            InputSpec::Coherent { re, im, .. } => coherent_levels(re * re + im * im),
            InputSpec::Tmsv { q, .. } => 2 * tmsv_levels(q),
        })
        .sum()
}

fn single_mode_amplitude(spec: &InputSpec, n: u32) -> C64 {
    match *spec {
        InputSpec::Fock { photons, .. } => C64::new(if n == photons { 1.0 } else { 0.0 }, 0.0),
        InputSpec::Coherent { re, im, .. } => {
            let alpha = C64::new(re, im);
            let mut a = C64::new(Float::exp(-alpha.norm_sqr() / 2.0), 0.0);
            for k in 1..=n {
                a *= alpha / Float::sqrt(f64::from(k));
            }
            a
        }
        InputSpec::Tmsv { .. } => unreachable!(),
    }
}

/// Product input state on `MaxTotal(cutoff)`; components beyond the cutoff
/// are dropped, not renormalized.
pub fn input_state(c: &CircuitFile, cutoff: u32) -> Result<PureState> {
    let dim = basis_dim(c.modes, cutoff);
    if dim > MAX_PURE_DIM {
        return Err(Error::DimensionTooLarge {
            n: dim,
            max: MAX_PURE_DIM,
        });
    }
    let basis = FockBasis::max_total(c.modes, cutoff)?;
    let amps = basis
        .states()
        .iter()
        .map(|occ| {
            let mut a = C64::new(1.0, 0.0);
            for m in 0..c.modes {
                match c.input_on(m) {
                    None if occ[m] != 0 => return C64::new(0.0, 0.0),
                    None => {}
                    Some(InputSpec::Tmsv { modes, q }) => {
                        if m == modes.0 {
                            let (i, j) = (occ[modes.0], occ[modes.1]);
                            if i != j {
                                return C64::new(0.0, 0.0);
                            }
                            a *= Float::sqrt(1.0 - q * q) * Float::powi(*q, i as i32);
                        }
                    }
                    Some(spec) => a *= single_mode_amplitude(spec, occ[m]),
                }
            }
            a
        })
        .collect();
    PureState::new(basis, amps)
}

#[derive(Clone, Debug)]
pub enum Outcome {
    Pure(PureState),
    Mixed(MixedState),
    /// Every mode was detected.
    Empty,
}

#[derive(Clone, Debug)]
pub struct Simulation {
    pub cutoff: u32,
    pub outcome: Outcome,
    /// Undetected modes, in order.
    pub remaining: Vec<usize>,
    /// `1 − ‖input‖²` after truncation.
    pub truncation_loss: f64,
    /// Probability of the detection record.
    pub probability: f64,
}

fn lift(u: &ModeUnitary, basis: &Arc<FockBasis>) -> Result<FockOperator> {
    let d = basis.dim();
    let mut m = CMatrix::zeros(d, d);
    for j in 0..d {
        let col = apply_unitary(u, &PureState::basis_state(basis.clone(), basis.state(j))?)?;
        for (s, a) in col.basis().states().iter().zip(col.amplitudes()) {
            if *a != C64::new(0.0, 0.0) {
                let i = basis.index_of(s).ok_or(Error::PolicyMismatch)?;
                m[(i, j)] = *a;
            }
        }
    }
    FockOperator::new(basis.clone(), m)
}

/// `T = √(1 − |A|²)` times the splitter block, `A = |A|·I`.
pub fn lossy_params(theta: f64, phase_t: f64, phase_r: f64, abs: f64) -> Result<LossyBSParams> {
    let bs = bs_matrix(&BeamSplitterParams::new(0, 1, theta, phase_t, phase_r)?, 2)?;
    let s = Float::sqrt(1.0 - abs * abs);
    LossyBSParams::new(
        bs.matrix().scale(C64::new(s, 0.0)),
        CMatrix::identity(2).scale(C64::new(abs, 0.0)),
    )
}

pub fn simulate(c: &CircuitFile, cutoff: u32) -> Result<Simulation> {
    let psi = input_state(c, cutoff)?;
    let truncation_loss = (1.0 - psi.norm_sqr()).max(0.0);
    let mut det: Vec<_> = c.detections.clone();
    det.sort_by_key(|d| d.mode);
    let remaining: Vec<usize> = (0..c.modes)
        .filter(|m| c.detection_on(*m).is_none())
        .collect();

    if !c.is_lossy() {
        let net = c.network().ok_or(Error::InvalidParameter(
            "lossy element in lossless route".into(),
        ))?;
        let out = apply_unitary(&compose(&net)?, &psi)?;
        let modes: Vec<usize> = det.iter().map(|d| d.mode).collect();
        let outcome: Vec<u32> = det.iter().map(|d| d.photons).collect();
        if remaining.is_empty() {
            let p = out.amplitude(&outcome).norm_sqr();
            return Ok(Simulation {
                cutoff,
                outcome: Outcome::Empty,
                remaining,
                truncation_loss,
                probability: p,
            });
        }
        let state = if modes.is_empty() {
            out
        } else {
            project_modes(&out, &modes, &outcome)?
        };
        return Ok(Simulation {
            cutoff,
            probability: state.norm_sqr(),
            outcome: Outcome::Pure(state),
            remaining,
            truncation_loss,
        });
    }

    let dim = basis_dim(c.modes, cutoff);
    if dim > MAX_MIXED_DIM {
        return Err(Error::DimensionTooLarge {
            n: dim,
            max: MAX_MIXED_DIM,
        });
    }
    let basis = psi.basis().clone();
    let mut rho = psi.to_mixed();
    let mut pending = NetworkDescription::new(c.modes);
    let flush = |pending: &mut NetworkDescription, rho: &mut MixedState| -> Result<()> {
        if !pending.elements().is_empty() {
            *rho = lift(&compose(pending)?, &basis)?.conjugate(rho)?;
            *pending = NetworkDescription::new(c.modes);
        }
        Ok(())
    };
    for e in &c.elements {
        match *e {
            CircuitElement::Bs {
                a,
                b,
                theta,
                phase_t,
                phase_r,
            } => pending.push_bs(a, b, theta, phase_t, phase_r)?,
            CircuitElement::Phase { mode, angle } => pending.push_phase(mode, angle)?,
            CircuitElement::LossyBs {
                a,
                b,
                theta,
                phase_t,
                phase_r,
                abs,
            } => {
                flush(&mut pending, &mut rho)?;
                let params = lossy_params(theta, phase_t, phase_r, abs)?;
                rho = lossy_bs_channel_on(&params, a, b, c.modes, cutoff)?.apply(&rho)?;
            }
        }
    }
    flush(&mut pending, &mut rho)?;

    // highest mode first so lower indices stay put
    for d in det.iter().rev() {
        if rho.basis().modes() == 1 {
            let p: f64 = rho
                .basis()
                .states()
                .iter()
                .enumerate()
                .map(|(i, s)| {
                    rho.matrix()[(i, i)].re * povm_weight(s[0], d.photons, d.efficiency())
                })
                .sum();
            return Ok(Simulation {
                cutoff,
                outcome: Outcome::Empty,
                remaining,
                truncation_loss,
                probability: p,
            });
        }
        rho = fockforge_core::lossy::condition_on_count(&rho, d.mode, d.photons, d.efficiency())?;
    }
    Ok(Simulation {
        cutoff,
        probability: rho.trace(),
        outcome: Outcome::Mixed(rho),
        remaining,
        truncation_loss,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::parse_circuit;
    use fockforge_core::float::ComplexExt;

    #[test]
    fn dimension_formula() {
        assert_eq!(basis_dim(3, 2), FockBasis::max_total(3, 2).unwrap().dim());
        assert_eq!(basis_dim(1, 7), 8);
    }

    #[test]
    fn hong_ou_mandel_dip() {
        let c = parse_circuit(
            "modes 2\ninput fock 0 1\ninput fock 1 1\nbs 0 1 0.7853981633974483 0 0\n",
        )
        .unwrap();
        let s = simulate(&c, 2).unwrap();
        let Outcome::Pure(st) = s.outcome else {
            panic!()
        };
        assert!(st.amplitude(&[1, 1]).modulus() < 1e-15);
        assert!((st.amplitude(&[2, 0]).norm_sqr() - 0.5).abs() < 1e-14);
    }

    #[test]
    fn mixed_route_matches_pure_route() {
        let lossless = "modes 3\ninput fock 0 1\ninput coherent 1 0.3 0.2\ninput fock 2 1\n\
                        bs 0 1 0.4 0.1 0.2\nphase 1 0.7\nbs 1 2 1.1 0 0.3\ndetect fock 2 1\n";
        let lossy = "modes 3\ninput fock 0 1\ninput coherent 1 0.3 0.2\ninput fock 2 1\n\
                     bs 0 1 0.4 0.1 0.2\nphase 1 0.7\nlossybs 1 2 1.1 0 0.3 0\ndetect fock 2 1 1\n";
        let a = simulate(&parse_circuit(lossless).unwrap(), 6).unwrap();
        let b = simulate(&parse_circuit(lossy).unwrap(), 6).unwrap();
        let (Outcome::Pure(psi), Outcome::Mixed(rho)) = (a.outcome, b.outcome) else {
            panic!()
        };
        let want = psi.embed(rho.basis().clone(), 0.0).unwrap().to_mixed();
        assert!(want.matrix().sub(rho.matrix()).max_abs() < 1e-12);
        assert!((a.probability - b.probability).abs() < 1e-12);
    }

    #[test]
    fn coherent_input_keeps_norm() {
        let c = parse_circuit("modes 2\ninput coherent 0 1.5 -0.5\nbs 0 1 0.3 0 0\n").unwrap();
        let s = simulate(&c, default_cutoff(&c)).unwrap();
        assert!(s.truncation_loss < 1e-11);
        assert!((s.probability - 1.0).abs() < 1e-11);
    }

    #[test]
    fn absorption_only_loses_probability() {
        let c = parse_circuit("modes 2\ninput fock 0 1\nlossybs 0 1 0.3 0 0 0.6\n").unwrap();
        let s = simulate(&c, 1).unwrap();
        assert!((s.probability - 1.0).abs() < 1e-12);
        let Outcome::Mixed(rho) = s.outcome else {
            panic!()
        };
        let vac = rho.basis().index_of(&[0, 0]).unwrap();
        assert!((rho.matrix()[(vac, vac)].re - 0.36).abs() < 1e-12);
    }
}
