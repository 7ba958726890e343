//! Seeded multistart search over triangular beam-splitter networks.
//!
//! A network on `N` modes is parameterized by `N(N−1)/2` mixing angles,
//! `N(N−1)/2` internal phases and `N` input phases (see
//! [`ParameterVector`]). Each restart draws a starting point from its own
//! counter-based stream, runs Nelder–Mead on the constraint residual, then
//! re-optimizes `−p + 10⁸·residual` from there. Results are merged in
//! restart order, so the outcome is independent of scheduling.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::conditioning::{fock_lift_amplitude, AncillaSpec, DetectionSpec};
use crate::error::{Error, Result};
use crate::float::{polar, wrap_phase, ComplexExt, Float, PI};
use crate::fock::FockBasis;
use crate::interferometer::{
    self, BeamSplitterParams, Element, ModeUnitary, NetworkDescription, PhaseShifterParams,
};
use crate::linalg::{self, C64, ZERO};
use crate::rng;

/// Residual below which a point counts as satisfying the constraints.
pub const FEASIBLE: f64 = 1e-10;
/// Best residual above which the search reports infeasibility.
pub const INFEASIBLE: f64 = 1e-6;
/// Penalty multiplying the residual while maximizing probability.
pub const PENALTY: f64 = 1e8;
/// Probabilities closer than this are treated as equal when ranking.
const PROB_TIE: f64 = 1e-12;

/// Neighbouring-mode pairs in the order the template applies them.
pub fn template_pairs(n: usize) -> Vec<(usize, usize)> {
    let mut elim = Vec::new();
    for c in 0..n.saturating_sub(1) {
        for r in (c + 1..n).rev() {
            elim.push((r - 1, r));
        }
    }
    elim.reverse();
    elim
}

/// Parameters of the triangular template: input phases, then beam splitters
/// `T = cosθ e^{iφ}`, `R = sinθ` on the pairs of [`template_pairs`]. Values
/// are stored wrapped to `[0, 2π)`; the angle range `[0, π/2]` is restored
/// when the network is built.
#[derive(Clone, Debug, PartialEq)]
pub struct ParameterVector {
    modes: usize,
    pub angles: Vec<f64>,
    pub phases: Vec<f64>,
    pub diagonal: Vec<f64>,
}

impl ParameterVector {
    pub fn dimension(modes: usize) -> usize {
        modes * modes
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn from_flat(modes: usize, x: &[f64]) -> Result<Self> {
        let k = modes * modes.saturating_sub(1) / 2;
        if x.len() != 2 * k + modes {
            return Err(Error::DimensionMismatch {
                expected: 2 * k + modes,
                found: x.len(),
            });
        }
        Ok(ParameterVector {
            modes,
            angles: x[..k].iter().map(|&v| wrap_phase(v)).collect(),
            phases: x[k..2 * k].iter().map(|&v| wrap_phase(v)).collect(),
            diagonal: x[2 * k..].iter().map(|&v| wrap_phase(v)).collect(),
        })
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = self.angles.clone();
        v.extend_from_slice(&self.phases);
        v.extend_from_slice(&self.diagonal);
        v
    }

    pub fn to_network(&self) -> Result<NetworkDescription> {
        let mut net = NetworkDescription::new(self.modes);
        for (m, &a) in self.diagonal.iter().enumerate() {
            net.push(Element::Phase(PhaseShifterParams { mode: m, angle: a }))?;
        }
        for (k, (a, b)) in template_pairs(self.modes).into_iter().enumerate() {
            net.push(Element::BeamSplitter(BeamSplitterParams::new(
                a,
                b,
                self.angles[k],
                self.phases[k],
                0.0,
            )?))?;
        }
        Ok(net)
    }

    pub fn to_unitary(&self) -> Result<ModeUnitary> {
        interferometer::compose(&self.to_network()?)
    }
}

/// One required input→output relation of the conditional operator.
#[derive(Clone, Debug, PartialEq)]
pub struct TargetConstraint {
    /// Signal occupation fed in.
    pub input: Vec<u32>,
    /// Desired output amplitudes (normalized internally).
    pub output: Vec<(Vec<u32>, C64)>,
    /// Allow this constraint its own phase instead of the common one.
    pub phase_free: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Objective {
    pub signal_modes: Vec<usize>,
    pub ancilla: AncillaSpec,
    pub detection: DetectionSpec,
    pub constraints: Vec<TargetConstraint>,
    /// Weight of the success-probability reward; zero stops after the
    /// feasibility phase.
    pub probability_weight: f64,
}

impl Objective {
    /// Single signal mode (mode 0), diagonal target `|n⟩ ↦ targets[n]|n⟩`.
    pub fn single_mode_diagonal(ancilla: &[u32], detection: &[u32], targets: &[C64]) -> Self {
        Objective {
            signal_modes: vec![0],
            ancilla: AncillaSpec(ancilla.to_vec()),
            detection: DetectionSpec(detection.to_vec()),
            constraints: targets
                .iter()
                .enumerate()
                .map(|(n, &t)| TargetConstraint {
                    input: vec![n as u32],
                    output: vec![(vec![n as u32], t)],
                    phase_free: false,
                })
                .collect(),
            probability_weight: 1.0,
        }
    }

    /// Total number of modes the objective refers to.
    pub fn modes(&self) -> usize {
        self.signal_modes.len() + self.ancilla.0.len()
    }
}

struct PreparedConstraint {
    full_in: Vec<u32>,
    outputs: Vec<Vec<u32>>,
    target: Vec<C64>,
    phase_free: bool,
}

/// Objective with the output sectors enumerated once.
pub struct PreparedObjective {
    constraints: Vec<PreparedConstraint>,
}

impl PreparedObjective {
    pub fn new(objective: &Objective, modes: usize) -> Result<Self> {
        if objective.constraints.is_empty() {
            return Err(Error::InvalidParameter(
                "objective has no constraints".into(),
            ));
        }
        if objective.modes() != modes {
            return Err(Error::InvalidPartition(format!(
                "objective covers {} modes, template has {modes}",
                objective.modes()
            )));
        }
        let sig = &objective.signal_modes;
        let aux_modes: Vec<usize> = (0..modes).filter(|m| !sig.contains(m)).collect();
        if aux_modes.len() != objective.ancilla.0.len()
            || aux_modes.len() != objective.detection.0.len()
        {
            return Err(Error::InvalidPartition(
                "ancilla/detection length mismatch".into(),
            ));
        }
        let gain =
            i64::from(objective.ancilla.photons()) - i64::from(objective.detection.photons());
        let mut out = Vec::new();
        for c in &objective.constraints {
            if c.input.len() != sig.len() {
                return Err(Error::DimensionMismatch {
                    expected: sig.len(),
                    found: c.input.len(),
                });
            }
            let tout = i64::from(c.input.iter().sum::<u32>()) + gain;
            if tout < 0 {
                return Err(Error::InvalidParameter(
                    "constraint input too small for detection".into(),
                ));
            }
            let sector = FockBasis::fixed_total(sig.len(), tout as u32)?;
            let mut full_in = vec![0u32; modes];
            for (k, &s) in sig.iter().enumerate() {
                full_in[s] = c.input[k];
            }
            for (k, &a) in aux_modes.iter().enumerate() {
                full_in[a] = objective.ancilla.0[k];
            }
            let mut outputs = Vec::with_capacity(sector.dim());
            for so in sector.states() {
                let mut full_out = vec![0u32; modes];
                for (k, &s) in sig.iter().enumerate() {
                    full_out[s] = so[k];
                }
                for (k, &a) in aux_modes.iter().enumerate() {
                    full_out[a] = objective.detection.0[k];
                }
                outputs.push(full_out);
            }
            let mut target = vec![ZERO; sector.dim()];
            for (occ, amp) in &c.output {
                let idx = sector.index_of(occ).ok_or_else(|| {
                    Error::InvalidParameter(format!(
                        "target {occ:?} violates photon-number balance"
                    ))
                })?;
                target[idx] += amp;
            }
            let nrm = Float::sqrt(linalg::norm_sqr(&target));
            if nrm == 0.0 {
                return Err(Error::InvalidParameter("zero target vector".into()));
            }
            for t in &mut target {
                *t /= nrm;
            }
            out.push(PreparedConstraint {
                full_in,
                outputs,
                target,
                phase_free: c.phase_free,
            });
        }
        Ok(PreparedObjective { constraints: out })
    }

    /// Returns `(residual, probability, scale)` for a unitary.
    pub fn evaluate(&self, u: &ModeUnitary) -> Result<(f64, f64, C64)> {
        let mut fixed = ZERO;
        let mut free = 0.0;
        let mut total = 0.0;
        let mut weight = 0.0;
        for c in &self.constraints {
            let mut ty = ZERO;
            for (o, t) in c.outputs.iter().zip(&c.target) {
                let y = fock_lift_amplitude(u, &c.full_in, o)?;
                total += y.norm_sqr();
                ty += t.conj() * y;
            }
            weight += 1.0;
            if c.phase_free {
                free += ty.modulus();
            } else {
                fixed += ty;
            }
        }
        // min over c = ρ e^{iα} of Σ‖y_k − c z_k t_k‖² with unit targets
        let rho = (fixed.modulus() + free) / weight;
        let value = total - 2.0 * rho * (fixed.modulus() + free) + rho * rho * weight;
        let residual = if total > 0.0 {
            (value / total).max(0.0)
        } else {
            1.0
        };
        let alpha = if fixed.modulus() > 0.0 {
            fixed.phase()
        } else {
            0.0
        };
        Ok((residual, rho * rho, polar(rho, alpha)))
    }
}

/// Global-phase-invariant residual of the network described by `params`.
pub fn constraint_residual(params: &ParameterVector, objective: &Objective) -> Result<f64> {
    let prep = PreparedObjective::new(objective, params.modes())?;
    Ok(prep.evaluate(&params.to_unitary()?)?.0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimizationResult {
    pub params: ParameterVector,
    pub residual: f64,
    pub success_probability: f64,
    /// Fitted common amplitude `c` of the target.
    pub scale: C64,
    pub restart: usize,
    /// Function evaluations summed over all restarts.
    pub evaluations: usize,
}

impl OptimizationResult {
    pub fn unitary(&self) -> Result<ModeUnitary> {
        self.params.to_unitary()
    }

    pub fn feasible(&self) -> bool {
        self.residual < FEASIBLE
    }
}

const POLISH_STEP: f64 = 1e-6;
const POLISH_DRIFT: f64 = 1e-6;

/// Whether `a` should replace the incumbent `b`.
fn better(a: &OptimizationResult, b: &OptimizationResult) -> bool {
    match (a.feasible(), b.feasible()) {
        (true, false) => true,
        (false, true) => false,
        (true, true) => {
            if a.success_probability > b.success_probability + PROB_TIE {
                true
            } else if a.success_probability + PROB_TIE < b.success_probability {
                false
            } else {
                a.residual < b.residual
            }
        }
        (false, false) => a.residual < b.residual,
    }
}

/// Nelder–Mead settings.
#[derive(Clone, Copy, Debug)]
pub struct NelderMead {
    pub step: f64,
    pub max_evals: usize,
    pub diameter_tol: f64,
}

impl Default for NelderMead {
    fn default() -> Self {
        NelderMead {
            step: 0.1,
            max_evals: 20_000,
            diameter_tol: 1e-12,
        }
    }
}

impl NelderMead {
    /// Minimizes `f` from `x0`; returns `(x, f(x), evaluations)`.
    pub fn minimize(&self, f: &mut dyn FnMut(&[f64]) -> f64, x0: &[f64]) -> (Vec<f64>, f64, usize) {
        let n = x0.len();
        let mut evals = 0usize;
        let mut eval = |x: &[f64], evals: &mut usize| {
            *evals += 1;
            let v = f(x);
            if v.is_nan() {
                f64::INFINITY
            } else {
                v
            }
        };
        let mut pts: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
        pts.push(x0.to_vec());
        for i in 0..n {
            let mut p = x0.to_vec();
            p[i] += self.step;
            pts.push(p);
        }
        let mut vals: Vec<f64> = pts.iter().map(|p| eval(p, &mut evals)).collect();
        loop {
            // order vertices: best first; stable on ties
            let mut idx: Vec<usize> = (0..=n).collect();
            idx.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
            pts = idx.iter().map(|&i| pts[i].clone()).collect();
            vals = idx.iter().map(|&i| vals[i]).collect();
            let diameter = pts[1..]
                .iter()
                .map(|p| {
                    p.iter()
                        .zip(&pts[0])
                        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
                })
                .fold(0.0f64, f64::max);
            if diameter < self.diameter_tol || evals >= self.max_evals {
                break;
            }
            let mut centroid = vec![0.0; n];
            for p in &pts[..n] {
                for (c, v) in centroid.iter_mut().zip(p) {
                    *c += v / n as f64;
                }
            }
            let worst = pts[n].clone();
            let along = |t: f64| -> Vec<f64> {
                centroid
                    .iter()
                    .zip(&worst)
                    .map(|(c, w)| c + t * (c - w))
                    .collect()
            };
            let xr = along(1.0);
            let fr = eval(&xr, &mut evals);
            if fr < vals[0] {
                let xe = along(2.0);
                let fe = eval(&xe, &mut evals);
                if fe < fr {
                    pts[n] = xe;
                    vals[n] = fe;
                } else {
                    pts[n] = xr;
                    vals[n] = fr;
                }
                continue;
            }
            if fr < vals[n - 1] {
                pts[n] = xr;
                vals[n] = fr;
                continue;
            }
            let (xc, fc) = if fr < vals[n] {
                let xc = along(0.5);
                let fc = eval(&xc, &mut evals);
                (xc, fc)
            } else {
                let xc = along(-0.5);
                let fc = eval(&xc, &mut evals);
                (xc, fc)
            };
            if fc < vals[n].min(fr) {
                pts[n] = xc;
                vals[n] = fc;
                continue;
            }
            // shrink towards the best vertex
            for i in 1..=n {
                let p: Vec<f64> = pts[i]
                    .iter()
                    .zip(&pts[0])
                    .map(|(x, b)| b + 0.5 * (x - b))
                    .collect();
                vals[i] = eval(&p, &mut evals);
                pts[i] = p;
            }
        }
        let mut best = 0;
        for i in 1..vals.len() {
            if vals[i] < vals[best] {
                best = i;
            }
        }
        (pts[best].clone(), vals[best], evals)
    }
}

/// Evaluates `(residual, probability, scale)` of a unitary.
pub type Evaluator<'a> = dyn Fn(&ModeUnitary) -> Result<(f64, f64, C64)> + Sync + 'a;

fn run_restart(
    modes: usize,
    seed: u64,
    restart: usize,
    weight: f64,
    nm: &NelderMead,
    eval: &Evaluator<'_>,
) -> Result<OptimizationResult> {
    let k = modes * modes.saturating_sub(1) / 2;
    let mut r = rng::stream_rng(seed, restart as u64);
    let mut x0 = Vec::with_capacity(2 * k + modes);
    for _ in 0..k {
        x0.push(rng::uniform_range(&mut r, 0.0, PI / 2.0));
    }
    for _ in 0..k + modes {
        x0.push(rng::uniform_range(&mut r, 0.0, 2.0 * PI));
    }
    let score = |x: &[f64]| -> Result<(f64, f64, C64)> {
        let p = ParameterVector::from_flat(modes, x)?;
        eval(&p.to_unitary()?)
    };
    let mut f1 = |x: &[f64]| score(x).map_or(f64::INFINITY, |v| v.0);
    let (x1, _, e1) = nm.minimize(&mut f1, &x0);
    let (r1, p1, s1) = score(&x1)?;
    let mut best = OptimizationResult {
        params: ParameterVector::from_flat(modes, &x1)?,
        residual: r1,
        success_probability: p1,
        scale: s1,
        restart,
        evaluations: e1 + 1,
    };
    if weight > 0.0 {
        let mut f2 =
            |x: &[f64]| score(x).map_or(f64::INFINITY, |(res, p, _)| -weight * p + PENALTY * res);
        let (x2, _, e2) = nm.minimize(&mut f2, &x1);
        let (r2, p2, s2) = score(&x2)?;
        best.evaluations += e2 + 1;
        let cand = OptimizationResult {
            params: ParameterVector::from_flat(modes, &x2)?,
            residual: r2,
            success_probability: p2,
            scale: s2,
            restart,
            evaluations: best.evaluations,
        };
        if better(&cand, &best) {
            best = cand;
        }
        // feasibility polish: the penalized optimum sits a hair off the manifold
        let fine = NelderMead {
            step: POLISH_STEP,
            ..*nm
        };
        let x3 = best.params.to_flat();
        let (x4, _, e4) = fine.minimize(&mut f1, &x3);
        let (r4, p4, s4) = score(&x4)?;
        best.evaluations += e4 + 1;
        if r4 < best.residual && (p4 - best.success_probability).abs() < POLISH_DRIFT {
            best.params = ParameterVector::from_flat(modes, &x4)?;
            best.residual = r4;
            best.success_probability = p4;
            best.scale = s4;
        }
    }
    Ok(best)
}

/// Multistart search with a caller-supplied evaluator. Restart `k` is
/// seeded from stream `k` of `seed`.
pub fn optimize_with(
    modes: usize,
    seed: u64,
    restarts: usize,
    probability_weight: f64,
    eval: &Evaluator<'_>,
) -> Result<OptimizationResult> {
    if restarts == 0 {
        return Err(Error::InvalidParameter(
            "at least one restart is required".into(),
        ));
    }
    if modes == 0 {
        return Err(Error::InvalidParameter(
            "template needs at least one mode".into(),
        ));
    }
    let nm = NelderMead::default();
    #[cfg(feature = "parallel")]
    let runs: Vec<OptimizationResult> = {
        use rayon::prelude::*;
        (0..restarts)
            .into_par_iter()
            .map(|k| run_restart(modes, seed, k, probability_weight, &nm, eval))
            .collect::<Result<Vec<_>>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let runs: Vec<OptimizationResult> = (0..restarts)
        .map(|k| run_restart(modes, seed, k, probability_weight, &nm, eval))
        .collect::<Result<Vec<_>>>()?;

    let total: usize = runs.iter().map(|r| r.evaluations).sum();
    let mut best = runs[0].clone();
    for r in &runs[1..] {
        if better(r, &best) {
            best = r.clone();
        }
    }
    best.evaluations = total;
    if best.residual >= INFEASIBLE {
        return Err(Error::Infeasible {
            residual: best.residual,
            restarts,
        });
    }
    Ok(best)
}

/// Searches `template_modes`-mode networks for the objective.
pub fn optimize_gate(
    objective: &Objective,
    template_modes: usize,
    seed: u64,
    restarts: usize,
) -> Result<OptimizationResult> {
    let prep = PreparedObjective::new(objective, template_modes)?;
    optimize_with(
        template_modes,
        seed,
        restarts,
        objective.probability_weight,
        &|u: &ModeUnitary| prep.evaluate(u),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ONE;

    fn identity_objective() -> Objective {
        Objective::single_mode_diagonal(&[0], &[0], &[ONE, ONE, ONE])
    }

    #[test]
    fn template_shape() {
        assert_eq!(template_pairs(3), vec![(1, 2), (0, 1), (1, 2)]);
        assert_eq!(ParameterVector::dimension(4), 16);
        let x: Vec<f64> = (0..16).map(|k| 0.1 * k as f64).collect();
        let p = ParameterVector::from_flat(4, &x).unwrap();
        assert_eq!(p.to_network().unwrap().beam_splitter_count(), 6);
    }

    #[test]
    fn template_reaches_random_unitary() {
        let target = crate::interferometer::random_unitary(3, 21).unwrap();
        let nm = NelderMead::default();
        let mut best = f64::INFINITY;
        for s in 0..8 {
            let mut r = rng::stream_rng(99, s);
            let x0: Vec<f64> = (0..9)
                .map(|_| rng::uniform_range(&mut r, 0.0, 2.0 * PI))
                .collect();
            let mut f = |x: &[f64]| {
                let u = ParameterVector::from_flat(3, x)
                    .unwrap()
                    .to_unitary()
                    .unwrap();
                let d = u.matrix().sub(target.matrix()).frobenius();
                d * d
            };
            let (_, fx, _) = nm.minimize(&mut f, &x0);
            best = best.min(fx);
        }
        assert!(best < 1e-18, "{best}");
    }

    #[test]
    fn identity_network_has_zero_residual() {
        let p = ParameterVector::from_flat(2, &[0.0; 4]).unwrap();
        assert!(constraint_residual(&p, &identity_objective()).unwrap() < 1e-15);
    }

    #[test]
    fn nss_residual_positive_at_random_point() {
        let obj = Objective::single_mode_diagonal(&[1, 0], &[1, 0], &[ONE, ONE, -ONE]);
        let x: Vec<f64> = (0..9).map(|k| 0.3 + 0.17 * k as f64).collect();
        let p = ParameterVector::from_flat(3, &x).unwrap();
        assert!(constraint_residual(&p, &obj).unwrap() > 1e-3);
    }

    #[test]
    fn phase_free_residual_ignores_common_phase() {
        let mut obj = Objective::single_mode_diagonal(&[1], &[1], &[ONE, ONE]);
        for c in &mut obj.constraints {
            c.phase_free = true;
        }
        let mut rotated = obj.clone();
        for c in &mut rotated.constraints {
            for o in &mut c.output {
                o.1 *= crate::linalg::cis(0.8);
            }
        }
        let p = ParameterVector::from_flat(2, &[0.4, 1.0, 0.2, -0.3]).unwrap();
        let a = constraint_residual(&p, &obj).unwrap();
        let b = constraint_residual(&p, &rotated).unwrap();
        assert!((a - b).abs() < 1e-15);
    }

    #[test]
    fn nelder_mead_quadratic() {
        let nm = NelderMead::default();
        let mut f = |x: &[f64]| (x[0] - 1.0).powi(2) + 10.0 * (x[1] + 2.0).powi(2);
        let (x, fx, _) = nm.minimize(&mut f, &[0.0, 0.0]);
        assert!(fx < 1e-20);
        assert!((x[0] - 1.0).abs() < 1e-10 && (x[1] + 2.0).abs() < 1e-10);
    }

    #[test]
    fn identity_objective_solved() {
        let r = optimize_gate(&identity_objective(), 2, 3, 4).unwrap();
        assert!(r.residual < 1e-12);
        assert!((r.success_probability - 1.0).abs() < 1e-9);
        let again = optimize_gate(&identity_objective(), 2, 3, 4).unwrap();
        assert_eq!(r, again);
    }
}
