//! Mode-level unitaries and beam-splitter networks.
//!
//! A [`ModeUnitary`] `Λ` acts on the column of annihilation operators,
//! `b = Λ a`. On states this means `a_j† ↦ Σ_l Λ_{lj} a_l†`. A
//! [`NetworkDescription`] lists elements in the order light meets them, so
//! the composed unitary is `Λ_k ⋯ Λ_2 Λ_1`.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::float::{wrap_phase, ComplexExt, Float, PI};
use crate::linalg::{self, cis, CMatrix, C64, ZERO};
use crate::rng;

/// Tolerance for accepting an externally supplied matrix as unitary.
pub const UNITARITY_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BeamSplitterParams {
    pub mode_a: usize,
    pub mode_b: usize,
    pub theta: f64,
    pub phase_t: f64,
    pub phase_r: f64,
}

impl BeamSplitterParams {
    /// Builds the element `T = cosθ e^{iφ_t}`, `R = sinθ e^{iφ_r}`. Any real
    /// `θ` is accepted and brought into `[0, π/2]` by moving signs into the
    /// phases, which leaves `T` and `R` unchanged.
    pub fn new(
        mode_a: usize,
        mode_b: usize,
        theta: f64,
        phase_t: f64,
        phase_r: f64,
    ) -> Result<Self> {
        if mode_a == mode_b {
            return Err(Error::InvalidParameter(format!(
                "beam splitter needs two distinct modes, got {mode_a} twice"
            )));
        }
        if !(theta.is_finite() && phase_t.is_finite() && phase_r.is_finite()) {
            return Err(Error::InvalidParameter(
                "non-finite beam-splitter parameter".into(),
            ));
        }
        let (s, c) = Float::sin_cos(theta);
        let mut pt = phase_t;
        let mut pr = phase_r;
        if c < 0.0 {
            pt += PI;
        }
        if s < 0.0 {
            pr += PI;
        }
        Ok(BeamSplitterParams {
            mode_a,
            mode_b,
            theta: Float::atan2(s.abs(), c.abs()),
            phase_t: wrap_phase(pt),
            phase_r: wrap_phase(pr),
        })
    }

    pub fn transmission(&self) -> C64 {
        cis(self.phase_t) * Float::cos(self.theta)
    }

    pub fn reflection(&self) -> C64 {
        cis(self.phase_r) * Float::sin(self.theta)
    }

    /// The element undoing this one.
    pub fn inverse(&self) -> Self {
        // [[T, R], [-R*, T*]]^† has T' = T*, R' = -R
        BeamSplitterParams {
            mode_a: self.mode_a,
            mode_b: self.mode_b,
            theta: self.theta,
            phase_t: wrap_phase(-self.phase_t),
            phase_r: wrap_phase(self.phase_r + PI),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhaseShifterParams {
    pub mode: usize,
    pub angle: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Element {
    BeamSplitter(BeamSplitterParams),
    Phase(PhaseShifterParams),
}

impl Element {
    fn max_mode(&self) -> usize {
        match self {
            Element::BeamSplitter(b) => b.mode_a.max(b.mode_b),
            Element::Phase(p) => p.mode,
        }
    }

    fn remap(&self, map: &[usize]) -> Element {
        match *self {
            Element::BeamSplitter(b) => Element::BeamSplitter(BeamSplitterParams {
                mode_a: map[b.mode_a],
                mode_b: map[b.mode_b],
                ..b
            }),
            Element::Phase(p) => Element::Phase(PhaseShifterParams {
                mode: map[p.mode],
                angle: p.angle,
            }),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct NetworkDescription {
    modes: usize,
    elements: Vec<Element>,
}

impl NetworkDescription {
    pub fn new(modes: usize) -> Self {
        NetworkDescription {
            modes,
            elements: Vec::new(),
        }
    }

    pub fn from_elements(modes: usize, elements: Vec<Element>) -> Result<Self> {
        let net = NetworkDescription { modes, elements };
        net.validate()?;
        Ok(net)
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    pub fn beam_splitter_count(&self) -> usize {
        self.elements
            .iter()
            .filter(|e| matches!(e, Element::BeamSplitter(_)))
            .count()
    }

    pub fn push(&mut self, element: Element) -> Result<()> {
        if element.max_mode() >= self.modes {
            return Err(Error::ModeOutOfRange {
                mode: element.max_mode(),
                modes: self.modes,
            });
        }
        self.elements.push(element);
        Ok(())
    }

    pub fn push_bs(
        &mut self,
        a: usize,
        b: usize,
        theta: f64,
        phase_t: f64,
        phase_r: f64,
    ) -> Result<()> {
        self.push(Element::BeamSplitter(BeamSplitterParams::new(
            a, b, theta, phase_t, phase_r,
        )?))
    }

    pub fn push_phase(&mut self, mode: usize, angle: f64) -> Result<()> {
        self.push(Element::Phase(PhaseShifterParams { mode, angle }))
    }

    /// Appends `other` (same mode count) after this network.
    pub fn then(&mut self, other: &NetworkDescription) -> Result<()> {
        for e in other.elements() {
            self.push(*e)?;
        }
        Ok(())
    }

    /// Re-indexes mode `k` to `map[k]` inside a `modes`-mode network.
    pub fn remapped(&self, map: &[usize], modes: usize) -> Result<Self> {
        if map.len() != self.modes {
            return Err(Error::DimensionMismatch {
                expected: self.modes,
                found: map.len(),
            });
        }
        let elements = self.elements.iter().map(|e| e.remap(map)).collect();
        Self::from_elements(modes, elements)
    }

    pub fn validate(&self) -> Result<()> {
        for e in &self.elements {
            if e.max_mode() >= self.modes {
                return Err(Error::ModeOutOfRange {
                    mode: e.max_mode(),
                    modes: self.modes,
                });
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModeUnitary {
    matrix: CMatrix,
}

impl ModeUnitary {
    /// Accepts a square matrix unitary within [`UNITARITY_TOL`].
    pub fn new(matrix: CMatrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::NotSquare {
                rows: matrix.rows(),
                cols: matrix.cols(),
            });
        }
        let deviation = matrix.unitarity_defect();
        if !(deviation <= UNITARITY_TOL) {
            return Err(Error::NotUnitary { deviation });
        }
        Ok(ModeUnitary { matrix })
    }

    pub fn identity(n: usize) -> Self {
        ModeUnitary {
            matrix: CMatrix::identity(n),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    /// `Λ_{ij}` with zero-based indices.
    pub fn entry(&self, i: usize, j: usize) -> C64 {
        self.matrix[(i, j)]
    }

    /// `self · first`, i.e. apply `first` and then `self`.
    pub fn after(&self, first: &ModeUnitary) -> Result<Self> {
        if self.dim() != first.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: first.dim(),
            });
        }
        Ok(ModeUnitary {
            matrix: &self.matrix * &first.matrix,
        })
    }

    pub fn inverse(&self) -> Self {
        ModeUnitary {
            matrix: self.matrix.adjoint(),
        }
    }

    /// Places this unitary on modes `map` of a `total`-mode system.
    pub fn embed(&self, map: &[usize], total: usize) -> Result<Self> {
        if map.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: map.len(),
            });
        }
        let mut m = CMatrix::identity(total);
        for (i, &mi) in map.iter().enumerate() {
            if mi >= total {
                return Err(Error::ModeOutOfRange {
                    mode: mi,
                    modes: total,
                });
            }
            for (j, &mj) in map.iter().enumerate() {
                m[(mi, mj)] = self.matrix[(i, j)];
            }
        }
        Ok(ModeUnitary { matrix: m })
    }
}

/// Identity except the block `[[T, R], [−R*, T*]]` on `(mode_a, mode_b)`.
pub fn bs_matrix(params: &BeamSplitterParams, total_modes: usize) -> Result<ModeUnitary> {
    let (a, b) = (params.mode_a, params.mode_b);
    let top = a.max(b);
    if top >= total_modes {
        return Err(Error::ModeOutOfRange {
            mode: top,
            modes: total_modes,
        });
    }
    let t = params.transmission();
    let r = params.reflection();
    let mut m = CMatrix::identity(total_modes);
    m[(a, a)] = t;
    m[(a, b)] = r;
    m[(b, a)] = -r.conj();
    m[(b, b)] = t.conj();
    Ok(ModeUnitary { matrix: m })
}

pub fn phase_matrix(params: &PhaseShifterParams, total_modes: usize) -> Result<ModeUnitary> {
    if params.mode >= total_modes {
        return Err(Error::ModeOutOfRange {
            mode: params.mode,
            modes: total_modes,
        });
    }
    let mut m = CMatrix::identity(total_modes);
    m[(params.mode, params.mode)] = cis(params.angle);
    Ok(ModeUnitary { matrix: m })
}

/// Product of the network's elements in application order.
pub fn compose(network: &NetworkDescription) -> Result<ModeUnitary> {
    network.validate()?;
    let n = network.modes();
    let mut m = CMatrix::identity(n);
    for e in network.elements() {
        // left-multiply by a two-row (or one-row) element in place
        match e {
            Element::BeamSplitter(p) => {
                let (a, b) = (p.mode_a, p.mode_b);
                let t = p.transmission();
                let r = p.reflection();
                for j in 0..n {
                    let x = m[(a, j)];
                    let y = m[(b, j)];
                    m[(a, j)] = t * x + r * y;
                    m[(b, j)] = -r.conj() * x + t.conj() * y;
                }
            }
            Element::Phase(p) => {
                let z = cis(p.angle);
                for j in 0..n {
                    m[(p.mode, j)] *= z;
                }
            }
        }
    }
    Ok(ModeUnitary { matrix: m })
}

/// Triangular decomposition into `N(N−1)/2` beam splitters on neighbouring
/// modes preceded by `N` phase shifters.
///
/// Sub-diagonal entries are eliminated column by column, left to right,
/// each column from the bottom row upwards.
pub fn reck_decompose(u: &ModeUnitary) -> Result<NetworkDescription> {
    let deviation = u.matrix().unitarity_defect();
    if !(deviation <= UNITARITY_TOL) {
        return Err(Error::NotUnitary { deviation });
    }
    let n = u.dim();
    let mut m = u.matrix().clone();
    let mut steps: Vec<BeamSplitterParams> = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for c in 0..n.saturating_sub(1) {
        for r in (c + 1..n).rev() {
            let x = m[(r - 1, c)];
            let y = m[(r, c)];
            let params = if y.modulus() < 1e-14 {
                BeamSplitterParams::new(r - 1, r, 0.0, 0.0, 0.0)?
            } else {
                BeamSplitterParams::new(
                    r - 1,
                    r,
                    Float::atan2(y.modulus(), x.modulus()),
                    -x.phase(),
                    -y.phase(),
                )?
            };
            let t = params.transmission();
            let rr = params.reflection();
            for j in 0..n {
                let a = m[(r - 1, j)];
                let b = m[(r, j)];
                m[(r - 1, j)] = t * a + rr * b;
                m[(r, j)] = -rr.conj() * a + t.conj() * b;
            }
            m[(r, c)] = ZERO;
            steps.push(params);
        }
    }
    let mut net = NetworkDescription::new(n);
    for i in 0..n {
        net.push_phase(i, wrap_phase(m[(i, i)].phase()))?;
    }
    for p in steps.iter().rev() {
        net.push(Element::BeamSplitter(p.inverse()))?;
    }
    Ok(net)
}

/// Haar-random unitary: Gram–Schmidt on the columns of a seeded complex
/// Gaussian matrix (equivalently QR with a positive diagonal in `R`).
pub fn random_unitary(dimension: usize, seed: u64) -> Result<ModeUnitary> {
    random_unitary_with(dimension, &mut rng::stream_rng(seed, 0))
}

/// [`random_unitary`] drawing from a caller-supplied generator.
pub fn random_unitary_with(
    dimension: usize,
    rng: &mut impl rand_core::RngCore,
) -> Result<ModeUnitary> {
    if dimension == 0 {
        return Err(Error::InvalidParameter("dimension must be positive".into()));
    }
    let mut cols: Vec<Vec<C64>> = Vec::with_capacity(dimension);
    while cols.len() < dimension {
        let mut v: Vec<C64> = (0..dimension).map(|_| rng::complex_normal(rng)).collect();
        for _ in 0..2 {
            for q in &cols {
                let c = linalg::dot(q, &v);
                for (vi, qi) in v.iter_mut().zip(q) {
                    *vi -= c * qi;
                }
            }
        }
        let nrm = Float::sqrt(linalg::norm_sqr(&v));
        // a numerically dependent draw is discarded; vanishingly rare
        if nrm > 1e-8 {
            cols.push(v.into_iter().map(|z| z / nrm).collect());
        }
    }
    Ok(ModeUnitary {
        matrix: CMatrix::from_fn(dimension, dimension, |i, j| cols[j][i]),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bs_examples() {
        let id = bs_matrix(&BeamSplitterParams::new(0, 1, 0.0, 0.0, 0.0).unwrap(), 2).unwrap();
        assert!(id.matrix().sub(&CMatrix::identity(2)).max_abs() < 1e-16);
        let full = bs_matrix(
            &BeamSplitterParams::new(0, 1, PI / 2.0, 0.0, 0.0).unwrap(),
            2,
        )
        .unwrap();
        let want = CMatrix::from_real(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        assert!(full.matrix().sub(&want).max_abs() < 1e-15);
        let half = bs_matrix(
            &BeamSplitterParams::new(0, 1, PI / 4.0, 0.0, 0.0).unwrap(),
            2,
        )
        .unwrap();
        assert!((half.entry(0, 0).norm_sqr() - 0.5).abs() < 1e-15);
        assert!((half.entry(0, 1).norm_sqr() - 0.5).abs() < 1e-15);
        assert!(half.matrix().unitarity_defect() < 1e-15);
    }

    #[test]
    fn theta_is_canonicalized() {
        let p = BeamSplitterParams::new(0, 1, -0.3, 0.2, 0.1).unwrap();
        assert!(p.theta >= 0.0 && p.theta <= PI / 2.0);
        let t = cis(0.2) * 0.3f64.cos();
        let r = cis(0.1) * (-0.3f64).sin();
        assert!((p.transmission() - t).modulus() < 1e-15);
        assert!((p.reflection() - r).modulus() < 1e-15);
    }

    #[test]
    fn compose_examples() {
        assert_eq!(
            compose(&NetworkDescription::new(3)).unwrap(),
            ModeUnitary::identity(3)
        );
        let mut net = NetworkDescription::new(2);
        net.push_bs(0, 1, 0.4, 0.0, 0.0).unwrap();
        net.push_bs(0, 1, -0.4, 0.0, 0.0).unwrap();
        assert!(
            compose(&net)
                .unwrap()
                .matrix()
                .sub(&CMatrix::identity(2))
                .max_abs()
                < 1e-12
        );
    }

    #[test]
    fn reck_roundtrip_small() {
        for seed in 0..20 {
            for n in 1..=4 {
                let u = random_unitary(n, seed).unwrap();
                let net = reck_decompose(&u).unwrap();
                assert!(net.beam_splitter_count() <= n * (n - 1) / 2);
                let back = compose(&net).unwrap();
                assert!(back.matrix().sub(u.matrix()).max_abs() < 1e-12);
            }
        }
    }

    #[test]
    fn reck_rejects_non_unitary() {
        let m = CMatrix::from_real(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        assert!(matches!(
            reck_decompose(&ModeUnitary { matrix: m }),
            Err(Error::NotUnitary { .. })
        ));
    }

    #[test]
    fn random_unitary_deterministic() {
        assert_eq!(random_unitary(3, 5).unwrap(), random_unitary(3, 5).unwrap());
        let one = random_unitary(1, 9).unwrap();
        assert!((one.entry(0, 0).modulus() - 1.0).abs() < 1e-15);
    }
}
