//! Matrix permanents.
//!
//! [`permanent_ryser`] is the workhorse: Ryser's inclusion–exclusion formula
//! walked in Gray-code order so each subset costs `O(n)`. [`permanent_naive`]
//! sums over permutations directly and serves as an independent check.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::float::{ComplexExt, Float, PI};
use crate::interferometer::{self, BeamSplitterParams, NetworkDescription};
use crate::linalg::{CMatrix, C64, ONE, ZERO};
use crate::rng;

/// Largest dimension accepted by [`permanent_ryser`].
pub const RYSER_MAX: usize = 30;
/// Largest dimension accepted by [`permanent_naive`].
pub const NAIVE_MAX: usize = 9;

fn check_square(m: &CMatrix, max: usize) -> Result<usize> {
    if !m.is_square() {
        return Err(Error::NotSquare {
            rows: m.rows(),
            cols: m.cols(),
        });
    }
    let n = m.rows();
    if n > max {
        return Err(Error::DimensionTooLarge { n, max });
    }
    Ok(n)
}

/// Kahan–Babuška accumulator for complex sums.
#[derive(Default)]
struct Compensated {
    sum: C64,
    carry: C64,
}

impl Compensated {
    fn add(&mut self, x: C64) {
        let t = self.sum + x;
        let fix = |s: f64, x: f64, t: f64| {
            if s.abs() >= x.abs() {
                (s - t) + x
            } else {
                (x - t) + s
            }
        };
        self.carry.re += fix(self.sum.re, x.re, t.re);
        self.carry.im += fix(self.sum.im, x.im, t.im);
        self.sum = t;
    }

    fn value(&self) -> C64 {
        self.sum + self.carry
    }
}

/// Ryser's formula `per A = (−1)^n Σ_S (−1)^{|S|} ∏_i Σ_{j∈S} a_ij`.
pub fn permanent_ryser(m: &CMatrix) -> Result<C64> {
    let n = check_square(m, RYSER_MAX)?;
    if n == 0 {
        return Ok(ONE);
    }
    let mut row_sums = vec![ZERO; n];
    let mut in_set = vec![false; n];
    let mut plain = ZERO;
    let mut comp = Compensated::default();
    let compensate = n >= 20;
    let total: u64 = 1 << n;
    for k in 1..total {
        let j = k.trailing_zeros() as usize;
        let sign = if in_set[j] { -1.0 } else { 1.0 };
        in_set[j] = !in_set[j];
        for (i, rs) in row_sums.iter_mut().enumerate() {
            *rs += m[(i, j)] * sign;
        }
        let prod = row_sums.iter().fold(ONE, |acc, x| acc * x);
        // gray code k ^ (k >> 1) has popcount parity of the subset size
        let size = (k ^ (k >> 1)).count_ones() as usize;
        let term = if size % 2 == 0 { prod } else { -prod };
        if compensate {
            comp.add(term);
        } else {
            plain += term;
        }
    }
    let s = if compensate { comp.value() } else { plain };
    Ok(if n % 2 == 0 { s } else { -s })
}

/// Direct sum over all `n!` permutations.
pub fn permanent_naive(m: &CMatrix) -> Result<C64> {
    let n = check_square(m, NAIVE_MAX)?;
    fn rec(m: &CMatrix, row: usize, used: &mut [bool], acc: C64) -> C64 {
        let n = m.rows();
        if row == n {
            return acc;
        }
        let mut s = ZERO;
        for j in 0..n {
            if !used[j] {
                used[j] = true;
                s += rec(m, row + 1, used, acc * m[(row, j)]);
                used[j] = false;
            }
        }
        s
    }
    Ok(rec(m, 0, &mut vec![false; n], ONE))
}

fn complement(n: usize, deleted: &[usize]) -> Result<Vec<usize>> {
    for (k, &d) in deleted.iter().enumerate() {
        if d >= n {
            return Err(Error::IndexOutOfRange { index: d, size: n });
        }
        if deleted[..k].contains(&d) {
            return Err(Error::InvalidParameter("index deleted twice".into()));
        }
    }
    Ok((0..n).filter(|i| !deleted.contains(i)).collect())
}

/// Permanent after removing the listed rows and columns (zero-based).
pub fn subpermanent(m: &CMatrix, delete_rows: &[usize], delete_cols: &[usize]) -> Result<C64> {
    let rows = complement(m.rows(), delete_rows)?;
    let cols = complement(m.cols(), delete_cols)?;
    if rows.len() != cols.len() {
        return Err(Error::NotSquare {
            rows: rows.len(),
            cols: cols.len(),
        });
    }
    permanent_ryser(&m.submatrix(&rows, &cols))
}

/// Permanent of `m` with row `i` repeated `row_mult[i]` times and column `j`
/// repeated `col_mult[j]` times.
pub fn repeated_index_permanent(m: &CMatrix, row_mult: &[u32], col_mult: &[u32]) -> Result<C64> {
    if row_mult.len() != m.rows() || col_mult.len() != m.cols() {
        return Err(Error::DimensionMismatch {
            expected: m.rows(),
            found: row_mult.len(),
        });
    }
    let nr: u32 = row_mult.iter().sum();
    let nc: u32 = col_mult.iter().sum();
    if nr != nc {
        return Err(Error::PhotonNumberMismatch { rows: nr, cols: nc });
    }
    if nr as usize > RYSER_MAX {
        return Err(Error::DimensionTooLarge {
            n: nr as usize,
            max: RYSER_MAX,
        });
    }
    let rows: Vec<usize> = expand(row_mult);
    let cols: Vec<usize> = expand(col_mult);
    permanent_ryser(&m.submatrix(&rows, &cols))
}

fn expand(mult: &[u32]) -> Vec<usize> {
    mult.iter()
        .enumerate()
        .flat_map(|(i, &k)| core::iter::repeat(i).take(k as usize))
        .collect()
}

/// Outcome of [`check_appendix_bounds`].
#[derive(Clone, Debug, PartialEq)]
pub struct AppendixReport {
    pub dimension: usize,
    pub samples: usize,
    /// Largest `|per U|` over Haar samples.
    pub max_permanent: f64,
    /// Largest `|per|` of any proper principal submatrix of a Haar sample.
    pub max_principal_subpermanent: f64,
    /// Largest `|per|` of any `(n−1)×(n−1)` submatrix `U(i|j)`.
    pub max_minor_subpermanent: f64,
    /// Count of `|per AB|² > per(AA*)·per(B*B)` beyond relative slack 1e−10.
    pub marcus_newman_violations: usize,
    /// Largest observed `|per AB|² / (per AA* · per B*B)`.
    pub marcus_newman_max_ratio: f64,
    /// Range of `|per Λ(1|1)|` over networks with uniformly drawn parameters.
    pub minor_coverage: (f64, f64),
    /// Violations of `|2Λ₁₂Λ₂₁Λ₁₃Λ₃₁| ≤ 8/(27|Λ₁₁|²)` (dimension ≥ 3 only).
    pub cross_term_violations: usize,
}

impl AppendixReport {
    pub fn holds(&self) -> bool {
        self.max_permanent <= 1.0 + 1e-12
            && self.max_principal_subpermanent <= 1.0 + 1e-12
            && self.max_minor_subpermanent <= 1.0 + 1e-12
            && self.marcus_newman_violations == 0
            && self.cross_term_violations == 0
    }
}

struct Sample {
    per: f64,
    principal: f64,
    minor: f64,
    mn_ratio: f64,
    mn_violation: bool,
    coverage: f64,
    cross_violation: bool,
}

fn draw_sample(dimension: usize, seed: u64, index: u64) -> Result<Sample> {
    let mut rng = rng::stream_rng(seed, index);
    let u = interferometer::random_unitary_with(dimension, &mut rng)?;
    let um = u.matrix();
    let per = permanent_ryser(um)?.modulus();

    let mut principal: f64 = 0.0;
    for mask in 1u32..(1 << dimension) - 1 {
        let idx: Vec<usize> = (0..dimension).filter(|i| mask & (1 << i) != 0).collect();
        principal = principal.max(permanent_ryser(&um.submatrix(&idx, &idx))?.modulus());
    }
    let mut minor: f64 = 0.0;
    for i in 0..dimension {
        for j in 0..dimension {
            minor = minor.max(subpermanent(um, &[i], &[j])?.modulus());
        }
    }

    let a = CMatrix::from_fn(dimension, dimension, |_, _| rng::complex_normal(&mut rng));
    let b = CMatrix::from_fn(dimension, dimension, |_, _| rng::complex_normal(&mut rng));
    let lhs = permanent_ryser(&(&a * &b))?.norm_sqr();
    let rhs = permanent_ryser(&(&a * &a.adjoint()))?.re * permanent_ryser(&(&b.adjoint() * &b))?.re;
    let mn_ratio = if rhs > 0.0 { lhs / rhs } else { f64::INFINITY };
    let mn_violation = lhs > rhs * (1.0 + 1e-10) + 1e-300;

    // uniform network parameters reach near-identity blocks that Haar
    // sampling visits only rarely
    let mut net = NetworkDescription::new(dimension);
    for c in 0..dimension.saturating_sub(1) {
        for r in (c + 1..dimension).rev() {
            let p = BeamSplitterParams::new(
                r - 1,
                r,
                rng::uniform_range(&mut rng, 0.0, PI / 2.0),
                rng::uniform_range(&mut rng, 0.0, 2.0 * PI),
                rng::uniform_range(&mut rng, 0.0, 2.0 * PI),
            )?;
            net.push(interferometer::Element::BeamSplitter(p))?;
        }
    }
    let v = interferometer::compose(&net)?;
    let coverage = subpermanent(v.matrix(), &[0], &[0])?.modulus();

    let cross_violation = if dimension >= 3 {
        let l11 = um[(0, 0)].modulus();
        if l11 > 1e-3 {
            let cross = (um[(0, 1)] * um[(1, 0)] * um[(0, 2)] * um[(2, 0)] * 2.0).modulus();
            cross > 8.0 / (27.0 * l11 * l11) + 1e-10
        } else {
            false
        }
    } else {
        false
    };

    Ok(Sample {
        per,
        principal,
        minor,
        mn_ratio,
        mn_violation,
        coverage,
        cross_violation,
    })
}

/// Samples unitaries and random matrices to test the classical permanent
/// inequalities. Sample `k` draws from its own stream `(seed, k)`, so the
/// report does not depend on evaluation order.
pub fn check_appendix_bounds(
    dimension: usize,
    samples: usize,
    seed: u64,
) -> Result<AppendixReport> {
    if dimension == 0 || dimension > 7 {
        return Err(Error::DimensionTooLarge {
            n: dimension,
            max: 7,
        });
    }
    #[cfg(feature = "parallel")]
    let draws: Vec<Sample> = {
        use rayon::prelude::*;
        (0..samples as u64)
            .into_par_iter()
            .map(|k| draw_sample(dimension, seed, k))
            .collect::<Result<Vec<_>>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let draws: Vec<Sample> = (0..samples as u64)
        .map(|k| draw_sample(dimension, seed, k))
        .collect::<Result<Vec<_>>>()?;

    let mut report = AppendixReport {
        dimension,
        samples,
        max_permanent: 0.0,
        max_principal_subpermanent: 0.0,
        max_minor_subpermanent: 0.0,
        marcus_newman_violations: 0,
        marcus_newman_max_ratio: 0.0,
        minor_coverage: (f64::INFINITY, 0.0),
        cross_term_violations: 0,
    };
    for s in &draws {
        report.max_permanent = report.max_permanent.max(s.per);
        report.max_principal_subpermanent = report.max_principal_subpermanent.max(s.principal);
        report.max_minor_subpermanent = report.max_minor_subpermanent.max(s.minor);
        report.marcus_newman_max_ratio = report.marcus_newman_max_ratio.max(s.mn_ratio);
        report.marcus_newman_violations += usize::from(s.mn_violation);
        report.minor_coverage.0 = report.minor_coverage.0.min(s.coverage);
        report.minor_coverage.1 = report.minor_coverage.1.max(s.coverage);
        report.cross_term_violations += usize::from(s.cross_violation);
    }
    Ok(report)
}

/// `√(∏ k!)` over an occupation vector.
pub fn multiplicity_norm(occ: &[u32]) -> f64 {
    Float::sqrt(
        occ.iter()
            .map(|&k| crate::float::factorial(k))
            .product::<f64>(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn random_matrix(n: usize, seed: u64) -> CMatrix {
        let mut r = rng::stream_rng(seed, 77);
        CMatrix::from_fn(n, n, |_, _| rng::complex_normal(&mut r))
    }

    #[test]
    fn small_cases() {
        assert_eq!(permanent_ryser(&CMatrix::identity(2)).unwrap(), ONE);
        let m = CMatrix::from_rows(&[
            vec![c(1.0, 1.0), c(2.0, 0.0)],
            vec![c(0.0, 3.0), c(4.0, -1.0)],
        ])
        .unwrap();
        let want = m[(0, 0)] * m[(1, 1)] + m[(0, 1)] * m[(1, 0)];
        assert!((permanent_ryser(&m).unwrap() - want).modulus() < 1e-14);
        let ones = CMatrix::from_fn(3, 3, |_, _| ONE);
        assert!((permanent_ryser(&ones).unwrap() - c(6.0, 0.0)).modulus() < 1e-13);
        assert_eq!(permanent_ryser(&CMatrix::zeros(0, 0)).unwrap(), ONE);
        let z = CMatrix::from_rows(&[vec![c(0.3, -2.0)]]).unwrap();
        assert_eq!(permanent_naive(&z).unwrap(), c(0.3, -2.0));
        let d = CMatrix::diagonal(&[c(2.0, 0.0), c(0.0, 1.0), c(3.0, 1.0)]);
        assert!(
            (permanent_naive(&d).unwrap() - c(2.0, 0.0) * c(0.0, 1.0) * c(3.0, 1.0)).modulus()
                < 1e-14
        );
    }

    #[test]
    fn ryser_matches_naive_six() {
        for seed in 0..200 {
            let m = random_matrix(6, seed);
            let a = permanent_ryser(&m).unwrap();
            let b = permanent_naive(&m).unwrap();
            assert!(
                (a - b).modulus() <= 1e-10 * b.modulus().max(1.0),
                "seed {seed}"
            );
        }
    }

    #[test]
    fn compensated_path_matches_block_product() {
        // a block-diagonal permanent factorizes over the blocks
        let blocks: Vec<CMatrix> = (0..4).map(|k| random_matrix(5, 900 + k)).collect();
        let m = CMatrix::from_fn(20, 20, |i, j| {
            if i / 5 == j / 5 {
                blocks[i / 5][(i % 5, j % 5)]
            } else {
                ZERO
            }
        });
        let want = blocks
            .iter()
            .fold(ONE, |acc, b| acc * permanent_naive(b).unwrap());
        let got = permanent_ryser(&m).unwrap();
        assert!(
            (got - want).modulus() <= 1e-10 * want.modulus(),
            "{got} vs {want}"
        );
    }

    #[test]
    fn subpermanent_examples() {
        let m = random_matrix(3, 3);
        let want = m[(1, 1)] * m[(2, 2)] + m[(1, 2)] * m[(2, 1)];
        assert!((subpermanent(&m, &[0], &[0]).unwrap() - want).modulus() < 1e-14);
        assert_eq!(
            subpermanent(&m, &[], &[]).unwrap(),
            permanent_ryser(&m).unwrap()
        );
        assert!(matches!(
            subpermanent(&m, &[5], &[0]),
            Err(Error::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn repeated_index_examples() {
        let m = random_matrix(3, 4);
        assert_eq!(
            repeated_index_permanent(&m, &[1, 1, 1], &[1, 1, 1]).unwrap(),
            permanent_ryser(&m).unwrap()
        );
        let z = m[(1, 2)];
        let p = repeated_index_permanent(&m, &[0, 2, 0], &[0, 0, 2]).unwrap();
        // both permutations of a 2×2 all-z matrix contribute z²
        assert!((p - z * z * 2.0).modulus() < 1e-14);
        assert!(matches!(
            repeated_index_permanent(&m, &[1, 0, 0], &[1, 1, 0]),
            Err(Error::PhotonNumberMismatch { .. })
        ));
    }

    #[test]
    fn rejects_oversized() {
        assert!(matches!(
            permanent_naive(&CMatrix::zeros(10, 10)),
            Err(Error::DimensionTooLarge { .. })
        ));
        assert!(matches!(
            permanent_ryser(&CMatrix::zeros(2, 3)),
            Err(Error::NotSquare { .. })
        ));
    }

    #[test]
    fn appendix_small_run() {
        let r = check_appendix_bounds(2, 1000, 1).unwrap();
        assert_eq!(r.marcus_newman_violations, 0);
        assert!(r.holds());
        let r3 = check_appendix_bounds(3, 300, 2).unwrap();
        assert!(r3.max_permanent <= 1.0 + 1e-12);
        assert!(r3.holds());
    }
}
