//! Real and complex elementary functions evaluated with `libm`.
//!
//! Results are bit-identical whether or not `std` is linked, and do not
//! depend on the optimization level.

use crate::linalg::C64;

pub const PI: f64 = core::f64::consts::PI;

/// Elementary functions on `f64`. Call as `Float::sqrt(x)`: method syntax
/// resolves to the inherent `std` methods when those are in scope.
pub trait Float: Copy {
    fn sqrt(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn sin_cos(self) -> (Self, Self);
    fn acos(self) -> Self;
    fn atan2(self, x: Self) -> Self;
    fn hypot(self, y: Self) -> Self;
    fn floor(self) -> Self;
    fn ceil(self) -> Self;
    fn powi(self, n: i32) -> Self;
}

impl Float for f64 {
    fn sqrt(self) -> f64 {
        libm::sqrt(self)
    }
    fn exp(self) -> f64 {
        libm::exp(self)
    }
    fn ln(self) -> f64 {
        libm::log(self)
    }
    fn sin(self) -> f64 {
        libm::sin(self)
    }
    fn cos(self) -> f64 {
        libm::cos(self)
    }
    fn sin_cos(self) -> (f64, f64) {
        libm::sincos(self)
    }
    fn acos(self) -> f64 {
        libm::acos(self)
    }
    fn atan2(self, x: f64) -> f64 {
        libm::atan2(self, x)
    }
    fn hypot(self, y: f64) -> f64 {
        libm::hypot(self, y)
    }
    fn floor(self) -> f64 {
        libm::floor(self)
    }
    fn ceil(self) -> f64 {
        libm::ceil(self)
    }
    /// Binary exponentiation, lowest bit first.
    fn powi(self, n: i32) -> f64 {
        let mut base = if n < 0 { 1.0 / self } else { self };
        let mut e = n.unsigned_abs();
        let mut acc = 1.0;
        while e > 0 {
            if e & 1 == 1 {
                acc *= base;
            }
            base *= base;
            e >>= 1;
        }
        acc
    }
}

/// Complex counterparts of the transcendental `num_complex` methods.
pub trait ComplexExt {
    /// `|z|`.
    fn modulus(self) -> f64;
    /// `arg z` in `(−π, π]`.
    fn phase(self) -> f64;
    fn cexp(self) -> C64;
    /// Principal square root.
    fn csqrt(self) -> C64;
}

impl ComplexExt for C64 {
    fn modulus(self) -> f64 {
        Float::hypot(self.re, self.im)
    }
    fn phase(self) -> f64 {
        Float::atan2(self.im, self.re)
    }
    fn cexp(self) -> C64 {
        polar(Float::exp(self.re), self.im)
    }
    fn csqrt(self) -> C64 {
        if self.im == 0.0 {
            if self.re >= 0.0 {
                return C64::new(Float::sqrt(self.re), self.im);
            }
            let r = Float::sqrt(-self.re);
            return C64::new(0.0, if self.im.is_sign_negative() { -r } else { r });
        }
        let m = self.modulus();
        let re = Float::sqrt(0.5 * (m + self.re));
        let im = Float::sqrt(0.5 * (m - self.re));
        C64::new(re, if self.im < 0.0 { -im } else { im })
    }
}

/// `r·e^{iθ}`.
pub fn polar(r: f64, theta: f64) -> C64 {
    let (s, c) = Float::sin_cos(theta);
    C64::new(r * c, r * s)
}

/// Wraps an angle into `[0, 2π)`.
pub fn wrap_phase(x: f64) -> f64 {
    let tau = 2.0 * PI;
    let r = x - tau * Float::floor(x / tau);
    if r >= tau {
        0.0
    } else {
        r
    }
}

pub fn factorial(n: u32) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * f64::from(k))
}

pub fn binomial(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * f64::from(n - i) / f64::from(i + 1))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_functions_match_std_reals() {
        for &(re, im) in &[(0.3, -1.2), (-2.0, 0.5), (-4.0, 0.0), (0.0, -3.0), (1e-9, 2.0)] {
            let z = C64::new(re, im);
            let r = f64::hypot(re, im);
            assert!((z.modulus() - r).abs() < 1e-15);
            assert!((z.phase() - f64::atan2(im, re)).abs() < 1e-15);
            let e = z.cexp();
            let want = C64::new(f64::exp(re) * f64::cos(im), f64::exp(re) * f64::sin(im));
            assert!((e - want).modulus() < 1e-13 * want.modulus());
            let w = z.csqrt();
            assert!((w * w - z).modulus() < 1e-14 * r.max(1.0));
            assert!(w.re >= 0.0);
        }
    }

    #[test]
    fn integer_powers_are_exact_products() {
        assert_eq!(Float::powi(3.0f64, 4), 81.0);
        assert_eq!(Float::powi(2.0f64, -3), 0.125);
        assert_eq!(Float::powi(0.7f64, 0), 1.0);
    }
}
