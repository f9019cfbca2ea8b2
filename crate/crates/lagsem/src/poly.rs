//! Polynomials (and x^θ · polynomial combinations) over signed-log scalars.
//!
//! Polynomials are the exact domain of every semigroup action in the crate:
//! eigen-polynomials have coefficients spanning many decades with alternating
//! signs, so the coefficient vector lives in [`SignedLog`] form and is only
//! collapsed to `f64` at evaluation or reporting time.

use crate::signed_log::{self, SignedLog};

/// Dense polynomial Σ a_k x^k, constant term first.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly {
    coeffs: Vec<SignedLog>,
}

impl Poly {
    pub fn zero() -> Self {
        Poly {
            coeffs: vec![SignedLog::ZERO],
        }
    }

    pub fn one() -> Self {
        Poly {
            coeffs: vec![SignedLog::ONE],
        }
    }

    pub fn constant(c: f64) -> Self {
        Poly {
            coeffs: vec![SignedLog::from_f64(c)],
        }
    }

    /// x^k.
    pub fn monomial(k: usize) -> Self {
        let mut coeffs = vec![SignedLog::ZERO; k + 1];
        coeffs[k] = SignedLog::ONE;
        Poly { coeffs }
    }

    pub fn from_coeffs(coeffs: Vec<SignedLog>) -> Self {
        let mut p = Poly { coeffs };
        p.trim();
        p
    }

    pub fn from_f64_coeffs(coeffs: &[f64]) -> Self {
        Poly::from_coeffs(coeffs.iter().map(|&c| SignedLog::from_f64(c)).collect())
    }

    fn trim(&mut self) {
        while self.coeffs.len() > 1 && self.coeffs.last().is_some_and(|c| c.is_zero()) {
            self.coeffs.pop();
        }
        if self.coeffs.is_empty() {
            self.coeffs.push(SignedLog::ZERO);
        }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.len() == 1 && self.coeffs[0].is_zero()
    }

    pub fn coeffs(&self) -> &[SignedLog] {
        &self.coeffs
    }

    /// Coefficient of x^k (zero past the degree).
    pub fn coeff(&self, k: usize) -> SignedLog {
        self.coeffs.get(k).copied().unwrap_or(SignedLog::ZERO)
    }

    pub fn to_f64_coeffs(&self) -> Vec<f64> {
        self.coeffs.iter().map(|c| c.to_f64()).collect()
    }

    /// Evaluate at a real point through the log domain, so high-degree terms
    /// with huge coefficients cancel through one log-sum-exp rather than a
    /// running Horner accumulator.
    pub fn eval(&self, x: f64) -> f64 {
        if x == 0.0 {
            return self.coeffs[0].to_f64();
        }
        let ln_ax = x.abs().ln();
        let xsign: i8 = if x > 0.0 { 1 } else { -1 };
        let terms = self.coeffs.iter().enumerate().map(|(k, c)| {
            let term_sign = if k % 2 == 1 { xsign } else { 1 };
            SignedLog::from_ln(c.sign() * term_sign, c.ln_abs() + k as f64 * ln_ax)
        });
        signed_log::sum(terms).to_f64()
    }

    pub fn scale(&self, s: SignedLog) -> Poly {
        Poly::from_coeffs(self.coeffs.iter().map(|c| c.mul(s)).collect())
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let n = self.coeffs.len().max(other.coeffs.len());
        let coeffs = (0..n).map(|k| self.coeff(k).add(other.coeff(k))).collect();
        Poly::from_coeffs(coeffs)
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        self.add(&other.scale(SignedLog::from_f64(-1.0)))
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        if self.is_zero() || other.is_zero() {
            return Poly::zero();
        }
        let n = self.degree() + other.degree() + 1;
        let coeffs = (0..n)
            .map(|k| {
                let lo = k.saturating_sub(other.degree());
                let hi = k.min(self.degree());
                signed_log::sum((lo..=hi).map(|i| self.coeffs[i].mul(other.coeffs[k - i])))
            })
            .collect();
        Poly::from_coeffs(coeffs)
    }

    /// Rebuild with one coefficient mapping applied (used by the semigroup
    /// and intertwining multipliers, which act diagonally in k).
    pub fn map_coeffs(&self, f: impl Fn(usize, SignedLog) -> SignedLog) -> Poly {
        Poly::from_coeffs(
            self.coeffs
                .iter()
                .enumerate()
                .map(|(k, &c)| f(k, c))
                .collect(),
        )
    }
}

/// A function x ↦ x^θ · q(x) with q a [`Poly`]: the natural domain of the
/// dual (co-eigenfunction side) semigroup action.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaShiftedPoly {
    pub theta: f64,
    pub poly: Poly,
}

impl ThetaShiftedPoly {
    pub fn new(theta: f64, poly: Poly) -> Self {
        ThetaShiftedPoly { theta, poly }
    }

    pub fn eval(&self, x: f64) -> f64 {
        assert!(x >= 0.0, "x^theta requires x >= 0, got {x}");
        if x == 0.0 {
            return 0.0;
        }
        // Keep the power in the log domain together with the polynomial part.
        let v = self.poly.eval(x);
        if v == 0.0 {
            0.0
        } else {
            let s = SignedLog::from_f64(v);
            SignedLog::from_ln(s.sign(), s.ln_abs() + self.theta * x.ln()).to_f64()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_matches_horner() {
        let p = Poly::from_f64_coeffs(&[2.0, -3.0, 0.25, 1.5]);
        for &x in &[0.0, 0.37, 1.0, 2.9, 10.0, -1.3] {
            let horner = ((1.5 * x + 0.25) * x - 3.0) * x + 2.0;
            assert!(
                (p.eval(x) - horner).abs() < 1e-12 * horner.abs().max(1.0),
                "eval mismatch at {x}"
            );
        }
    }

    #[test]
    fn algebra() {
        let a = Poly::from_f64_coeffs(&[1.0, 1.0]); // 1 + x
        let b = Poly::from_f64_coeffs(&[1.0, -1.0]); // 1 − x
        let prod = a.mul(&b);
        assert_eq!(prod.degree(), 2);
        let c = prod.to_f64_coeffs();
        assert!((c[0] - 1.0).abs() < 1e-15);
        assert!(c[1].abs() < 1e-15);
        assert!((c[2] + 1.0).abs() < 1e-15);

        let sum = a.add(&b).to_f64_coeffs();
        assert!((sum[0] - 2.0).abs() < 1e-15);
        assert_eq!(sum.len(), 1); // x-terms cancel exactly, degree trims

        let diff = a.sub(&a);
        assert!(diff.is_zero());
    }

    #[test]
    fn monomial_and_coeff_access() {
        let m = Poly::monomial(3);
        assert_eq!(m.degree(), 3);
        assert!(m.coeff(3).to_f64() == 1.0);
        assert!(m.coeff(7).is_zero());
        assert!((m.eval(2.0) - 8.0).abs() < 1e-14);
    }

    #[test]
    fn huge_coefficients_survive() {
        // e³⁰-sized coefficients cancelling down to 1: the log-domain sum
        // keeps machine *relative* accuracy per pile, so the result is good
        // to ~e³⁰·ε absolute — graceful degradation instead of overflow.
        let big = SignedLog::from_ln(1, 30.0);
        let p = Poly::from_coeffs(vec![big, big.neg(), SignedLog::ONE]);
        assert!((p.eval(1.0) - 1.0).abs() < 0.1);
        // And magnitudes that would overflow f64 still evaluate in the log
        // domain without producing infinities on the way.
        let vast = SignedLog::from_ln(1, 800.0);
        let q = Poly::from_coeffs(vec![SignedLog::ONE, vast]);
        assert!(q.eval(1.0).is_infinite() || q.eval(1.0) > 1e300);
    }

    #[test]
    fn theta_shift_eval() {
        let q = ThetaShiftedPoly::new(0.5, Poly::from_f64_coeffs(&[0.0, 1.0])); // x^{3/2}
        assert_eq!(q.eval(0.0), 0.0);
        assert!((q.eval(4.0) - 8.0).abs() < 1e-12);
        let l1 = ThetaShiftedPoly::new(0.5, Poly::from_f64_coeffs(&[1.5, -1.0]));
        assert!((l1.eval(1.0) - 0.5).abs() < 1e-13);
    }
}
