//! Minimal double-double arithmetic (~31 significant digits).
//!
//! Only the moment → Jacobi-matrix pipeline needs it: Hankel/Cholesky steps on
//! raw moments lose roughly 2·k digits at order k, which exhausts an f64 well
//! before the supported k = 8. The usual error-free transformations
//! (`two_sum`, `two_prod` via FMA) are enough; no heroics, no directed
//! rounding.

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    // Requires |a| ≥ |b|.
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };

    #[inline]
    pub fn from_f64(x: f64) -> Dd {
        Dd { hi: x, lo: 0.0 }
    }

    #[inline]
    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    #[inline]
    pub fn add(self, rhs: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, rhs.hi);
        let e = e + self.lo + rhs.lo;
        let (hi, lo) = quick_two_sum(s, e);
        Dd { hi, lo }
    }

    #[inline]
    pub fn sub(self, rhs: Dd) -> Dd {
        self.add(rhs.neg())
    }

    #[inline]
    pub fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }

    #[inline]
    pub fn mul(self, rhs: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, rhs.hi);
        let e = e + self.hi * rhs.lo + self.lo * rhs.hi;
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }

    #[inline]
    pub fn div(self, rhs: Dd) -> Dd {
        // One Newton refinement of the f64 quotient.
        let q1 = self.hi / rhs.hi;
        let r = self.sub(rhs.mul(Dd::from_f64(q1)));
        let q2 = r.hi / rhs.hi;
        let r2 = r.sub(rhs.mul(Dd::from_f64(q2)));
        let q3 = r2.hi / rhs.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        Dd { hi, lo }.add(Dd::from_f64(q3))
    }

    pub fn sqrt(self) -> Dd {
        assert!(self.hi >= 0.0, "Dd::sqrt of negative value {:?}", self);
        if self.hi == 0.0 {
            return Dd::ZERO;
        }
        // y ≈ √x in f64, then one Newton step: y + (x − y²)/(2y).
        let y = Dd::from_f64(self.hi.sqrt());
        let diff = self.sub(y.mul(y));
        y.add(Dd {
            hi: diff.hi / (2.0 * y.hi),
            lo: diff.lo / (2.0 * y.hi),
        })
    }

    #[inline]
    pub fn scale(self, k: f64) -> Dd {
        self.mul(Dd::from_f64(k))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn third_round_trips() {
        let third = Dd::ONE.div(Dd::from_f64(3.0));
        let back = third.mul(Dd::from_f64(3.0)).sub(Dd::ONE);
        assert!(back.to_f64().abs() < 1e-30);
    }

    #[test]
    fn sqrt_two_squares_back() {
        let r = Dd::from_f64(2.0).sqrt();
        let err = r.mul(r).sub(Dd::from_f64(2.0));
        assert!(err.to_f64().abs() < 1e-30);
    }

    #[test]
    fn keeps_tiny_tails_through_cancellation() {
        let x = Dd::from_f64(1e16).add(Dd::from_f64(1.0));
        let y = x.sub(Dd::from_f64(1e16));
        assert_eq!(y.to_f64(), 1.0);
    }

    #[test]
    fn product_catches_low_bits() {
        // (1 + 2⁻⁵⁴)² = 1 + 2⁻⁵³ + 2⁻¹⁰⁸: the middle term is invisible to f64
        // multiplication but must survive in dd.
        let eps = (2.0f64).powi(-54);
        let x = Dd { hi: 1.0, lo: eps };
        let sq = x.mul(x);
        assert!(((sq.hi - 1.0) + sq.lo - 2.0 * eps).abs() < 1e-32);
    }
}
