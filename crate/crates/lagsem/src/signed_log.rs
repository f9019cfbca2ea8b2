//! Sign–magnitude scalars stored in the log domain.
//!
//! Moment tables, polynomial coefficients and Mellin factors in this crate
//! routinely span hundreds of orders of magnitude (Γ(41−θ) against 1/W_φ(41)
//! and worse), far past what `f64` holds directly. A [`SignedLog`] keeps the
//! sign and ln|x| separately, so products and quotients are exact-ish
//! additions while sums go through log-sum-exp. Conversion back to `f64` is
//! deferred to the last step of every pipeline.

/// A real number `sign · exp(ln_abs)`.
///
/// Zero is canonically `(0, −∞)`. The representation is closed under
/// multiplication, division and addition; addition of opposite signs uses
/// `ln_1p`-style cancellation and collapses to exact zero when the magnitudes
/// tie bit-for-bit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignedLog {
    sign: i8,
    ln_abs: f64,
}

impl SignedLog {
    pub const ZERO: SignedLog = SignedLog {
        sign: 0,
        ln_abs: f64::NEG_INFINITY,
    };
    pub const ONE: SignedLog = SignedLog {
        sign: 1,
        ln_abs: 0.0,
    };

    /// Wrap a finite `f64`.
    pub fn from_f64(x: f64) -> Self {
        debug_assert!(!x.is_nan(), "SignedLog::from_f64(NaN)");
        if x == 0.0 {
            Self::ZERO
        } else {
            SignedLog {
                sign: if x > 0.0 { 1 } else { -1 },
                ln_abs: x.abs().ln(),
            }
        }
    }

    /// Build from an explicit sign and log-magnitude.
    pub fn from_ln(sign: i8, ln_abs: f64) -> Self {
        debug_assert!(matches!(sign, -1 | 0 | 1));
        if sign == 0 || ln_abs == f64::NEG_INFINITY {
            Self::ZERO
        } else {
            SignedLog { sign, ln_abs }
        }
    }

    /// exp(ln_abs) with the sign reattached. Overflows to ±∞ past ~709 in the
    /// exponent, which is the caller's lookout.
    pub fn to_f64(self) -> f64 {
        f64::from(self.sign) * self.ln_abs.exp()
    }

    pub fn is_zero(self) -> bool {
        self.sign == 0
    }

    pub fn sign(self) -> i8 {
        self.sign
    }

    /// ln|x|; −∞ for zero.
    pub fn ln_abs(self) -> f64 {
        self.ln_abs
    }

    pub fn abs(self) -> Self {
        SignedLog {
            sign: self.sign.abs(),
            ln_abs: self.ln_abs,
        }
    }

    pub fn neg(self) -> Self {
        SignedLog {
            sign: -self.sign,
            ln_abs: self.ln_abs,
        }
    }

    pub fn mul(self, rhs: Self) -> Self {
        let sign = self.sign * rhs.sign;
        if sign == 0 {
            Self::ZERO
        } else {
            SignedLog {
                sign,
                ln_abs: self.ln_abs + rhs.ln_abs,
            }
        }
    }

    pub fn div(self, rhs: Self) -> Self {
        assert!(rhs.sign != 0, "SignedLog division by zero");
        if self.sign == 0 {
            Self::ZERO
        } else {
            SignedLog {
                sign: self.sign * rhs.sign,
                ln_abs: self.ln_abs - rhs.ln_abs,
            }
        }
    }

    /// Multiply by exp(t): a pure shift in the log domain, exact for the
    /// magnitude. This is how semigroup scalings e^{−nt} are applied.
    pub fn mul_exp(self, t: f64) -> Self {
        if self.sign == 0 {
            Self::ZERO
        } else {
            SignedLog {
                sign: self.sign,
                ln_abs: self.ln_abs + t,
            }
        }
    }

    pub fn add(self, rhs: Self) -> Self {
        match (self.sign, rhs.sign) {
            (0, _) => rhs,
            (_, 0) => self,
            (a, b) if a == b => SignedLog {
                sign: a,
                ln_abs: ln_add(self.ln_abs, rhs.ln_abs),
            },
            _ => {
                // Opposite signs: the larger magnitude wins.
                let (hi, lo) = if self.ln_abs >= rhs.ln_abs {
                    (self, rhs)
                } else {
                    (rhs, self)
                };
                if hi.ln_abs == lo.ln_abs {
                    return Self::ZERO;
                }
                let ln = hi.ln_abs + (-((lo.ln_abs - hi.ln_abs).exp())).ln_1p();
                SignedLog {
                    sign: hi.sign,
                    ln_abs: ln,
                }
            }
        }
    }

    pub fn sub(self, rhs: Self) -> Self {
        self.add(rhs.neg())
    }
}

/// ln(e^a + e^b), stable for any ordering of the operands.
fn ln_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// Exact-order log-sum-exp of a term sequence, with the positive and negative
/// magnitudes accumulated separately so cancellation happens exactly once.
///
/// Returns `(sum, ln_pos, ln_neg)`: the signed result plus the log-magnitudes
/// of the two one-sided partial sums. The one-sided magnitudes let callers
/// judge how much cancellation the final subtraction absorbed — the norm
/// routines use that to decide whether a slightly negative result is roundoff
/// or a genuine failure.
pub fn sum_with_parts(terms: impl IntoIterator<Item = SignedLog>) -> (SignedLog, f64, f64) {
    let mut pos: Vec<f64> = Vec::new();
    let mut neg: Vec<f64> = Vec::new();
    for t in terms {
        match t.sign {
            1 => pos.push(t.ln_abs),
            -1 => neg.push(t.ln_abs),
            _ => {}
        }
    }
    let ln_pos = ln_sum(&pos);
    let ln_neg = ln_sum(&neg);
    let total = SignedLog::from_ln(1, ln_pos).add(SignedLog::from_ln(-1, ln_neg));
    (total, ln_pos, ln_neg)
}

/// Signed log-sum-exp over a term sequence.
pub fn sum(terms: impl IntoIterator<Item = SignedLog>) -> SignedLog {
    sum_with_parts(terms).0
}

/// Two-pass log-sum-exp of raw log-magnitudes (all summands positive).
fn ln_sum(lns: &[f64]) -> f64 {
    let m = lns.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let s: f64 = lns.iter().map(|l| (l - m).exp()).sum();
    m + s.ln()
}
