//! The Bernstein-function chain derived from ψ, and the generalized
//! Weierstrass product W_φ.
//!
//! With θ the root of ψ in (0, 1), the derived exponents are
//!
//! ```text
//! φ(u)  = ψ(u)/(u−θ)        (removable singularity at u = θ)
//! ψ↑(u) = ψ(u+θ)
//! T₁ψ(u) = u·ψ(u+1)/(u+1)
//! φ₁(u) = ψ(u+1)/(u+1)
//! φ↑(u) = φ(u+θ) = ψ↑(u)/u
//! ```
//!
//! W_φ is the unique log-concave solution of W(z+1) = φ(z)·W(z), W(1) = 1 —
//! the gamma function when φ(u) = u. At integers it is the plain product
//! ∏ φ(k). Elsewhere it is computed through the ratio to Γ:
//!
//! ```text
//! ln (W_φ/Γ)(z) = lim_N [ z·g(N) + Σ_{k=1}^{N−1} g(k) − Σ_{k=0}^{N−1} g(z+k) ],
//! g(u) = ln(φ(u)/u),
//! ```
//!
//! which follows from iterating the functional equation N times and replacing
//! W(z+N) by W(N)·(φ(N))^z, the log-concave interpolation between consecutive
//! integer products (the same step that turns Γ's functional equation into
//! Euler's limit, where it is exact in the N → ∞ sense for φ(u) = c·u at
//! every N). The truncation error expands in integer powers 1/N², 1/N³, …
//! with the leading coefficient proportional to z(z−1), so the partial limits
//! at N, 2N, 4N, … extrapolate cleanly: six Richardson levels knock the error
//! to O(N⁻⁸), and the last correction is kept as a computable error estimate.
//! Arguments are first shifted into the base strip Re z ∈ [1, 2) through the
//! functional equation, which keeps |z| small where the limit is taken and
//! makes families like {W_φ(k+1+θ)}_k consistent to machine precision.

use crate::error::{Error, Result};
use crate::model::PsiModel;
use crate::special::{ln_gamma, ln_gamma_c};
use num_complex::Complex64;

/// Which derived exponent to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExponentKind {
    Phi,
    PsiUp,
    T1Psi,
    Phi1,
    PhiUp,
}

impl std::str::FromStr for ExponentKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "phi" => Ok(ExponentKind::Phi),
            "psi_up" => Ok(ExponentKind::PsiUp),
            "t1psi" => Ok(ExponentKind::T1Psi),
            "phi1" => Ok(ExponentKind::Phi1),
            "phi_up" => Ok(ExponentKind::PhiUp),
            other => Err(Error::Config(format!(
                "unknown exponent kind '{other}' (expected phi, psi_up, t1psi, phi1, phi_up)"
            ))),
        }
    }
}

impl PsiModel {
    /// φ(u) = ψ(u)/(u−θ), with the removable singularity at u = θ filled by
    /// the local Taylor expansion ψ′(θ) + ψ″(θ)(u−θ)/2 + ψ‴(θ)(u−θ)²/6.
    pub fn phi(&self, u: f64) -> f64 {
        let d = u - self.theta();
        if d.abs() < 1e-5 {
            self.psi_prime(self.theta())
                + 0.5 * self.psi_second(self.theta()) * d
                + self.psi_third(self.theta()) * d * d / 6.0
        } else {
            self.psi(u) / d
        }
    }

    pub(crate) fn phi_c(&self, z: Complex64) -> Complex64 {
        let d = z - self.theta();
        if d.norm() < 1e-8 {
            Complex64::new(self.psi_prime(self.theta()), 0.0)
        } else {
            self.psi_c_unchecked(z) / d
        }
    }

    /// ψ↑(u) = ψ(u+θ): the exponent tilted to its critical point.
    pub fn psi_up(&self, u: f64) -> f64 {
        self.psi(u + self.theta())
    }

    /// T₁ψ(u) = u·ψ(u+1)/(u+1).
    pub fn t1psi(&self, u: f64) -> f64 {
        u * self.psi(u + 1.0) / (u + 1.0)
    }

    /// φ₁(u) = T₁ψ(u)/u = ψ(u+1)/(u+1); the ratio form is already regular at
    /// u = 0 where it equals ψ(1).
    pub fn phi1(&self, u: f64) -> f64 {
        self.psi(u + 1.0) / (u + 1.0)
    }

    /// φ↑(u) = φ(u+θ).
    pub fn phi_up(&self, u: f64) -> f64 {
        self.phi(u + self.theta())
    }
}

/// Evaluate one of the derived Bernstein exponents at u ≥ 0.
pub fn derived_exponent(model: &PsiModel, kind: ExponentKind, u: f64) -> Result<f64> {
    if !(u >= 0.0) {
        return Err(Error::DomainViolation(format!(
            "derived exponents are defined on u >= 0, got {u}"
        )));
    }
    Ok(match kind {
        ExponentKind::Phi => model.phi(u),
        ExponentKind::PsiUp => model.psi_up(u),
        ExponentKind::T1Psi => model.t1psi(u),
        ExponentKind::Phi1 => model.phi1(u),
        ExponentKind::PhiUp => model.phi_up(u),
    })
}

/// g(u) = ln(φ(u)/u) = ln(ψ(u)/((u−θ)u)) for real u ≥ 1 (safely above θ).
///
/// The prefix cache, the boundary term z·g(N) and the real-argument tail sums
/// all go through this one function, so telescoping identities between them
/// hold bit-for-bit, not just to roundoff.
fn g_real(model: &PsiModel, u: f64) -> f64 {
    (model.psi(u) / ((u - model.theta()) * u)).ln()
}

/// g(w) = ln(φ(w)/w) as a single principal log of ψ(w)/((w−θ)w).
///
/// Both φ(w) and w lie in the right half-plane along every path used here, so
/// the ratio stays clear of the negative real axis; and because these values
/// are only ever *summed* before a final exp, a stray 2πi from the principal
/// branch would cancel anyway.
fn lnh_c(model: &PsiModel, w: Complex64) -> Complex64 {
    (model.psi_c_unchecked(w) / ((w - model.theta()) * w)).ln()
}

/// Make sure the cached prefix sums S[j] = Σ_{k=1}^{j} g(k) reach index `upto`
/// and return the requested entries.
fn lnh_prefix_at(model: &PsiModel, idxs: &[usize]) -> Vec<f64> {
    let upto = idxs.iter().copied().max().unwrap_or(0);
    let mut guard = model
        .caches
        .lnh_prefix
        .lock()
        .expect("lnh prefix lock poisoned");
    if guard.is_empty() {
        guard.push(0.0);
    }
    while guard.len() <= upto {
        let k = guard.len(); // next integer argument
        let last = *guard.last().expect("never empty");
        guard.push(last + g_real(model, k as f64));
    }
    idxs.iter().map(|&i| guard[i]).collect()
}

const RICHARDSON_LEVELS: usize = 6;
const LN_TOL: f64 = 1e-13;
const N_CAP: usize = 2_000_000;

/// Partial limits S_N for N = n0, 2·n0, …, n0·2^(levels−1), one pass.
fn s_values(model: &PsiModel, z: Complex64, n0: usize) -> Vec<Complex64> {
    let n_max = n0 << (RICHARDSON_LEVELS - 1);
    let idxs: Vec<usize> = (0..RICHARDSON_LEVELS).map(|j| (n0 << j) - 1).collect();
    let prefixes = lnh_prefix_at(model, &idxs);

    let mut out = Vec::with_capacity(RICHARDSON_LEVELS);
    let mut level = 0;
    if z.im == 0.0 {
        // Real arguments stay on the f64 path: twice as fast, and the z = 1
        // case telescopes to exactly zero because every g comes from the same
        // routine in the same summation order as the prefix cache.
        let mut sum_z = 0.0f64;
        for k in 0..n_max {
            sum_z += g_real(model, z.re + k as f64);
            if k == (n0 << level) - 1 {
                let n = (n0 << level) as f64;
                let s = z.re * g_real(model, n) + prefixes[level] - sum_z;
                out.push(Complex64::new(s, 0.0));
                level += 1;
            }
        }
    } else {
        let mut sum_z = Complex64::new(0.0, 0.0);
        for k in 0..n_max {
            sum_z += lnh_c(model, z + k as f64);
            if k == (n0 << level) - 1 {
                let n = (n0 << level) as f64;
                let s = z * g_real(model, n) + prefixes[level] - sum_z;
                out.push(s);
                level += 1;
            }
        }
    }
    out
}

/// Extrapolate the ladder S_N, S_2N, … assuming an error expansion in integer
/// powers 1/N², 1/N³, …; returns the best value and the size of the final
/// correction (an error estimate).
fn richardson(rows: &[Complex64]) -> (Complex64, f64) {
    let mut t = rows.to_vec();
    let mut p = 2i32;
    let mut last = f64::INFINITY;
    while t.len() > 1 {
        let d = 2f64.powi(p) - 1.0;
        let mut next = Vec::with_capacity(t.len() - 1);
        for j in 0..t.len() - 1 {
            next.push(t[j + 1] + (t[j + 1] - t[j]) / d);
        }
        last = (next[next.len() - 1] - t[t.len() - 1]).norm();
        t = next;
        p += 1;
    }
    (t[0], last)
}

/// ln of the ratio W_φ(z)/Γ(z) for z in (or near) the base strip.
fn ratio_ln(model: &PsiModel, z: Complex64) -> Result<Complex64> {
    let mut n0 = 128usize.max(((2.0 * (z.norm() + 1.0)) as usize).next_power_of_two());
    loop {
        let rows = s_values(model, z, n0);
        let (best, est) = richardson(&rows);
        if est < LN_TOL * best.norm().max(1.0) {
            return Ok(best);
        }
        n0 *= 4;
        if n0 << (RICHARDSON_LEVELS - 1) > N_CAP {
            return Err(Error::ConvergenceFailure {
                what: format!("W_phi limit at z = {z}"),
                residual: est,
                steps: N_CAP,
            });
        }
    }
}

/// ln W_φ(z) for Re z > 0 (general path: base-strip reduction plus the
/// extrapolated ratio-to-Γ limit). Used directly by tests; library callers go
/// through [`wphi_ln`], which also picks the exact product at integers.
pub(crate) fn wphi_ln_general(model: &PsiModel, z: Complex64) -> Result<Complex64> {
    // Shift into the base strip Re z0 ∈ [1, 2): W(z) = W(z+1)/φ(z) downward,
    // W(z) = φ(z−1)·W(z−1) upward.
    let m = z.re.floor() as i64 - 1;
    let z0 = z - m as f64;
    let mut shift = Complex64::new(0.0, 0.0);
    if m > 0 {
        for j in 0..m {
            shift += model.phi_c(z0 + j as f64).ln();
        }
    } else if m < 0 {
        for j in 0..(-m) {
            shift -= model.phi_c(z + j as f64).ln();
        }
    }
    Ok(ratio_ln(model, z0)? + ln_gamma_c(z0) + shift)
}

/// ln W_φ(z), Re z > 0. Integer arguments take the exact product path
/// ln W(n) = ln Γ(n) + Σ_{k=1}^{n−1} g(k); everything else goes through
/// [`wphi_ln_general`].
pub fn wphi_ln(model: &PsiModel, z: Complex64) -> Result<Complex64> {
    if !(z.re > 0.0) || !z.re.is_finite() || !z.im.is_finite() {
        return Err(Error::DomainViolation(format!(
            "W_phi needs Re z > 0, got {z}"
        )));
    }
    if z.im == 0.0 && z.re.fract() == 0.0 && z.re < 1e6 {
        let n = z.re as usize;
        let s = lnh_prefix_at(model, &[n - 1])[0];
        return Ok(Complex64::new(ln_gamma(z.re) + s, 0.0));
    }
    wphi_ln_general(model, z)
}

/// W_φ(z) itself. Prefer [`wphi_ln`] when the value will be combined with
/// gamma factors — the log domain avoids overflow at large |z|.
pub fn wphi(model: &PsiModel, z: Complex64) -> Result<Complex64> {
    Ok(wphi_ln(model, z)?.exp())
}

/// Relative functional-equation residual |W(z+1) − φ(z)W(z)| / |W(z+1)|.
pub fn wphi_residual(model: &PsiModel, z: Complex64) -> Result<f64> {
    let lhs = wphi_ln(model, z + 1.0)?;
    let rhs = wphi_ln(model, z)? + model.phi_c(z).ln();
    Ok(((rhs - lhs).exp() - 1.0).norm())
}

/// ln W_φ(k+1+θ): the θ-shifted product family, anchored at one evaluation of
/// ln W_φ(1+θ) and extended by cached prefix sums of ln φ(j+θ) so that ratios
/// of consecutive members reproduce φ exactly.
pub(crate) fn ln_w_shifted(model: &PsiModel, k: usize) -> Result<f64> {
    let base = match model.caches.ln_w_shift_base.get() {
        Some(&v) => v,
        None => {
            let v = wphi_ln_general(model, Complex64::new(1.0 + model.theta(), 0.0))?.re;
            let _ = model.caches.ln_w_shift_base.set(v);
            v
        }
    };
    if k == 0 {
        return Ok(base);
    }
    let mut guard = model
        .caches
        .lnphi_shift_prefix
        .lock()
        .expect("shift prefix lock poisoned");
    if guard.is_empty() {
        guard.push(0.0);
    }
    while guard.len() <= k {
        let j = guard.len();
        let last = *guard.last().expect("never empty");
        guard.push(last + model.phi(j as f64 + model.theta()).ln());
    }
    Ok(base + guard[k])
}
