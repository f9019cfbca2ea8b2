//! Lévy quadruplets, the Laplace exponent ψ, its root θ, and classification.
//!
//! A spectrally negative Lévy process is specified here by (β, σ², Π, κ) with
//!
//! ```text
//! ψ(z) = βz + (σ²/2)·z² + ∫₀^∞ (e^{−zy} − 1 + zy·1_{y<1}) Π(dy) − κ.
//! ```
//!
//! The jump measure Π is a finite mixture of atoms w·δ_y and exponential
//! densities c·e^{−λy} dy, so the integral, its derivatives, the double tail
//! Π̄̄ and the exponential-moment condition all have closed forms. ψ is convex
//! on [0, ∞) with ψ(0) = −κ; when it crosses zero inside the unit interval the
//! crossing point θ is the spectral index everything downstream keys on.
//!
//! Note on conventions: some statements of the Lévy–Khintchine form for this
//! class print a minus sign in front of the jump integral; with downward jumps
//! that sign makes e^{ψ} fail to be a Laplace transform, so the plus sign is
//! used throughout, together with the σ²/2 normalization shown above.

use crate::error::{Error, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::sync::{Arc, Mutex, OnceLock};

/// One component of the jump measure Π (supported on (0, ∞): jump sizes of
/// the *downward* moves).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum JumpComponent {
    /// A point mass `w · δ_y`.
    Atom { y: f64, w: f64 },
    /// A density `c · e^{−λy} dy`; `lambda` is λ.
    Exp { c: f64, lambda: f64 },
}

/// e^{−x} − 1 + x without cancellation near 0.
fn em1p(x: f64) -> f64 {
    if x.abs() < 1e-3 {
        // Σ_{n≥2} (−x)^n / n!, truncated where the tail is < 1e−15 relative.
        x * x * (0.5 - x / 6.0 + x * x / 24.0 - x * x * x / 120.0)
    } else {
        (-x).exp_m1() + x
    }
}

fn em1p_c(z: Complex64) -> Complex64 {
    if z.norm() < 1e-3 {
        z * z * (0.5 - z / 6.0 + z * z / 24.0 - z * z * z / 120.0)
    } else {
        (-z).exp() - 1.0 + z
    }
}

impl JumpComponent {
    fn validate(&self) -> Result<()> {
        let ok = match *self {
            JumpComponent::Atom { y, w } => y > 0.0 && w > 0.0 && y.is_finite() && w.is_finite(),
            JumpComponent::Exp { c, lambda } => {
                c > 0.0 && lambda > 0.0 && c.is_finite() && lambda.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::DomainViolation(format!(
                "jump component parameters must be strictly positive and finite: {self:?}"
            )))
        }
    }

    /// Contribution to ψ(u): ∫ (e^{−uy} − 1 + uy·1_{y<1}) dΠ for this piece.
    fn psi_term(&self, u: f64) -> f64 {
        match *self {
            JumpComponent::Atom { y, w } => {
                if y < 1.0 {
                    w * em1p(u * y)
                } else {
                    w * ((-u * y).exp_m1())
                }
            }
            JumpComponent::Exp { c, lambda } => {
                // c·[1/(u+λ) − 1/λ + u(1−e^{−λ}(1+λ))/λ²], rearranged with an
                // explicit factor u so the term vanishes exactly at u = 0.
                c * u * (self.small_mean_unit() - 1.0 / (lambda * (u + lambda)))
            }
        }
    }

    fn psi_term_c(&self, z: Complex64) -> Complex64 {
        match *self {
            JumpComponent::Atom { y, w } => {
                if y < 1.0 {
                    w * em1p_c(z * y)
                } else {
                    w * ((-z * y).exp() - 1.0)
                }
            }
            JumpComponent::Exp { c, lambda } => {
                c * z * (self.small_mean_unit() - 1.0 / (lambda * (z + lambda)))
            }
        }
    }

    /// d/du of the ψ contribution.
    fn d1(&self, u: f64) -> f64 {
        match *self {
            JumpComponent::Atom { y, w } => {
                let ind = if y < 1.0 { 1.0 } else { 0.0 };
                w * y * (ind - (-u * y).exp())
            }
            JumpComponent::Exp { c, lambda } => {
                let s = u + lambda;
                c * (self.small_mean_unit() - 1.0 / (s * s))
            }
        }
    }

    fn d2(&self, u: f64) -> f64 {
        match *self {
            JumpComponent::Atom { y, w } => w * y * y * (-u * y).exp(),
            JumpComponent::Exp { c, lambda } => {
                let s = u + lambda;
                2.0 * c / (s * s * s)
            }
        }
    }

    fn d3(&self, u: f64) -> f64 {
        match *self {
            JumpComponent::Atom { y, w } => -w * y * y * y * (-u * y).exp(),
            JumpComponent::Exp { c, lambda } => {
                let s = u + lambda;
                -6.0 * c / (s * s * s * s)
            }
        }
    }

    /// ∫_{(0,1)} y dΠ divided by the component's weight (c or w): the
    /// compensator constant that also appears inside the ψ closed form.
    pub(crate) fn small_mean_unit(&self) -> f64 {
        match *self {
            JumpComponent::Atom { y, .. } => {
                if y < 1.0 {
                    y
                } else {
                    0.0
                }
            }
            JumpComponent::Exp { lambda, .. } => {
                // ∫_0^1 y e^{−λy} dy = (1 − (1+λ)e^{−λ}) / λ².
                let f = if lambda < 1e-3 {
                    // 1 − (1+λ)e^{−λ} = λ²/2 − λ³/3 + λ⁴/8 − …
                    lambda * lambda * (0.5 - lambda / 3.0 + lambda * lambda / 8.0)
                } else {
                    -(-lambda).exp_m1() - lambda * (-lambda).exp()
                };
                f / (lambda * lambda)
            }
        }
    }

    /// ∫_{(0,1)} y dΠ.
    fn small_mean(&self) -> f64 {
        match *self {
            JumpComponent::Atom { w, .. } => w * self.small_mean_unit(),
            JumpComponent::Exp { c, .. } => c * self.small_mean_unit(),
        }
    }

    /// Double tail Π̄̄(v) = ∫_v^∞ Π̄(r) dr.
    fn double_tail(&self, v: f64) -> f64 {
        match *self {
            JumpComponent::Atom { y, w } => w * (y - v).max(0.0),
            JumpComponent::Exp { c, lambda } => c / (lambda * lambda) * (-lambda * v).exp(),
        }
    }

    /// Total mass Π(0, ∞).
    fn mass(&self) -> f64 {
        match *self {
            JumpComponent::Atom { w, .. } => w,
            JumpComponent::Exp { c, lambda } => c / lambda,
        }
    }

    /// Whether ∫_{y>1} y e^{θy} Π(dy) is finite.
    fn exp_moment_finite(&self, theta: f64) -> bool {
        match *self {
            JumpComponent::Atom { .. } => true,
            JumpComponent::Exp { lambda, .. } => lambda > theta,
        }
    }
}

/// The defining data (β, σ², Π, κ) of a spectrally negative Lévy process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevyQuadruplet {
    pub beta: f64,
    pub sigma2: f64,
    #[serde(default)]
    pub kappa: f64,
    #[serde(default)]
    pub jumps: Vec<JumpComponent>,
}

impl LevyQuadruplet {
    pub fn validate(&self) -> Result<()> {
        if !self.beta.is_finite() {
            return Err(Error::DomainViolation(format!(
                "beta must be finite, got {}",
                self.beta
            )));
        }
        if !(self.sigma2 >= 0.0 && self.sigma2.is_finite()) {
            return Err(Error::DomainViolation(format!(
                "sigma2 must be finite and >= 0, got {}",
                self.sigma2
            )));
        }
        if !(self.kappa >= 0.0 && self.kappa.is_finite()) {
            return Err(Error::DomainViolation(format!(
                "kappa must be finite and >= 0, got {}",
                self.kappa
            )));
        }
        for j in &self.jumps {
            j.validate()?;
        }
        Ok(())
    }
}

/// Membership in the standard sub-classes of spectrally negative models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ClassFlags {
    /// β ≥ 0 and κ = 0 (never hits the boundary, infinite lifetime).
    #[serde(rename = "N_up")]
    pub n_up: bool,
    /// θ ∈ (0,1) exists and ∫_{y>1} y e^{θy} Π(dy) < ∞.
    #[serde(rename = "N_check")]
    pub n_check: bool,
    /// σ² > 0.
    #[serde(rename = "N_P")]
    pub n_p: bool,
    /// σ² > 0 or Π̄̄(0+) = ∞ (never the latter for the supported families).
    #[serde(rename = "Nbar_inf")]
    pub n_bar_inf: bool,
}

/// Interior caches shared by every clone of a model: lazily extended moment
/// tables and prefix sums for the W_φ machinery. Purely memoization — every
/// cached value is a deterministic function of the quadruplet.
#[derive(Debug, Default)]
pub(crate) struct ModelCaches {
    /// ln M(n+1) per moment kind (indices fixed in `distributions`).
    pub(crate) moments: [Mutex<Vec<f64>>; 5],
    /// Prefix sums S[j] = Σ_{k=1}^{j} ln(φ(k)/k), S[0] = 0.
    pub(crate) lnh_prefix: Mutex<Vec<f64>>,
    /// Prefix sums T[j] = Σ_{i=1}^{j} ln φ(i+θ), T[0] = 0.
    pub(crate) lnphi_shift_prefix: Mutex<Vec<f64>>,
    /// ln W_φ(1+θ), the anchor of the θ-shifted product family.
    pub(crate) ln_w_shift_base: OnceLock<f64>,
    /// Mellin-inversion contour samples M_{V_ψ}(θ + 1/2 + i·j/64), j = 0, 1, …
    pub(crate) contour: Mutex<Vec<Complex64>>,
}

/// A validated model: the quadruplet plus the cached root θ, class flags and
/// the Gaussian-normalized tail mean 𝔟 = (β + Π̄̄(0+)) / σ².
///
/// Construction fails unless ψ has a sign change inside (0, 1); everything
/// else in the crate assumes that root exists. The struct is immutable after
/// construction and cheap to clone (caches are shared behind an `Arc`).
#[derive(Debug, Clone)]
pub struct PsiModel {
    quad: LevyQuadruplet,
    theta: f64,
    flags: ClassFlags,
    frakb: Option<f64>,
    double_tail_zero: f64,
    pub(crate) caches: Arc<ModelCaches>,
}

impl PsiModel {
    pub fn new(quad: LevyQuadruplet) -> Result<Self> {
        quad.validate()?;
        let theta = find_theta(&quad)?;
        let double_tail_zero: f64 = quad.jumps.iter().map(|j| j.double_tail(0.0)).sum();
        let flags = ClassFlags {
            n_up: quad.beta >= 0.0 && quad.kappa == 0.0,
            n_check: quad.jumps.iter().all(|j| j.exp_moment_finite(theta)),
            n_p: quad.sigma2 > 0.0,
            n_bar_inf: quad.sigma2 > 0.0 || double_tail_zero.is_infinite(),
        };
        let frakb = if quad.sigma2 > 0.0 && double_tail_zero.is_finite() {
            Some((quad.beta + double_tail_zero) / quad.sigma2)
        } else {
            None
        };
        Ok(PsiModel {
            quad,
            theta,
            flags,
            frakb,
            double_tail_zero,
            caches: Arc::new(ModelCaches::default()),
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let quad: LevyQuadruplet = serde_json::from_str(text)?;
        PsiModel::new(quad)
    }

    pub fn quad(&self) -> &LevyQuadruplet {
        &self.quad
    }

    /// The root of ψ in (0, 1).
    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn flags(&self) -> ClassFlags {
        self.flags
    }

    /// 𝔟 = (β + Π̄̄(0+)) / σ², defined when σ² > 0.
    pub fn frakb(&self) -> Option<f64> {
        self.frakb
    }

    /// Π̄̄(0+) = ∫_0^∞ Π̄(r) dr.
    pub fn double_tail_zero(&self) -> f64 {
        self.double_tail_zero
    }

    /// Double tail Π̄̄(v) for v ≥ 0.
    pub fn double_tail(&self, v: f64) -> Result<f64> {
        if v < 0.0 {
            return Err(Error::DomainViolation(format!("double_tail needs v >= 0, got {v}")));
        }
        Ok(self.quad.jumps.iter().map(|j| j.double_tail(v)).sum())
    }

    /// Total jump activity Π(0, ∞).
    pub fn jump_mass(&self) -> f64 {
        self.quad.jumps.iter().map(|j| j.mass()).sum()
    }

    /// ∫_{(0,1)} y Π(dy): the compensator mass that turns the drift β of the
    /// exponent into the pathwise drift β + ∫_0^1 y Π(dy) of simulations.
    pub fn small_jump_mean(&self) -> f64 {
        self.quad.jumps.iter().map(|j| j.small_mean()).sum()
    }

    /// ψ(u) for real u ≥ 0.
    pub fn psi(&self, u: f64) -> f64 {
        debug_assert!(u > -1e-9, "psi evaluated at u = {u}");
        self.psi_unchecked(u)
    }

    fn psi_unchecked(&self, u: f64) -> f64 {
        let q = &self.quad;
        let mut v = q.beta * u + 0.5 * q.sigma2 * u * u - q.kappa;
        for j in &q.jumps {
            v += j.psi_term(u);
        }
        v
    }

    /// ψ(z) for complex z with Re z ≥ 0.
    pub fn psi_complex(&self, z: Complex64) -> Result<Complex64> {
        if z.re < 0.0 {
            return Err(Error::DomainViolation(format!(
                "psi needs Re z >= 0, got {z}"
            )));
        }
        Ok(self.psi_c_unchecked(z))
    }

    pub(crate) fn psi_c_unchecked(&self, z: Complex64) -> Complex64 {
        let q = &self.quad;
        let mut v = q.beta * z + 0.5 * q.sigma2 * z * z - q.kappa;
        for j in &q.jumps {
            v += j.psi_term_c(z);
        }
        v
    }

    /// ψ′(u).
    pub fn psi_prime(&self, u: f64) -> f64 {
        let q = &self.quad;
        q.beta + q.sigma2 * u + q.jumps.iter().map(|j| j.d1(u)).sum::<f64>()
    }

    /// ψ″(u).
    pub fn psi_second(&self, u: f64) -> f64 {
        let q = &self.quad;
        q.sigma2 + q.jumps.iter().map(|j| j.d2(u)).sum::<f64>()
    }

    /// ψ‴(u).
    pub fn psi_third(&self, u: f64) -> f64 {
        self.quad.jumps.iter().map(|j| j.d3(u)).sum::<f64>()
    }
}

/// Locate the root of ψ in (0, 1) by bracketing bisection plus Newton polish.
fn find_theta(quad: &LevyQuadruplet) -> Result<f64> {
    let psi = |u: f64| -> f64 {
        let mut v = quad.beta * u + 0.5 * quad.sigma2 * u * u - quad.kappa;
        for j in &quad.jumps {
            v += j.psi_term(u);
        }
        v
    };
    let psi_prime = |u: f64| -> f64 {
        quad.beta + quad.sigma2 * u + quad.jumps.iter().map(|j| j.d1(u)).sum::<f64>()
    };

    let (mut lo, mut hi) = (1e-10, 1.0 - 1e-10);
    let (flo, fhi) = (psi(lo), psi(hi));
    if !(flo < 0.0 && fhi > 0.0) {
        return Err(Error::NoRootInUnitInterval { psi_half: psi(0.5) });
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if psi(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut theta = 0.5 * (lo + hi);
    for _ in 0..4 {
        let d = psi_prime(theta);
        if d <= 0.0 {
            break; // convexity says this cannot happen at the positive crossing
        }
        let step = psi(theta) / d;
        theta -= step;
        if step.abs() < 1e-15 * theta {
            break;
        }
    }
    let scale = (theta * psi_prime(theta)).abs().max(1e-300);
    if !(theta > 0.0 && theta < 1.0) || psi(theta).abs() > 1e-12 * scale.max(1.0) {
        return Err(Error::NoRootInUnitInterval { psi_half: psi(0.5) });
    }
    Ok(theta)
}

/// Ready-made models used across the documentation, tests and benchmarks.
pub mod presets {
    use super::*;

    /// The pure-Gaussian calibration ψ(u) = u(u−θ): β = −θ, σ² = 2, Π = 0.
    /// Its invariant law is Gamma(1−θ, 1) and every spectral object reduces
    /// to the classical Laguerre one.
    pub fn classical(theta: f64) -> PsiModel {
        assert!(theta > 0.0 && theta < 1.0, "classical model needs θ in (0,1)");
        PsiModel::new(LevyQuadruplet {
            beta: -theta,
            sigma2: 2.0,
            kappa: 0.0,
            jumps: vec![],
        })
        .expect("classical quadruplet is always admissible")
    }

    /// Brownian part plus a unit atom at ln 2, with β tuned so that θ = 1/2
    /// exactly: β = 3/2 − √2 − ln 2. A genuinely non-self-adjoint example
    /// whose spot values are easy to check by hand.
    pub fn brownian_atom() -> PsiModel {
        let beta = 1.5 - std::f64::consts::SQRT_2 - std::f64::consts::LN_2;
        PsiModel::new(LevyQuadruplet {
            beta,
            sigma2: 2.0,
            kappa: 0.0,
            jumps: vec![JumpComponent::Atom {
                y: std::f64::consts::LN_2,
                w: 1.0,
            }],
        })
        .expect("calibrated atom quadruplet is admissible")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classical_spot_values() {
        let m = presets::classical(0.5);
        assert!((m.psi(1.0) - 0.5).abs() < 1e-15);
        assert!((m.theta() - 0.5).abs() < 1e-13);
        assert_eq!(m.psi(0.0), 0.0);
        assert_eq!(m.double_tail_zero(), 0.0);
        assert_eq!(m.frakb(), Some(-0.25));
        let f = m.flags();
        assert!(!f.n_up && f.n_check && f.n_p && f.n_bar_inf);
    }

    #[test]
    fn atom_model_spot_values() {
        let m = presets::brownian_atom();
        // ψ(1) = β + 1 + (1/2 − 1 + ln 2) = 2 − √2.
        assert!((m.psi(1.0) - (2.0 - std::f64::consts::SQRT_2)).abs() < 1e-14);
        assert!((m.theta() - 0.5).abs() < 1e-12);
        assert!((m.double_tail_zero() - std::f64::consts::LN_2).abs() < 1e-15);
        let frakb = m.frakb().unwrap();
        assert!((frakb - (1.5 - std::f64::consts::SQRT_2) / 2.0).abs() < 1e-14);
        let f = m.flags();
        assert!(!f.n_up && f.n_check && f.n_p && f.n_bar_inf);
    }

    #[test]
    fn psi_at_zero_is_minus_kappa() {
        let m = PsiModel::new(LevyQuadruplet {
            beta: -0.2,
            sigma2: 1.0,
            kappa: 0.0,
            jumps: vec![
                JumpComponent::Atom { y: 0.3, w: 0.7 },
                JumpComponent::Exp { c: 1.0, lambda: 2.0 },
            ],
        })
        .unwrap();
        assert_eq!(m.psi(0.0), 0.0);
        // Double tail of the exponential piece alone is c/λ² at 0+.
        assert!((m.double_tail(0.0).unwrap() - (0.3 * 0.7 + 0.25)).abs() < 1e-15);
    }

    #[test]
    fn no_root_when_drift_positive() {
        let err = PsiModel::new(LevyQuadruplet {
            beta: 1.0,
            sigma2: 2.0,
            kappa: 0.0,
            jumps: vec![],
        })
        .unwrap_err();
        match err {
            Error::NoRootInUnitInterval { psi_half } => {
                assert!((psi_half - 0.75).abs() < 1e-15)
            }
            other => panic!("expected NoRootInUnitInterval, got {other}"),
        }
    }

    #[test]
    fn root_matches_quadratic_formula_with_exp_jumps() {
        // β = −0.9, σ² = 2, Π = e^{−3y}dy (c = 1, λ = 3): find θ numerically
        // and confirm ψ(θ) = 0 to the advertised relative tolerance.
        let m = PsiModel::new(LevyQuadruplet {
            beta: -0.9,
            sigma2: 2.0,
            kappa: 0.0,
            jumps: vec![JumpComponent::Exp { c: 1.0, lambda: 3.0 }],
        })
        .unwrap();
        let th = m.theta();
        assert!(th > 0.0 && th < 1.0);
        assert!(m.psi(th).abs() < 1e-12 * (th * m.psi_prime(th)).abs().max(1.0));
    }

    #[test]
    fn complex_matches_real_on_axis_and_derivatives_are_consistent() {
        let m = presets::brownian_atom();
        for &u in &[0.0, 0.3, 1.0, 2.5, 7.0] {
            let c = m.psi_complex(Complex64::new(u, 0.0)).unwrap();
            assert!((c.re - m.psi(u)).abs() < 1e-13 * m.psi(u).abs().max(1.0));
            assert!(c.im.abs() < 1e-14);
        }
        // Central finite differences against the closed-form derivatives.
        for &u in &[0.3, 1.0, 2.5, 7.0] {
            let h = 1e-5;
            let d1 = (m.psi(u + h) - m.psi(u - h)) / (2.0 * h);
            assert!((d1 - m.psi_prime(u)).abs() < 1e-7);
            let h = 1e-4; // d2 noise grows as ε/h², so a larger step here
            let d2 = (m.psi(u + h) - 2.0 * m.psi(u) + m.psi(u - h)) / (h * h);
            assert!((d2 - m.psi_second(u)).abs() < 1e-5);
            let h3 = 1e-3;
            let d3 = (m.psi(u + 2.0 * h3) - 2.0 * m.psi(u + h3) + 2.0 * m.psi(u - h3)
                - m.psi(u - 2.0 * h3))
                / (2.0 * h3 * h3 * h3);
            assert!((d3 - m.psi_third(u)).abs() < 1e-4);
        }
    }

    #[test]
    fn convexity_on_a_grid() {
        let m = presets::brownian_atom();
        let n = 1000;
        let h = 20.0 / n as f64;
        for i in 1..n {
            let u = i as f64 * h;
            let second = m.psi(u + h) - 2.0 * m.psi(u) + m.psi(u - h);
            assert!(second >= -1e-10, "convexity violated at u = {u}");
        }
    }

    #[test]
    fn exp_moment_flag_depends_on_lambda_vs_theta() {
        // Shallow tail: λ = 0.4 while the root lands above 0.5, so
        // ∫ y e^{θy} Π(dy) diverges and the N_✓ flag must come back false.
        let m = PsiModel::new(LevyQuadruplet {
            beta: -0.8,
            sigma2: 2.0,
            kappa: 0.0,
            jumps: vec![JumpComponent::Exp { c: 0.05, lambda: 0.4 }],
        })
        .unwrap();
        assert!(m.theta() > 0.4);
        assert!(!m.flags().n_check);
        // Same drift with a steep tail keeps the flag on.
        let m2 = PsiModel::new(LevyQuadruplet {
            beta: -0.8,
            sigma2: 2.0,
            kappa: 0.0,
            jumps: vec![JumpComponent::Exp { c: 0.05, lambda: 4.0 }],
        })
        .unwrap();
        assert!(m2.flags().n_check);
    }

    #[test]
    fn wire_format_round_trip() {
        let text = r#"{
            "beta": -0.607,
            "sigma2": 2.0,
            "kappa": 0.0,
            "jumps": [
                {"type": "atom", "y": 0.6931471805599453, "w": 1.0},
                {"type": "exp", "c": 0.5, "lambda": 3.0}
            ]
        }"#;
        let m = PsiModel::from_json(text).unwrap();
        assert_eq!(m.quad().jumps.len(), 2);
        let back = serde_json::to_string(m.quad()).unwrap();
        let again = PsiModel::from_json(&back).unwrap();
        assert_eq!(m.quad(), again.quad());
    }

    #[test]
    fn rejects_bad_parameters() {
        for quad in [
            LevyQuadruplet { beta: f64::NAN, sigma2: 2.0, kappa: 0.0, jumps: vec![] },
            LevyQuadruplet { beta: -0.5, sigma2: -1.0, kappa: 0.0, jumps: vec![] },
            LevyQuadruplet { beta: -0.5, sigma2: 2.0, kappa: -0.1, jumps: vec![] },
            LevyQuadruplet {
                beta: -0.5,
                sigma2: 2.0,
                kappa: 0.0,
                jumps: vec![JumpComponent::Atom { y: -1.0, w: 1.0 }],
            },
            LevyQuadruplet {
                beta: -0.5,
                sigma2: 2.0,
                kappa: 0.0,
                jumps: vec![JumpComponent::Exp { c: 1.0, lambda: 0.0 }],
            },
        ] {
            assert!(matches!(
                PsiModel::new(quad),
                Err(Error::DomainViolation(_))
            ));
        }
    }

    #[test]
    fn small_jump_mean_closed_forms() {
        let atom_in = JumpComponent::Atom { y: 0.25, w: 2.0 };
        let atom_out = JumpComponent::Atom { y: 1.5, w: 2.0 };
        let expd = JumpComponent::Exp { c: 3.0, lambda: 2.0 };
        assert!((atom_in.small_mean() - 0.5).abs() < 1e-15);
        assert_eq!(atom_out.small_mean(), 0.0);
        // ∫_0^1 y e^{−2y} dy = (1 − 3e^{−2})/4.
        let expect = 3.0 * (1.0 - 3.0 * (-2.0f64).exp()) / 4.0;
        assert!((expd.small_mean() - expect).abs() < 1e-14);
    }
}
