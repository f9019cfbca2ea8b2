//! Exact polynomial calculus for the four semigroups: eigen-polynomials,
//! co-eigenfunction pairing functionals, change of basis, semigroup
//! application, Bessel partial sums, and the equilibrium-convergence check.
//!
//! Everything runs on polynomials, where the reflected semigroup acts
//! diagonally: expand f in the eigen-polynomials 𝒫_n, scale mode n by
//! e^{−nt}, reassemble. The killed semigroup acts the same way on x^θ·q
//! through the ascending-exponent eigenfamily and an extra e^{−θt}. The
//! classical counterparts Q, Q† run the identical code path on the companion
//! model ψ_Y(u) = u(u−θ) with the same θ. Co-eigenfunctions never appear
//! pointwise — they enter only as pairing functionals against polynomials,
//! which moment tables evaluate exactly.

use std::str::FromStr;
use std::sync::OnceLock;

use crate::distributions::{moments_ln, MomentKind};
use crate::error::{Error, Result};
use crate::model::{LevyQuadruplet, PsiModel};
use crate::poly::{Poly, ThetaShiftedPoly};
use crate::signed_log::{self, SignedLog};
use crate::special::{binomial_u64, ln_factorial, ln_gamma};

/// Largest cached expansion depth. Past n ≈ 30 the alternating-coefficient
/// cancellation in double precision outgrows every tolerance used here.
pub const DEPTH_CAP: usize = 30;

/// The four semigroups.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Operator {
    /// Reflected semigroup of the model.
    P,
    /// Killed (absorbed) semigroup of the model, acting on x^θ·q.
    PDag,
    /// Reflected classical companion (same θ, quadratic exponent).
    Q,
    /// Killed classical companion.
    QDag,
}

impl FromStr for Operator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "p" => Ok(Operator::P),
            "p_dag" | "pdag" => Ok(Operator::PDag),
            "q" => Ok(Operator::Q),
            "q_dag" | "qdag" => Ok(Operator::QDag),
            other => Err(Error::Config(format!(
                "unknown semigroup `{other}`; expected p | p_dag | q | q_dag"
            ))),
        }
    }
}

/// Which biorthogonal family a pairing functional belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PairingKind {
    /// Rodrigues derivatives of the invariant density (reflected side).
    M,
    /// Killed-side family, paired against x^θ·p_k.
    MDag,
}

impl PairingKind {
    fn moment_kind(self) -> MomentKind {
        match self {
            PairingKind::M => MomentKind::VPsi,
            PairingKind::MDag => MomentKind::MUp,
        }
    }
}

/// Eigenbasis selector: the reflected family 𝒫_n or the ascending family
/// 𝒫_n^{ψ↑} that underlies the killed side.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EigenBasis {
    Reflected,
    Killed,
}

/// 𝔠_n(u) = Γ(1+u)·n! / Γ(n+1+u), the norming constant of the spectral
/// sequences; decays like n^{−u}.
pub fn norming_constant(n: usize, u: f64) -> Result<f64> {
    if !(u > -1.0) {
        return Err(Error::DomainViolation(format!(
            "norming constant needs u > -1, got {u}"
        )));
    }
    Ok((ln_gamma(1.0 + u) + ln_factorial(n) - ln_gamma(n as f64 + 1.0 + u)).exp())
}

/// Classical Laguerre polynomial of index −θ (constant term Γ(n+1−θ)/…),
/// normalized as the killed spectrum's reference family.
pub fn laguerre(theta: f64, n: usize) -> Poly {
    assert!(
        theta > 0.0 && theta < 1.0,
        "index must lie in (0,1), got {theta}"
    );
    laguerre_inner(-theta, n)
}

/// The θ-shifted counterpart x^θ·L_n^{(θ)}(x).
pub fn laguerre_dag(theta: f64, n: usize) -> ThetaShiftedPoly {
    assert!(
        theta > 0.0 && theta < 1.0,
        "index must lie in (0,1), got {theta}"
    );
    ThetaShiftedPoly::new(theta, laguerre_inner(theta, n))
}

fn laguerre_inner(alpha: f64, n: usize) -> Poly {
    let top = ln_gamma(n as f64 + 1.0 + alpha);
    Poly::from_coeffs(
        (0..=n)
            .map(|k| {
                let sign = if k % 2 == 0 { 1 } else { -1 };
                let ln = top
                    - ln_gamma(k as f64 + 1.0 + alpha)
                    - ln_factorial(n - k)
                    - ln_factorial(k);
                SignedLog::from_ln(sign, ln)
            })
            .collect(),
    )
}

/// ln C(n, k) from the exact integer table (n < 64 covers every depth here).
fn ln_binomial(n: usize, k: usize) -> f64 {
    (binomial_u64(n, k) as f64).ln()
}

fn moment_sl(model: &PsiModel, kind: MomentKind, n: usize) -> SignedLog {
    SignedLog::from_ln(1, moments_ln(model, kind, n))
}

/// Coefficients of the n-th eigen-polynomial for the given moment family:
/// a_{n,k} = (−1)^k C(n,k) / M(k+1).
fn expansion_poly(model: &PsiModel, kind: MomentKind, n: usize) -> Poly {
    Poly::from_coeffs(
        (0..=n)
            .map(|k| {
                let sign = if k % 2 == 0 { 1 } else { -1 };
                SignedLog::from_ln(sign, ln_binomial(n, k) - moments_ln(model, kind, k))
            })
            .collect(),
    )
}

/// The n-th eigen-polynomial 𝒫_n of the reflected semigroup (eigenvalue
/// e^{−nt}).
pub fn eigenpoly(model: &PsiModel, n: usize) -> Poly {
    expansion_poly(model, MomentKind::VPsi, n)
}

/// The n-th eigenfunction x^θ·𝒫_n^{ψ↑} of the killed semigroup (eigenvalue
/// e^{−(n+θ)t}).
pub fn eigenpoly_killed(model: &PsiModel, n: usize) -> ThetaShiftedPoly {
    ThetaShiftedPoly::new(model.theta(), expansion_poly(model, MomentKind::MUp, n))
}

/// ⟨p_k, 𝔪_n⟩ (variant `M`) or ⟨x^θ p_k, 𝔪†_n⟩ (variant `MDag`): the pairing
/// of a monomial against the n-th co-eigenfunction. Zero for n > k — the
/// Rodrigues operator kills lower-degree monomials.
pub fn pairing(model: &PsiModel, k: usize, n: usize, kind: PairingKind) -> f64 {
    pairing_sl(model, k, n, kind).to_f64()
}

fn pairing_sl(model: &PsiModel, k: usize, n: usize, kind: PairingKind) -> SignedLog {
    if n > k {
        return SignedLog::ZERO;
    }
    let sign = if n % 2 == 0 { 1 } else { -1 };
    SignedLog::from_ln(
        sign,
        ln_binomial(k, n) + moments_ln(model, kind.moment_kind(), k),
    )
}

/// One model's frozen spectral data: eigen-polynomials of both families up
/// to a depth, plus the classical companion engine for Q and Q†. Built
/// single-threaded, immutable afterwards; queries are pure.
#[derive(Debug)]
pub struct SpectralModel {
    model: PsiModel,
    depth: usize,
    eigen: Vec<Poly>,
    eigen_up: Vec<Poly>,
    companion: OnceLock<Box<SpectralModel>>,
}

/// Report of the exponential-convergence bound check: the measured distance
/// to equilibrium `lhs`, the bound `rhs`, its prefactor, and whether the
/// model satisfies the hypothesis (`frakb ≥ 0`) under which the bound is
/// guaranteed rather than merely observed.
#[derive(Clone, Copy, Debug)]
pub struct ConvergenceReport {
    pub lhs: f64,
    pub rhs: f64,
    pub constant: f64,
    pub guaranteed: bool,
}

impl ConvergenceReport {
    pub fn bound_holds(&self) -> bool {
        self.lhs <= self.rhs * (1.0 + 1e-10)
    }
}

/// Bessel-sequence side selector for partial sums.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BesselSide {
    /// Normalized eigen-polynomials c_n(−θ)^{−1/2}·𝒫_n.
    Eigen,
    /// Normalized co-eigenfunctionals c_n(𝔟)^{1/2}·𝔪_n.
    Coeigen,
}

impl SpectralModel {
    pub fn new(model: &PsiModel, depth: usize) -> Result<Self> {
        if depth > DEPTH_CAP {
            return Err(Error::DomainViolation(format!(
                "spectral depth {depth} exceeds the supported cap {DEPTH_CAP}"
            )));
        }
        let eigen = (0..=depth)
            .map(|n| expansion_poly(model, MomentKind::VPsi, n))
            .collect();
        let eigen_up = (0..=depth)
            .map(|n| expansion_poly(model, MomentKind::MUp, n))
            .collect();
        Ok(SpectralModel {
            model: model.clone(),
            depth,
            eigen,
            eigen_up,
            companion: OnceLock::new(),
        })
    }

    pub fn model(&self) -> &PsiModel {
        &self.model
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Cached 𝒫_n.
    pub fn eigen_poly(&self, n: usize) -> Result<&Poly> {
        self.eigen.get(n).ok_or_else(|| self.depth_error(n))
    }

    /// Cached killed-side eigenfunction x^θ·𝒫_n^{ψ↑}.
    pub fn eigen_poly_killed(&self, n: usize) -> Result<ThetaShiftedPoly> {
        let inner = self.eigen_up.get(n).ok_or_else(|| self.depth_error(n))?;
        Ok(ThetaShiftedPoly::new(self.model.theta(), inner.clone()))
    }

    fn depth_error(&self, n: usize) -> Error {
        Error::DomainViolation(format!(
            "mode {n} beyond cached spectral depth {}",
            self.depth
        ))
    }

    /// The classical engine with the same θ that realizes Q and Q†. When the
    /// model already is classical the companion shares its tables, so both
    /// semigroups run on bitwise-identical data.
    fn companion(&self) -> &SpectralModel {
        self.companion.get_or_init(|| {
            let quad = LevyQuadruplet {
                beta: -self.model.theta(),
                sigma2: 2.0,
                kappa: 0.0,
                jumps: vec![],
            };
            let model = if *self.model.quad() == quad {
                self.model.clone()
            } else {
                PsiModel::new(quad).expect("classical quadruplet is admissible for θ in (0,1)")
            };
            Box::new(SpectralModel::new(&model, self.depth).expect("depth already validated"))
        })
    }

    fn basis_polys(&self, basis: EigenBasis) -> &[Poly] {
        match basis {
            EigenBasis::Reflected => &self.eigen,
            EigenBasis::Killed => &self.eigen_up,
        }
    }

    /// Expand f in the eigen-polynomials by back-substitution: the change of
    /// basis is triangular with nonzero leading coefficients, so the system
    /// solves exactly in the log domain (basis vectors come back as exact
    /// unit vectors, constants survive bit-for-bit).
    pub fn to_eigenbasis(&self, f: &Poly, basis: EigenBasis) -> Result<Vec<SignedLog>> {
        if f.is_zero() {
            return Ok(vec![]);
        }
        let deg = f.degree();
        if deg > self.depth {
            return Err(Error::DomainViolation(format!(
                "degree {deg} exceeds cached spectral depth {}",
                self.depth
            )));
        }
        let polys = self.basis_polys(basis);
        let mut rem: Vec<SignedLog> = f.coeffs().to_vec();
        let mut out = vec![SignedLog::ZERO; deg + 1];
        for n in (0..=deg).rev() {
            let cn = rem[n].div(polys[n].coeff(n));
            out[n] = cn;
            if !cn.is_zero() {
                for k in 0..=n {
                    rem[k] = rem[k].sub(cn.mul(polys[n].coeff(k)));
                }
            }
        }
        Ok(out)
    }

    /// The same expansion through the co-eigenfunctionals: c_n = ⟨f, 𝔪_n⟩
    /// term by term. An independent route kept for cross-validation against
    /// [`Self::to_eigenbasis`].
    pub fn eigenbasis_via_pairing(&self, f: &Poly, basis: EigenBasis) -> Result<Vec<f64>> {
        if f.is_zero() {
            return Ok(vec![]);
        }
        let deg = f.degree();
        if deg > self.depth {
            return Err(Error::DomainViolation(format!(
                "degree {deg} exceeds cached spectral depth {}",
                self.depth
            )));
        }
        let kind = match basis {
            EigenBasis::Reflected => PairingKind::M,
            EigenBasis::Killed => PairingKind::MDag,
        };
        Ok((0..=deg)
            .map(|n| {
                signed_log::sum(
                    (n..=deg).map(|k| f.coeff(k).mul(pairing_sl(&self.model, k, n, kind))),
                )
                .to_f64()
            })
            .collect())
    }

    /// ⟨𝒫_m, 𝔪_n⟩ (or the killed-side analogue): the biorthogonality matrix
    /// entry, assembled from the cached eigen-coefficients and the pairing
    /// functionals. δ_{mn} up to accumulated roundoff.
    pub fn biortho_entry(&self, m: usize, n: usize, kind: PairingKind) -> Result<f64> {
        let polys = match kind {
            PairingKind::M => &self.eigen,
            PairingKind::MDag => &self.eigen_up,
        };
        let poly = polys.get(m).ok_or_else(|| self.depth_error(m))?;
        Ok(signed_log::sum(
            (0..=m).map(|k| poly.coeff(k).mul(pairing_sl(&self.model, k, n, kind))),
        )
        .to_f64())
    }

    fn scaled_reassembly(&self, coeffs: &[SignedLog], polys: &[Poly], t: f64) -> Poly {
        let mut acc = Poly::zero();
        for (n, cn) in coeffs.iter().enumerate() {
            if cn.is_zero() {
                continue;
            }
            acc = acc.add(&polys[n].scale(cn.mul_exp(-(n as f64) * t)));
        }
        acc
    }

    /// Apply the reflected semigroup (P, or Q through the companion) for time
    /// t ≥ 0: expand, scale mode n by e^{−nt}, reassemble.
    pub fn apply(&self, f: &Poly, t: f64, which: Operator) -> Result<Poly> {
        if !(t >= 0.0) {
            return Err(Error::DomainViolation(format!(
                "semigroup time must be >= 0, got {t}"
            )));
        }
        match which {
            Operator::P => {
                let c = self.to_eigenbasis(f, EigenBasis::Reflected)?;
                Ok(self.scaled_reassembly(&c, &self.eigen, t))
            }
            Operator::Q => self.companion().apply(f, t, Operator::P),
            Operator::PDag | Operator::QDag => Err(Error::DomainViolation(
                "killed semigroups act on theta-shifted functions; use apply_killed".into(),
            )),
        }
    }

    /// Apply the killed semigroup to x^θ·q: P†_t(x^θ q) = e^{−θt}·x^θ·(P↑_t q)
    /// with P↑ the eigen-engine of the ascending exponent (rates n+θ overall).
    pub fn apply_killed(
        &self,
        f: &ThetaShiftedPoly,
        t: f64,
        which: Operator,
    ) -> Result<ThetaShiftedPoly> {
        if !(t >= 0.0) {
            return Err(Error::DomainViolation(format!(
                "semigroup time must be >= 0, got {t}"
            )));
        }
        let theta = self.model.theta();
        if (f.theta - theta).abs() > 1e-12 {
            return Err(Error::DomainViolation(format!(
                "shifted function carries theta = {}, model has {theta}",
                f.theta
            )));
        }
        match which {
            Operator::PDag => {
                let c = self.to_eigenbasis(&f.poly, EigenBasis::Killed)?;
                let inner = self.scaled_reassembly(&c, &self.eigen_up, t);
                Ok(ThetaShiftedPoly::new(
                    theta,
                    inner.scale(SignedLog::from_ln(1, -theta * t)),
                ))
            }
            Operator::QDag => {
                // The companion owns the same θ by construction.
                let q = ThetaShiftedPoly::new(self.companion().model.theta(), f.poly.clone());
                self.companion().apply_killed(&q, t, Operator::PDag)
            }
            Operator::P | Operator::Q => Err(Error::DomainViolation(
                "reflected semigroups act on plain polynomials; use apply".into(),
            )),
        }
    }

    /// 𝔪f = Σ a_k M_{V_ψ}(k+1): the stationary mean of f.
    pub fn stationary_mean(&self, f: &Poly) -> f64 {
        signed_log::sum(
            f.coeffs()
                .iter()
                .enumerate()
                .map(|(k, c)| c.mul(moment_sl(&self.model, MomentKind::VPsi, k))),
        )
        .to_f64()
    }

    /// ⟨f, g⟩_𝔪 = Σ_{j,k} f_j g_k M_{V_ψ}(j+k+1).
    pub fn inner_m(&self, f: &Poly, g: &Poly) -> f64 {
        let fc = f.coeffs();
        let gc = g.coeffs();
        signed_log::sum(fc.iter().enumerate().flat_map(|(j, a)| {
            gc.iter().enumerate().map(move |(k, b)| {
                a.mul(*b)
                    .mul(moment_sl(&self.model, MomentKind::VPsi, j + k))
            })
        }))
        .to_f64()
    }

    /// ‖f‖²_𝔪, with a tripwire on catastrophic cancellation: a residual more
    /// negative than −1e−12 (relative to the positive pile for large inputs)
    /// cannot come from roundoff on a true square and is surfaced as an
    /// error; small negatives clamp to zero.
    pub fn norm_m_sq(&self, f: &Poly) -> Result<f64> {
        let fc = f.coeffs();
        let (total, ln_pos, _) = signed_log::sum_with_parts(fc.iter().enumerate().flat_map(|(j, a)| {
            fc.iter().enumerate().map(move |(k, b)| {
                a.mul(*b)
                    .mul(moment_sl(&self.model, MomentKind::VPsi, j + k))
            })
        }));
        let v = total.to_f64();
        if v < 0.0 && v.abs() > 1e-12 * ln_pos.exp().max(1.0) {
            return Err(Error::NegativeNormResidual { value: v });
        }
        Ok(v.max(0.0))
    }

    pub fn norm_m(&self, f: &Poly) -> Result<f64> {
        Ok(self.norm_m_sq(f)?.sqrt())
    }

    /// Partial Bessel sum Σ_{n≤N} of squared normalized inner products; the
    /// sequence bound promises it never exceeds ‖f‖²_𝔪.
    pub fn bessel_partial(&self, f: &Poly, n_max: usize, side: BesselSide) -> Result<f64> {
        if n_max > self.depth {
            return Err(self.depth_error(n_max));
        }
        if f.is_zero() {
            return Ok(0.0);
        }
        let theta = self.model.theta();
        match side {
            BesselSide::Eigen => {
                let mut acc = 0.0;
                for n in 0..=n_max {
                    let inner = self.inner_m(f, &self.eigen[n]);
                    acc += inner * inner / norming_constant(n, -theta)?;
                }
                Ok(acc)
            }
            BesselSide::Coeigen => {
                let frakb = self.model.frakb().ok_or_else(|| {
                    Error::DomainViolation(
                        "co-eigen Bessel sums need a Gaussian component and finite small-jump mass"
                            .into(),
                    )
                })?;
                let mut acc = 0.0;
                for n in 0..=n_max {
                    let inner = signed_log::sum(
                        (n..=f.degree())
                            .map(|k| f.coeff(k).mul(pairing_sl(&self.model, k, n, PairingKind::M))),
                    )
                    .to_f64();
                    acc += norming_constant(n, frakb)? * inner * inner;
                }
                Ok(acc)
            }
        }
    }

    /// Distance to equilibrium after time t against the exponential bound
    /// √((𝔟+1)/(1−θ))·e^{−t}·‖f − 𝔪f‖_𝔪.
    pub fn convergence_report(&self, f: &Poly, t: f64) -> Result<ConvergenceReport> {
        let frakb = self.model.frakb().ok_or_else(|| {
            Error::DomainViolation(
                "convergence bound needs a Gaussian component and finite small-jump mass".into(),
            )
        })?;
        let theta = self.model.theta();
        let constant = ((frakb + 1.0) / (1.0 - theta)).sqrt();
        let mean = Poly::constant(self.stationary_mean(f));
        let lhs = self.norm_m(&self.apply(f, t, Operator::P)?.sub(&mean))?;
        let rhs = constant * (-t).exp() * self.norm_m(&f.sub(&mean))?;
        Ok(ConvergenceReport {
            lhs,
            rhs,
            constant,
            guaranteed: frakb >= 0.0,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::presets;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_poly(rng: &mut ChaCha8Rng, degree: usize) -> Poly {
        let coeffs: Vec<f64> = (0..=degree).map(|_| rng.random_range(-1.0..1.0)).collect();
        Poly::from_f64_coeffs(&coeffs)
    }

    #[test]
    fn laguerre_spot_values() {
        let l1 = laguerre(0.5, 1).to_f64_coeffs();
        assert!((l1[0] - 0.5).abs() < 1e-14);
        assert!((l1[1] + 1.0).abs() < 1e-14);
        assert_eq!(laguerre(0.5, 0).to_f64_coeffs(), vec![1.0]);

        let ld = laguerre_dag(0.5, 1);
        let q = ld.poly.to_f64_coeffs();
        assert!((q[0] - 1.5).abs() < 1e-14);
        assert!((q[1] + 1.0).abs() < 1e-14);
        // x^θ·(1.5 − x) at x = 1.
        assert!((ld.eval(1.0) - 0.5).abs() < 1e-14);
    }

    #[test]
    fn norming_constant_spot_values() {
        // Γ(0.5)Γ(2)/Γ(1.5) = 2.
        assert!((norming_constant(1, -0.5).unwrap() - 2.0).abs() < 1e-12);
        assert!((norming_constant(0, 0.3).unwrap() - 1.0).abs() < 1e-14);
        assert!(norming_constant(2, -1.5).is_err());
    }

    #[test]
    fn atom_model_eigenpoly_coefficients() {
        let mj = presets::brownian_atom();
        let p1 = eigenpoly(&mj, 1).to_f64_coeffs();
        let psi1 = mj.psi(1.0);
        assert!((p1[0] - 1.0).abs() < 1e-15);
        assert!((p1[1] + 1.0 / psi1).abs() < 1e-13);
        assert!((p1[1] + 1.707107).abs() < 1e-6);

        let p2 = eigenpoly(&mj, 2).to_f64_coeffs();
        let psi2 = mj.psi(2.0);
        assert!((p2[1] + 2.0 / psi1).abs() < 1e-13);
        assert!((p2[1] + 3.414214).abs() < 1e-6);
        assert!((p2[2] - 2.0 / (psi1 * psi2)).abs() < 1e-13);
        assert!((p2[2] - 0.997849).abs() < 1e-6);
    }

    #[test]
    fn classical_eigenpolys_reduce_to_laguerre() {
        for theta in [0.25, 0.5, 0.75] {
            let mc = presets::classical(theta);
            for n in 0..=10 {
                let lhs = eigenpoly(&mc, n).to_f64_coeffs();
                let c = norming_constant(n, -theta).unwrap();
                let rhs = laguerre(theta, n).to_f64_coeffs();
                for (a, b) in lhs.iter().zip(&rhs) {
                    assert!(
                        (a - c * b).abs() < 1e-10 * (c * b).abs().max(1.0),
                        "classical reduction defect at theta={theta}, n={n}"
                    );
                }
            }
        }
    }

    #[test]
    fn pairing_spot_values() {
        let mc = presets::classical(0.5);
        assert!((pairing(&mc, 2, 1, PairingKind::M) + 1.5).abs() < 1e-13);
        let mj = presets::brownian_atom();
        let psi1 = mj.psi(1.0);
        assert!((pairing(&mj, 1, 1, PairingKind::M) + psi1).abs() < 1e-13);
        // Rodrigues kills low-degree monomials.
        assert_eq!(pairing(&mj, 1, 3, PairingKind::M), 0.0);
        assert_eq!(pairing(&mj, 0, 2, PairingKind::MDag), 0.0);
    }

    #[test]
    fn biorthogonality_defect_within_tolerance() {
        for model in [presets::classical(0.5), presets::brownian_atom()] {
            let spec = SpectralModel::new(&model, 15).unwrap();
            let mut worst = 0.0f64;
            for kind in [PairingKind::M, PairingKind::MDag] {
                for m in 0..=15 {
                    for n in 0..=15 {
                        let entry = spec.biortho_entry(m, n, kind).unwrap();
                        let target = if m == n { 1.0 } else { 0.0 };
                        worst = worst.max((entry - target).abs());
                    }
                }
            }
            assert!(worst < 1e-8, "biorthogonality defect {worst}");
        }
    }

    #[test]
    fn eigenbasis_conversion_examples() {
        let mj = presets::brownian_atom();
        let spec = SpectralModel::new(&mj, 10).unwrap();
        // p_1 = ψ(1)·(𝒫_0 − 𝒫_1).
        let c = spec
            .to_eigenbasis(&Poly::monomial(1), EigenBasis::Reflected)
            .unwrap();
        let psi1 = mj.psi(1.0);
        assert!((c[0].to_f64() - psi1).abs() < 1e-13);
        assert!((c[1].to_f64() + psi1).abs() < 1e-13);
        // Basis vectors come back exactly.
        let c3 = spec
            .to_eigenbasis(spec.eigen_poly(3).unwrap(), EigenBasis::Reflected)
            .unwrap();
        let as_f64: Vec<f64> = c3.iter().map(|c| c.to_f64()).collect();
        assert_eq!(as_f64, vec![0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn eigenbasis_routes_agree() {
        let mj = presets::brownian_atom();
        let spec = SpectralModel::new(&mj, 12).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..5 {
            let f = random_poly(&mut rng, 10);
            for basis in [EigenBasis::Reflected, EigenBasis::Killed] {
                let tri = spec.to_eigenbasis(&f, basis).unwrap();
                let pair = spec.eigenbasis_via_pairing(&f, basis).unwrap();
                let scale = tri
                    .iter()
                    .map(|c| c.to_f64().abs())
                    .fold(1.0f64, f64::max);
                for (a, b) in tri.iter().zip(&pair) {
                    assert!(
                        (a.to_f64() - b).abs() < 1e-10 * scale,
                        "route disagreement {} vs {b}",
                        a.to_f64()
                    );
                }
            }
        }
    }

    #[test]
    fn semigroup_closed_form_and_mass() {
        let mj = presets::brownian_atom();
        let spec = SpectralModel::new(&mj, 10).unwrap();
        let t = std::f64::consts::LN_2;
        let moved = spec.apply(&Poly::monomial(1), t, Operator::P).unwrap();
        let got = moved.to_f64_coeffs();
        let psi1 = mj.psi(1.0);
        assert!((got[0] - psi1 * 0.5).abs() < 1e-13);
        assert!((got[1] - 0.5).abs() < 1e-13);
        assert!((got[0] - 0.292893).abs() < 1e-6);

        // Mass is preserved exactly, not just to tolerance.
        for t in [0.0, 0.3, 2.0] {
            let one = spec.apply(&Poly::one(), t, Operator::P).unwrap();
            assert_eq!(one.to_f64_coeffs(), vec![1.0]);
        }
    }

    #[test]
    fn eigen_relations_hold() {
        let mj = presets::brownian_atom();
        let spec = SpectralModel::new(&mj, 15).unwrap();
        let theta = mj.theta();
        for t in [0.1, 1.0, 3.0] {
            for n in 0..=15 {
                let pn = spec.eigen_poly(n).unwrap();
                let moved = spec.apply(pn, t, Operator::P).unwrap();
                let scale = (-(n as f64) * t).exp();
                for (a, b) in moved.to_f64_coeffs().iter().zip(pn.to_f64_coeffs()) {
                    assert!((a - scale * b).abs() < 1e-10 * (scale * b).abs().max(1e-30));
                }

                let pd = spec.eigen_poly_killed(n).unwrap();
                let moved = spec.apply_killed(&pd, t, Operator::PDag).unwrap();
                let scale = (-(n as f64 + theta) * t).exp();
                for (a, b) in moved
                    .poly
                    .to_f64_coeffs()
                    .iter()
                    .zip(pd.poly.to_f64_coeffs())
                {
                    assert!((a - scale * b).abs() < 1e-10 * (scale * b).abs().max(1e-30));
                }
            }
        }
    }

    #[test]
    fn semigroup_law_composes() {
        let mj = presets::brownian_atom();
        let spec = SpectralModel::new(&mj, 12).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let f = random_poly(&mut rng, 10);
        let (s, t) = (0.4, 0.9);
        let two_step = spec
            .apply(&spec.apply(&f, s, Operator::P).unwrap(), t, Operator::P)
            .unwrap();
        let one_step = spec.apply(&f, s + t, Operator::P).unwrap();
        let scale: f64 = one_step
            .to_f64_coeffs()
            .iter()
            .fold(1.0f64, |m, c| m.max(c.abs()));
        for (a, b) in two_step.to_f64_coeffs().iter().zip(one_step.to_f64_coeffs()) {
            assert!((a - b).abs() < 1e-10 * scale);
        }
    }

    #[test]
    fn theta_power_is_killed_invariant() {
        let mj = presets::brownian_atom();
        let spec = SpectralModel::new(&mj, 5).unwrap();
        let theta = mj.theta();
        let f = ThetaShiftedPoly::new(theta, Poly::one());
        let moved = spec.apply_killed(&f, 1.0, Operator::PDag).unwrap();
        let coeffs = moved.poly.to_f64_coeffs();
        assert_eq!(coeffs.len(), 1);
        assert!((coeffs[0] - (-theta).exp()).abs() < 1e-15);
    }

    #[test]
    fn classical_model_runs_q_bitwise_identically() {
        let mc = presets::classical(0.5);
        let spec = SpectralModel::new(&mc, 12).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = random_poly(&mut rng, 9);
        for t in [0.2, 1.0] {
            let p = spec.apply(&f, t, Operator::P).unwrap();
            let q = spec.apply(&f, t, Operator::Q).unwrap();
            assert_eq!(p, q, "P and Q disagree on a classical model");
        }
        let fd = ThetaShiftedPoly::new(mc.theta(), f);
        let p = spec.apply_killed(&fd, 0.7, Operator::PDag).unwrap();
        let q = spec.apply_killed(&fd, 0.7, Operator::QDag).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn semigroups_preserve_positivity_on_grid() {
        // (x−1)² stays nonnegative under a Markov operator.
        let f = Poly::from_f64_coeffs(&[1.0, -2.0, 1.0]);
        for model in [presets::classical(0.5), presets::brownian_atom()] {
            let spec = SpectralModel::new(&model, 5).unwrap();
            for t in [0.1, 1.0] {
                let moved = spec.apply(&f, t, Operator::P).unwrap();
                for i in 0..1000 {
                    let x = 20.0 * i as f64 / 999.0;
                    assert!(
                        moved.eval(x) >= -1e-10,
                        "negative value {} at x={x}, t={t}",
                        moved.eval(x)
                    );
                }
            }
        }
    }

    #[test]
    fn stationary_mean_and_norm_spot_values() {
        let mj = presets::brownian_atom();
        let spec = SpectralModel::new(&mj, 8).unwrap();
        let psi1 = mj.psi(1.0);
        assert!((spec.stationary_mean(&Poly::monomial(1)) - psi1).abs() < 1e-13);

        let mc = presets::classical(0.5);
        let spec_c = SpectralModel::new(&mc, 8).unwrap();
        let n2 = spec_c.norm_m_sq(&Poly::monomial(1)).unwrap();
        assert!((n2 - 0.75).abs() < 1e-12); // Gamma(1/2) second moment

        // Invariance of the mean under the semigroup.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f = random_poly(&mut rng, 6);
        let mean = spec.stationary_mean(&f);
        for t in [0.1, 1.0] {
            let moved = spec.apply(&f, t, Operator::P).unwrap();
            assert!((spec.stationary_mean(&moved) - mean).abs() < 1e-10 * mean.abs().max(1.0));
        }
    }

    #[test]
    fn bessel_partial_sums_respect_the_bound() {
        let mc = presets::classical(0.5);
        let spec = SpectralModel::new(&mc, 15).unwrap();
        for n_max in [0, 5, 15] {
            let s = spec
                .bessel_partial(&Poly::one(), n_max, BesselSide::Eigen)
                .unwrap();
            assert!((s - 1.0).abs() < 1e-12, "constant partial sum {s}");
        }

        let mj = presets::brownian_atom();
        let spec = SpectralModel::new(&mj, 15).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..5 {
            let f = random_poly(&mut rng, 8);
            let bound = spec.norm_m_sq(&f).unwrap() + 1e-8;
            for side in [BesselSide::Eigen, BesselSide::Coeigen] {
                let mut prev = 0.0;
                for n_max in [0, 2, 5, 10, 15] {
                    let s = spec.bessel_partial(&f, n_max, side).unwrap();
                    assert!(s + 1e-12 >= prev, "partial sums must be nondecreasing");
                    assert!(s <= bound, "partial sum {s} exceeds bound {bound}");
                    prev = s;
                }
            }
        }
        assert_eq!(
            spec.bessel_partial(&Poly::zero(), 10, BesselSide::Eigen)
                .unwrap(),
            0.0
        );
    }

    #[test]
    fn convergence_bound_matches_hand_computation() {
        let mj = presets::brownian_atom();
        let spec = SpectralModel::new(&mj, 10).unwrap();
        let report = spec
            .convergence_report(&Poly::monomial(1), 1.0)
            .unwrap();
        assert!((report.constant - 1.444225).abs() < 1e-6);
        assert!(report.guaranteed);
        // P_t p_1 − mean = e^{−t}(p_1 − mean): the ratio is exactly 1/constant.
        assert!((report.lhs / report.rhs - 1.0 / report.constant).abs() < 1e-10);
        assert!(report.bound_holds());

        // Constants are fixed points.
        let flat = spec.convergence_report(&Poly::one(), 2.0).unwrap();
        assert_eq!(flat.lhs, 0.0);
        assert_eq!(flat.rhs, 0.0);

        // Single mode n=2 decays twice as fast as the bound demands.
        let p2 = spec.eigen_poly(2).unwrap().clone();
        let single = spec.convergence_report(&p2, 0.5).unwrap();
        assert!(single.bound_holds());
    }

    #[test]
    fn depth_cap_and_degree_checks() {
        let mj = presets::brownian_atom();
        assert!(SpectralModel::new(&mj, 31).is_err());
        let spec = SpectralModel::new(&mj, 4).unwrap();
        let f = Poly::monomial(6);
        assert!(spec.to_eigenbasis(&f, EigenBasis::Reflected).is_err());
        assert!(spec.apply(&f, 1.0, Operator::P).is_err());
        assert!(spec.apply(&Poly::one(), -0.5, Operator::P).is_err());
    }
}
