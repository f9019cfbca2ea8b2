//! Inverse-local-time Laplace exponents at the boundary point, their
//! Lévy–Khintchine parts, and the Krein spectral representation.
//!
//! The local time at 0 of the reflected process has an inverse that is a
//! subordinator; its Laplace exponent Φ(q) is a Bernstein function whose
//! Lévy measure is the excursion-length measure. Four catalogued exponents
//! live here — the Laguerre process (Φ_X, which is model-independent), its
//! self-similar Lamperti parent (Φ_Ȳ), and the unnormalized variants Φ̃_X,
//! Φ̃_Y whose ratios to the first pair are the Revuz masses of the boundary
//! local times. For the Laguerre exponent the Lévy density is a discrete
//! mixture of exponentials, u(r) = Σ w_n·e^{−(n+θ)r}: the mixing measure
//! ν = Σ w_n·δ_{n+θ} is the Krein spectral measure, and its support
//! reproduces exactly the decay rates of the killed semigroup.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;

use crate::bernstein::ln_w_shifted;
use crate::error::{Error, Result};
use crate::model::PsiModel;
use crate::special::{binomial, ln_gamma, ln_gamma_c};

/// The catalogued inverse-local-time exponents.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExponentTag {
    /// Laguerre process reflected at 0, Revuz-normalized: Φ_X (= Φ_Y; the
    /// killed and reflected local times share one inverse in law). Does not
    /// depend on the model beyond θ.
    XLaguerre,
    /// Self-similar Lamperti parent reflected at its running infimum: Φ_Ȳ.
    XbarSelfSimilar,
    /// Unnormalized Laguerre exponent Φ̃_X (Revuz mass not divided out);
    /// the only member that needs W_φ(1+θ), hence a model.
    TildeX,
    /// Unnormalized classical-measure exponent Φ̃_Y.
    TildeY,
}

impl FromStr for ExponentTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "x_laguerre" | "x" => Ok(ExponentTag::XLaguerre),
            "xbar_selfsimilar" | "xbar" => Ok(ExponentTag::XbarSelfSimilar),
            "tilde_x" => Ok(ExponentTag::TildeX),
            "tilde_y" => Ok(ExponentTag::TildeY),
            other => Err(Error::Config(format!(
                "unknown exponent `{other}`; expected x_laguerre | xbar_selfsimilar | tilde_x | tilde_y"
            ))),
        }
    }
}

impl fmt::Display for ExponentTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            ExponentTag::XLaguerre => "x_laguerre",
            ExponentTag::XbarSelfSimilar => "xbar_selfsimilar",
            ExponentTag::TildeX => "tilde_x",
            ExponentTag::TildeY => "tilde_y",
        };
        f.write_str(name)
    }
}

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
type ComplexFn = Arc<dyn Fn(Complex64) -> Complex64 + Send + Sync>;

/// A Laplace exponent Φ of an inverse local time: an evaluation closure on
/// (0, ∞), an optional analytic continuation to the upper half-plane, and
/// the self-similarity index θ it was built from.
///
/// Catalogued exponents come from [`SubordinatorExponent::new`]; synthetic
/// ones (for detector tests and Lévy–Khintchine part recovery) from
/// [`SubordinatorExponent::synthetic`] or the [`shifted`](Self::shifted) /
/// [`negated`](Self::negated) wrappers, which drop the tag since the result
/// is no longer a catalogued family member.
#[derive(Clone)]
pub struct SubordinatorExponent {
    label: String,
    theta: f64,
    tag: Option<ExponentTag>,
    real: RealFn,
    complex: Option<ComplexFn>,
}

/// ln of the ratio Γ(q+θ)/Γ(q) shared by three of the four exponents.
fn ln_gamma_ratio(q: f64, theta: f64) -> f64 {
    ln_gamma(q + theta) - ln_gamma(q)
}

impl SubordinatorExponent {
    /// Build a catalogued exponent. Only `TildeX` consults the model beyond
    /// its θ (it needs W_φ(1+θ)); `XLaguerre` in particular evaluates
    /// identically for every model with the same θ.
    pub fn new(tag: ExponentTag, model: &PsiModel) -> Result<Self> {
        let theta = model.theta();
        let ln_scale = match tag {
            ExponentTag::XLaguerre => theta.ln() - ln_gamma(1.0 + theta),
            ExponentTag::XbarSelfSimilar => {
                ln_gamma(1.0 - theta) - ln_gamma(theta) + (1.0 - theta) * std::f64::consts::LN_2
            }
            ExponentTag::TildeX => ln_gamma(1.0 - theta) - ln_w_shifted(model, 0)?,
            ExponentTag::TildeY => ln_gamma(1.0 - theta) - ln_gamma(1.0 + theta),
        };
        let real: RealFn = match tag {
            ExponentTag::XbarSelfSimilar => {
                Arc::new(move |q| (ln_scale + theta * q.ln()).exp())
            }
            _ => Arc::new(move |q| (ln_scale + ln_gamma_ratio(q, theta)).exp()),
        };
        let scale = ln_scale.exp();
        let complex: ComplexFn = match tag {
            ExponentTag::XbarSelfSimilar => Arc::new(move |z| scale * (theta * z.ln()).exp()),
            _ => Arc::new(move |z| {
                scale * (ln_gamma_c(z + theta) - ln_gamma_c(z)).exp()
            }),
        };
        Ok(SubordinatorExponent {
            label: tag.to_string(),
            theta,
            tag: Some(tag),
            real,
            complex: Some(complex),
        })
    }

    /// An uncatalogued exponent given directly by its evaluation closure.
    /// No analytic continuation: the half-plane part of
    /// [`pick_bernstein_check`] is skipped (reported as zero points checked).
    pub fn synthetic<F>(label: &str, theta: f64, phi: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        SubordinatorExponent {
            label: label.to_string(),
            theta,
            tag: None,
            real: Arc::new(phi),
            complex: None,
        }
    }

    /// Φ + δ₀: adds a killing rate. The result is still a Bernstein function
    /// but no longer a catalogued family member.
    pub fn shifted(&self, delta: f64) -> Self {
        let real = self.real.clone();
        let complex = self.complex.clone().map(|f| -> ComplexFn {
            Arc::new(move |z| f(z) + delta)
        });
        SubordinatorExponent {
            label: format!("{}+{delta}", self.label),
            theta: self.theta,
            tag: None,
            real: Arc::new(move |q| real(q) + delta),
            complex,
        }
    }

    /// −Φ: not a Bernstein function; exists so detector tests have a
    /// guaranteed failure case.
    pub fn negated(&self) -> Self {
        let real = self.real.clone();
        let complex = self.complex.clone().map(|f| -> ComplexFn {
            Arc::new(move |z| -f(z))
        });
        SubordinatorExponent {
            label: format!("-({})", self.label),
            theta: self.theta,
            tag: None,
            real: Arc::new(move |q| -real(q)),
            complex,
        }
    }

    /// Φ(q) for q > 0.
    pub fn phi(&self, q: f64) -> f64 {
        assert!(q > 0.0, "Laplace exponent argument must be positive, got {q}");
        (self.real)(q)
    }

    /// Analytic continuation Φ(z), when the exponent carries one.
    pub fn phi_complex(&self, z: Complex64) -> Option<Complex64> {
        self.complex.as_ref().map(|f| f(z))
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// The catalogue tag, if this is not a synthetic/wrapped exponent.
    pub fn tag(&self) -> Option<ExponentTag> {
        self.tag
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

/// Evaluate a catalogued exponent at q > 0:
///
/// * `x_laguerre`:       θ·Γ(q+θ) / (Γ(1+θ)·Γ(q))
/// * `xbar_selfsimilar`: (Γ(1−θ)/Γ(θ))·2^{1−θ}·q^θ
/// * `tilde_x`:          Γ(1−θ)·Γ(q+θ) / (W_φ(1+θ)·Γ(q))
/// * `tilde_y`:          (Γ(1−θ)/Γ(1+θ))·Γ(q+θ) / Γ(q)
pub fn phi_subordinator(tag: ExponentTag, model: &PsiModel, q: f64) -> Result<f64> {
    Ok(SubordinatorExponent::new(tag, model)?.phi(q))
}

/// Total masses of the Revuz measures of the boundary local time, under the
/// model's invariant measure and under the classical Gamma measure.
#[derive(Clone, Copy, Debug)]
pub struct RevuzConstants {
    /// c̃(𝔪) = θ·W_φ(1+θ) / (Γ(1−θ)·Γ(1+θ)).
    pub general: f64,
    /// c̃(m) = θ / Γ(1−θ).
    pub classical: f64,
}

/// Compute both Revuz masses and assert the normalization they encode:
/// the catalogued exponents satisfy Φ_X = c̃(𝔪)·Φ̃_X and Φ_Y = c̃(m)·Φ̃_Y,
/// i.e. dividing the unnormalized exponents by the normalized ones is
/// constant in q and equal to 1/c̃. Checked on a q-grid to 1e−8.
pub fn revuz_constants(model: &PsiModel) -> Result<RevuzConstants> {
    let theta = model.theta();
    let constants = RevuzConstants {
        general: (theta.ln() + ln_w_shifted(model, 0)?
            - ln_gamma(1.0 - theta)
            - ln_gamma(1.0 + theta))
        .exp(),
        classical: theta / (ln_gamma(1.0 - theta)).exp(),
    };
    let normalized = SubordinatorExponent::new(ExponentTag::XLaguerre, model)?;
    let tilde_x = SubordinatorExponent::new(ExponentTag::TildeX, model)?;
    let tilde_y = SubordinatorExponent::new(ExponentTag::TildeY, model)?;
    for q in [0.1, 0.5, 1.0, 2.0, 10.0] {
        let want = normalized.phi(q);
        for (c, tilde) in [(constants.general, &tilde_x), (constants.classical, &tilde_y)] {
            let got = c * tilde.phi(q);
            if (got - want).abs() > 1e-8 * want.abs().max(1.0) {
                return Err(Error::IdentityViolation {
                    what: format!(
                        "Revuz normalization of {} at q = {q}: {got} vs {want}",
                        tilde.label()
                    ),
                    deviation: (got - want).abs(),
                });
            }
        }
    }
    Ok(constants)
}

/// Killing rate δ and elasticity (drift) γ of a subordinator exponent:
/// Φ(q) = δ + γq + ∫(1 − e^{−qr})·u(r)dr.
#[derive(Clone, Copy, Debug)]
pub struct LevyKhintchineParts {
    /// δ = Φ(0+).
    pub killing: f64,
    /// γ = lim_{q→∞} Φ(q)/q.
    pub elasticity: f64,
}

/// Aitken Δ² acceleration of a sequence approaching its limit through
/// (approximately) geometric error modes — which is what sampling along a
/// geometric argument ladder produces, including fractional-power modes
/// like q^θ that defeat fixed-order Richardson weights.
fn aitken_limit(samples: &[f64]) -> f64 {
    let mut v = samples.to_vec();
    for _ in 0..3 {
        if v.len() < 3 {
            break;
        }
        let scale = v.iter().fold(1e-300f64, |m, x| m.max(x.abs()));
        v = (0..v.len() - 2)
            .map(|i| {
                let d1 = v[i + 2] - v[i + 1];
                let d2 = v[i + 2] - 2.0 * v[i + 1] + v[i];
                if d2.abs() <= 1e-14 * scale {
                    v[i + 2]
                } else {
                    v[i + 2] - d1 * d1 / d2
                }
            })
            .collect();
    }
    *v.last().expect("extrapolation needs at least one sample")
}

/// Recover (δ, γ) by extrapolated sampling: δ from Φ along q = h·2^{−j},
/// γ from Φ(q)/q along q = Q·2^{j}.
pub fn lk_parts(exponent: &SubordinatorExponent) -> LevyKhintchineParts {
    let down: Vec<f64> = (0..26).map(|j| exponent.phi(1e-2 / (1u64 << j) as f64)).collect();
    let up: Vec<f64> = (0..26)
        .map(|j| {
            let q = 1e2 * (1u64 << j) as f64;
            exponent.phi(q) / q
        })
        .collect();
    LevyKhintchineParts {
        killing: aitken_limit(&down),
        elasticity: aitken_limit(&up),
    }
}

/// One atom of the Krein spectral measure: ν({location}) = weight.
#[derive(Clone, Copy, Debug)]
pub struct KreinAtom {
    /// n + θ — also the decay rate of killed-semigroup mode n.
    pub location: f64,
    /// w_n = (n+θ)·θ·sin(πθ)·Γ(n+θ) / (π·n!·Γ(1+θ)).
    pub weight: f64,
}

/// Atoms n = 0..=n_max of the Krein measure of the Laguerre exponent: the
/// residues of Φ_X(q)/q at its poles q = −(n+θ), so that the excursion
/// Lévy density is u(r) = Σ w_n·e^{−(n+θ)r} and Φ_X(q) = q·Σ w_n /
/// ((n+θ)(q+n+θ)). Evaluated by the exact recurrence w_{n+1} =
/// w_n·(n+1+θ)/(n+1) from w_0 = θ·sin(πθ)/π; weights grow like n^θ, so the
/// series above converges at the n^{θ−2} rate and every truncation needs the
/// analytic tail of [`krein_reconstruction`].
pub fn krein_atoms(theta: f64, n_max: usize) -> Vec<KreinAtom> {
    assert!(
        theta > 0.0 && theta < 1.0,
        "self-similarity index must lie in (0, 1), got {theta}"
    );
    let mut atoms = Vec::with_capacity(n_max + 1);
    let mut w = theta * (std::f64::consts::PI * theta).sin() / std::f64::consts::PI;
    for n in 0..=n_max {
        atoms.push(KreinAtom {
            location: n as f64 + theta,
            weight: w,
        });
        w *= (n as f64 + 1.0 + theta) / (n as f64 + 1.0);
    }
    atoms
}

/// Rebuild Φ_X(q) from the first `n_max + 1` Krein atoms plus an analytic
/// estimate of the dropped tail (whose terms decay like n^{θ−2}). The
/// difference from the closed form is the module's consistency oracle for
/// the residue weights.
pub fn krein_reconstruction(theta: f64, n_max: usize, q: f64) -> f64 {
    assert!(q > 0.0, "Laplace argument must be positive, got {q}");
    let mut sum = 0.0;
    let mut last = 0.0;
    for atom in krein_atoms(theta, n_max) {
        last = atom.weight / (atom.location * (q + atom.location));
        sum += last;
    }
    // Σ_{n>N} c·n^{θ−2} ≈ c·N^{θ−1}/(1−θ) with c matched to the last term.
    let tail = last * n_max as f64 / (1.0 - theta);
    q * (sum + tail)
}

/// Truncated excursion tail mass μ̄(c) = Σ w_n·e^{−(n+θ)c}/(n+θ), with the
/// geometric bound tail ≤ term·e^{−c}/(1−e^{−c}) pushed below 1e−8 of the
/// partial sum.
fn excursion_tail_mass(theta: f64, c: f64) -> Result<f64> {
    let ratio = (-c).exp();
    let mut w = theta * (std::f64::consts::PI * theta).sin() / std::f64::consts::PI;
    let mut sum = 0.0;
    for n in 0..20_000_000u64 {
        let rate = n as f64 + theta;
        let term = w * (-rate * c).exp() / rate;
        sum += term;
        let bound = term * ratio / (1.0 - ratio);
        if bound < 1e-8 * sum {
            return Ok(sum);
        }
        w *= (n as f64 + 1.0 + theta) / (n as f64 + 1.0);
    }
    Err(Error::ConvergenceFailure {
        what: format!("excursion tail mass at c = {c}"),
        residual: ratio / (1.0 - ratio),
        steps: 20_000_000,
    })
}

/// P(excursion length > b | length > a) = μ̄(b)/μ̄(a) for 0 < a ≤ b: the
/// stable tail ratio (a/b)^θ for the self-similar parent, the
/// exponential-mixture tail ratio for the Laguerre families (normalization
/// constants cancel, so all three share one formula).
pub fn excursion_survival(exponent: &SubordinatorExponent, a: f64, b: f64) -> Result<f64> {
    if !(a > 0.0) {
        return Err(Error::DomainViolation(format!(
            "excursion length threshold must be positive, got a = {a}"
        )));
    }
    if !(b >= a) {
        return Err(Error::DomainViolation(format!(
            "upper threshold must dominate: a = {a}, b = {b}"
        )));
    }
    let tag = exponent.tag().ok_or_else(|| {
        Error::DomainViolation(format!(
            "no excursion-length law on file for synthetic exponent `{}`",
            exponent.label()
        ))
    })?;
    if b == a {
        return Ok(1.0);
    }
    match tag {
        ExponentTag::XbarSelfSimilar => Ok((a / b).powf(exponent.theta())),
        _ => {
            let theta = exponent.theta();
            Ok(excursion_tail_mass(theta, b)? / excursion_tail_mass(theta, a)?)
        }
    }
}

/// E[e^{−q·ζ}] for the last exit time ζ from the boundary: δ/Φ(q). The
/// catalogued exponents are recurrent (δ = 0), so ζ = ∞ almost surely and
/// the transform vanishes; a killed (shifted) exponent returns its atom at
/// infinity's complement, δ₀/Φ(q).
pub fn last_exit_laplace(exponent: &SubordinatorExponent, q: f64) -> f64 {
    assert!(q > 0.0, "Laplace exponent argument must be positive, got {q}");
    lk_parts(exponent).killing / exponent.phi(q)
}

/// Outcome of the Pick/Bernstein structural test of an exponent.
#[derive(Clone, Copy, Debug)]
pub struct PickBernsteinReport {
    /// Im Φ(z) ≥ −1e−10 held at every checked half-plane point.
    pub pick_ok: bool,
    /// Number of upper-half-plane points actually evaluated (0 when the
    /// exponent carries no analytic continuation).
    pub pick_points: usize,
    /// Smallest Im Φ(z) seen (+∞ if no points were evaluated).
    pub worst_im: f64,
    /// Finite-difference derivatives alternate in sign on (0, ∞).
    pub bernstein_ok: bool,
    /// Most negative normalized alternation value seen.
    pub worst_defect: f64,
}

impl PickBernsteinReport {
    pub fn passed(&self) -> bool {
        self.pick_ok && self.bernstein_ok
    }
}

/// Default upper-half-plane sample points for [`pick_bernstein_check`].
pub fn upper_half_plane_grid() -> Vec<Complex64> {
    let mut grid = Vec::new();
    for re in [-1.3, -0.4, 0.3, 1.0, 2.7, 8.0] {
        for im in [0.05, 0.4, 1.5, 12.0] {
            grid.push(Complex64::new(re, im));
        }
    }
    grid
}

/// Structural sanity of a Laplace exponent: a Bernstein function extends to
/// a Pick function (it preserves the upper half-plane), and its finite
/// differences alternate in sign. Points of `grid` with Im z ≤ 0 are
/// ignored; the half-plane part is skipped entirely (zero points) for
/// synthetic exponents without a continuation.
pub fn pick_bernstein_check(
    exponent: &SubordinatorExponent,
    grid: &[Complex64],
) -> PickBernsteinReport {
    let mut pick_ok = true;
    let mut pick_points = 0;
    let mut worst_im = f64::INFINITY;
    for &z in grid.iter().filter(|z| z.im > 0.0) {
        if let Some(value) = exponent.phi_complex(z) {
            pick_points += 1;
            worst_im = worst_im.min(value.im);
            if value.im < -1e-10 {
                pick_ok = false;
            }
        }
    }

    // (−1)^{k−1}·Δ_h^k Φ(x) ≥ 0 up to roundoff, for the first four orders on
    // a log-spaced grid — the finite-difference face of complete monotonicity
    // of Φ′ (k = 1: nondecreasing; k = 2: concave; …).
    let mut bernstein_ok = true;
    let mut worst_defect = f64::INFINITY;
    for i in 0..16 {
        let x = 1e-2 * 10f64.powf(i as f64 * 4.0 / 15.0);
        let h = x / 10.0;
        for k in 1..=4usize {
            let mut delta = 0.0;
            let mut scale = 1.0f64;
            for j in 0..=k {
                let term = binomial(k, j) * exponent.phi(x + j as f64 * h);
                scale = scale.max(term.abs());
                if (k - j) % 2 == 0 {
                    delta += term;
                } else {
                    delta -= term;
                }
            }
            let signed = if k % 2 == 1 { delta } else { -delta };
            let normalized = signed / scale;
            worst_defect = worst_defect.min(normalized);
            if normalized < -1e-10 {
                bernstein_ok = false;
            }
        }
    }

    PickBernsteinReport {
        pick_ok,
        pick_points,
        worst_im,
        bernstein_ok,
        worst_defect,
    }
}
