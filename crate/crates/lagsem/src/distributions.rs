//! Laws attached to a model: moment tables of the auxiliary distributions,
//! the Mellin transform of the invariant law and its numerical inversion, and
//! Gaussian quadrature matched to the exponential functional.
//!
//! Five positive laws are tracked through their entire moment sequences, all
//! plain products of exponent values ([`MomentKind`]). The Mellin transform
//! M_{V_ψ}(z) = Γ(z−θ)·W_φ(z) / (Γ(1−θ)·Γ(z)) interpolates the invariant
//! law's moments; inverting it along the vertical line Re z = θ + 1/2
//! recovers the invariant density ([`DensityInverter`]). The exponential
//! functional's moments feed a small Gauss rule ([`gauss_rule_iphi`]) so that
//! averaging a function against its law costs k evaluations.

use std::f64::consts::PI;
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::bernstein::wphi_ln;
use crate::dd::Dd;
use crate::error::{Error, Result};
use crate::model::PsiModel;
use crate::special::{ln_gamma, ln_gamma_c};

/// The five moment sequences the toolkit keeps tables for.
///
/// `VPsi` is the invariant law of the reflected process, `IPhi` the
/// exponential functional driving the intertwining kernel, `VT1Psi` the
/// invariant law of the once-shifted exponent, `MUp` the invariant measure of
/// the ascending (killed) variant, and `GammaRef` the Gamma(1−θ) reference
/// law that the first two factorize against.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MomentKind {
    VPsi,
    IPhi,
    VT1Psi,
    MUp,
    GammaRef,
}

impl MomentKind {
    pub const ALL: [MomentKind; 5] = [
        MomentKind::VPsi,
        MomentKind::IPhi,
        MomentKind::VT1Psi,
        MomentKind::MUp,
        MomentKind::GammaRef,
    ];

    fn slot(self) -> usize {
        match self {
            MomentKind::VPsi => 0,
            MomentKind::IPhi => 1,
            MomentKind::VT1Psi => 2,
            MomentKind::MUp => 3,
            MomentKind::GammaRef => 4,
        }
    }

    /// One extension step in logs: ln(M(n+1)/M(n)).
    ///
    /// Every factor is strictly positive for n ≥ 1: ψ, T₁ψ and ψ↑ are
    /// positive past θ < 1, and φ is positive everywhere on (0, ∞).
    fn ln_step(self, model: &PsiModel, n: usize) -> f64 {
        let k = n as f64;
        match self {
            MomentKind::VPsi => (model.psi(k) / k).ln(),
            MomentKind::IPhi => (k / model.phi(k)).ln(),
            MomentKind::VT1Psi => (model.t1psi(k) / k).ln(),
            MomentKind::MUp => (model.psi_up(k) / k).ln(),
            MomentKind::GammaRef => (k - model.theta()).ln(),
        }
    }
}

impl FromStr for MomentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "v_psi" | "vpsi" => Ok(MomentKind::VPsi),
            "i_phi" | "iphi" => Ok(MomentKind::IPhi),
            "v_t1psi" | "vt1psi" => Ok(MomentKind::VT1Psi),
            "m_up" | "mup" => Ok(MomentKind::MUp),
            "gamma" | "gamma_ref" => Ok(MomentKind::GammaRef),
            other => Err(Error::Config(format!(
                "unknown moment kind `{other}`; expected v_psi | i_phi | v_t1psi | m_up | gamma_ref"
            ))),
        }
    }
}

/// ln M(n+1): the log of the n-th entire moment of the requested law.
///
/// Tables extend on demand behind a per-model lock and are never shrunk, so a
/// returned value is stable for the lifetime of the model. Prefer this over
/// [`moments`] when the value will be combined with Gamma factors — entries
/// grow factorially and `exp` overflows near n ≈ 170.
pub fn moments_ln(model: &PsiModel, kind: MomentKind, n: usize) -> f64 {
    let mut table = model.caches.moments[kind.slot()]
        .lock()
        .expect("moment table lock poisoned");
    if table.is_empty() {
        table.push(0.0); // M(1) = 1: all five laws are normalized
    }
    while table.len() <= n {
        let next = table.last().expect("never empty") + kind.ln_step(model, table.len());
        table.push(next);
    }
    table[n]
}

/// The n-th entire moment M(n+1) itself.
pub fn moments(model: &PsiModel, kind: MomentKind, n: usize) -> f64 {
    moments_ln(model, kind, n).exp()
}

/// ln M_{V_ψ}(z) = ln Γ(z−θ) + ln W_φ(z) − ln Γ(1−θ) − ln Γ(z), Re z > θ.
///
/// The transform has its rightmost pole at z = θ; accuracy degrades as the
/// contour argument approaches it, which matters only to callers probing the
/// strip edge (the density inverter stays half a unit away).
pub fn mellin_v_ln(model: &PsiModel, z: Complex64) -> Result<Complex64> {
    let theta = model.theta();
    if !(z.re > theta) {
        return Err(Error::DomainViolation(format!(
            "Mellin transform of the invariant law needs Re z > theta = {theta}, got z = {z}"
        )));
    }
    Ok(ln_gamma_c(z - theta) + wphi_ln(model, z)? - ln_gamma(1.0 - theta) - ln_gamma_c(z))
}

/// Mellin transform of the invariant law at z, Re z > θ.
pub fn mellin_v(model: &PsiModel, z: Complex64) -> Result<Complex64> {
    Ok(mellin_v_ln(model, z)?.exp())
}

/// Spacing of the contour samples in the imaginary direction.
const CONTOUR_STEP: f64 = 1.0 / 64.0;
/// Hard ceiling on the truncation height |b| of the inversion integral.
const CONTOUR_CAP: f64 = 200.0;
/// Samples added per extension round (four units of b).
const CONTOUR_BLOCK: usize = 256;

/// Numerical Mellin inversion of the invariant density along Re z = θ + 1/2.
///
/// 𝔪(x) = (1/2π) ∫ x^{−c−ib} M_{V_ψ}(c+ib) db, evaluated by the trapezoid
/// rule with step 1/64. That step is effectively exact here: the integrand is
/// analytic in the strip |Im| < 1/2 around the contour, so the trapezoid's
/// aliasing error decays like e^{−π/step} and truncation of the tail is the
/// only error that matters. Samples are computed once per model (shared
/// through the model's caches, in parallel) and reused by every evaluation;
/// the vertical decay rate is fitted on the trailing block to bound the
/// truncated tail, and the contour is extended until that bound is below
/// target for the requested x.
pub struct DensityInverter {
    model: PsiModel,
}

impl DensityInverter {
    pub fn new(model: &PsiModel) -> Self {
        DensityInverter {
            model: model.clone(),
        }
    }

    fn contour_c(&self) -> f64 {
        self.model.theta() + 0.5
    }

    /// Grow the shared sample table so that index `upto` exists.
    fn extend(&self, samples: &mut Vec<Complex64>, upto: usize) -> Result<()> {
        if upto < samples.len() {
            return Ok(());
        }
        let c = self.contour_c();
        let fresh: Result<Vec<Complex64>> = (samples.len()..=upto)
            .into_par_iter()
            .map(|j| {
                let z = Complex64::new(c, j as f64 * CONTOUR_STEP);
                Ok(mellin_v_ln(&self.model, z)?.exp())
            })
            .collect();
        samples.extend(fresh?);
        Ok(())
    }

    /// Decay rate per unit b fitted over the trailing block; +∞ once the
    /// samples underflow, 0 when they are not (yet) decreasing.
    fn decay_rate(samples: &[Complex64]) -> f64 {
        let j1 = samples.len() - 1;
        let j0 = j1.saturating_sub(CONTOUR_BLOCK);
        let m1 = samples[j1].norm();
        if m1 == 0.0 {
            return f64::INFINITY;
        }
        let rate = (samples[j0].norm() / m1).ln() / ((j1 - j0) as f64 * CONTOUR_STEP);
        rate.max(0.0)
    }

    /// Density value at x > 0 together with a truncation-error estimate.
    pub fn value(&self, x: f64) -> Result<(f64, f64)> {
        if !(x > 0.0) {
            return Err(Error::DomainViolation(format!(
                "density is defined for x > 0, got {x}"
            )));
        }
        let theta = self.model.theta();
        let c = self.contour_c();
        // Near zero the density itself blows up like x^{−θ}; keep the target
        // relative to that scale so tiny x stays cheap and large x accurate.
        let scale = x.powf(-theta).max(1.0);
        let target = 1e-10 * scale;

        let mut samples = self
            .model
            .caches
            .contour
            .lock()
            .expect("contour lock poisoned");
        self.extend(&mut samples, 2 * CONTOUR_BLOCK)?;
        let tail = loop {
            let m_end = samples.last().expect("nonempty").norm();
            if m_end == 0.0 {
                break 0.0;
            }
            let rate = Self::decay_rate(&samples);
            let b_end = (samples.len() - 1) as f64 * CONTOUR_STEP;
            let tail = if rate > 0.0 {
                x.powf(-c) * m_end / (PI * rate)
            } else {
                f64::INFINITY
            };
            if tail <= target {
                break tail;
            }
            if b_end >= CONTOUR_CAP {
                if tail > 1e-8 * scale {
                    return Err(Error::SlowDecay {
                        tail,
                        cutoff: b_end,
                    });
                }
                break tail;
            }
            let last = ((CONTOUR_CAP / CONTOUR_STEP) as usize).min(samples.len() - 1 + CONTOUR_BLOCK);
            self.extend(&mut samples, last)?;
        };

        // (1/2π)∫_{−B}^{B} = (1/π)·Re ∫_0^B by conjugate symmetry in b.
        let lnx = x.ln();
        let mut acc = 0.0;
        for (j, m) in samples.iter().enumerate() {
            let (s, cos) = (-(j as f64) * CONTOUR_STEP * lnx).sin_cos();
            acc += cos * m.re - s * m.im;
        }
        let j_last = samples.len() - 1;
        acc -= 0.5 * samples[0].re;
        let (s, cos) = (-(j_last as f64) * CONTOUR_STEP * lnx).sin_cos();
        acc -= 0.5 * (cos * samples[j_last].re - s * samples[j_last].im);

        let value = acc * CONTOUR_STEP * x.powf(-c) / PI;
        let err = tail + 1e-14 * scale;
        Ok((value.max(0.0), err))
    }

    /// ∫𝔪 and ∫x·𝔪 by Simpson's rule after the substitution x = e^y.
    ///
    /// The window [−40, ln 60] leaves out less than 3e−9 of mass at either
    /// end for any model with σ² > 0 (left tail ~ x^{1−θ}, right tail at
    /// least e^{−x·2/σ²}-ish), well inside the 1e−6 quadrature contract.
    pub fn mass_and_mean(&self) -> Result<(f64, f64)> {
        let (y_lo, y_hi) = (-40.0, 60f64.ln());
        let panels = 4096usize; // even
        let h = (y_hi - y_lo) / panels as f64;
        let (mut s0, mut s1) = (0.0, 0.0);
        for i in 0..=panels {
            let w = if i == 0 || i == panels {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            let x = (y_lo + i as f64 * h).exp();
            let (d, _) = self.value(x)?;
            s0 += w * d * x;
            s1 += w * d * x * x;
        }
        Ok((s0 * h / 3.0, s1 * h / 3.0))
    }
}

/// Invariant density 𝔪(x) and its error estimate. Contour samples are cached
/// on the model, so repeated calls cost one pass over the samples each.
pub fn density_m(model: &PsiModel, x: f64) -> Result<(f64, f64)> {
    DensityInverter::new(model).value(x)
}

/// A quadrature rule matched to the exponential functional: k positive nodes
/// and positive weights summing to one, reproducing its moments up to order
/// 2k−1.
#[derive(Clone, Debug)]
pub struct GaussRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussRule {
    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Σ_j w_j f(node_j) ≈ E[f(I_φ)].
    pub fn apply<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    /// Largest relative defect in reproducing the exponential functional's
    /// moments of order j ≤ 2k−1 (the rule's defining property).
    pub fn moment_defect(&self, model: &PsiModel) -> f64 {
        (0..2 * self.order())
            .map(|j| {
                let exact = moments(model, MomentKind::IPhi, j);
                let quad = self.apply(|x| x.powi(j as i32));
                ((quad - exact) / exact).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Hard cap on the rule order: Hankel conditioning roughly squares per
/// order, and double-double working precision is spent by k ≈ 8.
const GAUSS_ORDER_CAP: usize = 8;

/// Build the k-point Gauss rule for the law of the exponential functional
/// from its raw moments, k ≤ 8.
///
/// Pipeline: moments in double-double via M(n+1) = M(n)·n/φ(n) → Cholesky
/// factorization of the (k+1)×(k+1) Hankel matrix → three-term recurrence
/// coefficients read off the factor → symmetric tridiagonal eigensolve
/// (nodes = eigenvalues, weights = squared first components). Only the
/// moment-to-recurrence stage is ill-conditioned, hence the dd arithmetic
/// there; the tridiagonal eigenproblem is perfectly conditioned in f64.
///
/// A vanishing Cholesky pivot means the law is supported on fewer than k
/// points, and the rule truncates to that exact support: the degenerate
/// I_φ ≡ 1 of the pure-Gaussian model comes back as the single node 1 with
/// weight 1 for any requested k.
pub fn gauss_rule_iphi(model: &PsiModel, k: usize) -> Result<GaussRule> {
    if k == 0 || k > GAUSS_ORDER_CAP {
        return Err(Error::DomainViolation(format!(
            "gauss rule order must lie in 1..={GAUSS_ORDER_CAP}, got {k}"
        )));
    }

    // Raw moments m_0..m_2k in double-double.
    let mut m = vec![Dd::ONE; 2 * k + 1];
    for j in 1..=2 * k {
        m[j] = m[j - 1]
            .scale(j as f64)
            .div(Dd::from_f64(model.phi(j as f64)));
    }

    // Upper-triangular Cholesky factor of H[i][j] = m[i+j], row by row,
    // truncating at the first numerically-zero pivot (rank deficiency).
    let dim = k + 1;
    let mut r = vec![vec![Dd::ZERO; dim]; dim];
    let mut rank = dim;
    for i in 0..dim {
        let mut pivot2 = m[2 * i];
        for l in 0..i {
            pivot2 = pivot2.sub(r[l][i].mul(r[l][i]));
        }
        if pivot2.to_f64() <= m[2 * i].to_f64() * 1e-26 {
            rank = i;
            break;
        }
        let rii = pivot2.sqrt();
        r[i][i] = rii;
        for j in i + 1..dim {
            let mut v = m[i + j];
            for l in 0..i {
                v = v.sub(r[l][i].mul(r[l][j]));
            }
            r[i][j] = v.div(rii);
        }
    }
    let order = k.min(rank);

    // Recurrence coefficients: α_j = r[j][j+1]/r[j][j] − r[j−1][j]/r[j−1][j−1],
    // b_j = r[j][j]/r[j−1][j−1] (the off-diagonal of the Jacobi matrix).
    let mut diag = vec![0.0f64; order];
    let mut off = vec![0.0f64; order];
    for j in 0..order {
        let lead = r[j][j + 1].div(r[j][j]);
        let prev = if j > 0 {
            r[j - 1][j].div(r[j - 1][j - 1])
        } else {
            Dd::ZERO
        };
        diag[j] = lead.sub(prev).to_f64();
        if j > 0 {
            off[j] = r[j][j].div(r[j - 1][j - 1]).to_f64();
        }
    }

    let (nodes, weights) = jacobi_eigen(diag, off, k)?;

    for (i, (&x, &w)) in nodes.iter().zip(&weights).enumerate() {
        if !(x > 0.0) || (i > 0 && nodes[i - 1] >= x) {
            return Err(Error::IllConditioned {
                order: k,
                reason: format!("nodes not positive increasing: {nodes:?}"),
            });
        }
        if w < 0.0 {
            return Err(Error::IllConditioned {
                order: k,
                reason: format!("negative weight {w} at node {x}"),
            });
        }
    }
    Ok(GaussRule { nodes, weights })
}

/// QL with implicit shifts on a symmetric tridiagonal matrix, tracking only
/// the first row of the eigenvector matrix (all a Gauss rule needs). `off[j]`
/// couples `diag[j−1]` and `diag[j]`. Returns (eigenvalues ascending,
/// squared first components).
fn jacobi_eigen(mut d: Vec<f64>, off: Vec<f64>, req_order: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = d.len();
    let mut q = vec![0.0; n];
    q[0] = 1.0;
    if n == 1 {
        return Ok((d, vec![1.0]));
    }
    // e[i] couples d[i] and d[i+1]; e[n−1] is padding.
    let mut e: Vec<f64> = (1..n).map(|j| off[j]).chain(std::iter::once(0.0)).collect();

    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut mm = l;
            while mm < n - 1 {
                let scale = d[mm].abs() + d[mm + 1].abs();
                if e[mm].abs() <= f64::EPSILON * scale {
                    break;
                }
                mm += 1;
            }
            if mm == l {
                break;
            }
            iter += 1;
            if iter > 50 {
                return Err(Error::IllConditioned {
                    order: req_order,
                    reason: "tridiagonal eigeniteration stalled".into(),
                });
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut rr = g.hypot(1.0);
            g = d[mm] - d[l] + e[l] / (g + rr.copysign(if g == 0.0 { 1.0 } else { g }));
            let (mut s, mut c) = (1.0, 1.0);
            let mut p = 0.0;
            let mut underflowed = false;
            for i in (l..mm).rev() {
                let mut f = s * e[i];
                let b = c * e[i];
                rr = f.hypot(g);
                e[i + 1] = rr;
                if rr == 0.0 {
                    d[i + 1] -= p;
                    e[mm] = 0.0;
                    underflowed = true;
                    break;
                }
                s = f / rr;
                c = g / rr;
                g = d[i + 1] - p;
                rr = (d[i] - g) * s + 2.0 * c * b;
                p = s * rr;
                d[i + 1] = g + p;
                g = c * rr - b;
                f = q[i + 1];
                q[i + 1] = s * q[i] + c * f;
                q[i] = c * q[i] - s * f;
            }
            if underflowed {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[mm] = 0.0;
        }
    }

    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
    let nodes: Vec<f64> = idx.iter().map(|&i| d[i]).collect();
    let weights: Vec<f64> = idx.iter().map(|&i| q[i] * q[i]).collect();
    Ok((nodes, weights))
}
