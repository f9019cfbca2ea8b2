//! Path simulation and Monte Carlo estimation.
//!
//! Three layers, mirroring the pathwise construction of the process:
//!
//! 1. [`simulate_levy`] draws the driving spectrally negative Lévy path ξ on
//!    a uniform grid (Gaussian increments, Poisson jump counts per catalogue
//!    component, exponential jump sizes by inversion).
//! 2. [`lamperti_path`] time-changes e^ξ through the exponential clock
//!    A(s) = ∫₀ˢ e^{ξ_r} dr (trapezoid rule, linear interpolation at the
//!    crossing) into the self-similar path X̄ started from x₀, absorbed when
//!    it first drops to `eps_absorb`.
//! 3. [`laguerre_path`] maps X̄ onto the stationary clock,
//!    X_τ = e^{-τ} X̄_{e^τ - 1}.
//!
//! [`estimate`] runs replicated functionals of the chain through a fused
//! driver that interleaves the three layers step by step, so a replica stops
//! the moment it is absorbed instead of simulating a fixed Lévy horizon.
//! Replicas are distributed with rayon but each replica owns a counter-mode
//! generator stream derived from (seed, replica index) and the reduction is
//! performed in replica order, so results are bit-identical for any thread
//! count.

use crate::error::{Error, Result};
use crate::model::{JumpComponent, PsiModel};
use crate::poly::ThetaShiftedPoly;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;

/// Hard cap on driving-path steps inside one fused segment, so a
/// misconfigured run fails with [`Error::ClockOverrun`] instead of spinning.
const SEGMENT_STEP_CAP: u64 = 100_000_000;

/// Discretisation and replication parameters shared by all simulators.
#[derive(Debug, Clone)]
pub struct PathConfig {
    /// Step of the driving-path grid (and of the output grid).
    pub dt: f64,
    /// Additive time horizon of the simulated path.
    pub horizon: f64,
    /// Absorption threshold: the self-similar path is declared dead when it
    /// first drops to this level or below.
    pub eps_absorb: f64,
    /// Master seed; replica r uses stream r of this seed.
    pub seed: u64,
    /// Number of independent replicas aggregated by [`estimate`].
    pub replicas: usize,
}

impl PathConfig {
    /// Check the parameters before any simulation starts.
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("step must be positive, got {}", self.dt)));
        }
        if !(self.horizon >= 0.0 && self.horizon.is_finite()) {
            return Err(Error::Config(format!(
                "horizon must be nonnegative, got {}",
                self.horizon
            )));
        }
        if !(self.eps_absorb > 0.0 && self.eps_absorb.is_finite()) {
            return Err(Error::Config(format!(
                "absorption threshold must be positive, got {}",
                self.eps_absorb
            )));
        }
        if self.replicas == 0 {
            return Err(Error::Config("replica count must be at least 1".into()));
        }
        Ok(())
    }
}

/// A sampled path on an increasing time grid.
#[derive(Debug, Clone)]
pub struct PathSample {
    /// Sampling times, increasing, starting at 0.
    pub times: Vec<f64>,
    /// States at `times`; same length.
    pub states: Vec<f64>,
    /// Whether the path was stopped by absorption.
    pub absorbed: bool,
    /// First grid time at which the state was at or below the threshold.
    pub absorption_time: Option<f64>,
}

impl PathSample {
    /// Value at time `t` by linear interpolation on the stored grid.
    ///
    /// Returns `Some(0.0)` at and after the absorption time (the path sits
    /// in the cemetery) and `None` when `t` lies beyond the stored horizon
    /// of a path that was never absorbed.
    pub fn value_at(&self, t: f64) -> Option<f64> {
        if self.absorbed {
            if let Some(ta) = self.absorption_time {
                if t >= ta {
                    return Some(0.0);
                }
            }
        }
        let last = *self.times.last()?;
        if t < self.times[0] || t > last {
            return None;
        }
        let idx = self.times.partition_point(|&u| u < t);
        if idx == 0 {
            return Some(self.states[0]);
        }
        let (t0, t1) = (self.times[idx - 1], self.times[idx]);
        let (x0, x1) = (self.states[idx - 1], self.states[idx]);
        if t1 == t0 {
            return Some(x1);
        }
        let g = (t - t0) / (t1 - t0);
        Some(x0 + g * (x1 - x0))
    }
}

/// Generator for replica `replica` of master seed `seed`.
///
/// Every replica gets its own counter stream of the same keyed cipher, so
/// the draw sequence of a replica does not depend on how many replicas run,
/// in which order, or on how they are assigned to threads.
pub fn replica_rng(seed: u64, replica: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replica);
    rng
}

/// One jump component prepared for stepping at a fixed step size.
struct JumpSampler {
    /// Total arrival rate (per unit time).
    rate: f64,
    /// Count distribution for a full step.
    counts: Poisson<f64>,
    /// `Some(y)` for an atom of fixed size y, `None` for exponential sizes.
    atom_size: Option<f64>,
    /// Rate of the exponential size law when `atom_size` is `None`.
    size_rate: f64,
}

impl JumpSampler {
    /// Total (negative) jump contribution over one full step.
    fn step<R: Rng>(&self, rng: &mut R) -> f64 {
        let n = self.counts.sample(rng) as u64;
        self.sized_sum(n, rng)
    }

    /// Same with an ad-hoc elapsed time `h` (for a shortened last step).
    fn step_partial<R: Rng>(&self, h: f64, rng: &mut R) -> f64 {
        let n = Poisson::new(self.rate * h)
            .expect("positive finite mean")
            .sample(rng) as u64;
        self.sized_sum(n, rng)
    }

    fn sized_sum<R: Rng>(&self, n: u64, rng: &mut R) -> f64 {
        match self.atom_size {
            Some(y) => -(n as f64) * y,
            None => {
                let mut total = 0.0;
                for _ in 0..n {
                    // Inversion: y = -ln(1 - U)/λ with U uniform on [0, 1).
                    let u: f64 = rng.random();
                    total -= -(1.0 - u).ln() / self.size_rate;
                }
                total
            }
        }
    }
}

/// Stepper for the driving Lévy path at a fixed grid step.
struct LevyStepper {
    /// Pathwise drift b = β + ∫_(0,1) y Π(dy), so that the compensated
    /// small-jump part of the exponent is realised by the jumps themselves.
    drift: f64,
    /// Gaussian scale per full step, σ√dt.
    gauss_scale: f64,
    sigma: f64,
    dt: f64,
    jumps: Vec<JumpSampler>,
}

impl LevyStepper {
    fn new(model: &PsiModel, dt: f64) -> Result<Self> {
        let quad = model.quad();
        if quad.kappa != 0.0 {
            return Err(Error::Config(
                "path simulation covers conservative drivers only; kill with a killing rate \
                 by discounting the functional instead"
                    .into(),
            ));
        }
        let mut drift = quad.beta;
        let mut jumps = Vec::with_capacity(quad.jumps.len());
        for component in &quad.jumps {
            let (rate, atom_size, size_rate) = match *component {
                JumpComponent::Atom { y, w } => {
                    if y < 1.0 {
                        drift += w * y;
                    }
                    (w, Some(y), 0.0)
                }
                JumpComponent::Exp { c, lambda } => {
                    drift += c * component.small_mean_unit();
                    (c / lambda, None, lambda)
                }
            };
            jumps.push(JumpSampler {
                rate,
                counts: Poisson::new(rate * dt)
                    .map_err(|e| Error::Config(format!("jump rate: {e}")))?,
                atom_size,
                size_rate,
            });
        }
        let sigma = quad.sigma2.sqrt();
        Ok(LevyStepper {
            drift,
            gauss_scale: sigma * dt.sqrt(),
            sigma,
            dt,
            jumps,
        })
    }

    /// Increment of ξ over one full step.
    fn step<R: Rng>(&self, rng: &mut R) -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        let mut d = self.drift * self.dt + self.gauss_scale * z;
        for j in &self.jumps {
            d += j.step(rng);
        }
        d
    }

    /// Increment over a shortened step of length `h`.
    fn step_partial<R: Rng>(&self, h: f64, rng: &mut R) -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        let mut d = self.drift * h + self.sigma * h.sqrt() * z;
        for j in &self.jumps {
            d += j.step_partial(h, rng);
        }
        d
    }
}

/// Simulate the driving Lévy path ξ on the grid of `cfg`, stream 0 of the
/// configured seed. ξ starts at 0; a zero horizon yields an empty path.
pub fn simulate_levy(model: &PsiModel, cfg: &PathConfig) -> Result<PathSample> {
    let mut rng = replica_rng(cfg.seed, 0);
    simulate_levy_with(model, cfg, &mut rng)
}

/// Same as [`simulate_levy`] with an explicit generator (one per replica).
pub fn simulate_levy_with(model: &PsiModel, cfg: &PathConfig, rng: &mut ChaCha8Rng) -> Result<PathSample> {
    cfg.validate()?;
    if cfg.horizon == 0.0 {
        return Ok(PathSample {
            times: Vec::new(),
            states: Vec::new(),
            absorbed: false,
            absorption_time: None,
        });
    }
    let stepper = LevyStepper::new(model, cfg.dt)?;
    let full_steps = (cfg.horizon / cfg.dt).floor() as usize;
    let remainder = cfg.horizon - full_steps as f64 * cfg.dt;
    let n = full_steps + usize::from(remainder > 0.0);
    let mut times = Vec::with_capacity(n + 1);
    let mut states = Vec::with_capacity(n + 1);
    times.push(0.0);
    states.push(0.0);
    let mut xi = 0.0;
    for k in 1..=full_steps {
        xi += stepper.step(rng);
        times.push(k as f64 * cfg.dt);
        states.push(xi);
    }
    if remainder > 0.0 {
        xi += stepper.step_partial(remainder, rng);
        times.push(cfg.horizon);
        states.push(xi);
    }
    Ok(PathSample {
        times,
        states,
        absorbed: false,
        absorption_time: None,
    })
}

/// Time-change a driving path into the self-similar path started at `x0`.
///
/// The output grid is `cfg.dt` up to `cfg.horizon` (in the additive time of
/// the self-similar process). The exponential clock is integrated by the
/// trapezoid rule over the driving grid and inverted by a forward sweep;
/// the driving path is interpolated linearly inside the crossing step. The
/// path is truncated at the first grid time where it is at or below
/// `cfg.eps_absorb`. If the driving path's clock runs out before the
/// requested horizon (and before absorption), the call fails with
/// [`Error::ClockOverrun`].
pub fn lamperti_path(levy: &PathSample, x0: f64, cfg: &PathConfig) -> Result<PathSample> {
    cfg.validate()?;
    if !(x0 > 0.0 && x0.is_finite()) {
        return Err(Error::DomainViolation(format!(
            "self-similar start must be positive, got {x0}"
        )));
    }
    let n_out = (cfg.horizon / cfg.dt).ceil() as usize;
    let mut times = Vec::with_capacity(n_out + 1);
    let mut states = Vec::with_capacity(n_out + 1);
    times.push(0.0);
    states.push(x0);
    let mut absorbed = false;
    let mut absorption_time = None;

    // Clock state over the driving grid: bracket [a_prev, a_cur] of the most
    // recent driving step, with the matching path values.
    let mut idx = 0usize; // driving grid point already reached by the clock
    let mut a_prev = 0.0;
    let mut a_cur = 0.0;
    let mut e_at_idx = levy.states.first().map_or(1.0, |s| s.exp());

    'outer: for k in 1..=n_out {
        let t_k = (k as f64 * cfg.dt).min(cfg.horizon);
        let target = t_k / x0;
        while a_cur < target {
            if idx + 1 >= levy.times.len().max(1) {
                return Err(Error::ClockOverrun {
                    needed: target,
                    reached: a_cur,
                });
            }
            let h = levy.times[idx + 1] - levy.times[idx];
            let e_next = levy.states[idx + 1].exp();
            a_prev = a_cur;
            a_cur += 0.5 * h * (e_at_idx + e_next);
            e_at_idx = e_next;
            idx += 1;
        }
        // Interpolate ξ inside the crossing step at clock value `target`.
        let xi_star = if a_cur > a_prev {
            let g = (target - a_prev) / (a_cur - a_prev);
            let xi0 = levy.states[idx - 1];
            let xi1 = levy.states[idx];
            xi0 + g * (xi1 - xi0)
        } else {
            levy.states[idx]
        };
        let x = x0 * xi_star.exp();
        times.push(t_k);
        states.push(x);
        if x <= cfg.eps_absorb {
            absorbed = true;
            absorption_time = Some(t_k);
            break 'outer;
        }
    }
    Ok(PathSample {
        times,
        states,
        absorbed,
        absorption_time,
    })
}

/// Map a self-similar path onto the stationary clock:
/// X_τ = e^{-τ} X̄_{e^τ - 1}, sampled at τ_j = ln(1 + t_j).
pub fn laguerre_path(ssmp: &PathSample) -> PathSample {
    let times: Vec<f64> = ssmp.times.iter().map(|&t| t.ln_1p()).collect();
    let states: Vec<f64> = ssmp
        .times
        .iter()
        .zip(&ssmp.states)
        .map(|(&t, &x)| x / (1.0 + t))
        .collect();
    PathSample {
        times,
        states,
        absorbed: ssmp.absorbed,
        absorption_time: ssmp.absorption_time.map(|t| t.ln_1p()),
    }
}

/// Reusable output of one fused stretch: the grid times and states filled
/// by [`fused_segment`].
#[derive(Default)]
struct SegmentBuf {
    taus: Vec<f64>,
    xs: Vec<f64>,
}

/// One fused stretch of the stationary-clock process: drive ξ step by step,
/// push it through the exponential clock, and emit X on the uniform grid
/// `dtau` until `n_out` points are produced or the path drops to `eps`.
///
/// `out` is cleared and refilled so restart drivers can reuse the buffers.
/// The return value is the absorption time: the level crossing
/// X = x0·e^ξ / (1 + x0·A) ≤ eps is detected on the driving grid and
/// resolved inside the crossing step by a secant step on ln X, so hitting
/// times are not quantized to the output grid. An absorbed stretch ends
/// with the sample (τ_death, eps).
fn fused_segment(
    stepper: &LevyStepper,
    x0: f64,
    eps: f64,
    dtau: f64,
    n_out: usize,
    rng: &mut ChaCha8Rng,
    out: &mut SegmentBuf,
) -> Result<Option<f64>> {
    let SegmentBuf { taus, xs } = out;
    taus.clear();
    xs.clear();
    taus.push(0.0);
    xs.push(x0);

    let mut xi_prev = 0.0;
    let mut xi_cur = 0.0;
    let mut e_cur = 1.0;
    let mut a_prev = 0.0;
    let mut a_cur = 0.0;
    let mut steps: u64 = 0;

    for k in 1..=n_out {
        let tau_k = k as f64 * dtau;
        let target = tau_k.exp_m1() / x0;
        while a_cur < target {
            steps += 1;
            if steps > SEGMENT_STEP_CAP {
                return Err(Error::ClockOverrun {
                    needed: target,
                    reached: a_cur,
                });
            }
            xi_prev = xi_cur;
            let e_old = e_cur;
            xi_cur += stepper.step(rng);
            e_cur = xi_cur.exp();
            a_prev = a_cur;
            a_cur += 0.5 * stepper.dt * (e_old + e_cur);
            if x0 * e_cur <= eps * (1.0 + x0 * a_cur) {
                // The stationary-clock value crossed the absorption level
                // inside this step; place the death by a secant step on
                // ln X, which is exact when ξ and A are linear in s.
                let ln_level = (eps / x0).ln();
                let f0 = xi_prev - (x0 * a_prev).ln_1p() - ln_level;
                let f1 = xi_cur - (x0 * a_cur).ln_1p() - ln_level;
                let g = if f0 > 0.0 && f1 < f0 {
                    (f0 / (f0 - f1)).min(1.0)
                } else {
                    1.0
                };
                let a_star = a_prev + g * (a_cur - a_prev);
                let tau_d = (x0 * a_star).ln_1p();
                taus.push(tau_d);
                xs.push(eps);
                return Ok(Some(tau_d));
            }
        }
        let xi_star = if a_cur > a_prev {
            let g = (target - a_prev) / (a_cur - a_prev);
            xi_prev + g * (xi_cur - xi_prev)
        } else {
            xi_cur
        };
        let x = x0 * (xi_star - tau_k).exp();
        taus.push(tau_k);
        xs.push(x);
        if x <= eps {
            return Ok(Some(tau_k));
        }
    }
    Ok(None)
}

/// Simulate the process on the stationary clock with restart: whenever the
/// path is absorbed at `cfg.eps_absorb`, it is restarted from that level, and
/// the chain continues until `cfg.horizon` (stationary-clock time). The
/// returned path is never flagged absorbed.
pub fn laguerre_restart_path(
    model: &PsiModel,
    cfg: &PathConfig,
    x0: f64,
    rng: &mut ChaCha8Rng,
) -> Result<PathSample> {
    cfg.validate()?;
    if !(x0 > 0.0 && x0.is_finite()) {
        return Err(Error::DomainViolation(format!(
            "start must be positive, got {x0}"
        )));
    }
    let stepper = LevyStepper::new(model, cfg.dt)?;
    let n_total = (cfg.horizon / cfg.dt).ceil() as usize;
    let mut times = Vec::with_capacity(n_total + 1);
    let mut states = Vec::with_capacity(n_total + 1);
    times.push(0.0);
    states.push(x0);
    let mut seg = SegmentBuf::default();
    let mut tau_off = 0.0;
    let mut start = x0;
    let mut stretches: u64 = 0;
    while tau_off < cfg.horizon {
        stretches += 1;
        if stretches > SEGMENT_STEP_CAP {
            return Err(Error::ClockOverrun {
                needed: cfg.horizon,
                reached: tau_off,
            });
        }
        let n_out = ((cfg.horizon - tau_off) / cfg.dt).ceil().max(1.0) as usize;
        let absorbed_at = fused_segment(&stepper, start, cfg.eps_absorb, cfg.dt, n_out, rng, &mut seg)?;
        for (tau, x) in seg.taus.iter().zip(&seg.xs).skip(1) {
            times.push(tau_off + tau);
            states.push(*x);
        }
        match absorbed_at {
            Some(td) => {
                tau_off += td;
                start = cfg.eps_absorb;
            }
            None => break,
        }
    }
    Ok(PathSample {
        times,
        states,
        absorbed: false,
        absorption_time: None,
    })
}

/// Euler–Maruyama path of the classical diffusion
/// dY = (1 - θ - Y) dt + √(2 max(Y,0)) dW, reflected at 0 by taking absolute
/// values, on the grid of `cfg`, stream 0 of the configured seed.
pub fn simulate_classical(theta: f64, cfg: &PathConfig, x0: f64) -> Result<PathSample> {
    let mut rng = replica_rng(cfg.seed, 0);
    simulate_classical_with(theta, cfg, x0, &mut rng)
}

/// Same as [`simulate_classical`] with an explicit generator.
pub fn simulate_classical_with(
    theta: f64,
    cfg: &PathConfig,
    x0: f64,
    rng: &mut ChaCha8Rng,
) -> Result<PathSample> {
    cfg.validate()?;
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::Config(format!(
            "index must lie in (0, 1), got {theta}"
        )));
    }
    if !(x0 >= 0.0 && x0.is_finite()) {
        return Err(Error::DomainViolation(format!(
            "diffusion start must be nonnegative, got {x0}"
        )));
    }
    let n = (cfg.horizon / cfg.dt).ceil() as usize;
    let mut times = Vec::with_capacity(n + 1);
    let mut states = Vec::with_capacity(n + 1);
    times.push(0.0);
    states.push(x0);
    let mut x = x0;
    for k in 1..=n {
        let t_k = (k as f64 * cfg.dt).min(cfg.horizon);
        let h = t_k - times[k - 1];
        let z: f64 = rng.sample(StandardNormal);
        x = (x + (1.0 - theta - x) * h + (2.0 * x.max(0.0) * h).sqrt() * z).abs();
        times.push(t_k);
        states.push(x);
    }
    Ok(PathSample {
        times,
        states,
        absorbed: false,
        absorption_time: None,
    })
}

/// Monte Carlo estimate of E_x[e^{-q T₀}] for the classical diffusion, with
/// T₀ approximated by the first grid time at or below `cfg.eps_absorb` and
/// paths still alive at the horizon contributing 0 (a downward bias that
/// vanishes as the horizon grows).
pub fn classical_hitting_laplace(theta: f64, q: f64, x: f64, cfg: &PathConfig) -> Result<Estimate> {
    cfg.validate()?;
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::Config(format!(
            "index must lie in (0, 1), got {theta}"
        )));
    }
    if !(q > 0.0) {
        return Err(Error::DomainViolation(format!(
            "transform argument must be positive, got {q}"
        )));
    }
    if !(x > 0.0) {
        return Err(Error::DomainViolation(format!(
            "start must be positive, got {x}"
        )));
    }
    let n = (cfg.horizon / cfg.dt).ceil() as usize;
    let values = run_replicas(cfg, move |rng| {
        let mut y = x;
        for k in 1..=n {
            let z: f64 = rng.sample(StandardNormal);
            y = (y + (1.0 - theta - y) * cfg.dt + (2.0 * y.max(0.0) * cfg.dt).sqrt() * z).abs();
            if y <= cfg.eps_absorb {
                return Ok((-q * k as f64 * cfg.dt).exp());
            }
        }
        Ok(0.0)
    })?;
    Ok(summarize(&values))
}

/// A path functional that [`estimate`] can average over replicas.
#[derive(Debug, Clone)]
pub enum Observable {
    /// f(X_t) on paths from x, counting absorbed paths as 0: the killed
    /// semigroup applied to f, evaluated at x.
    KilledSemigroup {
        f: ThetaShiftedPoly,
        x: f64,
        t: f64,
    },
    /// e^{-q T₀} from x, with T₀ the absorption time on the stationary
    /// clock; paths not absorbed by the horizon contribute 0.
    HittingLaplace { q: f64, x: f64 },
    /// Ergodic time-average of X^k along the ε-restart chain started at 1.
    StationaryMoment { k: usize },
}

/// A Monte Carlo value with its standard error across replicas.
#[derive(Debug, Clone, Copy)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

fn summarize(values: &[f64]) -> Estimate {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let std_error = if n >= 2 {
        let ss = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
        (ss / ((n - 1) as f64 * n as f64)).sqrt()
    } else {
        f64::INFINITY
    };
    Estimate {
        value: mean,
        std_error,
    }
}

/// Run one closure per replica in parallel and return the values in replica
/// order (so the reduction that follows is independent of thread count).
fn run_replicas<F>(cfg: &PathConfig, job: F) -> Result<Vec<f64>>
where
    F: Fn(&mut ChaCha8Rng) -> Result<f64> + Sync,
{
    (0..cfg.replicas as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = replica_rng(cfg.seed, r);
            job(&mut rng)
        })
        .collect()
}

/// Replicated Monte Carlo estimate of an [`Observable`] under `model`.
pub fn estimate(model: &PsiModel, observable: &Observable, cfg: &PathConfig) -> Result<Estimate> {
    cfg.validate()?;
    match observable {
        Observable::KilledSemigroup { f, x, t } => {
            if (f.theta - model.theta()).abs() > 1e-12 {
                return Err(Error::Config(format!(
                    "test function carries index {} but the model has {}",
                    f.theta,
                    model.theta()
                )));
            }
            if !(*x > 0.0) {
                return Err(Error::DomainViolation(format!(
                    "evaluation point must be positive, got {x}"
                )));
            }
            if !(*t >= 0.0) {
                return Err(Error::DomainViolation(format!(
                    "time must be nonnegative, got {t}"
                )));
            }
            if *t == 0.0 {
                return Ok(Estimate {
                    value: f.eval(*x),
                    std_error: 0.0,
                });
            }
            let stepper = LevyStepper::new(model, cfg.dt)?;
            let n_out = (t / cfg.dt).ceil() as usize;
            let dtau = t / n_out as f64;
            let values = run_replicas(cfg, |rng| {
                let mut seg = SegmentBuf::default();
                let absorbed =
                    fused_segment(&stepper, *x, cfg.eps_absorb, dtau, n_out, rng, &mut seg)?;
                Ok(match absorbed {
                    Some(_) => 0.0,
                    None => f.eval(*seg.xs.last().expect("segment has samples")),
                })
            })?;
            Ok(summarize(&values))
        }
        Observable::HittingLaplace { q, x } => {
            if !(*q > 0.0) {
                return Err(Error::DomainViolation(format!(
                    "transform argument must be positive, got {q}"
                )));
            }
            if !(*x > 0.0) {
                return Err(Error::DomainViolation(format!(
                    "start must be positive, got {x}"
                )));
            }
            let stepper = LevyStepper::new(model, cfg.dt)?;
            let n_out = (cfg.horizon / cfg.dt).ceil() as usize;
            if n_out == 0 {
                return Err(Error::Config(
                    "hitting-time estimation needs a positive horizon".into(),
                ));
            }
            let values = run_replicas(cfg, |rng| {
                let mut seg = SegmentBuf::default();
                let absorbed =
                    fused_segment(&stepper, *x, cfg.eps_absorb, cfg.dt, n_out, rng, &mut seg)?;
                Ok(match absorbed {
                    Some(ta) => (-q * ta).exp(),
                    None => 0.0,
                })
            })?;
            Ok(summarize(&values))
        }
        Observable::StationaryMoment { k } => {
            if cfg.horizon <= 0.0 {
                return Err(Error::Config(
                    "ergodic averaging needs a positive horizon".into(),
                ));
            }
            let power = *k as i32;
            let values = run_replicas(cfg, |rng| {
                let path = laguerre_restart_path(model, cfg, 1.0, rng)?;
                Ok(time_average(&path, |x| x.powi(power)))
            })?;
            Ok(summarize(&values))
        }
    }
}

/// Trapezoid time-average of g along a sampled path.
fn time_average<G: Fn(f64) -> f64>(path: &PathSample, g: G) -> f64 {
    let n = path.times.len();
    if n < 2 {
        return g(path.states[0]);
    }
    let mut integral = 0.0;
    for i in 1..n {
        let h = path.times[i] - path.times[i - 1];
        integral += 0.5 * h * (g(path.states[i - 1]) + g(path.states[i]));
    }
    integral / (path.times[n - 1] - path.times[0])
}

/// Two-sample Kolmogorov–Smirnov distance between empirical laws.
pub fn ks_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(|p, q| p.partial_cmp(q).expect("comparable samples"));
    ys.sort_by(|p, q| p.partial_cmp(q).expect("comparable samples"));
    let (na, nb) = (xs.len() as f64, ys.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < xs.len() && j < ys.len() {
        // Evaluate the gap only between distinct sample values, consuming
        // ties from both sides in one move.
        let v = xs[i].min(ys[j]);
        while i < xs.len() && xs[i] <= v {
            i += 1;
        }
        while j < ys.len() && ys[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{presets, LevyQuadruplet};
    use crate::poly::Poly;
    use crate::spectral::{Operator, SpectralModel};
    use std::f64::consts::LN_2;

    fn cfg(dt: f64, horizon: f64, eps: f64, seed: u64, replicas: usize) -> PathConfig {
        PathConfig {
            dt,
            horizon,
            eps_absorb: eps,
            seed,
            replicas,
        }
    }

    /// Mean and standard error of a sample.
    fn mean_se(values: &[f64]) -> (f64, f64) {
        let e = summarize(values);
        (e.value, e.std_error)
    }

    #[test]
    fn config_and_domain_validation() {
        let mj = presets::brownian_atom();
        let base = cfg(1e-3, 1.0, 1e-6, 7, 4);

        for bad in [
            PathConfig { dt: 0.0, ..base.clone() },
            PathConfig { dt: f64::NAN, ..base.clone() },
            PathConfig { horizon: -1.0, ..base.clone() },
            PathConfig { eps_absorb: 0.0, ..base.clone() },
            PathConfig { replicas: 0, ..base.clone() },
        ] {
            assert!(matches!(bad.validate(), Err(Error::Config(_))));
        }

        // A killing rate has no pathwise counterpart here.
        let killed = PsiModel::new(LevyQuadruplet {
            beta: -0.3,
            sigma2: 2.0,
            kappa: 0.2,
            jumps: vec![],
        })
        .unwrap();
        assert!(matches!(
            simulate_levy(&killed, &base),
            Err(Error::Config(_))
        ));

        // Zero horizon: an empty driving path.
        let empty = simulate_levy(&mj, &cfg(1e-3, 0.0, 1e-6, 7, 1)).unwrap();
        assert!(empty.times.is_empty() && empty.states.is_empty());

        // Observable preconditions.
        let wrong_theta = ThetaShiftedPoly::new(0.25, Poly::one());
        assert!(matches!(
            estimate(
                &mj,
                &Observable::KilledSemigroup {
                    f: wrong_theta,
                    x: 1.0,
                    t: 1.0
                },
                &base
            ),
            Err(Error::Config(_))
        ));
        let xtheta = ThetaShiftedPoly::new(mj.theta(), Poly::one());
        assert!(matches!(
            estimate(
                &mj,
                &Observable::KilledSemigroup {
                    f: xtheta.clone(),
                    x: -1.0,
                    t: 1.0
                },
                &base
            ),
            Err(Error::DomainViolation(_))
        ));
        assert!(matches!(
            estimate(&mj, &Observable::HittingLaplace { q: 0.0, x: 1.0 }, &base),
            Err(Error::DomainViolation(_))
        ));
        assert!(matches!(
            estimate(
                &mj,
                &Observable::StationaryMoment { k: 2 },
                &cfg(1e-3, 0.0, 1e-3, 7, 2)
            ),
            Err(Error::Config(_))
        ));

        // t = 0 needs no paths and is exact.
        let at_zero = estimate(
            &mj,
            &Observable::KilledSemigroup {
                f: xtheta,
                x: 1.7,
                t: 0.0,
            },
            &base,
        )
        .unwrap();
        assert_eq!(at_zero.value, 1.7f64.powf(mj.theta()));
        assert_eq!(at_zero.std_error, 0.0);
    }

    #[test]
    fn driving_increments_have_the_exponent_moments() {
        // The pathwise drift is β plus the small-jump mass of the atom.
        let mj = presets::brownian_atom();
        let stepper = LevyStepper::new(&mj, 1e-3).unwrap();
        let beta = mj.quad().beta;
        assert!((stepper.drift - (beta + LN_2)).abs() < 1e-12);

        // E[ξ_1] = ψ'(0) = β: the compensator puts the jump mean back.
        let unit = cfg(1e-3, 1.0, 1e-9, 11, 20_000);
        let mut endpoints = Vec::with_capacity(unit.replicas);
        for r in 0..unit.replicas as u64 {
            let mut rng = replica_rng(unit.seed, r);
            let path = simulate_levy_with(&mj, &unit, &mut rng).unwrap();
            endpoints.push(*path.states.last().unwrap());
        }
        let (mean, se) = mean_se(&endpoints);
        assert!(
            (mean - beta).abs() <= 3.0 * se,
            "mean {mean} vs {beta} (se {se})"
        );

        // Pure Brownian driver: Var ξ_1 = σ² = 2.
        let mc = presets::classical(0.5);
        let mut ends = Vec::with_capacity(unit.replicas);
        for r in 0..unit.replicas as u64 {
            let mut rng = replica_rng(13, r);
            let path = simulate_levy_with(&mc, &unit, &mut rng).unwrap();
            ends.push(*path.states.last().unwrap());
        }
        let m = ends.iter().sum::<f64>() / ends.len() as f64;
        let var = ends.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (ends.len() - 1) as f64;
        let se_var = 2.0 * (2.0 / (ends.len() - 1) as f64).sqrt();
        assert!(
            (var - 2.0).abs() <= 3.0 * se_var,
            "variance {var} (se {se_var})"
        );
    }

    #[test]
    fn clock_inversion_matches_closed_forms() {
        // Constant ξ ≡ 0: identity clock, X̄ ≡ x0 exactly.
        let n = 2_000usize;
        let grid: Vec<f64> = (0..=n).map(|k| k as f64 * 1e-3).collect();
        let flat = PathSample {
            times: grid.clone(),
            states: vec![0.0; n + 1],
            absorbed: false,
            absorption_time: None,
        };
        let out = lamperti_path(&flat, 0.75, &cfg(1e-2, 1.5, 1e-9, 0, 1)).unwrap();
        assert!(out.states.iter().all(|&x| x == 0.75));
        assert!(!out.absorbed);

        // Deterministic drift ξ_r = r: A(s) = e^s − 1, X̄_t = x0 + t.
        let ramp = PathSample {
            times: grid.clone(),
            states: grid.clone(),
            absorbed: false,
            absorption_time: None,
        };
        let x0 = 0.7;
        let out = lamperti_path(&ramp, x0, &cfg(1e-2, 1.2, 1e-9, 0, 1)).unwrap();
        for (t, x) in out.times.iter().zip(&out.states) {
            let exact = x0 + t;
            assert!(
                (x - exact).abs() <= 1e-5 * exact,
                "t={t}: {x} vs {exact}"
            );
        }

        // Steep fall ξ_r = −8r: X̄_t = 1 − 8t, so the 0.05 level is crossed
        // at t ≈ 0.119, inside the horizon; cemetery after absorption.
        let fall = PathSample {
            times: grid.clone(),
            states: grid.iter().map(|&r| -8.0 * r).collect(),
            absorbed: false,
            absorption_time: None,
        };
        let out = lamperti_path(&fall, 1.0, &cfg(1e-3, 0.12, 5e-2, 0, 1)).unwrap();
        assert!(out.absorbed);
        let ta = out.absorption_time.unwrap();
        assert!((ta - 0.119).abs() < 1e-12);
        assert_eq!(*out.times.last().unwrap(), ta);
        assert!(*out.states.last().unwrap() <= 5e-2);
        assert_eq!(out.value_at(ta + 0.001), Some(0.0));

        // Too little driving path for the requested horizon.
        let short = PathSample {
            times: grid[..501].to_vec(),
            states: vec![0.0; 501],
            absorbed: false,
            absorption_time: None,
        };
        assert!(matches!(
            lamperti_path(&short, 1.0, &cfg(1e-2, 1.0, 1e-9, 0, 1)),
            Err(Error::ClockOverrun { .. })
        ));

        // Domain check on the start.
        assert!(matches!(
            lamperti_path(&flat, 0.0, &cfg(1e-2, 1.0, 1e-9, 0, 1)),
            Err(Error::DomainViolation(_))
        ));
    }

    #[test]
    fn stationary_clock_is_the_exponential_change_of_time() {
        // Constant X̄ ≡ x0 maps to X_τ = e^{−τ}·x0 on τ = ln(1+t).
        let n = 1_000usize;
        let times: Vec<f64> = (0..=n).map(|k| k as f64 * 5e-3).collect();
        let xbar = PathSample {
            times: times.clone(),
            states: vec![1.3; n + 1],
            absorbed: true,
            absorption_time: Some(times[n]),
        };
        let x = laguerre_path(&xbar);
        for (j, (&tau, &v)) in x.times.iter().zip(&x.states).enumerate() {
            assert!((tau - times[j].ln_1p()).abs() < 1e-15);
            assert!((v - 1.3 * (-tau).exp()).abs() < 1e-14);
        }
        assert_eq!(x.absorption_time, Some(times[n].ln_1p()));
    }

    #[test]
    fn self_similar_scaling_holds_in_law() {
        // The laws of 2·X̄_{t/2} from 1 and of X̄_t from 2 agree (t = 0.8).
        let mj = presets::brownian_atom();
        let reps = 3_000usize;
        let levy_base = cfg(2e-3, 25.0, 1e-4, 0, 1);

        let draw = |seed: u64, r: u64, x0: f64, t: f64| -> f64 {
            let mut rng = replica_rng(seed, r);
            let mut horizon = levy_base.horizon;
            for _ in 0..4 {
                let lcfg = PathConfig { horizon, ..levy_base.clone() };
                let levy = simulate_levy_with(&mj, &lcfg, &mut rng).unwrap();
                let ocfg = PathConfig { dt: 2e-3, horizon: t, ..levy_base.clone() };
                match lamperti_path(&levy, x0, &ocfg) {
                    Ok(p) => return p.value_at(t).unwrap(),
                    Err(Error::ClockOverrun { .. }) => horizon *= 2.0,
                    Err(e) => panic!("unexpected failure: {e}"),
                }
            }
            panic!("driving path kept running out of clock");
        };

        let a: Vec<f64> = (0..reps as u64).map(|r| 2.0 * draw(101, r, 1.0, 0.4)).collect();
        let b: Vec<f64> = (0..reps as u64).map(|r| draw(202, r, 2.0, 0.8)).collect();
        let (ma, sa) = mean_se(&a);
        let (mb, sb) = mean_se(&b);
        let joint = (sa * sa + sb * sb).sqrt();
        assert!(
            (ma - mb).abs() <= 3.0 * joint,
            "means {ma} vs {mb}, joint se {joint}"
        );
        assert!(ks_distance(&a, &b) < 0.05);
    }

    #[test]
    fn classical_scheme_matches_its_moments() {
        // t = 0 returns the start exactly.
        let still = simulate_classical(0.5, &cfg(1e-3, 0.0, 1e-9, 3, 1), 0.8).unwrap();
        assert_eq!(still.states, vec![0.8]);

        // E_x[Y_t] = e^{−t}x + (1−e^{−t})(1−θ) at t = 1.
        let theta = 0.5;
        let x0 = 2.0;
        let unit = cfg(1e-3, 1.0, 1e-9, 17, 20_000);
        let mut ends = Vec::with_capacity(unit.replicas);
        for r in 0..unit.replicas as u64 {
            let mut rng = replica_rng(unit.seed, r);
            let p = simulate_classical_with(theta, &unit, x0, &mut rng).unwrap();
            ends.push(*p.states.last().unwrap());
        }
        let (mean, se) = mean_se(&ends);
        let exact = (-1.0f64).exp() * x0 + (1.0 - (-1.0f64).exp()) * (1.0 - theta);
        assert!(
            (mean - exact).abs() <= 3.0 * se,
            "mean {mean} vs {exact} (se {se})"
        );

        // Long-run mean is the invariant one, 1−θ.
        let long = cfg(2e-3, 12.0, 1e-9, 19, 6_000);
        let mut ends = Vec::with_capacity(long.replicas);
        for r in 0..long.replicas as u64 {
            let mut rng = replica_rng(long.seed, r);
            let p = simulate_classical_with(theta, &long, 0.5, &mut rng).unwrap();
            ends.push(*p.states.last().unwrap());
        }
        let (mean, se) = mean_se(&ends);
        assert!(
            (mean - 0.5).abs() <= 3.0 * se,
            "stationary mean {mean} (se {se})"
        );
    }

    #[test]
    fn killed_estimates_match_the_exact_engine() {
        // x^θ is invariant for the killed flow up to the e^{−θt} rate.
        let mj = presets::brownian_atom();
        let xtheta = ThetaShiftedPoly::new(mj.theta(), Poly::one());
        let run = cfg(2e-3, 0.0, 1e-6, 23, 10_000);
        let est = estimate(
            &mj,
            &Observable::KilledSemigroup {
                f: xtheta,
                x: 1.0,
                t: 1.0,
            },
            &run,
        )
        .unwrap();
        let exact = (-mj.theta()).exp();
        assert!(
            (est.value - exact).abs() <= 3.0 * est.std_error,
            "estimate {} vs exact {exact} (se {})",
            est.value,
            est.std_error
        );

        // Degree-one test function against the spectral engine's value.
        let mc = presets::classical(0.5);
        let f = ThetaShiftedPoly::new(mc.theta(), Poly::monomial(1));
        let engine = SpectralModel::new(&mc, 8).unwrap();
        let image = engine.apply_killed(&f, 0.5, Operator::PDag).unwrap();
        let exact = image.eval(1.3);
        let est = estimate(
            &mc,
            &Observable::KilledSemigroup {
                f,
                x: 1.3,
                t: 0.5,
            },
            &cfg(2e-3, 0.0, 1e-6, 29, 8_000),
        )
        .unwrap();
        assert!(
            (est.value - exact).abs() <= 3.0 * est.std_error,
            "estimate {} vs exact {exact} (se {})",
            est.value,
            est.std_error
        );
    }

    #[test]
    fn restart_chain_agrees_with_the_diffusion_oracle() {
        // Classical driver through the full pipeline (with ε-restart) vs the
        // direct scheme for the same diffusion: same law at t = 1.
        let mc = presets::classical(0.5);
        let reps = 4_000usize;
        let chain_cfg = cfg(1e-3, 1.0, 1e-6, 31, 1);
        let mut pipeline = Vec::with_capacity(reps);
        for r in 0..reps as u64 {
            let mut rng = replica_rng(31, r);
            let p = laguerre_restart_path(&mc, &chain_cfg, 1.0, &mut rng).unwrap();
            pipeline.push(p.value_at(1.0).unwrap());
        }
        let sde_cfg = cfg(1e-3, 1.0, 1e-6, 37, 1);
        let mut direct = Vec::with_capacity(reps);
        for r in 0..reps as u64 {
            let mut rng = replica_rng(37, r);
            let p = simulate_classical_with(0.5, &sde_cfg, 1.0, &mut rng).unwrap();
            direct.push(*p.states.last().unwrap());
        }
        let d = ks_distance(&pipeline, &direct);
        assert!(d < 0.03, "KS distance {d}");
    }

    #[test]
    fn hitting_transform_shape_and_bias_control() {
        let mj = presets::brownian_atom();
        let base = cfg(2e-3, 40.0, 1e-5, 41, 1_500);
        let value = |q: f64, x: f64, eps: f64, seed: u64| {
            estimate(
                &mj,
                &Observable::HittingLaplace { q, x },
                &PathConfig {
                    eps_absorb: eps,
                    seed,
                    ..base.clone()
                },
            )
            .unwrap()
        };

        // In (0,1), decreasing in q and in x.
        let v_mid = value(1.0, 1.0, 1e-5, 41);
        let v_hi_q = value(2.0, 1.0, 1e-5, 41);
        let v_lo_q = value(0.5, 1.0, 1e-5, 41);
        let v_lo_x = value(1.0, 0.5, 1e-5, 41);
        let v_hi_x = value(1.0, 2.0, 1e-5, 41);
        for v in [&v_mid, &v_hi_q, &v_lo_q, &v_lo_x, &v_hi_x] {
            assert!(v.value > 0.0 && v.value < 1.0);
        }
        assert!(v_lo_q.value > v_mid.value && v_mid.value > v_hi_q.value);
        assert!(v_lo_x.value > v_mid.value && v_mid.value > v_hi_x.value);

        // Halving the absorption threshold moves the estimate by < 2 SE.
        let finer = value(1.0, 1.0, 5e-6, 41);
        assert!(
            (v_mid.value - finer.value).abs() <= 2.0 * (v_mid.std_error + finer.std_error),
            "{} vs {} (ses {} {})",
            v_mid.value,
            finer.value,
            v_mid.std_error,
            finer.std_error
        );
    }

    #[test]
    fn hitting_transform_factors_through_the_moment_operator() {
        // The chain's hitting transform equals the classical one pushed
        // through the exponential-functional mixture: estimate both sides
        // by Monte Carlo and compare within a joint 3-SE band. The threshold
        // sits at 1e-3 on both sides: the remaining travel time from that
        // level is O(threshold), far below the statistical resolution, while
        // a much smaller level would be unreachable for the reflected Euler
        // scheme, whose near-zero excursions live at the dt·(1−θ) scale.
        let mj = presets::brownian_atom();
        let q = 1.0;
        let x = 1.0;
        let lhs = estimate(
            &mj,
            &Observable::HittingLaplace { q, x },
            &cfg(2e-3, 40.0, 1e-3, 43, 4_000),
        )
        .unwrap();

        let rule = crate::distributions::gauss_rule_iphi(&mj, 6).unwrap();
        let ccfg = cfg(1e-3, 40.0, 1e-3, 47, 2_500);
        let mut rhs = 0.0;
        let mut rhs_var = 0.0;
        for (node, w) in rule.nodes().iter().zip(rule.weights()) {
            let e = classical_hitting_laplace(mj.theta(), q, x * node, &ccfg).unwrap();
            rhs += w * e.value;
            rhs_var += (w * e.std_error) * (w * e.std_error);
        }
        let joint = (lhs.std_error * lhs.std_error + rhs_var).sqrt();
        assert!(
            (lhs.value - rhs).abs() <= 3.0 * joint,
            "lhs {} vs rhs {rhs} (joint se {joint})",
            lhs.value
        );
    }

    #[test]
    fn ergodic_averages_match_the_moment_table() {
        // Time averages along the ε-restart chain against E[X] and E[X²]
        // under the invariant law.
        let mj = presets::brownian_atom();
        let run = cfg(1e-3, 150.0, 1e-4, 53, 32);
        let first = estimate(&mj, &Observable::StationaryMoment { k: 1 }, &run).unwrap();
        let exact1 = 2.0 - std::f64::consts::SQRT_2;
        assert!(
            (first.value - exact1).abs() <= 0.05 * exact1,
            "E[X] estimate {} vs {exact1}",
            first.value
        );
        let second = estimate(&mj, &Observable::StationaryMoment { k: 2 }, &run).unwrap();
        let exact2 = 1.0021554561051618;
        assert!(
            (second.value - exact2).abs() <= 0.10 * exact2,
            "E[X²] estimate {} vs {exact2}",
            second.value
        );
    }

    #[test]
    fn estimates_do_not_depend_on_thread_count() {
        let mj = presets::brownian_atom();
        let obs = Observable::KilledSemigroup {
            f: ThetaShiftedPoly::new(mj.theta(), Poly::one()),
            x: 1.0,
            t: 0.5,
        };
        let run = cfg(5e-3, 0.0, 1e-4, 59, 64);
        let single = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| estimate(&mj, &obs, &run))
            .unwrap();
        let quad_pool = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap();
        let four = quad_pool.install(|| estimate(&mj, &obs, &run)).unwrap();
        let again = quad_pool.install(|| estimate(&mj, &obs, &run)).unwrap();
        assert_eq!(single.value.to_bits(), four.value.to_bits());
        assert_eq!(single.std_error.to_bits(), four.std_error.to_bits());
        assert_eq!(four.value.to_bits(), again.value.to_bits());
    }

    #[test]
    fn ks_distance_basics() {
        let a = [0.1, 0.2, 0.3, 0.4];
        assert_eq!(ks_distance(&a, &a), 0.0);
        let b = [10.0, 11.0, 12.0];
        assert_eq!(ks_distance(&a, &b), 1.0);
    }
}
