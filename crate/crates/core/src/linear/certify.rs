//! Numerical certificates for the single-mode energy estimates.

use rayon::prelude::*;
use serde::Serialize;

use super::coefficient::{TimeCoefficient, TimeGrid};
use super::solve::{damping, propagate_mode, ModeHistory};
use crate::error::{Error, Result};
use crate::scalar::{log_space, Real};

/// Relative slack for comparisons of computed energies against bounds.
const BOUND_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundKind {
    LowFrequency,
    HighFrequency,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeBoundCertificate<T> {
    pub lambda: T,
    pub kind: BoundKind,
    pub constant: T,
    pub worst_ratio: T,
    pub worst_time: T,
    pub pass: bool,
}

/// `|w'|^2 + lambda^2 |w|^2 <= e^{nu (1 + mu2) t} (|w1|^2 + lambda^2 |w0|^2)`
/// for `lambda <= nu`; the ratio reported is energy over the envelope.
pub fn certify_low_frequency<T: Real>(hist: &ModeHistory<T>, nu: T, mu2: T) -> Result<ModeBoundCertificate<T>> {
    if hist.lambda > nu {
        return Err(Error::Precondition(format!("low-frequency bound needs lambda <= nu ({} > {})", hist.lambda, nu)));
    }
    let e0 = hist.energy(0);
    let rate = nu * (T::one() + mu2);
    let (mut worst, mut at) = (T::zero(), T::zero());
    for i in 0..hist.w.len() {
        let t = hist.grid.time(i);
        let e = hist.energy(i);
        let r = if e == T::zero() { T::zero() } else { e / (e0 * (rate * t).exp()) };
        if r > worst {
            worst = r;
            at = t;
        }
    }
    Ok(ModeBoundCertificate {
        lambda: hist.lambda,
        kind: BoundKind::LowFrequency,
        constant: T::one(),
        worst_ratio: worst,
        worst_time: at,
        pass: worst <= T::one() + T::c(BOUND_SLACK),
    })
}

/// Time-uniform bound `E(t) <= K E(0)` for `lambda >= nu`. Without a given
/// `constant` the observed worst ratio is reported as the constant.
pub fn certify_high_frequency<T: Real>(
    hist: &ModeHistory<T>,
    nu: T,
    constant: Option<T>,
) -> Result<ModeBoundCertificate<T>> {
    if hist.lambda < nu {
        return Err(Error::Precondition(format!("high-frequency bound needs lambda >= nu ({} < {})", hist.lambda, nu)));
    }
    let e0 = hist.energy(0);
    let (mut worst, mut at) = (T::zero(), T::zero());
    for i in 0..hist.w.len() {
        let e = hist.energy(i);
        let r = if e == T::zero() { T::zero() } else { e / e0 };
        if r > worst {
            worst = r;
            at = hist.grid.time(i);
        }
    }
    let constant = constant.unwrap_or(worst);
    Ok(ModeBoundCertificate {
        lambda: hist.lambda,
        kind: BoundKind::HighFrequency,
        constant,
        worst_ratio: worst,
        worst_time: at,
        pass: worst <= constant * (T::one() + T::c(BOUND_SLACK)),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport<T> {
    pub lambdas: Vec<T>,
    pub worst_ratios: Vec<T>,
    /// `max / min` of the worst ratios.
    pub spread: T,
    pub uniform: bool,
}

/// Worst energy ratio `max_t E(t)/E(0)` for `w0 = 1/lambda`, `w1 = 0` at
/// each frequency. The step is refined per mode so that it resolves both the
/// oscillation and the damping time scale.
pub fn high_frequency_sweep<T: Real>(
    lambdas: &[T],
    sigma: T,
    delta: T,
    c: &TimeCoefficient<T>,
    base: &TimeGrid<T>,
) -> Result<SweepReport<T>> {
    let ratios: Vec<T> = lambdas
        .par_iter()
        .map(|&l| {
            let b = damping(l, sigma, delta);
            let fast = b + l * c.mu2().sqrt();
            let h = base.step().min(T::c(0.05) / fast);
            let grid = TimeGrid::with_step(base.t_end, h)?;
            let hist = propagate_mode(l, sigma, delta, c, None, l.recip(), T::zero(), &grid)?;
            Ok(certify_high_frequency(&hist, T::zero(), None)?.worst_ratio)
        })
        .collect::<Result<_>>()?;
    let hi = ratios.iter().copied().fold(T::zero(), T::max);
    let lo = ratios.iter().copied().fold(T::infinity(), T::min);
    let spread = hi / lo;
    Ok(SweepReport { lambdas: lambdas.to_vec(), worst_ratios: ratios, spread, uniform: spread < T::two() })
}

/// `|w'|^2 + (1 + 2 delta^2 lambda^{4 sigma}) |w|^2 + 2 delta lambda^{2 sigma} w w'`.
pub fn perturbed_energy_supercritical<T: Real>(w: T, dw: T, lambda: T, sigma: T, delta: T) -> T {
    let p = damping(lambda, sigma, T::one());
    dw * dw + (T::one() + T::two() * delta * delta * p * p) * w * w + T::two() * delta * p * w * dw
}

/// `|w'|^2 + (1 + 2 delta^2 lambda^{4 sigma} + lambda^2 c_eps) |w|^2 + 2 delta lambda^{2 sigma} w w'`.
pub fn perturbed_energy_subcritical<T: Real>(w: T, dw: T, lambda: T, sigma: T, delta: T, c_eps: T) -> T {
    perturbed_energy_supercritical(w, dw, lambda, sigma, delta) + lambda * lambda * c_eps * w * w
}

/// `k1` with `|w'|^2 + (1 + lambda^{4 sigma} + lambda^2)|w|^2 <= k1 E` for
/// `sigma >= 1/2`. From `|2 delta p w w'| <= (3/4)|w'|^2 + (4/3) delta^2 p^2 |w|^2`,
/// `E >= |w'|^2/4 + (1 + (2/3) delta^2 p^2)|w|^2`, and `lambda^2 <= 1 + p^2`.
pub fn k1_supercritical<T: Real>(delta: T) -> T {
    T::c(4.0).max(T::c(3.0) / (delta * delta))
}

/// `k1` with `|w'|^2 + (1 + lambda^2)|w|^2 <= k1 E_lambda` when `c_eps >= mu1 > 0`.
pub fn k1_subcritical<T: Real>(mu1: T) -> T {
    T::c(4.0).max(mu1.recip())
}

/// `k2` with `2|w'|^2 + (1 + delta^2 p^2)|w|^2 <= k2 E` (both regimes).
pub fn k2_constant<T: Real>() -> T {
    T::c(8.0)
}

/// One sample of the data entering the quadratic-form condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "regime", rename_all = "kebab-case")]
pub enum QuadraticFormInput<T> {
    Supercritical { lambda: T, c: T },
    Subcritical { lambda: T, c: T, c_eps: T, dc_eps: T },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadraticFormCertificate<T> {
    pub k3: T,
    pub lhs: T,
    pub rhs: T,
    pub margin: T,
    pub pass: bool,
}

/// Evaluates the scalar condition equivalent to `-(dissipation) <= k3 E`.
pub fn quadratic_form_certificate<T: Real>(
    sigma: T,
    delta: T,
    k3: T,
    input: QuadraticFormInput<T>,
) -> QuadraticFormCertificate<T> {
    let four = T::c(4.0);
    let two = T::two();
    let (lhs, rhs) = match input {
        QuadraticFormInput::Supercritical { lambda, c } => {
            let p = damping(lambda, sigma, T::one());
            let l2 = lambda * lambda;
            let lhs = four * delta * delta * p * p * l2 * c
                + k3 * k3
                + four * k3 * delta.powi(3) * p.powi(3)
                + two * k3 * delta * p
                + k3 * k3 * delta * delta * p * p;
            (lhs, l2 * l2 * c * c)
        }
        QuadraticFormInput::Subcritical { lambda, c, c_eps, dc_eps } => {
            let p = damping(lambda, sigma, T::one());
            let l2 = lambda * lambda;
            let lhs = four * delta * delta * p * p * l2 * c
                + four * k3 * delta * p * l2 * c_eps
                + k3 * k3
                + four * k3 * delta.powi(3) * p.powi(3)
                + two * k3 * delta * p
                + k3 * k3 * delta * delta * p * p
                + k3 * k3 * l2 * c_eps;
            let dc = c - c_eps;
            let rhs = l2 * l2 * dc * dc + two * delta * p * l2 * dc_eps + k3 * l2 * dc_eps;
            (lhs, rhs)
        }
    };
    let margin = lhs - rhs;
    QuadraticFormCertificate { k3, lhs, rhs, margin, pass: margin >= -T::c(1e-12) * lhs.abs().max(rhs.abs()) }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct K3Search<T> {
    pub k3: T,
    pub worst_margin: T,
    pub samples: usize,
}

/// Smallest `k3` on a log grid over `[1e-6, 1e12]` (20 points per decade)
/// such that the condition holds for every sample at `k3` and at every
/// larger grid value.
pub fn search_k3<T: Real>(sigma: T, delta: T, samples: &[QuadraticFormInput<T>]) -> Result<K3Search<T>> {
    if samples.is_empty() {
        return Err(Error::Invalid("k3 search needs at least one sample".into()));
    }
    let grid = log_space(T::c(1e-6), T::c(1e12), 361);
    let worst = |k: T| {
        samples
            .iter()
            .map(|&s| {
                let c = quadratic_form_certificate(sigma, delta, k, s);
                (c.pass, c.margin)
            })
            .fold((true, T::infinity()), |(p, m), (q, n)| (p && q, m.min(n)))
    };
    let oks: Vec<(bool, T)> = grid.par_iter().map(|&k| worst(k)).collect();
    let mut start = grid.len();
    while start > 0 && oks[start - 1].0 {
        start -= 1;
    }
    if start == grid.len() {
        return Err(Error::Threshold("no k3 up to 1e12 satisfies the quadratic-form condition".into()));
    }
    Ok(K3Search { k3: grid[start], worst_margin: oks[start].1, samples: samples.len() })
}

/// `Gamma1 = 2 k1`, `Gamma2 = k2 + k3`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ForcedConstants<T> {
    pub k1: T,
    pub k2: T,
    pub k3: T,
    pub gamma1: T,
    pub gamma2: T,
}

impl<T: Real> ForcedConstants<T> {
    pub fn new(k1: T, k3: T) -> Self {
        let k2 = k2_constant();
        Self { k1, k2, k3, gamma1: T::two() * k1, gamma2: k2 + k3 }
    }
}

/// Supercritical constants: `k3` searched over `c` in `[0, mu2]` (33 values)
/// and the given frequencies.
pub fn supercritical_constants<T: Real>(sigma: T, delta: T, mu2: T, lambdas: &[T]) -> Result<ForcedConstants<T>> {
    let samples: Vec<_> = lambdas
        .iter()
        .flat_map(|&lambda| {
            (0..=32).map(move |j| QuadraticFormInput::Supercritical { lambda, c: mu2 * T::from_count(j) / T::c(32.0) })
        })
        .collect();
    let k3 = search_k3(sigma, delta, &samples)?.k3;
    Ok(ForcedConstants::new(k1_supercritical(delta), k3))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ForcedBoundReport<T> {
    pub constants: ForcedConstants<T>,
    pub worst_ratio: T,
    pub pass: bool,
}

/// `|w'|^2 + (1 + lambda^2)|w|^2 <= Gamma1 e^{Gamma2 t} int_0^t |f|^2` along a
/// history started from rest, `f` constant on each step.
pub fn forced_bound_check<T: Real>(
    hist: &ModeHistory<T>,
    f: &[T],
    constants: ForcedConstants<T>,
) -> Result<ForcedBoundReport<T>> {
    if f.len() != hist.grid.steps {
        return Err(Error::LengthMismatch { expected: hist.grid.steps, got: f.len() });
    }
    if hist.w[0] != T::zero() || hist.dw[0] != T::zero() {
        return Err(Error::Precondition("forced bound applies to zero initial data".into()));
    }
    let h = hist.grid.step();
    let l2 = hist.lambda * hist.lambda;
    let mut int_f = T::zero();
    let mut worst = T::zero();
    for i in 1..hist.w.len() {
        int_f += f[i - 1] * f[i - 1] * h;
        let t = hist.grid.time(i);
        let lhs = hist.dw[i] * hist.dw[i] + (T::one() + l2) * hist.w[i] * hist.w[i];
        if lhs == T::zero() {
            continue;
        }
        let rhs = constants.gamma1 * (constants.gamma2 * t).exp() * int_f;
        worst = worst.max(lhs / rhs);
    }
    Ok(ForcedBoundReport { constants, worst_ratio: worst, pass: worst <= T::one() + T::c(BOUND_SLACK) })
}
