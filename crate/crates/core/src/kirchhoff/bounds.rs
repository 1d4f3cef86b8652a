use rayon::prelude::*;
use serde::Serialize;

use super::problem::{sampled_max, KirchhoffProblem, Regime};
use super::solver::SolveReport;
use crate::error::{Error, Result};
use crate::interp::seminorm_sq;
use crate::linear::{certify_high_frequency, propagate_mode, TimeCoefficient, TimeGrid};
use crate::moduli::{envelope, threshold_grid, Modulus, DEFAULT_LAMBDA_CAP};
use crate::scalar::Real;

const SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AprioriReport<T> {
    pub regime: Regime,
    /// Multiplicative constant in front of the data term.
    pub k3: T,
    /// Exponential rate (zero for the time-uniform subcritical bound).
    pub k4: T,
    /// Data term the bound is built on.
    pub data_term: T,
    /// `max_t` of the bounded quantity over the bound.
    pub worst_ratio: T,
    pub worst_time: T,
    pub pass: bool,
}

/// Constants `(K3, K4)` of the supercritical bound
/// `|A^{1/2} u(t)|^2 <= K3 S e^{K4 t}`.
///
/// `sigma >= 1`: `(1, 4 delta + 1/(4 delta))`. For `1/2 < sigma < 1` the
/// modified Hamiltonian satisfies
/// `Hh(t) <= Hh(0) + 2 delta^2 |u0|^2 t + (delta^2 + delta) H(0) t + (2 delta^2/3) H(0) t^3`
/// and `|A^{1/2} u|^2 <= (2/delta^2) Hh`; bounding each power of `t` by
/// `e^t` gives `K3 = (2/delta^2)(max(2, 2 delta^2) + 7 delta^2 + delta)`, `K4 = 1`.
pub fn supercritical_apriori_constants<T: Real>(sigma: T, delta: T) -> Result<(T, T)> {
    if !(sigma > T::half()) {
        return Err(Error::Precondition(format!("supercritical bound needs sigma > 1/2, got {sigma}")));
    }
    let d2 = delta * delta;
    if sigma >= T::one() {
        Ok((T::one(), T::c(4.0) * delta + (T::c(4.0) * delta).recip()))
    } else {
        let k3 = T::two() / d2 * (T::two().max(T::two() * d2) + T::c(7.0) * d2 + delta);
        Ok((k3, T::one()))
    }
}

/// Checks `|A^{1/2} u(t)|^2 <= K3 (|u1|^2 + |u0|^2 + |A^{1/2} u0|^2 + M(|A^{1/2} u0|^2)) e^{K4 t}`.
pub fn check_apriori_supercritical<T: Real>(r: &SolveReport<T>) -> Result<AprioriReport<T>> {
    let tr = &r.trajectory;
    let (k3, k4) = supercritical_apriori_constants(tr.meta.sigma, tr.meta.delta)?;
    let s0 = tr.state(0);
    let g0 = s0.u0.power_norm_sq(T::half());
    let data = s0.u1.norm_sq() + s0.u0.norm_sq() + g0 + r.nonlinearity.primitive(g0);
    let (mut worst, mut at) = (T::zero(), T::zero());
    for (i, g) in tr.potential_series().into_iter().enumerate() {
        let t = tr.times()[i] - tr.times()[0];
        let ratio = if g == T::zero() { T::zero() } else { g / (k3 * data * (k4 * t).exp()) };
        if ratio > worst {
            worst = ratio;
            at = tr.times()[i];
        }
    }
    Ok(AprioriReport {
        regime: Regime::Supercritical,
        k3,
        k4,
        data_term: data,
        worst_ratio: worst,
        worst_time: at,
        pass: worst <= T::one() + T::c(SLACK),
    })
}

/// Checks `|u'(t)|^2 + |A^{1/2} u(t)|^2 <= max(1, 1/mu1) (|u1|^2 + M(|A^{1/2} u0|^2))`.
pub fn check_apriori_subcritical<T: Real>(r: &SolveReport<T>) -> Result<AprioriReport<T>> {
    let tr = &r.trajectory;
    if tr.meta.sigma > T::half() {
        return Err(Error::Precondition(format!("subcritical bound needs sigma <= 1/2, got {}", tr.meta.sigma)));
    }
    let mu1 = r
        .nonlinearity
        .mu1()
        .ok_or_else(|| Error::Precondition("subcritical bound needs mu1".into()))?;
    let k3 = T::one().max(mu1.recip());
    let s0 = tr.state(0);
    let data = s0.u1.norm_sq() + r.nonlinearity.primitive(s0.u0.power_norm_sq(T::half()));
    let (mut worst, mut at) = (T::zero(), T::zero());
    for (i, s) in tr.states().iter().enumerate() {
        let e = s.u1.norm_sq() + s.u0.power_norm_sq(T::half());
        let ratio = if e == T::zero() { T::zero() } else { e / (k3 * data) };
        if ratio > worst {
            worst = ratio;
            at = tr.times()[i];
        }
    }
    Ok(AprioriReport {
        regime: Regime::Subcritical,
        k3,
        k4: T::zero(),
        data_term: data,
        worst_ratio: worst,
        worst_time: at,
        pass: worst <= T::one() + T::c(SLACK),
    })
}

/// Empirical estimate of the high-frequency constant `K2(delta, mu1, mu2)`:
/// twice the largest modal energy amplification observed over
/// `lambda = 1, 2, 4, ..., 1024`, data `(1/lambda, 0)` and `(0, 1)`, and the
/// coefficients `mu1`, `mu2` and `mu1 + (mu2 - mu1)(1 + sin t)/2` on `[0, 10]`.
pub fn estimate_k2<T: Real>(sigma: T, delta: T, mu1: T, mu2: T) -> Result<T> {
    let base = TimeGrid::new(T::c(10.0), 2000)?;
    let half_span = T::half() * (mu2 - mu1);
    let coeffs = vec![
        TimeCoefficient::constant(base, mu1)?,
        TimeCoefficient::constant(base, mu2)?,
        TimeCoefficient::from_fn(base, |t| mu1 + half_span * (T::one() + t.sin()), mu1, mu2)?,
    ];
    let lambdas: Vec<T> = (0..11).map(|j| T::c(2f64.powi(j))).collect();
    let worst = lambdas
        .par_iter()
        .map(|&l| {
            let fast = delta * l.powf(T::two() * sigma) + l * mu2.sqrt();
            let grid = TimeGrid::with_step(T::c(10.0), (T::c(0.05) / fast).min(T::c(5e-3)))?;
            let mut w = T::zero();
            for c in &coeffs {
                for (w0, w1) in [(l.recip(), T::zero()), (T::zero(), T::one())] {
                    let hist = propagate_mode(l, sigma, delta, c, None, w0, w1, &grid)?;
                    w = w.max(certify_high_frequency(&hist, T::zero(), None)?.worst_ratio);
                }
            }
            Ok(w)
        })
        .collect::<Result<Vec<T>>>()?
        .into_iter()
        .fold(T::one(), T::max);
    Ok(T::two() * worst)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmallnessReport<T> {
    pub alpha: T,
    pub l1: T,
    /// `max m` on `[0, L1]`.
    pub mu2_hat: T,
    pub k2: T,
    pub k2_estimated: bool,
    /// `||(u0, u1)||^2_{omega_d}`.
    pub data_seminorm_sq: T,
    /// `max(1, 1/mu1) (|u1|^2 + M(|A^{1/2} u0|^2))`.
    pub energy_term: T,
    /// `K2 ||(u0, u1)||^2_{omega_d} + energy_term`.
    pub lhs: T,
    pub eps1_ok: bool,
    /// Smallest margin of the `nu = 1` threshold inequality at the chosen `L1`.
    pub worst_margin: T,
}

/// Largest `L1 <= 1/6` on the grid `(1/6) 10^{-j/20}` for which
/// `omega_hat(x) = omega_m(6 L1 x^{4 alpha})` satisfies the threshold
/// inequality for every sampled `lambda` in `[1, 1e6]`, then evaluates the
/// smallness inequality for the problem data.
pub fn smallness_constants<T: Real>(
    p: &KirchhoffProblem<T>,
    omega_d: &Modulus<T>,
    k2: Option<T>,
) -> Result<SmallnessReport<T>> {
    if p.regime() != Regime::Subcritical {
        return Err(Error::Precondition("smallness constants apply to subcritical problems".into()));
    }
    let m = p.nonlinearity();
    let mu1 = m.mu1().ok_or_else(|| Error::Precondition("smallness constants need mu1".into()))?;
    let alpha = p.alpha().ok_or_else(|| Error::Precondition("smallness constants need alpha".into()))?;
    let (sigma, delta) = (p.sigma(), p.delta());
    let four_a = T::c(4.0) * alpha;
    let target = T::c(4.0) * delta * delta * mu1;
    let lambdas = threshold_grid(T::c(DEFAULT_LAMBDA_CAP));
    let margin_for = |l1: T| {
        let w = m.modulus().clone();
        let hat = Modulus::custom("omega_hat", move |x: T| w.eval(T::c(6.0) * l1 * x.pow_conv(four_a)));
        lambdas
            .iter()
            .map(|&l| {
                let e = envelope(&hat, sigma, l);
                target - e * e - T::two() * delta * e
            })
            .fold(T::infinity(), T::min)
    };
    let (l1, worst_margin) = (0..=400)
        .map(|j| T::c(10f64.powf(-(j as f64) / 20.0) / 6.0))
        .map(|l1| (l1, margin_for(l1)))
        .find(|&(_, mg)| mg >= T::zero())
        .ok_or_else(|| Error::Threshold("no L1 down to 1e-20 satisfies the nu = 1 threshold inequality".into()))?;
    let mu2_hat = sampled_max(|x| m.eval(x), T::zero(), l1, 10_000);
    let (k2, k2_estimated) = match k2 {
        Some(k) => (k, false),
        None => (estimate_k2(sigma, delta, mu1, mu2_hat.max(mu1))?, true),
    };
    let s0 = p.initial();
    let data_seminorm_sq = seminorm_sq(s0, omega_d);
    let energy_term = T::one().max(mu1.recip()) * (s0.u1.norm_sq() + m.primitive(s0.u0.power_norm_sq(T::half())));
    let lhs = k2 * data_seminorm_sq + energy_term;
    Ok(SmallnessReport {
        alpha,
        l1,
        mu2_hat,
        k2,
        k2_estimated,
        data_seminorm_sq,
        energy_term,
        lhs,
        eps1_ok: lhs <= l1,
        worst_margin,
    })
}
