use serde::{Deserialize, Serialize};

use super::nonlinearity::NonlinearitySpec;
use crate::error::{Error, Result};
use crate::moduli::{limsup_grid, limsup_ratio, LimsupOptions};
use crate::scalar::Real;
use crate::spectrum::{ModeGrid, StatePair};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    Supercritical,
    Subcritical,
}

/// Nonlinearity clamped at `M0 = |A^{1/2} u0|^2 + 1`.
#[derive(Debug, Clone)]
pub struct Truncation<T> {
    pub m_star: NonlinearitySpec<T>,
    pub m0: T,
    /// Maximum of `m` on `[0, M0]` (sampling plus golden-section refinement).
    pub mu2: T,
    /// `1.01 mu2`, the upper bound used for coefficient boxes and thresholds.
    pub mu2_bound: T,
}

/// Maximum of `f` on `[a, b]`: `samples + 1` equispaced evaluations, then a
/// golden-section search in the bracket around the best sample.
pub fn sampled_max<T: Real>(f: impl Fn(T) -> T, a: T, b: T, samples: usize) -> T {
    if b <= a {
        return f(a);
    }
    let n = samples.max(2);
    let h = (b - a) / T::from_count(n);
    let (mut best_i, mut best) = (0, f(a));
    for i in 1..=n {
        let v = f(a + h * T::from_count(i));
        if v > best {
            best = v;
            best_i = i;
        }
    }
    let mut lo = a + h * T::from_count(best_i.saturating_sub(1));
    let mut hi = (a + h * T::from_count(best_i + 1)).min(b);
    let g = T::c(0.618_033_988_749_894_8);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..80 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        }
    }
    best.max(f1).max(f2)
}

pub fn truncate_nonlinearity<T: Real>(m: &NonlinearitySpec<T>, g0: T) -> Truncation<T> {
    let m0 = g0 + T::one();
    let mu2 = sampled_max(|x| m.eval(x), T::zero(), m0, 10_000);
    Truncation { m_star: m.truncated(m0), m0, mu2, mu2_bound: T::c(1.01) * mu2 }
}

fn alpha_opts() -> LimsupOptions {
    // the grid below moves the exponent in steps of 0.02
    LimsupOptions { slope_tol: 0.005, ..LimsupOptions::default() }
}

/// Searches `alpha` in `[0, 1/4)` (step `1/200`) for which
/// `limsup_{x->0} omega_m(x)^{4 alpha} / x^{1 - 2 sigma}` is finite and
/// returns the smallest such value.
pub fn search_alpha<T: Real>(m: &NonlinearitySpec<T>, sigma: T) -> Option<T> {
    let grid = limsup_grid::<T>();
    let p = T::one() - T::two() * sigma;
    (0..50).map(|j| T::from_count(j) / T::c(200.0)).find(|&a| {
        let four_a = T::c(4.0) * a;
        limsup_ratio(|x| m.modulus().eval(x).pow_conv(four_a), p, &grid, alpha_opts())
            .value
            .is_some()
    })
}

/// `u'' + 2 delta A^sigma u' + m(|A^{1/2}u|^2) A u = 0` on `[0, horizon]`
/// with data `initial`.
#[derive(Debug, Clone)]
pub struct KirchhoffProblem<T> {
    sigma: T,
    delta: T,
    m: NonlinearitySpec<T>,
    initial: StatePair<T>,
    horizon: T,
    regime: Regime,
    alpha: Option<T>,
    degenerate_guard: Option<T>,
}

impl<T: Real> KirchhoffProblem<T> {
    /// Rejects `sigma <= 0`, `delta <= 0`, subcritical problems without
    /// `mu1` or without a usable `alpha`, and, for `sigma = 1/2` without
    /// `mu1`, data with `4 delta^2 <= m(|A^{1/2} u0|^2)`.
    pub fn new(initial: StatePair<T>, sigma: T, delta: T, m: NonlinearitySpec<T>, horizon: T) -> Result<Self> {
        Self::with_alpha(initial, sigma, delta, m, horizon, None)
    }

    pub fn with_alpha(
        initial: StatePair<T>,
        sigma: T,
        delta: T,
        m: NonlinearitySpec<T>,
        horizon: T,
        alpha: Option<T>,
    ) -> Result<Self> {
        if !(sigma > T::zero() && sigma.is_finite()) {
            return Err(Error::Invalid(format!("sigma must be positive, got {sigma}")));
        }
        if !(delta > T::zero() && delta.is_finite()) {
            return Err(Error::Invalid(format!("delta must be positive, got {delta}")));
        }
        if !(horizon > T::zero() && horizon.is_finite()) {
            return Err(Error::Invalid(format!("horizon must be positive, got {horizon}")));
        }
        let g0 = initial.u0.power_norm_sq(T::half());
        if !g0.is_finite() || !initial.u1.norm_sq().is_finite() {
            return Err(Error::NonFinite("initial data".into()));
        }
        let four_d2 = T::c(4.0) * delta * delta;
        let (regime, degenerate_guard) = if sigma > T::half() || (sigma == T::half() && m.mu1().is_none()) {
            let guard = (sigma == T::half()).then_some(four_d2);
            if guard.is_some() && m.eval(g0) >= four_d2 {
                return Err(Error::Precondition(format!(
                    "sigma = 1/2 without mu1 needs 4 delta^2 > m(|A^(1/2) u0|^2) ({four_d2} <= {})",
                    m.eval(g0)
                )));
            }
            (Regime::Supercritical, guard)
        } else {
            if m.mu1().is_none() {
                return Err(Error::Precondition(format!("sigma = {sigma} <= 1/2 requires a strict lower bound mu1")));
            }
            (Regime::Subcritical, None)
        };
        let alpha = match (regime, alpha) {
            (_, Some(a)) if !(a >= T::zero() && a < T::c(0.25)) => {
                return Err(Error::Invalid(format!("alpha must lie in [0, 1/4), got {a}")));
            }
            (Regime::Subcritical, Some(a)) => {
                let four_a = T::c(4.0) * a;
                let p = T::one() - T::two() * sigma;
                let est = limsup_ratio(|x| m.modulus().eval(x).pow_conv(four_a), p, &limsup_grid(), alpha_opts());
                if est.value.is_none() {
                    return Err(Error::Precondition(format!(
                        "limsup omega_m(x)^(4 alpha) / x^(1 - 2 sigma) diverges for alpha = {a}"
                    )));
                }
                Some(a)
            }
            (Regime::Subcritical, None) => Some(search_alpha(&m, sigma).ok_or_else(|| {
                Error::Precondition("no alpha in [0, 1/4) makes omega_m(x)^(4 alpha) / x^(1 - 2 sigma) bounded".into())
            })?),
            (Regime::Supercritical, a) => a,
        };
        Ok(Self { sigma, delta, m, initial, horizon, regime, alpha, degenerate_guard })
    }

    pub fn grid(&self) -> &ModeGrid<T> {
        self.initial.grid()
    }

    pub fn sigma(&self) -> T {
        self.sigma
    }

    pub fn delta(&self) -> T {
        self.delta
    }

    pub fn nonlinearity(&self) -> &NonlinearitySpec<T> {
        &self.m
    }

    pub fn initial(&self) -> &StatePair<T> {
        &self.initial
    }

    pub fn horizon(&self) -> T {
        self.horizon
    }

    pub fn regime(&self) -> Regime {
        self.regime
    }

    pub fn alpha(&self) -> Option<T> {
        self.alpha
    }

    /// `4 delta^2` when the run is guarded (`sigma = 1/2`, no `mu1`).
    pub fn degenerate_guard(&self) -> Option<T> {
        self.degenerate_guard
    }

    /// Same equation and parameters with new data and horizon.
    pub fn restarted(&self, initial: StatePair<T>, horizon: T) -> Result<Self> {
        let mut p = self.clone();
        if !initial.grid().same_as(self.grid()) {
            return Err(Error::Invalid("restart data live on a different grid".into()));
        }
        p.initial = initial;
        p.horizon = horizon;
        Ok(p)
    }

    pub fn truncation(&self) -> Truncation<T> {
        truncate_nonlinearity(&self.m, self.initial.u0.power_norm_sq(T::half()))
    }
}

/// `H = |u'|^2 + M(|A^{1/2} u|^2)`.
pub fn hamiltonian<T: Real>(s: &StatePair<T>, m: &NonlinearitySpec<T>) -> T {
    s.u1.norm_sq() + m.primitive(s.u0.power_norm_sq(T::half()))
}

/// `H + delta^2 |u|^2 + delta^2 |A^{1/2} u|^2 + delta <A^{1 - sigma} u, u'>`,
/// defined for `sigma` in `[1/2, 1]`.
pub fn modified_hamiltonian<T: Real>(s: &StatePair<T>, sigma: T, delta: T, m: &NonlinearitySpec<T>) -> Result<T> {
    if !(sigma >= T::half() && sigma <= T::one()) {
        return Err(Error::Domain(format!("modified Hamiltonian needs sigma in [1/2, 1], got {sigma}")));
    }
    let p = T::one() - sigma;
    let cross: T = (0..s.len())
        .map(|k| s.grid().power(k, p) * s.u0.coeffs()[k] * s.u1.coeffs()[k])
        .sum();
    let d2 = delta * delta;
    Ok(hamiltonian(s, m) + d2 * s.u0.norm_sq() + d2 * s.u0.power_norm_sq(T::half()) + delta * cross)
}

/// The two-sided control of the modified Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModifiedHamiltonianBounds<T> {
    pub value: T,
    /// `(delta^2 / 2) |A^{1/2} u|^2`.
    pub lower: T,
    /// `2|u'|^2 + 2 delta^2 |u|^2 + 2 delta^2 |A^{1/2} u|^2 + M(|A^{1/2} u|^2)`.
    pub upper: T,
    pub lower_ok: bool,
    pub upper_ok: bool,
}

pub fn modified_hamiltonian_bounds<T: Real>(
    s: &StatePair<T>,
    sigma: T,
    delta: T,
    m: &NonlinearitySpec<T>,
) -> Result<ModifiedHamiltonianBounds<T>> {
    let value = modified_hamiltonian(s, sigma, delta, m)?;
    let d2 = delta * delta;
    let g = s.u0.power_norm_sq(T::half());
    let lower = T::half() * d2 * g;
    let upper = T::two() * s.u1.norm_sq() + T::two() * d2 * s.u0.norm_sq() + T::two() * d2 * g + m.primitive(g);
    let tol = T::c(1e-12) * (value.abs() + upper.abs() + T::c(1e-300));
    Ok(ModifiedHamiltonianBounds { value, lower, upper, lower_ok: lower <= value + tol, upper_ok: value <= upper + tol })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn truncation_of_identity() {
        let m = NonlinearitySpec::<f64>::affine(0.0, 1.0, None).unwrap();
        let t = truncate_nonlinearity(&m, 3.0);
        assert_eq!(t.m0, 4.0);
        assert_relative_eq!(t.mu2, 4.0, max_relative = 1e-14);
        assert_eq!(t.m_star.eval(11.0), 4.0);
        assert_eq!(t.m_star.eval(2.5), 2.5);
        assert_relative_eq!(t.m_star.primitive(6.0), 8.0 + 8.0, max_relative = 1e-14);
    }

    #[test]
    fn interior_maximum_is_refined() {
        let v = sampled_max(|x: f64| 1.0 - (x - 0.123_456_789).powi(2), 0.0, 1.0, 7);
        assert_relative_eq!(v, 1.0, max_relative = 1e-14);
    }

    #[test]
    fn rejections() {
        let g = ModeGrid::<f64>::dirichlet(4).unwrap();
        let s = StatePair::zeros(&g);
        let m = NonlinearitySpec::affine(1.0, 1.0, None).unwrap();
        assert!(KirchhoffProblem::new(s.clone(), 0.0, 1.0, m.clone(), 1.0).is_err());
        assert!(KirchhoffProblem::new(s.clone(), 1.0, 0.0, m.clone(), 1.0).is_err());
        assert!(KirchhoffProblem::new(s.clone(), 0.3, 1.0, m.clone(), 1.0).is_err());
        assert!(KirchhoffProblem::new(s.clone(), 0.5, 0.4, m.clone(), 1.0).is_err());
        assert_eq!(KirchhoffProblem::new(s.clone(), 0.5, 1.0, m.clone(), 1.0).unwrap().regime(), Regime::Supercritical);
        let m1 = m.with_mu1(Some(1.0)).unwrap();
        let p = KirchhoffProblem::new(s, 0.3, 1.0, m1, 1.0).unwrap();
        assert_eq!(p.regime(), Regime::Subcritical);
        // omega_m = x: need 4 alpha >= 1 - 2 sigma = 0.4
        assert_relative_eq!(p.alpha().unwrap(), 0.1, max_relative = 1e-12);
    }
}
