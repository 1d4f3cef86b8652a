//! Moduli of continuity and the frequency thresholds derived from them.
//!
//! A modulus `omega` satisfies `omega(0) = 0`, `omega > 0` on `(0, inf)`,
//! `omega` nondecreasing and `x / omega(x)` nondecreasing; the last two give
//! `omega(L x) <= max{1, L} omega(x)`.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{log_space, Real};

/// Relative slack used when comparing modulus values on a grid.
const LAW_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ModulusKind {
    Holder { m: f64, gamma: f64 },
    Xlogx,
    Table { points: usize },
    Composed { outer: Box<ModulusKind>, inner: Box<ModulusKind> },
    Custom { name: String },
}

type EvalFn<T> = Arc<dyn Fn(T) -> T + Send + Sync>;

#[derive(Clone)]
pub struct Modulus<T> {
    kind: ModulusKind,
    f: EvalFn<T>,
}

impl<T> fmt::Debug for Modulus<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Modulus").field("kind", &self.kind).finish()
    }
}

impl<T: Real> Modulus<T> {
    /// `M x^gamma` with `M > 0`, `gamma` in `(0, 1]`.
    pub fn holder(m: T, gamma: T) -> Result<Self> {
        if !(gamma > T::zero() && gamma <= T::one()) {
            return Err(Error::Invalid(format!("Hölder exponent {gamma} outside (0, 1]")));
        }
        Self::power(m, gamma)
    }

    /// `M x^p` for any `p >= 0`; the laws are not checked here.
    pub fn power(m: T, p: T) -> Result<Self> {
        if !(m > T::zero() && m.is_finite()) || !(p >= T::zero() && p.is_finite()) {
            return Err(Error::Invalid(format!("power modulus needs M > 0 and p >= 0, got M={m}, p={p}")));
        }
        Ok(Self {
            kind: ModulusKind::Holder { m: m.as_f64(), gamma: p.as_f64() },
            f: Arc::new(move |x: T| m * x.powf(p)),
        })
    }

    /// Log-Lipschitz modulus `x (1 + ln(1/x))` on `(0, 1]`, `x` beyond.
    pub fn xlogx() -> Self {
        Self {
            kind: ModulusKind::Xlogx,
            f: Arc::new(|x: T| {
                if x <= T::zero() {
                    T::zero()
                } else if x < T::one() {
                    x * (T::one() - x.ln())
                } else {
                    x
                }
            }),
        }
    }

    /// Piecewise-linear interpolant of `(xs, ys)` with `omega(0) = 0`,
    /// extended linearly through the origin past the last node.
    pub fn table(xs: Vec<T>, ys: Vec<T>) -> Result<Self> {
        if xs.is_empty() || xs.len() != ys.len() {
            return Err(Error::Invalid("modulus table needs matching, nonempty xs and ys".into()));
        }
        if xs[0] <= T::zero() || xs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Invalid("modulus table xs must be positive and strictly increasing".into()));
        }
        if ys.iter().any(|&y| !(y > T::zero() && y.is_finite())) {
            return Err(Error::Invalid("modulus table ys must be positive and finite".into()));
        }
        let kind = ModulusKind::Table { points: xs.len() };
        let f = move |x: T| {
            let n = xs.len();
            if x >= xs[n - 1] {
                return ys[n - 1] * x / xs[n - 1];
            }
            let i = xs.partition_point(|&v| v <= x);
            let (x0, y0) = if i == 0 { (T::zero(), T::zero()) } else { (xs[i - 1], ys[i - 1]) };
            y0 + (ys[i] - y0) * (x - x0) / (xs[i] - x0)
        };
        Ok(Self { kind, f: Arc::new(f) })
    }

    pub fn custom<F>(name: impl Into<String>, f: F) -> Self
    where
        F: Fn(T) -> T + Send + Sync + 'static,
    {
        Self { kind: ModulusKind::Custom { name: name.into() }, f: Arc::new(f) }
    }

    pub fn kind(&self) -> &ModulusKind {
        &self.kind
    }

    /// `omega(x)`, with `omega(x) = 0` for `x <= 0`.
    #[inline]
    pub fn eval(&self, x: T) -> T {
        if x <= T::zero() {
            T::zero()
        } else {
            (self.f)(x)
        }
    }

    /// `x -> omega(s x)`.
    pub fn rescaled(&self, s: T) -> Result<Self> {
        Ok(compose(self, &Self::power(s, T::one())?))
    }
}

/// `outer ∘ inner`.
pub fn compose<T: Real>(outer: &Modulus<T>, inner: &Modulus<T>) -> Modulus<T> {
    let (o, i) = (outer.clone(), inner.clone());
    Modulus {
        kind: ModulusKind::Composed { outer: Box::new(outer.kind.clone()), inner: Box::new(inner.kind.clone()) },
        f: Arc::new(move |x| o.eval(i.eval(x))),
    }
}

/// Modulus description as found in run configurations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ModulusSpec {
    Holder {
        #[serde(alias = "M")]
        m: f64,
        gamma: f64,
    },
    Xlogx,
    Table { xs: Vec<f64>, ys: Vec<f64> },
}

impl ModulusSpec {
    pub fn build<T: Real>(&self) -> Result<Modulus<T>> {
        match self {
            ModulusSpec::Holder { m, gamma } => Modulus::holder(T::c(*m), T::c(*gamma)),
            ModulusSpec::Xlogx => Ok(Modulus::xlogx()),
            ModulusSpec::Table { xs, ys } => {
                Modulus::table(xs.iter().map(|&v| T::c(v)).collect(), ys.iter().map(|&v| T::c(v)).collect())
            }
        }
    }
}

/// 200 log-spaced points on `[1e-8, 1e2]`.
pub fn default_grid<T: Real>() -> Vec<T> {
    log_space(T::c(1e-8), T::c(1e2), 200)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModulusLaw {
    VanishesAtZero,
    Positive,
    Nondecreasing,
    RatioNondecreasing,
    Scaling,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LawViolation<T> {
    pub law: ModulusLaw,
    pub x: T,
    pub y: T,
    pub lhs: T,
    pub rhs: T,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModulusCheck<T> {
    pub ok: bool,
    pub pairs_checked: usize,
    pub violation: Option<LawViolation<T>>,
}

/// Checks the modulus laws on every pair of grid points; reports the first
/// violation in grid order.
pub fn verify_modulus<T: Real>(w: &Modulus<T>, grid: &[T]) -> ModulusCheck<T> {
    let mut xs: Vec<T> = grid.iter().copied().filter(|x| *x > T::zero()).collect();
    xs.sort_by(|a, b| a.partial_cmp(b).expect("finite grid"));
    xs.dedup();
    let tol = T::c(LAW_TOL);
    let fail = |law, x, y, lhs, rhs, n| ModulusCheck {
        ok: false,
        pairs_checked: n,
        violation: Some(LawViolation { law, x, y, lhs, rhs }),
    };
    let w0 = (w.f)(T::zero());
    if w0 != T::zero() {
        return fail(ModulusLaw::VanishesAtZero, T::zero(), T::zero(), w0, T::zero(), 0);
    }
    let vals: Vec<T> = xs.iter().map(|&x| w.eval(x)).collect();
    for (&x, &v) in xs.iter().zip(&vals) {
        if !(v > T::zero()) || !v.is_finite() {
            return fail(ModulusLaw::Positive, x, x, v, T::zero(), 0);
        }
    }
    let mut n = 0;
    for i in 0..xs.len() {
        for j in i + 1..xs.len() {
            n += 1;
            let (x, y, wx, wy) = (xs[i], xs[j], vals[i], vals[j]);
            if wx > wy * (T::one() + tol) {
                return fail(ModulusLaw::Nondecreasing, x, y, wx, wy, n);
            }
            let (rx, ry) = (x / wx, y / wy);
            if rx > ry * (T::one() + tol) {
                return fail(ModulusLaw::RatioNondecreasing, x, y, rx, ry, n);
            }
            let l = y / x;
            let bound = l.max(T::one()) * wx;
            if wy > bound * (T::one() + tol) {
                return fail(ModulusLaw::Scaling, x, y, wy, bound, n);
            }
        }
    }
    ModulusCheck { ok: true, pairs_checked: n, violation: None }
}

/// Estimate of `limsup_{x -> 0} f(x) / x^p`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimsupEstimate<T> {
    /// `None` means the ratio was judged to diverge.
    pub value: Option<T>,
    pub tail_sup: T,
    /// Least-squares slope of `ln ratio` against `ln(1/x)` on the tail.
    pub tail_slope: T,
    pub smallest_x: T,
}

impl<T: Real> LimsupEstimate<T> {
    pub fn is_infinite(&self) -> bool {
        self.value.is_none()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimsupOptions {
    /// Ratios above this are treated as divergent.
    pub cap: f64,
    /// Tail slopes beyond this magnitude are read as growth or decay.
    pub slope_tol: f64,
    /// Fraction of the grid (smallest x) forming the tail.
    pub tail_fraction: f64,
}

impl Default for LimsupOptions {
    fn default() -> Self {
        Self { cap: 1e6, slope_tol: 0.02, tail_fraction: 0.25 }
    }
}

/// Default grid for limsup estimates: 200 log-spaced points on `[1e-10, 1e-2]`.
pub fn limsup_grid<T: Real>() -> Vec<T> {
    log_space(T::c(1e-10), T::c(1e-2), 200)
}

/// Estimates `limsup_{x->0} f(x) / x^p` from samples on `grid`.
///
/// A tail that grows monotonically with a clear positive log-log slope (or
/// passes `cap`) is reported as divergent; one that decays monotonically with
/// a clear negative slope is reported as `0`; otherwise the tail supremum is
/// returned.
pub fn limsup_ratio<T: Real>(f: impl Fn(T) -> T, p: T, grid: &[T], opts: LimsupOptions) -> LimsupEstimate<T> {
    let mut xs: Vec<T> = grid.iter().copied().filter(|x| *x > T::zero()).collect();
    xs.sort_by(|a, b| b.partial_cmp(a).expect("finite grid"));
    assert!(xs.len() >= 8, "limsup grid needs at least 8 positive points");
    let tail_len = ((T::from_count(xs.len()) * T::c(opts.tail_fraction)).to_usize().unwrap_or(0)).max(5);
    let tail = &xs[xs.len() - tail_len..];
    let ratios: Vec<T> = tail.iter().map(|&x| f(x) / x.powf(p)).collect();
    let tail_sup = ratios.iter().copied().fold(T::zero(), T::max);
    let smallest_x = tail[tail.len() - 1];
    if ratios.iter().any(|r| !r.is_finite()) || tail_sup > T::c(opts.cap) {
        return LimsupEstimate { value: None, tail_sup, tail_slope: T::infinity(), smallest_x };
    }
    if ratios.iter().all(|&r| r == T::zero()) {
        return LimsupEstimate { value: Some(T::zero()), tail_sup, tail_slope: T::zero(), smallest_x };
    }
    let pts: Vec<(T, T)> = tail
        .iter()
        .zip(&ratios)
        .filter(|(_, r)| **r > T::zero())
        .map(|(&x, &r)| (-x.ln(), r.ln()))
        .collect();
    let slope = ls_slope(&pts);
    let tol = T::c(opts.slope_tol);
    let eps = T::c(LAW_TOL);
    let growing = ratios.windows(2).all(|w| w[1] >= w[0] * (T::one() - eps));
    let decaying = ratios.windows(2).all(|w| w[1] <= w[0] * (T::one() + eps));
    let value = if slope > tol && growing {
        None
    } else if slope < -tol && decaying {
        Some(T::zero())
    } else {
        Some(tail_sup)
    };
    LimsupEstimate { value, tail_sup, tail_slope: slope, smallest_x }
}

fn ls_slope<T: Real>(pts: &[(T, T)]) -> T {
    if pts.len() < 2 {
        return T::zero();
    }
    let n = T::from_count(pts.len());
    let mx = pts.iter().map(|p| p.0).sum::<T>() / n;
    let my = pts.iter().map(|p| p.1).sum::<T>() / n;
    let sxy: T = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: T = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    if sxx == T::zero() {
        T::zero()
    } else {
        sxy / sxx
    }
}

/// `Lambda_inf = limsup_{eps -> 0} omega(eps) / eps^(1 - 2 sigma)`.
pub fn lambda_infinity<T: Real>(w: &Modulus<T>, sigma: T, grid: &[T], opts: LimsupOptions) -> LimsupEstimate<T> {
    limsup_ratio(|x| w.eval(x), T::one() - T::two() * sigma, grid, opts)
}

/// Strict gap `4 delta^2 mu1 > Lambda^2 + 2 delta Lambda` with a relative
/// margin of `1e-12`; an infinite `Lambda` never passes.
pub fn check_subcritical_gap<T: Real>(delta: T, mu1: T, lambda_inf: Option<T>) -> bool {
    let Some(l) = lambda_inf else { return false };
    let lhs = T::c(4.0) * delta * delta * mu1;
    let rhs = l * l + T::two() * delta * l;
    let scale = lhs.abs().max(rhs.abs()).max(T::one());
    lhs - rhs > T::c(1e-12) * scale
}

/// `lambda^(1-2 sigma) omega(1/lambda)`.
pub fn envelope<T: Real>(w: &Modulus<T>, sigma: T, lambda: T) -> T {
    lambda.powf(T::one() - T::two() * sigma) * w.eval(lambda.recip())
}

/// Frequency grid for threshold searches: integers up to `min(cap, 1000)`,
/// then 50 log-spaced points per decade up to `cap`.
pub fn threshold_grid<T: Real>(lambda_cap: T) -> Vec<T> {
    let int_top = lambda_cap.min(T::c(1000.0)).floor().to_usize().unwrap_or(1).max(1);
    let mut g: Vec<T> = (1..=int_top).map(T::from_count).collect();
    let top = T::from_count(int_top);
    if lambda_cap > top {
        let decades = (lambda_cap / top).log10();
        let n = (decades * T::c(50.0)).ceil().to_usize().unwrap_or(1).max(1) + 1;
        g.extend(log_space(top, lambda_cap, n).into_iter().skip(1));
    }
    g
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdReport<T> {
    pub nu: T,
    pub lambda_inf: Option<T>,
    pub gap_ok: bool,
    /// Smallest `4 delta^2 mu1 - e^2 - 2 delta e` over sampled `lambda >= nu`.
    pub worst_margin: T,
    pub lambda_cap: T,
}

pub const DEFAULT_LAMBDA_CAP: f64 = 1e6;

/// Smallest grid frequency `nu >= 1` such that
/// `4 delta^2 mu1 >= e(lambda)^2 + 2 delta e(lambda)` for every sampled
/// `lambda` in `[nu, lambda_cap]`, `e(lambda) = lambda^(1-2 sigma) omega(1/lambda)`.
pub fn find_nu_subcritical<T: Real>(
    delta: T,
    mu1: T,
    w: &Modulus<T>,
    sigma: T,
    lambda_cap: T,
) -> Result<ThresholdReport<T>> {
    if !(delta > T::zero() && mu1 > T::zero()) {
        return Err(Error::Precondition("threshold search needs delta > 0 and mu1 > 0".into()));
    }
    let li = lambda_infinity(w, sigma, &limsup_grid(), LimsupOptions::default());
    let gap_ok = check_subcritical_gap(delta, mu1, li.value);
    if !gap_ok {
        return Err(Error::Threshold(format!(
            "gap 4 delta^2 mu1 > Lambda^2 + 2 delta Lambda fails (Lambda_inf estimate {:?})",
            li.value.map(|v| v.as_f64())
        )));
    }
    let target = T::c(4.0) * delta * delta * mu1;
    let grid = threshold_grid(lambda_cap);
    let margins: Vec<T> = grid
        .iter()
        .map(|&l| {
            let e = envelope(w, sigma, l);
            target - e * e - T::two() * delta * e
        })
        .collect();
    let mut start = grid.len();
    while start > 0 && margins[start - 1] >= T::zero() {
        start -= 1;
    }
    if start == grid.len() {
        return Err(Error::Threshold(format!(
            "condition fails at lambda_cap = {}",
            lambda_cap.as_f64()
        )));
    }
    let worst_margin = margins[start..].iter().copied().fold(T::infinity(), T::min);
    Ok(ThresholdReport { nu: grid[start], lambda_inf: li.value, gap_ok, worst_margin, lambda_cap })
}

/// `nu = max(1, (mu2 / (4 delta^2))^(1/(4 sigma - 2)))` for `sigma > 1/2`;
/// at `sigma = 1/2` returns `1` when `4 delta^2 >= mu2` and fails otherwise.
pub fn find_nu_supercritical<T: Real>(delta: T, mu2: T, sigma: T) -> Result<T> {
    if !(delta > T::zero()) || mu2 < T::zero() {
        return Err(Error::Precondition("supercritical threshold needs delta > 0 and mu2 >= 0".into()));
    }
    let four_d2 = T::c(4.0) * delta * delta;
    if sigma < T::half() {
        return Err(Error::Domain(format!("sigma = {sigma} is not supercritical")));
    }
    if sigma == T::half() {
        return if four_d2 >= mu2 {
            Ok(T::one())
        } else {
            Err(Error::Threshold(format!("sigma = 1/2 needs 4 delta^2 >= mu2 ({four_d2} < {mu2})")))
        };
    }
    let nu = (mu2 / four_d2).powf((T::c(4.0) * sigma - T::two()).recip());
    Ok(nu.max(T::one()))
}

/// `max_{a != b} |g(a) - g(b)| / omega(|a - b|)` over samples `(t_i, g_i)`.
pub fn modulus_constant_estimate<T: Real>(times: &[T], values: &[T], w: &Modulus<T>) -> Result<T> {
    if times.len() != values.len() {
        return Err(Error::LengthMismatch { expected: times.len(), got: values.len() });
    }
    let n = times.len();
    if n < 2 {
        return Ok(T::zero());
    }
    let h = (times[n - 1] - times[0]) / T::from_count(n - 1);
    let uniform = h > T::zero()
        && times
            .iter()
            .enumerate()
            .all(|(i, &t)| (t - times[0] - T::from_count(i) * h).abs() <= T::c(1e-9) * h);
    let lag_omega: Option<Vec<T>> = uniform.then(|| (0..n).map(|d| w.eval(T::from_count(d) * h)).collect());
    let best = (0..n - 1)
        .into_par_iter()
        .map(|i| {
            let mut m = T::zero();
            for j in i + 1..n {
                let om = match &lag_omega {
                    Some(tab) => tab[j - i],
                    None => w.eval((times[j] - times[i]).abs()),
                };
                let d = (values[j] - values[i]).abs();
                if d > T::zero() {
                    m = m.max(d / om);
                }
            }
            m
        })
        .reduce(T::zero, T::max);
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn standard_moduli_pass() {
        let g = default_grid::<f64>();
        assert!(verify_modulus(&Modulus::holder(2.0, 0.5).unwrap(), &g).ok);
        let r = verify_modulus(&Modulus::xlogx(), &g);
        assert!(r.ok, "{:?}", r.violation);
        let c = compose(&Modulus::holder(1.0, 0.5).unwrap(), &Modulus::xlogx());
        let r = verify_modulus(&c, &g);
        assert!(r.ok, "{:?}", r.violation);
    }

    #[test]
    fn square_breaks_ratio_law() {
        let w = Modulus::custom("x^2", |x: f64| x * x);
        let r = verify_modulus(&w, &default_grid());
        assert!(!r.ok);
        assert_eq!(r.violation.unwrap().law, ModulusLaw::RatioNondecreasing);
    }

    #[test]
    fn lambda_inf_holder_regimes() {
        let g = limsup_grid::<f64>();
        let o = LimsupOptions::default();
        let exact = lambda_infinity(&Modulus::holder(0.7, 0.6).unwrap(), 0.2, &g, o);
        assert_relative_eq!(exact.value.unwrap(), 0.7, max_relative = 1e-12);
        assert_eq!(lambda_infinity(&Modulus::holder(1.0, 0.9).unwrap(), 0.2, &g, o).value, Some(0.0));
        assert!(lambda_infinity(&Modulus::holder(1.0, 0.3).unwrap(), 0.2, &g, o).is_infinite());
        assert!(lambda_infinity(&Modulus::xlogx(), 0.0, &g, o).is_infinite());
    }

    #[test]
    fn gap_is_strict() {
        assert!(!check_subcritical_gap(1.0, 2.0, Some(2.0)));
        assert!(check_subcritical_gap(1.0, 2.1, Some(2.0)));
        assert!(!check_subcritical_gap(1.0, 2.1, None));
    }

    #[test]
    fn supercritical_threshold() {
        assert_relative_eq!(find_nu_supercritical(0.5, 4.0, 1.0).unwrap(), 2.0, max_relative = 1e-14);
        assert_eq!(find_nu_supercritical(1.0, 4.0, 0.5).unwrap(), 1.0);
        assert!(find_nu_supercritical(0.5, 4.0, 0.5).is_err());
    }

    #[test]
    fn subcritical_threshold_examples() {
        let sigma = 0.25;
        let w = Modulus::holder(0.1, 1.0 - 2.0 * sigma).unwrap();
        assert_eq!(find_nu_subcritical(1.0, 1.0, &w, sigma, 1e6).unwrap().nu, 1.0);
        let rough = Modulus::holder(1.0, 0.3).unwrap();
        assert!(find_nu_subcritical(1.0, 1.0, &rough, sigma, 1e6).is_err());
    }

    #[test]
    fn table_modulus_interpolates() {
        let w = Modulus::table(vec![1.0, 2.0], vec![1.0, 1.5]).unwrap();
        assert_relative_eq!(w.eval(0.5), 0.5);
        assert_relative_eq!(w.eval(1.5), 1.25);
        assert_relative_eq!(w.eval(4.0), 3.0);
        assert!(verify_modulus(&w, &default_grid()).ok);
    }

    #[test]
    fn constant_estimate_lipschitz() {
        let t: Vec<f64> = (0..=100).map(|i| i as f64 * 0.01).collect();
        let g: Vec<f64> = t.iter().map(|x| 3.0 * x).collect();
        let w = Modulus::holder(1.0, 1.0).unwrap();
        assert_relative_eq!(modulus_constant_estimate(&t, &g, &w).unwrap(), 3.0, max_relative = 1e-9);
    }
}
