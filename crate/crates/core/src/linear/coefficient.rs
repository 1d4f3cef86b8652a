use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::expr::Expr;
use crate::error::{Error, Result};
use crate::moduli::{Modulus, ModulusSpec};
use crate::scalar::Real;

/// Uniform grid `t_i = i T / steps`, `i = 0..=steps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimeGrid<T> {
    pub t_end: T,
    pub steps: usize,
}

impl<T: Real> TimeGrid<T> {
    pub fn new(t_end: T, steps: usize) -> Result<Self> {
        if !(t_end > T::zero() && t_end.is_finite()) || steps == 0 {
            return Err(Error::Invalid(format!("time grid needs T > 0 and steps >= 1 (T={t_end}, steps={steps})")));
        }
        Ok(Self { t_end, steps })
    }

    /// Grid with step as close as possible to `h` from above.
    pub fn with_step(t_end: T, h: T) -> Result<Self> {
        if !(h > T::zero()) {
            return Err(Error::Invalid("time step must be positive".into()));
        }
        let steps = (t_end / h - T::c(1e-9)).ceil().to_usize().unwrap_or(0).max(1);
        Self::new(t_end, steps)
    }

    #[inline]
    pub fn step(&self) -> T {
        self.t_end / T::from_count(self.steps)
    }

    #[inline]
    pub fn time(&self, i: usize) -> T {
        if i == self.steps {
            self.t_end
        } else {
            self.t_end * T::from_count(i) / T::from_count(self.steps)
        }
    }

    pub fn len(&self) -> usize {
        self.steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn times(&self) -> Vec<T> {
        (0..self.len()).map(|i| self.time(i)).collect()
    }
}

/// Coefficient `c(t)` sampled on a uniform grid, with box bounds
/// `mu1 <= c <= mu2`, optional modulus of continuity, piecewise-linear in
/// between samples and extended by `c(T)` for `t > T`.
#[derive(Debug, Clone)]
pub struct TimeCoefficient<T> {
    grid: TimeGrid<T>,
    samples: Vec<T>,
    mu1: T,
    mu2: T,
    modulus: Option<Modulus<T>>,
    /// `prefix[i] = int_0^{t_i} c`.
    prefix: Vec<T>,
}

impl<T: Real> TimeCoefficient<T> {
    pub fn new(grid: TimeGrid<T>, samples: Vec<T>, mu1: T, mu2: T) -> Result<Self> {
        if samples.len() != grid.len() {
            return Err(Error::LengthMismatch { expected: grid.len(), got: samples.len() });
        }
        if !(mu1 >= T::zero() && mu1 <= mu2 && mu2.is_finite()) {
            return Err(Error::Invalid(format!("coefficient bounds need 0 <= mu1 <= mu2 (mu1={mu1}, mu2={mu2})")));
        }
        let slack = T::c(1e-12) * mu2.max(T::one());
        for (i, &c) in samples.iter().enumerate() {
            if !c.is_finite() {
                return Err(Error::NonFinite(format!("coefficient sample {i}")));
            }
            if c < mu1 - slack || c > mu2 + slack {
                return Err(Error::Invalid(format!(
                    "coefficient sample {i} (t={}) = {c} outside [{mu1}, {mu2}]",
                    grid.time(i)
                )));
            }
        }
        Ok(Self::unchecked(grid, samples, mu1, mu2, None))
    }

    fn unchecked(grid: TimeGrid<T>, samples: Vec<T>, mu1: T, mu2: T, modulus: Option<Modulus<T>>) -> Self {
        let h = grid.step();
        let mut prefix = Vec::with_capacity(samples.len());
        let mut acc = T::zero();
        prefix.push(acc);
        for w in samples.windows(2) {
            acc += T::half() * h * (w[0] + w[1]);
            prefix.push(acc);
        }
        Self { grid, samples, mu1, mu2, modulus, prefix }
    }

    pub fn constant(grid: TimeGrid<T>, value: T) -> Result<Self> {
        Self::new(grid, vec![value; grid.len()], value, value)
    }

    pub fn from_fn(grid: TimeGrid<T>, f: impl Fn(T) -> T, mu1: T, mu2: T) -> Result<Self> {
        Self::new(grid, grid.times().into_iter().map(f).collect(), mu1, mu2)
    }

    /// Attaches a modulus after checking `|c(t_i) - c(t_j)| <= omega(|t_i - t_j|)`
    /// on every pair of samples.
    pub fn with_modulus(mut self, w: Modulus<T>) -> Result<Self> {
        let h = self.grid.step();
        let n = self.samples.len();
        let tol = T::one() + T::c(1e-12);
        for d in 1..n {
            let om = w.eval(T::from_count(d) * h) * tol;
            for i in 0..n - d {
                let diff = (self.samples[i + d] - self.samples[i]).abs();
                if diff > om {
                    return Err(Error::Invalid(format!(
                        "coefficient violates its modulus between t={} and t={}: |dc| = {diff} > {om}",
                        self.grid.time(i),
                        self.grid.time(i + d)
                    )));
                }
            }
        }
        self.modulus = Some(w);
        Ok(self)
    }

    pub fn grid(&self) -> &TimeGrid<T> {
        &self.grid
    }

    pub fn samples(&self) -> &[T] {
        &self.samples
    }

    pub fn mu1(&self) -> T {
        self.mu1
    }

    pub fn mu2(&self) -> T {
        self.mu2
    }

    pub fn modulus(&self) -> Option<&Modulus<T>> {
        self.modulus.as_ref()
    }

    /// `c(t)`.
    pub fn eval(&self, t: T) -> T {
        let n = self.samples.len() - 1;
        if t >= self.grid.t_end {
            return self.samples[n];
        }
        if t <= T::zero() {
            return self.samples[0];
        }
        let x = t / self.grid.step();
        let i = x.floor().to_usize().unwrap_or(0).min(n - 1);
        let frac = x - T::from_count(i);
        self.samples[i] + (self.samples[i + 1] - self.samples[i]) * frac
    }

    /// `int_0^t c`, exact for the piecewise-linear interpolant.
    pub fn integral(&self, t: T) -> T {
        let n = self.samples.len() - 1;
        let t_end = self.grid.t_end;
        if t >= t_end {
            return self.prefix[n] + self.samples[n] * (t - t_end);
        }
        if t <= T::zero() {
            return self.samples[0] * t;
        }
        let h = self.grid.step();
        let i = (t / h).floor().to_usize().unwrap_or(0).min(n - 1);
        let s = t - self.grid.time(i);
        let ct = self.eval(t);
        self.prefix[i] + T::half() * s * (self.samples[i] + ct)
    }

    /// Mean of `c` over `[a, b]`.
    pub fn average(&self, a: T, b: T) -> T {
        if b > a {
            (self.integral(b) - self.integral(a)) / (b - a)
        } else {
            self.eval(a)
        }
    }

    /// Step averages of `c` on `grid`, the frozen values used by the solver.
    pub fn step_averages(&self, grid: &TimeGrid<T>) -> Vec<T> {
        let same = grid.steps == self.grid.steps && grid.t_end == self.grid.t_end;
        (0..grid.steps)
            .map(|i| {
                if same {
                    T::half() * (self.samples[i] + self.samples[i + 1])
                } else {
                    self.average(grid.time(i), grid.time(i + 1))
                }
            })
            .collect()
    }

    /// `sup |c(t_i) - c(t_j)| / omega(|t_i - t_j|)` is at most one when attached;
    /// this returns `sup |c|` for reporting.
    pub fn sup(&self) -> T {
        self.samples.iter().copied().fold(T::zero(), |a, b| a.max(b.abs()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MollifierChecks<T> {
    pub bounds_ok: bool,
    /// `max |c - c_eps|`, compared to `omega(eps)`.
    pub max_deviation: T,
    /// `max |c_eps'|`, compared to `omega(eps) / eps`.
    pub max_derivative: T,
    pub deviation_ok: Option<bool>,
    pub derivative_ok: Option<bool>,
}

#[derive(Debug, Clone)]
pub struct Mollified<T> {
    pub eps: T,
    pub coefficient: TimeCoefficient<T>,
    /// `c_eps'(t_i) = (c(t_i + eps) - c(t_i)) / eps`.
    pub derivative: Vec<T>,
    pub checks: MollifierChecks<T>,
}

/// `c_eps(t) = (1/eps) int_t^{t+eps} c`, with the stated properties checked
/// on the sample grid.
pub fn mollify<T: Real>(c: &TimeCoefficient<T>, eps: T) -> Result<Mollified<T>> {
    if !(eps > T::zero() && eps.is_finite()) {
        return Err(Error::Invalid(format!("mollifier width must be positive, got {eps}")));
    }
    let grid = *c.grid();
    let times = grid.times();
    let samples: Vec<T> = times.iter().map(|&t| (c.integral(t + eps) - c.integral(t)) / eps).collect();
    let derivative: Vec<T> = times.iter().map(|&t| (c.eval(t + eps) - c.eval(t)) / eps).collect();
    let slack = T::c(1e-12) * c.mu2().max(T::one());
    let bounds_ok = samples.iter().all(|&v| v >= c.mu1() - slack && v <= c.mu2() + slack);
    let max_deviation = samples.iter().zip(c.samples()).map(|(a, b)| (*a - *b).abs()).fold(T::zero(), T::max);
    let max_derivative = derivative.iter().map(|d| d.abs()).fold(T::zero(), T::max);
    let tol = T::one() + T::c(1e-9);
    let (deviation_ok, derivative_ok) = match c.modulus() {
        Some(w) => {
            let we = w.eval(eps);
            (Some(max_deviation <= we * tol), Some(max_derivative <= we / eps * tol))
        }
        None => (None, None),
    };
    let coefficient = TimeCoefficient::unchecked(grid, samples, c.mu1(), c.mu2(), c.modulus().cloned());
    Ok(Mollified {
        eps,
        coefficient,
        derivative,
        checks: MollifierChecks { bounds_ok, max_deviation, max_derivative, deviation_ok, derivative_ok },
    })
}

/// Coefficient description as found in run configurations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CoefficientSpec {
    Constant {
        value: f64,
    },
    /// Multiscale random piecewise-linear signal rescaled into `[mu1, mu2]`;
    /// carries a Hölder modulus `M x^gamma` valid for the construction.
    HolderNoise {
        mu1: f64,
        mu2: f64,
        gamma: f64,
        #[serde(default = "default_scales")]
        scales: usize,
        #[serde(default = "default_spacing")]
        spacing: f64,
    },
    /// Samples on a uniform grid over `[0, T]`, resampled onto the run grid.
    Table {
        values: Vec<f64>,
        mu1: Option<f64>,
        mu2: Option<f64>,
    },
    Expr {
        expr: String,
        mu1: f64,
        mu2: f64,
        modulus: Option<ModulusSpec>,
    },
}

fn default_scales() -> usize {
    6
}

fn default_spacing() -> f64 {
    0.25
}

impl CoefficientSpec {
    pub fn build<T: Real>(&self, grid: TimeGrid<T>, seed: u64) -> Result<TimeCoefficient<T>> {
        match self {
            CoefficientSpec::Constant { value } => TimeCoefficient::constant(grid, T::c(*value)),
            CoefficientSpec::HolderNoise { mu1, mu2, gamma, scales, spacing } => {
                holder_noise(grid, T::c(*mu1), T::c(*mu2), T::c(*gamma), *scales, T::c(*spacing), seed)
            }
            CoefficientSpec::Table { values, mu1, mu2 } => {
                if values.len() < 2 {
                    return Err(Error::Invalid("table coefficient needs at least two values".into()));
                }
                let tg = TimeGrid::new(grid.t_end, values.len() - 1)?;
                let lo = mu1.unwrap_or_else(|| values.iter().copied().fold(f64::INFINITY, f64::min));
                let hi = mu2.unwrap_or_else(|| values.iter().copied().fold(f64::NEG_INFINITY, f64::max));
                let table = TimeCoefficient::new(tg, values.iter().map(|&v| T::c(v)).collect(), T::c(lo), T::c(hi))?;
                TimeCoefficient::from_fn(grid, |t| table.eval(t), T::c(lo), T::c(hi))
            }
            CoefficientSpec::Expr { expr, mu1, mu2, modulus } => {
                let e = Expr::parse(expr)?;
                let c = TimeCoefficient::from_fn(grid, |t| T::c(e.eval(t.as_f64())), T::c(*mu1), T::c(*mu2))?;
                match modulus {
                    Some(m) => c.with_modulus(m.build()?),
                    None => Ok(c),
                }
            }
        }
    }
}

/// Sum over scales `j` of piecewise-linear random signals with knot spacing
/// `spacing / 2^j` and amplitude `2^{-j gamma}`. A signal with Lipschitz
/// constant `L` and oscillation `R` obeys `min(L x, R) <= R^{1-gamma} L^gamma x^gamma`,
/// which gives the declared modulus.
pub fn holder_noise<T: Real>(
    grid: TimeGrid<T>,
    mu1: T,
    mu2: T,
    gamma: T,
    scales: usize,
    spacing: T,
    seed: u64,
) -> Result<TimeCoefficient<T>> {
    if !(gamma > T::zero() && gamma <= T::one()) || scales == 0 || !(spacing > T::zero()) || !(mu2 > mu1) {
        return Err(Error::Invalid("holder-noise needs gamma in (0,1], scales >= 1, spacing > 0, mu2 > mu1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let times = grid.times();
    let mut f = vec![T::zero(); times.len()];
    let mut m_const = T::zero();
    for j in 0..scales {
        let dj = spacing / T::c(2f64.powi(j as i32));
        let amp = T::c(2f64.powf(-(j as f64) * gamma.as_f64()));
        let knots = (grid.t_end / dj).ceil().to_usize().unwrap_or(1) + 2;
        let v: Vec<T> = (0..knots).map(|_| amp * T::c(rng.gen_range(-1.0..1.0))).collect();
        let lip = v.windows(2).map(|w| (w[1] - w[0]).abs()).fold(T::zero(), T::max) / dj;
        let osc = v.iter().copied().fold(T::neg_infinity(), T::max) - v.iter().copied().fold(T::infinity(), T::min);
        m_const += osc.powf(T::one() - gamma) * lip.powf(gamma);
        for (fi, &t) in f.iter_mut().zip(&times) {
            let x = t / dj;
            let i = x.floor().to_usize().unwrap_or(0).min(knots - 2);
            let fr = x - T::from_count(i);
            *fi += v[i] + (v[i + 1] - v[i]) * fr;
        }
    }
    let lo = f.iter().copied().fold(T::infinity(), T::min);
    let hi = f.iter().copied().fold(T::neg_infinity(), T::max);
    let scale = if hi > lo { (mu2 - mu1) / (hi - lo) } else { T::zero() };
    let samples: Vec<T> = f.iter().map(|&v| (mu1 + (v - lo) * scale).max(mu1).min(mu2)).collect();
    let m = (m_const * scale).max(T::c(1e-300));
    TimeCoefficient::new(grid, samples, mu1, mu2)?.with_modulus(Modulus::holder(m, gamma)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn mollify_linear_ramp() {
        let grid = TimeGrid::new(1.0, 100).unwrap();
        let c = TimeCoefficient::from_fn(grid, |t| t, 0.0, 1.0).unwrap();
        let m = mollify(&c, 0.2).unwrap();
        assert_relative_eq!(m.coefficient.eval(0.9), 0.975, max_relative = 1e-12);
        assert!(m.checks.bounds_ok);
    }

    #[test]
    fn mollify_constant_is_identity() {
        let grid = TimeGrid::<f64>::new(2.0, 50).unwrap();
        let c = TimeCoefficient::constant(grid, 1.7).unwrap();
        let m = mollify(&c, 0.3).unwrap();
        assert!(m.coefficient.samples().iter().all(|&v| (v - 1.7).abs() < 1e-14));
    }

    #[test]
    fn integral_matches_trapezoid() {
        let grid = TimeGrid::new(1.0, 10).unwrap();
        let c = TimeCoefficient::from_fn(grid, |t| t * t, 0.0, 1.0).unwrap();
        assert_relative_eq!(c.integral(1.0), 0.335, max_relative = 1e-12);
        assert_relative_eq!(c.integral(1.5), 0.835, max_relative = 1e-12);
    }

    #[test]
    fn out_of_box_rejected() {
        let grid = TimeGrid::new(1.0, 4).unwrap();
        assert!(TimeCoefficient::from_fn(grid, |t| 2.0 * t, 0.0, 1.0).is_err());
    }

    #[test]
    fn holder_noise_respects_modulus() {
        let grid = TimeGrid::new(1.0, 400).unwrap();
        let c = holder_noise(grid, 1.0, 2.0, 0.6, 5, 0.25, 11).unwrap();
        assert!(c.modulus().is_some());
        assert!(c.samples().iter().all(|&v| (1.0..=2.0).contains(&v)));
    }

    #[test]
    fn modulus_violation_rejected() {
        let grid = TimeGrid::new(1.0, 100).unwrap();
        let c = TimeCoefficient::from_fn(grid, |t| t, 0.0, 1.0).unwrap();
        assert!(c.clone().with_modulus(Modulus::holder(0.5, 1.0).unwrap()).is_err());
        assert!(c.with_modulus(Modulus::holder(1.0, 1.0).unwrap()).is_ok());
    }
}
