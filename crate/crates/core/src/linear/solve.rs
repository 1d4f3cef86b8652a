use rayon::prelude::*;
use serde::Serialize;

use super::coefficient::{TimeCoefficient, TimeGrid};
use super::propagator::StepPropagator;
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::spectrum::{energy_norm_sq, ModeGrid, SpectralVector, StatePair};

/// `(w(t_i), w'(t_i))` for one mode.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeHistory<T> {
    pub lambda: T,
    pub grid: TimeGrid<T>,
    pub w: Vec<T>,
    pub dw: Vec<T>,
}

impl<T: Real> ModeHistory<T> {
    /// `|w'|^2 + lambda^2 |w|^2` at sample `i`.
    pub fn energy(&self, i: usize) -> T {
        self.dw[i] * self.dw[i] + self.lambda * self.lambda * self.w[i] * self.w[i]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectoryMeta<T> {
    pub sigma: T,
    pub delta: T,
    pub mu1: T,
    pub mu2: T,
}

#[derive(Debug, Clone)]
pub struct Trajectory<T> {
    grid: ModeGrid<T>,
    times: Vec<T>,
    states: Vec<StatePair<T>>,
    pub meta: TrajectoryMeta<T>,
}

impl<T: Real> Trajectory<T> {
    pub fn new(grid: ModeGrid<T>, times: Vec<T>, states: Vec<StatePair<T>>, meta: TrajectoryMeta<T>) -> Result<Self> {
        if times.len() != states.len() || times.is_empty() {
            return Err(Error::LengthMismatch { expected: times.len(), got: states.len() });
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Invalid("trajectory times must increase strictly".into()));
        }
        Ok(Self { grid, times, states, meta })
    }

    pub fn grid(&self) -> &ModeGrid<T> {
        &self.grid
    }

    pub fn times(&self) -> &[T] {
        &self.times
    }

    pub fn states(&self) -> &[StatePair<T>] {
        &self.states
    }

    pub fn state(&self, i: usize) -> &StatePair<T> {
        &self.states[i]
    }

    pub fn last(&self) -> &StatePair<T> {
        &self.states[self.states.len() - 1]
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn mode_history(&self, k: usize) -> ModeHistory<T> {
        let n = self.len() - 1;
        ModeHistory {
            lambda: self.grid.lambda(k),
            grid: TimeGrid { t_end: self.times[n] - self.times[0], steps: n.max(1) },
            w: self.states.iter().map(|s| s.u0.coeffs()[k]).collect(),
            dw: self.states.iter().map(|s| s.u1.coeffs()[k]).collect(),
        }
    }

    /// `|A^{1/2} u(t_i)|^2` at each sample.
    pub fn potential_series(&self) -> Vec<T> {
        self.states.iter().map(|s| s.u0.power_norm_sq(T::half())).collect()
    }

    pub fn energy_series(&self) -> Vec<T> {
        self.states.iter().map(energy_norm_sq).collect()
    }

    /// Keeps every `every`-th sample plus the last one.
    pub fn decimate(&self, every: usize) -> Self {
        let every = every.max(1);
        let n = self.len();
        let keep: Vec<usize> = (0..n).filter(|i| i % every == 0 || *i == n - 1).collect();
        Self {
            grid: self.grid.clone(),
            times: keep.iter().map(|&i| self.times[i]).collect(),
            states: keep.iter().map(|&i| self.states[i].clone()).collect(),
            meta: self.meta,
        }
    }

    /// Shifts every sample time by `dt`.
    pub(crate) fn shift_times(&mut self, dt: T) {
        self.times.iter_mut().for_each(|t| *t += dt);
    }

    /// Keeps the first `len` samples.
    pub(crate) fn truncate(&mut self, len: usize) {
        self.times.truncate(len.max(1));
        self.states.truncate(len.max(1));
    }

    /// Appends `other`, whose first sample must coincide with our last one.
    pub fn append(&mut self, other: &Self) {
        self.times.extend_from_slice(&other.times[1..]);
        self.states.extend_from_slice(&other.states[1..]);
    }
}

/// Damping rate `delta lambda^{2 sigma}` (with `0^0 = 1`).
#[inline]
pub fn damping<T: Real>(lambda: T, sigma: T, delta: T) -> T {
    delta * lambda.pow_conv(T::two() * sigma)
}

/// Integrates one mode with frozen per-step coefficients `cbar` and optional
/// step-constant forcing.
pub(crate) fn run_mode<T: Real>(
    lambda: T,
    b: T,
    cbar: &[T],
    f: Option<&[T]>,
    w0: T,
    w1: T,
    grid: &TimeGrid<T>,
) -> Result<(Vec<T>, Vec<T>)> {
    let h = grid.step();
    let lam2 = lambda * lambda;
    let n = grid.steps;
    let mut w = Vec::with_capacity(n + 1);
    let mut dw = Vec::with_capacity(n + 1);
    w.push(w0);
    dw.push(w1);
    let (mut x, mut v) = (w0, w1);
    let mut cached: Option<(T, StepPropagator<T>)> = None;
    for i in 0..n {
        let c = cbar[i];
        let p = match cached {
            Some((cc, p)) if cc == c => p,
            _ => {
                let p = StepPropagator::new(b, lam2 * c, h);
                cached = Some((c, p));
                p
            }
        };
        let fi = f.map_or(T::zero(), |f| f[i]);
        (x, v) = p.apply(x, v, fi);
        if !(x.is_finite() && v.is_finite()) {
            return Err(Error::Breakdown { time: grid.time(i + 1).as_f64(), reason: format!("mode lambda={lambda} became non-finite") });
        }
        w.push(x);
        dw.push(v);
    }
    Ok((w, dw))
}

/// Solves `w'' + 2 delta lambda^{2 sigma} w' + lambda^2 c(t) w = f` on `grid`.
/// Within each step `c` is replaced by its mean over the step and `f` is
/// taken as constant (`f[i]` on step `i`); the step is then exact.
#[allow(clippy::too_many_arguments)]
pub fn propagate_mode<T: Real>(
    lambda: T,
    sigma: T,
    delta: T,
    c: &TimeCoefficient<T>,
    f: Option<&[T]>,
    w0: T,
    w1: T,
    grid: &TimeGrid<T>,
) -> Result<ModeHistory<T>> {
    if !(lambda >= T::zero()) || !(delta >= T::zero()) || !(sigma >= T::zero()) {
        return Err(Error::Invalid("mode propagation needs lambda, delta, sigma >= 0".into()));
    }
    if let Some(f) = f {
        if f.len() != grid.steps {
            return Err(Error::LengthMismatch { expected: grid.steps, got: f.len() });
        }
    }
    let cbar = c.step_averages(grid);
    let (w, dw) = run_mode(lambda, damping(lambda, sigma, delta), &cbar, f, w0, w1, grid)?;
    Ok(ModeHistory { lambda, grid: *grid, w, dw })
}

/// Solves `u'' + 2 delta A^sigma u' + c(t) A u = 0` mode by mode.
pub fn solve_linear<T: Real>(
    s0: &StatePair<T>,
    sigma: T,
    delta: T,
    c: &TimeCoefficient<T>,
    grid: &TimeGrid<T>,
) -> Result<Trajectory<T>> {
    let cbar = c.step_averages(grid);
    solve_frozen(s0, sigma, delta, &cbar, grid, c.mu1(), c.mu2())
}

pub(crate) fn solve_frozen<T: Real>(
    s0: &StatePair<T>,
    sigma: T,
    delta: T,
    cbar: &[T],
    grid: &TimeGrid<T>,
    mu1: T,
    mu2: T,
) -> Result<Trajectory<T>> {
    if !(delta >= T::zero()) || !(sigma >= T::zero()) {
        return Err(Error::Invalid("linear solve needs delta, sigma >= 0".into()));
    }
    let mg = s0.grid().clone();
    let modes: Vec<(Vec<T>, Vec<T>)> = (0..mg.len())
        .into_par_iter()
        .map(|k| {
            let l = mg.lambda(k);
            run_mode(l, damping(l, sigma, delta), cbar, None, s0.u0.coeffs()[k], s0.u1.coeffs()[k], grid)
        })
        .collect::<Result<_>>()?;
    let states = (0..grid.len())
        .map(|i| {
            let u0 = modes.iter().map(|m| m.0[i]).collect();
            let u1 = modes.iter().map(|m| m.1[i]).collect();
            StatePair {
                u0: SpectralVector::from_parts_unchecked(mg.clone(), u0),
                u1: SpectralVector::from_parts_unchecked(mg.clone(), u1),
            }
        })
        .collect();
    Trajectory::new(mg, grid.times(), states, TrajectoryMeta { sigma, delta, mu1, mu2 })
}

/// Velocities of the parabolic problem `u'' + 2 delta A^sigma u' = 0`,
/// `u'(t) = exp(-2 delta A^sigma t) u1`.
pub fn parabolic_reference<T: Real>(
    u1: &SpectralVector<T>,
    sigma: T,
    delta: T,
    grid: &TimeGrid<T>,
) -> Vec<SpectralVector<T>> {
    let rates: Vec<T> = u1.grid().lambdas().iter().map(|&l| T::two() * damping(l, sigma, delta)).collect();
    grid.times()
        .into_iter()
        .map(|t| {
            let c = u1.coeffs().iter().zip(&rates).map(|(&v, &r)| v * (-r * t).exp()).collect();
            SpectralVector::from_parts_unchecked(u1.grid().clone(), c)
        })
        .collect()
}
