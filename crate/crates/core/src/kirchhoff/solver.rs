use serde::Serialize;

use super::nonlinearity::NonlinearitySpec;
use super::problem::{hamiltonian, KirchhoffProblem, Regime, Truncation};
use crate::error::{Error, Result};
use crate::linear::{damping, solve_linear, StepPropagator, TimeCoefficient, TimeGrid, Trajectory, TrajectoryMeta};
use crate::moduli::find_nu_supercritical;
use crate::scalar::Real;
use crate::spectrum::{SpectralVector, StatePair};

/// Relaxed Picard settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FixedPointConfig {
    pub max_iter: usize,
    pub tol: f64,
    /// `c <- (1 - theta) c + theta Phi(c)`, `theta` in `(0, 1]`.
    pub relaxation: f64,
}

impl Default for FixedPointConfig {
    fn default() -> Self {
        Self { max_iter: 200, tol: 1e-10, relaxation: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstantsUsed<T> {
    pub m0: T,
    pub mu2: T,
    pub mu2_bound: T,
    pub nu: Option<T>,
    pub t_local: Option<T>,
    pub l1: Option<T>,
    pub eps1_ok: Option<bool>,
    pub k2: Option<T>,
}

impl<T: Real> ConstantsUsed<T> {
    pub(crate) fn from_truncation(t: &Truncation<T>) -> Self {
        Self { m0: t.m0, mu2: t.mu2, mu2_bound: t.mu2_bound, nu: None, t_local: None, l1: None, eps1_ok: None, k2: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlowUp<T> {
    pub time: T,
    /// `(t, ||(u, u')||^2_{omega_d})` at chunk ends.
    pub seminorm_history: Vec<(T, T)>,
}

/// Outcome of a nonlinear solve.
#[derive(Debug, Clone)]
pub struct SolveReport<T> {
    pub trajectory: Trajectory<T>,
    /// Nonlinearity actually integrated (the truncated one for fixed-point runs).
    pub nonlinearity: NonlinearitySpec<T>,
    pub fixed_point_iterations: usize,
    pub residual_history: Vec<f64>,
    pub final_coefficient: TimeCoefficient<T>,
    pub energy_residual: T,
    pub blow_up: Option<BlowUp<T>>,
    /// Set when the run stopped early (non-finite state or degenerate guard).
    pub diagnostic: Option<String>,
    pub constants: ConstantsUsed<T>,
    /// `max_t ||(u, u')||^2_{omega_d}` over all computed samples, when monitored.
    pub max_seminorm_sq: Option<T>,
}

/// Serializable digest of a [`SolveReport`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveSummary<T> {
    pub nonlinearity: String,
    pub sigma: T,
    pub delta: T,
    pub samples: usize,
    pub t_final: T,
    pub fixed_point_iterations: usize,
    pub final_residual: Option<f64>,
    pub energy_residual: T,
    pub blow_up: Option<BlowUp<T>>,
    pub diagnostic: Option<String>,
    pub constants: ConstantsUsed<T>,
    pub max_seminorm_sq: Option<T>,
}

impl<T: Real> SolveReport<T> {
    pub fn summary(&self) -> SolveSummary<T> {
        let tr = &self.trajectory;
        SolveSummary {
            nonlinearity: self.nonlinearity.name().to_string(),
            sigma: tr.meta.sigma,
            delta: tr.meta.delta,
            samples: tr.len(),
            t_final: tr.times()[tr.len() - 1],
            fixed_point_iterations: self.fixed_point_iterations,
            final_residual: self.residual_history.last().copied(),
            energy_residual: self.energy_residual,
            blow_up: self.blow_up.clone(),
            diagnostic: self.diagnostic.clone(),
            constants: self.constants.clone(),
            max_seminorm_sq: self.max_seminorm_sq,
        }
    }
}

fn lower_bound<T: Real>(p: &KirchhoffProblem<T>) -> T {
    p.nonlinearity().mu1().unwrap_or(T::zero())
}

fn check_guard<T: Real>(p: &KirchhoffProblem<T>, values: &[T], times: &[T]) -> Result<()> {
    if let Some(g) = p.degenerate_guard() {
        let limit = T::c(0.95) * g;
        if let Some(i) = values.iter().position(|&v| v >= limit) {
            return Err(Error::Breakdown {
                time: times[i].as_f64(),
                reason: format!("m(|A^(1/2) u|^2) = {} reached 95% of 4 delta^2 = {}", values[i], g),
            });
        }
    }
    Ok(())
}

/// `[Phi(c)](t) = m_*(|A^{1/2} u(t)|^2)` where `u` solves the linear problem
/// with coefficient `c`. Returns the new coefficient and the linear trajectory.
pub fn phi_map<T: Real>(
    c: &TimeCoefficient<T>,
    p: &KirchhoffProblem<T>,
    trunc: &Truncation<T>,
    grid: &TimeGrid<T>,
) -> Result<(TimeCoefficient<T>, Trajectory<T>)> {
    let traj = solve_linear(p.initial(), p.sigma(), p.delta(), c, grid)?;
    let samples: Vec<T> = traj.potential_series().into_iter().map(|g| trunc.m_star.eval(g)).collect();
    let next = TimeCoefficient::new(*grid, samples, lower_bound(p), trunc.mu2_bound)?;
    Ok((next, traj))
}

fn sup_diff<T: Real>(a: &TimeCoefficient<T>, b: &TimeCoefficient<T>) -> T {
    a.samples().iter().zip(b.samples()).map(|(x, y)| (*x - *y).abs()).fold(T::zero(), T::max)
}

/// Iterates `c <- (1 - theta) c + theta Phi(c)` from
/// `c0 = m_*(|A^{1/2} u0|^2)` until `||Phi(c) - c||_inf < tol`.
pub fn solve_fixed_point<T: Real>(p: &KirchhoffProblem<T>, grid: &TimeGrid<T>, cfg: &FixedPointConfig) -> Result<SolveReport<T>> {
    if !(cfg.relaxation > 0.0 && cfg.relaxation <= 1.0) {
        return Err(Error::Invalid(format!("relaxation must lie in (0, 1], got {}", cfg.relaxation)));
    }
    let trunc = p.truncation();
    solve_fixed_point_with(p, &trunc, grid, cfg)
}

pub(crate) fn solve_fixed_point_with<T: Real>(
    p: &KirchhoffProblem<T>,
    trunc: &Truncation<T>,
    grid: &TimeGrid<T>,
    cfg: &FixedPointConfig,
) -> Result<SolveReport<T>> {
    let g0 = p.initial().u0.power_norm_sq(T::half());
    let mut c = TimeCoefficient::new(*grid, vec![trunc.m_star.eval(g0); grid.len()], lower_bound(p), trunc.mu2_bound)?;
    let theta = T::c(cfg.relaxation);
    let tol = T::c(cfg.tol);
    let mut history = Vec::new();
    for it in 1..=cfg.max_iter {
        let (next, traj) = phi_map(&c, p, trunc, grid)?;
        check_guard(p, next.samples(), traj.times())?;
        let res = sup_diff(&next, &c);
        history.push(res.as_f64());
        if !res.is_finite() {
            return Err(Error::NonFinite(format!("fixed-point residual at iteration {it}")));
        }
        if res < tol {
            let mut constants = ConstantsUsed::from_truncation(trunc);
            if p.regime() == Regime::Supercritical {
                constants.nu = find_nu_supercritical(p.delta(), trunc.mu2_bound, p.sigma()).ok();
            }
            let mut report = SolveReport {
                trajectory: traj,
                nonlinearity: trunc.m_star.clone(),
                fixed_point_iterations: it,
                residual_history: history,
                final_coefficient: c,
                energy_residual: T::zero(),
                blow_up: None,
                diagnostic: None,
                constants,
                max_seminorm_sq: None,
            };
            report.energy_residual = energy_identity_residual(&report);
            return Ok(report);
        }
        let mixed: Vec<T> = c
            .samples()
            .iter()
            .zip(next.samples())
            .map(|(&a, &b)| (T::one() - theta) * a + theta * b)
            .collect();
        c = TimeCoefficient::new(*grid, mixed, lower_bound(p), trunc.mu2_bound)?;
    }
    let last = history.last().copied().unwrap_or(f64::NAN);
    Err(Error::NoConvergence { iterations: cfg.max_iter, last_residual: last, residuals: history })
}

/// Time stepping with the coefficient frozen on each step at the mean of
/// `m` over `[g_n, g_{n+1}]`, `g = |A^{1/2} u|^2`; the implicit relation is
/// solved by iteration from `m(g_n)`. With this choice
/// `M(g_{n+1}) - M(g_n) = c (g_{n+1} - g_n)`, so the Hamiltonian balance
/// holds step by step up to the quadrature of `m`.
pub fn solve_direct<T: Real>(p: &KirchhoffProblem<T>, grid: &TimeGrid<T>) -> Result<SolveReport<T>> {
    let m = p.nonlinearity();
    let mg = p.grid().clone();
    let h = grid.step();
    let lam2: Vec<T> = mg.lambdas().iter().map(|&l| l * l).collect();
    let b: Vec<T> = mg.lambdas().iter().map(|&l| damping(l, p.sigma(), p.delta())).collect();
    let mut u0 = p.initial().u0.coeffs().to_vec();
    let mut u1 = p.initial().u1.coeffs().to_vec();
    let potential = |x: &[T]| x.iter().zip(&lam2).map(|(&v, &l)| l * v * v).sum::<T>();
    let mut g = potential(&u0);
    let mut states = vec![p.initial().clone()];
    let mut coef = vec![m.eval(g)];
    let mut diagnostic = None;
    let (mut x, mut v) = (u0.clone(), u1.clone());
    'steps: for n in 0..grid.steps {
        let mut c = m.eval(g);
        let mut converged = false;
        for _ in 0..100 {
            for k in 0..mg.len() {
                let prop = StepPropagator::new(b[k], lam2[k] * c, h);
                (x[k], v[k]) = prop.apply(u0[k], u1[k], T::zero());
            }
            let g_next = potential(&x);
            let c_next = m.mean(g, g_next);
            let done = (c_next - c).abs() <= T::c(1e-14) * c.abs().max(T::one());
            c = c_next;
            if !c.is_finite() {
                break;
            }
            if done {
                converged = true;
                break;
            }
        }
        let t = grid.time(n + 1);
        if !converged || x.iter().chain(&v).any(|z| !z.is_finite()) {
            diagnostic = Some(format!("step {} (t = {}): implicit coefficient iteration failed or state became non-finite", n + 1, t));
            break 'steps;
        }
        u0.copy_from_slice(&x);
        u1.copy_from_slice(&v);
        g = potential(&u0);
        let mg_val = m.eval(g);
        if let Some(gd) = p.degenerate_guard() {
            if mg_val >= T::c(0.95) * gd {
                diagnostic = Some(format!("t = {t}: m(|A^(1/2) u|^2) = {mg_val} reached 95% of 4 delta^2 = {gd}"));
                break 'steps;
            }
        }
        states.push(StatePair {
            u0: SpectralVector::from_parts_unchecked(mg.clone(), u0.clone()),
            u1: SpectralVector::from_parts_unchecked(mg.clone(), u1.clone()),
        });
        coef.push(mg_val);
    }
    let len = states.len();
    let times: Vec<T> = (0..len).map(|i| grid.time(i)).collect();
    let mu1 = lower_bound(p);
    let mu2 = coef.iter().copied().fold(mu1, T::max);
    let meta = TrajectoryMeta { sigma: p.sigma(), delta: p.delta(), mu1, mu2 };
    let trajectory = Trajectory::new(mg, times, states, meta)?;
    let cgrid = if len > 1 { TimeGrid::new(grid.time(len - 1), len - 1)? } else { TimeGrid::new(h, 1)? };
    if len == 1 {
        coef.push(coef[0]);
    }
    let final_coefficient = TimeCoefficient::new(cgrid, coef, mu1, mu2)?;
    let trunc = p.truncation();
    let mut report = SolveReport {
        trajectory,
        nonlinearity: m.clone(),
        fixed_point_iterations: 0,
        residual_history: Vec::new(),
        final_coefficient,
        energy_residual: T::zero(),
        blow_up: None,
        diagnostic,
        constants: ConstantsUsed::from_truncation(&trunc),
        max_seminorm_sq: None,
    };
    report.energy_residual = energy_identity_residual(&report);
    Ok(report)
}

/// `max_t |H(t) + 4 delta int_0^t |A^{sigma/2} u'|^2 - H(0)| / max(H(0), 1e-30)`,
/// with the dissipation integrated by the trapezoid rule on the samples.
pub fn energy_identity_residual<T: Real>(r: &SolveReport<T>) -> T {
    let tr = &r.trajectory;
    let (sigma, delta) = (tr.meta.sigma, tr.meta.delta);
    let grid = tr.grid();
    let weights: Vec<T> = (0..grid.len()).map(|k| T::c(4.0) * delta * grid.power(k, sigma)).collect();
    let dissipation = |s: &StatePair<T>| {
        s.u1.coeffs().iter().zip(&weights).map(|(&v, &w)| w * v * v).sum::<T>()
    };
    let h0 = hamiltonian(tr.state(0), &r.nonlinearity);
    let scale = h0.max(T::c(1e-30));
    let mut acc = T::zero();
    let mut prev = dissipation(tr.state(0));
    let mut worst = T::zero();
    for i in 1..tr.len() {
        let d = dissipation(tr.state(i));
        acc += T::half() * (tr.times()[i] - tr.times()[i - 1]) * (prev + d);
        prev = d;
        let hi = hamiltonian(tr.state(i), &r.nonlinearity);
        worst = worst.max((hi + acc - h0).abs() / scale);
    }
    worst
}
