use serde::Serialize;

use super::bounds::{estimate_k2, smallness_constants};
use super::problem::{truncate_nonlinearity, KirchhoffProblem, Regime};
use super::solver::{solve_fixed_point_with, BlowUp, ConstantsUsed, FixedPointConfig, SolveReport};
use crate::error::{Error, Result};
use crate::interp::customized_modulus;
use crate::linear::TimeGrid;
use crate::moduli::{find_nu_subcritical, find_nu_supercritical, Modulus, DEFAULT_LAMBDA_CAP};
use crate::scalar::Real;
use crate::spectrum::StatePair;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContinuationConfig {
    /// Upper bound for the chunk length; the local horizon may shorten it.
    pub chunk: f64,
    pub max_t: f64,
    pub step: f64,
    pub fixed_point: FixedPointConfig,
    /// Blow-up is declared when the seminorm exceeds this multiple of its
    /// initial value...
    pub blowup_factor: f64,
    /// ...and has grown over this many consecutive chunks.
    pub growth_chunks: usize,
    /// Keep every `keep_every`-th sample in the returned trajectory.
    pub keep_every: usize,
    /// High-frequency constant; estimated when absent.
    pub k2: Option<f64>,
}

impl Default for ContinuationConfig {
    fn default() -> Self {
        Self {
            chunk: 1.0,
            max_t: 10.0,
            step: 1e-3,
            fixed_point: FixedPointConfig::default(),
            blowup_factor: 1e6,
            growth_chunks: 3,
            keep_every: 10,
            k2: None,
        }
    }
}

struct Monitor<T> {
    weights: Vec<T>,
}

impl<T: Real> Monitor<T> {
    fn new(s: &StatePair<T>, w: &Modulus<T>) -> Self {
        let g = s.grid();
        let weights = (0..g.len())
            .map(|k| {
                let l = g.lambda(k);
                if l > T::zero() {
                    w.eval(l.recip()).recip()
                } else {
                    T::zero()
                }
            })
            .collect();
        Self { weights }
    }

    fn seminorm_sq(&self, s: &StatePair<T>) -> T {
        (0..s.len()).map(|k| self.weights[k] * s.mode_energy(k)).sum()
    }
}

/// Solves on successive chunks of length `min(chunk, log 2 / ((1 + mu2) nu))`,
/// each by the fixed-point method restarted from the previous endpoint,
/// while monitoring `||(u, u')||^2_{omega_d}` with `omega_d` built from the
/// initial data.
pub fn continue_solution<T: Real>(p: &KirchhoffProblem<T>, cfg: &ContinuationConfig) -> Result<SolveReport<T>> {
    if !(cfg.chunk > 0.0 && cfg.max_t > 0.0 && cfg.step > 0.0) {
        return Err(Error::Invalid("continuation needs positive chunk, max_t and step".into()));
    }
    let (sigma, delta) = (p.sigma(), p.delta());
    let m = p.nonlinearity();
    let alpha = p.alpha().unwrap_or(T::zero());
    let omega_d = customized_modulus(p.initial(), alpha)?.modulus;
    let monitor = Monitor::new(p.initial(), &omega_d);
    let sn0 = monitor.seminorm_sq(p.initial());

    let mut k2_cache: Option<(T, T)> = cfg.k2.map(|k| (T::infinity(), T::c(k)));
    let mut k2_for = |mu2: T| -> Result<T> {
        match k2_cache {
            Some((m2, k)) if mu2 <= m2 => Ok(k),
            _ => {
                let k = estimate_k2(sigma, delta, m.mu1().unwrap_or(T::zero()), mu2)?;
                k2_cache = Some((mu2, k));
                Ok(k)
            }
        }
    };

    let max_t = T::c(cfg.max_t);
    let mut t = T::zero();
    let mut state = p.initial().clone();
    let mut whole: Option<crate::linear::Trajectory<T>> = None;
    let mut last_report: Option<SolveReport<T>> = None;
    let mut iterations = 0;
    let mut residuals = Vec::new();
    let mut energy_residual = T::zero();
    let mut ends: Vec<(T, T)> = vec![(T::zero(), sn0)];
    let mut max_sn = sn0;
    let mut blow_up = None;
    let mut nu_used = T::zero();
    let mut t_local_min = T::infinity();
    let mut k2_used = None;
    let mut chunk = 0usize;

    while max_t - t > T::c(1e-12) * max_t {
        let g = state.u0.power_norm_sq(T::half());
        let trunc = truncate_nonlinearity(m, g);
        let nu = match p.regime() {
            Regime::Supercritical => find_nu_supercritical(delta, trunc.mu2_bound, sigma).unwrap_or(T::one()),
            Regime::Subcritical => {
                let k2 = k2_for(trunc.mu2_bound)?;
                k2_used = Some(k2);
                let scale = T::c(6.0) * k2 * monitor.seminorm_sq(&state);
                let (wm, wd) = (m.modulus().clone(), omega_d.clone());
                let omega_c = Modulus::custom("omega_c", move |x: T| wm.eval(scale * wd.eval(x)));
                let mu1 = m.mu1().expect("subcritical problems carry mu1");
                find_nu_subcritical(delta, mu1, &omega_c, sigma, T::c(DEFAULT_LAMBDA_CAP))
                    .map_err(|e| Error::Chunk { chunk, source: Box::new(e) })?
                    .nu
            }
        };
        let t_local = T::c(2f64.ln()) / ((T::one() + trunc.mu2_bound) * nu);
        nu_used = nu;
        t_local_min = t_local_min.min(t_local);
        let len = T::c(cfg.chunk).min(t_local).min(max_t - t);
        let steps = (len / T::c(cfg.step)).ceil().to_usize().unwrap_or(1).max(1);
        let grid = TimeGrid::new(len, steps)?;
        let sub = p.restarted(state.clone(), len)?;
        let mut rep = solve_fixed_point_with(&sub, &trunc, &grid, &cfg.fixed_point)
            .map_err(|e| Error::Chunk { chunk, source: Box::new(e) })?;
        iterations += rep.fixed_point_iterations;
        residuals.extend_from_slice(&rep.residual_history);
        energy_residual = energy_residual.max(rep.energy_residual);

        // the truncated problem is the original one only while g <= M0
        let pot = rep.trajectory.potential_series();
        if let Some(i) = pot.iter().position(|&v| v > trunc.m0) {
            if i <= 1 {
                return Err(Error::Chunk {
                    chunk,
                    source: Box::new(Error::Breakdown {
                        time: (t + rep.trajectory.times()[i]).as_f64(),
                        reason: "|A^(1/2) u|^2 left [0, M0] within one step".into(),
                    }),
                });
            }
            rep.trajectory.truncate(i);
        }
        for s in rep.trajectory.states() {
            max_sn = max_sn.max(monitor.seminorm_sq(s));
        }
        let mut piece = rep.trajectory.decimate(cfg.keep_every);
        piece.shift_times(t);
        t = piece.times()[piece.len() - 1];
        state = rep.trajectory.last().clone();
        match whole.as_mut() {
            Some(w) => w.append(&piece),
            None => whole = Some(piece),
        }
        let sn = monitor.seminorm_sq(&state);
        ends.push((t, sn));
        last_report = Some(rep);
        chunk += 1;

        let n = ends.len();
        let g_chunks = cfg.growth_chunks.max(1);
        let growing = n > g_chunks && ends[n - 1 - g_chunks..].windows(2).all(|w| w[1].1 > w[0].1);
        if sn > T::c(cfg.blowup_factor) * sn0.max(T::min_positive_value()) && growing {
            blow_up = Some(BlowUp { time: t, seminorm_history: ends.clone() });
            break;
        }
    }

    let last = last_report.ok_or_else(|| Error::Invalid("continuation produced no chunk".into()))?;
    let mut constants = ConstantsUsed::from_truncation(&truncate_nonlinearity(m, state.u0.power_norm_sq(T::half())));
    constants.nu = Some(nu_used);
    constants.t_local = Some(t_local_min);
    constants.k2 = k2_used;
    if p.regime() == Regime::Subcritical {
        if let Ok(sm) = smallness_constants(p, &omega_d, k2_used) {
            constants.l1 = Some(sm.l1);
            constants.eps1_ok = Some(sm.eps1_ok);
        }
    }
    Ok(SolveReport {
        trajectory: whole.expect("at least one chunk"),
        nonlinearity: m.clone(),
        fixed_point_iterations: iterations,
        residual_history: residuals,
        final_coefficient: last.final_coefficient,
        energy_residual,
        blow_up,
        diagnostic: None,
        constants,
        max_seminorm_sq: Some(max_sn),
    })
}
