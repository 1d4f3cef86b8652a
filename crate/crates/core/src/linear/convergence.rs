use serde::Serialize;

use super::certify::{supercritical_constants, ForcedConstants};
use super::coefficient::{TimeCoefficient, TimeGrid};
use super::solve::{solve_linear, Trajectory};
use crate::error::{Error, Result};
use crate::moduli::find_nu_supercritical;
use crate::scalar::Real;
use crate::spectrum::{energy_norm_sq, StatePair};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport<T> {
    /// `d_n = sup_t (|u_n' - u'|^2 + |A^{1/2}(u_n - u)|^2)`.
    pub distances: Vec<T>,
    /// `int_0^T |c_n - c|^2`.
    pub l2_sq: Vec<T>,
    /// `|A^{1/2} u1|^2 + |A u0|^2`.
    pub data_norm: T,
    /// `d_n / (data_norm * l2_sq_n)`.
    pub ratios: Vec<T>,
    /// Mode-by-mode forced bounds (only for `sigma > 1/2`).
    pub bounds: Option<Vec<T>>,
    pub constants: Option<ForcedConstants<T>>,
    pub nu: Option<T>,
    pub bound_ok: Option<bool>,
}

/// Compares solutions driven by each `c_n` with the one driven by `c_inf`.
///
/// For `sigma > 1/2` each difference mode solves a forced problem with
/// coefficient `c_inf` and forcing `lambda^2 (c_inf - c_n) u_n`; its energy is
/// bounded by `Gamma1 e^{Gamma2 T}` (`lambda >= nu`) or `e^{(nu(1+mu2)+1) T}`
/// (`lambda < nu`) times `lambda^4 sup|u_{n,k}|^2 int |c_n - c_inf|^2`.
pub fn convergence_study<T: Real>(
    c_list: &[TimeCoefficient<T>],
    c_inf: &TimeCoefficient<T>,
    s0: &StatePair<T>,
    sigma: T,
    delta: T,
    grid: &TimeGrid<T>,
) -> Result<ConvergenceReport<T>> {
    if c_list.is_empty() {
        return Err(Error::Invalid("convergence study needs at least one coefficient".into()));
    }
    let data_norm = s0.u1.power_norm_sq(T::half()) + s0.u0.power_norm_sq(T::one());
    if !data_norm.is_finite() {
        return Err(Error::Precondition("data are not regular".into()));
    }
    let reference = solve_linear(s0, sigma, delta, c_inf, grid)?;
    let times = grid.times();
    let h = grid.step();
    let mu2 = c_list.iter().map(|c| c.mu2()).fold(c_inf.mu2(), T::max);
    let lambdas = s0.grid().lambdas().to_vec();

    let setup = if sigma > T::half() {
        let nu = find_nu_supercritical(delta, mu2, sigma)?;
        let high: Vec<T> = lambdas.iter().copied().filter(|&l| l >= nu).collect();
        let consts = if high.is_empty() { None } else { Some(supercritical_constants(sigma, delta, mu2, &high)?) };
        Some((nu, consts))
    } else {
        None
    };

    let mut distances = Vec::with_capacity(c_list.len());
    let mut l2_sq = Vec::with_capacity(c_list.len());
    let mut bounds = Vec::with_capacity(c_list.len());
    for c in c_list {
        let traj = solve_linear(s0, sigma, delta, c, grid)?;
        let d = sup_distance(&traj, &reference)?;
        let sq: Vec<T> = times.iter().map(|&t| (c.eval(t) - c_inf.eval(t)).powi(2)).collect();
        let l2 = h * (sq.iter().copied().sum::<T>() - T::half() * (sq[0] + sq[sq.len() - 1]));
        if let Some((nu, consts)) = setup {
            let t_end = grid.t_end;
            let mut b = T::zero();
            for (k, &l) in lambdas.iter().enumerate() {
                let sup_u = traj.states().iter().map(|s| s.u0.coeffs()[k].abs()).fold(T::zero(), T::max);
                let gain = match consts {
                    Some(fc) if l >= nu => fc.gamma1 * (fc.gamma2 * t_end).exp(),
                    _ => ((nu * (T::one() + mu2) + T::one()) * t_end).exp(),
                };
                b += gain * l.powi(4) * sup_u * sup_u;
            }
            bounds.push(b * l2);
        }
        distances.push(d);
        l2_sq.push(l2);
    }
    let ratios = distances
        .iter()
        .zip(&l2_sq)
        .map(|(&d, &l)| if l > T::zero() { d / (data_norm * l) } else { T::zero() })
        .collect();
    let (bounds, bound_ok) = if setup.is_some() {
        let ok = distances.iter().zip(&bounds).all(|(d, b)| *d <= *b * (T::one() + T::c(1e-9)));
        (Some(bounds), Some(ok))
    } else {
        (None, None)
    };
    Ok(ConvergenceReport {
        distances,
        l2_sq,
        data_norm,
        ratios,
        bounds,
        constants: setup.and_then(|s| s.1),
        nu: setup.map(|s| s.0),
        bound_ok,
    })
}

/// `sup_i` of the energy norm squared of the difference of two trajectories.
pub fn sup_distance<T: Real>(a: &Trajectory<T>, b: &Trajectory<T>) -> Result<T> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch { expected: a.len(), got: b.len() });
    }
    a.states()
        .iter()
        .zip(b.states())
        .map(|(x, y)| Ok(energy_norm_sq(&x.sub(y)?)))
        .try_fold(T::zero(), |m, v: Result<T>| Ok(m.max(v?)))
}
