//! Interpolation seminorms `|| (u0, u1) ||_{V_omega}` and the customized
//! modulus `omega_d` built from a single pair of regular data.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linear::Trajectory;
use crate::moduli::{default_grid, modulus_constant_estimate, verify_modulus, Modulus, ModulusCheck};
use crate::scalar::Real;
use crate::spectrum::{energy_norm_sq, StatePair};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InterpSeminormResult<T> {
    pub value: T,
    /// Contribution of each mode; zero for `lambda_k = 0`.
    pub per_mode: Vec<T>,
    pub zero_modes_skipped: usize,
}

/// `sum_{lambda_k > 0} (u1_k^2 + lambda_k^2 u0_k^2) / omega(1/lambda_k)`.
pub fn v_omega_seminorm_sq<T: Real>(s: &StatePair<T>, w: &Modulus<T>) -> InterpSeminormResult<T> {
    let mut skipped = 0;
    let per_mode: Vec<T> = (0..s.len())
        .map(|k| {
            let l = s.grid().lambda(k);
            if l > T::zero() {
                s.mode_energy(k) / w.eval(l.recip())
            } else {
                skipped += 1;
                T::zero()
            }
        })
        .collect();
    InterpSeminormResult { value: per_mode.iter().copied().sum(), per_mode, zero_modes_skipped: skipped }
}

/// Value of the seminorm only.
pub fn seminorm_sq<T: Real>(s: &StatePair<T>, w: &Modulus<T>) -> T {
    (0..s.len())
        .filter(|&k| s.grid().lambda(k) > T::zero())
        .map(|k| s.mode_energy(k) / w.eval(s.grid().lambda(k).recip()))
        .sum()
}

/// Piecewise-affine weight `phi` through `(n_h, phi_h)`, extended linearly
/// past the last node. With no energy it is `max(1, y)`.
#[derive(Debug, Clone, PartialEq)]
struct Phi<T> {
    nodes: Vec<T>,
    values: Vec<T>,
}

impl<T: Real> Phi<T> {
    fn eval(&self, y: T) -> T {
        let n = self.nodes.len();
        let (last_n, last_v) = (self.nodes[n - 1], self.values[n - 1]);
        if y >= last_n {
            return last_v * y / last_n;
        }
        let i = self.nodes.partition_point(|&v| v <= y);
        if i == 0 {
            return self.values[0];
        }
        let (n0, n1, v0, v1) = (self.nodes[i - 1], self.nodes[i], self.values[i - 1], self.values[i]);
        v0 + (v1 - v0) * (y - n0) / (n1 - n0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CustomModulusChecks {
    pub omega_at_one: bool,
    pub dominated: bool,
    pub ratio_vanishes: bool,
    pub seminorm_bounded: bool,
}

impl CustomModulusChecks {
    pub fn all(&self) -> bool {
        self.omega_at_one && self.dominated && self.ratio_vanishes && self.seminorm_bounded
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CustomModulusCertificate<T> {
    pub alpha: T,
    /// `|A^alpha u1|^2 + |A^{alpha+1/2} u0|^2`.
    pub energy: T,
    pub n: Vec<u64>,
    pub phi: Vec<T>,
    pub zero_energy_fallback: bool,
    pub seminorm_sq: T,
    /// `omega_d(x) / x^{4 alpha}` at the smallest grid point.
    pub tail_ratio: T,
    pub checks: CustomModulusChecks,
    pub laws: ModulusCheck<T>,
    #[serde(skip)]
    pub modulus: Modulus<T>,
}

/// Builds `omega_d(x) = x^{4 alpha} / phi(1/x)^{1 - 4 alpha}` for `(u0, u1)`
/// with finite `alpha`-graph norm, `0 <= alpha < 1/4`, and checks it.
///
/// `n_h` is the smallest integer above `n_{h-1}` whose spectral tail
/// `sum_{lambda_k >= n_h} E_k` is at most `E / 4^h`; `phi_0 = phi_1 = 1`,
/// `phi_{h+1} = min{2^h, (n_{h+1}/n_h) phi_h}`. Iteration stops once the tail
/// is empty; from there on `n_h` grows by one per step and `phi` is linear.
pub fn customized_modulus<T: Real>(s: &StatePair<T>, alpha: T) -> Result<CustomModulusCertificate<T>> {
    if !(alpha >= T::zero() && alpha < T::c(0.25)) {
        return Err(Error::Domain(format!("customized modulus needs 0 <= alpha < 1/4, got {alpha}")));
    }
    let four_alpha = T::c(4.0) * alpha;
    let mut modes: Vec<(T, T)> = (0..s.len())
        .map(|k| {
            let l = s.grid().lambda(k);
            (l, l.pow_conv(four_alpha) * s.mode_energy(k))
        })
        .filter(|&(_, e)| e > T::zero())
        .collect();
    let energy: T = modes.iter().map(|m| m.1).sum();
    if !energy.is_finite() {
        return Err(Error::NonFinite("graph norm".into()));
    }
    let (phi, n_seq, phi_seq, fallback) = if energy == T::zero() {
        let phi = Phi { nodes: vec![T::zero(), T::one()], values: vec![T::one(), T::one()] };
        (phi, vec![0, 1], vec![T::one(), T::one()], true)
    } else {
        modes.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite"));
        let (n_seq, phi_seq) = phi_sequence(&modes, energy);
        let phi = Phi { nodes: n_seq.iter().map(|&n| T::c(n as f64)).collect(), values: phi_seq.clone() };
        (phi, n_seq, phi_seq, false)
    };
    let exponent = T::one() - four_alpha;
    let phi = Arc::new(phi);
    let pf = phi.clone();
    let modulus = Modulus::custom("customized", move |x: T| x.pow_conv(four_alpha) / pf.eval(x.recip()).powf(exponent));

    let grid = default_grid::<T>();
    let one = modulus.eval(T::one());
    let omega_at_one = (one - T::one()).abs() <= T::c(1e-14);
    let ratios: Vec<T> = grid.iter().map(|&x| modulus.eval(x) / x.pow_conv(four_alpha)).collect();
    let dominated = ratios.iter().all(|&r| r <= T::one());
    let monotone = ratios.windows(2).all(|w| w[0] <= w[1] * (T::one() + T::c(1e-12)));
    let last = phi.nodes.len() - 1;
    let unbounded = phi.values[last] / phi.nodes[last] > T::zero();
    let ratio_vanishes = monotone && unbounded;
    let seminorm = seminorm_sq(s, &modulus);
    let seminorm_bounded = seminorm <= T::two() * energy * (T::one() + T::c(1e-12));
    let laws = verify_modulus(&modulus, &grid);
    Ok(CustomModulusCertificate {
        alpha,
        energy,
        n: n_seq,
        phi: phi_seq,
        zero_energy_fallback: fallback,
        seminorm_sq: seminorm,
        tail_ratio: ratios[0],
        checks: CustomModulusChecks { omega_at_one, dominated, ratio_vanishes, seminorm_bounded },
        laws,
        modulus,
    })
}

/// Greedy `(n_h, phi_h)` for modes sorted by frequency with positive weights.
fn phi_sequence<T: Real>(modes: &[(T, T)], energy: T) -> (Vec<u64>, Vec<T>) {
    // suffix[i] = sum of weights of modes[i..]
    let mut suffix = vec![T::zero(); modes.len() + 1];
    for i in (0..modes.len()).rev() {
        suffix[i] = suffix[i + 1] + modes[i].1;
    }
    // tail(n) = sum over lambda_k >= n
    let tail = |n: u64| {
        let nf = T::c(n as f64);
        suffix[modes.partition_point(|m| m.0 < nf)]
    };
    // integer points where the tail drops: floor(lambda_k) + 1
    let mut drops: Vec<u64> = modes.iter().map(|m| m.0.floor().as_f64() as u64 + 1).collect();
    drops.dedup();

    let mut n = vec![0u64];
    let mut phi = vec![T::one()];
    let mut target = energy;
    let mut h = 0usize;
    while tail(n[h]) > T::zero() {
        target /= T::c(4.0);
        let prev = n[h];
        let next = if tail(prev + 1) <= target {
            prev + 1
        } else {
            let start = drops.partition_point(|&d| d <= prev + 1);
            drops[start..]
                .iter()
                .copied()
                .find(|&d| tail(d) <= target)
                .expect("tail vanishes past the largest frequency")
        };
        let value = if h == 0 {
            T::one()
        } else {
            let cap = T::c(2f64.powi(h as i32));
            cap.min(T::c(next as f64) / T::c(prev as f64) * phi[h])
        };
        n.push(next);
        phi.push(value);
        h += 1;
    }
    (n, phi)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegularityReport<T> {
    pub nu: T,
    pub constant: T,
    /// `max_t ||u(t)||^2_{V} / (K e^{nu (1 + mu2) t} ||u(0)||^2_{V})`.
    pub worst_full_ratio: T,
    /// `max_t ||u^+(t)||^2_{V} / (K ||u^+(0)||^2_{V})`.
    pub worst_high_ratio: T,
    /// `max_t ||u^-(t)||^2_{V} omega(1/nu) / (|u^-'|^2 + |A^{1/2} u^-|^2)`.
    pub worst_low_ratio: T,
    pub pass: bool,
}

/// Checks the regularity propagation bounds along a linear trajectory.
pub fn verify_regularity_propagation<T: Real>(
    traj: &Trajectory<T>,
    w: &Modulus<T>,
    nu: T,
    constant: T,
    mu2: T,
) -> Result<RegularityReport<T>> {
    let grid = traj.grid();
    let w_nu = w.eval(nu.recip());
    let (mut full, mut high, mut low) = (T::zero(), T::zero(), T::zero());
    let split_sums = |s: &StatePair<T>| {
        let (mut lo_v, mut lo_e, mut hi_v) = (T::zero(), T::zero(), T::zero());
        for k in 0..s.len() {
            let l = grid.lambda(k);
            if l <= T::zero() {
                continue;
            }
            let e = s.mode_energy(k);
            let v = e / w.eval(l.recip());
            if l < nu {
                lo_v += v;
                lo_e += e;
            } else {
                hi_v += v;
            }
        }
        (lo_v, lo_e, hi_v)
    };
    let s0 = traj.state(0);
    let (l0, _, h0) = split_sums(s0);
    let v0 = l0 + h0;
    let ratio = |a: T, b: T| if a == T::zero() { T::zero() } else { a / b };
    for i in 0..traj.len() {
        let t = traj.times()[i];
        let (lv, le, hv) = split_sums(traj.state(i));
        let growth = (nu * (T::one() + mu2) * t).exp();
        full = full.max(ratio(lv + hv, constant * growth * v0));
        high = high.max(ratio(hv, constant * h0));
        low = low.max(ratio(lv * w_nu, le));
    }
    let slack = T::one() + T::c(1e-9);
    let pass = full <= slack && high <= slack && low <= slack;
    Ok(RegularityReport { nu, constant, worst_full_ratio: full, worst_high_ratio: high, worst_low_ratio: low, pass })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeModulusReport<T> {
    pub bound_l: T,
    pub max_seminorm_sq: T,
    /// `max |g(a) - g(b)| / omega(|a-b|)`, `g = |A^{1/2} u|^2`.
    pub constant: T,
    pub pass: bool,
}

/// Measures the time modulus of `|A^{1/2} u(t)|^2` against `3 L omega`.
/// Fails if the seminorm exceeds `L` anywhere along the trajectory.
pub fn verify_time_modulus<T: Real>(traj: &Trajectory<T>, w: &Modulus<T>, bound_l: T) -> Result<TimeModulusReport<T>> {
    let mut max_sn = T::zero();
    let mut g = Vec::with_capacity(traj.len());
    for i in 0..traj.len() {
        let s = traj.state(i);
        let sn = seminorm_sq(s, w);
        if sn > bound_l * (T::one() + T::c(1e-12)) {
            return Err(Error::Precondition(format!(
                "seminorm {} exceeds L = {} at t = {}",
                sn.as_f64(),
                bound_l.as_f64(),
                traj.times()[i].as_f64()
            )));
        }
        max_sn = max_sn.max(sn);
        g.push(s.u0.power_norm_sq(T::half()));
    }
    let constant = modulus_constant_estimate(traj.times(), &g, w)?;
    Ok(TimeModulusReport { bound_l, max_seminorm_sq: max_sn, constant, pass: constant <= T::c(3.0) * bound_l })
}

/// Energy of the state, re-exported for convenience in checks.
pub fn energy<T: Real>(s: &StatePair<T>) -> T {
    energy_norm_sq(s)
}
