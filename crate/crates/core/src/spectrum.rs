//! Diagonal spectral model: a finite set of eigenvalues `lambda_k^2` of a
//! nonnegative self-adjoint operator `A`, vectors of coefficients on that
//! basis and the fractional powers `A^alpha` acting componentwise.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Frequencies `lambda_k >= 0`; `A e_k = lambda_k^2 e_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeGrid<T> {
    lambdas: Arc<[T]>,
}

impl<T: Real> ModeGrid<T> {
    pub fn new(lambdas: Vec<T>) -> Result<Self> {
        if lambdas.is_empty() {
            return Err(Error::Invalid("mode grid must contain at least one mode".into()));
        }
        for (k, &l) in lambdas.iter().enumerate() {
            if !l.is_finite() {
                return Err(Error::NonFinite(format!("lambda[{k}]")));
            }
            if l < T::zero() {
                return Err(Error::Invalid(format!("lambda[{k}] = {l} is negative")));
            }
        }
        Ok(Self { lambdas: lambdas.into() })
    }

    /// `lambda_k = k` for `k = 1..=count`.
    pub fn dirichlet(count: usize) -> Result<Self> {
        Self::new((1..=count).map(T::from_count).collect())
    }

    /// A zero mode followed by `lambda_k = k`, `count` modes in total.
    pub fn with_zero(count: usize) -> Result<Self> {
        Self::new((0..count).map(T::from_count).collect())
    }

    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }

    pub fn lambdas(&self) -> &[T] {
        &self.lambdas
    }

    pub fn lambda(&self, k: usize) -> T {
        self.lambdas[k]
    }

    pub fn max_lambda(&self) -> T {
        self.lambdas.iter().copied().fold(T::zero(), T::max)
    }

    /// Eigenvalue of `A^alpha` on mode `k`.
    pub fn power(&self, k: usize, alpha: T) -> T {
        self.lambdas[k].pow_conv(T::two() * alpha)
    }

    pub fn zeros(&self) -> SpectralVector<T> {
        SpectralVector { grid: self.clone(), coeffs: vec![T::zero(); self.len()] }
    }

    pub fn vector(&self, coeffs: Vec<T>) -> Result<SpectralVector<T>> {
        SpectralVector::new(self.clone(), coeffs)
    }

    pub fn same_as(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.lambdas, &other.lambdas) || self.lambdas == other.lambdas
    }
}

/// Grid description as found in run configurations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GridSpec {
    Dirichlet {
        #[serde(alias = "K")]
        count: usize,
    },
    WithZero {
        #[serde(alias = "K")]
        count: usize,
    },
    Explicit { values: Vec<f64> },
}

impl GridSpec {
    pub fn build<T: Real>(&self) -> Result<ModeGrid<T>> {
        match self {
            GridSpec::Dirichlet { count } => ModeGrid::dirichlet(*count),
            GridSpec::WithZero { count } => ModeGrid::with_zero(*count),
            GridSpec::Explicit { values } => ModeGrid::new(values.iter().map(|&v| T::c(v)).collect()),
        }
    }
}

/// Coefficients of a vector in the eigenbasis of `A`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralVector<T> {
    grid: ModeGrid<T>,
    coeffs: Vec<T>,
}

impl<T: Real> SpectralVector<T> {
    pub fn new(grid: ModeGrid<T>, coeffs: Vec<T>) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(Error::LengthMismatch { expected: grid.len(), got: coeffs.len() });
        }
        if let Some(k) = coeffs.iter().position(|c| !c.is_finite()) {
            return Err(Error::NonFinite(format!("coefficient {k}")));
        }
        Ok(Self { grid, coeffs })
    }

    pub(crate) fn from_parts_unchecked(grid: ModeGrid<T>, coeffs: Vec<T>) -> Self {
        debug_assert_eq!(grid.len(), coeffs.len());
        Self { grid, coeffs }
    }

    pub fn grid(&self) -> &ModeGrid<T> {
        &self.grid
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<T> {
        self.coeffs
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// `|v|^2`.
    pub fn norm_sq(&self) -> T {
        self.coeffs.iter().map(|&c| c * c).sum()
    }

    /// `|A^alpha v|^2`.
    pub fn power_norm_sq(&self, alpha: T) -> T {
        self.coeffs
            .iter()
            .zip(self.grid.lambdas())
            .map(|(&c, &l)| {
                let p = l.pow_conv(T::two() * alpha);
                p * p * c * c
            })
            .sum()
    }

    pub fn dot(&self, other: &Self) -> Result<T> {
        self.check_same(other)?;
        Ok(self.coeffs.iter().zip(&other.coeffs).map(|(&a, &b)| a * b).sum())
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(&a, &b)| a - b).collect();
        Ok(Self { grid: self.grid.clone(), coeffs })
    }

    pub fn scale(&self, s: T) -> Self {
        Self { grid: self.grid.clone(), coeffs: self.coeffs.iter().map(|&c| c * s).collect() }
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if !self.grid.same_as(&other.grid) {
            return Err(Error::Invalid("vectors live on different mode grids".into()));
        }
        Ok(())
    }
}

/// Position/velocity pair `(u0, u1)` on a common grid.
#[derive(Debug, Clone, PartialEq)]
pub struct StatePair<T> {
    pub u0: SpectralVector<T>,
    pub u1: SpectralVector<T>,
}

impl<T: Real> StatePair<T> {
    pub fn new(u0: SpectralVector<T>, u1: SpectralVector<T>) -> Result<Self> {
        if !u0.grid.same_as(&u1.grid) {
            return Err(Error::Invalid("position and velocity on different grids".into()));
        }
        Ok(Self { u0, u1 })
    }

    pub fn from_coeffs(grid: &ModeGrid<T>, u0: Vec<T>, u1: Vec<T>) -> Result<Self> {
        Ok(Self { u0: grid.vector(u0)?, u1: grid.vector(u1)? })
    }

    pub fn zeros(grid: &ModeGrid<T>) -> Self {
        Self { u0: grid.zeros(), u1: grid.zeros() }
    }

    pub fn grid(&self) -> &ModeGrid<T> {
        &self.u0.grid
    }

    pub fn len(&self) -> usize {
        self.u0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u0.is_empty()
    }

    /// Energy of mode `k`: `u1_k^2 + lambda_k^2 u0_k^2`.
    pub fn mode_energy(&self, k: usize) -> T {
        let l = self.grid().lambda(k);
        let (p, v) = (self.u0.coeffs[k], self.u1.coeffs[k]);
        v * v + l * l * p * p
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        Ok(Self { u0: self.u0.sub(&other.u0)?, u1: self.u1.sub(&other.u1)? })
    }

    pub fn scale(&self, s: T) -> Self {
        Self { u0: self.u0.scale(s), u1: self.u1.scale(s) }
    }
}

/// `A^alpha v`: multiplies component `k` by `lambda_k^(2 alpha)` (`0^0 = 1`).
pub fn apply_power<T: Real>(v: &SpectralVector<T>, alpha: T) -> SpectralVector<T> {
    let coeffs = v
        .coeffs
        .iter()
        .zip(v.grid.lambdas())
        .map(|(&c, &l)| c * l.pow_conv(T::two() * alpha))
        .collect();
    SpectralVector { grid: v.grid.clone(), coeffs }
}

/// `|u1|^2 + |A^{1/2} u0|^2`.
pub fn energy_norm_sq<T: Real>(s: &StatePair<T>) -> T {
    (0..s.len()).map(|k| s.mode_energy(k)).sum()
}

/// `|A^alpha u1|^2 + |A^{alpha+1/2} u0|^2`.
pub fn graph_norm_sq<T: Real>(s: &StatePair<T>, alpha: T) -> T {
    let four_alpha = T::c(4.0) * alpha;
    (0..s.len())
        .map(|k| s.grid().lambda(k).pow_conv(four_alpha) * s.mode_energy(k))
        .sum()
}

/// Splits `v` into the components with `lambda_k < nu` and `lambda_k >= nu`.
pub fn split<T: Real>(v: &SpectralVector<T>, nu: T) -> (SpectralVector<T>, SpectralVector<T>) {
    let mut low = v.coeffs.clone();
    let mut high = v.coeffs.clone();
    for (k, &l) in v.grid.lambdas().iter().enumerate() {
        if l < nu {
            high[k] = T::zero();
        } else {
            low[k] = T::zero();
        }
    }
    (
        SpectralVector { grid: v.grid.clone(), coeffs: low },
        SpectralVector { grid: v.grid.clone(), coeffs: high },
    )
}

/// [`split`] applied to both components of a state.
pub fn split_state<T: Real>(s: &StatePair<T>, nu: T) -> (StatePair<T>, StatePair<T>) {
    let (l0, h0) = split(&s.u0, nu);
    let (l1, h1) = split(&s.u1, nu);
    (StatePair { u0: l0, u1: l1 }, StatePair { u0: h0, u1: h1 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn apply_power_three_quarters() {
        let g = ModeGrid::new(vec![4.0]).unwrap();
        let v = g.vector(vec![1.0]).unwrap();
        assert_relative_eq!(apply_power(&v, 0.75).coeffs()[0], 8.0, max_relative = 1e-14);
    }

    #[test]
    fn zero_mode_power_convention() {
        let g = ModeGrid::with_zero(3).unwrap();
        let v = g.vector(vec![2.0, 1.0, 1.0]).unwrap();
        assert_eq!(apply_power(&v, 0.0).coeffs(), &[2.0, 1.0, 1.0]);
        assert_eq!(apply_power(&v, 0.5).coeffs()[0], 0.0);
    }

    #[test]
    fn graph_norm_single_mode() {
        let g = ModeGrid::new(vec![2.0]).unwrap();
        let s = StatePair::from_coeffs(&g, vec![1.0], vec![0.0]).unwrap();
        assert_relative_eq!(graph_norm_sq(&s, 0.25), 8.0, max_relative = 1e-14);
    }

    #[test]
    fn split_threshold_goes_high() {
        let g = ModeGrid::dirichlet(4).unwrap();
        let v = g.vector(vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let (lo, hi) = split(&v, 2.0);
        assert_eq!(lo.coeffs(), &[1.0, 0.0, 0.0, 0.0]);
        assert_eq!(hi.coeffs(), &[0.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(ModeGrid::<f64>::new(vec![1.0, -1.0]).is_err());
        assert!(ModeGrid::<f64>::new(vec![]).is_err());
        let g = ModeGrid::<f64>::dirichlet(2).unwrap();
        assert!(matches!(g.vector(vec![1.0]), Err(Error::LengthMismatch { .. })));
        assert!(g.vector(vec![1.0, f64::NAN]).is_err());
    }

    #[test]
    fn works_in_single_precision() {
        let g = ModeGrid::<f32>::dirichlet(3).unwrap();
        let s = StatePair::from_coeffs(&g, vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]).unwrap();
        assert!((energy_norm_sq(&s) - 2.0f32).abs() < 1e-6);
    }

    #[test]
    fn grid_spec_parses() {
        let g: GridSpec = serde_json::from_str(r#"{"kind":"with-zero","K":5}"#).unwrap();
        assert_eq!(g.build::<f64>().unwrap().lambdas(), &[0.0, 1.0, 2.0, 3.0, 4.0]);
    }
}
