use std::collections::BTreeMap;
use std::fmt;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::moduli::Modulus;
use crate::scalar::Real;

type Fun<T> = Arc<dyn Fn(T) -> T + Send + Sync>;

/// Nonlinearity `m: [0, inf) -> [0, inf)` with its declared modulus of
/// continuity, an optional lower bound `mu1`, and the primitive
/// `M(x) = int_0^x m`.
#[derive(Clone)]
pub struct NonlinearitySpec<T> {
    name: String,
    m: Fun<T>,
    primitive: Primitive<T>,
    omega: Modulus<T>,
    mu1: Option<T>,
}

#[derive(Clone)]
enum Primitive<T> {
    Exact(Fun<T>),
    /// Adaptive Simpson from the nearest cached node below `x`.
    Quadrature(Arc<Mutex<BTreeMap<u64, T>>>),
}

impl<T> fmt::Debug for NonlinearitySpec<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NonlinearitySpec").field("name", &self.name).field("omega", &self.omega).finish()
    }
}

impl<T: Real> NonlinearitySpec<T> {
    /// Black-box `m`; the primitive is computed by quadrature.
    pub fn custom<F>(name: impl Into<String>, m: F, omega: Modulus<T>, mu1: Option<T>) -> Result<Self>
    where
        F: Fn(T) -> T + Send + Sync + 'static,
    {
        let spec = Self {
            name: name.into(),
            m: Arc::new(m),
            primitive: Primitive::Quadrature(Arc::new(Mutex::new(BTreeMap::new()))),
            omega,
            mu1: None,
        };
        spec.with_mu1(mu1)
    }

    fn exact(name: String, m: Fun<T>, primitive: Fun<T>, omega: Modulus<T>, mu1: Option<T>) -> Result<Self> {
        Self { name, m, primitive: Primitive::Exact(primitive), omega, mu1: None }.with_mu1(mu1)
    }

    /// `m(x) = value`.
    pub fn constant(value: T, mu1: Option<T>) -> Result<Self> {
        if !(value >= T::zero()) {
            return Err(Error::Invalid("constant nonlinearity must be nonnegative".into()));
        }
        // any modulus works for a constant; a tiny Lipschitz one keeps
        // every derived threshold inactive
        let omega = Modulus::holder(T::c(1e-12), T::one())?;
        Self::exact(format!("constant({value})"), Arc::new(move |_| value), Arc::new(move |x| value * x), omega, mu1)
    }

    /// `m(x) = a + b x`, `a, b >= 0`.
    pub fn affine(a: T, b: T, mu1: Option<T>) -> Result<Self> {
        if !(a >= T::zero() && b >= T::zero()) {
            return Err(Error::Invalid("affine nonlinearity needs a, b >= 0".into()));
        }
        if b == T::zero() {
            return Self::constant(a, mu1);
        }
        let omega = Modulus::holder(b, T::one())?;
        Self::exact(
            format!("affine({a}, {b})"),
            Arc::new(move |x| a + b * x),
            Arc::new(move |x| a * x + T::half() * b * x * x),
            omega,
            mu1,
        )
    }

    /// `m(x) = base + M x^beta`, `beta` in `(0, 1]`, with modulus `M x^beta`.
    pub fn holder(base: T, m_const: T, beta: T, mu1: Option<T>) -> Result<Self> {
        if !(base >= T::zero() && m_const > T::zero()) {
            return Err(Error::Invalid("Hölder nonlinearity needs base >= 0 and M > 0".into()));
        }
        let omega = Modulus::holder(m_const, beta)?;
        Self::exact(
            format!("holder({base}, {m_const}, {beta})"),
            Arc::new(move |x: T| base + m_const * x.powf(beta)),
            Arc::new(move |x: T| base * x + m_const * x.powf(beta + T::one()) / (beta + T::one())),
            omega,
            mu1,
        )
    }

    /// `m(x) = a + b x^p`, `p > 0`. For `p <= 1` the modulus is `b x^p`;
    /// for `p > 1` it is the Lipschitz bound `b p R^{p-1} x` valid on `[0, R]`.
    pub fn power(a: T, b: T, p: T, range: T, mu1: Option<T>) -> Result<Self> {
        if !(a >= T::zero() && b >= T::zero() && p > T::zero()) {
            return Err(Error::Invalid("power nonlinearity needs a, b >= 0 and p > 0".into()));
        }
        if b == T::zero() {
            return Self::constant(a, mu1);
        }
        if p <= T::one() {
            let mut s = Self::holder(a, b, p, mu1)?;
            s.name = format!("power({a}, {b}, {p})");
            return Ok(s);
        }
        let lip = b * p * range.powf(p - T::one());
        Self::exact(
            format!("power({a}, {b}, {p})"),
            Arc::new(move |x: T| a + b * x.powf(p)),
            Arc::new(move |x: T| a * x + b * x.powf(p + T::one()) / (p + T::one())),
            Modulus::holder(lip, T::one())?,
            mu1,
        )
    }

    /// Sets `mu1`, checking `m >= mu1` on a sample of `[0, 100]`.
    pub fn with_mu1(mut self, mu1: Option<T>) -> Result<Self> {
        if let Some(lo) = mu1 {
            if !(lo > T::zero()) {
                return Err(Error::Invalid(format!("mu1 must be positive, got {lo}")));
            }
            for i in 0..=1000 {
                let x = T::c(0.1) * T::from_count(i);
                if self.eval(x) < lo {
                    return Err(Error::Invalid(format!("m({x}) = {} is below mu1 = {lo}", self.eval(x))));
                }
            }
        }
        self.mu1 = mu1;
        Ok(self)
    }

    /// `m_*(x) = m(min(x, m0))`, with the same modulus and lower bound.
    pub fn truncated(&self, m0: T) -> Self {
        let inner = self.clone();
        let prim = self.clone();
        let (cap_m, cap_p) = (self.eval(m0), self.primitive(m0));
        Self {
            name: format!("{} truncated at {m0}", self.name),
            m: Arc::new(move |x: T| inner.eval(x.min(m0))),
            primitive: Primitive::Exact(Arc::new(move |x: T| {
                if x <= m0 {
                    prim.primitive(x)
                } else {
                    cap_p + cap_m * (x - m0)
                }
            })),
            omega: self.omega.clone(),
            mu1: self.mu1,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    #[inline]
    pub fn eval(&self, x: T) -> T {
        (self.m)(x.max(T::zero()))
    }

    pub fn modulus(&self) -> &Modulus<T> {
        &self.omega
    }

    pub fn mu1(&self) -> Option<T> {
        self.mu1
    }

    /// `M(x) = int_0^x m`.
    pub fn primitive(&self, x: T) -> T {
        let x = x.max(T::zero());
        match &self.primitive {
            Primitive::Exact(f) => f(x),
            Primitive::Quadrature(cache) => {
                let key = x.as_f64().to_bits();
                let mut cache = cache.lock().expect("primitive cache poisoned");
                if let Some(&v) = cache.get(&key) {
                    return v;
                }
                let (x0, v0) = cache
                    .range(..key)
                    .next_back()
                    .map(|(&k, &v)| (T::c(f64::from_bits(k)), v))
                    .unwrap_or((T::zero(), T::zero()));
                let v = v0 + adaptive_simpson(&*self.m, x0, x, T::c(1e-13) * (T::one() + v0.abs()));
                cache.insert(key, v);
                v
            }
        }
    }

    /// Mean of `m` over `[a, b]` by 5-point Gauss-Legendre (`m(a)` if `a = b`).
    pub fn mean(&self, a: T, b: T) -> T {
        if a == b {
            return self.eval(a);
        }
        const X: [f64; 5] = [0.0, 0.538_469_310_105_683_1, -0.538_469_310_105_683_1, 0.906_179_845_938_664, -0.906_179_845_938_664];
        const W: [f64; 5] = [
            0.568_888_888_888_888_9,
            0.478_628_670_499_366_47,
            0.478_628_670_499_366_47,
            0.236_926_885_056_189_08,
            0.236_926_885_056_189_08,
        ];
        let (mid, half) = (T::half() * (a + b), T::half() * (b - a));
        let s: T = X.iter().zip(W.iter()).map(|(&x, &w)| T::c(w) * self.eval(mid + half * T::c(x))).sum();
        T::half() * s
    }
}

fn adaptive_simpson<T: Real>(f: &(dyn Fn(T) -> T + Send + Sync), a: T, b: T, tol: T) -> T {
    fn rec<T: Real>(f: &(dyn Fn(T) -> T + Send + Sync), a: T, b: T, fa: T, fm: T, fb: T, whole: T, tol: T, depth: u32) -> T {
        let m = T::half() * (a + b);
        let (lm, rm) = (T::half() * (a + m), T::half() * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let six = T::c(6.0);
        let left = (m - a) / six * (fa + T::c(4.0) * flm + fm);
        let right = (b - m) / six * (fm + T::c(4.0) * frm + fb);
        let diff = left + right - whole;
        if depth == 0 || diff.abs() <= T::c(15.0) * tol {
            return left + right + diff / T::c(15.0);
        }
        rec(f, a, m, fa, flm, fm, left, T::half() * tol, depth - 1) + rec(f, m, b, fm, frm, fb, right, T::half() * tol, depth - 1)
    }
    if b <= a {
        return T::zero();
    }
    let m = T::half() * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = (b - a) / T::c(6.0) * (fa + T::c(4.0) * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 40)
}

/// Nonlinearity description as found in run configurations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum NonlinearityConfig {
    Constant {
        value: f64,
        mu1: Option<f64>,
    },
    Affine {
        a: f64,
        b: f64,
        mu1: Option<f64>,
    },
    Power {
        a: f64,
        b: f64,
        p: f64,
        #[serde(default = "default_range")]
        range: f64,
        mu1: Option<f64>,
    },
    Holder {
        #[serde(alias = "M")]
        m: f64,
        beta: f64,
        #[serde(default)]
        base: f64,
        mu1: Option<f64>,
    },
}

fn default_range() -> f64 {
    10.0
}

impl NonlinearityConfig {
    pub fn build<T: Real>(&self) -> Result<NonlinearitySpec<T>> {
        let opt = |v: &Option<f64>| v.map(T::c);
        match self {
            Self::Constant { value, mu1 } => NonlinearitySpec::constant(T::c(*value), opt(mu1)),
            Self::Affine { a, b, mu1 } => NonlinearitySpec::affine(T::c(*a), T::c(*b), opt(mu1)),
            Self::Power { a, b, p, range, mu1 } => {
                NonlinearitySpec::power(T::c(*a), T::c(*b), T::c(*p), T::c(*range), opt(mu1))
            }
            Self::Holder { m, beta, base, mu1 } => NonlinearitySpec::holder(T::c(*base), T::c(*m), T::c(*beta), opt(mu1)),
        }
    }
}
