//! One step of `w'' + 2 b w' + q w = f` with `b, q, f` frozen.
//!
//! `Phi(h) = e^{-bh} [C I + S (M + bI)]`, `M = [[0, 1], [-q, -2b]]`, using
//! `(M + bI)^2 = (b^2 - q) I`. `C`, `S` are `cosh`/`sinh`-type functions of
//! `sqrt(b^2 - q) h`, evaluated by series near critical damping, with
//! trigonometric functions when underdamped and through the two real roots
//! when overdamped. The response to a unit constant force is
//! `(int_0^h Phi_12, Phi_12)`.

use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepPropagator<T> {
    pub p11: T,
    pub p12: T,
    pub p21: T,
    pub p22: T,
    /// `int_0^h Phi_12(s) ds`.
    pub g: T,
}

impl<T: Real> StepPropagator<T> {
    pub fn new(b: T, q: T, h: T) -> Self {
        let bh = b * h;
        let z = (b * b - q) * h * h;
        let (p11, p12, p22) = if z.abs() <= T::one() {
            let (c, s) = cosh_sinhc_series(z);
            let e = (-bh).exp();
            (e * (c + bh * s), e * h * s, e * (c - bh * s))
        } else if z < T::zero() {
            let om = (q - b * b).sqrt();
            let (sn, cs) = (om * h).sin_cos();
            let e = (-bh).exp();
            let s = sn / om;
            (e * (cs + b * s), e * s, e * (cs - b * s))
        } else {
            let (r1, r2, kappa) = real_roots(b, q);
            let (e1, e2) = ((r1 * h).exp(), (r2 * h).exp());
            let two_k = T::two() * kappa;
            let p12 = -e1 * (-two_k * h).exp_m1() / two_k;
            ((-r2 * e1 + r1 * e2) / two_k, p12, (r1 * e1 - r2 * e2) / two_k)
        };
        let p21 = -q * p12;
        let g = if q * h * h >= T::c(1e-2) {
            (T::one() - p11) / q
        } else if z > T::one() {
            let (r1, r2, kappa) = real_roots(b, q);
            h * (exprel(r1 * h) - exprel(r2 * h)) / (T::two() * kappa)
        } else {
            forced_taylor(b, q, h)
        };
        Self { p11, p12, p21, p22, g }
    }

    /// Advances `(w, w')` by one step under constant forcing `f`.
    #[inline]
    pub fn apply(&self, w: T, dw: T, f: T) -> (T, T) {
        (
            self.p11 * w + self.p12 * dw + f * self.g,
            self.p21 * w + self.p22 * dw + f * self.p12,
        )
    }
}

/// Roots `r1 = -q/(b+kappa)`, `r2 = -b-kappa` of `r^2 + 2br + q`, `kappa = sqrt(b^2-q) > 0`.
fn real_roots<T: Real>(b: T, q: T) -> (T, T, T) {
    let kappa = (b * b - q).sqrt();
    (-q / (b + kappa), -b - kappa, kappa)
}

/// `(e^x - 1) / x`.
fn exprel<T: Real>(x: T) -> T {
    if x.abs() < T::c(1e-8) {
        T::one() + x * T::half()
    } else {
        x.exp_m1() / x
    }
}

/// `C(z) = sum z^n/(2n)!`, `S(z) = sum z^n/(2n+1)!` for `|z| <= 1`.
fn cosh_sinhc_series<T: Real>(z: T) -> (T, T) {
    let (mut c, mut s) = (T::one(), T::one());
    let (mut tc, mut ts) = (T::one(), T::one());
    for n in 1..20usize {
        let two_n = T::from_count(2 * n);
        tc = tc * z / ((two_n - T::one()) * two_n);
        ts = ts * z / (two_n * (two_n + T::one()));
        c += tc;
        s += ts;
        if tc.abs() <= T::epsilon() * c.abs() && ts.abs() <= T::epsilon() * s.abs() {
            break;
        }
    }
    (c, s)
}

/// `int_0^h Phi_12` from the exponential of the scaled augmented system
/// `[[0, 1, 0], [-q h^2, -2 b h, h^2], [0, 0, 0]]`, valid when `b h` and
/// `q h^2` are both small.
fn forced_taylor<T: Real>(b: T, q: T, h: T) -> T {
    let a = -q * h * h;
    let d = -T::two() * b * h;
    // term_k = N^k / k! applied to e3; only the first two rows matter.
    let (mut x, mut y) = (T::zero(), h * h);
    let mut sum_x = T::zero();
    for k in 1..40usize {
        // first term is N e3 = (0, h^2)
        if k > 1 {
            let kf = T::from_count(k);
            let nx = y / kf;
            let ny = (a * x + d * y) / kf;
            x = nx;
            y = ny;
        }
        sum_x += x;
        if k > 2 && x.abs() <= T::epsilon() * sum_x.abs() && y.abs() <= T::epsilon() * h * h {
            break;
        }
    }
    sum_x
}
