//! Spectral simulation and certification tools for the Kirchhoff equation
//! with fractional damping
//!
//! ```text
//! u'' + 2 delta A^sigma u' + m(|A^{1/2} u|^2) A u = 0
//! ```
//!
//! where `A` is diagonal on a finite mode grid. Every numerical type is
//! generic over a [`Real`] scalar; the `*64` aliases below fix it to `f64`.

pub mod error;
pub mod interp;
pub mod kirchhoff;
pub mod linear;
pub mod moduli;
pub mod regime;
pub mod scalar;
pub mod spectrum;

pub use error::{Error, Result};
pub use scalar::Real;

pub type ModeGrid64 = spectrum::ModeGrid<f64>;
pub type SpectralVector64 = spectrum::SpectralVector<f64>;
pub type StatePair64 = spectrum::StatePair<f64>;
pub type Modulus64 = moduli::Modulus<f64>;
pub type TimeCoefficient64 = linear::TimeCoefficient<f64>;
pub type Trajectory64 = linear::Trajectory<f64>;
pub type NonlinearitySpec64 = kirchhoff::NonlinearitySpec<f64>;
pub type KirchhoffProblem64 = kirchhoff::KirchhoffProblem<f64>;
pub type SolveReport64 = kirchhoff::SolveReport<f64>;

pub type ModeGrid32 = spectrum::ModeGrid<f32>;
pub type SpectralVector32 = spectrum::SpectralVector<f32>;
pub type StatePair32 = spectrum::StatePair<f32>;
pub type Modulus32 = moduli::Modulus<f32>;
