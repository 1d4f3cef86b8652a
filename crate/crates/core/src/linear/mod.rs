//! Linear problem `u'' + 2 delta A^sigma u' + c(t) A u = 0`: coefficients,
//! an exact-per-step mode propagator, and energy certificates.

mod certify;
mod coefficient;
mod convergence;
pub mod expr;
mod propagator;
mod solve;

pub use certify::*;
pub use coefficient::*;
pub use convergence::*;
pub use propagator::StepPropagator;
pub use solve::*;
