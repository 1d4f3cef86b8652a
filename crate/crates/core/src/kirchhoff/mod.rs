//! The nonlinear problem `u'' + 2 delta A^sigma u' + m(|A^{1/2} u|^2) A u = 0`.

mod bounds;
mod continuation;
mod nonlinearity;
mod problem;
mod solver;

pub use bounds::*;
pub use continuation::*;
pub use nonlinearity::*;
pub use problem::*;
pub use solver::*;
