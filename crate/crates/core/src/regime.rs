//! Classification of Hölder nonlinearities `omega_m(x) = M x^beta` against
//! data regularity `alpha` in the subcritical range.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::moduli::{find_nu_subcritical, Modulus, DEFAULT_LAMBDA_CAP};

const EQ_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classification {
    /// Local existence and global existence for small data.
    Covered,
    Uncovered,
    /// `4 alpha beta = 1 - 2 sigma`.
    Boundary,
}

/// Cell classification: `sigma = 1/2` is covered for every `alpha < 1/4`,
/// `beta < 1`; otherwise `4 alpha beta` is compared with `1 - 2 sigma`.
pub fn classify(sigma: f64, beta: f64, alpha: f64) -> Classification {
    let inside = alpha < 0.25 && beta < 1.0;
    let gap = 1.0 - 2.0 * sigma;
    if gap.abs() <= EQ_TOL {
        return if inside { Classification::Covered } else { Classification::Uncovered };
    }
    let lhs = 4.0 * alpha * beta;
    if (lhs - gap).abs() <= EQ_TOL {
        Classification::Boundary
    } else if lhs > gap && inside {
        Classification::Covered
    } else {
        Classification::Uncovered
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimeCell {
    pub beta: f64,
    pub alpha: f64,
    pub class: Classification,
    /// Whether a threshold `nu` exists for `omega(x) = x^{4 alpha beta}` with
    /// `delta = mu1 = 1`, when evidence was requested.
    pub evidence: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimeMapResult {
    pub sigma: f64,
    pub resolution: usize,
    /// Row-major over `alpha` (outer) and `beta` (inner).
    pub cells: Vec<RegimeCell>,
}

impl RegimeMapResult {
    pub fn count(&self, class: Classification) -> usize {
        self.cells.iter().filter(|c| c.class == class).count()
    }
}

/// Cell centres `beta = (i + 1/2)/res` in `(0, 1)` and
/// `alpha = (j + 1/2)/(4 res)` in `(0, 1/4)`.
pub fn regime_map(sigma: f64, resolution: usize, evidence: bool) -> Result<RegimeMapResult> {
    if !(sigma > 0.0 && sigma <= 0.5) {
        return Err(Error::Domain(format!("regime map needs sigma in (0, 1/2], got {sigma}")));
    }
    if resolution < 8 {
        return Err(Error::Invalid(format!("regime map resolution must be at least 8, got {resolution}")));
    }
    let r = resolution as f64;
    let cells = (0..resolution * resolution)
        .into_par_iter()
        .map(|idx| {
            let (j, i) = (idx / resolution, idx % resolution);
            let beta = (i as f64 + 0.5) / r;
            let alpha = (j as f64 + 0.5) / (4.0 * r);
            let class = classify(sigma, beta, alpha);
            let evidence = if evidence {
                let w = Modulus::power(1.0, 4.0 * alpha * beta)?;
                Some(find_nu_subcritical(1.0, 1.0, &w, sigma, DEFAULT_LAMBDA_CAP).is_ok())
            } else {
                None
            };
            Ok(RegimeCell { beta, alpha, class, evidence })
        })
        .collect::<Result<_>>()?;
    Ok(RegimeMapResult { sigma, resolution, cells })
}
