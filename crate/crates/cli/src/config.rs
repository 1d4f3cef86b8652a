//! Run configuration read from a TOML file.

use kirchhoff_core::kirchhoff::NonlinearityConfig;
use kirchhoff_core::linear::CoefficientSpec;
use kirchhoff_core::moduli::ModulusSpec;
use kirchhoff_core::spectrum::{GridSpec, ModeGrid, StatePair};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: Option<String>,
    #[serde(default)]
    pub seed: u64,
    pub sigma: Option<f64>,
    pub delta: Option<f64>,
    #[serde(alias = "T")]
    pub t_end: Option<f64>,
    #[serde(alias = "h")]
    pub step: Option<f64>,
    pub grid: Option<GridSpec>,
    pub data: Option<DataSpec>,
    pub coefficient: Option<CoefficientSpec>,
    pub nonlinearity: Option<NonlinearityConfig>,
    pub alpha: Option<f64>,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub certify: CertifySection,
    #[serde(default)]
    pub converge: ConvergeSection,
    #[serde(default)]
    pub modulus_lab: ModulusLabSection,
    #[serde(default)]
    pub regime_map: RegimeMapSection,
    #[serde(default)]
    pub continuation: ContinuationSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    #[default]
    FixedPoint,
    Direct,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default)]
    pub method: Method,
    #[serde(default = "d_max_iter")]
    pub max_iter: usize,
    #[serde(default = "d_tol")]
    pub tol: f64,
    #[serde(default = "d_relaxation")]
    pub relaxation: f64,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self { method: Method::default(), max_iter: d_max_iter(), tol: d_tol(), relaxation: d_relaxation() }
    }
}

fn d_max_iter() -> usize {
    200
}
fn d_tol() -> f64 {
    1e-10
}
fn d_relaxation() -> f64 {
    0.5
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertifySection {
    /// Constant in the high-frequency bound `E(t) <= K E(0)`; estimated when absent.
    pub high_constant: Option<f64>,
    /// Frequencies of the uniformity sweep.
    pub sweep: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergeSection {
    /// Perturbation indices `n` in `c_n = c + amplitude sin(n t)/n`.
    #[serde(default = "d_ns")]
    pub ns: Vec<u32>,
    #[serde(default = "d_one")]
    pub amplitude: f64,
}

impl Default for ConvergeSection {
    fn default() -> Self {
        Self { ns: d_ns(), amplitude: d_one() }
    }
}

fn d_ns() -> Vec<u32> {
    vec![1, 2, 4, 8, 16, 32, 64]
}
fn d_one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModulusLabSection {
    pub modulus: Option<ModulusSpec>,
    /// Inner modulus for a composition check.
    pub inner: Option<ModulusSpec>,
    pub mu1: Option<f64>,
    pub lambda_cap: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegimeMapSection {
    #[serde(default = "d_resolution")]
    pub resolution: usize,
    #[serde(default)]
    pub evidence: bool,
}

impl Default for RegimeMapSection {
    fn default() -> Self {
        Self { resolution: d_resolution(), evidence: false }
    }
}

fn d_resolution() -> usize {
    64
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContinuationSection {
    pub chunk: Option<f64>,
    pub blowup_factor: Option<f64>,
    pub growth_chunks: Option<usize>,
    pub keep_every: Option<usize>,
    pub k2: Option<f64>,
}

/// Initial data: explicit mode coefficients or power profiles
/// `u_k = amp max(lambda_k, 1)^{-decay}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DataSpec {
    Modes {
        u0: Vec<f64>,
        u1: Vec<f64>,
    },
    Profile {
        #[serde(default)]
        u0_amp: f64,
        #[serde(default = "d_u0_decay")]
        u0_decay: f64,
        #[serde(default)]
        u1_amp: f64,
        #[serde(default = "d_one")]
        u1_decay: f64,
        /// Random signs and magnitudes in `[amp/2, amp]`, drawn from the run seed.
        #[serde(default)]
        random: bool,
        /// Modes with `lambda_k` below this value start at rest.
        from_lambda: Option<f64>,
    },
}

fn d_u0_decay() -> f64 {
    2.0
}

impl DataSpec {
    pub fn build(&self, grid: &ModeGrid<f64>, seed: u64) -> Result<StatePair<f64>, String> {
        match self {
            DataSpec::Modes { u0, u1 } => {
                for (name, v) in [("data.u0", u0), ("data.u1", u1)] {
                    if v.len() != grid.len() {
                        return Err(format!("{name} has {} entries but the grid has {} modes", v.len(), grid.len()));
                    }
                }
                StatePair::from_coeffs(grid, u0.clone(), u1.clone()).map_err(|e| format!("data: {e}"))
            }
            DataSpec::Profile { u0_amp, u0_decay, u1_amp, u1_decay, random, from_lambda } => {
                let cut = from_lambda.unwrap_or(f64::NEG_INFINITY);
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut draw = |amp: f64, decay: f64| -> Vec<f64> {
                    grid.lambdas()
                        .iter()
                        .map(|&l| {
                            let base = if l < cut { 0.0 } else { amp * l.max(1.0).powf(-decay) };
                            if *random {
                                let s = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                                s * rng.gen_range(0.5..=1.0) * base
                            } else {
                                base
                            }
                        })
                        .collect()
                };
                let u0 = draw(*u0_amp, *u0_decay);
                let u1 = draw(*u1_amp, *u1_decay);
                StatePair::from_coeffs(grid, u0, u1).map_err(|e| format!("data: {e}"))
            }
        }
    }
}

pub fn parse(text: &str) -> Result<RunConfig, String> {
    toml::from_str(text).map_err(|e| e.to_string())
}

/// Accessors that report the missing field by name.
impl RunConfig {
    fn need<T: Copy>(v: Option<T>, field: &str, scenario: &str) -> Result<T, String> {
        v.ok_or_else(|| format!("missing field `{field}` (required by {scenario})"))
    }

    pub fn sigma(&self, scenario: &str) -> Result<f64, String> {
        Self::need(self.sigma, "sigma", scenario)
    }

    pub fn delta(&self, scenario: &str) -> Result<f64, String> {
        Self::need(self.delta, "delta", scenario)
    }

    pub fn t_end(&self, scenario: &str) -> Result<f64, String> {
        let t = Self::need(self.t_end, "t_end", scenario)?;
        if !(t > 0.0 && t.is_finite()) {
            return Err(format!("field `t_end` must be positive, got {t}"));
        }
        Ok(t)
    }

    pub fn step(&self, scenario: &str) -> Result<f64, String> {
        let h = Self::need(self.step, "step", scenario)?;
        if !(h > 0.0 && h.is_finite()) {
            return Err(format!("field `step` must be positive, got {h}"));
        }
        Ok(h)
    }

    pub fn grid(&self, scenario: &str) -> Result<ModeGrid<f64>, String> {
        let spec = self.grid.as_ref().ok_or_else(|| format!("missing field `grid` (required by {scenario})"))?;
        let g = spec.build::<f64>().map_err(|e| format!("grid: {e}"))?;
        Ok(g)
    }

    pub fn data(&self, grid: &ModeGrid<f64>, scenario: &str) -> Result<StatePair<f64>, String> {
        let spec = self.data.as_ref().ok_or_else(|| format!("missing field `data` (required by {scenario})"))?;
        spec.build(grid, self.seed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profile_with_cutoff() {
        let g = ModeGrid::<f64>::dirichlet(4).unwrap();
        let d = DataSpec::Profile { u0_amp: 1.0, u0_decay: 2.0, u1_amp: 0.0, u1_decay: 1.0, random: false, from_lambda: Some(3.0) };
        let s = d.build(&g, 0).unwrap();
        assert_eq!(s.u0.coeffs(), &[0.0, 0.0, 1.0 / 9.0, 1.0 / 16.0]);
        assert!(s.u1.coeffs().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn mode_count_must_match() {
        let g = ModeGrid::<f64>::dirichlet(3).unwrap();
        let d = DataSpec::Modes { u0: vec![1.0], u1: vec![0.0; 3] };
        assert!(d.build(&g, 0).unwrap_err().contains("data.u0"));
    }

    #[test]
    fn aliases_parse() {
        let c = parse("T = 2.0\nh = 0.01\n[grid]\nkind = \"dirichlet\"\nK = 5\n").unwrap();
        assert_eq!((c.t_end, c.step), (Some(2.0), Some(0.01)));
        assert_eq!(c.grid("x").unwrap().len(), 5);
        assert!(c.sigma("simulate").unwrap_err().contains("`sigma`"));
    }
}
