//! TOML run configuration. Every section and key is optional; omitted values
//! fall back to the defaults below, which reproduce the acceptance settings.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::{BMethod, ForceSpec};
use crate::solver::{GFunction, InitSpec, SolverConfig};
use crate::spectral::SpectralField;
use crate::wiener::BrownianPath;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub physics: Physics,
    pub discretization: Discretization,
    pub force: ForceSpec,
    pub init: InitConfig,
    pub path: PathConfig,
    pub seeds: SeedSpec,
    pub malliavin: MalliavinConfig,
    pub checks: ChecksConfig,
    pub thresholds: Thresholds,
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            physics: Physics::default(),
            discretization: Discretization::default(),
            force: ForceSpec::saturated(0.5),
            init: InitConfig::default(),
            path: PathConfig::default(),
            seeds: SeedSpec::default(),
            malliavin: MalliavinConfig::default(),
            checks: ChecksConfig::default(),
            thresholds: Thresholds::default(),
            output: OutputConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Physics {
    pub alpha: f64,
    pub nu: f64,
    pub sigma: f64,
    pub horizon: f64,
    /// Truncation level `N`; `inf` disables truncation.
    pub level: f64,
    /// `false` drops the `B̂` term.
    pub nonlinear: bool,
}

impl Default for Physics {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            nu: 0.5,
            sigma: 0.5,
            horizon: 1.0,
            level: 3.0,
            nonlinear: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Discretization {
    pub cutoff: usize,
    /// Step count for single-level runs. Ignored when `dt` is set.
    pub steps: usize,
    /// Time step; must divide the horizon within 1e-12.
    pub dt: Option<f64>,
    /// Step counts of a refinement study, coarse to fine.
    pub levels: Vec<usize>,
    /// Cutoffs of a Galerkin study.
    pub cutoffs: Vec<usize>,
    pub r_stride: usize,
    pub method: BMethod,
    pub grid: Option<usize>,
}

impl Default for Discretization {
    fn default() -> Self {
        Self {
            cutoff: 8,
            steps: 100,
            dt: None,
            levels: vec![32, 64, 128, 256],
            cutoffs: vec![4, 8, 16],
            r_stride: 8,
            method: BMethod::Transform,
            grid: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InitKind {
    #[default]
    Deterministic,
    EndpointFunctional,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    /// Gaussian coefficients scaled by `(1+|k|²)^{-decay}`.
    #[default]
    Random,
    /// Modulus `amplitude·e^{-rate|k|}`, random phases.
    Analytic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitConfig {
    pub kind: InitKind,
    pub g: GFunction,
    pub field: FieldKind,
    pub decay: f64,
    pub amplitude: f64,
    pub rate: f64,
    /// Cutoff the base fields are generated on; the solver projects.
    pub field_cutoff: Option<usize>,
    pub f0_seed: u64,
    pub f1_seed: u64,
    pub f1_scale: f64,
    /// Number of distinct initial fields for the a-priori bound sweep.
    pub count: usize,
}

impl Default for InitConfig {
    fn default() -> Self {
        Self {
            kind: InitKind::Deterministic,
            g: GFunction::Sin,
            field: FieldKind::Random,
            decay: 2.5,
            amplitude: 1.0,
            rate: 1.2,
            field_cutoff: None,
            f0_seed: 1,
            f1_seed: 2,
            f1_scale: 1.0,
            count: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PathChoice {
    #[default]
    Sampled,
    /// `W(t) = sin t`
    Sine,
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct PathConfig {
    pub kind: PathChoice,
}

/// Either an explicit list or `{ start, count }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SeedSpec {
    List(Vec<u64>),
    Range { start: u64, count: u64 },
}

impl Default for SeedSpec {
    fn default() -> Self {
        SeedSpec::Range { start: 0, count: 100 }
    }
}

impl SeedSpec {
    pub fn seeds(&self) -> Vec<u64> {
        match self {
            SeedSpec::List(v) => v.clone(),
            SeedSpec::Range { start, count } => (*start..start + count).collect(),
        }
    }

    /// Parses `a..b`, `a..=b`, a bare count `n` (meaning `0..n`) or `a,b,c`.
    pub fn parse(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("cannot parse seeds `{s}`"));
        let num = |x: &str| x.trim().parse::<u64>().map_err(|_| bad());
        if let Some((a, b)) = s.split_once("..=") {
            let (a, b) = (num(a)?, num(b)?);
            return if b >= a {
                Ok(SeedSpec::Range {
                    start: a,
                    count: b - a + 1,
                })
            } else {
                Err(bad())
            };
        }
        if let Some((a, b)) = s.split_once("..") {
            let (a, b) = (num(a)?, num(b)?);
            return if b > a {
                Ok(SeedSpec::Range { start: a, count: b - a })
            } else {
                Err(bad())
            };
        }
        if s.contains(',') {
            return Ok(SeedSpec::List(s.split(',').map(num).collect::<Result<_>>()?));
        }
        Ok(SeedSpec::Range {
            start: 0,
            count: num(s)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MalliavinConfig {
    /// Shift size at the finest level; coarser levels scale it with `Δt`.
    pub eps: f64,
    /// Start of the shift window `r₀` as a fraction of the horizon.
    pub r0_fraction: f64,
}

impl Default for MalliavinConfig {
    fn default() -> Self {
        Self {
            eps: 1e-4,
            r0_fraction: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChecksConfig {
    /// Random samples per identity check.
    pub samples: usize,
    pub alphas: Vec<f64>,
    /// Transform-vs-direct comparison runs for cutoffs `1..=direct_max_cutoff`.
    pub direct_max_cutoff: usize,
    pub direct_samples: usize,
    /// Catalog pair for the product-rule study: `w_wt`, `q_wt` or `q_q`.
    pub product_pair: String,
    /// Step counts compared by the a-priori bound sweep.
    pub apriori_levels: Vec<usize>,
}

impl Default for ChecksConfig {
    fn default() -> Self {
        Self {
            samples: 1000,
            alphas: vec![0.5, 1.0, 2.0],
            direct_max_cutoff: 6,
            direct_samples: 20,
            product_pair: "w_wt".into(),
            apriori_levels: vec![100, 400],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    pub eigen_rel: f64,
    pub b_orthogonality: f64,
    pub b_antisymmetry: f64,
    pub b_direct_rel: f64,
    pub energy_ratio_min: f64,
    pub energy_ratio_max: f64,
    pub energy_order_min: f64,
    pub apriori_growth_max: f64,
    pub galerkin_drop_min: f64,
    pub malliavin_rel: f64,
    pub product_order_min: f64,
    pub theorem_order_min: f64,
    pub round_trip: f64,
    pub linear_decay: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            eigen_rel: 1e-12,
            b_orthogonality: 1e-10,
            b_antisymmetry: 1e-10,
            b_direct_rel: 1e-10,
            energy_ratio_min: 3.2,
            energy_ratio_max: 4.8,
            energy_order_min: 0.4,
            apriori_growth_max: 0.05,
            galerkin_drop_min: 10.0,
            malliavin_rel: 1e-2,
            product_order_min: 0.4,
            theorem_order_min: 0.4,
            round_trip: 1e-13,
            linear_decay: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    pub plots: bool,
    /// `simulate`: also write the Malliavin field of the run.
    pub malliavin_field: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: None,
            plots: true,
            malliavin_field: false,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let p = &self.physics;
        if !(p.alpha > 0.0 && p.nu > 0.0 && p.horizon > 0.0) {
            return Err(Error::Config("alpha, nu and horizon must be positive".into()));
        }
        if !(p.sigma >= 0.0) || !(p.level > 0.0) {
            return Err(Error::Config(
                "sigma must be non-negative and the level N positive".into(),
            ));
        }
        let d = &self.discretization;
        if d.cutoff < 1 || d.cutoffs.contains(&0) {
            return Err(Error::Config("cutoffs must be at least 1".into()));
        }
        if d.steps == 0 || d.levels.contains(&0) || d.r_stride == 0 {
            return Err(Error::Config("step counts and r_stride must be positive".into()));
        }
        self.steps()?;
        if self.seeds.seeds().is_empty() {
            return Err(Error::Config("seed list is empty".into()));
        }
        Ok(())
    }

    /// Single-run step count, from `dt` when given.
    pub fn steps(&self) -> Result<usize> {
        let Some(dt) = self.discretization.dt else {
            return Ok(self.discretization.steps);
        };
        let t = self.physics.horizon;
        let m = (t / dt).round();
        if !(dt > 0.0) || m < 1.0 || (m * dt - t).abs() > 1e-12 {
            return Err(Error::Config(format!("dt={dt} does not divide the horizon {t}")));
        }
        Ok(m as usize)
    }

    pub fn solver(&self) -> SolverConfig {
        SolverConfig {
            alpha: self.physics.alpha,
            nu: self.physics.nu,
            cutoff: self.discretization.cutoff,
            force: self.force,
            method: self.discretization.method,
            grid: self.discretization.grid,
            nonlinear: self.physics.nonlinear,
        }
    }

    pub fn path(&self, seed: u64, steps: usize) -> Result<BrownianPath> {
        let t = self.physics.horizon;
        match self.path.kind {
            PathChoice::Sampled => BrownianPath::sample(seed, steps, t),
            PathChoice::Sine => BrownianPath::sine(steps, t),
            PathChoice::Zero => BrownianPath::zero(steps, t),
        }
    }

    /// Base field from a seed, following the `[init]` recipe.
    pub fn field(&self, seed: u64) -> SpectralField {
        let i = &self.init;
        let n = i.field_cutoff.unwrap_or(self.discretization.cutoff);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        match i.field {
            FieldKind::Random => SpectralField::random(n, i.decay, &mut rng).scale(i.amplitude),
            FieldKind::Analytic => SpectralField::analytic(n, i.amplitude, i.rate, &mut rng),
        }
    }

    pub fn init_spec(&self) -> InitSpec {
        self.init_spec_from(self.init.f0_seed)
    }

    /// Initial data with `f₀` drawn from `f0_seed`.
    pub fn init_spec_from(&self, f0_seed: u64) -> InitSpec {
        let f0 = self.field(f0_seed);
        match self.init.kind {
            InitKind::Deterministic => InitSpec::Deterministic(f0),
            InitKind::EndpointFunctional => InitSpec::EndpointFunctional {
                f0,
                f1: self.field(self.init.f1_seed).scale(self.init.f1_scale),
                g: self.init.g,
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_default() {
        assert_eq!(RunConfig::from_toml("").unwrap(), RunConfig::default());
    }

    #[test]
    fn round_trips_through_toml() {
        let cfg = RunConfig::default();
        assert_eq!(RunConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn unknown_key_reports_line() {
        let err = RunConfig::from_toml("[physics]\nalpha = 1.0\nalpah = 2.0\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("alpah") && msg.contains("line 3"), "{msg}");
    }

    #[test]
    fn dt_must_divide_horizon() {
        assert_eq!(
            RunConfig::from_toml("[discretization]\ndt = 0.001")
                .unwrap()
                .steps()
                .unwrap(),
            1000
        );
        assert!(RunConfig::from_toml("[discretization]\ndt = 0.3").is_err());
    }

    #[test]
    fn infinite_level_parses() {
        let cfg = RunConfig::from_toml("[physics]\nlevel = inf").unwrap();
        assert!(cfg.physics.level.is_infinite());
    }

    #[test]
    fn seed_specs() {
        assert_eq!(SeedSpec::parse("3..6").unwrap().seeds(), vec![3, 4, 5]);
        assert_eq!(SeedSpec::parse("3..=4").unwrap().seeds(), vec![3, 4]);
        assert_eq!(SeedSpec::parse("4").unwrap().seeds(), vec![0, 1, 2, 3]);
        assert_eq!(SeedSpec::parse("9,1").unwrap().seeds(), vec![9, 1]);
        assert!(SeedSpec::parse("x").is_err());
        let cfg = RunConfig::from_toml("seeds = [5, 6]").unwrap();
        assert_eq!(cfg.seeds.seeds(), vec![5, 6]);
    }
}
