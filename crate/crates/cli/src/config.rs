//! Run configuration, read from TOML.
//!
//! ```toml
//! profile = "x^2+1"            # or: profile_family = "(1-s)*exp(x) + s*(x^2+1)"
//!
//! [fiber]
//! kind = "circle"              # or "abstract-geodesic"
//! length = 6.283185307179586
//! transverse_dimension = 0
//! transverse_curvature = 0.0
//!
//! [class]
//! winding = 1
//!
//! [window]
//! half_width = 8.0
//! grid_n = 1001
//! probe_radii = [10.0, 20.0, 40.0]
//!
//! [solver]
//! n_points = 256
//! max_iter = 20000
//! starts = 17
//! # tol_grad, dedup_tol and eps_len default to n-, l- and w-scaled values
//!
//! [family]
//! count = 11                   # or: samples = [0.0, 0.5, 1.0]
//! descending = false
//!
//! [output]
//! format = "json"              # or "csv"
//! path = "report.json"
//! ```
//!
//! Every section is optional except that a profile or a profile family
//! must be present.

use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use geostring_core::census::CensusOptions;
use geostring_core::family::{FamilyOptions, MetricPath};
use geostring_core::{FiberModel, HomotopyClass, ProfileExpr, ProfileFamily, SolveOptions, Window};
use serde::{Deserialize, Serialize};

use crate::report::{real, real_opt, real_vec};
use crate::CliError;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub profile: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub profile_family: Option<String>,
    #[serde(default)]
    pub fiber: FiberConfig,
    #[serde(default)]
    pub class: ClassConfig,
    #[serde(default)]
    pub window: WindowConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub family: FamilyConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FiberKind {
    Circle,
    AbstractGeodesic,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FiberConfig {
    pub kind: FiberKind,
    #[serde(serialize_with = "real")]
    pub length: f64,
    pub transverse_dimension: u32,
    #[serde(serialize_with = "real")]
    pub transverse_curvature: f64,
}

impl Default for FiberConfig {
    fn default() -> Self {
        Self {
            kind: FiberKind::Circle,
            length: TAU,
            transverse_dimension: 0,
            transverse_curvature: 0.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassConfig {
    pub winding: i32,
}

impl Default for ClassConfig {
    fn default() -> Self {
        Self { winding: 1 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WindowConfig {
    #[serde(serialize_with = "real")]
    pub half_width: f64,
    pub grid_n: usize,
    #[serde(serialize_with = "real_vec")]
    pub probe_radii: Vec<f64>,
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self {
            half_width: 8.0,
            grid_n: 1001,
            probe_radii: vec![10.0, 20.0, 40.0],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub n_points: usize,
    #[serde(serialize_with = "real_opt")]
    pub tol_grad: Option<f64>,
    pub max_iter: usize,
    pub starts: usize,
    #[serde(serialize_with = "real_opt")]
    pub dedup_tol: Option<f64>,
    #[serde(serialize_with = "real_opt")]
    pub eps_len: Option<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let census = CensusOptions::default();
        Self {
            n_points: census.n_points,
            tol_grad: None,
            max_iter: census.solver.max_iter,
            starts: census.starts,
            dedup_tol: None,
            eps_len: None,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FamilyConfig {
    #[serde(serialize_with = "real_opt_vec", skip_serializing_if = "Option::is_none")]
    pub samples: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    pub descending: bool,
}

fn real_opt_vec<S: serde::Serializer>(v: &Option<Vec<f64>>, s: S) -> Result<S::Ok, S::Error> {
    match v {
        Some(v) => real_vec(v, s),
        None => s.serialize_none(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub format: Format,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn positive(name: &str, v: Option<f64>) -> Result<(), CliError> {
    match v {
        Some(t) if !(t > 0.0 && t.is_finite()) => Err(config_err(format!("{name} must be positive, got {t}"))),
        _ => Ok(()),
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| config_err(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        match (&self.profile, &self.profile_family) {
            (None, None) => return Err(config_err("one of `profile` or `profile_family` is required")),
            (Some(_), Some(_)) => return Err(config_err("`profile` and `profile_family` are exclusive")),
            _ => {}
        }
        if self.class.winding == 0 {
            return Err(config_err("class.winding must be nonzero"));
        }
        if self.solver.n_points < geostring_core::loops::MIN_SAMPLES {
            return Err(config_err(format!(
                "solver.n_points must be at least {}",
                geostring_core::loops::MIN_SAMPLES
            )));
        }
        if self.solver.starts == 0 || self.solver.max_iter == 0 {
            return Err(config_err("solver.starts and solver.max_iter must be positive"));
        }
        positive("solver.tol_grad", self.solver.tol_grad)?;
        positive("solver.dedup_tol", self.solver.dedup_tol)?;
        positive("solver.eps_len", self.solver.eps_len)?;
        if self.fiber.kind == FiberKind::Circle
            && (self.fiber.transverse_dimension != 0 || self.fiber.transverse_curvature != 0.0)
        {
            return Err(config_err("a circle fiber has no transverse directions"));
        }
        if self.family.samples.is_some() && self.family.count.is_some() {
            return Err(config_err("family.samples and family.count are exclusive"));
        }
        if self.family.count.is_some_and(|c| c < 2) {
            return Err(config_err("family.count must be at least 2"));
        }
        self.fiber_model()?;
        self.window()?;
        Ok(())
    }

    pub fn fiber_model(&self) -> Result<FiberModel, CliError> {
        let fiber = match self.fiber.kind {
            FiberKind::Circle => FiberModel::Circle {
                length: self.fiber.length,
            },
            FiberKind::AbstractGeodesic => FiberModel::AbstractGeodesic {
                length: self.fiber.length,
                transverse_dim: self.fiber.transverse_dimension,
                transverse_curvature: self.fiber.transverse_curvature,
            },
        };
        fiber.validate().map_err(|e| config_err(e.to_string()))?;
        Ok(fiber)
    }

    pub fn window(&self) -> Result<Window, CliError> {
        let w = &self.window;
        Window::new(w.half_width, w.grid_n, w.probe_radii.clone()).map_err(|e| config_err(e.to_string()))
    }

    pub fn class(&self) -> HomotopyClass {
        HomotopyClass::new(self.class.winding).expect("validated")
    }

    pub fn profile(&self) -> Result<ProfileExpr, CliError> {
        let text = self
            .profile
            .as_deref()
            .ok_or_else(|| config_err("this command needs `profile`, not `profile_family`"))?;
        ProfileExpr::parse(text).map_err(|e| config_err(format!("profile: {e}")))
    }

    pub fn profile_family(&self) -> Result<ProfileFamily, CliError> {
        let text = self
            .profile_family
            .as_deref()
            .ok_or_else(|| config_err("this command needs `profile_family`, not `profile`"))?;
        ProfileFamily::parse(text).map_err(|e| config_err(format!("profile_family: {e}")))
    }

    pub fn solve_options(&self) -> SolveOptions {
        SolveOptions {
            tol_grad: self.solver.tol_grad,
            eps_len: self.solver.eps_len,
            max_iter: self.solver.max_iter,
            ..SolveOptions::default()
        }
    }

    pub fn census_options(&self) -> CensusOptions {
        CensusOptions {
            solver: self.solve_options(),
            n_points: self.solver.n_points,
            starts: self.solver.starts,
            dedup_tol: self.solver.dedup_tol,
        }
    }

    pub fn family_options(&self) -> FamilyOptions {
        FamilyOptions {
            census: self.census_options(),
            descending: self.family.descending,
            membership_grid: self.window.grid_n,
            ..FamilyOptions::default()
        }
    }

    pub fn metric_path(&self) -> Result<MetricPath, CliError> {
        let samples = match (&self.family.samples, self.family.count) {
            (Some(s), _) => s.clone(),
            (None, Some(c)) => MetricPath::uniform_samples(c),
            (None, None) => MetricPath::uniform_samples(11),
        };
        MetricPath::new(self.profile_family()?, self.fiber_model()?, self.window()?, samples)
            .map_err(|e| config_err(format!("family: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = RunConfig::from_toml("profile = \"x^2+1\"").unwrap();
        assert_eq!(cfg.class.winding, 1);
        assert_eq!(cfg.fiber.length, TAU);
        assert_eq!(cfg.window.grid_n, 1001);
        assert_eq!(cfg.census_options(), CensusOptions::default());
    }

    #[test]
    fn invalid_configs_are_rejected() {
        for text in [
            "",
            "profile = \"x\"\nprofile_family = \"x+s\"",
            "profile = \"x^2+1\"\n[class]\nwinding = 0",
            "profile = \"x^2+1\"\n[solver]\nn_points = 4",
            "profile = \"x^2+1\"\n[solver]\ntol_grad = -1.0",
            "profile = \"x^2+1\"\n[solver]\neps_len = 0.0",
            "profile = \"x^2+1\"\n[window]\nhalf_width = 8.0\nprobe_radii = [5.0]",
            "profile = \"x^2+1\"\n[fiber]\nlength = 0.0",
            "profile = \"x^2+1\"\n[fiber]\ntransverse_dimension = 2",
            "profile = \"x^2+1\"\nunknown = 3",
            "profile_family = \"x+s\"\n[family]\ncount = 1",
        ] {
            assert!(
                matches!(RunConfig::from_toml(text), Err(CliError::Config(_))),
                "{text:?}"
            );
        }
    }

    #[test]
    fn wrong_profile_kind_is_a_config_error() {
        let cfg = RunConfig::from_toml("profile_family = \"x^2+1+s\"").unwrap();
        assert!(matches!(cfg.profile(), Err(CliError::Config(_))));
        assert!(cfg.metric_path().is_ok());
        let bad = RunConfig::from_toml("profile = \"x^2+)\"").unwrap();
        assert!(matches!(bad.profile(), Err(CliError::Config(_))));
    }
}
