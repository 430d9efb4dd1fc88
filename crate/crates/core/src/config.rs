//! JSON problem descriptions shared by the command-line tool and library
//! users.
//!
//! ```json
//! {
//!   "geometry": { "sphere": { "r_c": 0.7937, "r_e": 1.0 } },
//!   "materials": { "sigma1": 10.0, "sigma2": 1.0, "p": 2.0, "E": 1.0 },
//!   "run": { "axis": 1, "grid_n": 64 }
//! }
//! ```
//!
//! `geometry` holds exactly one of `confocal`, `volume_fraction`, `sphere`,
//! or `axes` (bare semi-axes, usable only for depolarization factors).

use serde::{Deserialize, Serialize};

use crate::assemblage::PackOptions;
use crate::effective::MaterialPair;
use crate::error::{Error, Result};
use crate::geometry::{Axis, EllipsoidSpec, Vec3};
use crate::verifier::{Grid, SolveOptions, DEFAULT_LINEAR_TOL, DEFAULT_OMEGA, DEFAULT_PICARD_TOL, DEFAULT_SUBSAMPLES};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum GeometryConfig {
    Confocal { c: Vec3, rho_c: f64, rho_e: f64 },
    VolumeFraction { exterior: Vec3, theta1: f64 },
    Sphere { r_c: f64, r_e: f64 },
    Axes(Vec3),
}

impl GeometryConfig {
    /// The coated prototype; bare `axes` do not describe one.
    pub fn spec(&self) -> Result<EllipsoidSpec> {
        match *self {
            GeometryConfig::Confocal { c, rho_c, rho_e } => EllipsoidSpec::new(c, rho_c, rho_e),
            GeometryConfig::VolumeFraction { exterior, theta1 } => EllipsoidSpec::from_volume_fraction(exterior, theta1),
            GeometryConfig::Sphere { r_c, r_e } => EllipsoidSpec::sphere(r_c, r_e),
            GeometryConfig::Axes(_) => Err(Error::invalid(
                "bare semi-axes describe a single ellipsoid, not a coated prototype",
            )),
        }
    }

    /// Same geometry with the core volume fraction replaced.
    pub fn with_theta1(&self, theta1: f64) -> Result<GeometryConfig> {
        if !(theta1 > 0.0 && theta1 < 1.0) {
            return Err(Error::invalid(format!("theta1 must lie in (0, 1), got {theta1}")));
        }
        match *self {
            GeometryConfig::VolumeFraction { exterior, .. } => Ok(GeometryConfig::VolumeFraction { exterior, theta1 }),
            GeometryConfig::Sphere { r_e, .. } => Ok(GeometryConfig::Sphere {
                r_c: r_e * theta1.cbrt(),
                r_e,
            }),
            _ => Err(Error::invalid(
                "sweeping theta1 needs a sphere or volume_fraction geometry",
            )),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            GeometryConfig::Axes(l) => {
                if l.iter().all(|&v| v.is_finite() && v > 0.0) {
                    Ok(())
                } else {
                    Err(Error::invalid(format!("semi-axes must be positive, got {l:?}")))
                }
            }
            other => other.spec().map(|_| ()),
        }
    }
}

fn default_p() -> f64 {
    2.0
}

fn default_e() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialsConfig {
    pub sigma1: f64,
    pub sigma2: f64,
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(rename = "E", default = "default_e")]
    pub e_field: f64,
}

impl MaterialsConfig {
    pub fn pair(&self) -> Result<MaterialPair> {
        MaterialPair::new(self.sigma1, self.sigma2, self.p, self.e_field)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    Theta1,
    Sigma1,
    Sigma2,
    P,
    #[serde(rename = "E")]
    E,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// `None` means every axis where that makes sense.
    pub axis: Option<Axis>,
    pub grid_n: usize,
    pub tol: f64,
    pub linear_tol: f64,
    pub max_iter: usize,
    pub omega: f64,
    pub subsamples: usize,
    pub seed: u64,
    /// Use `σ₂` instead of `σ*` for the matrix (non-neutral control).
    pub control: bool,
    pub interface_samples: usize,
    pub target_fill: f64,
    pub max_inclusions: usize,
    pub levels: usize,
    pub ladder_ratio: f64,
    pub lambda0: Option<f64>,
    pub max_attempts: usize,
    /// Solve the packed cell after `pack`.
    pub verify: bool,
    pub sweep: Option<SweepConfig>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let pack = PackOptions::default();
        RunConfig {
            axis: None,
            grid_n: 64,
            tol: DEFAULT_PICARD_TOL,
            linear_tol: DEFAULT_LINEAR_TOL,
            max_iter: 200,
            omega: DEFAULT_OMEGA,
            subsamples: DEFAULT_SUBSAMPLES,
            seed: pack.seed,
            control: false,
            interface_samples: 500,
            target_fill: pack.target_fill,
            max_inclusions: pack.max_inclusions,
            levels: pack.levels,
            ladder_ratio: pack.ladder_ratio,
            lambda0: pack.lambda0,
            max_attempts: pack.max_attempts,
            verify: false,
            sweep: None,
        }
    }
}

impl RunConfig {
    pub fn solve_options(&self) -> SolveOptions {
        SolveOptions {
            tol: self.tol,
            linear_tol: self.linear_tol,
            max_iter: self.max_iter,
            max_linear_iter: None,
            omega: self.omega,
        }
    }

    pub fn pack_options(&self) -> PackOptions {
        PackOptions {
            target_fill: self.target_fill,
            max_inclusions: self.max_inclusions,
            seed: self.seed,
            ladder_ratio: self.ladder_ratio,
            levels: self.levels,
            lambda0: self.lambda0,
            max_attempts: self.max_attempts,
        }
    }

    fn validate(&self) -> Result<()> {
        Grid::new(self.grid_n, 1.0)?;
        if !(self.tol > 0.0 && self.linear_tol > 0.0) {
            return Err(Error::invalid("tolerances must be positive"));
        }
        if !(self.omega > 0.0 && self.omega <= 1.0) {
            return Err(Error::invalid(format!("omega must lie in (0, 1], got {}", self.omega)));
        }
        if self.subsamples == 0 || self.interface_samples == 0 || self.max_iter == 0 {
            return Err(Error::invalid("subsamples, interface_samples and max_iter must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub geometry: GeometryConfig,
    pub materials: Option<MaterialsConfig>,
    #[serde(default)]
    pub run: RunConfig,
}

impl ProblemConfig {
    /// Parse and validate.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ProblemConfig =
            serde_json::from_str(text).map_err(|e| Error::invalid(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        if let Some(m) = &self.materials {
            m.pair()?;
        }
        self.run.validate()
    }

    pub fn spec(&self) -> Result<EllipsoidSpec> {
        self.geometry.spec()
    }

    pub fn materials(&self) -> Result<MaterialPair> {
        self.materials
            .as_ref()
            .ok_or_else(|| Error::invalid("this command needs a materials block"))?
            .pair()
    }

    /// Axes to report: the configured one or all three.
    pub fn axes(&self) -> Vec<Axis> {
        match self.run.axis {
            Some(a) => vec![a],
            None => Axis::ALL.to_vec(),
        }
    }
}
