//! Subcommand implementations and report schemas for `neutral-inclusions`.
//!
//! Every report derives `Deserialize` so that emitted JSON can be read back
//! with the same types.

use std::io::Write;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use neutral_core::assemblage::{assemblage_to_field, pack, Assemblage, RasterReport};
use neutral_core::config::{ProblemConfig, SweepParameter};
use neutral_core::depolarization::depolarization;
use neutral_core::effective::{
    design_axis, effective_conductivity_sphere, hashin_shtrikman, AxisDesign, MaterialPair,
};
use neutral_core::field::{interface_residuals, ode_residual, InterfaceResiduals};
use neutral_core::geometry::{g, volume_fraction};
use neutral_core::matching::f as matching_f;
use neutral_core::verifier::{metrics, rasterize, solve_cell, write_field_csv, CellSolution, Grid, VerifyMetrics};
use neutral_core::{k_factors, AnalyticSolution, Axis, EllipsoidSpec, Error, Vec3};

pub const EXIT_OTHER: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NONCONVERGENCE: i32 = 3;

/// Marks failures to read or parse the problem description.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

/// Map an error to the process exit code.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if cause.downcast_ref::<ConfigError>().is_some() {
            return EXIT_CONFIG;
        }
        if let Some(e) = cause.downcast_ref::<Error>() {
            return match e {
                Error::InvalidInput(_) | Error::Domain(_) => EXIT_CONFIG,
                Error::NonConvergence { .. } => EXIT_NONCONVERGENCE,
                _ => EXIT_OTHER,
            };
        }
    }
    EXIT_OTHER
}

pub fn load_config(path: &std::path::Path) -> Result<ProblemConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
    ProblemConfig::from_json(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())).into())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepolEntry {
    pub semi_axes: Vec3,
    pub d: Vec3,
    pub sum: f64,
}

impl DepolEntry {
    fn new(l: Vec3) -> Result<Self> {
        let d = depolarization(l)?;
        Ok(DepolEntry {
            semi_axes: l,
            d: d.as_array(),
            sum: d.sum(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepolReport {
    /// The given ellipsoid, or the exterior ellipsoid of a coated prototype.
    pub ellipsoid: DepolEntry,
    pub core: Option<DepolEntry>,
    pub theta1: Option<f64>,
    pub k: Option<Vec3>,
}

pub fn cmd_depol(cfg: &ProblemConfig) -> Result<DepolReport> {
    if let neutral_core::config::GeometryConfig::Axes(l) = cfg.geometry {
        return Ok(DepolReport {
            ellipsoid: DepolEntry::new(l)?,
            core: None,
            theta1: None,
            k: None,
        });
    }
    let spec = cfg.spec()?;
    Ok(DepolReport {
        ellipsoid: DepolEntry::new(spec.exterior_semi_axes())?,
        core: Some(DepolEntry::new(spec.core_semi_axes())?),
        theta1: Some(volume_fraction(&spec)),
        k: Some(k_factors(&spec)?),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisReport {
    pub axis: Axis,
    pub k: f64,
    pub x0: f64,
    #[serde(rename = "A1")]
    pub a1: f64,
    #[serde(rename = "A2")]
    pub a2: f64,
    #[serde(rename = "B2")]
    pub b2: f64,
    pub sigma_star: f64,
    /// `|f(x₀)|` evaluated directly.
    pub f_x0: f64,
    /// Matching residual of the solver, measured through the core field.
    pub residual: f64,
}

impl AxisReport {
    fn new(spec: &EllipsoidSpec, mat: &MaterialPair, design: &AxisDesign) -> Result<Self> {
        let m = &design.matching;
        let prob = mat.matching_problem(design.k)?;
        Ok(AxisReport {
            axis: design.axis,
            k: design.k,
            x0: m.x0,
            a1: m.a1,
            a2: m.a2,
            b2: m.b2(g(spec.rho_c(), spec)?),
            sigma_star: design.sigma_star,
            f_x0: matching_f(m.x0, &prob).abs(),
            residual: m.residual,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectiveReport {
    pub theta1: f64,
    pub materials: MaterialPair,
    pub axes: Vec<AxisReport>,
    /// Closed-form sphere value, for sphere geometries.
    pub sphere_formula: Option<f64>,
    /// Hashin–Shtrikman value, for linear sphere geometries.
    pub hashin_shtrikman: Option<f64>,
}

pub fn cmd_effective(cfg: &ProblemConfig) -> Result<EffectiveReport> {
    let spec = cfg.spec()?;
    let mat = cfg.materials()?;
    effective_report(&spec, &mat, &cfg.axes(), sphere_radii(cfg))
}

fn sphere_radii(cfg: &ProblemConfig) -> Option<(f64, f64)> {
    match cfg.geometry {
        neutral_core::config::GeometryConfig::Sphere { r_c, r_e } => Some((r_c, r_e)),
        _ => None,
    }
}

fn effective_report(
    spec: &EllipsoidSpec,
    mat: &MaterialPair,
    axes: &[Axis],
    sphere: Option<(f64, f64)>,
) -> Result<EffectiveReport> {
    let axes = axes
        .iter()
        .map(|&a| AxisReport::new(spec, mat, &design_axis(spec, mat, a)?))
        .collect::<Result<Vec<_>>>()?;
    let theta1 = volume_fraction(spec);
    let sphere_formula = sphere
        .map(|(rc, re)| effective_conductivity_sphere(rc, re, mat))
        .transpose()?;
    let hs = sphere
        .filter(|_| mat.p == 2.0)
        .map(|(rc, re)| hashin_shtrikman((rc / re).powi(3), mat.sigma1, mat.sigma2));
    Ok(EffectiveReport {
        theta1,
        materials: *mat,
        axes,
        sphere_formula,
        hashin_shtrikman: hs,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyticReport {
    pub interface: InterfaceResiduals,
    pub max_relative_interface: f64,
    pub ode_residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classification {
    Neutral,
    NonNeutral,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub axis: Axis,
    pub grid_n: usize,
    pub sigma_star: f64,
    pub matrix_conductivity: f64,
    pub classification: Classification,
    pub analytic: AnalyticReport,
    pub metrics: VerifyMetrics,
    pub log: Vec<f64>,
}

/// Analytic residuals plus a finite-difference cell solve. The matrix is
/// `σ*` unless `control` asks for `σ₂`.
pub fn cmd_verify(cfg: &ProblemConfig, control: bool) -> Result<(VerifyReport, CellSolution)> {
    let spec = cfg.spec()?;
    let mat = cfg.materials()?;
    let axis = cfg.run.axis.unwrap_or(Axis::X1);
    let sol = AnalyticSolution::new(&spec, &mat, axis)?;
    let iface = interface_residuals(&sol, cfg.run.interface_samples)?;
    let analytic = AnalyticReport {
        interface: iface,
        max_relative_interface: iface.max_relative(),
        ode_residual: ode_residual(&sol, 64)?,
    };

    let control = control || cfg.run.control;
    let sigma_star = sol.sigma_star;
    let matrix = if control { mat.sigma2 } else { sigma_star };
    let grid = Grid::for_spec(&spec, cfg.run.grid_n)?;
    let field = rasterize(&spec, &mat, matrix, &grid, cfg.run.subsamples)?;
    let cell = solve_cell(&field, mat.e_field, axis, &cfg.run.solve_options())?;
    let m = metrics(&cell, &field);
    let neutral = (matrix - sigma_star).abs() <= 1e-12 * sigma_star;
    Ok((
        VerifyReport {
            axis,
            grid_n: grid.n,
            sigma_star,
            matrix_conductivity: matrix,
            classification: if neutral {
                Classification::Neutral
            } else {
                Classification::NonNeutral
            },
            analytic,
            metrics: m,
            log: cell.log.clone(),
        },
        cell,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PackReport {
    pub assemblage: Assemblage,
    pub theta1: f64,
    pub k: Vec3,
    pub axis: Axis,
    pub sigma_star: f64,
    pub raster: Option<RasterReport>,
    pub metrics: Option<VerifyMetrics>,
}

pub fn cmd_pack(cfg: &ProblemConfig) -> Result<PackReport> {
    let spec = cfg.spec()?;
    let mat = cfg.materials()?;
    let axis = cfg.run.axis.unwrap_or(Axis::X1);
    let asm = pack(&spec, &mat, &cfg.run.pack_options())?;
    asm.validate()?;
    let sigma_star = design_axis(&spec, &mat, axis)?.sigma_star;
    let (raster, m) = if cfg.run.verify {
        let grid = Grid::new(cfg.run.grid_n, 0.5)?;
        let (field, report) = assemblage_to_field(&asm, sigma_star, &grid, cfg.run.subsamples)?;
        if report.dropped > 0 {
            eprintln!(
                "warning: {} inclusions below grid resolution dropped (volume {:.3e})",
                report.dropped, report.dropped_volume
            );
        }
        let cell = solve_cell(&field, mat.e_field, axis, &cfg.run.solve_options())?;
        (Some(report), Some(metrics(&cell, &field)))
    } else {
        (None, None)
    };
    Ok(PackReport {
        theta1: asm.theta1(),
        k: asm.k_factors()?,
        axis,
        sigma_star,
        assemblage: asm,
        raster,
        metrics: m,
    })
}

/// One CSV row per sweep value and axis:
/// `value,axis,theta1,k,x0,a1,sigma_star`.
pub fn cmd_sweep<W: Write>(cfg: &ProblemConfig, mut w: W) -> Result<usize> {
    let sweep = cfg
        .run
        .sweep
        .as_ref()
        .ok_or_else(|| ConfigError("sweep needs run.sweep {parameter, values}".into()))?;
    let base = cfg.materials()?;
    writeln!(w, "value,axis,theta1,k,x0,a1,sigma_star")?;
    let mut rows = 0;
    for &v in &sweep.values {
        let mut mat = base;
        let mut geom = cfg.geometry.clone();
        match sweep.parameter {
            SweepParameter::Theta1 => geom = geom.with_theta1(v)?,
            SweepParameter::Sigma1 => mat.sigma1 = v,
            SweepParameter::Sigma2 => mat.sigma2 = v,
            SweepParameter::P => mat.p = v,
            SweepParameter::E => mat.e_field = v,
        }
        mat.validate()?;
        let spec = geom.spec()?;
        let theta1 = volume_fraction(&spec);
        for axis in cfg.axes() {
            let d = design_axis(&spec, &mat, axis)?;
            writeln!(
                w,
                "{:.16e},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                v,
                axis.index() + 1,
                theta1,
                d.k,
                d.matching.x0,
                d.matching.a1,
                d.sigma_star
            )?;
            rows += 1;
        }
    }
    Ok(rows)
}

pub fn write_csv(sol: &CellSolution, path: &std::path::Path) -> Result<()> {
    let file = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    write_field_csv(sol, std::io::BufWriter::new(file))?;
    Ok(())
}

