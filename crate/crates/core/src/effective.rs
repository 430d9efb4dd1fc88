//! Effective conductivity of the coated-ellipsoid assemblage.
//!
//! Along axis `j`, with `K_j = d_cj − θ₁ d_ej`, matching root `x₀` and core
//! field `A₁ = E − K_j x₀`, the matrix conductivity that makes the prototype
//! neutral is
//!
//! ```text
//! σ*_j = σ₂ + σ₂ θ₁ (σ₁|A₁|^{p−2} − σ₂) / (σ₂ + (σ₁|A₁|^{p−2} − σ₂) K_j)
//! ```
//!
//! It depends on the prototype only through `(θ₁, K_j)`, both scale-free, so
//! every aligned scaled copy shares it. For `p ≠ 2` it depends on `E`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::depolarization::k_factors;
use crate::error::{Error, Result};
use crate::geometry::{volume_fraction, Axis, EllipsoidSpec, Vec3};
use crate::matching::{solve_matching, MatchingProblem, MatchingSolution};

/// Core coefficient `σ₁` (with exponent `p`), coating conductivity `σ₂`, and
/// the applied field magnitude `E`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialPair {
    pub sigma1: f64,
    pub sigma2: f64,
    pub p: f64,
    #[serde(rename = "E")]
    pub e_field: f64,
}

impl MaterialPair {
    pub fn new(sigma1: f64, sigma2: f64, p: f64, e_field: f64) -> Result<Self> {
        let m = MaterialPair {
            sigma1,
            sigma2,
            p,
            e_field,
        };
        m.validate()?;
        Ok(m)
    }

    /// Linear materials (`p = 2`) under a unit field.
    pub fn linear(sigma1: f64, sigma2: f64) -> Result<Self> {
        MaterialPair::new(sigma1, sigma2, 2.0, 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma1.is_finite() && self.sigma1 > 0.0 && self.sigma2.is_finite() && self.sigma2 > 0.0) {
            return Err(Error::invalid(format!(
                "conductivities must be positive, got sigma1={}, sigma2={}",
                self.sigma1, self.sigma2
            )));
        }
        if !(self.p.is_finite() && self.p > 1.0) {
            return Err(Error::invalid(format!("exponent p must exceed 1, got {}", self.p)));
        }
        if !self.e_field.is_finite() {
            return Err(Error::invalid("applied field must be finite"));
        }
        if self.p < 2.0 && self.e_field == 0.0 {
            return Err(Error::invalid(
                "E = 0 with p < 2 makes the core conductivity |A1|^(p-2) singular",
            ));
        }
        Ok(())
    }

    pub fn matching_problem(&self, k: f64) -> Result<MatchingProblem> {
        MatchingProblem::new(self.sigma1, self.sigma2, self.e_field, k, self.p)
    }

    /// Secant conductivity of the core material at field strength `|a1|`.
    pub fn core_conductivity(&self, a1: f64) -> f64 {
        if self.p == 2.0 {
            self.sigma1
        } else {
            self.sigma1 * a1.abs().powf(self.p - 2.0)
        }
    }
}

/// Everything the design produces for one axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisDesign {
    pub axis: Axis,
    pub theta1: f64,
    pub k: f64,
    pub matching: MatchingSolution,
    /// `σ₁|A₁|^{p−2}`.
    pub core_conductivity: f64,
    pub sigma_star: f64,
}

/// The conductivity formula given `θ₁`, `K`, and the core conductivity.
fn sigma_star_formula(theta1: f64, k: f64, core: f64, mat: &MaterialPair) -> Result<f64> {
    let s2 = mat.sigma2;
    let jump = core - s2;
    let den = s2 + jump * k;
    if !(den > 0.0 && den.is_finite()) {
        return Err(Error::Pathology(format!(
            "singular denominator {den:e} in the effective conductivity \
             (theta1={theta1}, K={k}, core conductivity={core}, {mat:?})"
        )));
    }
    Ok(s2 + s2 * theta1 * jump / den)
}

/// Design from the scale-free pair `(θ₁, K)` alone.
pub fn design_from_shape(theta1: f64, k: f64, mat: &MaterialPair, axis: Axis) -> Result<AxisDesign> {
    mat.validate()?;
    if !(0.0..1.0).contains(&theta1) {
        return Err(Error::invalid(format!("volume fraction must lie in [0,1), got {theta1}")));
    }
    let matching = solve_matching(&mat.matching_problem(k)?)?;
    let core = mat.core_conductivity(matching.a1);
    let sigma_star = sigma_star_formula(theta1, k, core, mat)?;
    Ok(AxisDesign {
        axis,
        theta1,
        k,
        matching,
        core_conductivity: core,
        sigma_star,
    })
}

pub fn design_axis(spec: &EllipsoidSpec, mat: &MaterialPair, axis: Axis) -> Result<AxisDesign> {
    let k = k_factors(spec)?[axis.index()];
    design_from_shape(volume_fraction(spec), k, mat, axis)
}

/// `σ*` along `axis` for the nonlinear prototype.
pub fn effective_conductivity(spec: &EllipsoidSpec, mat: &MaterialPair, axis: Axis) -> Result<f64> {
    Ok(design_axis(spec, mat, axis)?.sigma_star)
}

/// Linear closed form `σ₂ + σ₂θ₁(σ₁−σ₂)/(σ₂+(σ₁−σ₂)K_j)`; no root solve.
pub fn effective_conductivity_p2(spec: &EllipsoidSpec, mat: &MaterialPair, axis: Axis) -> Result<f64> {
    mat.validate()?;
    if mat.p != 2.0 {
        return Err(Error::invalid(format!("linear closed form needs p = 2, got p = {}", mat.p)));
    }
    let k = k_factors(spec)?[axis.index()];
    sigma_star_formula(volume_fraction(spec), k, mat.sigma1, mat)
}

/// Coated sphere with radii `r_c < r_e`: all depolarization factors are 1/3,
/// `K = θ₂/3`, and
/// `σ* = σ₂ + 3σ₂θ₁(s − σ₂)/(3σ₂ + θ₂(s − σ₂))` with `s = σ₁|E − θ₂x₀/3|^{p−2}`.
pub fn effective_conductivity_sphere(r_c: f64, r_e: f64, mat: &MaterialPair) -> Result<f64> {
    Ok(sphere_design(r_c, r_e, mat)?.sigma_star)
}

pub fn sphere_design(r_c: f64, r_e: f64, mat: &MaterialPair) -> Result<AxisDesign> {
    if !(r_c > 0.0 && r_c < r_e && r_e.is_finite()) {
        return Err(Error::invalid(format!(
            "sphere radii must satisfy 0 < r_c < r_e, got r_c={r_c}, r_e={r_e}"
        )));
    }
    mat.validate()?;
    let ratio = r_c / r_e;
    let theta1 = ratio * ratio * ratio;
    let theta2 = 1.0 - theta1;
    let matching = solve_matching(&mat.matching_problem(theta2 / 3.0)?)?;
    let core = mat.core_conductivity(mat.e_field - theta2 * matching.x0 / 3.0);
    let s2 = mat.sigma2;
    let jump = core - s2;
    let den = 3.0 * s2 + theta2 * jump;
    if !(den > 0.0) {
        return Err(Error::Pathology(format!(
            "singular denominator {den:e} in the sphere formula (theta1={theta1}, {mat:?})"
        )));
    }
    Ok(AxisDesign {
        axis: Axis::X1,
        theta1,
        k: theta2 / 3.0,
        matching,
        core_conductivity: core,
        sigma_star: s2 + 3.0 * s2 * theta1 * jump / den,
    })
}

/// Hashin–Shtrikman form for linear coated spheres.
pub fn hashin_shtrikman(theta1: f64, sigma1: f64, sigma2: f64) -> f64 {
    let theta2 = 1.0 - theta1;
    sigma2 + 3.0 * sigma2 * theta1 * (sigma1 - sigma2) / (3.0 * sigma2 + theta2 * (sigma1 - sigma2))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectiveResult {
    pub sigma_star: Vec3,
    pub x0_per_axis: Vec3,
    pub a1_per_axis: Vec3,
    pub k_per_axis: Vec3,
    pub theta1: f64,
}

impl EffectiveResult {
    pub fn get(&self, axis: Axis) -> f64 {
        self.sigma_star[axis.index()]
    }
}

/// `σ*` for all three axes.
pub fn effective_tensor(spec: &EllipsoidSpec, mat: &MaterialPair) -> Result<EffectiveResult> {
    let k = k_factors(spec)?;
    let theta1 = volume_fraction(spec);
    let mut out = EffectiveResult {
        sigma_star: [0.0; 3],
        x0_per_axis: [0.0; 3],
        a1_per_axis: [0.0; 3],
        k_per_axis: k,
        theta1,
    };
    for axis in Axis::ALL {
        let d = design_from_shape(theta1, k[axis.index()], mat, axis)?;
        out.sigma_star[axis.index()] = d.sigma_star;
        out.x0_per_axis[axis.index()] = d.matching.x0;
        out.a1_per_axis[axis.index()] = d.matching.a1;
    }
    Ok(out)
}

/// Evaluate many `(spec, materials)` cases. Output order matches input order
/// regardless of how the work is scheduled.
pub fn effective_sweep(cases: &[(EllipsoidSpec, MaterialPair)]) -> Vec<Result<EffectiveResult>> {
    cases
        .par_iter()
        .map(|(spec, mat)| effective_tensor(spec, mat))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleInvarianceReport {
    pub lambda: f64,
    pub base: Vec3,
    pub scaled: Vec3,
    pub max_rel_diff: f64,
    pub passed: bool,
}

/// Compare `σ*` of the prototype against the confocal family scaled by
/// `lambda` (semi-axes `λl_c`, `λl_e`). Passes at `1e-12` relative.
pub fn scale_invariance_check(
    spec: &EllipsoidSpec,
    mat: &MaterialPair,
    lambda: f64,
) -> Result<ScaleInvarianceReport> {
    let scaled_spec = spec.scaled(lambda)?;
    let base = effective_tensor(spec, mat)?.sigma_star;
    let scaled = effective_tensor(&scaled_spec, mat)?.sigma_star;
    let max_rel_diff = (0..3)
        .map(|j| (base[j] - scaled[j]).abs() / base[j].abs())
        .fold(0.0, f64::max);
    Ok(ScaleInvarianceReport {
        lambda,
        base,
        scaled,
        max_rel_diff,
        passed: max_rel_diff <= 1e-12,
    })
}
