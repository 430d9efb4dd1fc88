//! Depolarization factors of ellipsoids and the confocal coating integral.
//!
//! For semi-axes `l = (l1, l2, l3)`
//!
//! ```text
//! d_j = (l1 l2 l3 / 2) ∫₀^∞ dy / ((l_j² + y) sqrt((l1²+y)(l2²+y)(l3²+y)))
//!     = (l1 l2 l3 / 3) R_D(l_k², l_m², l_j²)
//! ```
//!
//! The Carlson form is the production path. The quadrature form is kept as an
//! independent route and the two are cross-checked in tests.

use serde::{Deserialize, Serialize};

use crate::carlson::rd;
use crate::error::{Error, Result};
use crate::geometry::{g_unchecked, semi_axes, volume_fraction, Axis, EllipsoidSpec, Vec3};
use crate::quadrature::{integrate, integrate_semi_infinite, QuadOptions};

/// Largest accepted ratio between the longest and shortest semi-axis.
pub const MAX_ASPECT_RATIO: f64 = 1e4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepolarizationTriple {
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
}

impl DepolarizationTriple {
    pub fn as_array(&self) -> Vec3 {
        [self.d1, self.d2, self.d3]
    }

    pub fn get(&self, axis: Axis) -> f64 {
        self.as_array()[axis.index()]
    }

    pub fn sum(&self) -> f64 {
        self.d1 + self.d2 + self.d3
    }

    fn from_array(d: Vec3) -> Self {
        DepolarizationTriple {
            d1: d[0],
            d2: d[1],
            d3: d[2],
        }
    }
}

/// Validate and normalize by the geometric mean; returns `None` for a sphere.
fn normalized_axes(l: Vec3) -> Result<Option<Vec3>> {
    if !l.iter().all(|&v| v.is_finite() && v > 0.0) {
        return Err(Error::invalid(format!("semi-axes must be positive, got {l:?}")));
    }
    let lmax = l.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lmin = l.iter().cloned().fold(f64::INFINITY, f64::min);
    if lmax / lmin > MAX_ASPECT_RATIO {
        return Err(Error::Range(format!(
            "aspect ratio {} exceeds {MAX_ASPECT_RATIO:e}",
            lmax / lmin
        )));
    }
    if l[0] == l[1] && l[1] == l[2] {
        return Ok(None);
    }
    // Divide by the largest axis first so the product cannot overflow.
    let u = l.map(|v| v / lmax);
    let gm = (u[0] * u[1] * u[2]).cbrt();
    Ok(Some(u.map(|v| v / gm)))
}

/// Depolarization factors by Carlson's duplication algorithm.
pub fn depolarization(l: Vec3) -> Result<DepolarizationTriple> {
    let Some(u) = normalized_axes(l)? else {
        return Ok(DepolarizationTriple::from_array([1.0 / 3.0; 3]));
    };
    let sq = u.map(|v| v * v);
    let vol = u[0] * u[1] * u[2] / 3.0;
    let mut d = [0.0; 3];
    for j in 0..3 {
        let (k, m) = ((j + 1) % 3, (j + 2) % 3);
        d[j] = vol * rd(sq[k], sq[m], sq[j])?;
    }
    Ok(DepolarizationTriple::from_array(d))
}

/// Depolarization factors by adaptive quadrature of the defining integral,
/// after mapping `[0, ∞)` onto `[0, 1)`.
pub fn depolarization_quadrature(l: Vec3, opts: QuadOptions) -> Result<DepolarizationTriple> {
    let Some(u) = normalized_axes(l)? else {
        return Ok(DepolarizationTriple::from_array([1.0 / 3.0; 3]));
    };
    let sq = u.map(|v| v * v);
    let scale = sq.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let half_vol = 0.5 * u[0] * u[1] * u[2];
    let mut d = [0.0; 3];
    for j in 0..3 {
        let integrand = |y: f64| {
            1.0 / ((sq[j] + y) * ((sq[0] + y) * (sq[1] + y) * (sq[2] + y)).sqrt())
        };
        d[j] = half_vol * integrate_semi_infinite(integrand, scale, opts)?.value;
    }
    Ok(DepolarizationTriple::from_array(d))
}

/// `∫_{rho_a}^{rho_b} ds / ((c_j²+s) g(s))` through the depolarization
/// identity `2 d_j(rho_a)/g(rho_a) − 2 d_j(rho_b)/g(rho_b)`.
pub fn coating_integral_identity(spec: &EllipsoidSpec, rho_a: f64, rho_b: f64, axis: Axis) -> Result<f64> {
    if rho_a == rho_b {
        return Ok(0.0);
    }
    let tail = |rho: f64| -> Result<f64> {
        let d = depolarization(semi_axes(rho, spec)?)?;
        Ok(2.0 * d.get(axis) / g_unchecked(rho, spec))
    };
    Ok(tail(rho_a)? - tail(rho_b)?)
}

/// The same integral by direct adaptive quadrature.
pub fn coating_integral_quadrature(
    spec: &EllipsoidSpec,
    rho_a: f64,
    rho_b: f64,
    axis: Axis,
    opts: QuadOptions,
) -> Result<f64> {
    let a = spec.c_sq();
    let j = axis.index();
    semi_axes(rho_a.min(rho_b), spec)?;
    let integrand = |s: f64| 1.0 / ((a[j] + s) * g_unchecked(s, spec));
    Ok(integrate(integrand, rho_a, rho_b, opts)?.value)
}

/// Coating integral over `[rho_c, rho_e]`, evaluated both ways. Returns the
/// identity value, or [`Error::CrossCheck`] if the routes differ by more than
/// `1e-9` relative.
pub fn coating_integral(spec: &EllipsoidSpec, axis: Axis) -> Result<f64> {
    let by_identity = coating_integral_identity(spec, spec.rho_c(), spec.rho_e(), axis)?;
    let by_quadrature = coating_integral_quadrature(
        spec,
        spec.rho_c(),
        spec.rho_e(),
        axis,
        QuadOptions::default(),
    )?;
    if (by_identity - by_quadrature).abs() > 1e-9 * by_quadrature.abs() {
        return Err(Error::CrossCheck(format!(
            "coating integral along {axis}: identity {by_identity:e} vs quadrature {by_quadrature:e}"
        )));
    }
    Ok(by_identity)
}

/// Depolarization factors of the core and exterior surfaces.
pub fn shell_depolarization(spec: &EllipsoidSpec) -> Result<(DepolarizationTriple, DepolarizationTriple)> {
    Ok((
        depolarization(spec.core_semi_axes())?,
        depolarization(spec.exterior_semi_axes())?,
    ))
}

/// Scale-free geometric factor `K_j = d_cj − theta1 d_ej`, checked against
/// the bound `0 < K_j < theta2`.
pub fn k_factor(spec: &EllipsoidSpec, axis: Axis) -> Result<f64> {
    Ok(k_factors(spec)?[axis.index()])
}

pub fn k_factors(spec: &EllipsoidSpec) -> Result<Vec3> {
    let (dc, de) = shell_depolarization(spec)?;
    let theta1 = volume_fraction(spec);
    let theta2 = 1.0 - theta1;
    let mut k = [0.0; 3];
    for axis in Axis::ALL {
        let kj = dc.get(axis) - theta1 * de.get(axis);
        if !(kj > 0.0 && kj < theta2) {
            return Err(Error::Pathology(format!(
                "K along {axis} = {kj:e} outside (0, theta2 = {theta2:e})"
            )));
        }
        k[axis.index()] = kj;
    }
    Ok(k)
}
