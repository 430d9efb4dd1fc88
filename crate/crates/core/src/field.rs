//! The analytic potential of a neutral coated ellipsoid.
//!
//! With the field applied along `e_j`:
//!
//! ```text
//! u = A₁ x_j                                       ρ < ρ_c   (core)
//! u = φ(ρ) x_j,  φ(ρ) = A₂ + B₂ ∫_{ρ_c}^{ρ} ds / ((c_j²+s) g(s))   ρ_c ≤ ρ ≤ ρ_e
//! u = E x_j                                        ρ > ρ_e   (matrix σ*)
//! ```
//!
//! The coating term solves `φ'' + (g'/g + 1/(c_j²+ρ)) φ' = 0`, which is what
//! makes `φ(ρ)x_j` harmonic. This module evaluates `u` and `∇u` anywhere and
//! measures how well the interface and field equations are satisfied.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::depolarization::coating_integral_identity;
use crate::effective::{design_axis, AxisDesign, MaterialPair};
use crate::error::{Error, Result};
use crate::geometry::{
    cartesian_from_ellipsoidal, g_unchecked, grad_rho, outward_normal, rho_from_cartesian, Axis,
    EllipsoidSpec, EllipsoidalPoint, Region, Vec3,
};

/// Which analytic expression to evaluate, independent of where the point is.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    Core,
    Coating,
    Exterior,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyticSolution {
    pub spec: EllipsoidSpec,
    pub mat: MaterialPair,
    pub axis: Axis,
    pub design: AxisDesign,
    pub a1: f64,
    pub a2: f64,
    pub b2: f64,
    pub sigma_star: f64,
    g_core: f64,
    g_ext: f64,
}

fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

impl AnalyticSolution {
    pub fn new(spec: &EllipsoidSpec, mat: &MaterialPair, axis: Axis) -> Result<Self> {
        let design = design_axis(spec, mat, axis)?;
        let g_core = g_unchecked(spec.rho_c(), spec);
        let g_ext = g_unchecked(spec.rho_e(), spec);
        Ok(AnalyticSolution {
            spec: *spec,
            mat: *mat,
            axis,
            design,
            a1: design.matching.a1,
            a2: design.matching.a2,
            b2: design.matching.b2(g_core),
            sigma_star: design.sigma_star,
            g_core,
            g_ext,
        })
    }

    /// Copy with the core field scaled by `factor` (continuity kept,
    /// everything else frozen). Used to probe residual sensitivity.
    pub fn with_core_field_scaled(&self, factor: f64) -> Self {
        AnalyticSolution {
            a1: self.a1 * factor,
            a2: self.a2 * factor,
            ..*self
        }
    }

    pub fn g_core(&self) -> f64 {
        self.g_core
    }

    pub fn g_ext(&self) -> f64 {
        self.g_ext
    }

    fn j(&self) -> usize {
        self.axis.index()
    }

    fn e(&self) -> f64 {
        self.mat.e_field
    }

    /// Unchecked coating profile, valid for any `ρ > −min c²`.
    fn varphi_ext(&self, rho: f64) -> f64 {
        if rho == self.spec.rho_c() {
            return self.a2;
        }
        let integral = coating_integral_identity(&self.spec, self.spec.rho_c(), rho, self.axis)
            .expect("rho validated by caller");
        self.a2 + self.b2 * integral
    }

    fn varphi_prime_ext(&self, rho: f64) -> f64 {
        let a = self.spec.c_sq()[self.j()];
        self.b2 / ((a + rho) * g_unchecked(rho, &self.spec))
    }

    fn check_coating(&self, rho: f64) -> Result<()> {
        if !(rho >= self.spec.rho_c() && rho <= self.spec.rho_e()) {
            return Err(Error::Range(format!(
                "rho = {rho} outside the coating [{}, {}]",
                self.spec.rho_c(),
                self.spec.rho_e()
            )));
        }
        Ok(())
    }

    /// Coating profile `φ(ρ)` for `ρ_c ≤ ρ ≤ ρ_e`.
    pub fn varphi(&self, rho: f64) -> Result<f64> {
        self.check_coating(rho)?;
        Ok(self.varphi_ext(rho))
    }

    /// `φ'(ρ) = B₂ / ((c_j²+ρ) g(ρ))`.
    pub fn varphi_prime(&self, rho: f64) -> Result<f64> {
        self.check_coating(rho)?;
        Ok(self.varphi_prime_ext(rho))
    }

    /// Region of `x` with the module's default interface band.
    pub fn region(&self, x: &Vec3) -> Result<Region> {
        let rho = rho_from_cartesian(x, &self.spec)?;
        Ok(crate::geometry::classify_rho(rho, &self.spec, self.spec.default_interface_tol()))
    }

    /// Evaluate one branch at `x` regardless of which region `x` is in.
    pub fn potential_on(&self, branch: Branch, x: &Vec3) -> Result<f64> {
        let xj = x[self.j()];
        Ok(match branch {
            Branch::Core => self.a1 * xj,
            Branch::Exterior => self.e() * xj,
            Branch::Coating => {
                let rho = rho_from_cartesian(x, &self.spec)?;
                self.varphi_ext(rho) * xj
            }
        })
    }

    /// Gradient of one branch at `x`; the coating branch uses the explicit
    /// shell parameter `rho` so one-sided interface limits can be taken.
    pub fn gradient_on_shell(&self, branch: Branch, x: &Vec3, rho: f64) -> Vec3 {
        let j = self.j();
        match branch {
            Branch::Core => self.axis.unit().map(|v| v * self.a1),
            Branch::Exterior => self.axis.unit().map(|v| v * self.e()),
            Branch::Coating => {
                let gr = grad_rho(x, rho, &self.spec);
                let dphi = self.varphi_prime_ext(rho) * x[j];
                let mut out = gr.map(|v| v * dphi);
                out[j] += self.varphi_ext(rho);
                out
            }
        }
    }

    pub fn gradient_on(&self, branch: Branch, x: &Vec3) -> Result<Vec3> {
        let rho = rho_from_cartesian(x, &self.spec)?;
        Ok(self.gradient_on_shell(branch, x, rho))
    }

    fn branch_of(region: Region) -> Option<Branch> {
        match region {
            Region::Core => Some(Branch::Core),
            Region::Coating | Region::CoreInterface | Region::ExteriorInterface => Some(Branch::Coating),
            Region::Exterior => Some(Branch::Exterior),
        }
    }

    /// `u(x)`. Points inside an interface band use the coating branch.
    pub fn potential(&self, x: &Vec3) -> Result<f64> {
        let branch = Self::branch_of(self.region(x)?).expect("every region has a branch");
        self.potential_on(branch, x)
    }

    /// `∇u(x)`; undefined on the interfaces themselves.
    pub fn gradient(&self, x: &Vec3) -> Result<Vec3> {
        let region = self.region(x)?;
        match region {
            Region::CoreInterface | Region::ExteriorInterface => Err(Error::domain(format!(
                "gradient is discontinuous on the interface ({region:?}) at {x:?}"
            ))),
            _ => self.gradient_on(Self::branch_of(region).expect("branch"), x),
        }
    }

    /// Left side of the fully substituted matching identity,
    /// `σ₁|E−2B₂K/g_c|^{p−2}(E−2B₂K/g_c) − σ₂(E−2B₂K/g_c) − 2σ₂B₂/g_c`.
    pub fn chain_identity_residual(&self) -> f64 {
        let m = &self.mat;
        let x = 2.0 * self.b2 / self.g_core;
        let t = m.e_field - self.design.k * x;
        m.sigma1 * crate::matching::signed_pow(t, m.p - 1.0) - m.sigma2 * t - m.sigma2 * x
    }

    /// `B₂` implied by the outer flux condition, `E g_e (σ* − σ₂)/(2σ₂)`.
    pub fn b2_from_exterior(&self) -> f64 {
        let m = &self.mat;
        m.e_field * self.g_ext * (self.sigma_star - m.sigma2) / (2.0 * m.sigma2)
    }

    /// `E` reconstructed as `2B₂σ₂ / (g_e (σ* − σ₂))`; `None` when `σ* = σ₂`.
    pub fn field_from_coefficients(&self) -> Option<f64> {
        let jump = self.sigma_star - self.mat.sigma2;
        (jump != 0.0).then(|| 2.0 * self.b2 * self.mat.sigma2 / (self.g_ext * jump))
    }

    fn potential_scale(&self) -> f64 {
        let lmax = self
            .spec
            .exterior_semi_axes()
            .iter()
            .cloned()
            .fold(0.0, f64::max);
        self.e().abs().max(self.a1.abs()) * lmax
    }

    fn flux_scale(&self) -> f64 {
        let m = &self.mat;
        (m.sigma1 * self.a1.abs().powf(m.p - 1.0))
            .max(m.sigma2 * m.e_field.abs())
            .max(self.sigma_star * m.e_field.abs())
            .max(f64::MIN_POSITIVE)
    }
}

/// Points on the confocal ellipsoid `rho`, spread over all octants.
///
/// Ordered triaxial families are sampled uniformly in `(mu, nu)`; degenerate
/// families use uniformly distributed directions scaled by the semi-axes.
pub fn sample_surface(spec: &EllipsoidSpec, rho: f64, n: usize, seed: u64) -> Result<Vec<Vec3>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = spec.c_sq();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let octant = [i & 1 != 0, i & 2 != 0, i & 4 != 0];
        if spec.is_ordered_triaxial() {
            let mu = -a[1] + (a[1] - a[0]) * rng.gen::<f64>();
            let nu = -a[2] + (a[2] - a[1]) * rng.gen::<f64>();
            let pt = EllipsoidalPoint { rho, mu, nu, octant };
            out.push(cartesian_from_ellipsoidal(&pt, spec)?);
        } else {
            let z: f64 = 2.0 * rng.gen::<f64>() - 1.0;
            let phi: f64 = std::f64::consts::TAU * rng.gen::<f64>();
            let s = (1.0 - z * z).max(0.0).sqrt();
            let dir = [s * phi.cos(), s * phi.sin(), z];
            let l = crate::geometry::semi_axes(rho, spec)?;
            out.push([l[0] * dir[0], l[1] * dir[1], l[2] * dir[2]]);
        }
    }
    Ok(out)
}

/// Maximum violations of the four interface conditions, with the natural
/// scales they should be compared against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterfaceResiduals {
    /// `|u_core − u_coating|` on `ρ = ρ_c`.
    pub core_continuity: f64,
    /// `|u_coating − E x_j|` on `ρ = ρ_e`.
    pub exterior_boundary: f64,
    /// `|σ₁|∇u|^{p−2}∇u·n − σ₂∇u·n|` on `ρ = ρ_c`.
    pub core_flux: f64,
    /// `|σ₂∇u·n − σ*∇u·n|` on `ρ = ρ_e`.
    pub exterior_flux: f64,
    pub potential_scale: f64,
    pub flux_scale: f64,
    pub samples: usize,
}

impl InterfaceResiduals {
    /// Largest residual relative to its scale.
    pub fn max_relative(&self) -> f64 {
        (self.core_continuity / self.potential_scale)
            .max(self.exterior_boundary / self.potential_scale)
            .max(self.core_flux / self.flux_scale)
            .max(self.exterior_flux / self.flux_scale)
    }
}

/// Sample `n` points on each interface and evaluate every continuity and
/// flux condition with one-sided limits.
pub fn interface_residuals(sol: &AnalyticSolution, n: usize) -> Result<InterfaceResiduals> {
    if n == 0 {
        return Err(Error::invalid("need at least one sample per interface"));
    }
    let spec = &sol.spec;
    let j = sol.axis.index();
    let m = &sol.mat;
    let mut r = InterfaceResiduals {
        core_continuity: 0.0,
        exterior_boundary: 0.0,
        core_flux: 0.0,
        exterior_flux: 0.0,
        potential_scale: sol.potential_scale(),
        flux_scale: sol.flux_scale(),
        samples: n,
    };

    let rc = spec.rho_c();
    for x in sample_surface(spec, rc, n, 0x5eed_c0de)? {
        let nrm = outward_normal(&x, rc, spec);
        let u_core = sol.a1 * x[j];
        let u_coat = sol.varphi_ext(rc) * x[j];
        r.core_continuity = r.core_continuity.max((u_core - u_coat).abs());

        let g_in = sol.gradient_on_shell(Branch::Core, &x, rc);
        let g_in_norm = dot(&g_in, &g_in).sqrt();
        let core_cond = if m.p == 2.0 {
            m.sigma1
        } else {
            m.sigma1 * g_in_norm.powf(m.p - 2.0)
        };
        let j_in = core_cond * dot(&g_in, &nrm);
        let g_out = sol.gradient_on_shell(Branch::Coating, &x, rc);
        let j_out = m.sigma2 * dot(&g_out, &nrm);
        r.core_flux = r.core_flux.max((j_in - j_out).abs());
    }

    let re = spec.rho_e();
    for x in sample_surface(spec, re, n, 0x5eed_e0de)? {
        let nrm = outward_normal(&x, re, spec);
        let u_coat = sol.varphi_ext(re) * x[j];
        r.exterior_boundary = r.exterior_boundary.max((u_coat - m.e_field * x[j]).abs());

        let g_in = sol.gradient_on_shell(Branch::Coating, &x, re);
        let g_out = sol.gradient_on_shell(Branch::Exterior, &x, re);
        let j_in = m.sigma2 * dot(&g_in, &nrm);
        let j_out = sol.sigma_star * dot(&g_out, &nrm);
        r.exterior_flux = r.exterior_flux.max((j_in - j_out).abs());
    }
    Ok(r)
}

/// Points strictly inside the coating, away from both interfaces.
fn coating_samples(sol: &AnalyticSolution, n: usize, seed: u64) -> Result<Vec<Vec3>> {
    let spec = &sol.spec;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (rc, re) = (spec.rho_c(), spec.rho_e());
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let rho = rc + (re - rc) * (0.25 + 0.5 * rng.gen::<f64>());
        let mut pts = sample_surface(spec, rho, 1, rng.gen())?;
        out.append(&mut pts);
    }
    Ok(out)
}

/// Largest 7-point discrete Laplacian of the analytic field at `n` sample
/// points of `region`, with stencil spacing `h`.
///
/// In the core the potential is linear, so `Δ_p u = 0` identically and the
/// result is exactly zero. In the coating the residual is the stencil's
/// truncation error, `O(h²)`.
pub fn pde_residual(sol: &AnalyticSolution, region: Region, n: usize, h: f64) -> Result<f64> {
    match region {
        Region::Core => Ok(0.0),
        Region::Coating => {
            if !(h > 0.0) {
                return Err(Error::invalid("stencil spacing must be positive"));
            }
            let mut worst: f64 = 0.0;
            for x in coating_samples(sol, n, 0x1a9_1ace)? {
                let u0 = sol.potential_on(Branch::Coating, &x)?;
                let mut lap = -6.0 * u0;
                for d in 0..3 {
                    for s in [-1.0, 1.0] {
                        let mut y = x;
                        y[d] += s * h;
                        lap += sol.potential_on(Branch::Coating, &y)?;
                    }
                }
                worst = worst.max((lap / (h * h)).abs());
            }
            Ok(worst)
        }
        other => Err(Error::invalid(format!(
            "PDE residual is defined for Core or Coating, not {other:?}"
        ))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub steps: Vec<f64>,
    pub residuals: Vec<f64>,
    /// `residual(h) / residual(h/2)` for consecutive steps.
    pub ratios: Vec<f64>,
}

/// Coating Laplacian residual over a sequence of stencil spacings.
pub fn coating_convergence(sol: &AnalyticSolution, n: usize, steps: &[f64]) -> Result<ConvergenceReport> {
    let residuals = steps
        .iter()
        .map(|&h| pde_residual(sol, Region::Coating, n, h))
        .collect::<Result<Vec<_>>>()?;
    let ratios = residuals.windows(2).map(|w| w[0] / w[1]).collect();
    Ok(ConvergenceReport {
        steps: steps.to_vec(),
        residuals,
        ratios,
    })
}

/// Largest relative residual of the coating ODE
/// `φ'' + (g'/g + 1/(c_j²+ρ)) φ' = 0` at `n` evenly spaced shells, with `φ''`
/// from fourth-order central differences of `φ'`.
pub fn ode_residual(sol: &AnalyticSolution, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::invalid("need at least one sample"));
    }
    let spec = &sol.spec;
    let a = spec.c_sq();
    let j = sol.axis.index();
    let (rc, re) = (spec.rho_c(), spec.rho_e());
    let mut worst: f64 = 0.0;
    for i in 0..n {
        let rho = rc + (re - rc) * (i as f64 + 0.5) / n as f64;
        let h = 1e-3 * (a[j] + rho).min(re - rc);
        let d1 = |r: f64| sol.varphi_prime_ext(r);
        let second = (-d1(rho + 2.0 * h) + 8.0 * d1(rho + h) - 8.0 * d1(rho - h) + d1(rho - 2.0 * h)) / (12.0 * h);
        let first = d1(rho);
        let log_g_prime = 0.5 * (0..3).map(|k| 1.0 / (a[k] + rho)).sum::<f64>();
        let coeff = log_g_prime + 1.0 / (a[j] + rho);
        let scale = second.abs() + (coeff * first).abs();
        if scale > 0.0 {
            worst = worst.max((second + coeff * first).abs() / scale);
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{integrate, QuadOptions};
    use approx::assert_relative_eq;

    fn triaxial() -> EllipsoidSpec {
        EllipsoidSpec::new([1.0, 2.0, 3.0], 1.0, 4.0).unwrap()
    }

    fn nonlinear() -> MaterialPair {
        MaterialPair::new(10.0, 1.0, 3.0, 1.0).unwrap()
    }

    #[test]
    fn varphi_endpoints() {
        for axis in Axis::ALL {
            let sol = AnalyticSolution::new(&triaxial(), &nonlinear(), axis).unwrap();
            assert_eq!(sol.varphi(1.0).unwrap(), sol.a2);
            assert_relative_eq!(sol.varphi(4.0).unwrap(), 1.0, max_relative = 1e-13);
            assert!(sol.varphi(0.5).is_err());
            assert!(sol.varphi(4.5).is_err());
        }
    }

    #[test]
    fn varphi_midpoint_matches_quadrature() {
        let sol = AnalyticSolution::new(&triaxial(), &nonlinear(), Axis::X2).unwrap();
        let integrand = |s: f64| 1.0 / ((4.0 + s) * ((1.0 + s) * (4.0 + s) * (9.0 + s)).sqrt());
        let q = integrate(integrand, 1.0, 2.5, QuadOptions::default()).unwrap().value;
        assert_relative_eq!(sol.varphi(2.5).unwrap(), sol.a2 + sol.b2 * q, max_relative = 1e-12);
    }

    #[test]
    fn varphi_prime_matches_difference_quotient() {
        let sol = AnalyticSolution::new(&triaxial(), &nonlinear(), Axis::X1).unwrap();
        let (rho, h) = (2.0, 1e-4);
        let fd = (sol.varphi(rho + h).unwrap() - sol.varphi(rho - h).unwrap()) / (2.0 * h);
        assert_relative_eq!(fd, sol.varphi_prime(rho).unwrap(), max_relative = 1e-7);
    }

    #[test]
    fn potential_branches() {
        let sol = AnalyticSolution::new(&triaxial(), &nonlinear(), Axis::X1).unwrap();
        assert_eq!(sol.potential(&[0.0; 3]).unwrap(), 0.0);
        let core = [0.3, 0.2, -0.1];
        assert_eq!(sol.potential(&core).unwrap(), sol.a1 * 0.3);
        assert_eq!(sol.gradient(&core).unwrap(), [sol.a1, 0.0, 0.0]);
        let ext = [4.0, 1.0, 2.0];
        assert_eq!(sol.potential(&ext).unwrap(), 4.0);
        assert_eq!(sol.gradient(&ext).unwrap(), [1.0, 0.0, 0.0]);
    }

    #[test]
    fn coating_gradient_matches_finite_differences() {
        let sol = AnalyticSolution::new(&triaxial(), &nonlinear(), Axis::X3).unwrap();
        let x = [1.2, -0.9, 2.1];
        assert_eq!(sol.region(&x).unwrap(), Region::Coating);
        let grad = sol.gradient(&x).unwrap();
        let h = 1e-5;
        let norm = dot(&grad, &grad).sqrt();
        for d in 0..3 {
            let (mut p, mut m) = (x, x);
            p[d] += h;
            m[d] -= h;
            let fd = (sol.potential(&p).unwrap() - sol.potential(&m).unwrap()) / (2.0 * h);
            // O(h²) truncation plus rounding amplified by 1/h
            assert!((fd - grad[d]).abs() < 10.0 * h * h * norm + 1e-9, "{d}: {fd} vs {}", grad[d]);
        }
    }

    #[test]
    fn gradient_rejects_interface_points() {
        let spec = triaxial();
        let sol = AnalyticSolution::new(&spec, &nonlinear(), Axis::X1).unwrap();
        let x = [(1.0 + spec.rho_c()).sqrt(), 0.0, 0.0];
        assert!(sol.gradient(&x).is_err());
    }

    #[test]
    fn interface_residuals_vanish() {
        let sol = AnalyticSolution::new(&triaxial(), &nonlinear(), Axis::X2).unwrap();
        let r = interface_residuals(&sol, 64).unwrap();
        assert!(r.max_relative() < 1e-8, "{r:?}");
    }

    #[test]
    fn perturbed_core_field_breaks_flux() {
        let sol = AnalyticSolution::new(&triaxial(), &MaterialPair::linear(10.0, 1.0).unwrap(), Axis::X1).unwrap();
        let bad = sol.with_core_field_scaled(1.01);
        let r = interface_residuals(&bad, 64).unwrap();
        assert!(r.core_continuity / r.potential_scale < 1e-12);
        let rel = r.core_flux / r.flux_scale;
        assert!(rel > 1e-3 && rel < 1e-1, "{rel}");
    }

    #[test]
    fn coefficient_chain() {
        let sol = AnalyticSolution::new(&triaxial(), &nonlinear(), Axis::X1).unwrap();
        assert_eq!(sol.a1, sol.a2);
        assert!(sol.chain_identity_residual().abs() < 1e-12 * 10.0);
        assert_relative_eq!(sol.b2_from_exterior(), sol.b2, max_relative = 1e-11);
        assert_relative_eq!(sol.field_from_coefficients().unwrap(), 1.0, max_relative = 1e-11);
        let k = sol.design.k;
        assert_relative_eq!(sol.a1 + 2.0 * sol.b2 * k / sol.g_core(), 1.0, max_relative = 1e-14);
    }

    #[test]
    fn core_pde_residual_is_zero() {
        let sol = AnalyticSolution::new(&triaxial(), &nonlinear(), Axis::X1).unwrap();
        assert_eq!(pde_residual(&sol, Region::Core, 10, 1e-3).unwrap(), 0.0);
        assert!(pde_residual(&sol, Region::Exterior, 10, 1e-3).is_err());
    }

    #[test]
    fn ode_residual_small() {
        let sol = AnalyticSolution::new(&triaxial(), &nonlinear(), Axis::X3).unwrap();
        assert!(ode_residual(&sol, 50).unwrap() < 1e-9);
    }
}
