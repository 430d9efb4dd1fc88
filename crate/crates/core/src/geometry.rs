//! Confocal ellipsoidal coordinates.
//!
//! A point `x` has ellipsoidal coordinates `(rho, mu, nu)`: the three roots of
//!
//! ```text
//! x1²/(c1²+t) + x2²/(c2²+t) + x3²/(c3²+t) = 1
//! ```
//!
//! ordered `rho > -c1² > mu > -c2² > nu > -c3²`. The coordinate `rho` labels
//! the confocal ellipsoid through `x` and acts as a radial coordinate. A
//! coated prototype is the region `rho < rho_e`, with core `rho < rho_c`.
//!
//! Only `rho` enters the design formulas; `mu` and `nu` are implemented so the
//! chart can be exercised (orthogonality, round trips, interface sampling).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = [f64; 3];

/// Coordinate constants `c1, c2, c3` plus the core and exterior shell
/// parameters of one coated prototype.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawEllipsoidSpec", into = "RawEllipsoidSpec")]
pub struct EllipsoidSpec {
    c: Vec3,
    rho_c: f64,
    rho_e: f64,
}

#[derive(Serialize, Deserialize)]
struct RawEllipsoidSpec {
    c: Vec3,
    rho_c: f64,
    rho_e: f64,
}

impl TryFrom<RawEllipsoidSpec> for EllipsoidSpec {
    type Error = Error;

    fn try_from(raw: RawEllipsoidSpec) -> Result<Self> {
        EllipsoidSpec::new(raw.c, raw.rho_c, raw.rho_e)
    }
}

impl From<EllipsoidSpec> for RawEllipsoidSpec {
    fn from(s: EllipsoidSpec) -> Self {
        RawEllipsoidSpec {
            c: s.c,
            rho_c: s.rho_c,
            rho_e: s.rho_e,
        }
    }
}

impl EllipsoidSpec {
    pub fn new(c: Vec3, rho_c: f64, rho_e: f64) -> Result<Self> {
        if !c.iter().all(|&cj| cj.is_finite() && cj > 0.0) {
            return Err(Error::invalid(format!(
                "coordinate constants must be positive, got {c:?}"
            )));
        }
        if !(rho_c.is_finite() && rho_e.is_finite() && 0.0 < rho_c && rho_c < rho_e) {
            return Err(Error::invalid(format!(
                "shell parameters must satisfy 0 < rho_c < rho_e, got rho_c={rho_c}, rho_e={rho_e}"
            )));
        }
        Ok(EllipsoidSpec { c, rho_c, rho_e })
    }

    /// Coated sphere with core radius `r_c` and outer radius `r_e`.
    ///
    /// The sphere is a degenerate confocal family; any `c < r_c` works, we
    /// take `c = r_c / 2`.
    pub fn sphere(r_c: f64, r_e: f64) -> Result<Self> {
        if !(r_c.is_finite() && r_e.is_finite() && 0.0 < r_c && r_c < r_e) {
            return Err(Error::invalid(format!(
                "sphere radii must satisfy 0 < r_c < r_e, got r_c={r_c}, r_e={r_e}"
            )));
        }
        let c = 0.5 * r_c;
        EllipsoidSpec::new([c; 3], r_c * r_c - c * c, r_e * r_e - c * c)
    }

    /// Coated ellipsoid with the given exterior semi-axes and core volume
    /// fraction `theta1`. The core is the confocal ellipsoid that encloses
    /// the requested fraction of the volume.
    pub fn from_volume_fraction(exterior: Vec3, theta1: f64) -> Result<Self> {
        if !exterior.iter().all(|&l| l.is_finite() && l > 0.0) {
            return Err(Error::invalid(format!(
                "exterior semi-axes must be positive, got {exterior:?}"
            )));
        }
        if !(theta1 > 0.0 && theta1 < 1.0) {
            return Err(Error::invalid(format!(
                "volume fraction must lie in (0,1), got {theta1}"
            )));
        }
        let le2 = exterior.map(|l| l * l);
        let lmin2 = le2.iter().cloned().fold(f64::INFINITY, f64::min);
        // Shrinking every squared semi-axis by `shift` stays in the confocal
        // family; the enclosed volume is strictly decreasing in `shift`.
        let ratio = |shift: f64| -> f64 {
            le2.iter()
                .map(|&l2| ((l2 - shift) / l2).sqrt())
                .product::<f64>()
        };
        let (mut lo, mut hi) = (0.0, lmin2);
        loop {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if ratio(mid) > theta1 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let shift = 0.5 * (lo + hi);
        let lc2 = le2.map(|l2| l2 - shift);
        let lc2_min = lc2.iter().cloned().fold(f64::INFINITY, f64::min);
        let rho_c = 0.5 * lc2_min;
        let c = lc2.map(|l2| (l2 - rho_c).sqrt());
        EllipsoidSpec::new(c, rho_c, rho_c + shift)
    }

    /// The confocal family with every length multiplied by `lambda`.
    pub fn scaled(&self, lambda: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::invalid(format!(
                "scale factor must be positive, got {lambda}"
            )));
        }
        let l2 = lambda * lambda;
        EllipsoidSpec::new(self.c.map(|c| c * lambda), self.rho_c * l2, self.rho_e * l2)
    }

    pub fn c(&self) -> Vec3 {
        self.c
    }

    pub fn c_sq(&self) -> Vec3 {
        self.c.map(|c| c * c)
    }

    pub fn rho_c(&self) -> f64 {
        self.rho_c
    }

    pub fn rho_e(&self) -> f64 {
        self.rho_e
    }

    pub fn is_sphere(&self) -> bool {
        self.c[0] == self.c[1] && self.c[1] == self.c[2]
    }

    /// `c1 < c2 < c3` strictly, the case where the `(mu, nu)` chart exists.
    pub fn is_ordered_triaxial(&self) -> bool {
        self.c[0] < self.c[1] && self.c[1] < self.c[2]
    }

    pub fn core_semi_axes(&self) -> Vec3 {
        semi_axes_unchecked(self.rho_c, self)
    }

    pub fn exterior_semi_axes(&self) -> Vec3 {
        semi_axes_unchecked(self.rho_e, self)
    }

    /// Interface band half-width used by [`classify_point`] when the caller
    /// has no better choice.
    pub fn default_interface_tol(&self) -> f64 {
        1e-9 * self.rho_e
    }

    fn min_c_sq(&self) -> f64 {
        self.c_sq().iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

/// `g(t) = sqrt((c1²+t)(c2²+t)(c3²+t))`.
pub fn g(t: f64, spec: &EllipsoidSpec) -> Result<f64> {
    if !(t > -spec.min_c_sq()) {
        return Err(Error::domain(format!(
            "g(t) needs t > -min(c_j^2) = {}, got {t}",
            -spec.min_c_sq()
        )));
    }
    Ok(g_unchecked(t, spec))
}

pub(crate) fn g_unchecked(t: f64, spec: &EllipsoidSpec) -> f64 {
    let [a1, a2, a3] = spec.c_sq();
    ((a1 + t) * (a2 + t) * (a3 + t)).sqrt()
}

/// Semi-axes `sqrt(c_j² + rho)` of the confocal ellipsoid labelled `rho`.
pub fn semi_axes(rho: f64, spec: &EllipsoidSpec) -> Result<Vec3> {
    if !(rho > -spec.min_c_sq()) {
        return Err(Error::domain(format!(
            "semi-axes need rho > -min(c_j^2), got {rho}"
        )));
    }
    Ok(semi_axes_unchecked(rho, spec))
}

fn semi_axes_unchecked(rho: f64, spec: &EllipsoidSpec) -> Vec3 {
    spec.c_sq().map(|a| (a + rho).sqrt())
}

/// Core volume fraction by both routes: the semi-axis product ratio and
/// `g(rho_c)/g(rho_e)`.
pub fn volume_fraction_routes(spec: &EllipsoidSpec) -> (f64, f64) {
    let lc = spec.core_semi_axes();
    let le = spec.exterior_semi_axes();
    let by_axes = (lc[0] / le[0]) * (lc[1] / le[1]) * (lc[2] / le[2]);
    let by_g = g_unchecked(spec.rho_c, spec) / g_unchecked(spec.rho_e, spec);
    (by_axes, by_g)
}

/// Core volume fraction `theta1`.
pub fn volume_fraction(spec: &EllipsoidSpec) -> f64 {
    let (by_axes, by_g) = volume_fraction_routes(spec);
    debug_assert!(
        (by_axes - by_g).abs() <= 1e-12 * by_axes,
        "volume fraction routes disagree: {by_axes} vs {by_g}"
    );
    by_axes
}

/// Sum of `x_j²/(c_j²+t)` minus one. Strictly decreasing in `t` between poles.
fn quadric(x: &Vec3, a: &Vec3, t: f64) -> f64 {
    x[0] * x[0] / (a[0] + t) + x[1] * x[1] / (a[1] + t) + x[2] * x[2] / (a[2] + t) - 1.0
}

fn quadric_dt(x: &Vec3, a: &Vec3, t: f64) -> f64 {
    -(0..3).map(|j| x[j] * x[j] / ((a[j] + t) * (a[j] + t))).sum::<f64>()
}

/// Largest real root of the monic cubic `t³ + b t² + c t + d`.
fn largest_cubic_root(b: f64, c: f64, d: f64) -> f64 {
    let shift = b / 3.0;
    let p = c - b * b / 3.0;
    let q = 2.0 * b * b * b / 27.0 - b * c / 3.0 + d;
    if p < 0.0 {
        let m = 2.0 * (-p / 3.0).sqrt();
        let arg = (3.0 * q / (p * m)).clamp(-1.0, 1.0);
        m * (arg.acos() / 3.0).cos() - shift
    } else {
        // Single real root (only reachable through rounding for our cubics).
        let disc = (q * q / 4.0 + p * p * p / 27.0).max(0.0).sqrt();
        (-q / 2.0 + disc).cbrt() + (-q / 2.0 - disc).cbrt() - shift
    }
}

/// The ellipsoidal coordinate `rho` of `x`: the root `rho > -c1²` of the
/// confocal-ellipsoid equation.
///
/// The cubic's largest root seeds a safeguarded Newton iteration on the
/// bracket `[|x|² - max c², |x|² - min c²]`. Where no root exceeds
/// `-min c²` (the origin, or points on the focal disc) the limit value
/// `-min c²` is returned.
pub fn rho_from_cartesian(x: &Vec3, spec: &EllipsoidSpec) -> Result<f64> {
    let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
    let a = spec.c_sq();
    if spec.is_sphere() {
        return Ok(r2 - a[0]);
    }
    let amin = spec.min_c_sq();
    let amax = a.iter().cloned().fold(f64::NEG_INFINITY, f64::max);

    let hi0 = r2 - amin;
    let lo0 = (r2 - amax).max(-amin);
    if lo0 == -amin {
        // F(-amin) may be finite if every coordinate along the shortest axes
        // vanishes; then there is no root above the pole.
        let mut at_pole = -1.0;
        let mut infinite = false;
        for j in 0..3 {
            if x[j] == 0.0 {
                continue;
            }
            let den = a[j] - amin;
            if den <= 0.0 {
                infinite = true;
                break;
            }
            at_pole += x[j] * x[j] / den;
        }
        if !infinite && at_pole <= 0.0 {
            return Ok(-amin);
        }
    }

    let b = a[0] + a[1] + a[2] - r2;
    let c = a[0] * a[1] + a[0] * a[2] + a[1] * a[2]
        - x[0] * x[0] * (a[1] + a[2])
        - x[1] * x[1] * (a[0] + a[2])
        - x[2] * x[2] * (a[0] + a[1]);
    let d = a[0] * a[1] * a[2]
        - x[0] * x[0] * a[1] * a[2]
        - x[1] * x[1] * a[0] * a[2]
        - x[2] * x[2] * a[0] * a[1];
    let guess = largest_cubic_root(b, c, d);

    let (mut lo, mut hi) = (lo0, hi0);
    if hi <= lo {
        return Ok(hi);
    }
    let mut t = if guess > lo && guess < hi {
        guess
    } else {
        0.5 * (lo + hi)
    };
    for _ in 0..200 {
        let f = quadric(x, &a, t);
        if f == 0.0 {
            return Ok(t);
        }
        if f > 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        let df = quadric_dt(x, &a, t);
        let mut next = t - f / df;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        let step = (next - t).abs();
        t = next;
        if step <= 1e-15 * t.abs().max(amin) || hi - lo <= 4.0 * f64::EPSILON * t.abs().max(amin) {
            return Ok(t);
        }
    }
    Err(Error::NonConvergence {
        what: "rho_from_cartesian",
        iterations: 200,
        last: quadric(x, &a, t),
        log: Vec::new(),
    })
}

/// Ellipsoidal coordinates with explicit octant signs, `true` meaning the
/// corresponding Cartesian coordinate is negative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllipsoidalPoint {
    pub rho: f64,
    pub mu: f64,
    pub nu: f64,
    #[serde(default)]
    pub octant: [bool; 3],
}

impl EllipsoidalPoint {
    /// Point in the positive octant.
    pub fn new(rho: f64, mu: f64, nu: f64) -> Self {
        EllipsoidalPoint {
            rho,
            mu,
            nu,
            octant: [false; 3],
        }
    }
}

fn require_chart(spec: &EllipsoidSpec) -> Result<()> {
    if spec.is_ordered_triaxial() {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "ellipsoidal (mu, nu) chart needs c1 < c2 < c3, got {:?}",
            spec.c
        )))
    }
}

/// Map ellipsoidal coordinates back to Cartesian space.
///
/// The closed chain `rho >= -c1² >= mu >= -c2² >= nu >= -c3²` is accepted so
/// that points on the coordinate planes (where the chart degenerates) are
/// reachable.
pub fn cartesian_from_ellipsoidal(pt: &EllipsoidalPoint, spec: &EllipsoidSpec) -> Result<Vec3> {
    require_chart(spec)?;
    let a = spec.c_sq();
    let (rho, mu, nu) = (pt.rho, pt.mu, pt.nu);
    if !(rho >= -a[0] && -a[0] >= mu && mu >= -a[1] && -a[1] >= nu && nu >= -a[2]) {
        return Err(Error::domain(format!(
            "coordinates violate rho >= -c1^2 >= mu >= -c2^2 >= nu >= -c3^2: ({rho}, {mu}, {nu})"
        )));
    }
    let tol = 1e-14 * (a[2] + rho.abs());
    let mut x = [0.0; 3];
    for j in 0..3 {
        let (k, l) = ((j + 1) % 3, (j + 2) % 3);
        let num = (a[j] + rho) * (a[j] + mu) * (a[j] + nu);
        let den = (a[j] - a[k]) * (a[j] - a[l]);
        let xj2 = num / den;
        if xj2 < -tol {
            return Err(Error::domain(format!(
                "x_{}^2 = {xj2} is negative",
                j + 1
            )));
        }
        let v = xj2.max(0.0).sqrt();
        x[j] = if pt.octant[j] { -v } else { v };
    }
    Ok(x)
}

/// Root of the confocal equation on the open interval `(lo, hi)` between two
/// poles, where the quadric decreases from `+inf` to `-inf`. Degenerate ends
/// (zero numerator at a pole) clamp to that pole.
fn root_between_poles(x: &Vec3, a: &Vec3, lo: f64, hi: f64) -> f64 {
    let (mut lo_t, mut hi_t) = (lo, hi);
    loop {
        let mid = 0.5 * (lo_t + hi_t);
        if mid <= lo_t || mid >= hi_t {
            return mid;
        }
        let f = quadric(x, a, mid);
        if f == 0.0 {
            return mid;
        }
        if f > 0.0 {
            lo_t = mid;
        } else {
            hi_t = mid;
        }
    }
}

/// Full ellipsoidal coordinates of `x` for an ordered triaxial family.
pub fn ellipsoidal_from_cartesian(x: &Vec3, spec: &EllipsoidSpec) -> Result<EllipsoidalPoint> {
    require_chart(spec)?;
    let a = spec.c_sq();
    let rho = rho_from_cartesian(x, spec)?;
    let mu = root_between_poles(x, &a, -a[1], -a[0]);
    let nu = root_between_poles(x, &a, -a[2], -a[1]);
    Ok(EllipsoidalPoint {
        rho,
        mu,
        nu,
        octant: [x[0] < 0.0, x[1] < 0.0, x[2] < 0.0],
    })
}

/// Gradient of the defining quadric of coordinate surface `t` at `x`
/// (up to the factor 2): `x_j / (c_j² + t)`.
pub fn quadric_normal(x: &Vec3, t: f64, spec: &EllipsoidSpec) -> Vec3 {
    let a = spec.c_sq();
    [x[0] / (a[0] + t), x[1] / (a[1] + t), x[2] / (a[2] + t)]
}

/// Unit outward normal of the confocal ellipsoid `rho` through `x`.
pub fn outward_normal(x: &Vec3, rho: f64, spec: &EllipsoidSpec) -> Vec3 {
    let n = quadric_normal(x, rho, spec);
    let norm = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
    n.map(|v| v / norm)
}

/// `∇rho` at `x` by implicit differentiation of the confocal equation.
pub fn grad_rho(x: &Vec3, rho: f64, spec: &EllipsoidSpec) -> Vec3 {
    let n = quadric_normal(x, rho, spec);
    let s = n[0] * n[0] + n[1] * n[1] + n[2] * n[2];
    n.map(|v| 2.0 * v / s)
}

/// Coordinate direction of the applied field, serialized as 1, 2 or 3.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Axis {
    X1,
    X2,
    X3,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X1, Axis::X2, Axis::X3];

    pub fn index(self) -> usize {
        match self {
            Axis::X1 => 0,
            Axis::X2 => 1,
            Axis::X3 => 2,
        }
    }

    pub fn unit(self) -> Vec3 {
        let mut e = [0.0; 3];
        e[self.index()] = 1.0;
        e
    }
}

impl TryFrom<u8> for Axis {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        match v {
            1 => Ok(Axis::X1),
            2 => Ok(Axis::X2),
            3 => Ok(Axis::X3),
            _ => Err(Error::invalid(format!("axis must be 1, 2 or 3, got {v}"))),
        }
    }
}

impl From<Axis> for u8 {
    fn from(a: Axis) -> u8 {
        a.index() as u8 + 1
    }
}

impl std::fmt::Display for Axis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "x{}", self.index() + 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Region {
    Core,
    CoreInterface,
    Coating,
    ExteriorInterface,
    Exterior,
}

/// Classify by `rho` with interface bands of half-width `tol`.
pub fn classify_rho(rho: f64, spec: &EllipsoidSpec, tol: f64) -> Region {
    let (rc, re) = (spec.rho_c, spec.rho_e);
    if rho < rc - tol {
        Region::Core
    } else if rho <= rc + tol {
        Region::CoreInterface
    } else if rho < re - tol {
        Region::Coating
    } else if rho <= re + tol {
        Region::ExteriorInterface
    } else {
        Region::Exterior
    }
}

pub fn classify_point(x: &Vec3, spec: &EllipsoidSpec, tol: f64) -> Result<Region> {
    if !(tol >= 0.0) {
        return Err(Error::invalid(format!("tolerance must be non-negative, got {tol}")));
    }
    let rho = rho_from_cartesian(x, spec)?;
    Ok(classify_rho(rho, spec, tol))
}
