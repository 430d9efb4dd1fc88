//! Carlson's symmetric elliptic integral of the second kind.
//!
//! `R_D(x, y, z) = 3/2 ∫₀^∞ dt / ((t+z) sqrt((t+x)(t+y)(t+z)))`, evaluated by
//! the duplication theorem followed by a fifth-order Taylor correction
//! (B. C. Carlson, Numer. Algorithms 10 (1995)).

use crate::error::{Error, Result};

/// Relative truncation target for the duplication loop.
const RD_TOL: f64 = 1e-17;

pub fn rd(x: f64, y: f64, z: f64) -> Result<f64> {
    if !(x >= 0.0 && y >= 0.0 && z > 0.0) || x + y == 0.0 {
        return Err(Error::domain(format!(
            "R_D needs x, y >= 0 with x + y > 0 and z > 0, got ({x}, {y}, {z})"
        )));
    }
    if !(x.is_finite() && y.is_finite() && z.is_finite()) {
        return Err(Error::domain("R_D arguments must be finite"));
    }
    let (x0, y0) = (x, y);
    let (mut x, mut y, mut z) = (x, y, z);
    let a0 = (x + y + 3.0 * z) / 5.0;
    let mut a = a0;
    let q = (RD_TOL / 4.0).powf(-1.0 / 6.0)
        * (a0 - x).abs().max((a0 - y).abs()).max((a0 - z).abs());
    let mut sum = 0.0;
    let mut fac = 1.0;
    let mut scale = 1.0;
    while scale * q >= a.abs() {
        let (sx, sy, sz) = (x.sqrt(), y.sqrt(), z.sqrt());
        let lambda = sx * sy + sx * sz + sy * sz;
        sum += fac / (sz * (z + lambda));
        fac *= 0.25;
        scale *= 0.25;
        x = 0.25 * (x + lambda);
        y = 0.25 * (y + lambda);
        z = 0.25 * (z + lambda);
        a = 0.25 * (a + lambda);
    }
    let xd = (a0 - x0) * scale / a;
    let yd = (a0 - y0) * scale / a;
    let zd = -(xd + yd) / 3.0;
    let xy = xd * yd;
    let z2 = zd * zd;
    let e2 = xy - 6.0 * z2;
    let e3 = (3.0 * xy - 8.0 * z2) * zd;
    let e4 = 3.0 * (xy - z2) * z2;
    let e5 = xy * z2 * zd;
    let series = 1.0 - 3.0 * e2 / 14.0 + e3 / 6.0 + 9.0 * e2 * e2 / 88.0
        - 3.0 * e4 / 22.0
        - 9.0 * e2 * e3 / 52.0
        + 3.0 * e5 / 26.0;
    Ok(scale * series / (a * a.sqrt()) + 3.0 * sum)
}
