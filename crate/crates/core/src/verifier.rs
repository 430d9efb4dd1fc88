//! Finite-volume cell solver used to check neutrality independently of the
//! analytic construction.
//!
//! The box `[-L, L]³` is split into `n³` cubic cells with unknowns at cell
//! centers. Face conductivities are harmonic means of the two adjacent cells;
//! boundary faces carry `u = E x_j` at the face center, half a cell away.
//! Cells cut by an interface get a conductivity blended from sub-sampled
//! volume fractions (mean of the arithmetic and harmonic averages).
//!
//! Reductions are summed per `z`-slab and the slab totals are added in slab
//! order, so results are bit-identical for any thread count.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::effective::MaterialPair;
use crate::error::{Error, Result};
use crate::geometry::{classify_rho, rho_from_cartesian, Axis, EllipsoidSpec, Region, Vec3};

pub const DEFAULT_SUBSAMPLES: usize = 6;
pub const DEFAULT_LINEAR_TOL: f64 = 1e-10;
pub const DEFAULT_PICARD_TOL: f64 = 1e-8;
pub const DEFAULT_OMEGA: f64 = 0.5;
const MIN_OMEGA: f64 = 1.0 / 64.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub n: usize,
    pub half_width: f64,
}

impl Grid {
    pub fn new(n: usize, half_width: f64) -> Result<Self> {
        if n < 16 || !n.is_multiple_of(2) {
            return Err(Error::invalid(format!("grid needs an even n >= 16, got {n}")));
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::invalid(format!("box half-width must be positive, got {half_width}")));
        }
        Ok(Grid { n, half_width })
    }

    /// Box of half-width twice the largest exterior semi-axis.
    pub fn for_spec(spec: &EllipsoidSpec, n: usize) -> Result<Self> {
        let lmax = spec.exterior_semi_axes().iter().cloned().fold(0.0, f64::max);
        Grid::new(n, 2.0 * lmax)
    }

    pub fn h(&self) -> f64 {
        2.0 * self.half_width / self.n as f64
    }

    pub fn cells(&self) -> usize {
        self.n * self.n * self.n
    }

    pub fn coord(&self, i: usize) -> f64 {
        -self.half_width + (i as f64 + 0.5) * self.h()
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.n * (j + self.n * k)
    }

    pub fn ijk(&self, idx: usize) -> [usize; 3] {
        let n = self.n;
        [idx % n, (idx / n) % n, idx / (n * n)]
    }

    pub fn center(&self, idx: usize) -> Vec3 {
        self.ijk(idx).map(|i| self.coord(i))
    }

    pub fn cell_volume(&self) -> f64 {
        self.h().powi(3)
    }
}

/// Per-cell material description.
#[derive(Debug, Clone, PartialEq)]
pub struct ConductivityField {
    pub grid: Grid,
    pub materials: MaterialPair,
    pub sigma_matrix: f64,
    /// Region of the cell center.
    pub tags: Vec<Region>,
    pub core_fraction: Vec<f64>,
    pub coating_fraction: Vec<f64>,
    /// Matrix cells at least `2h` from every coating.
    pub clear: Vec<bool>,
}

impl ConductivityField {
    pub fn uniform(grid: Grid, materials: MaterialPair, sigma_matrix: f64) -> Result<Self> {
        materials.validate()?;
        if !(sigma_matrix.is_finite() && sigma_matrix > 0.0) {
            return Err(Error::invalid(format!("matrix conductivity must be positive, got {sigma_matrix}")));
        }
        let m = grid.cells();
        Ok(ConductivityField {
            grid,
            materials,
            sigma_matrix,
            tags: vec![Region::Exterior; m],
            core_fraction: vec![0.0; m],
            coating_fraction: vec![0.0; m],
            clear: vec![true; m],
        })
    }

    pub fn is_uniform(&self) -> bool {
        self.core_fraction.iter().chain(&self.coating_fraction).all(|&f| f == 0.0)
    }

    /// Core, coating and matrix volumes from the cell fractions.
    pub fn region_volumes(&self) -> [f64; 3] {
        let v = self.grid.cell_volume();
        let core: f64 = self.core_fraction.iter().sum();
        let coat: f64 = self.coating_fraction.iter().sum();
        let total = self.grid.cells() as f64;
        [core * v, coat * v, (total - core - coat) * v]
    }

    /// Number of cells whose center lies in the core, coating, or matrix.
    pub fn tag_counts(&self) -> [usize; 3] {
        let mut out = [0; 3];
        for t in &self.tags {
            match t {
                Region::Core | Region::CoreInterface => out[0] += 1,
                Region::Coating | Region::ExteriorInterface => out[1] += 1,
                Region::Exterior => out[2] += 1,
            }
        }
        out
    }

    /// Conductivity of cell `idx` given the current core coefficient.
    fn cell_conductivity(&self, idx: usize, core_coeff: f64) -> f64 {
        let fc = self.core_fraction[idx];
        let ft = self.coating_fraction[idx];
        let s2 = self.materials.sigma2;
        let sm = self.sigma_matrix;
        if fc == 0.0 && ft == 0.0 {
            return sm;
        }
        if fc == 1.0 {
            return core_coeff;
        }
        if ft == 1.0 {
            return s2;
        }
        let fm = (1.0 - fc - ft).max(0.0);
        let arith = fc * core_coeff + ft * s2 + fm * sm;
        let harm = 1.0 / (fc / core_coeff + ft / s2 + fm / sm);
        0.5 * (arith + harm)
    }

    fn has_core(&self, idx: usize) -> bool {
        self.core_fraction[idx] > 0.0
    }

    /// Rasterize one aligned copy of `proto`, scaled by `scale` and centered
    /// at `center`. Fractions from earlier inclusions are kept.
    pub fn add_inclusion(&mut self, proto: &EllipsoidSpec, center: Vec3, scale: f64, subsamples: usize) -> Result<()> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::invalid(format!("inclusion scale must be positive, got {scale}")));
        }
        let k_sub = subsamples.max(1);
        let grid = self.grid;
        let (n, h, lw) = (grid.n, grid.h(), grid.half_width);
        let le = proto.exterior_semi_axes();
        let margin = 3.0 * h;
        let mut lo = [0usize; 3];
        let mut hi = [0usize; 3];
        for d in 0..3 {
            let a = center[d] - scale * le[d] - margin;
            let b = center[d] + scale * le[d] + margin;
            lo[d] = (((a + lw) / h).floor().max(0.0) as usize).min(n);
            hi[d] = (((b + lw) / h).ceil().max(0.0) as usize).min(n);
        }
        if (0..3).any(|d| lo[d] >= hi[d]) {
            return Ok(());
        }

        let (rc, re) = (proto.rho_c(), proto.rho_e());
        let code = |x: Vec3| -> Result<(u8, f64)> {
            let y = [
                (x[0] - center[0]) / scale,
                (x[1] - center[1]) / scale,
                (x[2] - center[2]) / scale,
            ];
            let rho = rho_from_cartesian(&y, proto)?;
            let c = if rho < rc {
                0
            } else if rho < re {
                1
            } else {
                2
            };
            Ok((c, rho))
        };

        // Region codes at cell corners. A cell whose corners agree is taken
        // as pure: exact inside the convex ellipsoids, and outside it misses
        // only slivers where a surface pokes through a face between corners.
        let cn = [hi[0] - lo[0] + 1, hi[1] - lo[1] + 1, hi[2] - lo[2] + 1];
        let corner_pos = |i: usize| -lw + i as f64 * h;
        let corners: Vec<u8> = (0..cn[2])
            .into_par_iter()
            .map(|kk| -> Result<Vec<u8>> {
                let mut out = Vec::with_capacity(cn[0] * cn[1]);
                for jj in 0..cn[1] {
                    for ii in 0..cn[0] {
                        let x = [corner_pos(lo[0] + ii), corner_pos(lo[1] + jj), corner_pos(lo[2] + kk)];
                        out.push(code(x)?.0);
                    }
                }
                Ok(out)
            })
            .collect::<Result<Vec<_>>>()?
            .concat();
        let corner = |ii: usize, jj: usize, kk: usize| corners[ii + cn[0] * (jj + cn[1] * kk)];

        let tol = proto.default_interface_tol();
        let updates: Vec<(usize, f64, f64, Region, bool)> = (lo[2]..hi[2])
            .into_par_iter()
            .map(|k| -> Result<Vec<_>> {
                let mut out = Vec::new();
                for j in lo[1]..hi[1] {
                    for i in lo[0]..hi[0] {
                        let idx = grid.index(i, j, k);
                        let x = grid.center(idx);
                        let (_, rho) = code(x)?;
                        let tag = classify_rho(rho, proto, tol);
                        let (ii, jj, kk) = (i - lo[0], j - lo[1], k - lo[2]);
                        let c0 = corner(ii, jj, kk);
                        let pure = (0..8).all(|m| corner(ii + (m & 1), jj + ((m >> 1) & 1), kk + (m >> 2)) == c0);
                        let (fc, ft) = if pure {
                            match c0 {
                                0 => (1.0, 0.0),
                                1 => (0.0, 1.0),
                                _ => (0.0, 0.0),
                            }
                        } else {
                            let mut counts = [0usize; 3];
                            let base = [x[0] - 0.5 * h, x[1] - 0.5 * h, x[2] - 0.5 * h];
                            let step = h / k_sub as f64;
                            for c in 0..k_sub {
                                for b in 0..k_sub {
                                    for a in 0..k_sub {
                                        let y = [
                                            base[0] + (a as f64 + 0.5) * step,
                                            base[1] + (b as f64 + 0.5) * step,
                                            base[2] + (c as f64 + 0.5) * step,
                                        ];
                                        counts[code(y)?.0 as usize] += 1;
                                    }
                                }
                            }
                            let total = (k_sub * k_sub * k_sub) as f64;
                            (counts[0] as f64 / total, counts[1] as f64 / total)
                        };
                        // distance to the outer surface, bounded below by the
                        // smallest semi-axis gap of the confocal shell through x
                        let clear = rho > re
                            && (0..3)
                                .map(|d| ((proto.c_sq()[d] + rho).sqrt() - le[d]) * scale)
                                .fold(f64::INFINITY, f64::min)
                                >= 2.0 * h;
                        if fc > 0.0 || ft > 0.0 || !clear || tag != Region::Exterior {
                            out.push((idx, fc, ft, tag, clear));
                        }
                    }
                }
                Ok(out)
            })
            .collect::<Result<Vec<_>>>()?
            .concat();

        for (idx, fc, ft, tag, clear) in updates {
            let core = (self.core_fraction[idx] + fc).min(1.0);
            let coat = (self.coating_fraction[idx] + ft).min(1.0 - core);
            self.core_fraction[idx] = core;
            self.coating_fraction[idx] = coat;
            if tag != Region::Exterior {
                self.tags[idx] = tag;
            }
            self.clear[idx] &= clear;
        }
        Ok(())
    }
}

/// Rasterize the prototype centered in `grid`, with matrix conductivity
/// `sigma_matrix` (σ* for the neutral configuration).
pub fn rasterize(
    spec: &EllipsoidSpec,
    mat: &MaterialPair,
    sigma_matrix: f64,
    grid: &Grid,
    subsamples: usize,
) -> Result<ConductivityField> {
    let le = spec.exterior_semi_axes();
    let need = 4.0 * grid.h();
    if let Some(d) = (0..3).find(|&d| le[d] + need > grid.half_width) {
        return Err(Error::invalid(format!(
            "inclusion semi-axis {} along x{} leaves less than 4h = {need} to the box wall at {}",
            le[d],
            d + 1,
            grid.half_width
        )));
    }
    let mut field = ConductivityField::uniform(*grid, *mat, sigma_matrix)?;
    field.add_inclusion(spec, [0.0; 3], 1.0, subsamples)?;
    Ok(field)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    /// Picard tolerance on the relative change between iterates.
    pub tol: f64,
    /// Relative residual target of each linear solve.
    pub linear_tol: f64,
    /// Picard sweep cap.
    pub max_iter: usize,
    /// Conjugate-gradient cap per linear solve; `None` picks `20 n + 500`.
    pub max_linear_iter: Option<usize>,
    pub omega: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: DEFAULT_PICARD_TOL,
            linear_tol: DEFAULT_LINEAR_TOL,
            max_iter: 200,
            max_linear_iter: None,
            omega: DEFAULT_OMEGA,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSolution {
    pub grid: Grid,
    pub axis: Axis,
    pub e_field: f64,
    /// Potential at cell centers, `x` fastest.
    pub u: Vec<f64>,
    /// Linear (`p = 2`): relative CG residual per iteration. Nonlinear:
    /// relative Picard update `‖ũ − u‖/‖ũ‖` per sweep.
    pub log: Vec<f64>,
    /// CG iterations (`p = 2`) or Picard sweeps.
    pub iterations: usize,
    pub linear_iterations: usize,
    /// Damping factor in force at the last sweep.
    pub omega: f64,
    pub converged: bool,
}

impl CellSolution {
    /// Discrete maximum principle: every value lies within the extrema of
    /// the boundary data `E x_j`.
    pub fn within_boundary_extrema(&self) -> bool {
        let bound = self.e_field.abs() * self.grid.half_width;
        let slack = 1e-12 * bound.max(f64::MIN_POSITIVE);
        self.u.iter().all(|v| v.abs() <= bound + slack)
    }
}

/// Face coefficients of the linear system with `x`-, `y`-, `z`-faces stored
/// separately; boundary faces hold `2σ` of their cell.
struct System {
    n: usize,
    fx: Vec<f64>,
    fy: Vec<f64>,
    fz: Vec<f64>,
    diag: Vec<f64>,
    b: Vec<f64>,
}

impl System {
    fn fxi(&self, i: usize, j: usize, k: usize) -> usize {
        i + (self.n + 1) * (j + self.n * k)
    }
    fn fyi(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.n * (j + (self.n + 1) * k)
    }
    fn fzi(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.n * (j + self.n * k)
    }

    fn face(&self, d: usize, f: [usize; 3]) -> f64 {
        match d {
            0 => self.fx[self.fxi(f[0], f[1], f[2])],
            1 => self.fy[self.fyi(f[0], f[1], f[2])],
            _ => self.fz[self.fzi(f[0], f[1], f[2])],
        }
    }

    fn assemble(grid: &Grid, cond: &[f64], e: f64, axis: Axis) -> System {
        let n = grid.n;
        let n1 = n + 1;
        let harmonic = |a: f64, b: f64| if a + b > 0.0 { 2.0 * a * b / (a + b) } else { 0.0 };
        let mut sys = System {
            n,
            fx: vec![0.0; n1 * n * n],
            fy: vec![0.0; n1 * n * n],
            fz: vec![0.0; n1 * n * n],
            diag: vec![0.0; n * n * n],
            b: vec![0.0; n * n * n],
        };
        for k in 0..n {
            for j in 0..n {
                for i in 0..=n {
                    let v = if i == 0 {
                        2.0 * cond[grid.index(0, j, k)]
                    } else if i == n {
                        2.0 * cond[grid.index(n - 1, j, k)]
                    } else {
                        harmonic(cond[grid.index(i - 1, j, k)], cond[grid.index(i, j, k)])
                    };
                    let f = sys.fxi(i, j, k);
                    sys.fx[f] = v;
                }
            }
        }
        for k in 0..n {
            for j in 0..=n {
                for i in 0..n {
                    let v = if j == 0 {
                        2.0 * cond[grid.index(i, 0, k)]
                    } else if j == n {
                        2.0 * cond[grid.index(i, n - 1, k)]
                    } else {
                        harmonic(cond[grid.index(i, j - 1, k)], cond[grid.index(i, j, k)])
                    };
                    let f = sys.fyi(i, j, k);
                    sys.fy[f] = v;
                }
            }
        }
        for k in 0..=n {
            for j in 0..n {
                for i in 0..n {
                    let v = if k == 0 {
                        2.0 * cond[grid.index(i, j, 0)]
                    } else if k == n {
                        2.0 * cond[grid.index(i, j, n - 1)]
                    } else {
                        harmonic(cond[grid.index(i, j, k - 1)], cond[grid.index(i, j, k)])
                    };
                    let f = sys.fzi(i, j, k);
                    sys.fz[f] = v;
                }
            }
        }

        let lw = grid.half_width;
        let ax = axis.index();
        for k in 0..n {
            for j in 0..n {
                for i in 0..n {
                    let c = grid.index(i, j, k);
                    let ijk = [i, j, k];
                    let mut d = 0.0;
                    let mut b = 0.0;
                    for dir in 0..3 {
                        let lo_face = ijk;
                        let mut hi_face = ijk;
                        hi_face[dir] += 1;
                        let wl = sys.face(dir, lo_face);
                        let wh = sys.face(dir, hi_face);
                        d += wl + wh;
                        for (w, on_wall, wall) in [(wl, ijk[dir] == 0, -lw), (wh, ijk[dir] == n - 1, lw)] {
                            if on_wall {
                                let mut x = grid.center(c);
                                x[dir] = wall;
                                b += w * e * x[ax];
                            }
                        }
                    }
                    sys.diag[c] = d;
                    sys.b[c] = b;
                }
            }
        }
        sys
    }

    fn apply(&self, u: &[f64], out: &mut [f64]) {
        let n = self.n;
        let n2 = n * n;
        out.par_chunks_mut(n2).enumerate().for_each(|(k, slab)| {
            for j in 0..n {
                for i in 0..n {
                    let c = i + n * (j + n * k);
                    let mut acc = self.diag[c] * u[c];
                    if i > 0 {
                        acc -= self.fx[self.fxi(i, j, k)] * u[c - 1];
                    }
                    if i + 1 < n {
                        acc -= self.fx[self.fxi(i + 1, j, k)] * u[c + 1];
                    }
                    if j > 0 {
                        acc -= self.fy[self.fyi(i, j, k)] * u[c - n];
                    }
                    if j + 1 < n {
                        acc -= self.fy[self.fyi(i, j + 1, k)] * u[c + n];
                    }
                    if k > 0 {
                        acc -= self.fz[self.fzi(i, j, k)] * u[c - n2];
                    }
                    if k + 1 < n {
                        acc -= self.fz[self.fzi(i, j, k + 1)] * u[c + n2];
                    }
                    slab[i + n * j] = acc;
                }
            }
        });
    }
}

fn dot(a: &[f64], b: &[f64], chunk: usize) -> f64 {
    let partial: Vec<f64> = a
        .par_chunks(chunk)
        .zip(b.par_chunks(chunk))
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>())
        .collect();
    partial.iter().sum()
}

/// Jacobi-preconditioned conjugate gradients from the initial guess in `u`.
/// Returns the iteration count and appends relative residuals to `log`.
fn pcg(sys: &System, u: &mut [f64], tol: f64, max_iter: usize, log: &mut Vec<f64>) -> Result<usize> {
    let chunk = sys.n * sys.n;
    let m = u.len();
    let bnorm = dot(&sys.b, &sys.b, chunk).sqrt();
    let mut r = vec![0.0; m];
    sys.apply(u, &mut r);
    r.par_chunks_mut(chunk)
        .zip(sys.b.par_chunks(chunk))
        .for_each(|(r, b)| r.iter_mut().zip(b).for_each(|(r, b)| *r = b - *r));
    let target = if bnorm > 0.0 { tol * bnorm } else { 0.0 };
    let scale = if bnorm > 0.0 { bnorm } else { 1.0 };
    let mut rnorm = dot(&r, &r, chunk).sqrt();
    if rnorm <= target {
        return Ok(0);
    }
    let mut z: Vec<f64> = r.iter().zip(&sys.diag).map(|(r, d)| r / d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; m];
    let mut rz = dot(&r, &z, chunk);
    for it in 1..=max_iter {
        sys.apply(&p, &mut ap);
        let alpha = rz / dot(&p, &ap, chunk);
        u.par_chunks_mut(chunk)
            .zip(r.par_chunks_mut(chunk))
            .zip(p.par_chunks(chunk).zip(ap.par_chunks(chunk)))
            .for_each(|((u, r), (p, ap))| {
                for t in 0..u.len() {
                    u[t] += alpha * p[t];
                    r[t] -= alpha * ap[t];
                }
            });
        rnorm = dot(&r, &r, chunk).sqrt();
        log.push(rnorm / scale);
        if rnorm <= target {
            return Ok(it);
        }
        z.par_chunks_mut(chunk)
            .zip(r.par_chunks(chunk).zip(sys.diag.par_chunks(chunk)))
            .for_each(|(z, (r, d))| z.iter_mut().zip(r.iter().zip(d)).for_each(|(z, (r, d))| *z = r / d));
        let rz_new = dot(&r, &z, chunk);
        let beta = rz_new / rz;
        rz = rz_new;
        p.par_chunks_mut(chunk)
            .zip(z.par_chunks(chunk))
            .for_each(|(p, z)| p.iter_mut().zip(z).for_each(|(p, z)| *p = z + beta * *p));
    }
    Err(Error::NonConvergence {
        what: "conjugate gradient",
        iterations: max_iter,
        last: rnorm / scale,
        log: log.clone(),
    })
}

/// Central-difference gradient at a cell center; walls use the boundary
/// value half a cell away.
fn cell_gradient(grid: &Grid, u: &[f64], idx: usize, e: f64, axis: Axis) -> Vec3 {
    let n = grid.n;
    let h = grid.h();
    let ijk = grid.ijk(idx);
    let x = grid.center(idx);
    let stride = [1, n, n * n];
    let mut g = [0.0; 3];
    for d in 0..3 {
        let (up, dup) = if ijk[d] + 1 < n {
            (u[idx + stride[d]], h)
        } else {
            let mut y = x;
            y[d] = grid.half_width;
            (e * y[axis.index()], 0.5 * h)
        };
        let (dn, ddn) = if ijk[d] > 0 {
            (u[idx - stride[d]], h)
        } else {
            let mut y = x;
            y[d] = -grid.half_width;
            (e * y[axis.index()], 0.5 * h)
        };
        g[d] = (up - dn) / (dup + ddn);
    }
    g
}

fn conductivities(field: &ConductivityField, u: Option<&[f64]>, e: f64, axis: Axis) -> Vec<f64> {
    let m = &field.materials;
    let grid = &field.grid;
    let eps = 1e-8 * e.abs() / grid.half_width;
    (0..grid.cells())
        .into_par_iter()
        .map(|idx| {
            let core = match u {
                Some(u) if m.p != 2.0 && field.has_core(idx) => {
                    let g = cell_gradient(grid, u, idx, e, axis);
                    let s = g[0] * g[0] + g[1] * g[1] + g[2] * g[2] + eps * eps;
                    m.sigma1 * s.powf(0.5 * (m.p - 2.0))
                }
                _ if m.p != 2.0 => m.sigma1 * (e * e + eps * eps).powf(0.5 * (m.p - 2.0)),
                _ => m.sigma1,
            };
            field.cell_conductivity(idx, core)
        })
        .collect()
}

/// Solve the cell problem with `u = E x_j` on the walls.
///
/// `p = 2` is one conjugate-gradient solve. Otherwise damped Picard: freeze
/// the core coefficient at the current iterate, solve, and move a fraction
/// `ω` toward the new solution; `ω` halves whenever the update grows.
pub fn solve_cell(field: &ConductivityField, e: f64, axis: Axis, opts: &SolveOptions) -> Result<CellSolution> {
    if !(opts.tol > 0.0 && opts.linear_tol > 0.0) {
        return Err(Error::invalid("solver tolerances must be positive"));
    }
    if !(opts.omega > 0.0 && opts.omega <= 1.0) {
        return Err(Error::invalid(format!("damping must lie in (0, 1], got {}", opts.omega)));
    }
    if !e.is_finite() {
        return Err(Error::invalid("applied field must be finite"));
    }
    let grid = field.grid;
    let ax = axis.index();
    let mut u: Vec<f64> = (0..grid.cells()).map(|idx| e * grid.center(idx)[ax]).collect();
    let max_lin = opts.max_linear_iter.unwrap_or(20 * grid.n + 500);
    let mut sol = CellSolution {
        grid,
        axis,
        e_field: e,
        u: Vec::new(),
        log: Vec::new(),
        iterations: 0,
        linear_iterations: 0,
        omega: opts.omega,
        converged: true,
    };
    if e == 0.0 {
        sol.u = u;
        return Ok(sol);
    }

    if field.materials.p == 2.0 || field.core_fraction.iter().all(|&f| f == 0.0) {
        let cond = conductivities(field, None, e, axis);
        let sys = System::assemble(&grid, &cond, e, axis);
        let its = pcg(&sys, &mut u, opts.linear_tol, max_lin, &mut sol.log)?;
        sol.iterations = its;
        sol.linear_iterations = its;
        sol.u = u;
        return Ok(sol);
    }

    let chunk = grid.n * grid.n;
    let mut omega = opts.omega;
    let mut prev = f64::INFINITY;
    for sweep in 1..=opts.max_iter {
        let cond = conductivities(field, Some(&u), e, axis);
        let sys = System::assemble(&grid, &cond, e, axis);
        let mut next = u.clone();
        let mut lin_log = Vec::new();
        sol.linear_iterations += pcg(&sys, &mut next, opts.linear_tol, max_lin, &mut lin_log)?;
        let diff: Vec<f64> = next.iter().zip(&u).map(|(a, b)| a - b).collect();
        let change = dot(&diff, &diff, chunk).sqrt() / dot(&next, &next, chunk).sqrt();
        sol.log.push(change);
        if change > prev {
            omega = (0.5 * omega).max(MIN_OMEGA);
        }
        prev = change;
        u.iter_mut().zip(&diff).for_each(|(u, d)| *u += omega * d);
        sol.iterations = sweep;
        sol.omega = omega;
        if change < opts.tol {
            sol.u = u;
            return Ok(sol);
        }
    }
    Err(Error::NonConvergence {
        what: "Picard iteration",
        iterations: opts.max_iter,
        last: prev,
        log: sol.log,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Uniformity {
    /// `max |u − E x_j| / (|E| L)` over clear matrix cells.
    pub max_u: f64,
    /// `max ‖∇u − E e_j‖ / |E|` over clear matrix cells off the walls.
    pub max_grad: f64,
    pub nodes: usize,
}

/// Disturbance of the applied field in matrix cells at least `2h` from every
/// coating.
pub fn exterior_uniformity(sol: &CellSolution, field: &ConductivityField) -> Uniformity {
    let grid = &sol.grid;
    let e = sol.e_field;
    let ax = sol.axis.index();
    let n = grid.n;
    let norm_e = if e != 0.0 { e.abs() } else { 1.0 };
    let mut out = Uniformity {
        max_u: 0.0,
        max_grad: 0.0,
        nodes: 0,
    };
    for idx in 0..grid.cells() {
        if !field.clear[idx] {
            continue;
        }
        out.nodes += 1;
        let x = grid.center(idx);
        out.max_u = out.max_u.max((sol.u[idx] - e * x[ax]).abs() / (norm_e * grid.half_width));
        let ijk = grid.ijk(idx);
        if ijk.iter().all(|&i| i > 0 && i + 1 < n) {
            let mut g = cell_gradient(grid, &sol.u, idx, e, sol.axis);
            g[ax] -= e;
            let dev = (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt();
            out.max_grad = out.max_grad.max(dev / norm_e);
        }
    }
    out
}

/// Volume-averaged flux `⟨σ ∂u/∂x_j⟩ / E`, from the current through each
/// plane of `x_j`-faces averaged over all planes.
pub fn effective_from_cell(sol: &CellSolution, field: &ConductivityField) -> f64 {
    let grid = &sol.grid;
    let (n, h) = (grid.n, grid.h());
    let e = sol.e_field;
    let d = sol.axis.index();
    let cond = conductivities(field, Some(&sol.u), e, sol.axis);
    let sys = System::assemble(grid, &cond, e, sol.axis);
    let (o1, o2) = ((d + 1) % 3, (d + 2) % 3);
    let mut total = 0.0;
    for plane in 0..=n {
        let mut current = 0.0;
        for b in 0..n {
            for a in 0..n {
                let mut f = [0usize; 3];
                f[d] = plane;
                f[o1] = a;
                f[o2] = b;
                let w = sys.face(d, f);
                let cell = |m: usize| {
                    let mut c = f;
                    c[d] = m;
                    grid.index(c[0], c[1], c[2])
                };
                let flux = if plane == 0 {
                    let c = cell(0);
                    let mut x = grid.center(c);
                    x[d] = -grid.half_width;
                    w * (sol.u[c] - e * x[d]) / h
                } else if plane == n {
                    let c = cell(n - 1);
                    let mut x = grid.center(c);
                    x[d] = grid.half_width;
                    w * (e * x[d] - sol.u[c]) / h
                } else {
                    w * (sol.u[cell(plane)] - sol.u[cell(plane - 1)]) / h
                };
                current += flux * h * h;
            }
        }
        total += current;
    }
    let area = 4.0 * grid.half_width * grid.half_width;
    total / (n + 1) as f64 / (area * e)
}

/// Summary written next to a verification run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerifyMetrics {
    pub uniformity_max_u: f64,
    pub uniformity_max_grad: f64,
    pub sigma_eff: f64,
    pub iterations: usize,
    pub converged: bool,
}

pub fn metrics(sol: &CellSolution, field: &ConductivityField) -> VerifyMetrics {
    let uni = exterior_uniformity(sol, field);
    VerifyMetrics {
        uniformity_max_u: uni.max_u,
        uniformity_max_grad: uni.max_grad,
        sigma_eff: effective_from_cell(sol, field),
        iterations: sol.iterations,
        converged: sol.converged,
    }
}

/// Write `index,x,y,z,u` rows for every cell center.
pub fn write_field_csv<W: Write>(sol: &CellSolution, mut w: W) -> std::io::Result<()> {
    writeln!(w, "index,x,y,z,u")?;
    for (idx, u) in sol.u.iter().enumerate() {
        let x = sol.grid.center(idx);
        writeln!(w, "{idx},{:.16e},{:.16e},{:.16e},{:.16e}", x[0], x[1], x[2], u)?;
    }
    Ok(())
}
