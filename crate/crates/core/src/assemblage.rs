//! Finite packings of aligned, scaled copies of one coated prototype in the
//! unit cell `[-1/2, 1/2]³`.
//!
//! Every copy shares the prototype's `θ₁` and `K_j`, hence its `σ*`, so the
//! matrix around them needs no change as more copies are added.
//!
//! Overlap is exact: dividing coordinates by the prototype's exterior
//! semi-axes maps every copy to a ball of radius equal to its scale.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::depolarization::k_factors;
use crate::effective::MaterialPair;
use crate::error::{Error, Result};
use crate::geometry::{volume_fraction, EllipsoidSpec, Vec3};
use crate::verifier::{ConductivityField, Grid};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlacedInclusion {
    pub center: Vec3,
    pub scale: f64,
}

impl PlacedInclusion {
    /// The copy as a spec of its own (`c λ`, `ρ λ²`).
    pub fn spec(&self, proto: &EllipsoidSpec) -> Result<EllipsoidSpec> {
        proto.scaled(self.scale)
    }

    fn mapped_center(&self, le: &Vec3) -> Vec3 {
        [self.center[0] / le[0], self.center[1] / le[1], self.center[2] / le[2]]
    }

    fn volume(&self, proto: &EllipsoidSpec) -> f64 {
        let le = proto.exterior_semi_axes();
        4.0 / 3.0 * std::f64::consts::PI * le[0] * le[1] * le[2] * self.scale.powi(3)
    }
}

fn mapped_distance(a: &PlacedInclusion, b: &PlacedInclusion, le: &Vec3) -> f64 {
    let (pa, pb) = (a.mapped_center(le), b.mapped_center(le));
    ((pa[0] - pb[0]).powi(2) + (pa[1] - pb[1]).powi(2) + (pa[2] - pb[2]).powi(2)).sqrt()
}

/// True when the exterior ellipsoids of `a` and `b` share interior points.
/// Tangent copies do not overlap.
pub fn overlap_test(a: &PlacedInclusion, b: &PlacedInclusion, proto: &EllipsoidSpec) -> bool {
    mapped_distance(a, b, &proto.exterior_semi_axes()) < a.scale + b.scale
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PackOptions {
    pub target_fill: f64,
    pub max_inclusions: usize,
    pub seed: u64,
    /// Ratio between consecutive scales.
    pub ladder_ratio: f64,
    pub levels: usize,
    /// Largest scale; `None` makes the largest exterior semi-axis 1/2.
    pub lambda0: Option<f64>,
    /// Random centers tried before giving up.
    pub max_attempts: usize,
}

impl Default for PackOptions {
    fn default() -> Self {
        PackOptions {
            target_fill: 0.5,
            max_inclusions: 1000,
            seed: 0,
            ladder_ratio: 0.7,
            levels: 8,
            lambda0: None,
            max_attempts: 20_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    TargetReached,
    MaxInclusions,
    LadderExhausted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assemblage {
    pub prototype: EllipsoidSpec,
    pub materials: MaterialPair,
    pub inclusions: Vec<PlacedInclusion>,
    /// Volume of all exterior ellipsoids over the cell volume.
    pub fill: f64,
    pub target_fill: f64,
    pub stop: StopReason,
}

impl Assemblage {
    /// Core volume fraction of every copy; scale-free, so shared by all.
    pub fn theta1(&self) -> f64 {
        volume_fraction(&self.prototype)
    }

    pub fn k_factors(&self) -> Result<Vec3> {
        k_factors(&self.prototype)
    }

    /// Pairwise non-overlap and containment in the unit cell.
    pub fn validate(&self) -> Result<()> {
        let le = self.prototype.exterior_semi_axes();
        for (i, a) in self.inclusions.iter().enumerate() {
            if (0..3).any(|d| a.center[d].abs() + a.scale * le[d] > 0.5) {
                return Err(Error::domain(format!("inclusion {i} crosses the cell boundary")));
            }
            for (j, b) in self.inclusions.iter().enumerate().skip(i + 1) {
                if overlap_test(a, b, &self.prototype) {
                    return Err(Error::domain(format!("inclusions {i} and {j} overlap")));
                }
            }
        }
        Ok(())
    }
}

/// Random sequential addition on a geometric scale ladder.
///
/// The first candidate is the cell center at the top scale. Each later
/// candidate center is uniform in the cell and receives the largest ladder
/// scale that keeps it inside the cell and clear of every placed copy.
pub fn pack(proto: &EllipsoidSpec, mat: &MaterialPair, opts: &PackOptions) -> Result<Assemblage> {
    mat.validate()?;
    if !(opts.target_fill > 0.0 && opts.target_fill < 1.0) {
        return Err(Error::invalid(format!("target fill must lie in (0, 1), got {}", opts.target_fill)));
    }
    if !(opts.ladder_ratio > 0.0 && opts.ladder_ratio < 1.0) || opts.levels == 0 {
        return Err(Error::invalid("scale ladder needs a ratio in (0, 1) and at least one level"));
    }
    if opts.max_inclusions == 0 {
        return Err(Error::invalid("max_inclusions must be positive"));
    }
    let le = proto.exterior_semi_axes();
    let lmax = le.iter().cloned().fold(0.0, f64::max);
    let lambda0 = opts.lambda0.unwrap_or(0.5 / lmax);
    if !(lambda0 > 0.0 && lambda0 * lmax <= 0.5) {
        return Err(Error::invalid(format!("top scale {lambda0} does not fit in the unit cell")));
    }
    let ladder: Vec<f64> = (0..opts.levels)
        .map(|k| lambda0 * opts.ladder_ratio.powi(k as i32))
        .collect();

    let mut inclusions = vec![PlacedInclusion {
        center: [0.0; 3],
        scale: lambda0,
    }];
    let mut fill = inclusions[0].volume(proto);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut attempts = 0;
    let stop = loop {
        if fill >= opts.target_fill {
            break StopReason::TargetReached;
        }
        if inclusions.len() >= opts.max_inclusions {
            break StopReason::MaxInclusions;
        }
        if attempts >= opts.max_attempts {
            break StopReason::LadderExhausted;
        }
        attempts += 1;
        let center: Vec3 = [
            rng.gen::<f64>() - 0.5,
            rng.gen::<f64>() - 0.5,
            rng.gen::<f64>() - 0.5,
        ];
        let probe = PlacedInclusion { center, scale: 0.0 };
        let mut room = (0..3)
            .map(|d| (0.5 - center[d].abs()) / le[d])
            .fold(f64::INFINITY, f64::min);
        for other in &inclusions {
            room = room.min(mapped_distance(&probe, other, &le) - other.scale);
            if room < ladder[ladder.len() - 1] {
                break;
            }
        }
        if let Some(&scale) = ladder.iter().find(|&&s| s <= room) {
            let inc = PlacedInclusion { center, scale };
            fill += inc.volume(proto);
            inclusions.push(inc);
        }
    };
    Ok(Assemblage {
        prototype: *proto,
        materials: *mat,
        inclusions,
        fill,
        target_fill: opts.target_fill,
        stop,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RasterReport {
    pub rasterized: usize,
    pub dropped: usize,
    pub dropped_volume: f64,
}

/// Rasterize every copy resolved by at least 4 cells across its shortest
/// exterior axis; smaller copies are skipped and reported. The grid should
/// cover the unit cell (half-width 1/2).
pub fn assemblage_to_field(
    asm: &Assemblage,
    sigma_star: f64,
    grid: &Grid,
    subsamples: usize,
) -> Result<(ConductivityField, RasterReport)> {
    let mut field = ConductivityField::uniform(*grid, asm.materials, sigma_star)?;
    let le = asm.prototype.exterior_semi_axes();
    let lmin = le.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut report = RasterReport {
        rasterized: 0,
        dropped: 0,
        dropped_volume: 0.0,
    };
    for inc in &asm.inclusions {
        if 2.0 * inc.scale * lmin < 4.0 * grid.h() {
            report.dropped += 1;
            report.dropped_volume += inc.volume(&asm.prototype);
            continue;
        }
        field.add_inclusion(&asm.prototype, inc.center, inc.scale, subsamples)?;
        report.rasterized += 1;
    }
    Ok((field, report))
}
