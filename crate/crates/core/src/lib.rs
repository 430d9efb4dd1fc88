//! Neutral coated-ellipsoid inclusions with a nonlinear (p-Laplacian) core.
//!
//! A confocal coated ellipsoid whose core obeys `J = σ₁|∇u|^{p−2}∇u` and whose
//! coating is linear with conductivity `σ₂` can be embedded in a matrix of
//! conductivity `σ*` without disturbing a uniform applied field. This crate
//! computes that `σ*` together with the full analytic potential, and verifies
//! neutrality with an independent finite-difference cell solver.

pub mod assemblage;
pub mod carlson;
pub mod config;
pub mod depolarization;
pub mod effective;
pub mod error;
pub mod field;
pub mod geometry;
pub mod matching;
pub mod quadrature;
pub mod verifier;

pub use depolarization::{depolarization, k_factor, k_factors, DepolarizationTriple};
pub use error::{Error, Result};
pub use geometry::{Axis, EllipsoidSpec, EllipsoidalPoint, Region, Vec3};
pub use matching::{solve_matching, MatchingProblem, MatchingSolution};
pub use effective::{effective_conductivity, effective_tensor, EffectiveResult, MaterialPair};
pub use field::AnalyticSolution;
