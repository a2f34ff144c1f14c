//! Numerics for harmonic functions on the unit ball of `R^n`.
//!
//! Functions are represented by zonal expansions `f(r x') = sum_k a_k r^k Z_k(<x', pole>)`.
//! On top of that representation the crate provides fractional derivatives,
//! the weighted harmonic Bergman kernels `Q_alpha`, integral means and the
//! mixed-norm functionals, level sets of radial profiles and the constructive
//! split `f = f1 + f2` used to bracket distances between nested spaces.
//!
//! Measure convention: `dσ` on the sphere is a probability measure and the
//! ball measure is `dx = r^{n-1} dr dσ`, so the ball has mass `1/n`.

pub mod cli;
pub mod error;
pub mod extremal;
pub mod harmonic_model;
pub mod interval;
pub mod norms;
pub mod quadrature;
pub mod special_fn;
pub mod verify;

pub use error::{HarmexError, Result};
pub use extremal::{DistancePair, Theorem};
pub use harmonic_model::{FunctionKind, TestFunctionSpec, ZonalExpansion, ZonalSeries};
pub use interval::IntervalSet;
pub use norms::{NormValue, RadialProfile, SpaceFamily, SpaceParams};
pub use quadrature::{RadialGrid, SphereRule};
