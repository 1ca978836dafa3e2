//! Variational one-electron states of two positive charges held inside an
//! octahedral cage of six vertex atoms.
//!
//! Lengths are in units of the cage half-diagonal `a`, energies in `e²/a`.
//! The static problem fixes the charges at `±l` on the axis; the dynamic
//! problem expands the separation `z` in Legendre polynomials and solves the
//! coupled electron and separation motion.

// `!(x > 0.0)` is used on purpose to reject NaN; index loops mirror the
// matrix algebra.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod assembly;
pub mod basis;
pub mod config;
pub mod eigensolver;
pub mod error;
pub mod geometry;
pub mod observables;
pub mod quadrature;

pub use assembly::{
    dynamic_matrix, static_electron_matrix, static_offset, DynamicProblem, MatrixPair,
    StaticProblem,
};
pub use basis::{AngularForm, BasisDescriptor, OrbitalParams, RadialModel};
pub use config::{CageConfig, MoleculeDomain, RadialKind, ZKinetic};
pub use eigensolver::{orthogonalize, solve, Orthogonalization, Spectrum};
pub use error::{Error, Result};
pub use geometry::{energy_unit_ev, kinetic_prefactor, units_to_ev, Charge, Octahedron, Point, Vertex};
pub use observables::{
    collision_table, filling_energy, level_error_estimate, molecule_sweep, projected_density, static_sweep,
    CollisionRow, ProjectedDensity, SweepRow, SweepTable,
};
pub use quadrature::{IntegralResult, QuadratureMethod, QuadratureSpec, VolumeRule, ZQuadratureSpec};
