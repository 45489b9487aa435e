//! Frenkel-Kontorova chains over a periodic substrate, across three scales.
//!
//! The crate is organised bottom-up:
//!
//! * [`potential`]: the Lennard-Jones pair potential, the periodic weak
//!   interaction `w` built from it, and the transition cost `p`.
//! * [`functions`]: truncated uniform partitions, piecewise-affine functions
//!   with constant tails, integer step functions and discrete chains.
//! * [`energies`]: discrete and continuum energies at the mesoscale and the
//!   two-scale level, the sharp-interface limit, gradients and the
//!   discrete/continuum energy gap.
//! * [`profile`]: the heteroclinic wall profile and recovery sequences for
//!   integer step functions.
//! * [`minimize`]: clamped-boundary energy minimization and translation
//!   normalization.
//! * [`harness`]: parameter sweeps and convergence experiments with
//!   CSV / JSON output.

pub mod energies;
pub mod error;
pub mod functions;
pub mod harness;
pub mod minimize;
pub mod potential;
pub mod profile;
pub mod quadrature;

pub use energies::{
    BoundaryData, EnergyKind, EnergyRecord, MesoscaleParams, ReferenceProfile, TwoScaleParams,
};
pub use error::{Error, Result};
pub use functions::{ChainState, PiecewiseAffine, StepFunction, UniformPartition};
pub use potential::{PairPotentialSpec, ValidationReport, WeakPotential};
pub use profile::{Direction, HeteroclinicProfile, Recovery, RecoveryBuild};
pub use minimize::{MinimizeConfig, MinimizeOutcome, NormalizationConfig};
