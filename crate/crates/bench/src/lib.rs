//! Fixtures shared by the benchmarks.

use fkup_core::functions::interpolate;
use fkup_core::{ChainState, PairPotentialSpec, ReferenceProfile, UniformPartition, WeakPotential};

pub fn default_potential() -> WeakPotential {
    WeakPotential::new(PairPotentialSpec::default()).expect("default potential")
}

/// The sampled unit reference profile on `[-halfwidth, halfwidth]`.
pub fn reference_chain(delta: f64, halfwidth: f64) -> ChainState {
    let p = UniformPartition::symmetric(delta, halfwidth).expect("window");
    let r = ReferenceProfile::unit();
    let g = interpolate(|x| r.eval(x), &p, (r.eval(p.left()), r.eval(p.right()))).expect("interpolant");
    ChainState::from_function(&g)
}
