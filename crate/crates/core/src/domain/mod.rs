//! Abstract states, the instance order, join and reduce.

mod join;
mod morphism;
mod state;
mod unify;

pub use join::{join, join_states_raw};
pub use morphism::{equivalent, gamma_member, instance_of, is_instance, same_shape, state_morphism, Morphism};
pub use state::{
    beta, pair, AbsFrame, AbsHeapState, AbsObject, AbsValue, AbstractState, Location, Regions, ShapeTag, VarId,
};
pub(crate) use state::beta_unannotated;
pub use unify::{reduce, reduce_state, unify};

use num_bigint::BigUint;

use crate::graph::StateGraph;

/// Path-sum size plus one, with every abstract variable weighing 1.
pub fn abs_size(s: &AbstractState) -> Option<BigUint> {
    s.as_state().map(|st| StateGraph::of_abstract(st).size() + 1u32)
}
