//! Embedding capacity of pairs of i.i.d. renewal point processes under a
//! causal bounded-delay matching constraint.
//!
//! The pieces:
//! - [`models`]: unit-mean interarrival families, samplers, renewal
//!   functions and characteristic functions;
//! - [`bgm`]: the Bounded Greedy Match algorithm, its Markov chain and an
//!   exhaustive oracle;
//! - [`capacity`]: the zero-order formula and the linear-system refinement;
//! - [`ordering`]: convex order, Lorenz curves and NBUE/NWUE classes;
//! - [`traces`]: the packet-trace validation pipeline;
//! - [`descriptor`]: textual model and method specifications.

pub mod bgm;
pub mod capacity;
pub mod descriptor;
pub mod error;
pub mod models;
pub mod ordering;
mod quad;
#[cfg(test)]
mod test_support;
pub mod traces;

pub use capacity::{CapacityEstimate, CapacityMethod};
pub use descriptor::{rng_from_seed, MethodSpec, ModelSpec, SimRng};
pub use error::{Error, Result};
pub use models::{
    renewal_function, renewal_function_numeric, renewal_integral, renewal_table, Dispersion, Family, InterarrivalModel,
    InterarrivalSampler, RenewalFunctionTable, RenewalMethod, RenewalSource,
};
