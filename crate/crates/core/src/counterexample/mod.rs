//! A convex compact without Lipschitz retractions, modelled in finite
//! dimensions.
//!
//! The infinite construction glues Euclidean subspaces of an `l_inf`-FDD of
//! `C[0,1]`. Here the FDD is replaced by explicit sup-norm blocks whose
//! Euclidean subspaces come from nets of the sphere. The finite model has
//! the same quantitative structure, but every finite compact is a Lipschitz
//! retract of its span, so only the growth of constants can be observed.

pub mod audit;
pub mod block;
pub mod bounds;
pub mod tube;

pub use audit::{retraction_audit, AuditConfig, AuditRecord, AuditReport};
pub use block::{build_block, build_block_from_net, dist_to_euclidean_ball, ModelBlock};
pub use bounds::{lind_bound, m_n, transfer};
pub use tube::{default_deltas, AssembledCompact, AssembledDescription, TubeSet};
