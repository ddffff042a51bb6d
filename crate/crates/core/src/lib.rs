//! Event logs whose events carry both timestamps and an explicit partial order.
//!
//! The crate derives and combines the two orders, checks that they agree,
//! coarsens time to a chosen granularity, applies activity-level tiebreakers,
//! groups cases into partial-order variants and draws k-sequentializations:
//! ordinary sequential logs that conventional process-mining tools accept.
//!
//! ```text
//! bytes --ingest--> EventLog --preprocess--> EventLog --variants------> [PartialOrderVariant]
//!                                                     \--sequentialize--> SimplifiedLog --export--> XES/CSV
//! ```
//!
//! Linear-extension counting and sampling are generic over the count type
//! (see [`ExtensionCount`]); the aliases below pick the usual instantiations.

pub mod count;
pub mod error;
pub mod export;
pub mod ingest;
pub mod model;
pub mod order;
pub mod preprocess;
pub mod relation;
pub mod sequentialize;
pub mod time;
pub mod variants;

mod graph;

pub use count::ExtensionCount;
pub use error::{Error, Result};
pub use model::{
    check_consistency, check_consistency_scoped, combined_order, derive_time_order, AttrValue,
    ConsistencyReport, ConsistencyScope, Event, EventId, EventLog, Violation,
};
pub use order::{OrderError, Poset};
pub use preprocess::{TimeAggregator, Tiebreaker};
pub use sequentialize::{SamplerConfig, SimplifiedLog};
pub use time::{Granularity, Timestamp};
pub use variants::{CasePoset, PartialOrderVariant};

/// Exact counts of any size.
pub type ExactCount = num_bigint::BigUint;
/// Fixed-width counts; overflow is reported as a resource limit.
pub type WideCount = u128;
/// Floating-point estimate for posets whose counts exceed every integer type.
pub type ApproxCount = f64;

/// Downset table with exact counts, used for uniform sampling.
pub type ExactExtensionTable = sequentialize::ExtensionTable<ExactCount>;
pub type WideExtensionTable = sequentialize::ExtensionTable<WideCount>;
