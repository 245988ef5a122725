//! Concrete weight oracles: arbitrary tables, nonsymmetric determinantal
//! point processes, matroid bases (partition and graphic), k-matchings with
//! exact perfect-matching counts, blow-ups, the paired hard instance, and the
//! Reed-Solomon lower-bound instance.

mod blowup;
mod dpp;
mod matching;
mod matroid;
mod paired;
mod partition_constrained;
mod reed_solomon;
mod spec;
mod table;

pub use blowup::{make_blowup, BlowupFamily};
pub use dpp::{make_dpp, DppFamily};
pub use matching::{make_matchings, MatchingFamily, MatchingSpec};
pub use matroid::{complete_graph_edges, make_matroid, MatroidFamily, MatroidSpec};
pub use paired::{make_paired, PairedFamily};
pub use partition_constrained::{make_partition_constrained, PartitionConstrainedFamily};
pub use reed_solomon::{make_reed_solomon, ReedSolomonFamily, ReedSolomonSpec};
pub use spec::FamilySpec;
pub use table::TableFamily;
