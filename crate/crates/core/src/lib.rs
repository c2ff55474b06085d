//! Flow-level discrete-event simulator for DAG task scheduling over
//! 802.11 wireless networks.
//!
//! Link rates derive from RF geometry (log-distance path loss and MCS
//! selection), channel contention follows the Bianchi DCF saturation
//! analysis, and hidden terminals degrade SINR at the receiver. Pluggable
//! schedulers (manual, round-robin, HEFT, CPOP) place DAG tasks onto nodes
//! from an interference-free network snapshot, and the engine replays the
//! resulting transfers with fair-share bandwidth and a recalculation
//! cascade whenever link activity changes.

pub mod engine;
pub mod experiments;
pub mod mac;
pub mod model;
pub mod rfphy;
pub mod routing;
pub mod scenario;
pub mod sched;
pub mod trace;

pub use engine::{run, InterferenceMode, RunReport, SimInput};
pub use model::{DagSpec, Network, NodeSpec, PlacementPlan, TaskState};
pub use routing::RoutingModel;
pub use sched::SchedulerKind;
