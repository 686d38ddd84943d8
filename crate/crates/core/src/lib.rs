//! Decomposition of bounded-degree graphs into linear forests.
//!
//! A linear forest is a graph whose components are paths. This crate builds
//! such decompositions under per-edge colour lists by pairing every base
//! colour with two copies ("twins"), running an iterated random colouring
//! procedure that prevents twin-alternating cycles as it goes, and finishing
//! the residual graph from colours reserved up front. Exact brute-force
//! oracles and Monte Carlo estimators validate every probability formula the
//! procedure is tuned to.

pub mod colour;
pub mod corpus;
mod dsu;
pub mod finisher;
pub mod graph;
pub mod mc;
pub mod nibble;
pub mod oracle;
pub mod paths;
pub mod pipeline;
pub mod rng;
pub mod schedule;

pub use colour::{
    find_monochromatic_cycle, product_lists, verify_decomposition, verify_one_edge_colouring,
    BaseLists, Decomposition, DecompositionReport, PartialColouring, TwinColour, TwinLists,
};
pub use graph::{EdgeId, Graph, Vertex};
pub use nibble::{run_nibble, NibbleConfig, NibbleMode, Targets};
pub use pipeline::{run_pipeline, PipelineConfig, PipelineOutcome};
pub use rng::StreamKey;
pub use schedule::{build_schedule, check_schedule_bounds, Schedule, ScheduleParams};
