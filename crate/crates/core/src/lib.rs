//! Reachability-database planning toolkit for mobile manipulators.
//!
//! The pipeline runs from a sampled reachability database ([`reachdb`]),
//! through per-tray base regions ([`baseregion`]) and their intersections
//! ([`regiongeo`]), to a minimal robust sequence of base stops
//! ([`sequencer`]) that can be stress-tested under positioning error
//! ([`robustsim`]).

pub mod baseregion;
pub mod collision;
pub mod grid;
pub mod kinematics;
pub mod pipeline;
pub mod pose;
pub mod reachdb;
pub mod regiongeo;
pub mod robustsim;
pub mod scene;
pub mod sequencer;
pub mod svg;
