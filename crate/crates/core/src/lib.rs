//! Simulation and optimization engine for a spherical UAV intersection.
//!
//! The pipeline runs bottom-up:
//!
//! 1. [`geometry`] builds the 12-node layout and the 90 candidate paths
//!    (30 feasible entry–exit pairs × direct / short arc / long arc).
//! 2. [`conflict`] computes the pairwise conflict relation between paths.
//! 3. [`assignment`] picks a maximum-throughput conflict-free path for each
//!    UAV of a demand scenario.
//! 4. [`experiments`] sweeps every scenario for 2–6 UAVs and aggregates
//!    throughput tables.
//! 5. [`sensitivity`] runs seeded timing Monte Carlos on the residual
//!    conflicts.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assignment;
pub mod config;
pub mod conflict;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod output;
pub mod segment;
pub mod sensitivity;
pub mod vec3;

pub use assignment::{
    assign_paths_oracle, classify_scenario, solve_max_flow, solve_max_flow_weighted, Assignment,
    Demand, Scenario, ScenarioClass,
};
pub use config::Config;
pub use conflict::{
    build_conflict_graph, min_pair_distance, synchronized_min_distance, temporal_conflicts,
    temporal_min_distance, ConflictGraph, ConflictPolicy, ConflictTiming, MotionProfile,
    SharedNodeRule,
};
pub use error::{Error, Result};
pub use experiments::{
    enumerate_scenarios, run_table, top_conflicting_flows, ExperimentConfig, MetricsRow,
};
pub use geometry::{
    build_layout, candidate_paths, feasible_pairs, make_path, sample_path, validate_clearances,
    Circulation, ClearanceSpec, FlowDirection, NodeId, PathKind, PathSpec, SampledPath, Side,
    SphereLayout, ValidationReport,
};
pub use sensitivity::{
    fixed_lag_mc, fixed_lag_study, random_velocity_mc, travel_time_stats, ConflictHistogram,
    LagStudy, McConfig, TargetSet, TravelTimeSource,
};
pub use vec3::Vec3;
