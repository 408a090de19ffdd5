//! Frozen-data approximation on level-cascade cells: penalized and obstacle
//! cell functions, their envelopes, and hitting-time diagnostics.

mod cell;
mod freeze;
mod hitting_gap;
mod replay;
mod scheme;

pub use cell::{cell_end, solve_cell, CellKind, CellMesh, CellSolution};
pub use freeze::{freeze_data, frozen_deviation, DeviationReport, FrozenCell, FrozenData, FrozenPath};
pub use hitting_gap::{hitting_gap_diagnostic, FirstHitRow, GapRow, HittingGapOptions, HittingGapReport};
pub use replay::{frozen_replay, ReplayOptions, ReplayReport};
pub use scheme::{
    correction, envelope_values, sandwich_check, EnvelopeReport, FrozenScheme, SandwichOptions, SandwichReport,
    SchemeCounters, SchemeOptions,
};
