//! Benchmarking workbench for predictive building controllers.
//!
//! A simulated thermal zone ([`emulator`]) is driven by controllers under
//! test ([`controllers`]) through a fixed planning protocol ([`coupling`]) over
//! configurable scenarios ([`scenarios`]). Each run is scored with key
//! performance indicators ([`kpi`]) which are then normalized and compared on
//! a radar chart ([`ranking`]).

// Negated comparisons are how NaN gets rejected along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod controllers;
pub mod coupling;
pub mod emulator;
pub mod kpi;
pub mod ranking;
pub mod scenarios;
