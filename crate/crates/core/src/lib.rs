//! Action-based multimodal texture rendering for a hydro-pneumatic haptic
//! ring.
//!
//! Recorded finger–surface interaction data ([`texdata`]) is turned into three
//! actuator command signals: a trapezoidal syringe displacement for softness
//! ([`softness`]), a display-temperature trajectory for the water-cooled tube
//! ([`thermal`]) and a binary valve wave for roughness ([`roughness`]).
//! [`plantsim`] replays those commands against lumped models of the pneumatic
//! and hydraulic circuits, and [`evalstats`] holds the matching-study
//! statistics.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod texdata;
pub mod softness;
pub mod thermal;
pub mod roughness;
pub mod commands;
pub mod plantsim;
pub mod evalstats;
pub mod pipeline;
pub mod cli;
