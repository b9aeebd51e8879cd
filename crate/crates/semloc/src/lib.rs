//! File formats, configuration and experiment orchestration around
//! [`semloc_core`].

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod io;
pub mod pipeline;
pub mod report;

pub use semloc_core as core;
