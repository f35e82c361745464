//! Command-line front end for `frogline-core`: configuration, replica
//! orchestration, artifacts and the acceptance battery.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acceptance;
pub mod cli;
pub mod commands;
pub mod config;
pub mod io;
pub mod runner;
