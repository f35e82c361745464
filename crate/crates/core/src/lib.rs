//! Simulation kernels for the infinite-rate symbiotic branching frog model on
//! the real line.
//!
//! Wake frogs (type 1) follow the heat flow generated by `½∂²ₓ`; dormant frogs
//! (type 2) sit in piles. Wake mass reaching the leftmost dormant pile is
//! absorbed into it until the pile wakes, at which point the whole pile
//! (initial mass plus absorbed mass) turns into wake mass and the interface
//! moves on to the next pile.
//!
//! The crate is `no_std` (with `alloc`) so the kernels can be embedded; file
//! formats, the command-line runner and parallel orchestration live in the
//! `frogline` companion crate.
//!
//! Module map:
//!
//! * [`measures`]: atomic, gridded and hybrid finite measures.
//! * [`heat`]: implicit heat flow with absorption at a movable right barrier.
//! * [`colony`]: closed-form one-colony solutions and the wake-threshold law.
//! * [`sites`]: exact event-driven simulator for finitely many sites.
//! * [`frog`]: the continuous-space approximating process with its two samplers.
//! * [`ppp`]: the space-indexed Poisson point process description.
//! * [`stats`]: goodness-of-fit and martingale drift checks.
#![cfg_attr(not(feature = "std"), no_std)]
#![warn(missing_debug_implementations, rust_2018_idioms)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod colony;
pub mod error;
pub mod frog;
pub mod heat;
pub mod measures;
pub mod ppp;
pub mod rng;
pub mod sites;
pub mod stats;

pub use error::{Error, Result};
