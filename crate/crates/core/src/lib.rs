//! Minimum reflux and minimum reboiler vapor duty of multi-feed,
//! multi-product distillation columns for ideal mixtures with constant
//! relative volatility and constant molar overflow.
//!
//! The shortcut model solves each section's characteristic equation,
//! locates the pinch roots, and checks the feasibility of every feed and
//! sidedraw against the roots of its own stream equation. An equilibrium
//! stage simulator is included as an independent check.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod column;
pub mod export;
pub mod feasibility;
pub mod minreflux;
pub mod optimizer;
pub mod roots;
pub mod simulator;
pub mod specfile;
pub mod underwood;
