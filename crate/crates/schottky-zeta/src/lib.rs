//! Analytic and arithmetic invariants of marked Schottky groups.
//!
//! The crate computes, at user-selected precision:
//!
//! - multipliers and fixed points of Möbius words ([`moebius`], [`words`]);
//! - infinite products over primitive conjugacy classes, Ruelle zeta values,
//!   their modified variants and the ratio identity linking the two
//!   ([`products`]);
//! - normalized holomorphic 1-forms and the period matrix by contour
//!   integration ([`periods`]);
//! - Eichler cocycles, weight-2k Poincaré series and the duality-normalized
//!   basis of k-differentials ([`eichler`]);
//! - exact integer/rational power series for the Tate curve and the
//!   telescoping product identity ([`tate`]);
//! - truncated multivariate expansions of word multipliers and products over
//!   the deformation ring in y_1..y_g ([`arithdefo`]).
//!
//! All numeric values are MPFR/MPC floats at a fixed bit count; identical
//! inputs and precision give bit-identical results regardless of thread
//! count, because every parallel reduction is re-sorted into canonical order
//! before accumulation.

pub mod arithdefo;
pub mod eichler;
pub mod error;
pub mod groupspec;
pub mod moebius;
pub mod periods;
pub mod prec;
pub mod products;
pub mod samples;
pub mod tate;
pub mod verify;
pub mod words;

pub use error::{Error, Result};
