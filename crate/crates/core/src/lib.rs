//! Numerical construction and verification of expanding gradient Ricci
//! solitons on multiple warped products `dt² + Σ g_i(t)² h_i`.
//!
//! The soliton equations are reduced to a polynomial flow in the variables
//! `(W, X_i, Y_i)`. Soliton trajectories leave the critical point
//! `(0, β e_1, β̂ e_1)` along its unstable manifold and converge to the
//! origin; Einstein trajectories stay on `{H = 1, Q = 0}` and converge to `E₊`.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod equilibria;
pub mod error;
pub mod fd;
pub mod integrate;
pub mod model;
pub mod reconstruct;
pub mod shoot;
pub mod verify;

pub use error::{Result, SolitonError};
