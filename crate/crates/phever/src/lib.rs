//! Verification engine for para-Hermite Einstein (Walker) metrics.
//!
//! The crate builds explicit four-dimensional complex metrics from key
//! functions, computes their curvature with truncated Taylor jets, and checks
//! Einstein equations, Petrov-Penrose types, congruence optics and symmetry
//! algebras at sampled points.

pub mod jets;
pub mod expr;
pub mod quadrature;
pub mod geometry;
pub mod families;
pub mod classify;
pub mod verify;
