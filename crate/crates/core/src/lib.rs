//! Closed geodesic strings on warped-product cylinders `R x_f Y`.
//!
//! The crate finds closed geodesics in a free homotopy class `w` (winding
//! around a fiber geodesic), computes their Morse index and multiplicity,
//! and assembles the signed count `F = sum (-1)^index / mult` as an exact
//! rational. Metric families can be swept to watch how `F` behaves along a
//! path and what breaks where it changes.
//!
//! Module map:
//!
//! - [`expr`]: warp-profile expressions with symbolic derivatives.
//! - [`geometry`]: the warped metric, curvature, membership, uniform distance.
//! - [`loops`]: discrete loop energy, gradient, Hessian and solvers.
//! - [`census`]: string enumeration, indices and `F`.
//! - [`family`]: parameter sweeps and event detection.
//! - [`linalg`]: inertia counting and banded solves.
//!
//! The crate is `no_std` and needs only `alloc`.

#![no_std]
// `!(x > 0.0)` is used on purpose so NaN takes the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod census;
pub mod expr;
pub mod family;
pub mod geometry;
pub mod linalg;
pub mod loops;

pub use census::{CensusOptions, CensusReport, GeodesicString, Rational};
pub use expr::{ProfileExpr, ProfileFamily};
pub use family::{FamilyOptions, FamilyReport, MetricPath};
pub use geometry::{FiberModel, MembershipVerdict, WarpedMetric, Window};
pub use loops::{DiscreteLoop, HomotopyClass, SolveOptions, SolveOutcome, SolveStatus};
