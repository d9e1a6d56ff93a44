//! Singularities and envelopes of tangential families of plane curves.
//!
//! A *tangential family* is a one-parameter family of plane curves, each
//! tangent to a fixed support curve at the point where it is attached. This
//! crate computes with parameterizations `f(xi, t)` of such families:
//!
//! - [`expr`] / [`germ`]: parsing, evaluation and truncated Taylor jets of
//!   plane map germs, plus verification of the tangential-family condition.
//! - [`classify`]: extraction of the prenormal invariants `(k0, k1, alpha)`
//!   and classification into the two stable singularity classes (type I,
//!   the fold, and type II) by two independent routes — jet predicates and
//!   criminant branch geometry — which are cross-checked against each other.
//! - [`envelope`]: numeric tracing of the criminant set `det Df = 0`, its
//!   image (the envelope), and detection of cusps, self-intersections and
//!   self-tangencies with contact order.
//! - [`deform`]: parameter-dependent deformations, the beak-to-beak section
//!   census and the type-inducing deformation of degenerate germs.
//! - [`geodesic`]: geodesic tangential families on Riemannian surface
//!   charts (plane, sphere, ellipsoid) driving the same pipeline through
//!   black-box evaluators.

pub mod classify;
pub mod deform;
pub mod envelope;
pub mod error;
pub mod expr;
pub mod geodesic;
pub mod germ;
pub mod linalg;
pub mod report;
pub mod samples;
pub mod scalar;
pub mod series;

pub use error::{Error, Result};
