//! Steady fluid–structure interaction in a channel with an elastic
//! obstacle, solved on a fixed reference domain through a harmonic
//! extension flow map, together with the derivative of the
//! inflow-to-state map.

// Element kernels index several local arrays with one loop variable, and
// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord, clippy::type_complexity)]

pub mod error;
pub mod linalg;
pub mod mesh;
pub mod report;
pub mod fem;
pub mod geomap;
pub mod elasticity;
pub mod fluid;
pub mod fsi;
pub mod sensitivity;
