//! Numerical differential geometry for spacelike graphs in pseudo-Riemannian
//! product manifolds `(Sigma_1 x Sigma_2, g_1 - g_2)`.
//!
//! The crate builds graph immersions `f: Sigma_1 -> Sigma_2`, extracts
//! singular values, adapted frames and the hyperbolic angle, computes the
//! second fundamental form and curvature of both factors, verifies a family
//! of pointwise identities and inequalities by evaluating both sides through
//! independent computational paths, reproduces an explicit constant-mean-
//! curvature family on the hyperbolic ball, and solves the maximal/CMC graph
//! equation on discretized domains.
//!
//! Conventions used throughout: curvature operator
//! `R(X,Y) = [nabla_X, nabla_Y] - nabla_[X,Y]` with the four-tensor
//! `R(X,Y,Z,W) = g(R(Z,W)Y, X)`, so `R(u,v,u,v)` is the sectional
//! numerator; normal frames are timelike with `gbar(e_a, e_b) = -delta`;
//! shape components satisfy `B(e_i, e_j) = h^a_{ij} e_a`; the mean
//! curvature is the full trace of B, and `<H, nu>` denotes its component
//! along the future-directed unit normal, which for one-dimensional
//! targets equals `div(grad f / sqrt(1 - |grad f|^2))`.

// index-based loops mirror the tensor index notation throughout
#![allow(clippy::needless_range_loop)]
#![allow(clippy::too_many_arguments)]

pub mod error;
pub mod estimates;
pub mod extrinsic;
pub mod graph;
pub mod identities;
pub mod jet;
pub mod linalg;
pub mod metric;
pub mod quad;
pub mod sampling;
pub mod solutions;
pub mod solver;

pub use error::{GeomError, Result};
