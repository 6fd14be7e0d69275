//! Graded Lagrangian linear algebra, surgery handles, model Dehn twists,
//! combinatorial Floer complexes on the cylinder and mapping cones over F2.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod floer_cylinder;
pub mod geodesic_twists;
pub mod handles;
pub mod homological_algebra;
pub mod profiles;
pub mod sampling;
pub mod symplectic_linalg;
