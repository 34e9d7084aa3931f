// `!(x > 0.0)` is used on purpose throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod evolution;
pub mod grid;
pub mod hamiltonian;
pub mod linalg;
pub mod oracle;
pub mod potential;
pub mod scattering;
pub mod serde_complex;
pub mod special;
pub mod symmetry;
