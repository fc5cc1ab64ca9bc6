//! Feedback invariants and normal forms of single-input control-affine systems
//! `ξ̇ = f(ξ) + g(ξ)u`.

pub mod analysis;
pub mod catalog;
pub mod check;
pub mod classify;
pub mod expr;
pub mod feedback;
pub mod geometry;
pub mod invariants;
pub mod random;
pub mod structure;
pub mod suites;
pub mod symmetry;
pub mod sysfile;
