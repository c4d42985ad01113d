//! Linear and nonlinear network coding over sum-networks, multiple-unicast
//! and Type I networks: finite-field matrices, network models, code
//! evaluation, the standard constructions between network classes, named
//! network families and exhaustive solvability search.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod codes;
pub mod families;
pub mod gflin;
pub mod netmodel;
pub mod solver;
pub mod transforms;
