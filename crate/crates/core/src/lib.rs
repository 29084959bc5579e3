#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Randomized divide-and-conquer diagonalization of dense complex matrices.

pub mod calc;
pub mod deflate;
pub mod eig;
pub mod error;
pub mod grid;
pub mod lab;
pub mod numkit;
pub mod randmat;
pub mod sgn;
pub mod shatter;
pub mod spectrum;
pub mod split;

pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use numkit::{BackendProfile, CMatrix};
