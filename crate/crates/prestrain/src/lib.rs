//! Numerical toolkit for shallow-prestrained thin films.
//!
//! A film occupies `ω × (-h/2, h/2)` and carries a prestrain
//! `A^h = I + h^{α/2} S(x') + h^{γ/2} x₃ B(x')`. The modules below classify
//! the scaling regime for given exponents, assemble and minimize the
//! limiting plate functionals on a rectangular grid, evaluate curvature
//! based optimality indicators and probe the 3D energy of explicit
//! recovery deformations.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord, clippy::type_complexity)]

pub mod cli;
pub mod curvature;
pub mod decompose;
pub mod diffops;
pub mod elastic;
pub mod fields;
pub mod gamma;
pub mod linalg;
pub mod probe;
pub mod regimes;
pub mod tolerances;
