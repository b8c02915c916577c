//! Dense real matrix kernel: symmetric eigensolving, SVD-based
//! differential/algebraic splits, direct solves, and block composition.
//!
//! Everything here is pure and reentrant; values are immutable after
//! construction and safe to share read-only across threads.

pub mod block;
pub mod eigen;
pub mod mat;
pub mod solve;
pub mod svd;

pub use block::{read_block, BlockLayout, SymBlockBuilder};
pub use eigen::{
    eigenvalues_general, max_eig_sym, min_eig_sym, sym_eigen, sym_eigenvalues, sym_sqrt,
};
pub use mat::{dot, vec_norm, DenseMat};
pub use solve::{cond_2, inverse, solve, Cholesky, Lu};
pub use svd::{dae_coordinates, svd_square, DaeDecomposition};
