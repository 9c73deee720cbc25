//! Dirichlet Laplacian on the masked grid and its fractional powers.

mod operator;
mod tridiag;

pub use operator::{assemble, DirichletOperator, DENSE_MAX, LANCZOS_TOL, NULL_CUTOFF};
pub use tridiag::eig_first_row;
