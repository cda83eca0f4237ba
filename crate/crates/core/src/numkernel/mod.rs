//! Dense linear algebra: the matrix type, products, softmax, and the small
//! spectral toolkit (power iteration, Jacobi eigensolver, Cholesky, LU).

mod linalg;
mod mat;

pub use linalg::{
    max_singular_value, solve_spd, spd_inv_sqrt, sym_eig_extreme, sym_eigen, Cholesky, Lu,
    SpectralEstimate,
};
pub use mat::{dot, matmul, norm2, row_softmax, Mat};
pub(crate) use mat::softmax_in_place;
