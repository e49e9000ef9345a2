//! Dense, sparse and tensor kernels shared by every solver.
//!
//! All kernels are pure functions over immutable inputs with a fixed
//! accumulation order.

mod dense;
mod sparse;
mod tensor;
mod vector;

pub use dense::{hadamard, khatri_rao, DenseMatrix};
pub use sparse::{SparseMatrix, SparseTriplets};
pub use tensor::{Mode, Tensor3};
pub use vector::*;

use crate::error::{Error, Result};

/// Soft shrinkage `sign(x)·max(|x| − κ, 0)`, the proximal map of `κ‖·‖₁`.
pub fn soft_shrink(x: &[f64], kappa: f64) -> Result<DenseVector> {
    if !(kappa >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "shrinkage threshold must be nonnegative, got {kappa}"
        )));
    }
    Ok(x.iter().map(|&v| shrink_scalar(v, kappa)).collect())
}

#[inline]
pub(crate) fn shrink_scalar(v: f64, kappa: f64) -> f64 {
    if v > kappa {
        v - kappa
    } else if v < -kappa {
        v + kappa
    } else {
        0.0
    }
}
