//! Dense tensors with a reverse-mode tape and an Adam optimizer.
//!
//! Every quantity that the training loss depends on (network layers, the
//! interpolated fields at quadrature points, flux and source evaluations,
//! the assembled residual) is recorded on a [`Tape`]. Constant operators such
//! as basis tables and the graph Laplacian enter as [`SparseOp`] values and
//! never receive gradients.

mod dense;
mod optim;
mod sparse;
mod tape;

pub use dense::Tensor;
pub use optim::{Adam, ParamId, ParamSet};
pub use sparse::{CsrMatrix, SparseOp};
pub use tape::{softplus, softplus_inverse, Tape, Var};


#[cfg(test)]
mod tests;
