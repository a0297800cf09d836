//! Subalgebra-relative entanglement of formation, conditional entropy and
//! the leaf structure of finite-dimensional state spaces.

pub mod condent;
pub mod entropy;
pub mod error;
pub mod experiments;
pub mod leaf;
pub mod operator;
pub mod random;
pub mod roof;
pub mod subalgebra;

pub use error::{Error, Result};
pub use operator::{CMatrix, CVector, DensityMatrix, HermitianMatrix, PureStateVector, C64};
pub use subalgebra::{make_subalgebra, Block, BlockOperator, SubalgebraRequest, SubalgebraSpec};
