pub mod error;
pub mod expr;
pub mod fracops;
pub mod harness;
pub mod l1;
pub mod linsolve;
pub mod mlf;
pub mod quad;
pub mod scenario;
pub mod semilinear;
pub mod special;
pub mod systems;
pub mod spectral;
pub mod trajectory;
pub mod tridiag;
pub mod volterra;

pub use error::{Error, Result};
