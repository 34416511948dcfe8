pub mod dqn;
pub mod env;
pub mod error;
pub mod fsi;
pub mod harness;
pub mod kinematics;
pub mod lbm;
pub mod validate;

pub use error::{Error, Result};
