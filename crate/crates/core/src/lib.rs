pub mod attack;
pub mod bnb;
pub mod depprop;
pub mod error;
pub mod fixtures;
pub mod lp;
pub mod mip;
pub mod net;
pub mod perturb;
pub mod relation;
pub mod verify;

pub use error::{Error, Result};
