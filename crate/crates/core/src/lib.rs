pub mod assembly;
pub mod contact;
pub mod error;
pub mod ldm;
pub mod mesh;
pub mod mfem;
pub mod problem;
pub mod qp;
pub mod sparse;

pub use error::{ContactError, Result};
pub mod harness;
