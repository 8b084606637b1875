//! Block trifocal tensors.

pub mod block;
pub mod camera;
pub mod config;
pub mod error;
pub mod eval;
pub mod io;
pub mod robust;
pub mod scene;
pub mod sync;
pub mod tensor;
pub mod trifocal;

pub use error::{Error, Result};
