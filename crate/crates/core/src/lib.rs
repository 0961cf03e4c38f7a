//! Registration-by-spectral-super-resolution and blind sparse fusion of
//! unregistered hyperspectral (HSI) and multispectral (MSI) images.

pub mod bsf;
pub mod config;
pub mod degradation;
pub mod error;
pub mod io;
pub mod metrics;
pub mod pipeline;
pub mod spl;
pub mod subspace;
pub mod synthetic;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::{Cube, Mat, ValueScale};
