//! Spectral numerics for self-similar instability and nonuniqueness in the
//! (α, β)-SQG family on n-fold symmetric fields.

pub mod biot_savart;
pub mod error;
pub mod linalg;
pub mod nonuniqueness;
pub mod operator;
pub mod quadrature;
pub mod radial;
pub mod regimes;
pub mod special;
pub mod spectra;
pub mod transforms;

pub use error::{Error, Result};

pub type C64 = num_complex::Complex64;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
