// `!(x > 0.0)` style checks are how NaN gets rejected; index loops read
// closer to the maths
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod atomic;
pub mod constants;
pub mod error;
pub mod scalar;

pub use error::{Error, Result};
pub mod cavity;
pub mod vapour;
pub mod memory;
pub mod ode;
pub mod optimize;
pub mod fit;
pub mod config;
pub mod io;
