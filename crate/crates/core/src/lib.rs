pub mod bearing;
pub mod error;
pub mod gp;
pub mod hyperopt;
pub mod locator;
pub mod polar;
pub mod seeds;
pub mod ultrasound;
pub mod validation;

pub use error::{Error, ErrorKind, Result};
