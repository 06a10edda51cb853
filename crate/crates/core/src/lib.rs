pub mod arrangement;
pub mod auction;
pub mod bicriteria;
pub mod cce;
pub mod error;
pub mod exact;
pub mod generate;
pub mod instance;
pub mod lp;
pub mod profile;
pub mod setfn;
pub mod stability;

pub use error::{Error, Result};
