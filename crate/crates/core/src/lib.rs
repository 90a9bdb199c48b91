//! Quantize-forward relaying in a massive MIMO heterogeneous network:
//! achievable-rate regions, optimal quantization, WZ/TD relaying and its
//! complexity, with independent numerical checks.

pub mod cli;
pub mod complexity;
pub mod error;
pub mod lp;
pub mod numeric;
pub mod oracle;
pub mod quantopt;
pub mod region;
pub mod scenario;
pub mod wztd;
pub mod zf;

pub use error::{Error, Result};
