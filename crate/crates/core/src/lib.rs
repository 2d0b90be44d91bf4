//! Linear source coding over prime fields with decoder side information.
//!
//! The crate covers `GF(p)` arithmetic and sparse matrices, memoryless joint
//! source laws, block-MAP / typical-set / symbol-wise MAP / SC / SSC decoders
//! evaluated by exact enumeration or sum-product, polar source codes, and a
//! harness that checks the decoders' error bounds.

pub mod decoders;
pub mod enumerate;
pub mod error;
pub mod gf;
pub mod linalg;
mod par;
pub mod polar;
pub mod sim;
pub mod source;
pub mod sumproduct;

pub use error::{Error, Result};
pub use gf::{FieldElement, FieldSpec};
