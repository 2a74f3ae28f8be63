//! Distributed quantum kernel estimation.
//!
//! Two clients encode their data as quantum feature maps, teleport the
//! encoded registers to a server through Bell pairs prepared by a helper,
//! and the server estimates pairwise overlaps with a swap test. The
//! resulting Gram matrices feed classical kernel SVM and kernel PCA.

pub mod data;
pub mod digest;
pub mod encodings;
pub mod error;
pub mod experiment;
pub mod kernelml;
pub mod protocol;
pub mod seed;
pub mod sim;

pub use error::{Error, Result};
