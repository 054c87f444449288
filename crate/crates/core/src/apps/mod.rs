//! Concrete problems: sparse spectral clustering and sparse PCA.

pub mod spca;
pub mod ssc;
