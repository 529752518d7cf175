//! Offline handwritten word recognition: projection-profile segmentation,
//! Hu/Zernike moment features, k-means vector quantisation and per-class
//! dynamic hierarchical Bayesian networks.

pub mod dhbn;
pub mod features;
pub mod harness;
pub mod imaging;
pub mod persist;
pub mod quantize;
