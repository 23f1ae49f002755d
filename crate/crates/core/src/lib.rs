//! CPU inference engine and cost analysis for a lightweight dual-stream 3D
//! segmentation network: JL-guided grouped convolutions, paired-window
//! attention across imaging modalities, Gram-matrix feature matching and the
//! tooling to count, time and inspect it.

pub mod analysis;
pub mod bench;
pub mod error;
pub mod init;
pub mod io;
pub mod jl;
pub mod jlc;
pub mod network;
pub mod pwa;
pub mod sdkt;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::{Tensor5, Triple};
