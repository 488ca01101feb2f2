//! Face morphing attack generation and evaluation.
//!
//! - [`protocol`]: dataset manifests and identity-disjoint splits
//! - [`imaging`]: images, landmarks, sampling and alignment
//! - [`morph`]: landmark-based morphing
//! - [`regen`]: latent-space regeneration of morphs
//! - [`vuln`]: face-recognition vulnerability metrics
//! - [`mad`]: morphing attack detection and detection metrics
//! - [`synth`]: synthetic faces for desk-scale runs

pub mod error;
pub mod fsio;
pub mod imaging;
pub mod mad;
pub mod morph;
pub mod protocol;
pub mod reference;
pub mod regen;
pub mod synth;
pub mod vuln;

pub use error::{Error, Result};
pub use imaging::{FaceImage, LandmarkSet, Point};
pub use mad::{DetReport, FeatureConfig, MadModel};
pub use morph::{MorphMethod, MorphSpec, TriangleMesh};
pub use protocol::{DatasetManifest, SplitProtocol};
pub use regen::{FitOptions, LatentVector};
pub use vuln::{ScoreTable, Threshold};
