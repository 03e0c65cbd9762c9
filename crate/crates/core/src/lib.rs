//! Egocentric 4D scene encoding.
//!
//! The crate covers the whole path from an RGB-D recording to a compact token
//! sequence, plus the tooling needed to exercise it without real data:
//!
//! - [`scene`]: geometric types, camera model and the on-disk sequence format.
//! - [`sim`]: a synthetic dynamic-scene generator with dense ground truth.
//! - [`lifting`]: per-pixel feature lifting into timestamped world points.
//! - [`octree`]: uniform-level octree aggregation and token-budget condensation.
//! - [`encoding`]: time/position encodings, attention fusion and camera tokens.
//! - [`qa`]: template question/answer generation with checkable reasoning traces.
//! - [`eval`]: thresholded scoring, set F1, 3D IoU and BLEU-4.
//! - [`pipeline`]: the end-to-end driver used by the `d4d` binary.
//!
//! Data-parallel loops go through [`par`]; with the default `parallel` feature
//! they run on rayon, without it they run sequentially with identical results.

pub mod binio;
pub mod encoding;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod inspect;
pub mod lifting;
pub mod octree;
pub mod par;
pub mod pipeline;
pub mod qa;
pub mod scene;
pub mod sim;

pub use error::{Error, Result};
