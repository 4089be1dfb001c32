//! Training-free, one-step patch pruning for off-the-shelf backbones.
//!
//! A lightweight convolutional proposal network scores image (or video)
//! patches; the top-z fraction of patches is kept and the rest are
//! dropped before the expensive backbone ever sees them. The crate
//! provides:
//!
//! - [`tensor`]: a minimal deterministic f32 tensor substrate with the
//!   layer primitives the pipeline needs (conv, linear, attention,
//!   bicubic resize);
//! - [`psm`]: patch significance maps and top-z prune masks;
//! - [`token`]: mask application for vanilla-transformer token sequences;
//! - [`hier`]: foreground-only pixel operators for hierarchical models;
//! - [`flops`]: an analytical multiply-accumulate ledger for baseline and
//!   pruned configurations;
//! - [`io`]: the external tensor/image/config/weight formats;
//! - [`model`]: runnable proposal nets and transformers for end-to-end
//!   desk-scale runs.

pub mod error;
pub mod flops;
pub mod hier;
pub mod io;
pub mod model;
pub mod psm;
pub mod tensor;
pub mod token;

pub use error::{Error, Result};
pub use psm::{build_mask, build_psm, normalize_psm, region_proposal};
pub use tensor::Tensor;
