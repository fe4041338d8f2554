//! Procedural clean scenes, patch extraction, unpaired domain construction
//! and PGM file I/O.

mod domains;
mod patches;
mod pgm;
mod scene;

pub use domains::{build_domains, DatasetManifest, DomainCounts, DomainPair};
pub use patches::{extract_patches, patch_corners, Sampling};
pub use pgm::{load_pgm, read_pgm, save_pgm, save_pgm_with_depth, write_pgm, PgmDepth};
pub use scene::{generate_scene, SceneKind, SceneSpec};
