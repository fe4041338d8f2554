use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::ImagePatch;
use crate::rng::rng_from_seed;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    /// Row-major grid of top-left corners spaced `stride` apart.
    Grid { stride: usize },
    /// Uniformly random top-left corners (with replacement).
    Random,
}

/// Top-left corners of the patches [`extract_patches`] would return.
pub fn patch_corners(
    height: usize,
    width: usize,
    patch_size: usize,
    sampling: Sampling,
    limit: usize,
    seed: u64,
) -> Result<Vec<(usize, usize)>> {
    if patch_size == 0 || patch_size > height || patch_size > width {
        return Err(Error::InvalidArgument(format!(
            "patch size {patch_size} does not fit a {height}x{width} image"
        )));
    }
    match sampling {
        Sampling::Grid { stride } => {
            if stride == 0 {
                return Err(Error::InvalidArgument("stride must be positive".into()));
            }
            let mut out = Vec::new();
            'outer: for r in (0..=height - patch_size).step_by(stride) {
                for c in (0..=width - patch_size).step_by(stride) {
                    if out.len() == limit {
                        break 'outer;
                    }
                    out.push((r, c));
                }
            }
            Ok(out)
        }
        Sampling::Random => {
            let mut rng = rng_from_seed(seed);
            Ok((0..limit)
                .map(|_| {
                    (
                        rng.random_range(0..=height - patch_size),
                        rng.random_range(0..=width - patch_size),
                    )
                })
                .collect())
        }
    }
}

pub fn extract_patches<T: Scalar>(
    image: &ImagePatch<T>,
    patch_size: usize,
    sampling: Sampling,
    limit: usize,
    seed: u64,
) -> Result<Vec<ImagePatch<T>>> {
    patch_corners(image.height(), image.width(), patch_size, sampling, limit, seed)?
        .into_iter()
        .map(|(r, c)| image.crop(r, c, patch_size, patch_size))
        .collect()
}
