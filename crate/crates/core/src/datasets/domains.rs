use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::patches::{extract_patches, Sampling};
use super::scene::{generate_scene, SceneSpec};
use crate::error::{Error, Result};
use crate::image::ImagePatch;
use crate::noise::{degrade, NoiseSpec};
use crate::rng::{derive_named, derive_seed};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainCounts {
    /// Scenes rendered per domain.
    pub scenes: usize,
    /// Patches kept per domain.
    pub patches: usize,
    pub patch_size: usize,
}

impl DomainCounts {
    pub fn validate(&self, scene_size: usize) -> Result<()> {
        if self.scenes == 0 || self.patches == 0 {
            return Err(Error::InvalidArgument("scene and patch counts must be positive".into()));
        }
        if self.patch_size == 0 || self.patch_size > scene_size {
            return Err(Error::InvalidArgument(format!(
                "patch size {} does not fit scenes of size {scene_size}",
                self.patch_size
            )));
        }
        Ok(())
    }

    fn per_scene(&self) -> usize {
        self.patches.div_ceil(self.scenes)
    }
}

#[derive(Debug, Clone)]
pub struct DomainPair<T> {
    pub clean_patches: Vec<ImagePatch<T>>,
    pub noisy_patches: Vec<ImagePatch<T>>,
    pub paired: bool,
    /// Clean image underlying each noisy patch. Evaluation only; training in
    /// unpaired mode never sees it.
    pub noisy_sources: Vec<ImagePatch<T>>,
    /// Independent second noise draw on each noisy patch's clean source.
    pub noisy_second: Vec<ImagePatch<T>>,
    /// For paired domains, `pair_index[i]` is the clean patch behind noisy patch `i`.
    pub pair_index: Option<Vec<usize>>,
    pub clean_scene_seeds: Vec<u64>,
    pub noisy_scene_seeds: Vec<u64>,
}

/// Everything needed to regenerate a [`DomainPair`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub scene: SceneSpec,
    pub noise: NoiseSpec,
    pub paired: bool,
    pub counts: DomainCounts,
    pub seed: u64,
    pub clean_scene_seeds: Vec<u64>,
    pub noisy_scene_seeds: Vec<u64>,
}

impl DatasetManifest {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

fn scene_seeds(seed: u64, tag: &str, n: usize) -> Vec<u64> {
    let base = derive_named(seed, tag);
    (0..n as u64).map(|i| derive_seed(base, i)).collect()
}

fn render_patches<T: Scalar>(template: &SceneSpec, seeds: &[u64], counts: &DomainCounts) -> Result<Vec<ImagePatch<T>>> {
    let mut out = Vec::with_capacity(counts.patches);
    for &s in seeds {
        let img = generate_scene::<T>(&template.with_seed(s))?;
        out.extend(extract_patches(&img, counts.patch_size, Sampling::Random, counts.per_scene(), derive_seed(s, 1))?);
        if out.len() >= counts.patches {
            break;
        }
    }
    if out.len() < counts.patches {
        return Err(Error::InvalidArgument(format!(
            "{} scenes yield only {} of {} patches",
            seeds.len(),
            out.len(),
            counts.patches
        )));
    }
    out.truncate(counts.patches);
    Ok(out)
}

/// Builds clean and noisy domains. Unpaired domains render the noisy side
/// from a scene-seed set disjoint from the clean side; paired domains
/// degrade the clean patches themselves.
pub fn build_domains<T: Scalar>(
    template: &SceneSpec,
    noise: &NoiseSpec,
    paired: bool,
    counts: &DomainCounts,
    seed: u64,
) -> Result<(DomainPair<T>, DatasetManifest)> {
    template.validate()?;
    noise.validate()?;
    counts.validate(template.size)?;
    let clean_scene_seeds = scene_seeds(seed, "clean", counts.scenes);
    let clean = render_patches::<T>(template, &clean_scene_seeds, counts)?;
    let (sources, noisy_scene_seeds) = if paired {
        (clean.clone(), clean_scene_seeds.clone())
    } else {
        let seeds = scene_seeds(seed, "noisy", counts.scenes);
        let a: BTreeSet<_> = clean_scene_seeds.iter().collect();
        if seeds.iter().any(|s| a.contains(s)) {
            return Err(Error::InvalidArgument("clean and noisy scene seeds collide".into()));
        }
        (render_patches::<T>(template, &seeds, counts)?, seeds)
    };
    let second_noise = noise.with_seed(derive_named(noise.seed, "second"));
    let mut noisy = Vec::with_capacity(sources.len());
    let mut second = Vec::with_capacity(sources.len());
    for (i, x) in sources.iter().enumerate() {
        noisy.push(degrade(x, &noise.for_patch(i as u64))?);
        second.push(degrade(x, &second_noise.for_patch(i as u64))?);
    }
    let manifest = DatasetManifest {
        scene: template.clone(),
        noise: *noise,
        paired,
        counts: counts.clone(),
        seed,
        clean_scene_seeds: clean_scene_seeds.clone(),
        noisy_scene_seeds: noisy_scene_seeds.clone(),
    };
    let pair = DomainPair {
        clean_patches: clean,
        noisy_patches: noisy,
        paired,
        noisy_sources: sources,
        noisy_second: second,
        pair_index: paired.then(|| (0..counts.patches).collect()),
        clean_scene_seeds,
        noisy_scene_seeds,
    };
    Ok((pair, manifest))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::SceneKind;

    fn setup() -> (SceneSpec, DomainCounts) {
        (
            SceneSpec::new(SceneKind::PiecewiseConstantShapes, 24, 0),
            DomainCounts { scenes: 8, patches: 40, patch_size: 8 },
        )
    }

    #[test]
    fn paired_without_noise_is_identity() {
        let (scene, counts) = setup();
        let (d, _) = build_domains::<f64>(&scene, &NoiseSpec::gaussian(0.0, 1), true, &counts, 5).unwrap();
        assert_eq!(d.clean_patches, d.noisy_patches);
        assert_eq!(d.pair_index.as_ref().unwrap().len(), 40);
    }

    #[test]
    fn unpaired_seeds_disjoint() {
        let (scene, counts) = setup();
        let (d, m) = build_domains::<f64>(&scene, &NoiseSpec::gaussian(0.1, 1), false, &counts, 5).unwrap();
        let a: BTreeSet<_> = d.clean_scene_seeds.iter().collect();
        assert!(d.noisy_scene_seeds.iter().all(|s| !a.contains(s)));
        assert!(d.pair_index.is_none());
        assert_eq!(d.clean_patches.len(), 40);
        assert_eq!(d.noisy_patches.len(), 40);
        let back = DatasetManifest::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn second_draw_shares_source() {
        let (scene, counts) = setup();
        let (d, _) = build_domains::<f64>(&scene, &NoiseSpec::gaussian(0.1, 1), true, &counts, 5).unwrap();
        for i in 0..counts.patches {
            let k = d.pair_index.as_ref().unwrap()[i];
            assert_eq!(d.noisy_sources[i], d.clean_patches[k]);
            assert_ne!(d.noisy_patches[i], d.noisy_second[i]);
        }
    }

    #[test]
    fn deterministic_and_insufficient() {
        let (scene, counts) = setup();
        let noise = NoiseSpec::gaussian(0.1, 1);
        let (a, _) = build_domains::<f64>(&scene, &noise, false, &counts, 5).unwrap();
        let (b, _) = build_domains::<f64>(&scene, &noise, false, &counts, 5).unwrap();
        assert_eq!(a.noisy_patches, b.noisy_patches);
        let bad = DomainCounts { patch_size: 30, ..counts };
        assert!(build_domains::<f64>(&scene, &noise, false, &bad, 5).is_err());
    }
}
