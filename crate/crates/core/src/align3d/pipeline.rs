use rayon::prelude::*;

use super::mesh::{LandmarkSet, Mesh};
use super::render::{render_mesh, validate_alignment};
use super::transform::{compose, estimate_similarity, transform_mesh, Transform};
use crate::degrade::{self, DegradationParams};
use crate::dictionary::{ChannelSelect, DictionaryPair};
use crate::error::{Error, Result};
use crate::imagecore::{Dims, Image, Mask};

/// One training sample: its reconstructed mesh, the transform taking its
/// landmarks onto the reference landmarks, and its subject id.
#[derive(Debug, Clone)]
pub struct AlignmentSample {
    pub mesh: Mesh,
    pub to_ref: Transform,
    pub label: u32,
}

#[derive(Debug, Clone)]
pub struct AlignmentConfig {
    pub hr_dims: Dims,
    pub degradation: DegradationParams,
    pub theta: f64,
    pub channel: ChannelSelect,
    /// Fraction of kept samples that must cover an LR pixel for it to enter
    /// the mask.
    pub coverage_fraction: f64,
}

impl AlignmentConfig {
    pub fn new(hr_dims: Dims, degradation: DegradationParams) -> Self {
        AlignmentConfig {
            hr_dims,
            degradation,
            theta: 100.0,
            channel: ChannelSelect::Gray,
            coverage_fraction: 0.5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AlignedDictionary {
    pub pair: DictionaryPair,
    /// LR pixels covered by enough aligned renders; apply to `y` before
    /// hallucinating.
    pub mask: Mask,
    /// Input indices of the samples in the dictionary, in column order.
    pub kept: Vec<usize>,
    /// Input indices dropped by the histogram gate.
    pub rejected: Vec<usize>,
    /// Reference-to-target transform estimated from the landmarks.
    pub ref_to_target: Transform,
}

struct Rendered {
    image: Image,
    coverage: Image,
    accepted: bool,
}

fn align_one(sample: &AlignmentSample, ref_to_target: &Transform, cfg: &AlignmentConfig) -> Result<Rendered> {
    let (original, _) = render_mesh(&sample.mesh, cfg.hr_dims);
    let to_target = compose(&sample.to_ref, ref_to_target);
    let (aligned, covered) = render_mesh(&transform_mesh(&sample.mesh, &to_target), cfg.hr_dims);
    let accepted = validate_alignment(&original, &aligned, cfg.theta)?;
    let coverage = covered.to_image().map(|v| v / 255.0);
    Ok(Rendered {
        image: cfg.channel.apply(&aligned)?,
        coverage,
        accepted,
    })
}

/// Aligns every training mesh to the pose of the target face, renders it,
/// drops renders that fail the histogram gate, and builds the paired
/// dictionary and LR coverage mask from the rest.
///
/// Columns are ordered by subject id, keeping input order within a subject.
pub fn build_aligned_dictionaries(
    samples: &[AlignmentSample],
    target_landmarks: &LandmarkSet,
    ref_landmarks: &LandmarkSet,
    cfg: &AlignmentConfig,
) -> Result<AlignedDictionary> {
    if samples.is_empty() {
        return Err(Error::Empty("no alignment samples".into()));
    }
    if !(cfg.coverage_fraction > 0.0 && cfg.coverage_fraction <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "coverage fraction must be in (0, 1], got {}",
            cfg.coverage_fraction
        )));
    }
    let degradation = cfg.degradation.noiseless();
    let lr_dims = degradation.lr_dims(cfg.hr_dims)?;
    let (ref_to_target, _) = estimate_similarity(ref_landmarks, target_landmarks)?;

    let rendered: Vec<Rendered> = samples
        .par_iter()
        .map(|s| align_one(s, &ref_to_target, cfg))
        .collect::<Result<_>>()?;

    let mut kept: Vec<usize> = (0..samples.len()).filter(|&i| rendered[i].accepted).collect();
    let rejected: Vec<usize> = (0..samples.len()).filter(|&i| !rendered[i].accepted).collect();
    if kept.is_empty() {
        return Err(Error::Empty(format!(
            "all {} samples rejected by the histogram gate (theta = {})",
            samples.len(),
            cfg.theta
        )));
    }
    kept.sort_by_key(|&i| (samples[i].label, i));

    let images: Vec<Image> = kept.iter().map(|&i| rendered[i].image.clone()).collect();
    let labels = kept.iter().map(|&i| samples[i].label).collect();
    let pair = DictionaryPair::from_hr_images(&images, labels, &degradation)?;

    let mut votes = vec![0usize; lr_dims.len()];
    for &i in &kept {
        let low = degrade::degrade(&rendered[i].coverage, &degradation, 0)?;
        for (v, &c) in votes.iter_mut().zip(low.data()) {
            if c >= 0.5 {
                *v += 1;
            }
        }
    }
    let need = cfg.coverage_fraction * kept.len() as f64;
    let mask = Mask::new(lr_dims, votes.iter().map(|&v| v as f64 >= need).collect())?;

    Ok(AlignedDictionary {
        pair,
        mask,
        kept,
        rejected,
        ref_to_target,
    })
}
