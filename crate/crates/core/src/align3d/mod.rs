//! Landmark-driven alignment of a training set to the pose of a target face.
//!
//! Each training sample comes with a textured mesh and the transform taking
//! its landmarks to a reference set. Composing that with the
//! reference-to-target transform poses the mesh like the target; the posed
//! mesh is rendered, gated by a histogram test against its unposed render,
//! and the survivors form an aligned dictionary plus an LR coverage mask.

mod mesh;
mod pipeline;
mod render;
mod transform;

pub use mesh::{LandmarkSet, Mesh};
pub use pipeline::{build_aligned_dictionaries, AlignedDictionary, AlignmentConfig, AlignmentSample};
pub use render::{histogram_distance, render_mesh, validate_alignment};
pub use transform::{compose, estimate_similarity, estimate_similarity_points, transform_mesh, Transform};
