//! Deterministic synthetic face-like images.
//!
//! Each subject is a smooth oval "face" with darker eye and mouth blobs plus a
//! few smooth variation modes; samples of a subject mix those modes with
//! random weights. Useful wherever a labeled training set is needed without
//! real data.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use nalgebra::{Point3, Vector3};

use crate::align3d::{LandmarkSet, Mesh};
use crate::degrade::DegradationParams;
use crate::dictionary::DictionaryPair;
use crate::error::Result;
use crate::imagecore::{Dims, Image};

const MODES: usize = 3;

#[derive(Debug, Clone)]
pub struct Subject {
    base: Vec<f64>,
    modes: Vec<Vec<f64>>,
    dims: Dims,
}

fn smooth_field(dims: Dims, max_freq: usize, amplitude: f64, rng: &mut impl Rng) -> Vec<f64> {
    let (h, w) = (dims.height as f64, dims.width as f64);
    let mut field = vec![0.0; dims.len()];
    for fr in 0..=max_freq {
        for fc in 0..=max_freq {
            if fr + fc == 0 {
                continue;
            }
            let a = rng.random_range(-1.0..1.0) / (fr + fc) as f64;
            let (pr, pc): (f64, f64) = (rng.random_range(0.0..6.3), rng.random_range(0.0..6.3));
            for r in 0..dims.height {
                let cr = (std::f64::consts::TAU * fr as f64 * r as f64 / h + pr).cos();
                for c in 0..dims.width {
                    let cc = (std::f64::consts::TAU * fc as f64 * c as f64 / w + pc).cos();
                    field[dims.index(r, c)] += a * cr * cc;
                }
            }
        }
    }
    let peak = field.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);
    field.iter_mut().for_each(|v| *v *= amplitude / peak);
    field
}

fn blob(dims: Dims, center: (f64, f64), radius: (f64, f64), depth: f64, out: &mut [f64]) {
    for r in 0..dims.height {
        for c in 0..dims.width {
            let dr = (r as f64 - center.0) / radius.0;
            let dc = (c as f64 - center.1) / radius.1;
            out[dims.index(r, c)] += depth * (-(dr * dr + dc * dc)).exp();
        }
    }
}

impl Subject {
    pub fn random(dims: Dims, rng: &mut impl Rng) -> Subject {
        let (h, w) = (dims.height as f64, dims.width as f64);
        let mut base = smooth_field(dims, 2, 20.0, rng);
        let (cy, cx) = (h * rng.random_range(0.45..0.55), w * rng.random_range(0.45..0.55));
        let (ry, rx) = (h * rng.random_range(0.36..0.44), w * rng.random_range(0.34..0.42));
        let skin = rng.random_range(130.0..190.0);
        for r in 0..dims.height {
            for c in 0..dims.width {
                let e = ((r as f64 - cy) / ry).powi(2) + ((c as f64 - cx) / rx).powi(2);
                let inside = 1.0 / (1.0 + ((e - 1.0) * 6.0).exp());
                base[dims.index(r, c)] += 35.0 + (skin - 35.0) * inside;
            }
        }
        let eye_row = cy - ry * rng.random_range(0.25..0.4);
        let eye_dx = rx * rng.random_range(0.35..0.5);
        let eye = (h * 0.05 + 0.5, w * rng.random_range(0.06..0.09) + 0.5);
        let eye_depth = -rng.random_range(50.0..90.0);
        blob(dims, (eye_row, cx - eye_dx), eye, eye_depth, &mut base);
        blob(dims, (eye_row, cx + eye_dx), eye, eye_depth, &mut base);
        let mouth = (h * 0.04 + 0.5, w * rng.random_range(0.12..0.2));
        blob(dims, (cy + ry * rng.random_range(0.45..0.6), cx), mouth, -rng.random_range(30.0..60.0), &mut base);
        blob(dims, (cy + ry * 0.1, cx), (h * 0.08, w * 0.04), rng.random_range(10.0..25.0), &mut base);

        let modes = (0..MODES).map(|_| smooth_field(dims, 3, 18.0, rng)).collect();
        Subject { base, modes, dims }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    /// `base + sum_k c_k mode_k` with `c_k` uniform in `[-1, 1]`, plus an
    /// optional i.i.d. texture of the given amplitude.
    pub fn sample(&self, rng: &mut impl Rng, texture: f64) -> Image {
        let coef: Vec<f64> = (0..MODES).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut data = self.base.clone();
        for (mode, c) in self.modes.iter().zip(&coef) {
            for (v, m) in data.iter_mut().zip(mode) {
                *v += c * m;
            }
        }
        if texture > 0.0 {
            data.iter_mut()
                .for_each(|v| *v += texture * rng.random_range(-1.0..1.0));
        }
        Image::from_plane(self.dims, data).expect("sized from dims")
    }
}

/// A labeled training set: `subjects` subjects with `per_subject` samples
/// each, subject ids `0..subjects`, grouped by subject.
#[derive(Debug, Clone)]
pub struct SyntheticSet {
    pub subjects: Vec<Subject>,
    pub images: Vec<Image>,
    pub labels: Vec<u32>,
}

impl SyntheticSet {
    pub fn generate(dims: Dims, subjects: usize, per_subject: usize, seed: u64) -> SyntheticSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let subjects: Vec<Subject> = (0..subjects).map(|_| Subject::random(dims, &mut rng)).collect();
        let mut images = Vec::new();
        let mut labels = Vec::new();
        for (id, s) in subjects.iter().enumerate() {
            for _ in 0..per_subject {
                images.push(s.sample(&mut rng, 0.0));
                labels.push(id as u32);
            }
        }
        SyntheticSet {
            subjects,
            images,
            labels,
        }
    }

    pub fn dictionary(&self, degradation: &DegradationParams) -> Result<DictionaryPair> {
        DictionaryPair::from_hr_images(&self.images, self.labels.clone(), degradation)
    }
}

/// Flat mesh with one vertex per pixel center of `texture` (at `z = 0`) and
/// two triangles per grid cell. Rendering it unchanged reproduces the
/// texture.
pub fn textured_plane(texture: &Image) -> Mesh {
    let dims = texture.dims();
    let mut vertices = Vec::with_capacity(dims.len());
    let mut colors = Vec::with_capacity(dims.len());
    for r in 0..dims.height {
        for c in 0..dims.width {
            vertices.push(Point3::new(c as f64, r as f64, 0.0));
            let i = dims.index(r, c);
            colors.push(if texture.channels() == 3 {
                Vector3::new(texture.plane(0)[i], texture.plane(1)[i], texture.plane(2)[i])
            } else {
                let v = texture.data()[i];
                Vector3::new(v, v, v)
            });
        }
    }
    let mut triangles = Vec::new();
    for r in 0..dims.height.saturating_sub(1) {
        for c in 0..dims.width.saturating_sub(1) {
            let i = dims.index(r, c);
            triangles.push([i, i + 1, i + dims.width]);
            triangles.push([i + 1, i + dims.width + 1, i + dims.width]);
        }
    }
    Mesh::new(vertices, triangles, colors).expect("grid mesh of a non-empty texture")
}

/// 68 landmarks spread over the interior of a plane of the given size,
/// as a 17 x 4 grid at `z = 0`.
pub fn plane_landmarks(dims: Dims) -> LandmarkSet {
    let (h, w) = (dims.height as f64, dims.width as f64);
    let points = (0..LandmarkSet::COUNT)
        .map(|k| {
            let (i, j) = ((k / 17) as f64, (k % 17) as f64);
            Point3::new(w * (0.2 + 0.6 * j / 16.0), h * (0.25 + 0.5 * i / 3.0), 0.0)
        })
        .collect();
    LandmarkSet::new(points).expect("68 finite points")
}
