use nalgebra::{Matrix3, Matrix4, Point3, Vector3};

use super::mesh::{LandmarkSet, Mesh};
use crate::error::{Error, Result};

const ORTHO_TOL: f64 = 1e-9;

/// Similarity transform `p -> scale * rotation * p + translation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transform {
    scale: f64,
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl Transform {
    pub fn identity() -> Self {
        Transform {
            scale: 1.0,
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(scale: f64, rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidParameter(format!("scale must be positive, got {scale}")));
        }
        if !translation.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidParameter("translation must be finite".into()));
        }
        let ortho_err = (rotation.transpose() * rotation - Matrix3::identity()).abs().max();
        let det = rotation.determinant();
        if !(ortho_err <= ORTHO_TOL && (det - 1.0).abs() <= ORTHO_TOL) {
            return Err(Error::InvalidParameter(format!(
                "rotation is not proper orthogonal (|R^T R - I| = {ortho_err:e}, det = {det})"
            )));
        }
        Ok(Transform {
            scale,
            rotation,
            translation,
        })
    }

    /// Rotation by `angle` radians about a unit `axis`.
    pub fn rotation_about(axis: Vector3<f64>, angle: f64) -> Matrix3<f64> {
        *nalgebra::Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(axis), angle).matrix()
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    /// Homogeneous matrix acting on column vectors.
    pub fn matrix(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0)
            .copy_from(&(self.rotation * self.scale));
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    /// Factors a homogeneous similarity matrix back into scale, rotation and
    /// translation, checking the invariants.
    pub fn from_matrix(m: &Matrix4<f64>) -> Result<Self> {
        let bottom = m.fixed_view::<1, 4>(3, 0);
        if (bottom - nalgebra::RowVector4::new(0.0, 0.0, 0.0, 1.0)).abs().max() > ORTHO_TOL {
            return Err(Error::InvalidParameter("not an affine homogeneous matrix".into()));
        }
        let a: Matrix3<f64> = m.fixed_view::<3, 3>(0, 0).into();
        let det = a.determinant();
        if det.is_nan() || det <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "linear part has non-positive determinant {det}"
            )));
        }
        let scale = det.cbrt();
        Transform::new(scale, a / scale, m.fixed_view::<3, 1>(0, 3).into())
    }

    pub fn apply(&self, p: &Point3<f64>) -> Point3<f64> {
        Point3::from(self.rotation * p.coords * self.scale + self.translation)
    }

    pub fn inverse(&self) -> Transform {
        let rt = self.rotation.transpose();
        Transform {
            scale: 1.0 / self.scale,
            rotation: rt,
            translation: -(rt * self.translation) / self.scale,
        }
    }
}

/// The transform that applies `first`, then `second`: the matrix product
/// `second.matrix() * first.matrix()`. Chaining sample-to-reference with
/// reference-to-target gives sample-to-target.
pub fn compose(first: &Transform, second: &Transform) -> Transform {
    Transform::from_matrix(&(second.matrix() * first.matrix()))
        .expect("product of similarities is a similarity")
}

pub fn transform_mesh(mesh: &Mesh, t: &Transform) -> Mesh {
    let vertices = mesh.vertices().iter().map(|p| t.apply(p)).collect();
    mesh.with_vertices(vertices).expect("same vertex count")
}

/// Least-squares similarity mapping `src` onto `dst` with reflection
/// correction, and the RMS residual of the fit.
pub fn estimate_similarity(src: &LandmarkSet, dst: &LandmarkSet) -> Result<(Transform, f64)> {
    estimate_similarity_points(src.points(), dst.points())
}

/// As [`estimate_similarity`] for any number of corresponding points.
/// Coplanar sources are accepted; collinear or coincident ones are not.
pub fn estimate_similarity_points(
    src: &[Point3<f64>],
    dst: &[Point3<f64>],
) -> Result<(Transform, f64)> {
    if src.len() != dst.len() || src.len() < 3 {
        return Err(Error::DimensionMismatch(format!(
            "need >= 3 corresponding points, got {} and {}",
            src.len(),
            dst.len()
        )));
    }
    let n = src.len() as f64;
    let mean = |pts: &[Point3<f64>]| pts.iter().fold(Vector3::zeros(), |a, p| a + p.coords) / n;
    let (mu_s, mu_d) = (mean(src), mean(dst));
    let mut cov = Matrix3::zeros();
    let mut src_scatter = Matrix3::zeros();
    let mut var_s = 0.0;
    for (s, d) in src.iter().zip(dst) {
        let (cs, cd) = (s.coords - mu_s, d.coords - mu_d);
        cov += cd * cs.transpose();
        src_scatter += cs * cs.transpose();
        var_s += cs.norm_squared();
    }
    cov /= n;
    var_s /= n;

    let spread = src_scatter.symmetric_eigenvalues();
    let mut ev: Vec<f64> = spread.iter().copied().collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    if ev[0].is_nan() || ev[0] <= 0.0 || ev[1] <= 1e-12 * ev[0] {
        return Err(Error::Degenerate(
            "source landmarks are coincident or collinear".into(),
        ));
    }

    let svd = cov.svd(true, true);
    let (u, v_t) = (svd.u.expect("requested"), svd.v_t.expect("requested"));
    let mut sign = Matrix3::identity();
    if (u.determinant() * v_t.determinant()) < 0.0 {
        sign[(2, 2)] = -1.0;
    }
    // nalgebra does not sort singular values; put the smallest last so the
    // reflection fix flips the least significant direction.
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let perm = Matrix3::from_fn(|r, c| if order[c] == r { 1.0 } else { 0.0 });
    let u = u * perm;
    let v_t = perm.transpose() * v_t;
    let sv = Vector3::new(
        svd.singular_values[order[0]],
        svd.singular_values[order[1]],
        svd.singular_values[order[2]],
    );

    let rotation = u * sign * v_t;
    let scale = (sv.component_mul(&sign.diagonal())).sum() / var_s;
    let translation = mu_d - rotation * mu_s * scale;
    let t = Transform::new(scale, rotation, translation)?;
    let sq: f64 = src
        .iter()
        .zip(dst)
        .map(|(s, d)| (t.apply(s) - d).norm_squared())
        .sum();
    Ok((t, (sq / n).sqrt()))
}
