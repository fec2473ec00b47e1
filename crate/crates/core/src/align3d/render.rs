use nalgebra::Vector3;

use super::mesh::Mesh;
use crate::imagecore::{Dims, Image, Mask};

/// Relative tolerance for the inside-triangle test, so pixel centers on a
/// shared edge are covered by both neighbors.
const EDGE_EPS: f64 = 1e-9;

/// Orthographic z-buffer render of a vertex-colored mesh.
///
/// Pixel `(row, col)` samples the point `x = col, y = row`. Triangle edges
/// are inclusive. The largest `z` wins; on equal depth the earlier triangle
/// is kept. Colors are interpolated barycentrically. Uncovered pixels are
/// black and cleared in the returned mask.
pub fn render_mesh(mesh: &Mesh, dims: Dims) -> (Image, Mask) {
    let n = dims.len();
    let mut depth = vec![f64::NEG_INFINITY; n];
    let mut rgb = vec![Vector3::<f64>::zeros(); n];
    let mut covered = vec![false; n];
    let v = mesh.vertices();
    let colors = mesh.colors();

    for tri in mesh.triangles() {
        let [a, b, c] = tri.map(|i| v[i]);
        let area = (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
        let scale = (b - a).xy().norm() * (c - a).xy().norm();
        if area.abs() <= EDGE_EPS * scale || !area.is_finite() {
            continue;
        }
        let tol = EDGE_EPS * area.abs();
        // bounding box padded so rounding in the vertices cannot drop a
        // pixel center the edge test would accept
        let lo = |v: f64| (v - EDGE_EPS * (1.0 + v.abs())).ceil();
        let hi = |v: f64| (v + EDGE_EPS * (1.0 + v.abs())).floor();
        let min_x = lo(a.x.min(b.x).min(c.x)).max(0.0);
        let max_x = hi(a.x.max(b.x).max(c.x)).min(dims.width as f64 - 1.0);
        let min_y = lo(a.y.min(b.y).min(c.y)).max(0.0);
        let max_y = hi(a.y.max(b.y).max(c.y)).min(dims.height as f64 - 1.0);
        if min_x > max_x || min_y > max_y {
            continue;
        }
        for row in min_y as usize..=max_y as usize {
            let py = row as f64;
            for col in min_x as usize..=max_x as usize {
                let px = col as f64;
                // signed sub-areas opposite each vertex
                let wa = (b.x - px) * (c.y - py) - (b.y - py) * (c.x - px);
                let wb = (c.x - px) * (a.y - py) - (c.y - py) * (a.x - px);
                let wc = (a.x - px) * (b.y - py) - (a.y - py) * (b.x - px);
                let inside = if area > 0.0 {
                    wa >= -tol && wb >= -tol && wc >= -tol
                } else {
                    wa <= tol && wb <= tol && wc <= tol
                };
                if !inside {
                    continue;
                }
                let (la, lb, lc) = (
                    (wa / area).max(0.0),
                    (wb / area).max(0.0),
                    (wc / area).max(0.0),
                );
                let sum = la + lb + lc;
                let (la, lb, lc) = (la / sum, lb / sum, lc / sum);
                let z = la * a.z + lb * b.z + lc * c.z;
                let idx = dims.index(row, col);
                if z > depth[idx] {
                    depth[idx] = z;
                    rgb[idx] = colors[tri[0]] * la + colors[tri[1]] * lb + colors[tri[2]] * lc;
                    covered[idx] = true;
                }
            }
        }
    }

    let mut data = vec![0.0; 3 * n];
    for (i, c) in rgb.iter().enumerate() {
        for k in 0..3 {
            data[k * n + i] = c[k];
        }
    }
    let image = Image::new(dims.height, dims.width, 3, data).expect("finite colors");
    (image, Mask::new(dims, covered).expect("sized from dims"))
}

/// Gray-level histogram gate: accept iff the l2 distance between the
/// normalized 256-bin histograms, times the pixel count, is below `theta`.
/// Intensities are rounded and clamped to `0..=255`; color is averaged to
/// gray first.
pub fn histogram_distance(original: &Image, transformed: &Image) -> crate::Result<f64> {
    if original.dims() != transformed.dims() {
        return Err(crate::Error::DimensionMismatch(format!(
            "histogram comparison of {} and {}",
            original.dims(),
            transformed.dims()
        )));
    }
    let hist = |img: &Image| {
        let gray = img.to_gray();
        let mut h = [0.0f64; 256];
        for &v in gray.data() {
            h[v.round().clamp(0.0, 255.0) as usize] += 1.0;
        }
        let total = gray.data().len() as f64;
        h.iter_mut().for_each(|x| *x /= total);
        h
    };
    let (h1, h2) = (hist(original), hist(transformed));
    let l2 = h1
        .iter()
        .zip(&h2)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    Ok(l2 * original.dims().len() as f64)
}

pub fn validate_alignment(original: &Image, transformed: &Image, theta: f64) -> crate::Result<bool> {
    Ok(histogram_distance(original, transformed)? < theta)
}
