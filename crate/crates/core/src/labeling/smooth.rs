use nalgebra::{DMatrix, DVector, Point3};

use super::boundary::BoundaryLoop;
use crate::error::{Error, Result};

/// Savitzky-Golay smoothing weights: the value at the window centre of the
/// least-squares polynomial of degree `order` through `window` equally
/// spaced samples.
pub fn savitzky_golay_kernel(window: usize, order: usize) -> Result<Vec<f64>> {
    if window % 2 == 0 || window <= order {
        return Err(Error::invalid(format!(
            "window {window} must be odd and larger than order {order}"
        )));
    }
    let m = (window / 2) as f64;
    // offsets scaled to [-1, 1] keep the normal matrix well conditioned
    let scale = if m > 0.0 { 1.0 / m } else { 1.0 };
    let j = DMatrix::from_fn(window, order + 1, |r, c| ((r as f64 - m) * scale).powi(c as i32));
    let jtj = j.transpose() * &j;
    let e0 = DVector::from_fn(order + 1, |r, _| if r == 0 { 1.0 } else { 0.0 });
    let coeff = jtj
        .cholesky()
        .ok_or_else(|| Error::invalid("singular Savitzky-Golay system"))?
        .solve(&e0);
    Ok((j * coeff).iter().copied().collect())
}

/// Per-channel circular convolution with the Savitzky-Golay kernel. Vertex
/// count and mesh-vertex provenance are kept.
pub fn savitzky_golay_smooth(l: &BoundaryLoop, window: usize, order: usize) -> Result<BoundaryLoop> {
    l.validate()?;
    let n = l.len();
    if window >= n {
        return Err(Error::invalid(format!("window {window} needs a loop longer than {n} vertices")));
    }
    let kernel = savitzky_golay_kernel(window, order)?;
    let half = window / 2;
    let vertices = (0..n)
        .map(|i| {
            let mut acc = nalgebra::Vector3::zeros();
            for (k, w) in kernel.iter().enumerate() {
                acc += l.vertices[(i + n + k - half) % n].coords * *w;
            }
            Point3::from(acc)
        })
        .collect();
    Ok(BoundaryLoop {
        vertices,
        mesh_vertices: l.mesh_vertices.clone(),
    })
}
