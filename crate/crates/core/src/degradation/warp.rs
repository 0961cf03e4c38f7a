//! Geometric distortions used to manufacture misregistered HSI/MSI pairs.
//!
//! Every warp is an inverse map: each output pixel looks up its source
//! position about the image centre and samples the input bilinearly, with
//! out-of-range positions clamped to the nearest edge pixel. The output keeps
//! the input's dimensions.

use crate::error::{Error, Result};
use crate::tensor::Cube;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WarpKind {
    /// Enlarge by `factor` about the centre.
    Scaling { factor: f64 },
    /// Rotate counter-clockwise by `degrees` about the centre.
    Rotation { degrees: f64 },
    /// Radial distortion; source radius grows by `1 + coefficient · ρ²`
    /// where `ρ` is the radius normalised to 1 at the image corner.
    Pincushion { coefficient: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WarpSpec {
    pub kind: WarpKind,
}

impl WarpSpec {
    pub fn scaling(factor: f64) -> Result<Self> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(Error::param(format!("scaling factor must be positive, got {factor}")));
        }
        Ok(WarpSpec {
            kind: WarpKind::Scaling { factor },
        })
    }

    pub fn rotation(degrees: f64) -> Result<Self> {
        if !degrees.is_finite() {
            return Err(Error::param("rotation angle must be finite"));
        }
        Ok(WarpSpec {
            kind: WarpKind::Rotation { degrees },
        })
    }

    pub fn pincushion(coefficient: f64) -> Result<Self> {
        if !coefficient.is_finite() {
            return Err(Error::param("pincushion coefficient must be finite"));
        }
        Ok(WarpSpec {
            kind: WarpKind::Pincushion { coefficient },
        })
    }

    /// Source position `(row, col)` for output pixel `(i, j)`.
    fn source(&self, i: usize, j: usize, rows: usize, cols: usize) -> (f64, f64) {
        let cy = (rows as f64 - 1.0) / 2.0;
        let cx = (cols as f64 - 1.0) / 2.0;
        let v = i as f64 - cy;
        let u = j as f64 - cx;
        match self.kind {
            WarpKind::Scaling { factor } => (cy + v / factor, cx + u / factor),
            WarpKind::Rotation { degrees } => {
                let (s, c) = degrees.to_radians().sin_cos();
                // inverse rotation of the output offset
                (cy + (-s * u + c * v), cx + (c * u + s * v))
            }
            WarpKind::Pincushion { coefficient } => {
                let r_max_sq = cx * cx + cy * cy;
                let rho_sq = if r_max_sq > 0.0 {
                    (u * u + v * v) / r_max_sq
                } else {
                    0.0
                };
                let f = 1.0 + coefficient * rho_sq;
                (cy + v * f, cx + u * f)
            }
        }
    }
}

/// Resamples every band of `c` under `w`.
pub fn warp(c: &Cube, w: &WarpSpec) -> Cube {
    let (rows, cols, bands) = c.dims();
    // The geometry is shared by all bands.
    let taps: Vec<[(usize, f64); 4]> = (0..rows * cols)
        .map(|p| {
            let (sy, sx) = w.source(p / cols, p % cols, rows, cols);
            bilinear_taps(sy, sx, rows, cols)
        })
        .collect();
    let mut out = Cube::zeros(rows, cols, bands).with_scale(c.scale());
    for b in 0..bands {
        let src = c.band(b);
        for (o, t) in out.band_mut(b).iter_mut().zip(&taps) {
            *o = t.iter().map(|&(idx, wt)| wt * src[idx]).sum();
        }
    }
    out
}

fn bilinear_taps(y: f64, x: f64, rows: usize, cols: usize) -> [(usize, f64); 4] {
    let y = y.clamp(0.0, (rows - 1) as f64);
    let x = x.clamp(0.0, (cols - 1) as f64);
    let y0 = y.floor() as usize;
    let x0 = x.floor() as usize;
    let y1 = (y0 + 1).min(rows - 1);
    let x1 = (x0 + 1).min(cols - 1);
    let fy = y - y0 as f64;
    let fx = x - x0 as f64;
    [
        (y0 * cols + x0, (1.0 - fy) * (1.0 - fx)),
        (y0 * cols + x1, (1.0 - fy) * fx),
        (y1 * cols + x0, fy * (1.0 - fx)),
        (y1 * cols + x1, fy * fx),
    ]
}
