use crate::error::{Error, Result};
use crate::tensor::Cube;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelKind {
    Gaussian { sigma: f64 },
    Delta,
    Explicit,
}

/// Square, odd-sized spatial point spread function with unit sum.
#[derive(Debug, Clone, PartialEq)]
pub struct BlurKernel {
    size: usize,
    weights: Vec<f64>,
    kind: KernelKind,
}

impl BlurKernel {
    /// Isotropic Gaussian truncated to `size × size` and renormalised.
    pub fn gaussian(size: usize, sigma: f64) -> Result<Self> {
        check_size(size)?;
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::param(format!("gaussian sigma must be positive, got {sigma}")));
        }
        let c = (size / 2) as f64;
        let mut weights = Vec::with_capacity(size * size);
        for a in 0..size {
            for b in 0..size {
                let (da, db) = (a as f64 - c, b as f64 - c);
                weights.push((-(da * da + db * db) / (2.0 * sigma * sigma)).exp());
            }
        }
        let s: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= s);
        Ok(BlurKernel {
            size,
            weights,
            kind: KernelKind::Gaussian { sigma },
        })
    }

    /// Identity kernel (a single 1 at the centre of a `size × size` grid).
    pub fn delta(size: usize) -> Result<Self> {
        check_size(size)?;
        let mut weights = vec![0.0; size * size];
        weights[(size / 2) * size + size / 2] = 1.0;
        Ok(BlurKernel {
            size,
            weights,
            kind: KernelKind::Delta,
        })
    }

    /// Arbitrary weights, normalised to unit sum.
    pub fn explicit(size: usize, weights: Vec<f64>) -> Result<Self> {
        check_size(size)?;
        if weights.len() != size * size {
            return Err(Error::shape(format!(
                "{size}x{size} kernel needs {} weights, got {}",
                size * size,
                weights.len()
            )));
        }
        let s: f64 = weights.iter().sum();
        if !s.is_finite() || s.abs() < 1e-300 {
            return Err(Error::param("kernel weights must have a nonzero finite sum"));
        }
        Ok(BlurKernel {
            size,
            weights: weights.into_iter().map(|w| w / s).collect(),
            kind: KernelKind::Explicit,
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    /// Row-major `size × size` weights.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    #[inline]
    pub fn weight(&self, a: usize, b: usize) -> f64 {
        self.weights[a * self.size + b]
    }

    /// Taps as `(row offset, col offset, weight)` relative to the centre,
    /// zero weights dropped.
    fn taps(&self) -> Vec<(isize, isize, f64)> {
        let c = (self.size / 2) as isize;
        let mut out = Vec::new();
        for a in 0..self.size {
            for b in 0..self.size {
                let w = self.weight(a, b);
                if w != 0.0 {
                    out.push((a as isize - c, b as isize - c, w));
                }
            }
        }
        out
    }

    fn check_fits(&self, c: &Cube) -> Result<()> {
        if self.size > c.rows().min(c.cols()) {
            return Err(Error::shape(format!(
                "{}x{} kernel does not fit a {}x{} image",
                self.size,
                self.size,
                c.rows(),
                c.cols()
            )));
        }
        Ok(())
    }
}

fn check_size(size: usize) -> Result<()> {
    if size == 0 || size % 2 == 0 {
        return Err(Error::param(format!("kernel size must be odd and positive, got {size}")));
    }
    Ok(())
}

/// Band-wise circular convolution:
/// `out(i, j) = Σ w(a, b) · x(i − (a − c), j − (b − c))`, indices taken modulo
/// the image size.
pub fn blur_circular(c: &Cube, k: &BlurKernel) -> Result<Cube> {
    k.check_fits(c)?;
    Ok(shift_sum(c, &k.taps(), 1))
}

/// Transpose of [`blur_circular`]: circular correlation with the same kernel.
pub fn adjoint_blur_circular(c: &Cube, k: &BlurKernel) -> Result<Cube> {
    k.check_fits(c)?;
    Ok(shift_sum(c, &k.taps(), -1))
}

/// `out(i, j) = Σ w · x(i − sign·da, j − sign·db)` with wrap-around.
fn shift_sum(c: &Cube, taps: &[(isize, isize, f64)], sign: isize) -> Cube {
    let (rows, cols, bands) = c.dims();
    let mut out = Cube::zeros(rows, cols, bands).with_scale(c.scale());
    for b in 0..bands {
        let src = c.band(b);
        let dst = out.band_mut(b);
        for &(da, db, w) in taps {
            let sr = (-sign * da).rem_euclid(rows as isize) as usize;
            let sc = (-sign * db).rem_euclid(cols as isize) as usize;
            for i in 0..rows {
                let si = (i + sr) % rows;
                let srow = &src[si * cols..(si + 1) * cols];
                let drow = &mut dst[i * cols..(i + 1) * cols];
                // out[j] += w * srow[(j + sc) % cols], split at the wrap point
                let split = cols - sc;
                for (o, &s) in drow[..split].iter_mut().zip(&srow[sc..]) {
                    *o += w * s;
                }
                for (o, &s) in drow[split..].iter_mut().zip(&srow[..sc]) {
                    *o += w * s;
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_cube(seed: u64, r: usize, c: usize, b: usize) -> Cube {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Cube::from_fn(r, c, b, |_, _, _| rng.random_range(-1.0..1.0))
    }

    fn inner(a: &Cube, b: &Cube) -> f64 {
        a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
    }

    /// Direct double loop over output pixels and kernel taps.
    fn naive_blur(x: &Cube, k: &BlurKernel) -> Cube {
        let (rows, cols, bands) = x.dims();
        let c = (k.size() / 2) as isize;
        Cube::from_fn(rows, cols, bands, |i, j, b| {
            let mut s = 0.0;
            for a in 0..k.size() {
                for bb in 0..k.size() {
                    let si = (i as isize - (a as isize - c)).rem_euclid(rows as isize) as usize;
                    let sj = (j as isize - (bb as isize - c)).rem_euclid(cols as isize) as usize;
                    s += k.weight(a, bb) * x.get(si, sj, b);
                }
            }
            s
        })
    }

    #[test]
    fn gaussian_is_normalised_and_nonnegative() {
        for (size, sigma) in [(3, 1.0), (7, 2.0), (9, 4.0)] {
            let k = BlurKernel::gaussian(size, sigma).unwrap();
            let s: f64 = k.weights().iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
            assert!(k.weights().iter().all(|&w| w >= 0.0));
        }
        assert!(BlurKernel::gaussian(4, 1.0).is_err());
        assert!(BlurKernel::gaussian(3, 0.0).is_err());
    }

    #[test]
    fn delta_kernel_is_identity() {
        let x = random_cube(1, 6, 5, 3);
        let k = BlurKernel::delta(3).unwrap();
        assert_eq!(blur_circular(&x, &k).unwrap(), x);
        assert_eq!(adjoint_blur_circular(&x, &k).unwrap(), x);
    }

    #[test]
    fn constant_cube_unchanged() {
        let x = Cube::from_fn(8, 8, 2, |_, _, b| 0.3 + b as f64);
        let k = BlurKernel::gaussian(5, 1.5).unwrap();
        let y = blur_circular(&x, &k).unwrap();
        for (a, b) in y.data().iter().zip(x.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn matches_naive_convolution() {
        let x = random_cube(2, 8, 8, 2);
        let k = BlurKernel::gaussian(3, 1.0).unwrap();
        let got = blur_circular(&x, &k).unwrap();
        let want = naive_blur(&x, &k);
        for (a, b) in got.data().iter().zip(want.data()) {
            assert!((a - b).abs() < 1e-12);
        }
        // asymmetric kernel exercises the orientation convention
        let k = BlurKernel::explicit(3, (1..=9).map(f64::from).collect()).unwrap();
        let x = random_cube(3, 5, 7, 1);
        let got = blur_circular(&x, &k).unwrap();
        let want = naive_blur(&x, &k);
        for (a, b) in got.data().iter().zip(want.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn adjoint_identity_and_symmetry() {
        let k = BlurKernel::explicit(3, vec![0.0, 1.0, 2.0, 0.5, 3.0, 0.0, 1.0, 0.0, 4.0]).unwrap();
        for seed in 0..5 {
            let x = random_cube(10 + seed, 7, 6, 2);
            let y = random_cube(20 + seed, 7, 6, 2);
            let lhs = inner(&blur_circular(&x, &k).unwrap(), &y);
            let rhs = inner(&x, &adjoint_blur_circular(&y, &k).unwrap());
            assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1.0));
        }
        let g = BlurKernel::gaussian(5, 1.3).unwrap();
        let x = random_cube(4, 9, 9, 2);
        let a = blur_circular(&x, &g).unwrap();
        let b = adjoint_blur_circular(&x, &g).unwrap();
        for (p, q) in a.data().iter().zip(b.data()) {
            assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn blur_is_linear() {
        let k = BlurKernel::gaussian(5, 2.0).unwrap();
        let x = random_cube(5, 8, 8, 2);
        let y = random_cube(6, 8, 8, 2);
        let (a, b) = (0.7, -2.3);
        let combo = Cube::from_fn(8, 8, 2, |i, j, c| a * x.get(i, j, c) + b * y.get(i, j, c));
        let lhs = blur_circular(&combo, &k).unwrap();
        let bx = blur_circular(&x, &k).unwrap();
        let by = blur_circular(&y, &k).unwrap();
        for idx in 0..lhs.data().len() {
            let rhs = a * bx.data()[idx] + b * by.data()[idx];
            assert!((lhs.data()[idx] - rhs).abs() < 1e-10);
        }
    }

    #[test]
    fn band_means_preserved() {
        let x = random_cube(7, 10, 12, 3);
        let k = BlurKernel::gaussian(7, 2.0).unwrap();
        let y = blur_circular(&x, &k).unwrap();
        for b in 0..3 {
            let mx: f64 = x.band(b).iter().sum::<f64>() / 120.0;
            let my: f64 = y.band(b).iter().sum::<f64>() / 120.0;
            assert!((mx - my).abs() < 1e-10);
        }
    }

    #[test]
    fn oversized_kernel_rejected() {
        let x = Cube::zeros(4, 8, 1);
        let k = BlurKernel::gaussian(5, 1.0).unwrap();
        assert!(matches!(blur_circular(&x, &k), Err(Error::Shape(_))));
        assert!(matches!(adjoint_blur_circular(&x, &k), Err(Error::Shape(_))));
    }
}
