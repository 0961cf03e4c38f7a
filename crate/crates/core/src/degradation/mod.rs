//! Observation model: circular blur, stride sampling, spectral response
//! mixing, SNR-calibrated Gaussian noise and geometric misregistration.

mod kernel;
mod warp;

pub use kernel::{adjoint_blur_circular, blur_circular, BlurKernel, KernelKind};
pub use warp::{warp, WarpKind, WarpSpec};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::tensor::{mode3_product, Cube, Mat};

/// Offset mixed into the seed of the MSI noise so the two noise fields of a
/// simulated pair are independent.
const MSI_SEED_OFFSET: u64 = 0x9E37_79B9_7F4A_7C15;

/// Keeps samples at spatial indices `0, d, 2d, …` along both axes.
pub fn downsample(c: &Cube, d: usize) -> Result<Cube> {
    if d == 0 {
        return Err(Error::param("stride must be at least 1"));
    }
    let rows = c.rows().div_ceil(d);
    let cols = c.cols().div_ceil(d);
    Ok(Cube::from_fn(rows, cols, c.bands(), |i, j, b| c.get(i * d, j * d, b)).with_scale(c.scale()))
}

/// Transpose of [`downsample`] onto a `rows × cols` grid: zero-filled
/// insertion at the sampled positions.
pub fn upsample_adjoint(c: &Cube, d: usize, rows: usize, cols: usize) -> Result<Cube> {
    if d == 0 {
        return Err(Error::param("stride must be at least 1"));
    }
    if rows.div_ceil(d) != c.rows() || cols.div_ceil(d) != c.cols() {
        return Err(Error::shape(format!(
            "a {}x{} grid is not the stride-{d} sampling of {rows}x{cols}",
            c.rows(),
            c.cols()
        )));
    }
    let mut out = Cube::zeros(rows, cols, c.bands()).with_scale(c.scale());
    for b in 0..c.bands() {
        for i in 0..c.rows() {
            for j in 0..c.cols() {
                out.set(i * d, j * d, b, c.get(i, j, b));
            }
        }
    }
    Ok(out)
}

/// Nearest-neighbour enlargement by pixel replication.
pub fn upsample_replicate(c: &Cube, d: usize, rows: usize, cols: usize) -> Result<Cube> {
    if d == 0 || rows.div_ceil(d) != c.rows() || cols.div_ceil(d) != c.cols() {
        return Err(Error::shape(format!(
            "cannot replicate a {}x{} grid by {d} onto {rows}x{cols}",
            c.rows(),
            c.cols()
        )));
    }
    Ok(Cube::from_fn(rows, cols, c.bands(), |i, j, b| c.get(i / d, j / d, b)).with_scale(c.scale()))
}

/// Spectral response mixing, `Z = R X`.
pub fn apply_srf(c: &Cube, srf: &Mat) -> Result<Cube> {
    mode3_product(c, srf)
}

/// Adds white Gaussian noise with the power set by `snr_db` relative to the
/// mean signal power of the whole cube.
pub fn add_noise_snr(c: &Cube, snr_db: f64, seed: u64) -> Result<Cube> {
    if !snr_db.is_finite() {
        return Err(Error::param(format!("SNR must be finite, got {snr_db}")));
    }
    let count = c.data().len() as f64;
    let power = c.frob_norm().powi(2) / count;
    let sigma = (power / 10f64.powf(snr_db / 10.0)).sqrt();
    if sigma == 0.0 {
        return Ok(c.clone());
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::param(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = c.data().iter().map(|&v| v + normal.sample(&mut rng)).collect();
    Ok(Cube::from_raw(c.rows(), c.cols(), c.bands(), data).with_scale(c.scale()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DegradationSpec {
    pub blur: BlurKernel,
    pub stride: usize,
    /// `h × H` spectral response.
    pub srf: Mat,
    pub snr_h: Option<f64>,
    pub snr_m: Option<f64>,
    pub seed: u64,
}

impl DegradationSpec {
    pub fn validate(&self) -> Result<()> {
        if self.stride == 0 {
            return Err(Error::param("stride must be at least 1"));
        }
        if self.srf.data().iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(Error::param("SRF entries must be finite and nonnegative"));
        }
        for r in 0..self.srf.n_rows() {
            if self.srf.row(r).iter().sum::<f64>() <= 0.0 {
                return Err(Error::param(format!("SRF row {r} has zero sum")));
            }
        }
        Ok(())
    }

    fn check_cube(&self, x: &Cube) -> Result<()> {
        self.validate()?;
        if x.rows() % self.stride != 0 || x.cols() % self.stride != 0 {
            return Err(Error::shape(format!(
                "stride {} does not divide {}x{}",
                self.stride,
                x.rows(),
                x.cols()
            )));
        }
        if self.srf.n_cols() != x.bands() {
            return Err(Error::shape(format!(
                "SRF has {} columns, cube has {} bands",
                self.srf.n_cols(),
                x.bands()
            )));
        }
        Ok(())
    }

    /// Noise seeds `(hsi, msi)` derived from the spec seed.
    pub fn noise_seeds(&self) -> (u64, u64) {
        (self.seed, self.seed.wrapping_add(MSI_SEED_OFFSET))
    }
}

/// Simulates an observed `(hsi, msi)` pair from the high-resolution cube
/// `x`. The optional warp is applied to the HSI path only, before blurring.
pub fn simulate_pair(
    x: &Cube,
    spec: &DegradationSpec,
    w: Option<&WarpSpec>,
) -> Result<(Cube, Cube)> {
    spec.check_cube(x)?;
    let (seed_h, seed_m) = spec.noise_seeds();

    let mut msi = apply_srf(x, &spec.srf)?;
    if let Some(snr) = spec.snr_m {
        msi = add_noise_snr(&msi, snr, seed_m)?;
    }

    let warped;
    let source = match w {
        Some(w) => {
            warped = warp(x, w);
            &warped
        }
        None => x,
    };
    let mut hsi = downsample(&blur_circular(source, &spec.blur)?, spec.stride)?;
    if let Some(snr) = spec.snr_h {
        hsi = add_noise_snr(&hsi, snr, seed_h)?;
    }
    Ok((hsi, msi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_cube(seed: u64, r: usize, c: usize, b: usize) -> Cube {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Cube::from_fn(r, c, b, |_, _, _| rng.random_range(-1.0..1.0))
    }

    fn inner(a: &Cube, b: &Cube) -> f64 {
        a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
    }

    #[test]
    fn downsample_cases() {
        let x = random_cube(1, 5, 4, 2);
        assert_eq!(downsample(&x, 1).unwrap(), x);

        let x = Cube::from_fn(4, 4, 1, |i, j, _| (i * 4 + j) as f64);
        let y = downsample(&x, 2).unwrap();
        assert_eq!(y.dims(), (2, 2, 1));
        assert_eq!(y.data(), &[0.0, 2.0, 8.0, 10.0]);

        let big = Cube::zeros(256, 256, 1);
        assert_eq!(downsample(&big, 4).unwrap().dims(), (64, 64, 1));
        assert_eq!(downsample(&Cube::zeros(5, 7, 1), 2).unwrap().dims(), (3, 4, 1));
    }

    #[test]
    fn upsample_adjoint_cases() {
        let x = random_cube(2, 3, 3, 2);
        assert_eq!(upsample_adjoint(&x, 1, 3, 3).unwrap(), x);

        let one = Cube::new(1, 1, 1, vec![5.0]).unwrap();
        let up = upsample_adjoint(&one, 2, 2, 2).unwrap();
        assert_eq!(up.data(), &[5.0, 0.0, 0.0, 0.0]);

        assert!(upsample_adjoint(&x, 2, 8, 8).is_err());
    }

    #[test]
    fn sampling_adjoint_identity() {
        for (seed, (r, c, d)) in [(8, 8, 2), (9, 6, 3), (7, 5, 2)].into_iter().enumerate() {
            let x = random_cube(seed as u64, r, c, 3);
            let y = random_cube(100 + seed as u64, r.div_ceil(d), c.div_ceil(d), 3);
            let lhs = inner(&downsample(&x, d).unwrap(), &y);
            let rhs = inner(&x, &upsample_adjoint(&y, d, r, c).unwrap());
            assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
        }
    }

    #[test]
    fn srf_cases() {
        let x = random_cube(3, 4, 4, 5);
        assert_eq!(apply_srf(&x, &Mat::identity(5)).unwrap(), x);

        let flat = Cube::from_fn(3, 3, 6, |_, _, _| 0.42);
        let avg = Mat::from_fn(1, 6, |_, _| 1.0 / 6.0);
        let z = apply_srf(&flat, &avg).unwrap();
        assert!(z.data().iter().all(|v| (v - 0.42).abs() < 1e-12));

        assert!(apply_srf(&x, &Mat::zeros(2, 3)).is_err());
    }

    #[test]
    fn noise_vanishes_at_high_snr() {
        let x = random_cube(4, 8, 8, 2);
        let y = add_noise_snr(&x, 300.0, 7).unwrap();
        let diff: f64 = x.data().iter().zip(y.data()).map(|(a, b)| (a - b).powi(2)).sum();
        assert!(diff.sqrt() <= 1e-10 * x.frob_norm());
    }

    #[test]
    fn realised_snr_matches_target() {
        let raw = random_cube(5, 100, 100, 2);
        let n = raw.frob_norm();
        let x = raw.map(|v| v / n);
        let y = add_noise_snr(&x, 20.0, 11).unwrap();
        let noise: f64 = x.data().iter().zip(y.data()).map(|(a, b)| (a - b).powi(2)).sum();
        let snr = 10.0 * (x.frob_norm().powi(2) / noise).log10();
        assert!((19.5..=20.5).contains(&snr), "realised {snr}");
    }

    #[test]
    fn noise_is_deterministic() {
        let x = random_cube(6, 10, 10, 3);
        let a = add_noise_snr(&x, 30.0, 99).unwrap();
        let b = add_noise_snr(&x, 30.0, 99).unwrap();
        assert_eq!(a, b);
        let c = add_noise_snr(&x, 30.0, 100).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn null_degradation_returns_input() {
        let x = random_cube(7, 6, 6, 3);
        let spec = DegradationSpec {
            blur: BlurKernel::delta(1).unwrap(),
            stride: 1,
            srf: Mat::identity(3),
            snr_h: None,
            snr_m: None,
            seed: 0,
        };
        let (hsi, msi) = simulate_pair(&x, &spec, None).unwrap();
        assert_eq!(hsi, x);
        assert_eq!(msi, x);
    }

    #[test]
    fn simulated_dims() {
        let x = Cube::zeros(64, 64, 6);
        let spec = DegradationSpec {
            blur: BlurKernel::gaussian(7, 2.0).unwrap(),
            stride: 8,
            srf: Mat::from_fn(3, 6, |_, _| 1.0),
            snr_h: None,
            snr_m: None,
            seed: 1,
        };
        let (hsi, msi) = simulate_pair(&x, &spec, None).unwrap();
        assert_eq!(hsi.dims(), (8, 8, 6));
        assert_eq!(msi.dims(), (64, 64, 3));

        let bad = DegradationSpec { stride: 5, ..spec };
        assert!(simulate_pair(&x, &bad, None).is_err());
    }
}
