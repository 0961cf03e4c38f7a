//! Full-reference quality metrics.
//!
//! `rmse` and the SSIM constants work on the 0..255 range: each cube is
//! rescaled by its own [`ValueScale`] first. `psnr`, `ergas` and `sam` are
//! scale-free ratios. `psnr`, `ergas` and `ssim` treat the second argument
//! as ground truth.

use crate::error::{Error, Result};
use crate::tensor::Cube;

pub const PSNR_CAP: f64 = 100.0;
pub const SSIM_WINDOW: usize = 8;
const SAM_MIN_NORM: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricReport {
    pub psnr: f64,
    pub ssim: f64,
    pub ergas: f64,
    pub sam: f64,
    pub rmse: f64,
}

impl MetricReport {
    pub const COLUMNS: [&'static str; 5] = ["psnr", "ssim", "ergas", "sam", "rmse"];

    pub fn compute(x: &Cube, reference: &Cube, sf: f64) -> Result<Self> {
        Ok(MetricReport {
            psnr: psnr(x, reference)?,
            ssim: ssim(x, reference)?,
            ergas: ergas(x, reference, sf)?,
            sam: sam(x, reference)?,
            rmse: rmse(x, reference)?,
        })
    }

    pub fn values(&self) -> [f64; 5] {
        [self.psnr, self.ssim, self.ergas, self.sam, self.rmse]
    }
}

fn check(x: &Cube, reference: &Cube) -> Result<()> {
    if !x.same_dims(reference) {
        return Err(Error::shape(format!(
            "metric inputs differ: {:?} vs {:?}",
            x.dims(),
            reference.dims()
        )));
    }
    Ok(())
}

fn band_mse(x: &[f64], r: &[f64]) -> f64 {
    x.iter().zip(r).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / x.len() as f64
}

pub fn rmse(x: &Cube, reference: &Cube) -> Result<f64> {
    check(x, reference)?;
    let (sx, sr) = (x.scale().to_byte_range(), reference.scale().to_byte_range());
    let sum: f64 = x
        .data()
        .iter()
        .zip(reference.data())
        .map(|(a, b)| (a * sx - b * sr).powi(2))
        .sum();
    Ok((sum / x.data().len() as f64).sqrt())
}

/// Band-averaged PSNR with the peak taken from each reference band.
pub fn psnr(x: &Cube, reference: &Cube) -> Result<f64> {
    check(x, reference)?;
    let nonconstant = (0..reference.bands()).any(|b| {
        let band = reference.band(b);
        band.iter().any(|&v| v != band[0])
    });
    if !nonconstant {
        return Err(Error::param("PSNR reference is constant in every band"));
    }
    let total: f64 = (0..x.bands())
        .map(|b| {
            let r = reference.band(b);
            let peak = r.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mse = band_mse(x.band(b), r);
            if mse == 0.0 {
                PSNR_CAP
            } else {
                (10.0 * (peak * peak / mse).log10()).min(PSNR_CAP)
            }
        })
        .sum();
    Ok(total / x.bands() as f64)
}

/// Mean spectral angle in degrees.
pub fn sam(x: &Cube, reference: &Cube) -> Result<f64> {
    check(x, reference)?;
    let n = x.pixels();
    let (xd, rd) = (x.data(), reference.data());
    let mut total = 0.0;
    let mut counted = 0usize;
    for p in 0..n {
        let (mut dot, mut nx, mut nr) = (0.0, 0.0, 0.0);
        for b in 0..x.bands() {
            let (a, c) = (xd[b * n + p], rd[b * n + p]);
            dot += a * c;
            nx += a * a;
            nr += c * c;
        }
        let (nx, nr) = (nx.sqrt(), nr.sqrt());
        if nx < SAM_MIN_NORM || nr < SAM_MIN_NORM {
            continue;
        }
        total += (dot / (nx * nr)).clamp(-1.0, 1.0).acos();
        counted += 1;
    }
    if counted == 0 {
        return Err(Error::param("every pixel has a zero spectrum; SAM is undefined"));
    }
    Ok((total / counted as f64).to_degrees())
}

pub fn ergas(x: &Cube, reference: &Cube, sf: f64) -> Result<f64> {
    check(x, reference)?;
    if !(sf >= 1.0) {
        return Err(Error::param(format!("ERGAS scale factor must be ≥ 1, got {sf}")));
    }
    let mut acc = 0.0;
    for b in 0..x.bands() {
        let r = reference.band(b);
        let mu = r.iter().sum::<f64>() / r.len() as f64;
        if mu == 0.0 {
            return Err(Error::param(format!("reference band {b} has zero mean")));
        }
        acc += band_mse(x.band(b), r) / (mu * mu);
    }
    Ok(100.0 / sf * (acc / x.bands() as f64).sqrt())
}

/// Running sums over every `w × w` window of a `rows × cols` image, via a
/// summed-area table.
struct Integral {
    table: Vec<f64>,
    cols: usize,
}

impl Integral {
    fn new(v: impl Fn(usize) -> f64, rows: usize, cols: usize) -> Self {
        let stride = cols + 1;
        let mut table = vec![0.0; (rows + 1) * stride];
        for i in 0..rows {
            let mut row = 0.0;
            for j in 0..cols {
                row += v(i * cols + j);
                table[(i + 1) * stride + j + 1] = table[i * stride + j + 1] + row;
            }
        }
        Integral { table, cols: stride }
    }

    fn window(&self, i: usize, j: usize, w: usize) -> f64 {
        let s = self.cols;
        self.table[(i + w) * s + j + w] - self.table[i * s + j + w] - self.table[(i + w) * s + j]
            + self.table[i * s + j]
    }
}

/// Band-averaged SSIM over all `8 × 8` windows at stride 1, with population
/// statistics and constants for the 0..255 range.
pub fn ssim(x: &Cube, reference: &Cube) -> Result<f64> {
    check(x, reference)?;
    let w = SSIM_WINDOW;
    let (rows, cols) = (x.rows(), x.cols());
    if rows < w || cols < w {
        return Err(Error::shape(format!(
            "SSIM needs at least {w}x{w} pixels, got {rows}x{cols}"
        )));
    }
    let c1 = (0.01f64 * 255.0).powi(2);
    let c2 = (0.03f64 * 255.0).powi(2);
    let (sx, sr) = (x.scale().to_byte_range(), reference.scale().to_byte_range());
    let n = (w * w) as f64;
    let windows = ((rows - w + 1) * (cols - w + 1)) as f64;

    let mut total = 0.0;
    for b in 0..x.bands() {
        let xb = x.band(b);
        let rb = reference.band(b);
        let a = |p: usize| xb[p] * sx;
        let c = |p: usize| rb[p] * sr;
        let sa = Integral::new(a, rows, cols);
        let sc = Integral::new(c, rows, cols);
        let saa = Integral::new(|p| a(p) * a(p), rows, cols);
        let scc = Integral::new(|p| c(p) * c(p), rows, cols);
        let sac = Integral::new(|p| a(p) * c(p), rows, cols);
        let mut band_sum = 0.0;
        for i in 0..=rows - w {
            for j in 0..=cols - w {
                let mx = sa.window(i, j, w) / n;
                let my = sc.window(i, j, w) / n;
                let vx = (saa.window(i, j, w) / n - mx * mx).max(0.0);
                let vy = (scc.window(i, j, w) / n - my * my).max(0.0);
                let cov = sac.window(i, j, w) / n - mx * my;
                band_sum += ((2.0 * mx * my + c1) * (2.0 * cov + c2))
                    / ((mx * mx + my * my + c1) * (vx + vy + c2));
            }
        }
        total += band_sum / windows;
    }
    Ok(total / x.bands() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::ValueScale;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn random_cube(seed: u64, r: usize, c: usize, b: usize) -> Cube {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Cube::from_fn(r, c, b, |_, _, _| rng.random_range(0.1..1.0))
    }

    /// Direct two-pass SSIM over every window.
    fn ssim_naive(x: &Cube, r: &Cube) -> f64 {
        let w = 8;
        let c1 = (0.01f64 * 255.0).powi(2);
        let c2 = (0.03f64 * 255.0).powi(2);
        let mut total = 0.0;
        for b in 0..x.bands() {
            let mut acc = 0.0;
            let mut count = 0.0;
            for i in 0..=x.rows() - w {
                for j in 0..=x.cols() - w {
                    let mut xs = vec![];
                    let mut ys = vec![];
                    for a in 0..w {
                        for c in 0..w {
                            xs.push(x.get(i + a, j + c, b) * 255.0);
                            ys.push(r.get(i + a, j + c, b) * 255.0);
                        }
                    }
                    let n = xs.len() as f64;
                    let mx = xs.iter().sum::<f64>() / n;
                    let my = ys.iter().sum::<f64>() / n;
                    let vx = xs.iter().map(|v| (v - mx).powi(2)).sum::<f64>() / n;
                    let vy = ys.iter().map(|v| (v - my).powi(2)).sum::<f64>() / n;
                    let cov = xs.iter().zip(&ys).map(|(p, q)| (p - mx) * (q - my)).sum::<f64>() / n;
                    acc += ((2.0 * mx * my + c1) * (2.0 * cov + c2))
                        / ((mx * mx + my * my + c1) * (vx + vy + c2));
                    count += 1.0;
                }
            }
            total += acc / count;
        }
        total / x.bands() as f64
    }

    #[test]
    fn rmse_cases() {
        let x = random_cube(1, 6, 5, 3);
        assert_eq!(rmse(&x, &x).unwrap(), 0.0);
        let off = x.map(|v| v + 1.0 / 255.0);
        assert!((rmse(&off, &x).unwrap() - 1.0).abs() < 1e-12);
        let byte = x.map(|v| v * 255.0 + 1.0).with_scale(ValueScale::Byte);
        assert!((rmse(&byte, &x).unwrap() - 1.0).abs() < 1e-9);
        assert!(rmse(&x, &Cube::zeros(6, 5, 2)).is_err());

        let big = Cube::zeros(128, 128, 4).with_scale(ValueScale::Byte);
        let normal = Normal::new(0.0, 2.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let noisy = big.map(|v| v + normal.sample(&mut rng));
        let e = rmse(&noisy, &big).unwrap();
        assert!((1.9..=2.1).contains(&e), "{e}");
    }

    #[test]
    fn psnr_cases() {
        let x = random_cube(2, 6, 6, 3);
        assert_eq!(psnr(&x, &x).unwrap(), PSNR_CAP);

        // peak 1, MSE 0.01 → 20 dB
        let r = Cube::new(1, 2, 1, vec![1.0, 0.0]).unwrap();
        let y = Cube::new(1, 2, 1, vec![1.1, 0.1]).unwrap();
        assert!((psnr(&y, &r).unwrap() - 20.0).abs() < 1e-10);

        let mut last = f64::INFINITY;
        for k in 1..6 {
            let e = x.map(|v| v + 0.01 * k as f64);
            let v = psnr(&e, &x).unwrap();
            assert!(v < last);
            last = v;
        }
        let flat = Cube::from_fn(4, 4, 2, |_, _, _| 0.5);
        assert!(psnr(&flat, &flat).is_err());
    }

    #[test]
    fn psnr_decreases_with_noise_variance() {
        let x = random_cube(9, 32, 32, 4);
        let mut last = f64::INFINITY;
        for k in 1..8 {
            let normal = Normal::new(0.0, 0.005 * k as f64).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            let noisy = x.map(|v| v + normal.sample(&mut rng));
            let v = psnr(&noisy, &x).unwrap();
            assert!(v < last);
            last = v;
        }
    }

    #[test]
    fn sam_cases() {
        let x = random_cube(3, 4, 4, 5);
        assert!(sam(&x, &x).unwrap().abs() < 1e-6);
        assert!(sam(&x.map(|v| 2.0 * v), &x).unwrap().abs() < 1e-6);

        let a = Cube::from_fn(3, 3, 2, |_, _, b| if b == 0 { 1.0 } else { 0.0 });
        let b = Cube::from_fn(3, 3, 2, |_, _, b| if b == 1 { 2.0 } else { 0.0 });
        assert!((sam(&a, &b).unwrap() - 90.0).abs() < 1e-12);

        let z = Cube::zeros(3, 3, 2);
        assert!(sam(&z, &a).is_err());
        let y = random_cube(4, 4, 4, 5);
        assert!((sam(&x, &y).unwrap() - sam(&y, &x).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn sam_skips_zero_pixels() {
        let a = Cube::new(1, 2, 2, vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        let b = Cube::new(1, 2, 2, vec![0.0, 0.0, 1.0, 0.0]).unwrap();
        assert!((sam(&a, &b).unwrap() - 90.0).abs() < 1e-12);
    }

    #[test]
    fn ergas_cases() {
        let x = random_cube(5, 4, 4, 3);
        assert_eq!(ergas(&x, &x, 4.0).unwrap(), 0.0);
        // μ = 10, MSE = 1, sf = 4 → 2.5
        let r = Cube::new(1, 2, 1, vec![9.0, 11.0]).unwrap();
        let y = Cube::new(1, 2, 1, vec![10.0, 10.0]).unwrap();
        assert!((ergas(&y, &r, 4.0).unwrap() - 2.5).abs() < 1e-12);
        assert!((ergas(&y, &r, 8.0).unwrap() - 1.25).abs() < 1e-12);
        let zero_mean = Cube::new(1, 2, 1, vec![-1.0, 1.0]).unwrap();
        assert!(ergas(&y, &zero_mean, 4.0).is_err());
        assert!(ergas(&x, &x, 0.5).is_err());
    }

    #[test]
    fn ssim_matches_naive_windows() {
        let x = random_cube(6, 11, 9, 2);
        let r = random_cube(7, 11, 9, 2);
        let fast = ssim(&x, &r).unwrap();
        let slow = ssim_naive(&x, &r);
        assert!((fast - slow).abs() < 1e-10, "{fast} vs {slow}");
        assert!((ssim(&x, &x).unwrap() - 1.0).abs() < 1e-12);
        assert!(ssim(&Cube::zeros(7, 8, 1), &Cube::zeros(7, 8, 1)).is_err());
    }

    #[test]
    fn ssim_against_mean_image_in_open_unit_interval() {
        let r = random_cube(8, 12, 12, 2);
        let mut data = Vec::new();
        for b in 0..2 {
            let band = r.band(b);
            let mu = band.iter().sum::<f64>() / band.len() as f64;
            data.extend(std::iter::repeat_n(mu, band.len()));
        }
        let flat = Cube::new(12, 12, 2, data).unwrap();
        let v = ssim(&flat, &r).unwrap();
        assert!(v > 0.0 && v < 1.0, "{v}");
    }

    #[test]
    fn report_identical() {
        let x = random_cube(10, 8, 8, 3);
        let m = MetricReport::compute(&x, &x, 4.0).unwrap();
        assert_eq!(m.psnr, 100.0);
        assert!((m.ssim - 1.0).abs() < 1e-12);
        assert_eq!(m.ergas, 0.0);
        assert!(m.sam.abs() < 1e-6);
        assert_eq!(m.rmse, 0.0);
    }
}
