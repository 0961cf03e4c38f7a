//! Synthetic scenes and sensor responses for experiments and tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tensor::{Cube, Mat};

/// Nominal wavelength span (nm) assumed when mapping band indices to
/// wavelengths.
pub const WAVELENGTH_RANGE: (f64, f64) = (430.0, 860.0);

/// A `rows × cols × bands` scene whose spectra are convex mixtures of `rank`
/// smooth endmembers. Abundances combine piecewise-constant regions (sharp
/// edges) with slow gradients, so the cube has exact rank `rank` with
/// realistic spatial structure. Values lie in `(0, 1)`.
pub fn low_rank_scene(rows: usize, cols: usize, bands: usize, rank: usize, seed: u64) -> Result<Cube> {
    if rank == 0 || rank > bands || rows == 0 || cols == 0 {
        return Err(Error::param(format!(
            "cannot build a rank-{rank} scene with {bands} bands on {rows}x{cols}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let endmembers: Vec<Vec<f64>> = (0..rank)
        .map(|_| {
            let freq = rng.random_range(0.5..2.5);
            let phase = rng.random_range(0.0..std::f64::consts::TAU);
            let centre = rng.random_range(0.0..1.0);
            let width = rng.random_range(0.08..0.3);
            let level = rng.random_range(0.15..0.5);
            (0..bands)
                .map(|b| {
                    let t = if bands > 1 { b as f64 / (bands - 1) as f64 } else { 0.0 };
                    let wave = 0.5 + 0.5 * (std::f64::consts::TAU * freq * t + phase).sin();
                    let bump = (-((t - centre) / width).powi(2)).exp();
                    (level + 0.3 * wave + 0.2 * bump).min(0.98)
                })
                .collect()
        })
        .collect();

    // region seeds for a Voronoi partition
    let n_regions = 2 * rank + 2;
    let seeds: Vec<(f64, f64, usize)> = (0..n_regions)
        .map(|k| {
            (
                rng.random_range(0.0..rows as f64),
                rng.random_range(0.0..cols as f64),
                if k < rank { k } else { rng.random_range(0..rank) },
            )
        })
        .collect();
    let waves: Vec<(f64, f64, f64)> = (0..rank)
        .map(|_| {
            (
                rng.random_range(0.5..2.0),
                rng.random_range(0.5..2.0),
                rng.random_range(0.0..std::f64::consts::TAU),
            )
        })
        .collect();

    let mut abundance = vec![0.0; rank * rows * cols];
    for i in 0..rows {
        for j in 0..cols {
            let (fi, fj) = (i as f64, j as f64);
            let region = seeds
                .iter()
                .min_by(|a, b| {
                    let da = (a.0 - fi).powi(2) + (a.1 - fj).powi(2);
                    let db = (b.0 - fi).powi(2) + (b.1 - fj).powi(2);
                    da.total_cmp(&db)
                })
                .map(|s| s.2)
                .unwrap_or(0);
            let mut w: Vec<f64> = waves
                .iter()
                .map(|&(u, v, ph)| {
                    let arg = std::f64::consts::TAU * (u * fi / rows as f64 + v * fj / cols as f64) + ph;
                    0.3 + 0.3 * arg.sin()
                })
                .collect();
            w[region] += 1.5;
            let total: f64 = w.iter().sum();
            for (k, v) in w.iter().enumerate() {
                abundance[(k * rows + i) * cols + j] = v / total;
            }
        }
    }

    Ok(Cube::from_fn(rows, cols, bands, |i, j, b| {
        (0..rank)
            .map(|k| abundance[(k * rows + i) * cols + j] * endmembers[k][b])
            .sum()
    }))
}

/// Four broad Gaussian responses (blue, green, red, near infrared) sampled
/// on `bands` equally spaced wavelengths over [`WAVELENGTH_RANGE`]. Each row
/// sums to one.
pub fn ikonos_like_srf(bands: usize) -> Result<Mat> {
    if bands < 4 {
        return Err(Error::param(format!("need at least 4 bands for a 4-band SRF, got {bands}")));
    }
    // centre and full width at half maximum, nm
    const RESPONSES: [(f64, f64); 4] = [(480.0, 70.0), (550.0, 90.0), (665.0, 70.0), (805.0, 100.0)];
    let (lo, hi) = WAVELENGTH_RANGE;
    let mut srf = Mat::from_fn(4, bands, |r, b| {
        let lambda = lo + (hi - lo) * b as f64 / (bands - 1) as f64;
        let (centre, fwhm) = RESPONSES[r];
        let sigma = fwhm / (2.0 * (2.0 * std::f64::consts::LN_2).sqrt());
        (-0.5 * ((lambda - centre) / sigma).powi(2)).exp()
    });
    for r in 0..4 {
        let row = srf.row_mut(r);
        let s: f64 = row.iter().sum();
        row.iter_mut().for_each(|v| *v /= s);
    }
    Ok(srf)
}

/// Contiguous band-averaging response: `h` rows, each averaging one block
/// of the `bands` columns.
pub fn block_average_srf(h: usize, bands: usize) -> Result<Mat> {
    if h == 0 || h > bands {
        return Err(Error::param(format!("cannot average {bands} bands into {h} groups")));
    }
    let mut srf = Mat::from_fn(h, bands, |r, b| if b * h / bands == r { 1.0 } else { 0.0 });
    for r in 0..h {
        let row = srf.row_mut(r);
        let s: f64 = row.iter().sum();
        row.iter_mut().for_each(|v| *v /= s);
    }
    Ok(srf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::subspace::numerical_rank;
    use crate::tensor::unfold3;

    #[test]
    fn scene_has_requested_rank_and_range() {
        let x = low_rank_scene(24, 20, 12, 3, 7).unwrap();
        assert_eq!(x.dims(), (24, 20, 12));
        assert!(x.data().iter().all(|&v| v > 0.0 && v < 1.0));
        assert_eq!(numerical_rank(&unfold3(&x), 1e-6), 3);
        assert_eq!(low_rank_scene(24, 20, 12, 3, 7).unwrap(), x);
        assert_ne!(low_rank_scene(24, 20, 12, 3, 8).unwrap(), x);
        assert!(low_rank_scene(4, 4, 2, 3, 0).is_err());
    }

    #[test]
    fn srf_rows_normalised() {
        for srf in [ikonos_like_srf(93).unwrap(), block_average_srf(3, 8).unwrap()] {
            for r in 0..srf.n_rows() {
                assert!((srf.row(r).iter().sum::<f64>() - 1.0).abs() < 1e-12);
                assert!(srf.row(r).iter().all(|&v| v >= 0.0));
            }
        }
        let srf = ikonos_like_srf(93).unwrap();
        assert_eq!(srf.shape(), (4, 93));
        // peaks are ordered blue < green < red < nir
        let argmax = |r: usize| {
            (0..93).max_by(|&a, &b| srf.get(r, a).total_cmp(&srf.get(r, b))).unwrap()
        };
        assert!(argmax(0) < argmax(1) && argmax(1) < argmax(2) && argmax(2) < argmax(3));
        assert!(ikonos_like_srf(3).is_err());
        assert_eq!(block_average_srf(2, 4).unwrap().row(0), &[0.5, 0.5, 0.0, 0.0]);
    }
}
