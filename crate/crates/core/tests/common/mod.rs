//! Dense reference implementations shared by the integration tests. Every
//! operator here is built from its definition with explicit matrices, never
//! through the library's structured code paths.

#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sdrbsf::degradation::BlurKernel;
use sdrbsf::{Cube, Mat};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_cube(seed: u64, r: usize, c: usize, b: usize) -> Cube {
    let mut g = rng(seed);
    Cube::from_fn(r, c, b, |_, _, _| g.random_range(-1.0..1.0))
}

pub fn random_mat(seed: u64, r: usize, c: usize) -> Mat {
    let mut g = rng(seed);
    Mat::from_fn(r, c, |_, _| g.random_range(-1.0..1.0))
}

pub fn to_dense(m: &Mat) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.n_rows(), m.n_cols(), m.data())
}

pub fn from_dense(d: &DMatrix<f64>) -> Mat {
    Mat::from_fn(d.nrows(), d.ncols(), |i, j| d[(i, j)])
}

/// `MN × MN` matrix `B` such that a row image `a` blurs to `a · B`, under
/// circular boundaries: `out(i, j) = Σ w(a, b) x(i − a + c, j − b + c)`.
pub fn dense_blur(rows: usize, cols: usize, k: &BlurKernel) -> DMatrix<f64> {
    let n = rows * cols;
    let size = k.size();
    let c = (size / 2) as isize;
    let mut b = DMatrix::zeros(n, n);
    for i in 0..rows {
        for j in 0..cols {
            let q = i * cols + j;
            for ka in 0..size {
                for kb in 0..size {
                    let si = (i as isize - ka as isize + c).rem_euclid(rows as isize) as usize;
                    let sj = (j as isize - kb as isize + c).rem_euclid(cols as isize) as usize;
                    b[(si * cols + sj, q)] += k.weight(ka, kb);
                }
            }
        }
    }
    b
}

/// `MN × mn` selection matrix keeping pixels `(i·d, j·d)`.
pub fn dense_sampling(rows: usize, cols: usize, d: usize) -> DMatrix<f64> {
    let (m, n) = (rows.div_ceil(d), cols.div_ceil(d));
    let mut s = DMatrix::zeros(rows * cols, m * n);
    for i in 0..m {
        for j in 0..n {
            s[((i * d) * cols + j * d, i * n + j)] = 1.0;
        }
    }
    s
}

pub fn capl1(x: f64, rho: f64) -> f64 {
    (x / rho).min(1.0)
}

pub fn group_norm(a: &DMatrix<f64>, rho: f64) -> f64 {
    (0..a.nrows()).map(|i| capl1(a.row(i).norm(), rho)).sum()
}

/// Fusion objective and its two data-term gradients with explicit operators.
pub struct DenseProblem {
    pub d: DMatrix<f64>,
    /// `B S`, `MN × mn`.
    pub bs: DMatrix<f64>,
    pub y: DMatrix<f64>,
    pub z: DMatrix<f64>,
}

impl DenseProblem {
    pub fn data_terms(&self, a: &DMatrix<f64>, r: &DMatrix<f64>) -> (f64, f64) {
        let ey = &self.d * a * &self.bs - &self.y;
        let ez = r * &self.d * a - &self.z;
        (ey.norm_squared(), ez.norm_squared())
    }

    pub fn objective(&self, a: &DMatrix<f64>, r: &DMatrix<f64>, alpha: f64, rho: f64) -> f64 {
        let (fy, fz) = self.data_terms(a, r);
        fy + fz + alpha * group_norm(a, rho)
    }

    pub fn grad_a(&self, a: &DMatrix<f64>, r: &DMatrix<f64>) -> DMatrix<f64> {
        let ey = &self.d * a * &self.bs - &self.y;
        let rd = r * &self.d;
        let ez = &rd * a - &self.z;
        (self.d.transpose() * ey * self.bs.transpose() + rd.transpose() * ez) * 2.0
    }

    pub fn grad_r(&self, a: &DMatrix<f64>, r: &DMatrix<f64>) -> DMatrix<f64> {
        let da = &self.d * a;
        (r * &da - &self.z) * da.transpose() * 2.0
    }

    /// Exact largest eigenvalue of the Hessian of the smooth A-subproblem.
    pub fn lipschitz_a(&self, r: &DMatrix<f64>, lambda: f64) -> f64 {
        let (rank, pixels) = (self.d.ncols(), self.bs.nrows());
        let dtd = self.d.transpose() * &self.d;
        let rd = r * &self.d;
        let rdtrd = rd.transpose() * &rd;
        let bsbst = &self.bs * self.bs.transpose();
        let n = rank * pixels;
        let mut h = DMatrix::zeros(n, n);
        for col in 0..n {
            let mut v = DMatrix::zeros(rank, pixels);
            v[(col / pixels, col % pixels)] = 1.0;
            let out = (&dtd * &v * &bsbst + &rdtrd * &v) * 2.0 + &v * lambda;
            for row in 0..n {
                h[(row, col)] = out[(row / pixels, row % pixels)];
            }
        }
        h.symmetric_eigenvalues().max()
    }
}

/// Group prox by brute force along the radial line, step `step`.
pub fn prox_radius_grid(norm: f64, weight: f64, rho: f64, step: f64) -> (f64, f64) {
    let hi = norm.max(rho) + 1.0;
    let count = (hi / step).ceil() as usize;
    (0..=count)
        .map(|k| {
            let t = k as f64 * step;
            (t, weight * capl1(t, rho) + 0.5 * (t - norm).powi(2))
        })
        .fold((0.0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best })
}
