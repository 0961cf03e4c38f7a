//! Dense 3-D cubes, row-major matrices and the mode-3 algebra between them.
//!
//! A [`Cube`] stores its samples band-sequentially, row-major within each
//! band: sample `(i, j, b)` lives at `b * rows * cols + i * cols + j`.
//! Pixels are numbered row-major over the spatial grid, `p = i * cols + j`,
//! and [`unfold3`] places the spectrum of pixel `p` in column `p`. Every
//! module in this crate relies on that single ordering.

use crate::error::{Error, Result};

/// Nominal range of the stored samples. Metadata only: nothing rescales
/// implicitly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ValueScale {
    #[default]
    Unit,
    Byte,
}

impl ValueScale {
    /// Factor that maps samples onto the 0..255 range.
    pub fn to_byte_range(self) -> f64 {
        match self {
            ValueScale::Unit => 255.0,
            ValueScale::Byte => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cube {
    rows: usize,
    cols: usize,
    bands: usize,
    data: Vec<f64>,
    scale: ValueScale,
}

impl Cube {
    pub fn new(rows: usize, cols: usize, bands: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || bands == 0 {
            return Err(Error::shape(format!(
                "cube dimensions must be positive, got {rows}x{cols}x{bands}"
            )));
        }
        if data.len() != rows * cols * bands {
            return Err(Error::shape(format!(
                "cube {rows}x{cols}x{bands} needs {} samples, got {}",
                rows * cols * bands,
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::param(format!("non-finite sample at index {pos}")));
        }
        Ok(Cube {
            rows,
            cols,
            bands,
            data,
            scale: ValueScale::Unit,
        })
    }

    pub fn zeros(rows: usize, cols: usize, bands: usize) -> Self {
        assert!(rows > 0 && cols > 0 && bands > 0, "cube dimensions must be positive");
        Cube {
            rows,
            cols,
            bands,
            data: vec![0.0; rows * cols * bands],
            scale: ValueScale::Unit,
        }
    }

    pub fn from_fn(
        rows: usize,
        cols: usize,
        bands: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Self {
        let mut c = Cube::zeros(rows, cols, bands);
        for b in 0..bands {
            for i in 0..rows {
                for j in 0..cols {
                    c.data[(b * rows + i) * cols + j] = f(i, j, b);
                }
            }
        }
        c
    }

    pub(crate) fn from_raw(rows: usize, cols: usize, bands: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), rows * cols * bands);
        Cube {
            rows,
            cols,
            bands,
            data,
            scale: ValueScale::Unit,
        }
    }

    pub fn with_scale(mut self, scale: ValueScale) -> Self {
        self.scale = scale;
        self
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    pub fn pixels(&self) -> usize {
        self.rows * self.cols
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.rows, self.cols, self.bands)
    }

    pub fn scale(&self) -> ValueScale {
        self.scale
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, b: usize) -> f64 {
        self.data[(b * self.rows + i) * self.cols + j]
    }

    #[inline]
    pub(crate) fn set(&mut self, i: usize, j: usize, b: usize, v: f64) {
        self.data[(b * self.rows + i) * self.cols + j] = v;
    }

    pub fn band(&self, b: usize) -> &[f64] {
        let n = self.pixels();
        &self.data[b * n..(b + 1) * n]
    }

    pub(crate) fn band_mut(&mut self, b: usize) -> &mut [f64] {
        let n = self.pixels();
        &mut self.data[b * n..(b + 1) * n]
    }

    /// Spectrum of pixel `(i, j)`.
    pub fn spectrum(&self, i: usize, j: usize) -> Vec<f64> {
        (0..self.bands).map(|b| self.get(i, j, b)).collect()
    }

    /// Sub-window `rows × cols` starting at `(top, left)`, all bands.
    pub fn window(&self, top: usize, left: usize, rows: usize, cols: usize) -> Cube {
        assert!(top + rows <= self.rows && left + cols <= self.cols);
        Cube::from_fn(rows, cols, self.bands, |i, j, b| self.get(top + i, left + j, b))
            .with_scale(self.scale)
    }

    pub fn frob_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn same_dims(&self, other: &Cube) -> bool {
        self.dims() == other.dims()
    }

    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> Cube {
        Cube::from_raw(
            self.rows,
            self.cols,
            self.bands,
            self.data.iter().map(|&v| f(v)).collect(),
        )
        .with_scale(self.scale)
    }
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    n_rows: usize,
    n_cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn new(n_rows: usize, n_cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n_rows * n_cols {
            return Err(Error::shape(format!(
                "matrix {n_rows}x{n_cols} needs {} entries, got {}",
                n_rows * n_cols,
                data.len()
            )));
        }
        Ok(Mat {
            n_rows,
            n_cols,
            data,
        })
    }

    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Mat {
            n_rows,
            n_cols,
            data: vec![0.0; n_rows * n_cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Mat::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn from_fn(n_rows: usize, n_cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(n_rows * n_cols);
        for i in 0..n_rows {
            for j in 0..n_cols {
                data.push(f(i, j));
            }
        }
        Mat {
            n_rows,
            n_cols,
            data,
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_cols) {
            return Err(Error::shape("ragged rows"));
        }
        Mat::new(rows.len(), n_cols, rows.concat())
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n_rows, self.n_cols)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n_cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n_cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn col(&self, j: usize) -> Vec<f64> {
        (0..self.n_rows).map(|i| self.get(i, j)).collect()
    }

    pub fn transpose(&self) -> Mat {
        Mat::from_fn(self.n_cols, self.n_rows, |i, j| self.get(j, i))
    }

    pub fn matmul(&self, other: &Mat) -> Result<Mat> {
        if self.n_cols != other.n_rows {
            return Err(Error::shape(format!(
                "matmul {}x{} by {}x{}",
                self.n_rows, self.n_cols, other.n_rows, other.n_cols
            )));
        }
        let mut out = Mat::zeros(self.n_rows, other.n_cols);
        let m = other.n_cols;
        for i in 0..self.n_rows {
            let orow = &mut out.data[i * m..(i + 1) * m];
            for k in 0..self.n_cols {
                let a = self.data[i * self.n_cols + k];
                if a == 0.0 {
                    continue;
                }
                let brow = &other.data[k * m..(k + 1) * m];
                for (o, &b) in orow.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self · otherᵀ` without materialising the transpose.
    pub fn matmul_t(&self, other: &Mat) -> Result<Mat> {
        if self.n_cols != other.n_cols {
            return Err(Error::shape(format!(
                "matmul_t {}x{} by ({}x{})ᵀ",
                self.n_rows, self.n_cols, other.n_rows, other.n_cols
            )));
        }
        Ok(Mat::from_fn(self.n_rows, other.n_rows, |i, j| {
            dot(self.row(i), other.row(j))
        }))
    }

    /// `selfᵀ · other` without materialising the transpose.
    pub fn t_matmul(&self, other: &Mat) -> Result<Mat> {
        if self.n_rows != other.n_rows {
            return Err(Error::shape(format!(
                "t_matmul ({}x{})ᵀ by {}x{}",
                self.n_rows, self.n_cols, other.n_rows, other.n_cols
            )));
        }
        let mut out = Mat::zeros(self.n_cols, other.n_cols);
        let m = other.n_cols;
        for k in 0..self.n_rows {
            let brow = other.row(k);
            for i in 0..self.n_cols {
                let a = self.data[k * self.n_cols + i];
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in out.data[i * m..(i + 1) * m].iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn frob_norm(&self) -> f64 {
        self.frob_norm_sq().sqrt()
    }

    pub fn frob_norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    /// Frobenius inner product.
    pub fn inner(&self, other: &Mat) -> f64 {
        debug_assert_eq!(self.shape(), other.shape());
        dot(&self.data, &other.data)
    }

    pub fn scale(&self, s: f64) -> Mat {
        self.map(|v| v * s)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Mat {
        Mat {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn sub(&self, other: &Mat) -> Result<Mat> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn add(&self, other: &Mat) -> Result<Mat> {
        self.zip_with(other, |a, b| a + b)
    }

    /// `self += s * other`
    pub fn axpy(&mut self, s: f64, other: &Mat) {
        debug_assert_eq!(self.shape(), other.shape());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    fn zip_with(&self, other: &Mat, f: impl Fn(f64, f64) -> f64) -> Result<Mat> {
        if self.shape() != other.shape() {
            return Err(Error::shape(format!(
                "elementwise op on {:?} and {:?}",
                self.shape(),
                other.shape()
            )));
        }
        Ok(Mat {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn row_norm(&self, i: usize) -> f64 {
        self.row(i).iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Mode-3 unfolding: a `bands × (rows·cols)` matrix whose column `p` is the
/// spectrum of pixel `p = i * cols + j`.
pub fn unfold3(c: &Cube) -> Mat {
    // Band-sequential, row-major storage is already the unfolded layout.
    Mat {
        n_rows: c.bands,
        n_cols: c.pixels(),
        data: c.data.clone(),
    }
}

/// Inverse of [`unfold3`].
pub fn fold3(m: &Mat, rows: usize, cols: usize) -> Result<Cube> {
    if rows == 0 || cols == 0 || m.n_rows == 0 || m.n_cols != rows * cols {
        return Err(Error::shape(format!(
            "cannot fold {}x{} matrix onto a {rows}x{cols} grid",
            m.n_rows, m.n_cols
        )));
    }
    Ok(Cube::from_raw(rows, cols, m.n_rows, m.data.clone()))
}

pub(crate) fn fold3_owned(m: Mat, rows: usize, cols: usize) -> Cube {
    debug_assert_eq!(m.n_cols, rows * cols);
    Cube::from_raw(rows, cols, m.n_rows, m.data)
}

/// `c ×₃ d`: mixes the spectrum of every pixel by `d` (`d.n_cols == c.bands`).
pub fn mode3_product(c: &Cube, d: &Mat) -> Result<Cube> {
    if d.n_cols != c.bands {
        return Err(Error::shape(format!(
            "mode-3 product of a {}-band cube with a {}x{} matrix",
            c.bands, d.n_rows, d.n_cols
        )));
    }
    let x = d.matmul(&unfold3(c))?;
    Ok(fold3_owned(x, c.rows, c.cols).with_scale(c.scale))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_mat(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Mat {
        Mat::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
    }

    fn random_cube(rng: &mut ChaCha8Rng, r: usize, c: usize, b: usize) -> Cube {
        Cube::from_fn(r, c, b, |_, _, _| rng.random_range(-1.0..1.0))
    }

    fn naive_matmul(a: &Mat, b: &Mat) -> Mat {
        let mut out = Mat::zeros(a.n_rows(), b.n_cols());
        for i in 0..a.n_rows() {
            for j in 0..b.n_cols() {
                let mut s = 0.0;
                for k in 0..a.n_cols() {
                    s += a.get(i, k) * b.get(k, j);
                }
                out.set(i, j, s);
            }
        }
        out
    }

    #[test]
    fn unfold_single_pixel_and_single_band() {
        let c = Cube::new(1, 1, 3, vec![1.0, 2.0, 3.0]).unwrap();
        let m = unfold3(&c);
        assert_eq!(m.shape(), (3, 1));
        assert_eq!(m.data(), &[1.0, 2.0, 3.0]);

        let c = Cube::new(2, 1, 1, vec![5.0, 7.0]).unwrap();
        let m = unfold3(&c);
        assert_eq!(m.shape(), (1, 2));
        assert_eq!(m.data(), &[5.0, 7.0]);
    }

    #[test]
    fn fold_round_trip_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let c = random_cube(&mut rng, 4, 3, 5);
        let back = fold3(&unfold3(&c), 4, 3).unwrap();
        assert_eq!(back, c);

        let single = fold3(&Mat::new(3, 1, vec![1.0, 2.0, 3.0]).unwrap(), 1, 1).unwrap();
        assert_eq!(single.spectrum(0, 0), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn fold_matches_index_loop() {
        let m = Mat::from_fn(2, 6, |b, p| (10 * b + p) as f64);
        let c = fold3(&m, 2, 3).unwrap();
        assert_eq!(c.dims(), (2, 3, 2));
        for b in 0..2 {
            for i in 0..2 {
                for j in 0..3 {
                    assert_eq!(c.get(i, j, b), m.get(b, i * 3 + j));
                }
            }
        }
    }

    #[test]
    fn fold_rejects_mismatch() {
        let m = Mat::zeros(2, 5);
        assert!(matches!(fold3(&m, 2, 3), Err(Error::Shape(_))));
    }

    #[test]
    fn mode3_product_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let c = random_cube(&mut rng, 3, 3, 4);
        assert_eq!(mode3_product(&c, &Mat::identity(4)).unwrap(), c);

        let one = Cube::new(1, 1, 2, vec![1.0, 1.0]).unwrap();
        let d = Mat::new(1, 2, vec![2.0, 3.0]).unwrap();
        assert_eq!(mode3_product(&one, &d).unwrap().data(), &[5.0]);

        let d = random_mat(&mut rng, 2, 4);
        let got = mode3_product(&c, &d).unwrap();
        let want = naive_matmul(&d, &unfold3(&c));
        for (g, w) in got.data().iter().zip(want.data()) {
            assert!((g - w).abs() < 1e-12);
        }
        assert!(matches!(
            mode3_product(&c, &Mat::zeros(2, 3)),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn matmul_against_triple_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_mat(&mut rng, 5, 4);
        let b = random_mat(&mut rng, 4, 6);
        let got = a.matmul(&b).unwrap();
        let want = naive_matmul(&a, &b);
        for (g, w) in got.data().iter().zip(want.data()) {
            assert!((g - w).abs() < 1e-12);
        }
        assert_eq!(Mat::identity(5).matmul(&a).unwrap(), a);
        let bt = b.transpose();
        let got_t = a.matmul_t(&bt).unwrap();
        let at = a.transpose();
        let got_tm = at.t_matmul(&b).unwrap();
        for ((g, h), w) in got_t.data().iter().zip(got_tm.data()).zip(want.data()) {
            assert!((g - w).abs() < 1e-12 && (h - w).abs() < 1e-12);
        }
        assert!(a.matmul(&a).is_err());
    }

    #[test]
    fn frobenius_norm() {
        let m = Mat::new(2, 2, vec![3.0, 0.0, 0.0, 4.0]).unwrap();
        assert_eq!(m.frob_norm(), 5.0);
        assert_eq!(Mat::zeros(3, 3).frob_norm(), 0.0);
        assert_eq!(Cube::zeros(2, 2, 2).frob_norm(), 0.0);
    }

    #[test]
    fn cube_rejects_bad_input() {
        assert!(Cube::new(2, 2, 1, vec![0.0; 3]).is_err());
        assert!(Cube::new(1, 1, 1, vec![f64::NAN]).is_err());
        assert!(Cube::new(0, 1, 1, vec![]).is_err());
    }
}
