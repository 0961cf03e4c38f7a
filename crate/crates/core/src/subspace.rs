//! Orthonormal spectral dictionaries from a truncated SVD of the unfolded
//! HSI, and projection of cubes into and out of the spanned subspace.
//!
//! The left singular vectors are taken from a cyclic Jacobi eigen-solve of
//! the `H × H` Gram matrix `Y Yᵀ`, which stays small for any realistic band
//! count.

use crate::error::{Error, Result};
use crate::tensor::{mode3_product, unfold3, Cube, Mat};

/// Singular values below this fraction of the largest count as zero.
pub const RANK_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    basis: Mat,
    singular_values: Vec<f64>,
}

impl Dictionary {
    /// `H × L` matrix with orthonormal columns.
    pub fn basis(&self) -> &Mat {
        &self.basis
    }

    /// Full singular spectrum of the source matrix, nonincreasing.
    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    pub fn dim(&self) -> usize {
        self.basis.n_cols()
    }

    pub fn bands(&self) -> usize {
        self.basis.n_rows()
    }

    /// Wraps an externally supplied basis; columns must be orthonormal.
    pub fn from_basis(basis: Mat) -> Result<Self> {
        let gram = basis.t_matmul(&basis)?;
        let l = basis.n_cols();
        for i in 0..l {
            for j in 0..l {
                let want = if i == j { 1.0 } else { 0.0 };
                if (gram.get(i, j) - want).abs() > 1e-8 {
                    return Err(Error::param("dictionary columns are not orthonormal"));
                }
            }
        }
        Ok(Dictionary {
            basis,
            singular_values: Vec::new(),
        })
    }

    /// Keeps the leading `l` columns.
    pub fn truncate(&self, l: usize) -> Result<Self> {
        if l == 0 || l > self.dim() {
            return Err(Error::param(format!(
                "cannot truncate a {}-column dictionary to {l}",
                self.dim()
            )));
        }
        Ok(Dictionary {
            basis: Mat::from_fn(self.bands(), l, |i, j| self.basis.get(i, j)),
            singular_values: self.singular_values.clone(),
        })
    }
}

/// Top-`l` left singular vectors of `unfold3(y)`.
///
/// Each column is signed so that its largest-magnitude entry (lowest index on
/// ties) is nonnegative.
pub fn build_dictionary(y: &Cube, l: usize) -> Result<Dictionary> {
    let h = y.bands();
    if l == 0 || l > h {
        return Err(Error::param(format!(
            "subspace dimension {l} outside 1..={h}"
        )));
    }
    let ymat = unfold3(y);
    let gram = ymat.matmul_t(&ymat)?;
    let (values, vectors) = symmetric_eigen(&gram);
    let keep = h.min(y.pixels());
    let singular_values = values.iter().take(keep).map(|&v| v.max(0.0).sqrt()).collect();
    let mut basis = Mat::from_fn(h, l, |i, j| vectors.get(i, j));
    for j in 0..l {
        let mut best = 0;
        for i in 1..h {
            if basis.get(i, j).abs() > basis.get(best, j).abs() {
                best = i;
            }
        }
        if basis.get(best, j) < 0.0 {
            for i in 0..h {
                basis.set(i, j, -basis.get(i, j));
            }
        }
    }
    Ok(Dictionary {
        basis,
        singular_values,
    })
}

/// Coefficients `c ×₃ Dᵀ`.
pub fn project(c: &Cube, d: &Dictionary) -> Result<Cube> {
    if c.bands() != d.bands() {
        return Err(Error::shape(format!(
            "cannot project a {}-band cube onto a {}-band dictionary",
            c.bands(),
            d.bands()
        )));
    }
    mode3_product(c, &d.basis.transpose())
}

/// Spectra `a ×₃ D`.
pub fn reconstruct(a: &Cube, d: &Dictionary) -> Result<Cube> {
    if a.bands() != d.dim() {
        return Err(Error::shape(format!(
            "{}-band coefficients for a {}-dimensional dictionary",
            a.bands(),
            d.dim()
        )));
    }
    mode3_product(a, &d.basis)
}

/// Singular values of `m`, nonincreasing, `min(n_rows, n_cols)` of them.
pub fn singular_values(m: &Mat) -> Vec<f64> {
    let gram = if m.n_rows() <= m.n_cols() {
        m.matmul_t(m).expect("square gram")
    } else {
        m.t_matmul(m).expect("square gram")
    };
    let (values, _) = symmetric_eigen(&gram);
    values.into_iter().map(|v| v.max(0.0).sqrt()).collect()
}

/// Number of singular values above `rel_tol · σ₁`.
pub fn numerical_rank(m: &Mat, rel_tol: f64) -> usize {
    let s = singular_values(m);
    match s.first() {
        Some(&top) if top > 0.0 => s.iter().filter(|&&v| v > rel_tol * top).count(),
        _ => 0,
    }
}

/// Cyclic Jacobi eigen-decomposition of a symmetric matrix. Returns the
/// eigenvalues in nonincreasing order and the matching unit eigenvectors as
/// columns.
pub fn symmetric_eigen(a: &Mat) -> (Vec<f64>, Mat) {
    let n = a.n_rows();
    assert_eq!(n, a.n_cols(), "symmetric_eigen needs a square matrix");
    let mut m = a.clone();
    let mut v = Mat::identity(n);
    let scale = a.frob_norm();
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += m.get(p, q).powi(2);
            }
        }
        if off.sqrt() <= 1e-15 * scale || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                let app = m.get(p, p);
                let aqq = m.get(q, q);
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m.get(k, p);
                    let mkq = m.get(k, q);
                    m.set(k, p, c * mkp - s * mkq);
                    m.set(k, q, s * mkp + c * mkq);
                }
                for k in 0..n {
                    let mpk = m.get(p, k);
                    let mqk = m.get(q, k);
                    m.set(p, k, c * mpk - s * mqk);
                    m.set(q, k, s * mpk + c * mqk);
                }
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m.get(j, j).total_cmp(&m.get(i, i)).then(i.cmp(&j)));
    let values = order.iter().map(|&i| m.get(i, i)).collect();
    let vectors = Mat::from_fn(n, n, |r, c| v.get(r, order[c]));
    (values, vectors)
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

    #[test]
    fn jacobi_diagonalises() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let b = Mat::from_fn(6, 6, |_, _| rng.random_range(-1.0..1.0));
        let a = b.matmul_t(&b).unwrap();
        let (vals, vecs) = symmetric_eigen(&a);
        assert!(vals.windows(2).all(|w| w[0] >= w[1]));
        let av = a.matmul(&vecs).unwrap();
        for j in 0..6 {
            for i in 0..6 {
                assert!((av.get(i, j) - vals[j] * vecs.get(i, j)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn rank_one_basis_is_normalised_spectrum() {
        let s = [0.2, -0.5, 0.9, 0.1];
        let n = s.iter().map(|v| v * v).sum::<f64>().sqrt();
        let y = Cube::from_fn(5, 4, 4, |i, j, b| (1.0 + (i * 4 + j) as f64 * 0.1) * s[b]);
        let d = build_dictionary(&y, 1).unwrap();
        // largest-magnitude entry (0.9) is positive under the sign convention
        for b in 0..4 {
            assert!((d.basis().get(b, 0) - s[b] / n).abs() < 1e-10);
        }
        assert!(d.singular_values()[1] < 1e-6 * d.singular_values()[0]);
    }

    #[test]
    fn basis_is_orthonormal_with_sorted_spectrum() {
        let y = random_cube(2, 8, 8, 7);
        let d = build_dictionary(&y, 5).unwrap();
        assert_eq!(d.basis().shape(), (7, 5));
        let g = d.basis().t_matmul(d.basis()).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((g.get(i, j) - want).abs() < 1e-8);
            }
        }
        assert_eq!(d.singular_values().len(), 7);
        assert!(d.singular_values().windows(2).all(|w| w[0] >= w[1] && w[1] >= 0.0));
    }

    #[test]
    fn complete_basis_round_trip() {
        let y = random_cube(3, 6, 5, 4);
        let d = build_dictionary(&y, 4).unwrap();
        let back = reconstruct(&project(&y, &d).unwrap(), &d).unwrap();
        for (a, b) in back.data().iter().zip(y.data()) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn project_inverts_reconstruct() {
        let y = random_cube(4, 6, 6, 8);
        let d = build_dictionary(&y, 3).unwrap();
        let a = random_cube(5, 4, 3, 3);
        let back = project(&reconstruct(&a, &d).unwrap(), &d).unwrap();
        for (p, q) in back.data().iter().zip(a.data()) {
            assert!((p - q).abs() < 1e-8);
        }
    }

    #[test]
    fn reconstruct_cases() {
        let y = random_cube(6, 4, 4, 5);
        let d = build_dictionary(&y, 2).unwrap();
        let zero = reconstruct(&Cube::zeros(3, 3, 2), &d).unwrap();
        assert!(zero.data().iter().all(|&v| v == 0.0));

        let mut a = Cube::zeros(2, 2, 2);
        a.set(1, 0, 0, 1.0);
        let x = reconstruct(&a, &d).unwrap();
        assert_eq!(x.spectrum(1, 0), d.basis().col(0));
    }

    #[test]
    fn dimension_checks() {
        let y = random_cube(7, 4, 4, 5);
        assert!(matches!(build_dictionary(&y, 0), Err(Error::Parameter(_))));
        assert!(matches!(build_dictionary(&y, 6), Err(Error::Parameter(_))));
        let d = build_dictionary(&y, 2).unwrap();
        assert!(project(&Cube::zeros(2, 2, 4), &d).is_err());
        assert!(reconstruct(&Cube::zeros(2, 2, 3), &d).is_err());
        let pavia_like = random_cube(8, 64, 64, 93);
        assert_eq!(build_dictionary(&pavia_like, 10).unwrap().basis().shape(), (93, 10));
    }

    #[test]
    fn numerical_rank_of_products() {
        let m = Mat::from_fn(5, 4, |i, j| ((i + 1) * (j + 1)) as f64);
        assert_eq!(numerical_rank(&m, 1e-8), 1);
        assert_eq!(numerical_rank(&Mat::identity(4), 1e-8), 4);
        assert_eq!(numerical_rank(&Mat::zeros(3, 3), 1e-8), 0);
    }
}
