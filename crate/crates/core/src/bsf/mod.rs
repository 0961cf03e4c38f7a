//! Blind sparse fusion.
//!
//! The fused image is `X = D A` with `D` a fixed orthonormal spectral
//! dictionary. `A` and the spectral response `R ≥ 0` minimise
//!
//! ```text
//! ‖D A B S − Y‖²_F + ‖R D A − Z‖²_F + α Σᵢ ψ_ρ(‖aᵢ‖)
//! ```
//!
//! where `B S` is the preset blur followed by stride sampling and `ψ_ρ` is
//! the capped-L1 function. Zero rows of `A` lower the rank of `D A`, so an
//! over-sized dictionary is pruned rather than overfitted.

mod prox;
mod solver;

pub use prox::{capl1, group_norm, prox_capl1_radius, prox_group_capl1, prox_rows};
pub use solver::{init_state, solve, update_a, update_r, InnerSolve, SolveOutput};

use crate::degradation::{adjoint_blur_circular, blur_circular, downsample, upsample_adjoint, BlurKernel};
use crate::error::{Error, Result};
use crate::subspace::Dictionary;
use crate::tensor::{fold3_owned, unfold3, Cube, Mat};

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Group-sparsity weight α.
    pub alpha: f64,
    /// Capped-L1 knee ρ.
    pub rho: f64,
    /// Proximal anchor weight λ.
    pub lambda: f64,
    pub max_outer: usize,
    pub tol_rel: f64,
    pub inner_iters_a: usize,
    pub inner_iters_r: usize,
    /// Seeds the power iterations.
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            alpha: 2e-1,
            rho: 1.0,
            lambda: 1e-3,
            max_outer: 200,
            tol_rel: 1e-4,
            inner_iters_a: 10,
            inner_iters_r: 10,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("alpha", self.alpha), ("rho", self.rho), ("lambda", self.lambda), ("tol_rel", self.tol_rel)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::param(format!("{name} must be positive, got {v}")));
            }
        }
        if self.tol_rel >= 1.0 {
            return Err(Error::param("tol_rel must be below 1"));
        }
        Ok(())
    }
}

/// Iterates and diagnostics carried across outer iterations.
#[derive(Debug, Clone, PartialEq)]
pub struct BsfState {
    /// `r × MN` coefficients.
    pub a: Mat,
    /// `h × H` spectral response estimate, elementwise ≥ 0.
    pub r_srf: Mat,
    /// Objective at the initial point, then after every outer iteration.
    pub objective_trace: Vec<f64>,
    /// Relative joint change of `(A, R)` per outer iteration.
    pub step_norm_trace: Vec<f64>,
    /// Rows of `A` with nonzero norm, per outer iteration.
    pub nnz_rows_trace: Vec<usize>,
    pub wall_ms_trace: Vec<f64>,
}

impl BsfState {
    pub fn new(a: Mat, r_srf: Mat) -> Self {
        BsfState {
            a,
            r_srf,
            objective_trace: Vec::new(),
            step_norm_trace: Vec::new(),
            nnz_rows_trace: Vec::new(),
            wall_ms_trace: Vec::new(),
        }
    }

    pub fn iterations(&self) -> usize {
        self.step_norm_trace.len()
    }
}

/// Number of rows of `a` with nonzero norm.
pub fn nonzero_rows(a: &Mat) -> usize {
    (0..a.n_rows()).filter(|&i| a.row_norm(i) > 0.0).count()
}

/// Observations and fixed operators of one fusion problem.
#[derive(Debug, Clone)]
pub struct BsfProblem {
    y: Mat,
    z: Mat,
    dict: Dictionary,
    blur: BlurKernel,
    stride: usize,
    rows: usize,
    cols: usize,
    lr_rows: usize,
    lr_cols: usize,
}

impl BsfProblem {
    /// `hsi` is the (registered) `m × n × H` cube, `msi` the `M × N × h`
    /// cube; `M = m·stride` and `N = n·stride` exactly.
    pub fn new(
        hsi: &Cube,
        msi: &Cube,
        dict: Dictionary,
        blur: BlurKernel,
        stride: usize,
    ) -> Result<Self> {
        if stride == 0 || msi.rows() != hsi.rows() * stride || msi.cols() != hsi.cols() * stride {
            return Err(Error::param(format!(
                "stride {stride} does not map the {}x{} MSI onto the {}x{} HSI",
                msi.rows(),
                msi.cols(),
                hsi.rows(),
                hsi.cols()
            )));
        }
        if dict.bands() != hsi.bands() {
            return Err(Error::shape(format!(
                "dictionary has {} bands, HSI has {}",
                dict.bands(),
                hsi.bands()
            )));
        }
        if blur.size() > msi.rows().min(msi.cols()) {
            return Err(Error::shape("blur kernel larger than the MSI grid"));
        }
        Ok(BsfProblem {
            y: unfold3(hsi),
            z: unfold3(msi),
            dict,
            blur,
            stride,
            rows: msi.rows(),
            cols: msi.cols(),
            lr_rows: hsi.rows(),
            lr_cols: hsi.cols(),
        })
    }

    pub fn y(&self) -> &Mat {
        &self.y
    }

    pub fn z(&self) -> &Mat {
        &self.z
    }

    pub fn dict(&self) -> &Dictionary {
        &self.dict
    }

    pub fn blur(&self) -> &BlurKernel {
        &self.blur
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    /// `(M, N, m, n)`
    pub fn grid(&self) -> (usize, usize, usize, usize) {
        (self.rows, self.cols, self.lr_rows, self.lr_cols)
    }

    pub fn hsi_bands(&self) -> usize {
        self.y.n_rows()
    }

    pub fn msi_bands(&self) -> usize {
        self.z.n_rows()
    }

    pub fn rank(&self) -> usize {
        self.dict.dim()
    }

    fn check(&self, a: &Mat, r: &Mat) -> Result<()> {
        if a.shape() != (self.rank(), self.rows * self.cols) {
            return Err(Error::shape(format!(
                "A is {:?}, expected {:?}",
                a.shape(),
                (self.rank(), self.rows * self.cols)
            )));
        }
        if r.shape() != (self.msi_bands(), self.hsi_bands()) {
            return Err(Error::shape(format!(
                "R is {:?}, expected {:?}",
                r.shape(),
                (self.msi_bands(), self.hsi_bands())
            )));
        }
        Ok(())
    }

    /// `A ↦ A B S`: blur then stride-sample every row of `A` as an image.
    pub fn spatial(&self, a: &Mat) -> Result<Mat> {
        let cube = fold3_owned(a.clone(), self.rows, self.cols);
        let low = downsample(&blur_circular(&cube, &self.blur)?, self.stride)?;
        Ok(unfold3(&low))
    }

    /// Transpose of [`BsfProblem::spatial`].
    pub fn spatial_adjoint(&self, e: &Mat) -> Result<Mat> {
        let cube = fold3_owned(e.clone(), self.lr_rows, self.lr_cols);
        let up = upsample_adjoint(&cube, self.stride, self.rows, self.cols)?;
        Ok(unfold3(&adjoint_blur_circular(&up, &self.blur)?))
    }

    /// Residuals `(D A B S − Y, R D A − Z)`.
    fn residuals(&self, a: &Mat, r: &Mat) -> Result<(Mat, Mat)> {
        let basis = self.dict.basis();
        let ey = basis.matmul(&self.spatial(a)?)?.sub(&self.y)?;
        let rd = r.matmul(basis)?;
        let ez = rd.matmul(a)?.sub(&self.z)?;
        Ok((ey, ez))
    }

    /// The two squared data-fit terms.
    pub fn data_terms(&self, a: &Mat, r: &Mat) -> Result<(f64, f64)> {
        self.check(a, r)?;
        let (ey, ez) = self.residuals(a, r)?;
        Ok((ey.frob_norm_sq(), ez.frob_norm_sq()))
    }

    /// Full objective including `α ‖A‖_{2,ψ}`.
    pub fn objective(&self, a: &Mat, r: &Mat, cfg: &SolverConfig) -> Result<f64> {
        let (fy, fz) = self.data_terms(a, r)?;
        Ok(fy + fz + cfg.alpha * group_norm(a, cfg.rho))
    }

    /// Gradient of the data terms with respect to `A`.
    pub fn gradient_a(&self, a: &Mat, r: &Mat) -> Result<Mat> {
        self.check(a, r)?;
        let basis = self.dict.basis();
        let (ey, ez) = self.residuals(a, r)?;
        let mut g = self.spatial_adjoint(&basis.t_matmul(&ey)?)?;
        let rd = r.matmul(basis)?;
        g.axpy(1.0, &rd.t_matmul(&ez)?);
        Ok(g.scale(2.0))
    }

    /// Gradient of the data terms with respect to `R`.
    pub fn gradient_r(&self, a: &Mat, r: &Mat) -> Result<Mat> {
        self.check(a, r)?;
        let da = self.dict.basis().matmul(a)?;
        let (_, ez) = self.residuals(a, r)?;
        Ok(ez.matmul_t(&da)?.scale(2.0))
    }

    /// Fused `M × N × H` cube for coefficients `a`.
    pub fn fused(&self, a: &Mat) -> Result<Cube> {
        Ok(fold3_owned(self.dict.basis().matmul(a)?, self.rows, self.cols))
    }
}
