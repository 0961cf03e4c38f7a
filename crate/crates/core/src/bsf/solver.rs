//! Proximal alternating optimisation.
//!
//! Each outer iteration runs an inexact proximal-gradient solve for `A` and
//! an inexact projected-gradient solve for `R`, both anchored to the previous
//! iterate by `(λ/2)‖· − ·ᵏ‖²`. Every inner step is accepted only if it does
//! not increase its subproblem objective, which makes the outer objective
//! trace nonincreasing.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::prox::{group_norm, prox_rows};
use super::{nonzero_rows, BsfProblem, BsfState, SolverConfig};
use crate::degradation::upsample_replicate;
use crate::error::{Error, Result};
use crate::subspace::project;
use crate::tensor::{fold3, unfold3, Cube, Mat};

const POWER_ITERS: usize = 20;
const POWER_TOL: f64 = 1e-6;
const MAX_HALVINGS: usize = 20;

/// Result of one inner subproblem solve.
#[derive(Debug, Clone)]
pub struct InnerSolve {
    pub value: Mat,
    /// Subproblem objective at the start and after each accepted step.
    pub trace: Vec<f64>,
    /// Power-iteration estimate of the smooth part's Lipschitz constant.
    pub lipschitz: f64,
    /// Step size taken at each accepted step.
    pub steps: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SolveOutput {
    pub state: BsfState,
    /// `M × N × H` fused image `D A`.
    pub fused: Cube,
}

/// Largest eigenvalue of a symmetric positive semi-definite operator.
fn power_iteration(
    shape: (usize, usize),
    seed: u64,
    apply: impl Fn(&Mat) -> Result<Mat>,
) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = Mat::from_fn(shape.0, shape.1, |_, _| rng.random_range(-1.0..1.0));
    let n = v.frob_norm();
    v = v.scale(1.0 / n);
    let mut estimate = 0.0;
    for _ in 0..POWER_ITERS {
        let w = apply(&v)?;
        let norm = w.frob_norm();
        if norm == 0.0 || !norm.is_finite() {
            return Ok(norm);
        }
        let prev = estimate;
        estimate = norm;
        v = w.scale(1.0 / norm);
        if (estimate - prev).abs() <= POWER_TOL * estimate {
            break;
        }
    }
    Ok(estimate)
}

fn numerical(iteration: usize, message: &str) -> Error {
    Error::Numerical {
        iteration,
        message: message.to_string(),
    }
}

/// Inexact solve of `argmin_A g(A, R) + (λ/2)‖A − Aᵏ‖²`.
pub fn update_a(p: &BsfProblem, a_k: &Mat, r: &Mat, cfg: &SolverConfig) -> Result<InnerSolve> {
    let basis = p.dict().basis();
    let rd = r.matmul(basis)?;
    let rd_gram = rd.t_matmul(&rd)?;
    let dtd = basis.t_matmul(basis)?;
    let lipschitz = power_iteration(a_k.shape(), cfg.seed, |v| {
        let mut out = p.spatial_adjoint(&dtd.matmul(&p.spatial(v)?)?)?;
        out.axpy(1.0, &rd_gram.matmul(v)?);
        let mut out = out.scale(2.0);
        out.axpy(cfg.lambda, v);
        Ok(out)
    })?;
    if !(lipschitz > 0.0 && lipschitz.is_finite()) {
        return Err(numerical(0, "A-subproblem Lipschitz estimate is not positive"));
    }

    let total = |a: &Mat| -> Result<f64> {
        let (fy, fz) = p.data_terms(a, r)?;
        let anchor = a.sub(a_k)?.frob_norm_sq();
        Ok(fy + fz + 0.5 * cfg.lambda * anchor + cfg.alpha * group_norm(a, cfg.rho))
    };

    let mut a = a_k.clone();
    let mut current = total(&a)?;
    let mut trace = vec![current];
    let mut steps = Vec::new();
    'outer: for it in 0..cfg.inner_iters_a {
        let mut grad = p.gradient_a(&a, r)?;
        grad.axpy(cfg.lambda, &a.sub(a_k)?);
        if !grad.is_finite() {
            return Err(numerical(it, "non-finite gradient in the A update"));
        }
        let mut step = 1.0 / lipschitz;
        for _ in 0..=MAX_HALVINGS {
            let mut cand = a.clone();
            cand.axpy(-step, &grad);
            prox_rows(&mut cand, cfg.alpha * step, cfg.rho);
            let value = total(&cand)?;
            if !value.is_finite() {
                return Err(numerical(it, "non-finite objective in the A update"));
            }
            if value <= current {
                a = cand;
                current = value;
                trace.push(value);
                steps.push(step);
                continue 'outer;
            }
            step *= 0.5;
        }
        // no descent direction at any tried step: stationary for this solve
        break;
    }
    Ok(InnerSolve {
        value: a,
        trace,
        lipschitz,
        steps,
    })
}

/// Inexact solve of `argmin_{R ≥ 0} g(A, R) + (λ/2)‖R − Rᵏ‖²`.
pub fn update_r(p: &BsfProblem, a: &Mat, r_k: &Mat, cfg: &SolverConfig) -> Result<InnerSolve> {
    let da = p.dict().basis().matmul(a)?;
    let gram = da.matmul_t(&da)?;
    let cross = p.z().matmul_t(&da)?;
    let z_energy = p.z().frob_norm_sq();
    let sigma_sq = power_iteration(gram.shape(), cfg.seed.wrapping_add(1), |v| gram.matmul(v))?;
    let lipschitz = 2.0 * sigma_sq + cfg.lambda;

    // ‖R W − Z‖² expanded through W Wᵀ and Z Wᵀ
    let value = |r: &Mat| -> Result<f64> {
        let quad = r.matmul(&gram)?.inner(r);
        let lin = r.inner(&cross);
        let anchor = r.sub(r_k)?.frob_norm_sq();
        Ok(quad - 2.0 * lin + z_energy + 0.5 * cfg.lambda * anchor)
    };

    let mut r = r_k.map(|v| v.max(0.0));
    let mut current = value(&r)?;
    let mut trace = vec![current];
    let mut steps = Vec::new();
    'outer: for it in 0..cfg.inner_iters_r {
        let mut grad = r.matmul(&gram)?.sub(&cross)?.scale(2.0);
        grad.axpy(cfg.lambda, &r.sub(r_k)?);
        if !grad.is_finite() {
            return Err(numerical(it, "non-finite gradient in the R update"));
        }
        let mut step = 1.0 / lipschitz;
        for _ in 0..=MAX_HALVINGS {
            let mut cand = r.clone();
            cand.axpy(-step, &grad);
            cand.data_mut().iter_mut().for_each(|v| *v = v.max(0.0));
            let v = value(&cand)?;
            if !v.is_finite() {
                return Err(numerical(it, "non-finite objective in the R update"));
            }
            if v <= current {
                r = cand;
                current = v;
                trace.push(v);
                steps.push(step);
                continue 'outer;
            }
            step *= 0.5;
        }
        break;
    }
    Ok(InnerSolve {
        value: r,
        trace,
        lipschitz,
        steps,
    })
}

/// Warm start: coefficients of the pixel-replicated HSI and a uniform
/// spectral response whose rows sum to one.
pub fn init_state(p: &BsfProblem) -> Result<BsfState> {
    let (rows, cols, lr_rows, lr_cols) = p.grid();
    let hsi = fold3(p.y(), lr_rows, lr_cols)?;
    let up = upsample_replicate(&hsi, p.stride(), rows, cols)?;
    let a = unfold3(&project(&up, p.dict())?);
    let h_big = p.hsi_bands();
    let r = Mat::from_fn(p.msi_bands(), h_big, |_, _| 1.0 / h_big as f64);
    Ok(BsfState::new(a, r))
}

#[cfg(not(target_arch = "wasm32"))]
fn clock() -> impl Fn() -> f64 {
    let start = std::time::Instant::now();
    move || start.elapsed().as_secs_f64() * 1e3
}

#[cfg(target_arch = "wasm32")]
fn clock() -> impl Fn() -> f64 {
    || 0.0
}

/// Alternates [`update_a`] and [`update_r`] until the relative joint change
/// of `(A, R)` drops below `tol_rel` or `max_outer` iterations have run.
pub fn solve(p: &BsfProblem, cfg: &SolverConfig, init: Option<BsfState>) -> Result<SolveOutput> {
    cfg.validate()?;
    let mut state = match init {
        Some(s) => s,
        None => init_state(p)?,
    };
    let elapsed = clock();
    state.objective_trace = vec![p.objective(&state.a, &state.r_srf, cfg)?];
    state.step_norm_trace.clear();
    state.nnz_rows_trace.clear();
    state.wall_ms_trace.clear();

    for k in 0..cfg.max_outer {
        let a_next = update_a(p, &state.a, &state.r_srf, cfg)?.value;
        let r_next = update_r(p, &a_next, &state.r_srf, cfg)?.value;
        let change = a_next.sub(&state.a)?.frob_norm_sq() + r_next.sub(&state.r_srf)?.frob_norm_sq();
        let size = state.a.frob_norm_sq() + state.r_srf.frob_norm_sq();
        let rel = change.sqrt() / size.sqrt().max(1e-12);
        state.a = a_next;
        state.r_srf = r_next;
        let obj = p.objective(&state.a, &state.r_srf, cfg)?;
        if !obj.is_finite() || !rel.is_finite() {
            return Err(numerical(k, "objective diverged"));
        }
        state.objective_trace.push(obj);
        state.step_norm_trace.push(rel);
        state.nnz_rows_trace.push(nonzero_rows(&state.a));
        state.wall_ms_trace.push(elapsed());
        if rel < cfg.tol_rel {
            break;
        }
    }
    let fused = p.fused(&state.a)?;
    Ok(SolveOutput { state, fused })
}
