//! Capped-L1 group penalty and its proximal mapping.

use crate::tensor::Mat;

/// `ψ_ρ(x) = min(1, x / ρ)` for `x ≥ 0`.
#[inline]
pub fn capl1(x: f64, rho: f64) -> f64 {
    (x / rho).min(1.0)
}

/// `Σᵢ ψ_ρ(‖aᵢ‖)` over the rows of `a`.
pub fn group_norm(a: &Mat, rho: f64) -> f64 {
    (0..a.n_rows()).map(|i| capl1(a.row_norm(i), rho)).sum()
}

/// Radial length of `argmin_v weight·ψ_ρ(‖v‖) + ½‖v − x‖²` for `‖x‖ = norm`.
///
/// The minimiser is radial, so only its length is searched: the shrink
/// branch on `[0, ρ]` against the capped branch on `[ρ, ∞)`. When
/// `weight ≤ ρ²` this coincides with the familiar closed form
/// `(‖x‖ − weight/ρ)₊` below `ρ + weight/(2ρ)` and `‖x‖` above it.
#[inline]
pub fn prox_capl1_radius(norm: f64, weight: f64, rho: f64) -> f64 {
    let shrink = (norm - weight / rho).clamp(0.0, rho);
    let keep = norm.max(rho);
    let f_shrink = weight * shrink / rho + 0.5 * (shrink - norm).powi(2);
    let f_keep = weight + 0.5 * (keep - norm).powi(2);
    if f_shrink <= f_keep {
        shrink
    } else {
        keep
    }
}

/// Group proximal mapping of `weight · ψ_ρ(‖·‖)` applied to one vector.
pub fn prox_group_capl1(x: &[f64], weight: f64, rho: f64) -> Vec<f64> {
    let mut out = x.to_vec();
    prox_in_place(&mut out, weight, rho);
    out
}

fn prox_in_place(x: &mut [f64], weight: f64, rho: f64) {
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return;
    }
    let t = prox_capl1_radius(norm, weight, rho);
    if t == norm {
        return;
    }
    let s = t / norm;
    x.iter_mut().for_each(|v| *v *= s);
}

/// Row-wise proximal mapping of `weight · ‖·‖_{2,ψ}`.
pub fn prox_rows(a: &mut Mat, weight: f64, rho: f64) {
    for i in 0..a.n_rows() {
        prox_in_place(a.row_mut(i), weight, rho);
    }
}
