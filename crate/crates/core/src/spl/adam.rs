use super::network::{SplNetwork, SplParams};
use super::TrainConfig;
use crate::error::{Error, Result};

/// First and second moment estimates plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: SplParams,
    pub v: SplParams,
    pub t: u64,
}

impl AdamState {
    pub fn new(net: &SplNetwork) -> Self {
        AdamState {
            m: SplParams::zeros(net.arch()),
            v: SplParams::zeros(net.arch()),
            t: 0,
        }
    }
}

/// One bias-corrected Adam update of every parameter tensor.
pub fn adam_step(
    net: &mut SplNetwork,
    grads: &SplParams,
    state: &mut AdamState,
    cfg: &TrainConfig,
) -> Result<()> {
    let shapes_match = net
        .params()
        .tensors()
        .iter()
        .zip(grads.tensors())
        .zip(state.m.tensors())
        .all(|((p, g), m)| p.len() == g.len() && p.len() == m.len());
    if !shapes_match {
        return Err(Error::shape("gradient or optimiser state does not match the network"));
    }
    state.t += 1;
    let (b1, b2) = (cfg.adam_beta1, cfg.adam_beta2);
    let c1 = 1.0 - b1.powi(state.t as i32);
    let c2 = 1.0 - b2.powi(state.t as i32);
    let lr = cfg.learning_rate;
    let eps = cfg.adam_eps;

    let params = net.params_mut().tensors_mut();
    let ms = state.m.tensors_mut();
    let vs = state.v.tensors_mut();
    for (((p, g), m), v) in params.into_iter().zip(grads.tensors()).zip(ms).zip(vs) {
        for i in 0..p.len() {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spl::SplArch;

    fn arch() -> SplArch {
        SplArch {
            in_bands: 2,
            hidden: 3,
            out_bands: 2,
            kernel_size: 3,
            omega: 1.0,
        }
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut net = SplNetwork::init(arch(), 1).unwrap();
        let before = net.clone();
        let mut st = AdamState::new(&net);
        let g = SplParams::zeros(net.arch());
        for _ in 0..3 {
            adam_step(&mut net, &g, &mut st, &TrainConfig::default()).unwrap();
        }
        assert_eq!(net, before);
    }

    #[test]
    fn first_step_matches_hand_computation() {
        let mut net = SplNetwork::init(arch(), 2).unwrap();
        let before = net.params().skip.clone();
        let mut st = AdamState::new(&net);
        let mut g = SplParams::zeros(net.arch());
        g.skip = vec![0.5, -2.0, 1e-9, 0.0];
        let cfg = TrainConfig::default();
        adam_step(&mut net, &g, &mut st, &cfg).unwrap();
        // m̂ = g, v̂ = g², so Δ = −lr · g / (|g| + eps)
        for i in 0..4 {
            let gi = g.skip[i];
            let want = before[i] - cfg.learning_rate * gi / (gi.abs() + cfg.adam_eps);
            assert!((net.params().skip[i] - want).abs() < 1e-15, "entry {i}");
        }
        // second step with the same gradient, recurrences unrolled by hand
        adam_step(&mut net, &g, &mut st, &cfg).unwrap();
        let gi = g.skip[1];
        let m = (1.0 - 0.9) * gi * 0.9 + (1.0 - 0.9) * gi;
        let v = (1.0 - 0.999) * gi * gi * 0.999 + (1.0 - 0.999) * gi * gi;
        let step2 = (m / (1.0 - 0.81)) / ((v / (1.0 - 0.999f64.powi(2))).sqrt() + 1e-8);
        let step1 = gi / (gi.abs() + 1e-8);
        let want = before[1] - 1e-3 * (step1 + step2);
        assert!((net.params().skip[1] - want).abs() < 1e-14);
    }

    #[test]
    fn reproducible() {
        let run = || {
            let mut net = SplNetwork::init(arch(), 3).unwrap();
            let mut st = AdamState::new(&net);
            let mut g = SplParams::zeros(net.arch());
            g.conv1_weight.iter_mut().enumerate().for_each(|(i, v)| *v = (i as f64).sin());
            for _ in 0..2 {
                adam_step(&mut net, &g, &mut st, &TrainConfig::default()).unwrap();
            }
            (net, st)
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn mismatched_state_rejected() {
        let mut net = SplNetwork::init(arch(), 4).unwrap();
        let other = SplNetwork::init(SplArch { hidden: 5, ..arch() }, 4).unwrap();
        let mut st = AdamState::new(&other);
        let g = SplParams::zeros(net.arch());
        assert!(adam_step(&mut net, &g, &mut st, &TrainConfig::default()).is_err());
    }
}
