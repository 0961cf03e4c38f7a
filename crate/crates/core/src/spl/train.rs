use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::adam::{adam_step, AdamState};
use super::network::{SplArch, SplNetwork, SplParams};
use super::TrainConfig;
use crate::degradation::{blur_circular, downsample, BlurKernel};
use crate::error::{Error, Result};
use crate::subspace::{build_dictionary, project, reconstruct, Dictionary};
use crate::tensor::Cube;

/// Ordered training targets sharing one set of dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    members: Vec<Cube>,
}

impl TrainingSet {
    pub fn new(first: Cube) -> Self {
        TrainingSet {
            members: vec![first],
        }
    }

    pub fn from_members(members: Vec<Cube>) -> Result<Self> {
        let Some(first) = members.first() else {
            return Err(Error::param("training set is empty"));
        };
        if members.iter().any(|m| !m.same_dims(first)) {
            return Err(Error::shape("training set members differ in dimensions"));
        }
        Ok(TrainingSet { members })
    }

    pub fn push(&mut self, c: Cube) -> Result<()> {
        if !c.same_dims(&self.members[0]) {
            return Err(Error::shape(format!(
                "new member {:?} does not match {:?}",
                c.dims(),
                self.members[0].dims()
            )));
        }
        self.members.push(c);
        Ok(())
    }

    pub fn members(&self) -> &[Cube] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    fn windows(&self, top: usize, left: usize, size: usize) -> TrainingSet {
        TrainingSet {
            members: self
                .members
                .iter()
                .map(|m| m.window(top, left, size, size))
                .collect(),
        }
    }
}

/// Per-sample penalty applied to `prediction − target`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LossKind {
    L1,
    /// Huber smoothing of `|r|`: quadratic below `delta`.
    Huber { delta: f64 },
}

impl LossKind {
    #[inline]
    fn value(self, r: f64) -> f64 {
        match self {
            LossKind::L1 => r.abs(),
            LossKind::Huber { delta } => {
                if r.abs() <= delta {
                    r * r / (2.0 * delta)
                } else {
                    r.abs() - delta / 2.0
                }
            }
        }
    }

    #[inline]
    fn derivative(self, r: f64) -> f64 {
        match self {
            // subgradient 0 at r = 0
            LossKind::L1 => {
                if r > 0.0 {
                    1.0
                } else if r < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
            LossKind::Huber { delta } => {
                if r.abs() <= delta {
                    r / delta
                } else {
                    r.signum()
                }
            }
        }
    }
}

/// Mean absolute error per sample, averaged uniformly over the members.
pub fn loss_l1(pred: &Cube, set: &TrainingSet) -> Result<f64> {
    loss_with(pred, set, LossKind::L1)
}

pub fn loss_with(pred: &Cube, set: &TrainingSet, kind: LossKind) -> Result<f64> {
    check_pred(pred, set)?;
    let count = pred.data().len() as f64;
    let total: f64 = set
        .members
        .iter()
        .map(|m| {
            pred.data()
                .iter()
                .zip(m.data())
                .map(|(p, t)| kind.value(p - t))
                .sum::<f64>()
                / count
        })
        .sum();
    Ok(total / set.len() as f64)
}

fn check_pred(pred: &Cube, set: &TrainingSet) -> Result<()> {
    if set.is_empty() {
        return Err(Error::param("training set is empty"));
    }
    if !pred.same_dims(&set.members[0]) {
        return Err(Error::shape(format!(
            "prediction {:?} vs targets {:?}",
            pred.dims(),
            set.members[0].dims()
        )));
    }
    Ok(())
}

/// Loss and parameter gradients of the L1 objective for input `z`.
pub fn backward(net: &SplNetwork, z: &Cube, set: &TrainingSet) -> Result<(f64, SplParams)> {
    backward_with(net, z, set, LossKind::L1)
}

pub fn backward_with(
    net: &SplNetwork,
    z: &Cube,
    set: &TrainingSet,
    kind: LossKind,
) -> Result<(f64, SplParams)> {
    if z.bands() != net.arch().in_bands {
        return Err(Error::shape(format!(
            "network expects {} input bands, got {}",
            net.arch().in_bands,
            z.bands()
        )));
    }
    let (pred, cache) = net.forward_cached(z);
    check_pred(&pred, set)?;
    let count = pred.data().len() as f64;
    let scale = 1.0 / (count * set.len() as f64);
    let mut d_out = vec![0.0; pred.data().len()];
    let mut loss = 0.0;
    for m in &set.members {
        for ((d, &p), &t) in d_out.iter_mut().zip(pred.data()).zip(m.data()) {
            let r = p - t;
            loss += kind.value(r);
            *d += scale * kind.derivative(r);
        }
    }
    Ok((loss * scale, net.backward_from(z, &cache, &d_out)))
}

/// Top-left corners of all `size × size` windows on the stride grid, plus
/// edge-anchored windows reaching the last row and column, shuffled by
/// `seed`.
pub fn patch_origins(
    rows: usize,
    cols: usize,
    size: usize,
    stride: usize,
    seed: u64,
) -> Result<Vec<(usize, usize)>> {
    if size == 0 || size > rows.min(cols) {
        return Err(Error::param(format!(
            "patch size {size} does not fit a {rows}x{cols} image"
        )));
    }
    if stride == 0 {
        return Err(Error::param("patch stride must be positive"));
    }
    let axis = |len: usize| {
        let mut v: Vec<usize> = (0..=len - size).step_by(stride).collect();
        if *v.last().unwrap() + size < len {
            v.push(len - size);
        }
        v
    };
    let mut origins: Vec<(usize, usize)> = axis(rows)
        .into_iter()
        .flat_map(|i| axis(cols).into_iter().map(move |j| (i, j)))
        .collect();
    origins.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok(origins)
}

pub fn extract_patches(c: &Cube, size: usize, stride: usize, seed: u64) -> Result<Vec<Cube>> {
    Ok(patch_origins(c.rows(), c.cols(), size, stride, seed)?
        .into_iter()
        .map(|(i, j)| c.window(i, j, size, size))
        .collect())
}

fn epoch_seed(base: u64, cycle: usize, epoch: usize) -> u64 {
    base ^ ((cycle as u64) << 32 | epoch as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Runs `epochs` passes of single-patch Adam steps over `input` → `targets`
/// and returns the full-image loss after each epoch. On return the network
/// holds the parameters of the epoch with the lowest loss.
#[allow(clippy::too_many_arguments)]
pub fn train_epochs(
    net: &mut SplNetwork,
    state: &mut AdamState,
    input: &Cube,
    targets: &TrainingSet,
    cfg: &TrainConfig,
    epochs: usize,
    cycle: usize,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    let size = cfg.patch_size.min(input.rows()).min(input.cols());
    let stride = cfg.patch_stride.min(size);
    let mut trace = Vec::with_capacity(epochs);
    let mut best: Option<(f64, SplParams)> = None;
    for epoch in 0..epochs {
        for (top, left) in patch_origins(
            input.rows(),
            input.cols(),
            size,
            stride,
            epoch_seed(cfg.seed, cycle, epoch),
        )? {
            let zp = input.window(top, left, size, size);
            let tp = targets.windows(top, left, size);
            let (_, grads) = backward(net, &zp, &tp)?;
            adam_step(net, &grads, state, cfg)?;
        }
        if !net.params().is_finite() {
            return Err(Error::Numerical {
                iteration: epoch,
                message: "network parameters diverged".into(),
            });
        }
        let loss = loss_l1(&net.forward(input)?, targets)?;
        if best.as_ref().is_none_or(|(b, _)| loss < *b) {
            best = Some((loss, net.params().clone()));
        }
        trace.push(loss);
    }
    if let Some((_, params)) = best {
        *net.params_mut() = params;
    }
    Ok(trace)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossRecord {
    pub cycle: usize,
    pub epoch: usize,
    pub loss: f64,
}

#[derive(Debug, Clone)]
pub struct SdrOutcome {
    pub network: SplNetwork,
    /// Registered HSI from the last cycle.
    pub registered: Cube,
    pub dictionary: Dictionary,
    pub trace: Vec<LossRecord>,
    /// Number of training-set members used in each cycle.
    pub set_sizes: Vec<usize>,
}

/// Cyclic spectral-domain registration.
///
/// Builds an `l`-dimensional dictionary from `y`, then per cycle: projects
/// every training member onto it, trains the network from the stride-sampled
/// MSI to those coefficients, super-resolves the full MSI, and blurs with
/// `d_hat` and samples it back onto the HSI grid. Each cycle's output joins
/// the training set of the next.
pub fn train_sdr(
    y: &Cube,
    z: &Cube,
    d_hat: &BlurKernel,
    stride: usize,
    cfg: &TrainConfig,
    l: usize,
) -> Result<SdrOutcome> {
    cfg.validate()?;
    if stride == 0 || z.rows() != y.rows() * stride || z.cols() != y.cols() * stride {
        return Err(Error::param(format!(
            "stride {stride} does not map the {}x{} MSI onto the {}x{} HSI",
            z.rows(),
            z.cols(),
            y.rows(),
            y.cols()
        )));
    }
    let dictionary = build_dictionary(y, l)?;
    let z_down = downsample(z, stride)?;
    let arch = SplArch {
        in_bands: z.bands(),
        hidden: cfg.hidden,
        out_bands: l,
        kernel_size: cfg.kernel_size,
        omega: cfg.omega,
    };
    let mut net = SplNetwork::init(arch, cfg.seed)?;
    let mut state = AdamState::new(&net);
    let mut set = TrainingSet::new(y.clone());
    let mut trace = Vec::new();
    let mut set_sizes = Vec::with_capacity(cfg.cycles);
    let mut registered = None;

    for cycle in 0..cfg.cycles {
        let targets = TrainingSet::from_members(
            set.members()
                .iter()
                .map(|m| project(m, &dictionary))
                .collect::<Result<_>>()?,
        )?;
        set_sizes.push(targets.len());
        let losses = train_epochs(
            &mut net,
            &mut state,
            &z_down,
            &targets,
            cfg,
            cfg.epochs_per_cycle,
            cycle,
        )?;
        trace.extend(losses.into_iter().enumerate().map(|(epoch, loss)| LossRecord {
            cycle,
            epoch,
            loss,
        }));
        let hr = reconstruct(&net.forward(z)?, &dictionary)?;
        let y_r = downsample(&blur_circular(&hr, d_hat)?, stride)?.with_scale(y.scale());
        set.push(y_r.clone())?;
        registered = Some(y_r);
    }

    Ok(SdrOutcome {
        network: net,
        registered: registered.expect("at least one cycle"),
        dictionary,
        trace,
        set_sizes,
    })
}
