use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tensor::Cube;

/// Layer sizes and activation frequency of the two-convolution network.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplArch {
    /// MSI bands `h`.
    pub in_bands: usize,
    pub hidden: usize,
    /// Subspace dimension `L`.
    pub out_bands: usize,
    pub kernel_size: usize,
    /// Sine frequency ω.
    pub omega: f64,
}

impl SplArch {
    pub fn validate(&self) -> Result<()> {
        if self.kernel_size % 2 == 0 || !(3..=9).contains(&self.kernel_size) {
            return Err(Error::param(format!(
                "kernel size must be odd and within 3..=9, got {}",
                self.kernel_size
            )));
        }
        if self.in_bands == 0 || self.hidden == 0 || self.out_bands == 0 {
            return Err(Error::param("network widths must be positive"));
        }
        if !self.omega.is_finite() {
            return Err(Error::param("sine frequency must be finite"));
        }
        Ok(())
    }

    fn k2(&self) -> usize {
        self.kernel_size * self.kernel_size
    }
}

/// Every trainable tensor of the network. Also used for gradients and the
/// Adam moment buffers.
#[derive(Debug, Clone, PartialEq)]
pub struct SplParams {
    /// `hidden × in_bands × k × k`
    pub conv1_weight: Vec<f64>,
    pub conv1_bias: Vec<f64>,
    /// `out_bands × hidden × k × k`
    pub conv2_weight: Vec<f64>,
    pub conv2_bias: Vec<f64>,
    /// `out_bands × in_bands` pointwise residual map.
    pub skip: Vec<f64>,
}

pub const TENSOR_NAMES: [&str; 5] = [
    "conv1_weight",
    "conv1_bias",
    "conv2_weight",
    "conv2_bias",
    "skip",
];

impl SplParams {
    pub fn zeros(arch: &SplArch) -> Self {
        let k2 = arch.k2();
        SplParams {
            conv1_weight: vec![0.0; arch.hidden * arch.in_bands * k2],
            conv1_bias: vec![0.0; arch.hidden],
            conv2_weight: vec![0.0; arch.out_bands * arch.hidden * k2],
            conv2_bias: vec![0.0; arch.out_bands],
            skip: vec![0.0; arch.out_bands * arch.in_bands],
        }
    }

    pub fn tensors(&self) -> [&[f64]; 5] {
        [
            &self.conv1_weight,
            &self.conv1_bias,
            &self.conv2_weight,
            &self.conv2_bias,
            &self.skip,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut Vec<f64>; 5] {
        [
            &mut self.conv1_weight,
            &mut self.conv1_bias,
            &mut self.conv2_weight,
            &mut self.conv2_bias,
            &mut self.skip,
        ]
    }

    /// Logical shape of each tensor, in [`TENSOR_NAMES`] order.
    pub fn shapes(arch: &SplArch) -> [Vec<usize>; 5] {
        let k = arch.kernel_size;
        [
            vec![arch.hidden, arch.in_bands, k, k],
            vec![arch.hidden],
            vec![arch.out_bands, arch.hidden, k, k],
            vec![arch.out_bands],
            vec![arch.out_bands, arch.in_bands],
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }
}

/// `out = conv2(sin(ω · conv1(z))) + skip(z)` with zero-padded
/// stride-1 convolutions, so spatial dimensions are preserved.
#[derive(Debug, Clone, PartialEq)]
pub struct SplNetwork {
    arch: SplArch,
    params: SplParams,
}

/// Intermediate activations kept for the backward pass.
pub(crate) struct ForwardCache {
    pre: Vec<f64>,
    act: Vec<f64>,
}

impl SplNetwork {
    /// Uniform `±√(6 / fan_in)` weights per layer, zero biases.
    pub fn init(arch: SplArch, seed: u64) -> Result<Self> {
        arch.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = SplParams::zeros(&arch);
        let k2 = arch.k2();
        let fill = |v: &mut Vec<f64>, fan_in: usize, rng: &mut ChaCha8Rng| {
            let bound = (6.0 / fan_in as f64).sqrt();
            v.iter_mut().for_each(|w| *w = rng.random_range(-bound..bound));
        };
        fill(&mut params.conv1_weight, arch.in_bands * k2, &mut rng);
        fill(&mut params.conv2_weight, arch.hidden * k2, &mut rng);
        fill(&mut params.skip, arch.in_bands, &mut rng);
        Ok(SplNetwork { arch, params })
    }

    pub fn from_params(arch: SplArch, params: SplParams) -> Result<Self> {
        arch.validate()?;
        let want = SplParams::zeros(&arch);
        for (name, (a, b)) in TENSOR_NAMES
            .iter()
            .zip(params.tensors().iter().zip(want.tensors()))
        {
            if a.len() != b.len() {
                return Err(Error::shape(format!(
                    "{name} has {} values, architecture needs {}",
                    a.len(),
                    b.len()
                )));
            }
        }
        if !params.is_finite() {
            return Err(Error::param("network parameters must be finite"));
        }
        Ok(SplNetwork { arch, params })
    }

    pub fn arch(&self) -> &SplArch {
        &self.arch
    }

    pub fn params(&self) -> &SplParams {
        &self.params
    }

    pub(crate) fn params_mut(&mut self) -> &mut SplParams {
        &mut self.params
    }

    fn check_input(&self, z: &Cube) -> Result<()> {
        if z.bands() != self.arch.in_bands {
            return Err(Error::shape(format!(
                "network expects {} input bands, got {}",
                self.arch.in_bands,
                z.bands()
            )));
        }
        Ok(())
    }

    pub fn forward(&self, z: &Cube) -> Result<Cube> {
        self.check_input(z)?;
        Ok(self.forward_cached(z).0)
    }

    pub(crate) fn forward_cached(&self, z: &Cube) -> (Cube, ForwardCache) {
        let a = &self.arch;
        let (rows, cols) = (z.rows(), z.cols());
        let pre = conv2d(
            z.data(),
            rows,
            cols,
            a.in_bands,
            &self.params.conv1_weight,
            &self.params.conv1_bias,
            a.hidden,
            a.kernel_size,
        );
        let act: Vec<f64> = pre.iter().map(|&v| (a.omega * v).sin()).collect();
        let mut out = conv2d(
            &act,
            rows,
            cols,
            a.hidden,
            &self.params.conv2_weight,
            &self.params.conv2_bias,
            a.out_bands,
            a.kernel_size,
        );
        pointwise(z.data(), rows * cols, a.in_bands, &self.params.skip, a.out_bands, &mut out);
        (
            Cube::from_raw(rows, cols, a.out_bands, out),
            ForwardCache { pre, act },
        )
    }

    /// Gradients of a loss with respect to every parameter, given
    /// `d_out = ∂loss/∂out` for the forward pass over `z`.
    pub(crate) fn backward_from(
        &self,
        z: &Cube,
        cache: &ForwardCache,
        d_out: &[f64],
    ) -> SplParams {
        let a = &self.arch;
        let (rows, cols) = (z.rows(), z.cols());
        let n = rows * cols;
        let mut g = SplParams::zeros(a);

        // skip path
        for l in 0..a.out_bands {
            let dl = &d_out[l * n..(l + 1) * n];
            for c in 0..a.in_bands {
                g.skip[l * a.in_bands + c] = dot(dl, &z.data()[c * n..(c + 1) * n]);
            }
        }

        let d_act = conv2d_backward(
            &cache.act,
            rows,
            cols,
            a.hidden,
            &self.params.conv2_weight,
            a.out_bands,
            a.kernel_size,
            d_out,
            &mut g.conv2_weight,
            &mut g.conv2_bias,
            true,
        );
        let d_pre: Vec<f64> = d_act
            .iter()
            .zip(&cache.pre)
            .map(|(&d, &p)| d * a.omega * (a.omega * p).cos())
            .collect();
        conv2d_backward(
            z.data(),
            rows,
            cols,
            a.in_bands,
            &self.params.conv1_weight,
            a.hidden,
            a.kernel_size,
            &d_pre,
            &mut g.conv1_weight,
            &mut g.conv1_bias,
            false,
        );
        g
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Valid index range of `i` such that `i + d` stays inside `0..len`.
#[inline]
fn valid_range(len: usize, d: isize) -> (usize, usize) {
    let lo = (-d).max(0) as usize;
    let hi = (len as isize - d).clamp(0, len as isize) as usize;
    (lo, hi.max(lo))
}

/// `dst(i, j) += w · src(i + di, j + dj)`, zero outside `src`.
fn add_shifted(dst: &mut [f64], src: &[f64], rows: usize, cols: usize, di: isize, dj: isize, w: f64) {
    let (i0, i1) = valid_range(rows, di);
    let (j0, j1) = valid_range(cols, dj);
    if j0 >= j1 {
        return;
    }
    for i in i0..i1 {
        let si = (i as isize + di) as usize;
        let srow = &src[si * cols + (j0 as isize + dj) as usize..si * cols + (j1 as isize + dj) as usize];
        for (o, &s) in dst[i * cols + j0..i * cols + j1].iter_mut().zip(srow) {
            *o += w * s;
        }
    }
}

/// `Σ_{i,j} a(i, j) · b(i + di, j + dj)`, zero outside `b`.
fn shifted_dot(a: &[f64], b: &[f64], rows: usize, cols: usize, di: isize, dj: isize) -> f64 {
    let (i0, i1) = valid_range(rows, di);
    let (j0, j1) = valid_range(cols, dj);
    let mut s = 0.0;
    if j0 >= j1 {
        return s;
    }
    for i in i0..i1 {
        let si = (i as isize + di) as usize;
        let brow = &b[si * cols + (j0 as isize + dj) as usize..si * cols + (j1 as isize + dj) as usize];
        s += dot(&a[i * cols + j0..i * cols + j1], brow);
    }
    s
}

/// Zero-padded cross-correlation:
/// `out[o](i, j) = bias[o] + Σ_{c,a,b} w[o][c][a][b] · x[c](i + a − p, j + b − p)`.
#[allow(clippy::too_many_arguments)]
fn conv2d(
    x: &[f64],
    rows: usize,
    cols: usize,
    cin: usize,
    w: &[f64],
    bias: &[f64],
    cout: usize,
    k: usize,
) -> Vec<f64> {
    let n = rows * cols;
    let p = (k / 2) as isize;
    let mut out = vec![0.0; cout * n];
    for o in 0..cout {
        let dst = &mut out[o * n..(o + 1) * n];
        dst.iter_mut().for_each(|v| *v = bias[o]);
        for c in 0..cin {
            let src = &x[c * n..(c + 1) * n];
            for a in 0..k {
                for b in 0..k {
                    let wt = w[((o * cin + c) * k + a) * k + b];
                    if wt != 0.0 {
                        add_shifted(dst, src, rows, cols, a as isize - p, b as isize - p, wt);
                    }
                }
            }
        }
    }
    out
}

/// Accumulates weight and bias gradients of [`conv2d`] into `gw`/`gb` and
/// returns `∂loss/∂x` when `want_input` is set.
#[allow(clippy::too_many_arguments)]
fn conv2d_backward(
    x: &[f64],
    rows: usize,
    cols: usize,
    cin: usize,
    w: &[f64],
    cout: usize,
    k: usize,
    d_out: &[f64],
    gw: &mut [f64],
    gb: &mut [f64],
    want_input: bool,
) -> Vec<f64> {
    let n = rows * cols;
    let p = (k / 2) as isize;
    let mut dx = if want_input { vec![0.0; cin * n] } else { Vec::new() };
    for o in 0..cout {
        let dout = &d_out[o * n..(o + 1) * n];
        gb[o] += dout.iter().sum::<f64>();
        for c in 0..cin {
            let xs = &x[c * n..(c + 1) * n];
            for a in 0..k {
                for b in 0..k {
                    let (di, dj) = (a as isize - p, b as isize - p);
                    let idx = ((o * cin + c) * k + a) * k + b;
                    gw[idx] += shifted_dot(dout, xs, rows, cols, di, dj);
                    if want_input {
                        add_shifted(&mut dx[c * n..(c + 1) * n], dout, rows, cols, -di, -dj, w[idx]);
                    }
                }
            }
        }
    }
    dx
}

/// `out[l](p) += Σ_c m[l][c] · x[c](p)`
fn pointwise(x: &[f64], n: usize, cin: usize, m: &[f64], cout: usize, out: &mut [f64]) {
    for l in 0..cout {
        let dst = &mut out[l * n..(l + 1) * n];
        for c in 0..cin {
            let wt = m[l * cin + c];
            if wt == 0.0 {
                continue;
            }
            for (o, &v) in dst.iter_mut().zip(&x[c * n..(c + 1) * n]) {
                *o += wt * v;
            }
        }
    }
}
