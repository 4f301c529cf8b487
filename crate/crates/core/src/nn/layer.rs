use rand::Rng;
use serde::{Deserialize, Serialize};

use super::activation::Activation;
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Kernel geometry shared by every convolution in the crate.
pub const CONV_KERNEL: usize = 3;
pub const CONV_STRIDE: usize = 2;
pub const CONV_PADDING: usize = 1;
pub const DECONV_OUTPUT_PADDING: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LayerKind {
    Dense,
    Conv2d,
    Deconv2d,
}

/// Size hyperparameters of one layer. `out` is output features for dense
/// layers and output channels for (de)convolutions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LayerHyper {
    pub out: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    pub output_padding: usize,
}

impl LayerHyper {
    pub fn dense(out: usize) -> Self {
        LayerHyper { out, kernel: 0, stride: 0, padding: 0, output_padding: 0 }
    }

    pub fn conv(out: usize) -> Self {
        LayerHyper {
            out,
            kernel: CONV_KERNEL,
            stride: CONV_STRIDE,
            padding: CONV_PADDING,
            output_padding: 0,
        }
    }

    pub fn deconv(out: usize) -> Self {
        LayerHyper {
            out,
            kernel: CONV_KERNEL,
            stride: CONV_STRIDE,
            padding: CONV_PADDING,
            output_padding: DECONV_OUTPUT_PADDING,
        }
    }
}

/// Spatial output size of a strided convolution; `None` when it collapses.
pub fn conv_out_size(input: usize, kernel: usize, stride: usize, padding: usize) -> Option<usize> {
    let padded = input + 2 * padding;
    if padded < kernel || stride == 0 {
        return None;
    }
    Some((padded - kernel) / stride + 1)
}

/// Spatial output size of a transposed convolution.
pub fn deconv_out_size(
    input: usize,
    kernel: usize,
    stride: usize,
    padding: usize,
    output_padding: usize,
) -> Option<usize> {
    let grown = (input.checked_sub(1)?) * stride + kernel + output_padding;
    grown.checked_sub(2 * padding).filter(|&s| s > 0)
}

/// Everything needed to allocate a layer: its kind, the per-sample input
/// shape it consumes, its size hyperparameters and its activation.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub in_shape: Vec<usize>,
    pub hyper: LayerHyper,
    pub activation: Activation,
}

impl LayerSpec {
    pub fn new(kind: LayerKind, in_shape: Vec<usize>, hyper: LayerHyper, activation: Activation) -> Self {
        LayerSpec { kind, in_shape, hyper, activation }
    }

    pub fn in_len(&self) -> usize {
        self.in_shape.iter().product()
    }

    /// Per-sample input as `(channels, height, width)`. Flat inputs are
    /// viewed as `(features, 1, 1)`.
    fn chw(&self) -> Result<(usize, usize, usize)> {
        match self.in_shape.as_slice() {
            [f] => Ok((*f, 1, 1)),
            [c, h, w] => Ok((*c, *h, *w)),
            other => Err(Error::Config(format!("unsupported layer input shape {other:?}"))),
        }
    }

    /// Per-sample output shape implied by the input shape and hyperparameters.
    pub fn out_shape(&self) -> Result<Vec<usize>> {
        let h = &self.hyper;
        if h.out == 0 {
            return Err(Error::Config("layer with zero outputs".into()));
        }
        match self.kind {
            LayerKind::Dense => Ok(vec![h.out]),
            LayerKind::Conv2d => {
                let (_, hh, ww) = self.chw()?;
                let oh = conv_out_size(hh, h.kernel, h.stride, h.padding);
                let ow = conv_out_size(ww, h.kernel, h.stride, h.padding);
                match (oh, ow) {
                    (Some(oh), Some(ow)) if oh > 0 && ow > 0 => Ok(vec![h.out, oh, ow]),
                    _ => Err(Error::InfeasiblePhenotype(format!(
                        "convolution collapses {hh}x{ww} below 1x1"
                    ))),
                }
            }
            LayerKind::Deconv2d => {
                let (_, hh, ww) = self.chw()?;
                let oh = deconv_out_size(hh, h.kernel, h.stride, h.padding, h.output_padding);
                let ow = deconv_out_size(ww, h.kernel, h.stride, h.padding, h.output_padding);
                match (oh, ow) {
                    (Some(oh), Some(ow)) => Ok(vec![h.out, oh, ow]),
                    _ => Err(Error::InfeasiblePhenotype(format!(
                        "transposed convolution collapses {hh}x{ww}"
                    ))),
                }
            }
        }
    }

    pub fn weight_shape(&self) -> Result<Vec<usize>> {
        let h = &self.hyper;
        match self.kind {
            LayerKind::Dense => Ok(vec![h.out, self.in_len()]),
            LayerKind::Conv2d => Ok(vec![h.out, self.chw()?.0, h.kernel, h.kernel]),
            LayerKind::Deconv2d => Ok(vec![self.chw()?.0, h.out, h.kernel, h.kernel]),
        }
    }

    pub fn fan_in(&self) -> Result<usize> {
        let h = &self.hyper;
        Ok(match self.kind {
            LayerKind::Dense => self.in_len(),
            LayerKind::Conv2d | LayerKind::Deconv2d => self.chw()?.0 * h.kernel * h.kernel,
        })
    }

    /// Weight/bias geometry only; two specs with the same geometry can share parameters.
    pub fn same_geometry(&self, other: &LayerSpec) -> bool {
        self.kind == other.kind && self.in_shape == other.in_shape && self.hyper == other.hyper
    }
}

/// Trainable parameters of one layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    pub spec: LayerSpec,
    pub weights: Tensor,
    pub bias: Tensor,
}

/// Fresh parameters: weights uniform in `±1/sqrt(fan_in)`, bias zero.
pub fn init_params<R: Rng + ?Sized>(spec: LayerSpec, rng: &mut R) -> Result<LayerParams> {
    let fan_in = spec.fan_in()?;
    if fan_in == 0 {
        return Err(Error::Config(format!("{:?} layer with zero fan-in", spec.kind)));
    }
    spec.out_shape()?;
    let bound = 1.0 / (fan_in as f64).sqrt();
    let weights = Tensor::from_fn(spec.weight_shape()?, |_| rng.random_range(-bound..=bound));
    let bias = Tensor::zeros(vec![spec.hyper.out]);
    Ok(LayerParams { spec, weights, bias })
}

/// Gradients of one layer's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrads {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl LayerParams {
    pub fn out_shape(&self) -> Result<Vec<usize>> {
        self.spec.out_shape()
    }

    /// Pre-activation output for a batch laid out as `[n] ++ in_shape`
    /// (any shape with the same row length is accepted).
    pub fn affine(&self, input: &Tensor) -> Result<Tensor> {
        let n = input.batch();
        if input.row_len() != self.spec.in_len() {
            return Err(Error::Config(format!(
                "expected {} input values per sample, got {}",
                self.spec.in_len(),
                input.row_len()
            )));
        }
        let out_shape = self.out_shape()?;
        let mut shape = vec![n];
        shape.extend_from_slice(&out_shape);
        let mut out = Tensor::zeros(shape);
        match self.spec.kind {
            LayerKind::Dense => self.dense_forward(input.data(), out.data_mut(), n),
            LayerKind::Conv2d => self.conv_forward(input.data(), out.data_mut(), n, &out_shape)?,
            LayerKind::Deconv2d => self.deconv_forward(input.data(), out.data_mut(), n, &out_shape)?,
        }
        Ok(out)
    }

    /// Backpropagate `grad_z` (gradient w.r.t. the pre-activation output)
    /// into parameter gradients and the input gradient.
    pub fn affine_backward(&self, input: &Tensor, grad_z: &Tensor) -> Result<(LayerGrads, Tensor)> {
        let n = input.batch();
        let out_shape = self.out_shape()?;
        if grad_z.batch() != n || grad_z.row_len() != out_shape.iter().product::<usize>() {
            return Err(Error::Usage(format!(
                "gradient shape {:?} does not match layer output {:?}",
                grad_z.shape(),
                out_shape
            )));
        }
        let mut grads = LayerGrads {
            weights: vec![0.0; self.weights.len()],
            bias: vec![0.0; self.bias.len()],
        };
        let mut grad_in = Tensor::zeros(input.shape().to_vec());
        match self.spec.kind {
            LayerKind::Dense => {
                self.dense_backward(input.data(), grad_z.data(), &mut grads, grad_in.data_mut(), n)
            }
            LayerKind::Conv2d => self.conv_backward(
                input.data(),
                grad_z.data(),
                &mut grads,
                grad_in.data_mut(),
                n,
                &out_shape,
            )?,
            LayerKind::Deconv2d => self.deconv_backward(
                input.data(),
                grad_z.data(),
                &mut grads,
                grad_in.data_mut(),
                n,
                &out_shape,
            )?,
        }
        Ok((grads, grad_in))
    }

    fn dense_forward(&self, x: &[f64], z: &mut [f64], n: usize) {
        let inp = self.spec.in_len();
        let out = self.spec.hyper.out;
        for row in z.chunks_exact_mut(out) {
            row.copy_from_slice(self.bias.data());
        }
        // Z[n, out] += X[n, in] * W^T
        gemm(n, inp, out, x, (inp, 1), self.weights.data(), (1, inp), z, (out, 1));
    }

    fn dense_backward(&self, x: &[f64], gz: &[f64], grads: &mut LayerGrads, gx: &mut [f64], n: usize) {
        let inp = self.spec.in_len();
        let out = self.spec.hyper.out;
        for row in gz.chunks_exact(out) {
            for (b, g) in grads.bias.iter_mut().zip(row) {
                *b += g;
            }
        }
        // dW[out, in] += dZ^T * X
        gemm(out, n, inp, gz, (1, out), x, (inp, 1), &mut grads.weights, (inp, 1));
        // dX[n, in] = dZ * W
        gemm(n, out, inp, gz, (out, 1), self.weights.data(), (inp, 1), gx, (inp, 1));
    }

    fn conv_forward(&self, x: &[f64], z: &mut [f64], n: usize, out_shape: &[usize]) -> Result<()> {
        let (ic, ih, iw) = self.spec.chw()?;
        let (oc, oh, ow) = (out_shape[0], out_shape[1], out_shape[2]);
        let win = self.window(ih, iw, oh, ow);
        let kk = ic * win.k * win.k;
        let p = oh * ow;
        let mut cols = vec![0.0; kk * p];
        for (xs, zs) in x.chunks_exact(ic * ih * iw).zip(z.chunks_exact_mut(oc * p)).take(n) {
            im2col(xs, ic, &win, &mut cols);
            for (o, plane) in zs.chunks_exact_mut(p).enumerate() {
                plane.fill(self.bias.data()[o]);
            }
            // Z[oc, P] += W[oc, K] * cols[K, P]
            gemm(oc, kk, p, self.weights.data(), (kk, 1), &cols, (p, 1), zs, (p, 1));
        }
        Ok(())
    }

    fn conv_backward(
        &self,
        x: &[f64],
        gz: &[f64],
        grads: &mut LayerGrads,
        gx: &mut [f64],
        n: usize,
        out_shape: &[usize],
    ) -> Result<()> {
        let (ic, ih, iw) = self.spec.chw()?;
        let (oc, oh, ow) = (out_shape[0], out_shape[1], out_shape[2]);
        let win = self.window(ih, iw, oh, ow);
        let kk = ic * win.k * win.k;
        let p = oh * ow;
        let mut cols = vec![0.0; kk * p];
        let mut gcols = vec![0.0; kk * p];
        let chunks = x.chunks_exact(ic * ih * iw).zip(gx.chunks_exact_mut(ic * ih * iw)).zip(gz.chunks_exact(oc * p));
        for ((xs, gxs), gzs) in chunks.take(n) {
            for (o, plane) in gzs.chunks_exact(p).enumerate() {
                grads.bias[o] += plane.iter().sum::<f64>();
            }
            im2col(xs, ic, &win, &mut cols);
            // dW[oc, K] += dZ[oc, P] * cols^T
            gemm(oc, p, kk, gzs, (p, 1), &cols, (1, p), &mut grads.weights, (kk, 1));
            // dcols[K, P] = W^T * dZ
            gcols.fill(0.0);
            gemm(kk, oc, p, self.weights.data(), (1, kk), gzs, (p, 1), &mut gcols, (p, 1));
            col2im(&gcols, ic, &win, gxs);
        }
        Ok(())
    }

    fn deconv_forward(&self, x: &[f64], z: &mut [f64], n: usize, out_shape: &[usize]) -> Result<()> {
        let (ic, ih, iw) = self.spec.chw()?;
        let (oc, oh, ow) = (out_shape[0], out_shape[1], out_shape[2]);
        // the transposed convolution scatters each input pixel over the
        // output, i.e. the output is the "large" side of the window
        let win = self.window(oh, ow, ih, iw);
        let kk = oc * win.k * win.k;
        let p = ih * iw;
        let mut cols = vec![0.0; kk * p];
        for (xs, zs) in x.chunks_exact(ic * p).zip(z.chunks_exact_mut(oc * oh * ow)).take(n) {
            cols.fill(0.0);
            // cols[K, P] = W[ic, K]^T * X[ic, P]
            gemm(kk, ic, p, self.weights.data(), (1, kk), xs, (p, 1), &mut cols, (p, 1));
            for (o, plane) in zs.chunks_exact_mut(oh * ow).enumerate() {
                plane.fill(self.bias.data()[o]);
            }
            col2im(&cols, oc, &win, zs);
        }
        Ok(())
    }

    fn deconv_backward(
        &self,
        x: &[f64],
        gz: &[f64],
        grads: &mut LayerGrads,
        gx: &mut [f64],
        n: usize,
        out_shape: &[usize],
    ) -> Result<()> {
        let (ic, ih, iw) = self.spec.chw()?;
        let (oc, oh, ow) = (out_shape[0], out_shape[1], out_shape[2]);
        let win = self.window(oh, ow, ih, iw);
        let kk = oc * win.k * win.k;
        let p = ih * iw;
        let mut gcols = vec![0.0; kk * p];
        let chunks = x.chunks_exact(ic * p).zip(gx.chunks_exact_mut(ic * p)).zip(gz.chunks_exact(oc * oh * ow));
        for ((xs, gxs), gzs) in chunks.take(n) {
            for (o, plane) in gzs.chunks_exact(oh * ow).enumerate() {
                grads.bias[o] += plane.iter().sum::<f64>();
            }
            im2col(gzs, oc, &win, &mut gcols);
            // dX[ic, P] = W[ic, K] * dcols[K, P]
            gemm(ic, kk, p, self.weights.data(), (kk, 1), &gcols, (p, 1), gxs, (p, 1));
            // dW[ic, K] += X[ic, P] * dcols^T
            gemm(ic, p, kk, xs, (p, 1), &gcols, (1, p), &mut grads.weights, (kk, 1));
        }
        Ok(())
    }

    /// Window geometry linking a large plane (`big_h x big_w`) and a small
    /// one: small pixel `s` and tap `t` touch large pixel `s*stride - pad + t`.
    fn window(&self, big_h: usize, big_w: usize, small_h: usize, small_w: usize) -> Window {
        let h = &self.spec.hyper;
        Window { k: h.kernel, stride: h.stride, pad: h.padding, big_h, big_w, small_h, small_w }
    }
}

struct Window {
    k: usize,
    stride: usize,
    pad: usize,
    big_h: usize,
    big_w: usize,
    small_h: usize,
    small_w: usize,
}

impl Window {
    /// Large-plane coordinate for small coordinate `s` and tap `t`, if inside.
    #[inline]
    fn big(&self, s: usize, t: usize, limit: usize) -> Option<usize> {
        (s * self.stride + t).checked_sub(self.pad).filter(|&b| b < limit)
    }
}

/// Gather `cols[(c, ky, kx), (sy, sx)] = big[c, big(sy, ky), big(sx, kx)]`,
/// zero outside the plane.
fn im2col(big: &[f64], channels: usize, win: &Window, cols: &mut [f64]) {
    let (k, p) = (win.k, win.small_h * win.small_w);
    for c in 0..channels {
        let plane = &big[c * win.big_h * win.big_w..(c + 1) * win.big_h * win.big_w];
        for ky in 0..k {
            for kx in 0..k {
                let row = &mut cols[((c * k + ky) * k + kx) * p..][..p];
                for sy in 0..win.small_h {
                    let by = win.big(sy, ky, win.big_h);
                    for sx in 0..win.small_w {
                        row[sy * win.small_w + sx] = match (by, win.big(sx, kx, win.big_w)) {
                            (Some(by), Some(bx)) => plane[by * win.big_w + bx],
                            _ => 0.0,
                        };
                    }
                }
            }
        }
    }
}

/// Scatter-add the inverse of [`im2col`] into `big`.
fn col2im(cols: &[f64], channels: usize, win: &Window, big: &mut [f64]) {
    let (k, p) = (win.k, win.small_h * win.small_w);
    for c in 0..channels {
        let plane = &mut big[c * win.big_h * win.big_w..(c + 1) * win.big_h * win.big_w];
        for ky in 0..k {
            for kx in 0..k {
                let row = &cols[((c * k + ky) * k + kx) * p..][..p];
                for sy in 0..win.small_h {
                    let Some(by) = win.big(sy, ky, win.big_h) else { continue };
                    for sx in 0..win.small_w {
                        if let Some(bx) = win.big(sx, kx, win.big_w) {
                            plane[by * win.big_w + bx] += row[sy * win.small_w + sx];
                        }
                    }
                }
            }
        }
    }
}

/// `C[m, n] += A[m, k] * B[k, n]` for row-major buffers addressed through
/// `(row_stride, col_stride)` pairs.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (usize, usize),
    b: &[f64],
    (rsb, csb): (usize, usize),
    c: &mut [f64],
    (rsc, csc): (usize, usize),
) {
    if m == 0 || n == 0 {
        return;
    }
    let last = |rows: usize, cols: usize, rs: usize, cs: usize| (rows - 1) * rs + (cols - 1) * cs;
    assert!(last(m, n, rsc, csc) < c.len(), "gemm output out of bounds");
    if k == 0 {
        return;
    }
    assert!(last(m, k, rsa, csa) < a.len(), "gemm lhs out of bounds");
    assert!(last(k, n, rsb, csb) < b.len(), "gemm rhs out of bounds");
    // SAFETY: every index the kernel touches is bounded by the asserts above,
    // and `c` is uniquely borrowed so it cannot alias `a` or `b`.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            1.0,
            c.as_mut_ptr(),
            rsc as isize,
            csc as isize,
        );
    }
}
