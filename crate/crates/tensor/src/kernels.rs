//! Layer kernels over flat `f32` buffers.
//!
//! Convolutions are lowered to GEMM through an im2col buffer laid out as
//! `[C * kH * kW, H_out * W_out]`. The transposed convolution reuses the same
//! lowering in the opposite direction, so the two are exact adjoints.

use crate::error::{dim_err, Result, TensorError};
use crate::tensor::Tensor;

/// Stride, dilation and zero padding shared by both spatial axes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ConvGeometry {
    pub stride: usize,
    pub dilation: usize,
    pub padding: usize,
}

impl ConvGeometry {
    pub const fn new(stride: usize, dilation: usize, padding: usize) -> Self {
        Self { stride, dilation, padding }
    }

    /// Zero padding that preserves the spatial extent of a stride-1 layer.
    pub const fn same(kernel: usize, dilation: usize) -> Self {
        Self { stride: 1, dilation, padding: dilation * (kernel - 1) / 2 }
    }

    fn effective_kernel(&self, kernel: usize) -> usize {
        self.dilation * (kernel - 1) + 1
    }

    /// `floor((H + 2p - d(k-1) - 1) / s) + 1`, or `None` when the kernel does not fit.
    pub fn output_extent(&self, input: usize, kernel: usize) -> Option<usize> {
        if self.stride == 0 || self.dilation == 0 || kernel == 0 {
            return None;
        }
        let padded = input + 2 * self.padding;
        let eff = self.effective_kernel(kernel);
        (padded >= eff).then(|| (padded - eff) / self.stride + 1)
    }

    /// `s(H-1) + d(k-1) + 1 - 2p`, or `None` when not positive.
    pub fn transpose_extent(&self, input: usize, kernel: usize) -> Option<usize> {
        if self.stride == 0 || self.dilation == 0 || kernel == 0 || input == 0 {
            return None;
        }
        let full = self.stride * (input - 1) + self.effective_kernel(kernel);
        (full > 2 * self.padding).then(|| full - 2 * self.padding)
    }
}

struct Im2Col {
    channels: usize,
    height: usize,
    width: usize,
    kh: usize,
    kw: usize,
    oh: usize,
    ow: usize,
    geom: ConvGeometry,
}

impl Im2Col {
    fn rows(&self) -> usize {
        self.channels * self.kh * self.kw
    }

    fn cols(&self) -> usize {
        self.oh * self.ow
    }

    fn source_index(&self, out: usize, tap: usize, extent: usize) -> Option<usize> {
        let pos = (out * self.geom.stride + tap * self.geom.dilation) as isize
            - self.geom.padding as isize;
        (pos >= 0 && (pos as usize) < extent).then_some(pos as usize)
    }

    fn gather(&self, image: &[f32], col: &mut [f32]) {
        let p = self.cols();
        for ci in 0..self.channels {
            let plane = &image[ci * self.height * self.width..(ci + 1) * self.height * self.width];
            for ki in 0..self.kh {
                for kj in 0..self.kw {
                    let row = (ci * self.kh + ki) * self.kw + kj;
                    let dst = &mut col[row * p..(row + 1) * p];
                    for oy in 0..self.oh {
                        let drow = &mut dst[oy * self.ow..(oy + 1) * self.ow];
                        let Some(iy) = self.source_index(oy, ki, self.height) else {
                            drow.fill(0.0);
                            continue;
                        };
                        let src = &plane[iy * self.width..(iy + 1) * self.width];
                        for (ox, d) in drow.iter_mut().enumerate() {
                            *d = match self.source_index(ox, kj, self.width) {
                                Some(ix) => src[ix],
                                None => 0.0,
                            };
                        }
                    }
                }
            }
        }
    }

    /// Adjoint of [`Im2Col::gather`]: accumulates `col` into `image`.
    fn scatter(&self, col: &[f32], image: &mut [f32]) {
        let p = self.cols();
        for ci in 0..self.channels {
            let plane =
                &mut image[ci * self.height * self.width..(ci + 1) * self.height * self.width];
            for ki in 0..self.kh {
                for kj in 0..self.kw {
                    let row = (ci * self.kh + ki) * self.kw + kj;
                    let src = &col[row * p..(row + 1) * p];
                    for oy in 0..self.oh {
                        let Some(iy) = self.source_index(oy, ki, self.height) else {
                            continue;
                        };
                        let srow = &src[oy * self.ow..(oy + 1) * self.ow];
                        let drow = &mut plane[iy * self.width..(iy + 1) * self.width];
                        for (ox, &v) in srow.iter().enumerate() {
                            if let Some(ix) = self.source_index(ox, kj, self.width) {
                                drow[ix] += v;
                            }
                        }
                    }
                }
            }
        }
    }
}

/// `C = op(A) * op(B) + beta * C` with `op(A)` of size `m x k` and `op(B)` of size `k x n`.
/// A transposed operand is stored in its un-transposed (`k x m` / `n x k`) layout.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f32],
    a_trans: bool,
    b: &[f32],
    b_trans: bool,
    beta: f32,
    c: &mut [f32],
) {
    assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    let (rsa, csa) = if a_trans { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if b_trans { (1, k as isize) } else { (n as isize, 1) };
    // SAFETY: the asserts above bound every index the strides can reach.
    unsafe {
        matrixmultiply::sgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Gradients produced by a convolution backward pass; `None` where not requested.
#[derive(Debug, Default)]
pub struct ConvGrads {
    pub input: Option<Vec<f32>>,
    pub kernel: Option<Vec<f32>>,
    pub bias: Option<Vec<f32>>,
}

/// Which gradients a backward pass should produce.
#[derive(Clone, Copy, Debug)]
pub struct Need {
    pub input: bool,
    pub kernel: bool,
    pub bias: bool,
}

fn check_bias(bias: Option<&Tensor>, channels: usize) -> Result<()> {
    if let Some(b) = bias {
        if b.shape() != [channels] {
            return dim_err(format!("bias shape {:?}, expected [{channels}]", b.shape()));
        }
    }
    Ok(())
}

fn conv_plan(input: &Tensor, kernel: &Tensor, geom: ConvGeometry) -> Result<(Im2Col, usize, usize)> {
    let [n, cin, h, w] = input.dims4("conv2d input")?;
    let [cout, kcin, kh, kw] = kernel.dims4("conv2d kernel")?;
    if cin != kcin {
        return dim_err(format!("input has {cin} channels but kernel expects {kcin}"));
    }
    let (Some(oh), Some(ow)) = (geom.output_extent(h, kh), geom.output_extent(w, kw)) else {
        return dim_err(format!("kernel {kh}x{kw} with {geom:?} does not fit {h}x{w}"));
    };
    Ok((Im2Col { channels: cin, height: h, width: w, kh, kw, oh, ow, geom }, n, cout))
}

/// Cross-correlation of `[N, Cin, H, W]` with `[Cout, Cin, kH, kW]`.
pub fn conv2d(input: &Tensor, kernel: &Tensor, bias: Option<&Tensor>, geom: ConvGeometry) -> Result<Tensor> {
    let (plan, n, cout) = conv_plan(input, kernel, geom)?;
    check_bias(bias, cout)?;
    let (k, p) = (plan.rows(), plan.cols());
    let in_len = plan.channels * plan.height * plan.width;
    let mut out = vec![0.0f32; n * cout * p];
    let mut col = vec![0.0f32; k * p];
    for s in 0..n {
        plan.gather(&input.data()[s * in_len..(s + 1) * in_len], &mut col);
        let dst = &mut out[s * cout * p..(s + 1) * cout * p];
        gemm(cout, k, p, kernel.data(), false, &col, false, 0.0, dst);
        if let Some(b) = bias {
            for (co, plane) in dst.chunks_mut(p).enumerate() {
                let bv = b.data()[co];
                plane.iter_mut().for_each(|v| *v += bv);
            }
        }
    }
    Tensor::new([n, cout, plan.oh, plan.ow], out)
}

pub fn conv2d_backward(
    input: &Tensor,
    kernel: &Tensor,
    geom: ConvGeometry,
    grad_out: &[f32],
    need: Need,
) -> Result<ConvGrads> {
    let (plan, n, cout) = conv_plan(input, kernel, geom)?;
    let (k, p) = (plan.rows(), plan.cols());
    if grad_out.len() != n * cout * p {
        return dim_err("conv2d grad_out length");
    }
    let in_len = plan.channels * plan.height * plan.width;
    let mut grads = ConvGrads::default();
    if need.bias {
        let mut db = vec![0.0f32; cout];
        for s in 0..n {
            for (co, plane) in grad_out[s * cout * p..(s + 1) * cout * p].chunks(p).enumerate() {
                db[co] += plane.iter().sum::<f32>();
            }
        }
        grads.bias = Some(db);
    }
    if need.kernel {
        let mut dk = vec![0.0f32; cout * k];
        let mut col = vec![0.0f32; k * p];
        for s in 0..n {
            plan.gather(&input.data()[s * in_len..(s + 1) * in_len], &mut col);
            let go = &grad_out[s * cout * p..(s + 1) * cout * p];
            gemm(cout, p, k, go, false, &col, true, 1.0, &mut dk);
        }
        grads.kernel = Some(dk);
    }
    if need.input {
        let mut dx = vec![0.0f32; n * in_len];
        let mut dcol = vec![0.0f32; k * p];
        for s in 0..n {
            let go = &grad_out[s * cout * p..(s + 1) * cout * p];
            gemm(k, cout, p, kernel.data(), true, go, false, 0.0, &mut dcol);
            plan.scatter(&dcol, &mut dx[s * in_len..(s + 1) * in_len]);
        }
        grads.input = Some(dx);
    }
    Ok(grads)
}

fn transpose_plan(input: &Tensor, kernel: &Tensor, geom: ConvGeometry) -> Result<(Im2Col, usize, usize)> {
    if !(1..=2).contains(&geom.stride) {
        return Err(TensorError::InvalidParameter(format!(
            "transposed convolution stride must be 1 or 2, got {}",
            geom.stride
        )));
    }
    let [n, cin, h, w] = input.dims4("conv2d_transpose input")?;
    let [kcin, cout, kh, kw] = kernel.dims4("conv2d_transpose kernel")?;
    if cin != kcin {
        return dim_err(format!("input has {cin} channels but kernel expects {kcin}"));
    }
    let (Some(oh), Some(ow)) = (geom.transpose_extent(h, kh), geom.transpose_extent(w, kw)) else {
        return dim_err(format!("transposed extent of {h}x{w} with {geom:?} is not positive"));
    };
    Ok((Im2Col { channels: cout, height: oh, width: ow, kh, kw, oh: h, ow: w, geom }, n, cin))
}

/// Transposed convolution of `[N, Cin, H, W]` with a `[Cin, Cout, kH, kW]` kernel.
///
/// With the same kernel tensor, this is the adjoint of [`conv2d`] mapping
/// `Cout` channels to `Cin`.
pub fn conv2d_transpose(
    input: &Tensor,
    kernel: &Tensor,
    bias: Option<&Tensor>,
    geom: ConvGeometry,
) -> Result<Tensor> {
    let (plan, n, cin) = transpose_plan(input, kernel, geom)?;
    let cout = plan.channels;
    check_bias(bias, cout)?;
    let (k, p) = (plan.rows(), plan.cols());
    let out_len = cout * plan.height * plan.width;
    let mut out = vec![0.0f32; n * out_len];
    let mut col = vec![0.0f32; k * p];
    for s in 0..n {
        let x = &input.data()[s * cin * p..(s + 1) * cin * p];
        gemm(k, cin, p, kernel.data(), true, x, false, 0.0, &mut col);
        let dst = &mut out[s * out_len..(s + 1) * out_len];
        plan.scatter(&col, dst);
        if let Some(b) = bias {
            let hw = plan.height * plan.width;
            for (co, plane) in dst.chunks_mut(hw).enumerate() {
                let bv = b.data()[co];
                plane.iter_mut().for_each(|v| *v += bv);
            }
        }
    }
    Tensor::new([n, cout, plan.height, plan.width], out)
}

pub fn conv2d_transpose_backward(
    input: &Tensor,
    kernel: &Tensor,
    geom: ConvGeometry,
    grad_out: &[f32],
    need: Need,
) -> Result<ConvGrads> {
    let (plan, n, cin) = transpose_plan(input, kernel, geom)?;
    let cout = plan.channels;
    let (k, p) = (plan.rows(), plan.cols());
    let out_len = cout * plan.height * plan.width;
    if grad_out.len() != n * out_len {
        return dim_err("conv2d_transpose grad_out length");
    }
    let mut grads = ConvGrads::default();
    if need.bias {
        let hw = plan.height * plan.width;
        let mut db = vec![0.0f32; cout];
        for s in 0..n {
            for (co, plane) in grad_out[s * out_len..(s + 1) * out_len].chunks(hw).enumerate() {
                db[co] += plane.iter().sum::<f32>();
            }
        }
        grads.bias = Some(db);
    }
    if need.input || need.kernel {
        let mut col = vec![0.0f32; k * p];
        let mut dx = need.input.then(|| vec![0.0f32; n * cin * p]);
        let mut dk = need.kernel.then(|| vec![0.0f32; cin * k]);
        for s in 0..n {
            plan.gather(&grad_out[s * out_len..(s + 1) * out_len], &mut col);
            if let Some(dx) = dx.as_mut() {
                gemm(cin, k, p, kernel.data(), false, &col, false, 0.0, &mut dx[s * cin * p..(s + 1) * cin * p]);
            }
            if let Some(dk) = dk.as_mut() {
                let x = &input.data()[s * cin * p..(s + 1) * cin * p];
                gemm(cin, p, k, x, false, &col, true, 1.0, dk);
            }
        }
        grads.input = dx;
        grads.kernel = dk;
    }
    Ok(grads)
}

/// Affine map `x[N, D] * w[D, K] + b[K]`.
pub fn fully_connected(input: &Tensor, weights: &Tensor, bias: Option<&Tensor>) -> Result<Tensor> {
    let [n, d] = input.dims2("fully_connected input")?;
    let [wd, k] = weights.dims2("fully_connected weights")?;
    if d != wd {
        return dim_err(format!("input width {d} does not match weight rows {wd}"));
    }
    check_bias(bias, k)?;
    let mut out = vec![0.0f32; n * k];
    if let Some(b) = bias {
        for row in out.chunks_mut(k) {
            row.copy_from_slice(b.data());
        }
    }
    gemm(n, d, k, input.data(), false, weights.data(), false, 1.0, &mut out);
    Tensor::new([n, k], out)
}

pub fn fully_connected_backward(
    input: &Tensor,
    weights: &Tensor,
    grad_out: &[f32],
    need: Need,
) -> Result<ConvGrads> {
    let [n, d] = input.dims2("fully_connected input")?;
    let [_, k] = weights.dims2("fully_connected weights")?;
    if grad_out.len() != n * k {
        return dim_err("fully_connected grad_out length");
    }
    let mut grads = ConvGrads::default();
    if need.input {
        let mut dx = vec![0.0f32; n * d];
        gemm(n, k, d, grad_out, false, weights.data(), true, 0.0, &mut dx);
        grads.input = Some(dx);
    }
    if need.kernel {
        let mut dw = vec![0.0f32; d * k];
        gemm(d, n, k, input.data(), true, grad_out, false, 0.0, &mut dw);
        grads.kernel = Some(dw);
    }
    if need.bias {
        let mut db = vec![0.0f32; k];
        for row in grad_out.chunks(k) {
            db.iter_mut().zip(row).for_each(|(a, &g)| *a += g);
        }
        grads.bias = Some(db);
    }
    Ok(grads)
}

/// Per-channel statistics of a `[N, C, ...]` tensor, computed in `f64`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelStats {
    pub mean: Vec<f32>,
    /// Biased (population) variance.
    pub var: Vec<f32>,
}

pub(crate) fn channel_layout(shape: &[usize]) -> Result<(usize, usize, usize)> {
    if shape.len() < 2 {
        return dim_err(format!("batch norm needs rank >= 2, got {shape:?}"));
    }
    Ok((shape[0], shape[1], shape[2..].iter().product()))
}

pub fn channel_stats(input: &Tensor) -> Result<ChannelStats> {
    let (n, c, hw) = channel_layout(input.shape())?;
    let count = (n * hw) as f64;
    let mut mean = vec![0.0f32; c];
    let mut var = vec![0.0f32; c];
    for ch in 0..c {
        let planes = (0..n).map(|s| &input.data()[(s * c + ch) * hw..(s * c + ch + 1) * hw]);
        let m: f64 = planes.clone().flatten().map(|&v| v as f64).sum::<f64>() / count;
        let v: f64 = planes.flatten().map(|&x| (x as f64 - m).powi(2)).sum::<f64>() / count;
        mean[ch] = m as f32;
        var[ch] = v as f32;
    }
    Ok(ChannelStats { mean, var })
}

/// `gamma * (x - mean) / sqrt(var + eps) + beta`, per channel.
pub fn channel_normalize(
    input: &Tensor,
    stats: &ChannelStats,
    gamma: &Tensor,
    beta: &Tensor,
    eps: f32,
) -> Result<Tensor> {
    let (n, c, hw) = channel_layout(input.shape())?;
    if gamma.numel() != c || beta.numel() != c || stats.mean.len() != c {
        return dim_err("batch norm parameter width");
    }
    let mut out = input.data().to_vec();
    for s in 0..n {
        for ch in 0..c {
            let inv = 1.0 / (stats.var[ch] + eps).sqrt();
            let (g, b, m) = (gamma.data()[ch], beta.data()[ch], stats.mean[ch]);
            out[(s * c + ch) * hw..(s * c + ch + 1) * hw]
                .iter_mut()
                .for_each(|v| *v = g * (*v - m) * inv + b);
        }
    }
    Tensor::new(input.shape().to_vec(), out)
}

/// Backward of [`channel_normalize`]. With `batch_stats` the statistics are
/// treated as functions of the input (training mode); otherwise they are constants.
#[allow(clippy::too_many_arguments)]
pub fn channel_normalize_backward(
    input: &Tensor,
    stats: &ChannelStats,
    gamma: &Tensor,
    eps: f32,
    grad_out: &[f32],
    batch_stats: bool,
    need: Need,
) -> Result<ConvGrads> {
    let (n, c, hw) = channel_layout(input.shape())?;
    let count = (n * hw) as f64;
    let mut dx = need.input.then(|| vec![0.0f32; input.numel()]);
    let mut dgamma = vec![0.0f32; c];
    let mut dbeta = vec![0.0f32; c];
    for ch in 0..c {
        let inv = 1.0 / (stats.var[ch] as f64 + eps as f64).sqrt();
        let m = stats.mean[ch] as f64;
        let mut sum_dy = 0.0f64;
        let mut sum_dy_xhat = 0.0f64;
        for s in 0..n {
            let range = (s * c + ch) * hw..(s * c + ch + 1) * hw;
            for (&x, &dy) in input.data()[range.clone()].iter().zip(&grad_out[range]) {
                let xhat = (x as f64 - m) * inv;
                sum_dy += dy as f64;
                sum_dy_xhat += dy as f64 * xhat;
            }
        }
        dgamma[ch] = sum_dy_xhat as f32;
        dbeta[ch] = sum_dy as f32;
        if let Some(dx) = dx.as_mut() {
            let g = gamma.data()[ch] as f64;
            for s in 0..n {
                let range = (s * c + ch) * hw..(s * c + ch + 1) * hw;
                for ((&x, &dy), d) in input.data()[range.clone()]
                    .iter()
                    .zip(&grad_out[range.clone()])
                    .zip(&mut dx[range])
                {
                    *d = if batch_stats {
                        let xhat = (x as f64 - m) * inv;
                        (g * inv / count * (count * dy as f64 - sum_dy - xhat * sum_dy_xhat)) as f32
                    } else {
                        (g * inv * dy as f64) as f32
                    };
                }
            }
        }
    }
    Ok(ConvGrads {
        input: dx,
        kernel: need.kernel.then_some(dgamma),
        bias: need.bias.then_some(dbeta),
    })
}

pub fn relu(x: f32) -> f32 {
    x.max(0.0)
}

pub fn sigmoid(x: f32) -> f32 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], data: Vec<f32>) -> Tensor {
        Tensor::new(shape.to_vec(), data).unwrap()
    }

    #[test]
    fn one_by_one_identity_kernel() {
        let x = t(&[1, 1, 3, 3], (1..=9).map(|v| v as f32).collect());
        let k = t(&[1, 1, 1, 1], vec![1.0]);
        let y = conv2d(&x, &k, None, ConvGeometry::new(1, 1, 0)).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn ones_kernel_sums_nine() {
        let x = Tensor::full([1, 1, 4, 4], 1.0);
        let k = Tensor::full([1, 1, 3, 3], 1.0);
        let y = conv2d(&x, &k, None, ConvGeometry::new(1, 1, 0)).unwrap();
        assert_eq!(y.shape(), [1, 1, 2, 2]);
        assert_eq!(y.data(), [9.0; 4]);
    }

    #[test]
    fn channel_mismatch_is_a_dimension_error() {
        let x = Tensor::zeros([1, 2, 4, 4]);
        let k = Tensor::zeros([1, 3, 3, 3]);
        assert!(matches!(
            conv2d(&x, &k, None, ConvGeometry::new(1, 1, 0)),
            Err(TensorError::Dimension(_))
        ));
    }

    #[test]
    fn kernel_must_fit() {
        let x = Tensor::zeros([1, 1, 4, 4]);
        let k = Tensor::zeros([1, 1, 3, 3]);
        assert!(conv2d(&x, &k, None, ConvGeometry::new(1, 2, 0)).is_err());
        assert!(conv2d(&x, &k, None, ConvGeometry::new(1, 2, 1)).is_ok());
    }

    #[test]
    fn two_stride_two_layers_reach_64() {
        let g = ConvGeometry::new(2, 1, 1);
        let once = g.output_extent(256, 3).unwrap();
        assert_eq!(g.output_extent(once, 3), Some(64));
    }

    #[test]
    fn transpose_scatters_single_pixel() {
        let x = t(&[1, 1, 1, 1], vec![1.0]);
        let k = Tensor::full([1, 1, 2, 2], 1.0);
        let y = conv2d_transpose(&x, &k, None, ConvGeometry::new(2, 1, 0)).unwrap();
        assert_eq!(y.shape(), [1, 1, 2, 2]);
        assert_eq!(y.data(), [1.0; 4]);
    }

    #[test]
    fn transpose_doubles_64_to_128() {
        let g = ConvGeometry::new(2, 1, 1);
        assert_eq!(g.transpose_extent(64, 4), Some(128));
        let x = Tensor::zeros([1, 2, 64, 64]);
        let k = Tensor::full([2, 1, 4, 4], 0.5);
        let y = conv2d_transpose(&x, &k, None, g).unwrap();
        assert_eq!(y.shape(), [1, 1, 128, 128]);
        assert!(y.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn transpose_rejects_stride_three() {
        let x = Tensor::zeros([1, 1, 4, 4]);
        let k = Tensor::zeros([1, 1, 3, 3]);
        assert!(matches!(
            conv2d_transpose(&x, &k, None, ConvGeometry::new(3, 1, 0)),
            Err(TensorError::InvalidParameter(_))
        ));
    }

    #[test]
    fn nonpositive_transpose_extent_is_rejected() {
        let x = Tensor::zeros([1, 1, 1, 1]);
        let k = Tensor::zeros([1, 1, 1, 1]);
        assert!(matches!(
            conv2d_transpose(&x, &k, None, ConvGeometry::new(1, 1, 1)),
            Err(TensorError::Dimension(_))
        ));
    }

    #[test]
    fn fully_connected_examples() {
        let x = t(&[1, 2], vec![1.0, 2.0]);
        let w = t(&[2, 1], vec![1.0, 1.0]);
        let b = t(&[1], vec![0.0]);
        assert_eq!(fully_connected(&x, &w, Some(&b)).unwrap().data(), [3.0]);

        let x = t(&[2, 2], vec![1.0, -2.0, 0.5, 4.0]);
        let eye = t(&[2, 2], vec![1.0, 0.0, 0.0, 1.0]);
        assert_eq!(fully_connected(&x, &eye, Some(&Tensor::zeros([2]))).unwrap().data(), x.data());

        let b = t(&[3], vec![0.1, 0.2, 0.3]);
        let y = fully_connected(&x, &Tensor::zeros([2, 3]), Some(&b)).unwrap();
        assert_eq!(y.data(), [0.1, 0.2, 0.3, 0.1, 0.2, 0.3]);

        assert!(fully_connected(&x, &Tensor::zeros([3, 1]), None).is_err());
    }

    #[test]
    fn activations() {
        assert_eq!(relu(-1.5), 0.0);
        assert_eq!(sigmoid(0.0), 0.5);
        let (a, b) = (sigmoid(10.0), sigmoid(20.0));
        assert!(a > 0.0 && a < 1.0 && b >= a && b <= 1.0);
        assert!(sigmoid(-200.0) >= 0.0 && sigmoid(-200.0).is_finite());
    }

    #[test]
    fn normalized_channels_have_zero_mean() {
        let x = t(&[2, 1, 1, 2], vec![1.0, 3.0, 5.0, 7.0]);
        let stats = channel_stats(&x).unwrap();
        assert_eq!(stats.mean, [4.0]);
        assert_eq!(stats.var, [5.0]);
        let y = channel_normalize(&x, &stats, &Tensor::full([1], 1.0), &Tensor::zeros([1]), 0.0)
            .unwrap();
        assert!(y.data().iter().sum::<f32>().abs() < 1e-6);
    }
}
