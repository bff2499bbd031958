//! Naive `f64` forward kernels written directly from their definitions.
//!
//! These share no code with the im2col/GEMM path and serve as the
//! finite-difference oracle in gradient checks.

/// `[n, c, h, w]` row-major buffer.
#[derive(Clone, Debug)]
pub struct Array4 {
    pub dims: [usize; 4],
    pub data: Vec<f64>,
}

impl Array4 {
    pub fn zeros(dims: [usize; 4]) -> Self {
        Self { dims, data: vec![0.0; dims.iter().product()] }
    }

    pub fn from_f32(dims: [usize; 4], data: &[f32]) -> Self {
        assert_eq!(dims.iter().product::<usize>(), data.len());
        Self { dims, data: data.iter().map(|&v| v as f64).collect() }
    }

    fn idx(&self, n: usize, c: usize, y: usize, x: usize) -> usize {
        ((n * self.dims[1] + c) * self.dims[2] + y) * self.dims[3] + x
    }

    pub fn at(&self, n: usize, c: usize, y: usize, x: usize) -> f64 {
        self.data[self.idx(n, c, y, x)]
    }

    pub fn at_mut(&mut self, n: usize, c: usize, y: usize, x: usize) -> &mut f64 {
        let i = self.idx(n, c, y, x);
        &mut self.data[i]
    }
}

/// Direct sum `out[n,o,y,x] = b[o] + sum_{i,ky,kx} in[n,i,y*s+ky*d-p,x*s+kx*d-p] * k[o,i,ky,kx]`.
pub fn conv2d(input: &Array4, kernel: &Array4, bias: Option<&[f64]>, stride: usize, dilation: usize, padding: usize) -> Array4 {
    let [n, cin, h, w] = input.dims;
    let [cout, _, kh, kw] = kernel.dims;
    let oh = (h + 2 * padding - dilation * (kh - 1) - 1) / stride + 1;
    let ow = (w + 2 * padding - dilation * (kw - 1) - 1) / stride + 1;
    let mut out = Array4::zeros([n, cout, oh, ow]);
    for s in 0..n {
        for o in 0..cout {
            for y in 0..oh {
                for x in 0..ow {
                    let mut acc = bias.map_or(0.0, |b| b[o]);
                    for i in 0..cin {
                        for ky in 0..kh {
                            for kx in 0..kw {
                                let iy = (y * stride + ky * dilation) as isize - padding as isize;
                                let ix = (x * stride + kx * dilation) as isize - padding as isize;
                                if iy < 0 || ix < 0 || iy >= h as isize || ix >= w as isize {
                                    continue;
                                }
                                acc += input.at(s, i, iy as usize, ix as usize) * kernel.at(o, i, ky, kx);
                            }
                        }
                    }
                    *out.at_mut(s, o, y, x) = acc;
                }
            }
        }
    }
    out
}

/// Scatter form: every input pixel adds `in * k[i,o,ky,kx]` at `(y*s + ky - p, x*s + kx - p)`.
pub fn conv2d_transpose(input: &Array4, kernel: &Array4, bias: Option<&[f64]>, stride: usize, padding: usize) -> Array4 {
    let [n, cin, h, w] = input.dims;
    let [_, cout, kh, kw] = kernel.dims;
    let oh = stride * (h - 1) + kh - 2 * padding;
    let ow = stride * (w - 1) + kw - 2 * padding;
    let mut out = Array4::zeros([n, cout, oh, ow]);
    for s in 0..n {
        for o in 0..cout {
            let b = bias.map_or(0.0, |b| b[o]);
            for y in 0..oh {
                for x in 0..ow {
                    *out.at_mut(s, o, y, x) = b;
                }
            }
        }
        for i in 0..cin {
            for y in 0..h {
                for x in 0..w {
                    let v = input.at(s, i, y, x);
                    for o in 0..cout {
                        for ky in 0..kh {
                            for kx in 0..kw {
                                let oy = (y * stride + ky) as isize - padding as isize;
                                let ox = (x * stride + kx) as isize - padding as isize;
                                if oy < 0 || ox < 0 || oy >= oh as isize || ox >= ow as isize {
                                    continue;
                                }
                                *out.at_mut(s, o, oy as usize, ox as usize) += v * kernel.at(i, o, ky, kx);
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

/// `x[n, d] * w[d, k] + b[k]`.
pub fn fully_connected(input: &[f64], n: usize, d: usize, weights: &[f64], k: usize, bias: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; n * k];
    for r in 0..n {
        for c in 0..k {
            out[r * k + c] = bias[c] + (0..d).map(|j| input[r * d + j] * weights[j * k + c]).sum::<f64>();
        }
    }
    out
}

/// Batch normalization with biased batch variance.
pub fn batch_norm(input: &Array4, gamma: &[f64], beta: &[f64], eps: f64) -> Array4 {
    let [n, c, h, w] = input.dims;
    let count = (n * h * w) as f64;
    let mut out = Array4::zeros(input.dims);
    for ch in 0..c {
        let mut mean = 0.0;
        for s in 0..n {
            for y in 0..h {
                for x in 0..w {
                    mean += input.at(s, ch, y, x);
                }
            }
        }
        mean /= count;
        let mut var = 0.0;
        for s in 0..n {
            for y in 0..h {
                for x in 0..w {
                    var += (input.at(s, ch, y, x) - mean).powi(2);
                }
            }
        }
        var /= count;
        for s in 0..n {
            for y in 0..h {
                for x in 0..w {
                    *out.at_mut(s, ch, y, x) = gamma[ch] * (input.at(s, ch, y, x) - mean) / (var + eps).sqrt() + beta[ch];
                }
            }
        }
    }
    out
}

pub fn relu(x: f64) -> f64 {
    x.max(0.0)
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Central differences of a scalar function at `point` with the given step.
pub fn central_difference(point: &[f64], step: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut x = point.to_vec();
    (0..point.len())
        .map(|i| {
            let orig = x[i];
            x[i] = orig + step;
            let plus = f(&x);
            x[i] = orig - step;
            let minus = f(&x);
            x[i] = orig;
            (plus - minus) / (2.0 * step)
        })
        .collect()
}

/// Norm-wise relative error `|a - b| / max(|a|, |b|, floor)`.
pub fn relative_error(analytic: &[f32], numeric: &[f64], floor: f64) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    let diff: f64 = analytic.iter().zip(numeric).map(|(&a, &b)| (a as f64 - b).powi(2)).sum::<f64>().sqrt();
    let na: f64 = analytic.iter().map(|&a| (a as f64).powi(2)).sum::<f64>().sqrt();
    let nb: f64 = numeric.iter().map(|b| b.powi(2)).sum::<f64>().sqrt();
    diff / na.max(nb).max(floor)
}

/// Outcome of comparing one kernel's tape gradients with the oracle.
#[derive(Clone, Debug)]
pub struct GradCheck {
    pub name: String,
    /// Worst relative error over the kernel's differentiable inputs.
    pub rel_err: f64,
}

/// Finite-difference comparison of every layer kernel on small random inputs.
pub mod gradcheck {
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    use super::*;
    use crate::{ConvGeometry, Tape, Tensor, Var};

    const STEP: f64 = 1e-3;
    const FLOOR: f64 = 1e-6;

    fn random(rng: &mut StdRng, n: usize) -> Vec<f32> {
        (0..n).map(|_| rng.random_range(-1.0f32..1.0)).collect()
    }

    /// Values with magnitude in `[0.1, 1]`, keeping pointwise kinks out of the stencil.
    fn away_from_zero(rng: &mut StdRng, n: usize) -> Vec<f32> {
        (0..n)
            .map(|_| {
                let m = rng.random_range(0.1f32..1.0);
                if rng.random_bool(0.5) { m } else { -m }
            })
            .collect()
    }

    fn f64s(v: &[f32]) -> Vec<f64> {
        v.iter().map(|&x| x as f64).collect()
    }

    fn weighted_sum(out: &[f64], weights: &[f64]) -> f64 {
        out.iter().zip(weights).map(|(a, b)| a * b).sum()
    }

    /// Runs `build` on a tape with every operand as a parameter, backpropagates
    /// `sum(weights * out)` and returns the gradients per operand.
    fn tape_grads(
        operands: &[(Vec<usize>, Vec<f32>)],
        weights: &[f32],
        build: impl Fn(&mut Tape, &[Var]) -> Var,
    ) -> Vec<Vec<f32>> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = operands
            .iter()
            .map(|(s, d)| tape.param(Tensor::new(s.clone(), d.clone()).unwrap()))
            .collect();
        let out = build(&mut tape, &vars);
        let shape = tape.value(out).shape().to_vec();
        let w = tape.constant(Tensor::new(shape, weights.to_vec()).unwrap());
        let prod = tape.mul(out, w).unwrap();
        let loss = tape.sum(prod);
        let grads = tape.backward(loss).unwrap();
        vars.iter()
            .zip(operands)
            .map(|(&v, (_, d))| grads.get_or_zero(v, d.len()))
            .collect()
    }

    /// Compares tape gradients against central differences of `oracle`
    /// (which maps all operands, flattened, to the layer output).
    fn check(
        name: &str,
        operands: Vec<(Vec<usize>, Vec<f32>)>,
        out_len: usize,
        rng: &mut StdRng,
        build: impl Fn(&mut Tape, &[Var]) -> Var,
        oracle: impl Fn(&[Vec<f64>]) -> Vec<f64>,
    ) -> GradCheck {
        let weights = random(rng, out_len);
        let analytic = tape_grads(&operands, &weights, build);
        let w64 = f64s(&weights);
        let base: Vec<Vec<f64>> = operands.iter().map(|(_, d)| f64s(d)).collect();
        let mut worst = 0.0f64;
        for (i, grad) in analytic.iter().enumerate() {
            let numeric = central_difference(&base[i], STEP, |x| {
                let mut ops = base.clone();
                ops[i] = x.to_vec();
                weighted_sum(&oracle(&ops), &w64)
            });
            worst = worst.max(relative_error(grad, &numeric, FLOOR));
        }
        GradCheck { name: name.to_string(), rel_err: worst }
    }

    fn conv_case(rng: &mut StdRng, stride: usize, dilation: usize) -> GradCheck {
        let (n, cin, h, cout, k) = (2, 2, 8, 3, 3);
        let geom = ConvGeometry::new(stride, dilation, dilation * (k - 1) / 2);
        let oh = geom.output_extent(h, k).unwrap();
        let operands = vec![
            (vec![n, cin, h, h], random(rng, n * cin * h * h)),
            (vec![cout, cin, k, k], random(rng, cout * cin * k * k)),
            (vec![cout], random(rng, cout)),
        ];
        check(
            &format!("conv2d stride {stride} dilation {dilation}"),
            operands,
            n * cout * oh * oh,
            rng,
            move |t, v| t.conv2d(v[0], v[1], Some(v[2]), geom).unwrap(),
            move |ops| {
                let x = Array4 { dims: [n, cin, h, h], data: ops[0].clone() };
                let w = Array4 { dims: [cout, cin, k, k], data: ops[1].clone() };
                conv2d(&x, &w, Some(&ops[2]), stride, dilation, geom.padding).data
            },
        )
    }

    fn transpose_case(rng: &mut StdRng, stride: usize, k: usize, padding: usize) -> GradCheck {
        let (n, cin, h, cout) = (2, 3, 4, 2);
        let geom = ConvGeometry::new(stride, 1, padding);
        let oh = geom.transpose_extent(h, k).unwrap();
        let operands = vec![
            (vec![n, cin, h, h], random(rng, n * cin * h * h)),
            (vec![cin, cout, k, k], random(rng, cin * cout * k * k)),
            (vec![cout], random(rng, cout)),
        ];
        check(
            &format!("conv2d_transpose stride {stride} kernel {k}"),
            operands,
            n * cout * oh * oh,
            rng,
            move |t, v| t.conv2d_transpose(v[0], v[1], Some(v[2]), geom).unwrap(),
            move |ops| {
                let x = Array4 { dims: [n, cin, h, h], data: ops[0].clone() };
                let w = Array4 { dims: [cin, cout, k, k], data: ops[1].clone() };
                conv2d_transpose(&x, &w, Some(&ops[2]), stride, padding).data
            },
        )
    }

    fn fully_connected_case(rng: &mut StdRng) -> GradCheck {
        let (n, d, k) = (4, 8, 5);
        let operands = vec![
            (vec![n, d], random(rng, n * d)),
            (vec![d, k], random(rng, d * k)),
            (vec![k], random(rng, k)),
        ];
        check(
            "fully_connected",
            operands,
            n * k,
            rng,
            |t, v| t.linear(v[0], v[1], Some(v[2])).unwrap(),
            move |ops| fully_connected(&ops[0], n, d, &ops[1], k, &ops[2]),
        )
    }

    fn pointwise_case(rng: &mut StdRng, name: &str) -> GradCheck {
        let dims = vec![2, 2, 8, 8];
        let len: usize = dims.iter().product();
        let data = if name == "relu" { away_from_zero(rng, len) } else { random(rng, len) };
        let is_relu = name == "relu";
        check(
            name,
            vec![(dims, data)],
            len,
            rng,
            move |t, v| if is_relu { t.relu(v[0]) } else { t.sigmoid(v[0]) },
            move |ops| ops[0].iter().map(|&x| if is_relu { relu(x) } else { sigmoid(x) }).collect(),
        )
    }

    fn batch_norm_case(rng: &mut StdRng) -> GradCheck {
        let dims = [3, 2, 8, 8];
        let len: usize = dims.iter().product();
        let eps = 1e-5f32;
        let operands = vec![
            (dims.to_vec(), random(rng, len)),
            (vec![2], away_from_zero(rng, 2)),
            (vec![2], random(rng, 2)),
        ];
        check(
            "batch_norm",
            operands,
            len,
            rng,
            move |t, v| t.batch_norm_train(v[0], v[1], v[2], eps).unwrap().0,
            move |ops| batch_norm(&Array4 { dims, data: ops[0].clone() }, &ops[1], &ops[2], eps as f64).data,
        )
    }

    /// Every kernel the network uses.
    pub fn run_suite(seed: u64) -> Vec<GradCheck> {
        let mut rng = StdRng::seed_from_u64(seed);
        let mut out = Vec::new();
        for (stride, dilation) in [(1, 1), (2, 1), (1, 2), (1, 4), (2, 2)] {
            out.push(conv_case(&mut rng, stride, dilation));
        }
        out.push(transpose_case(&mut rng, 2, 4, 1));
        out.push(transpose_case(&mut rng, 1, 3, 1));
        out.push(fully_connected_case(&mut rng));
        out.push(pointwise_case(&mut rng, "sigmoid"));
        out.push(pointwise_case(&mut rng, "relu"));
        out.push(batch_norm_case(&mut rng));
        out
    }
}
