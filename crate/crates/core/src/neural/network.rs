//! Sequential networks with hand-written forward and backward passes.
//!
//! Activations are row-major with the batch as leading dimension; image
//! tensors are `[batch, height, width, channels]`.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::tensor::{gemm, Tensor, Trans};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    /// `y = x · w + b` with `w: [in, out]`.
    Dense { w: Tensor, b: Tensor },
    /// Elementwise `max(0, x)`; derivative at 0 is 0.
    Relu,
    /// 3×3 same-padded convolution, `w: [3·3·c_in, c_out]` with row index
    /// `(ky·3 + kx)·c_in + ci`.
    Conv2d { w: Tensor, b: Tensor, c_in: usize, c_out: usize },
    /// Non-overlapping `size × size` max pooling with floor division.
    MaxPool { size: usize },
    Flatten,
}

const K: usize = 3;

impl Layer {
    pub fn dense(rng: &mut ChaCha8Rng, n_in: usize, n_out: usize) -> Layer {
        Layer::Dense { w: he_uniform(rng, &[n_in, n_out], n_in), b: Tensor::param(&[n_out], vec![0.0; n_out]) }
    }

    pub fn conv(rng: &mut ChaCha8Rng, c_in: usize, c_out: usize) -> Layer {
        let fan_in = K * K * c_in;
        Layer::Conv2d {
            w: he_uniform(rng, &[fan_in, c_out], fan_in),
            b: Tensor::param(&[c_out], vec![0.0; c_out]),
            c_in,
            c_out,
        }
    }

    /// Per-sample output shape for a per-sample input shape.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        match self {
            Layer::Dense { w, .. } => {
                if input != [w.shape[0]] {
                    return Err(Error::ShapeMismatch { expected: vec![w.shape[0]], found: input.to_vec() });
                }
                Ok(vec![w.shape[1]])
            }
            Layer::Relu => Ok(input.to_vec()),
            Layer::Conv2d { c_in, c_out, .. } => match input {
                [h, w, c] if c == c_in => Ok(vec![*h, *w, *c_out]),
                _ => Err(Error::ShapeMismatch { expected: vec![0, 0, *c_in], found: input.to_vec() }),
            },
            Layer::MaxPool { size } => match input {
                [h, w, c] if h / size > 0 && w / size > 0 => Ok(vec![h / size, w / size, *c]),
                _ => Err(Error::ShapeMismatch { expected: vec![*size, *size, 0], found: input.to_vec() }),
            },
            Layer::Flatten => Ok(vec![input.iter().product()]),
        }
    }

    fn params(&self) -> Vec<&Tensor> {
        match self {
            Layer::Dense { w, b } | Layer::Conv2d { w, b, .. } => vec![w, b],
            _ => Vec::new(),
        }
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        match self {
            Layer::Dense { w, b } | Layer::Conv2d { w, b, .. } => vec![w, b],
            _ => Vec::new(),
        }
    }
}

fn he_uniform(rng: &mut ChaCha8Rng, shape: &[usize], fan_in: usize) -> Tensor {
    let limit = (6.0 / fan_in as f64).sqrt();
    let n: usize = shape.iter().product();
    Tensor::param(shape, (0..n).map(|_| rng.random_range(-limit..limit)).collect())
}

/// Saved forward state needed by the backward pass.
enum Cache {
    Dense { input: Tensor },
    Relu { positive: Vec<bool> },
    Conv { input: Tensor },
    Pool { argmax: Vec<usize>, in_shape: Vec<usize> },
    Flatten { in_shape: Vec<usize> },
    /// Single-channel conv → ReLU → pool computed in one sweep; `argmax`
    /// indexes pixels of the (never stored) conv output, `None` where the
    /// pooled value was clipped by the ReLU.
    ConvReluPool { input: Tensor, argmax: Vec<Option<usize>>, out_hw: (usize, usize) },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub layers: Vec<Layer>,
    /// Per-sample input shape.
    pub input_shape: Vec<usize>,
}

/// Opaque forward trace for [`Network::backward`].
pub struct Trace {
    /// Each cache with the index of the first layer it covers.
    caches: Vec<(usize, Cache)>,
}

impl Network {
    pub fn new(input_shape: Vec<usize>, layers: Vec<Layer>) -> Result<Self> {
        let net = Self { layers, input_shape };
        net.shape_trace()?;
        Ok(net)
    }

    /// Per-sample shapes: the input followed by each layer's output.
    pub fn shape_trace(&self) -> Result<Vec<Vec<usize>>> {
        let mut shapes = vec![self.input_shape.clone()];
        for l in &self.layers {
            let next = l.output_shape(shapes.last().expect("non-empty"))?;
            shapes.push(next);
        }
        Ok(shapes)
    }

    pub fn params(&self) -> Vec<&Tensor> {
        self.layers.iter().flat_map(|l| l.params()).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers.iter_mut().flat_map(|l| l.params_mut()).collect()
    }

    pub fn n_params(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    pub fn zero_grads(&self) -> Vec<Tensor> {
        self.params().iter().map(|p| Tensor::zeros(&p.shape)).collect()
    }

    fn check_input(&self, x: &Tensor) -> Result<()> {
        if x.shape.len() != self.input_shape.len() + 1 || x.shape[1..] != self.input_shape[..] {
            let mut expected = vec![x.rows()];
            expected.extend(&self.input_shape);
            return Err(Error::ShapeMismatch { expected, found: x.shape.clone() });
        }
        Ok(())
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        self.run(x, false).map(|(y, _)| y)
    }

    pub fn forward_trace(&self, x: &Tensor) -> Result<(Tensor, Trace)> {
        self.run(x, true)
    }

    fn run(&self, x: &Tensor, keep: bool) -> Result<(Tensor, Trace)> {
        self.check_input(x)?;
        let mut caches = Vec::with_capacity(if keep { self.layers.len() } else { 0 });
        let mut cur = x.clone();
        let mut i = 0;
        while i < self.layers.len() {
            if let Some(pool) = self.fusable(i) {
                let Layer::Conv2d { w, b, c_out, .. } = &self.layers[i] else { unreachable!() };
                let (next, cache) = conv_relu_pool(&cur, &w.data, &b.data, *c_out, pool, keep)
                    .ok_or(Error::NonFiniteActivation { layer: i })?;
                if let Some(c) = cache {
                    caches.push((i, c));
                }
                cur = next;
                i += 3;
                continue;
            }
            let layer = &self.layers[i];
            let (next, cache) = forward_layer(layer, cur, keep);
            let fresh = matches!(layer, Layer::Dense { .. } | Layer::Conv2d { .. });
            if fresh && next.data.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteActivation { layer: i });
            }
            if let Some(c) = cache {
                caches.push((i, c));
            }
            cur = next;
            i += 1;
        }
        Ok((cur, Trace { caches }))
    }

    /// Pool size if layers `i..i+3` are a single-channel conv, ReLU and
    /// max pool.
    fn fusable(&self, i: usize) -> Option<usize> {
        match self.layers.get(i..i + 3)? {
            [Layer::Conv2d { c_in: 1, .. }, Layer::Relu, Layer::MaxPool { size }] => Some(*size),
            _ => None,
        }
    }

    /// Back-propagate `dout` (gradient of the objective w.r.t. the network
    /// output), accumulating parameter gradients into `grads`. Returns the
    /// gradient w.r.t. the input when `input_grad` is set.
    pub fn backward(
        &self,
        trace: Trace,
        dout: Tensor,
        grads: &mut [Tensor],
        input_grad: bool,
    ) -> Option<Tensor> {
        let mut slots: Vec<usize> = Vec::with_capacity(self.layers.len());
        let mut next_slot = 0;
        for l in &self.layers {
            slots.push(next_slot);
            next_slot += l.params().len();
        }
        let mut grad = dout;
        for (index, cache) in trace.caches.into_iter().rev() {
            let need_dx = index > 0 || input_grad;
            let slot = slots[index];
            grad = match cache {
                Cache::ConvReluPool { input, argmax, out_hw } => {
                    let Layer::Conv2d { w, c_out, .. } = &self.layers[index] else { unreachable!() };
                    conv_relu_pool_backward(&input, &w.data, *c_out, &argmax, out_hw, &grad, &mut grads[slot..], need_dx)
                }
                cache => backward_layer(&self.layers[index], cache, grad, &mut grads[slot..], need_dx),
            };
            if !need_dx {
                return None;
            }
        }
        Some(grad)
    }
}

fn forward_layer(layer: &Layer, x: Tensor, keep: bool) -> (Tensor, Option<Cache>) {
    match layer {
        Layer::Dense { w, b } => {
            let (batch, n_in, n_out) = (x.rows(), w.shape[0], w.shape[1]);
            let mut out = Tensor::zeros(&[batch, n_out]);
            for row in out.data.chunks_mut(n_out) {
                row.copy_from_slice(&b.data);
            }
            gemm(batch, n_in, n_out, 1.0, &x.data, Trans::No, &w.data, Trans::No, 1.0, &mut out.data);
            (out, keep.then_some(Cache::Dense { input: x }))
        }
        Layer::Relu => {
            let mut out = x;
            let positive = if keep { out.data.iter().map(|v| *v > 0.0).collect() } else { Vec::new() };
            for v in out.data.iter_mut() {
                if !(*v > 0.0) {
                    *v = 0.0;
                }
            }
            (out, keep.then_some(Cache::Relu { positive }))
        }
        Layer::Conv2d { w, b, c_in, c_out } => {
            let (batch, h, wd) = (x.shape[0], x.shape[1], x.shape[2]);
            let mut out = Tensor::zeros(&[batch, h, wd, *c_out]);
            for s in 0..batch {
                let o = &mut out.data[s * h * wd * c_out..(s + 1) * h * wd * c_out];
                for px in o.chunks_mut(*c_out) {
                    px.copy_from_slice(&b.data);
                }
                if *c_in == 1 {
                    conv_single_channel(x.row(s), h, wd, &w.data, *c_out, o);
                } else {
                    let mut col = vec![0.0; h * wd * K * K * c_in];
                    im2col(x.row(s), h, wd, *c_in, &mut col);
                    gemm(h * wd, K * K * c_in, *c_out, 1.0, &col, Trans::No, &w.data, Trans::No, 1.0, o);
                }
            }
            (out, keep.then_some(Cache::Conv { input: x }))
        }
        Layer::MaxPool { size } => {
            let (batch, h, wd, c) = (x.shape[0], x.shape[1], x.shape[2], x.shape[3]);
            let (oh, ow) = (h / size, wd / size);
            let mut out = Tensor::zeros(&[batch, oh, ow, c]);
            let mut argmax = if keep { vec![0usize; out.len()] } else { Vec::new() };
            let mut best_i = vec![0usize; c];
            for s in 0..batch {
                let base = s * h * wd * c;
                for oy in 0..oh {
                    for ox in 0..ow {
                        let o = ((s * oh + oy) * ow + ox) * c;
                        let first = base + (oy * size * wd + ox * size) * c;
                        let best = &mut out.data[o..o + c];
                        best.copy_from_slice(&x.data[first..first + c]);
                        best_i.iter_mut().enumerate().for_each(|(ch, b)| *b = first + ch);
                        for ky in 0..*size {
                            for kx in 0..*size {
                                let i0 = base + ((oy * size + ky) * wd + ox * size + kx) * c;
                                for (ch, (b, bi)) in best.iter_mut().zip(best_i.iter_mut()).enumerate() {
                                    let v = x.data[i0 + ch];
                                    if v > *b {
                                        *b = v;
                                        *bi = i0 + ch;
                                    }
                                }
                            }
                        }
                        if keep {
                            argmax[o..o + c].copy_from_slice(&best_i);
                        }
                    }
                }
            }
            (out, keep.then(|| Cache::Pool { argmax, in_shape: x.shape.clone() }))
        }
        Layer::Flatten => {
            let in_shape = x.shape.clone();
            let batch = x.rows();
            let width = x.row_len();
            let out = Tensor { shape: vec![batch, width], data: x.data, requires_grad: false };
            (out, keep.then_some(Cache::Flatten { in_shape }))
        }
    }
}

fn backward_layer(layer: &Layer, cache: Cache, dout: Tensor, grads: &mut [Tensor], need_dx: bool) -> Tensor {
    match (layer, cache) {
        (Layer::Dense { w, .. }, Cache::Dense { input }) => {
            let (batch, n_in, n_out) = (input.rows(), w.shape[0], w.shape[1]);
            gemm(n_in, batch, n_out, 1.0, &input.data, Trans::Yes, &dout.data, Trans::No, 1.0, &mut grads[0].data);
            for row in dout.data.chunks(n_out) {
                for (g, d) in grads[1].data.iter_mut().zip(row) {
                    *g += d;
                }
            }
            let mut dx = Tensor::zeros(&[batch, n_in]);
            if need_dx {
                gemm(batch, n_out, n_in, 1.0, &dout.data, Trans::No, &w.data, Trans::Yes, 0.0, &mut dx.data);
            }
            dx
        }
        (Layer::Relu, Cache::Relu { positive }) => {
            let mut dx = dout;
            for (g, p) in dx.data.iter_mut().zip(positive) {
                if !p {
                    *g = 0.0;
                }
            }
            dx
        }
        (Layer::Conv2d { w, c_in, c_out, .. }, Cache::Conv { input }) => {
            let (batch, h, wd) = (input.shape[0], input.shape[1], input.shape[2]);
            let (c_in, c_out) = (*c_in, *c_out);
            let cols = K * K * c_in;
            let mut dx = Tensor::zeros(if need_dx { &input.shape[..] } else { &[0] });
            let per_out = h * wd * c_out;
            let per_in = h * wd * c_in;
            let wt = transpose(&w.data, cols, c_out);
            let mut dwt = vec![0.0; c_out * cols];
            let mut col = Vec::new();
            let mut dcol = Vec::new();
            for s in 0..batch {
                let d = &dout.data[s * per_out..(s + 1) * per_out];
                for px in d.chunks(c_out) {
                    for (g, v) in grads[1].data.iter_mut().zip(px) {
                        *g += v;
                    }
                }
                let x_s = input.row(s);
                let dx_s = if need_dx { Some(&mut dx.data[s * per_in..(s + 1) * per_in]) } else { None };
                let nnz = d.iter().filter(|v| **v != 0.0).count();
                if c_in == 1 && dx_s.is_none() {
                    conv_single_channel_dw(x_s, h, wd, d, c_out, &mut grads[0].data);
                } else if nnz * 4 <= d.len() {
                    conv_backward_sparse(x_s, h, wd, c_in, c_out, d, &wt, &mut dwt, dx_s);
                } else {
                    col.resize(h * wd * cols, 0.0);
                    im2col(x_s, h, wd, c_in, &mut col);
                    gemm(cols, h * wd, c_out, 1.0, &col, Trans::Yes, d, Trans::No, 1.0, &mut grads[0].data);
                    if let Some(dx_s) = dx_s {
                        dcol.resize(h * wd * cols, 0.0);
                        gemm(h * wd, c_out, cols, 1.0, d, Trans::No, &w.data, Trans::Yes, 0.0, &mut dcol);
                        col2im(&dcol, h, wd, c_in, dx_s);
                    }
                }
            }
            for co in 0..c_out {
                for r in 0..cols {
                    grads[0].data[r * c_out + co] += dwt[co * cols + r];
                }
            }
            dx
        }
        (Layer::MaxPool { .. }, Cache::Pool { argmax, in_shape }) => {
            let mut dx = Tensor::zeros(&in_shape);
            for (g, i) in dout.data.iter().zip(argmax) {
                dx.data[i] += g;
            }
            dx
        }
        (Layer::Flatten, Cache::Flatten { in_shape }) => {
            Tensor { shape: in_shape, data: dout.data, requires_grad: false }
        }
        _ => unreachable!("cache does not match layer"),
    }
}

/// Direct 3×3 same-padded convolution of a one-channel image, accumulated
/// into `out` (`h × w × c_out`). Zero pixels are skipped, which makes
/// rasterized line images cheap.
fn conv_single_channel(input: &[f64], h: usize, w: usize, weights: &[f64], c_out: usize, out: &mut [f64]) {
    for (q, &v) in input.iter().enumerate() {
        if v == 0.0 {
            continue;
        }
        let (iy, ix) = (q / w, q % w);
        for ky in 0..K {
            let Some(y) = (iy + 1).checked_sub(ky).filter(|&y| y < h) else { continue };
            for kx in 0..K {
                let Some(x) = (ix + 1).checked_sub(kx).filter(|&x| x < w) else { continue };
                let dst = &mut out[(y * w + x) * c_out..(y * w + x + 1) * c_out];
                let tap = &weights[(ky * K + kx) * c_out..(ky * K + kx + 1) * c_out];
                for (o, t) in dst.iter_mut().zip(tap) {
                    *o += v * t;
                }
            }
        }
    }
}

/// Pre-activation of a 3×3 same-padded single-channel convolution at pixel
/// `(y, x)`, written into `z`.
#[allow(clippy::too_many_arguments)]
fn conv1_at(input: &[f64], h: usize, w: usize, y: usize, x: usize, weights: &[f64], bias: &[f64], z: &mut [f64]) {
    let c_out = bias.len();
    z.copy_from_slice(bias);
    for ky in 0..K {
        let Some(iy) = (y + ky).checked_sub(1).filter(|&v| v < h) else { continue };
        for kx in 0..K {
            let Some(ix) = (x + kx).checked_sub(1).filter(|&v| v < w) else { continue };
            let v = input[iy * w + ix];
            if v == 0.0 {
                continue;
            }
            let tap = &weights[(ky * K + kx) * c_out..(ky * K + kx + 1) * c_out];
            for (o, t) in z.iter_mut().zip(tap) {
                *o += v * t;
            }
        }
    }
}

/// Fused forward of conv (one input channel) → ReLU → max pool. Matches
/// the unfused layers exactly, ties included. Returns `None` on a
/// non-finite pre-activation.
fn conv_relu_pool(
    x: &Tensor,
    weights: &[f64],
    bias: &[f64],
    c_out: usize,
    size: usize,
    keep: bool,
) -> Option<(Tensor, Option<Cache>)> {
    let (batch, h, w) = (x.shape[0], x.shape[1], x.shape[2]);
    let (oh, ow) = (h / size, w / size);
    let mut out = Tensor::zeros(&[batch, oh, ow, c_out]);
    let mut argmax = if keep { vec![None; out.len()] } else { Vec::new() };
    let mut z = vec![0.0; c_out];
    let mut best = vec![0.0; c_out];
    let mut best_p = vec![0usize; c_out];
    for s in 0..batch {
        let img = x.row(s);
        for oy in 0..oh {
            for ox in 0..ow {
                for ky in 0..size {
                    for kx in 0..size {
                        let (y, xx) = (oy * size + ky, ox * size + kx);
                        let p = s * h * w + y * w + xx;
                        conv1_at(img, h, w, y, xx, weights, bias, &mut z);
                        if z.iter().any(|v| !v.is_finite()) {
                            return None;
                        }
                        if ky == 0 && kx == 0 {
                            best.copy_from_slice(&z);
                            best_p.fill(p);
                        } else {
                            for ((b, bp), &v) in best.iter_mut().zip(best_p.iter_mut()).zip(&z) {
                                if v > *b {
                                    *b = v;
                                    *bp = p;
                                }
                            }
                        }
                    }
                }
                let o = ((s * oh + oy) * ow + ox) * c_out;
                for ch in 0..c_out {
                    let positive = best[ch] > 0.0;
                    out.data[o + ch] = if positive { best[ch] } else { 0.0 };
                    if keep && positive {
                        argmax[o + ch] = Some(best_p[ch]);
                    }
                }
            }
        }
    }
    let cache = keep.then(|| Cache::ConvReluPool { input: x.clone(), argmax, out_hw: (oh, ow) });
    Some((out, cache))
}

#[allow(clippy::too_many_arguments)]
fn conv_relu_pool_backward(
    input: &Tensor,
    weights: &[f64],
    c_out: usize,
    argmax: &[Option<usize>],
    out_hw: (usize, usize),
    dout: &Tensor,
    grads: &mut [Tensor],
    need_dx: bool,
) -> Tensor {
    let (h, w) = (input.shape[1], input.shape[2]);
    let mut dx = Tensor::zeros(if need_dx { &input.shape[..] } else { &[0] });
    debug_assert_eq!(dout.len(), input.shape[0] * out_hw.0 * out_hw.1 * c_out);
    for (o, (&g, &p)) in dout.data.iter().zip(argmax).enumerate() {
        let Some(p) = p else { continue };
        if g == 0.0 {
            continue;
        }
        let ch = o % c_out;
        let (s, rem) = (p / (h * w), p % (h * w));
        let (y, x) = (rem / w, rem % w);
        let img = input.row(s);
        grads[1].data[ch] += g;
        for ky in 0..K {
            let Some(iy) = (y + ky).checked_sub(1).filter(|&v| v < h) else { continue };
            for kx in 0..K {
                let Some(ix) = (x + kx).checked_sub(1).filter(|&v| v < w) else { continue };
                let t = (ky * K + kx) * c_out + ch;
                let q = iy * w + ix;
                grads[0].data[t] += g * img[q];
                if need_dx {
                    dx.data[s * h * w + q] += g * weights[t];
                }
            }
        }
    }
    dx
}

/// Row-major `rows × cols` transpose.
fn transpose(a: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut t = vec![0.0; a.len()];
    for r in 0..rows {
        for c in 0..cols {
            t[c * rows + r] = a[r * cols + c];
        }
    }
    t
}

/// Convolution backward pass that visits only non-zero output gradients,
/// which after max pooling are at most one per window and channel.
/// Accumulates the transposed weight gradient into `dwt`
/// (`c_out × 9·c_in`) and, if given, the input gradient into `dx`.
#[allow(clippy::too_many_arguments)]
fn conv_backward_sparse(
    input: &[f64],
    h: usize,
    w: usize,
    c_in: usize,
    c_out: usize,
    dout: &[f64],
    wt: &[f64],
    dwt: &mut [f64],
    mut dx: Option<&mut [f64]>,
) {
    let cols = K * K * c_in;
    for (p, row) in dout.chunks(c_out).enumerate() {
        let (y, x) = (p / w, p % w);
        for (co, &g) in row.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            for ky in 0..K {
                let Some(iy) = (y + ky).checked_sub(1).filter(|&v| v < h) else { continue };
                for kx in 0..K {
                    let Some(ix) = (x + kx).checked_sub(1).filter(|&v| v < w) else { continue };
                    let src = (iy * w + ix) * c_in;
                    let tap = co * cols + (ky * K + kx) * c_in;
                    for (a, v) in dwt[tap..tap + c_in].iter_mut().zip(&input[src..src + c_in]) {
                        *a += g * v;
                    }
                    if let Some(dx) = dx.as_deref_mut() {
                        for (a, v) in dx[src..src + c_in].iter_mut().zip(&wt[tap..tap + c_in]) {
                            *a += g * v;
                        }
                    }
                }
            }
        }
    }
}

/// Weight gradient of [`conv_single_channel`].
fn conv_single_channel_dw(input: &[f64], h: usize, w: usize, dout: &[f64], c_out: usize, dw: &mut [f64]) {
    for (q, &v) in input.iter().enumerate() {
        if v == 0.0 {
            continue;
        }
        let (iy, ix) = (q / w, q % w);
        for ky in 0..K {
            let Some(y) = (iy + 1).checked_sub(ky).filter(|&y| y < h) else { continue };
            for kx in 0..K {
                let Some(x) = (ix + 1).checked_sub(kx).filter(|&x| x < w) else { continue };
                let g = &dout[(y * w + x) * c_out..(y * w + x + 1) * c_out];
                let tap = &mut dw[(ky * K + kx) * c_out..(ky * K + kx + 1) * c_out];
                for (t, gi) in tap.iter_mut().zip(g) {
                    *t += v * gi;
                }
            }
        }
    }
}

/// Unfold 3×3 same-padded patches: row `y·w + x`, column
/// `(ky·3 + kx)·c + ci`.
fn im2col(input: &[f64], h: usize, w: usize, c: usize, col: &mut [f64]) {
    let cols = K * K * c;
    for y in 0..h {
        for x in 0..w {
            let row = &mut col[(y * w + x) * cols..(y * w + x + 1) * cols];
            for ky in 0..K {
                let iy = y as isize + ky as isize - 1;
                for kx in 0..K {
                    let ix = x as isize + kx as isize - 1;
                    let dst = &mut row[(ky * K + kx) * c..(ky * K + kx + 1) * c];
                    if iy < 0 || ix < 0 || iy >= h as isize || ix >= w as isize {
                        dst.fill(0.0);
                    } else {
                        let src = ((iy as usize) * w + ix as usize) * c;
                        dst.copy_from_slice(&input[src..src + c]);
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatter-add patch gradients back onto the image.
fn col2im(col: &[f64], h: usize, w: usize, c: usize, out: &mut [f64]) {
    let cols = K * K * c;
    for y in 0..h {
        for x in 0..w {
            let row = &col[(y * w + x) * cols..(y * w + x + 1) * cols];
            for ky in 0..K {
                let iy = y as isize + ky as isize - 1;
                if iy < 0 || iy >= h as isize {
                    continue;
                }
                for kx in 0..K {
                    let ix = x as isize + kx as isize - 1;
                    if ix < 0 || ix >= w as isize {
                        continue;
                    }
                    let dst = ((iy as usize) * w + ix as usize) * c;
                    let src = &row[(ky * K + kx) * c..(ky * K + kx + 1) * c];
                    for (o, v) in out[dst..dst + c].iter_mut().zip(src) {
                        *o += v;
                    }
                }
            }
        }
    }
}
