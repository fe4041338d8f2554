//! Miniature convolutional encoder-decoder with manual reverse-mode
//! differentiation.

use std::collections::BTreeSet;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::ImagePatch;
use crate::rng::rng_from_seed;
use crate::scalar::Scalar;

/// One network stage. Convolutions use zero padding `(kernel - 1) / 2`;
/// transposed convolutions use `(kernel - stride) / 2`, so a stride-`s`
/// transposed convolution exactly undoes the spatial reduction of a
/// stride-`s` convolution on sizes divisible by `s`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Layer {
    Conv {
        kernel: usize,
        in_ch: usize,
        out_ch: usize,
        stride: usize,
    },
    ConvTranspose {
        kernel: usize,
        in_ch: usize,
        out_ch: usize,
        stride: usize,
    },
    Relu,
    /// Adds activation `from` (0 is the network input, `k` the output of layer `k - 1`).
    SkipAdd { from: usize },
}

impl Layer {
    pub fn weight_count(&self) -> usize {
        match *self {
            Layer::Conv { kernel, in_ch, out_ch, .. } | Layer::ConvTranspose { kernel, in_ch, out_ch, .. } => {
                kernel * kernel * in_ch * out_ch
            }
            _ => 0,
        }
    }

    pub fn bias_count(&self) -> usize {
        match *self {
            Layer::Conv { out_ch, .. } | Layer::ConvTranspose { out_ch, .. } => out_ch,
            _ => 0,
        }
    }

    pub fn param_count(&self) -> usize {
        self.weight_count() + self.bias_count()
    }

    fn padding(&self) -> usize {
        match *self {
            Layer::Conv { kernel, .. } => (kernel - 1) / 2,
            Layer::ConvTranspose { kernel, stride, .. } => (kernel - stride) / 2,
            _ => 0,
        }
    }
}

/// Channels, height, width.
pub type Shape = (usize, usize, usize);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetSpec {
    pub layers: Vec<Layer>,
}

/// Location of one parameter tensor inside the flat vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamSlice {
    pub layer: usize,
    pub is_bias: bool,
    pub offset: usize,
    /// Weights: `[out][in][ky][kx]` for convolutions, `[in][out][ky][kx]` for
    /// transposed convolutions. Biases: `[out]`.
    pub shape: Vec<usize>,
}

impl ParamSlice {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl NetSpec {
    /// Two stride-2 convolutions down, two stride-2 transposed convolutions
    /// up, and a residual connection from the input.
    pub fn toy() -> Self {
        Self::encoder_decoder(8, 16)
    }

    pub fn encoder_decoder(c1: usize, c2: usize) -> Self {
        Self {
            layers: vec![
                Layer::Conv { kernel: 3, in_ch: 1, out_ch: c1, stride: 2 },
                Layer::Relu,
                Layer::Conv { kernel: 3, in_ch: c1, out_ch: c2, stride: 2 },
                Layer::Relu,
                Layer::ConvTranspose { kernel: 4, in_ch: c2, out_ch: c1, stride: 2 },
                Layer::Relu,
                Layer::ConvTranspose { kernel: 4, in_ch: c1, out_ch: 1, stride: 2 },
                Layer::SkipAdd { from: 0 },
            ],
        }
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    pub fn param_table(&self) -> Vec<ParamSlice> {
        let mut out = Vec::new();
        let mut offset = 0;
        for (l, layer) in self.layers.iter().enumerate() {
            let (wshape, out_ch) = match *layer {
                Layer::Conv { kernel, in_ch, out_ch, .. } => (vec![out_ch, in_ch, kernel, kernel], out_ch),
                Layer::ConvTranspose { kernel, in_ch, out_ch, .. } => (vec![in_ch, out_ch, kernel, kernel], out_ch),
                _ => continue,
            };
            let w = ParamSlice { layer: l, is_bias: false, offset, shape: wshape };
            offset += w.len();
            out.push(w);
            out.push(ParamSlice { layer: l, is_bias: true, offset, shape: vec![out_ch] });
            offset += out_ch;
        }
        out
    }

    /// Shapes of every activation for a single-channel `height x width` input;
    /// index 0 is the input, index `k + 1` the output of layer `k`.
    pub fn shapes(&self, height: usize, width: usize) -> Result<Vec<Shape>> {
        let bad = |l: usize, msg: String| Error::ShapeMismatch(format!("layer {l}: {msg}"));
        let mut shapes = vec![(1, height, width)];
        for (l, layer) in self.layers.iter().enumerate() {
            let (c, h, w) = shapes[l];
            let next = match *layer {
                Layer::Conv { kernel, in_ch, out_ch, stride } => {
                    if kernel == 0 || stride == 0 || kernel % 2 == 0 {
                        return Err(bad(l, "convolution kernel must be odd and stride positive".into()));
                    }
                    if in_ch != c {
                        return Err(bad(l, format!("expects {in_ch} channels, gets {c}")));
                    }
                    let p = layer.padding();
                    if h + 2 * p < kernel || w + 2 * p < kernel {
                        return Err(bad(l, format!("kernel {kernel} larger than padded {h}x{w}")));
                    }
                    (out_ch, (h + 2 * p - kernel) / stride + 1, (w + 2 * p - kernel) / stride + 1)
                }
                Layer::ConvTranspose { kernel, in_ch, out_ch, stride } => {
                    if stride == 0 || kernel < stride || (kernel - stride) % 2 != 0 {
                        return Err(bad(l, "transposed kernel must exceed stride by an even amount".into()));
                    }
                    if in_ch != c {
                        return Err(bad(l, format!("expects {in_ch} channels, gets {c}")));
                    }
                    let p = layer.padding();
                    (out_ch, (h - 1) * stride + kernel - 2 * p, (w - 1) * stride + kernel - 2 * p)
                }
                Layer::Relu => (c, h, w),
                Layer::SkipAdd { from } => {
                    if from > l {
                        return Err(bad(l, format!("skip source {from} is not an earlier activation")));
                    }
                    if shapes[from] != (c, h, w) {
                        return Err(bad(l, format!("skip shape {:?} vs {:?}", shapes[from], (c, h, w))));
                    }
                    (c, h, w)
                }
            };
            if next.1 == 0 || next.2 == 0 {
                return Err(bad(l, "empty output".into()));
            }
            shapes.push(next);
        }
        Ok(shapes)
    }

    /// Checks chain consistency and that the output shape equals the input shape.
    pub fn validate(&self, height: usize, width: usize) -> Result<Vec<Shape>> {
        let shapes = self.shapes(height, width)?;
        let last = *shapes.last().unwrap();
        if last != (1, height, width) {
            return Err(Error::ShapeMismatch(format!(
                "network maps 1x{height}x{width} to {}x{}x{}",
                last.0, last.1, last.2
            )));
        }
        Ok(shapes)
    }

    /// Horizontal extent of input pixels that can influence the centre output
    /// pixel of a `size x size` input.
    pub fn receptive_field(&self, size: usize) -> Result<usize> {
        let shapes = self.validate(size, size)?;
        let n = self.layers.len();
        let mut sets: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n + 1];
        sets[n].insert(size / 2);
        for l in (0..n).rev() {
            let out = std::mem::take(&mut sets[l + 1]);
            let in_w = shapes[l].2;
            let layer = self.layers[l];
            let p = layer.padding() as isize;
            match layer {
                Layer::Conv { kernel, stride, .. } => {
                    for &x in &out {
                        for k in 0..kernel {
                            let ix = (x * stride + k) as isize - p;
                            if ix >= 0 && (ix as usize) < in_w {
                                sets[l].insert(ix as usize);
                            }
                        }
                    }
                }
                Layer::ConvTranspose { kernel, stride, .. } => {
                    for ix in 0..in_w {
                        for k in 0..kernel {
                            let x = (ix * stride + k) as isize - p;
                            if x >= 0 && out.contains(&(x as usize)) {
                                sets[l].insert(ix);
                            }
                        }
                    }
                }
                Layer::Relu => sets[l].extend(out.iter().copied()),
                Layer::SkipAdd { from } => {
                    sets[l].extend(out.iter().copied());
                    sets[from].extend(out.iter().copied());
                }
            }
        }
        let s = &sets[0];
        Ok(match (s.first(), s.last()) {
            (Some(a), Some(b)) => b - a + 1,
            _ => 0,
        })
    }
}

/// Flat parameter vector for a [`NetSpec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenoiserParams<T> {
    pub spec: NetSpec,
    pub values: Vec<T>,
}

impl<T: Scalar> DenoiserParams<T> {
    pub fn new(spec: NetSpec, values: Vec<T>) -> Result<Self> {
        if values.len() != spec.param_count() {
            return Err(Error::ShapeMismatch(format!(
                "{} parameters for a network with {}",
                values.len(),
                spec.param_count()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("parameter".into()));
        }
        Ok(Self { spec, values })
    }

    pub fn zeros(spec: NetSpec) -> Self {
        let n = spec.param_count();
        Self { spec, values: vec![T::zero(); n] }
    }

    /// He-uniform weights, zero biases, and a zero final parameterized layer,
    /// so a network ending in a skip from the input starts as the identity.
    pub fn init(spec: NetSpec, seed: u64) -> Self {
        let mut p = Self::random(spec, seed);
        if let Some(last) = p.spec.layers.iter().rposition(|l| l.param_count() > 0) {
            for s in p.spec.param_table().iter().filter(|s| s.layer == last) {
                p.values[s.offset..s.offset + s.len()].fill(T::zero());
            }
        }
        p
    }

    /// He-uniform weights everywhere and small random biases.
    pub fn random(spec: NetSpec, seed: u64) -> Self {
        let mut rng = rng_from_seed(seed);
        let mut values = vec![T::zero(); spec.param_count()];
        for s in spec.param_table() {
            let fan_in = match spec.layers[s.layer] {
                Layer::Conv { kernel, in_ch, .. } => kernel * kernel * in_ch,
                Layer::ConvTranspose { kernel, in_ch, stride, .. } => (kernel * kernel * in_ch / (stride * stride)).max(1),
                _ => 1,
            };
            let bound = if s.is_bias { 0.01 } else { (6.0 / fan_in as f64).sqrt() };
            for v in &mut values[s.offset..s.offset + s.len()] {
                *v = T::lit(rng.random_range(-bound..=bound));
            }
        }
        Self { spec, values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Dense `channels x height x width` activation.
#[derive(Debug, Clone, PartialEq)]
struct Tensor<T> {
    c: usize,
    h: usize,
    w: usize,
    data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    fn zeros((c, h, w): Shape) -> Self {
        Self { c, h, w, data: vec![T::zero(); c * h * w] }
    }

    #[inline]
    fn idx(&self, ch: usize, y: usize, x: usize) -> usize {
        (ch * self.h + y) * self.w + x
    }
}

/// Forward activations of one sample, kept for the backward pass.
pub struct Trace<T> {
    acts: Vec<Tensor<T>>,
}

impl<T: Scalar> Trace<T> {
    pub fn output(&self) -> &[T] {
        &self.acts.last().unwrap().data
    }

    /// Which inputs of each ReLU layer are positive. Two parameter vectors
    /// with equal patterns lie in the same linear region of the network.
    pub fn relu_pattern(&self, spec: &NetSpec) -> Vec<bool> {
        spec.layers
            .iter()
            .enumerate()
            .filter(|(_, l)| matches!(l, Layer::Relu))
            .flat_map(|(l, _)| self.acts[l].data.iter().map(|&v| v > T::zero()))
            .collect()
    }
}

fn layer_params<'a, T>(values: &'a [T], offset: usize, layer: &Layer) -> (&'a [T], &'a [T]) {
    let nw = layer.weight_count();
    (&values[offset..offset + nw], &values[offset + nw..offset + layer.param_count()])
}

/// Offsets of each layer's parameters in the flat vector.
fn layer_offsets(spec: &NetSpec) -> Vec<usize> {
    let mut off = 0;
    spec.layers
        .iter()
        .map(|l| {
            let o = off;
            off += l.param_count();
            o
        })
        .collect()
}

fn run_layer<T: Scalar>(layer: &Layer, w: &[T], b: &[T], input: &Tensor<T>, shape: Shape, acts: &[Tensor<T>]) -> Tensor<T> {
    let mut out = Tensor::zeros(shape);
    let p = layer.padding() as isize;
    match *layer {
        Layer::Conv { kernel: k, in_ch, stride: s, .. } => {
            for o in 0..out.c {
                for y in 0..out.h {
                    for x in 0..out.w {
                        let mut acc = b[o];
                        for i in 0..in_ch {
                            for ky in 0..k {
                                let iy = (y * s + ky) as isize - p;
                                if iy < 0 || iy >= input.h as isize {
                                    continue;
                                }
                                for kx in 0..k {
                                    let ix = (x * s + kx) as isize - p;
                                    if ix < 0 || ix >= input.w as isize {
                                        continue;
                                    }
                                    acc += w[((o * in_ch + i) * k + ky) * k + kx] * input.data[input.idx(i, iy as usize, ix as usize)];
                                }
                            }
                        }
                        let j = out.idx(o, y, x);
                        out.data[j] = acc;
                    }
                }
            }
        }
        Layer::ConvTranspose { kernel: k, in_ch, out_ch, stride: s } => {
            for o in 0..out_ch {
                let start = o * out.h * out.w;
                out.data[start..start + out.h * out.w].fill(b[o]);
            }
            for i in 0..in_ch {
                for y in 0..input.h {
                    for x in 0..input.w {
                        let v = input.data[input.idx(i, y, x)];
                        for o in 0..out_ch {
                            for ky in 0..k {
                                let oy = (y * s + ky) as isize - p;
                                if oy < 0 || oy >= out.h as isize {
                                    continue;
                                }
                                for kx in 0..k {
                                    let ox = (x * s + kx) as isize - p;
                                    if ox < 0 || ox >= out.w as isize {
                                        continue;
                                    }
                                    let j = out.idx(o, oy as usize, ox as usize);
                                    out.data[j] += v * w[((i * out_ch + o) * k + ky) * k + kx];
                                }
                            }
                        }
                    }
                }
            }
        }
        Layer::Relu => {
            for (d, &v) in out.data.iter_mut().zip(&input.data) {
                *d = v.max(T::zero());
            }
        }
        Layer::SkipAdd { from } => {
            for ((d, &a), &b) in out.data.iter_mut().zip(&input.data).zip(&acts[from].data) {
                *d = a + b;
            }
        }
    }
    out
}

/// Runs one patch through the network, keeping every activation.
pub fn forward_trace<T: Scalar>(params: &DenoiserParams<T>, shapes: &[Shape], x: &ImagePatch<T>) -> Trace<T> {
    let spec = &params.spec;
    let offsets = layer_offsets(spec);
    let mut acts = Vec::with_capacity(spec.layers.len() + 1);
    acts.push(Tensor { c: 1, h: x.height(), w: x.width(), data: x.pixels().to_vec() });
    for (l, layer) in spec.layers.iter().enumerate() {
        let (w, b) = layer_params(&params.values, offsets[l], layer);
        let out = run_layer(layer, w, b, &acts[l], shapes[l + 1], &acts);
        acts.push(out);
    }
    Trace { acts }
}

/// Backpropagates `grad_out` (gradient of the loss w.r.t. the output pixels)
/// and accumulates parameter gradients into `grad`. Returns the gradient
/// w.r.t. the input pixels.
pub fn backward<T: Scalar>(params: &DenoiserParams<T>, trace: &Trace<T>, grad_out: &[T], grad: &mut [T]) -> Vec<T> {
    let spec = &params.spec;
    let offsets = layer_offsets(spec);
    let acts = &trace.acts;
    let mut g: Vec<Vec<T>> = acts.iter().map(|a| vec![T::zero(); a.data.len()]).collect();
    g[acts.len() - 1].copy_from_slice(grad_out);
    for (l, layer) in spec.layers.iter().enumerate().rev() {
        let gout = std::mem::take(&mut g[l + 1]);
        let input = &acts[l];
        let out = &acts[l + 1];
        let p = layer.padding() as isize;
        let off = offsets[l];
        let nw = layer.weight_count();
        match *layer {
            Layer::Conv { kernel: k, in_ch, stride: s, .. } => {
                let w = &params.values[off..off + nw];
                let (gw, gb) = grad[off..off + layer.param_count()].split_at_mut(nw);
                let gin = &mut g[l];
                for o in 0..out.c {
                    for y in 0..out.h {
                        for x in 0..out.w {
                            let go = gout[out.idx(o, y, x)];
                            if go == T::zero() {
                                continue;
                            }
                            gb[o] += go;
                            for i in 0..in_ch {
                                for ky in 0..k {
                                    let iy = (y * s + ky) as isize - p;
                                    if iy < 0 || iy >= input.h as isize {
                                        continue;
                                    }
                                    for kx in 0..k {
                                        let ix = (x * s + kx) as isize - p;
                                        if ix < 0 || ix >= input.w as isize {
                                            continue;
                                        }
                                        let wi = ((o * in_ch + i) * k + ky) * k + kx;
                                        let ii = input.idx(i, iy as usize, ix as usize);
                                        gw[wi] += go * input.data[ii];
                                        gin[ii] += go * w[wi];
                                    }
                                }
                            }
                        }
                    }
                }
            }
            Layer::ConvTranspose { kernel: k, in_ch, out_ch, stride: s } => {
                let w = &params.values[off..off + nw];
                let (gw, gb) = grad[off..off + layer.param_count()].split_at_mut(nw);
                let gin = &mut g[l];
                for (o, gbo) in gb.iter_mut().enumerate() {
                    let start = o * out.h * out.w;
                    *gbo += gout[start..start + out.h * out.w].iter().copied().sum::<T>();
                }
                for i in 0..in_ch {
                    for y in 0..input.h {
                        for x in 0..input.w {
                            let ii = input.idx(i, y, x);
                            let v = input.data[ii];
                            let mut acc = T::zero();
                            for o in 0..out_ch {
                                for ky in 0..k {
                                    let oy = (y * s + ky) as isize - p;
                                    if oy < 0 || oy >= out.h as isize {
                                        continue;
                                    }
                                    for kx in 0..k {
                                        let ox = (x * s + kx) as isize - p;
                                        if ox < 0 || ox >= out.w as isize {
                                            continue;
                                        }
                                        let go = gout[out.idx(o, oy as usize, ox as usize)];
                                        let wi = ((i * out_ch + o) * k + ky) * k + kx;
                                        gw[wi] += v * go;
                                        acc += w[wi] * go;
                                    }
                                }
                            }
                            gin[ii] += acc;
                        }
                    }
                }
            }
            Layer::Relu => {
                for ((gi, &go), &a) in g[l].iter_mut().zip(&gout).zip(&input.data) {
                    if a > T::zero() {
                        *gi += go;
                    }
                }
            }
            Layer::SkipAdd { from } => {
                for (gi, &go) in g[l].iter_mut().zip(&gout) {
                    *gi += go;
                }
                for (gi, &go) in g[from].iter_mut().zip(&gout) {
                    *gi += go;
                }
            }
        }
    }
    std::mem::take(&mut g[0])
}

fn batch_shapes<T: Scalar>(spec: &NetSpec, batch: &[ImagePatch<T>]) -> Result<Vec<Shape>> {
    let first = batch
        .first()
        .ok_or_else(|| Error::InvalidArgument("empty batch".into()))?;
    for p in batch {
        first.check_same_shape(p)?;
    }
    spec.validate(first.height(), first.width())
}

/// Applies the network to every patch (in parallel, order preserved).
pub fn forward<T: Scalar>(params: &DenoiserParams<T>, batch: &[ImagePatch<T>]) -> Result<Vec<ImagePatch<T>>> {
    let shapes = batch_shapes(&params.spec, batch)?;
    batch
        .par_iter()
        .map(|x| {
            let t = forward_trace(params, &shapes, x);
            ImagePatch::new(x.height(), x.width(), t.output().to_vec())
        })
        .collect()
}

/// Forward traces for a batch, computed in parallel.
pub fn forward_batch<T: Scalar>(params: &DenoiserParams<T>, batch: &[ImagePatch<T>]) -> Result<Vec<Trace<T>>> {
    let shapes = batch_shapes(&params.spec, batch)?;
    Ok(batch.par_iter().map(|x| forward_trace(params, &shapes, x)).collect())
}

/// Parameter gradient summed over a batch. Per-sample gradients are computed
/// in parallel and reduced in index order, so the result does not depend on
/// the thread schedule.
pub fn backward_batch<T: Scalar>(params: &DenoiserParams<T>, traces: &[Trace<T>], grad_outs: &[Vec<T>]) -> Vec<T> {
    let per_sample: Vec<Vec<T>> = traces
        .par_iter()
        .zip(grad_outs.par_iter())
        .map(|(t, go)| {
            let mut g = vec![T::zero(); params.len()];
            backward(params, t, go, &mut g);
            g
        })
        .collect();
    let mut total = vec![T::zero(); params.len()];
    for g in per_sample {
        for (a, b) in total.iter_mut().zip(g) {
            *a += b;
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    fn patch(seed: u64, n: usize) -> ImagePatch<f64> {
        let mut rng = rng_from_seed(seed);
        ImagePatch::from_fn(n, n, |_, _| rng.random::<f64>())
    }

    #[test]
    fn toy_shapes_and_rf() {
        let spec = NetSpec::toy();
        let shapes = spec.validate(8, 8).unwrap();
        assert_eq!(shapes[2], (8, 4, 4));
        assert_eq!(shapes[4], (16, 2, 2));
        assert_eq!(shapes[6], (8, 4, 4));
        assert!(spec.receptive_field(16).unwrap() >= 5);
        assert!(spec.validate(6, 6).is_err());
        let table = spec.param_table();
        assert_eq!(table.iter().map(ParamSlice::len).sum::<usize>(), spec.param_count());
        assert_eq!(table[0].shape, vec![8, 1, 3, 3]);
        assert_eq!(table[4].shape, vec![16, 8, 4, 4]);
    }

    #[test]
    fn bad_specs() {
        let spec = NetSpec {
            layers: vec![Layer::Conv { kernel: 3, in_ch: 2, out_ch: 1, stride: 1 }],
        };
        assert!(spec.validate(8, 8).is_err());
        let spec = NetSpec {
            layers: vec![
                Layer::Conv { kernel: 3, in_ch: 1, out_ch: 4, stride: 1 },
                Layer::SkipAdd { from: 0 },
            ],
        };
        assert!(spec.validate(8, 8).is_err());
    }

    #[test]
    fn identity_at_init() {
        let p = DenoiserParams::<f64>::init(NetSpec::toy(), 3);
        let x = vec![patch(1, 8), patch(2, 8)];
        assert_eq!(forward(&p, &x).unwrap(), x);
    }

    #[test]
    fn zero_input_zero_bias() {
        let mut p = DenoiserParams::<f64>::random(NetSpec::toy(), 3);
        for s in p.spec.param_table().into_iter().filter(|s| s.is_bias) {
            p.values[s.offset..s.offset + s.len()].fill(0.0);
        }
        let out = forward(&p, &[ImagePatch::filled(8, 8, 0.0)]).unwrap();
        assert!(out[0].pixels().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn deterministic_forward() {
        let p = DenoiserParams::<f64>::random(NetSpec::toy(), 9);
        let x: Vec<_> = (0..6).map(|s| patch(s, 8)).collect();
        let a = forward(&p, &x).unwrap();
        let b = forward(&p, &x).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn transposed_conv_is_adjoint_of_conv() {
        // <conv(x), y> == <x, convT(y)> for shared weights and zero bias.
        let down = Layer::Conv { kernel: 3, in_ch: 2, out_ch: 3, stride: 1 };
        let up = Layer::ConvTranspose { kernel: 3, in_ch: 3, out_ch: 2, stride: 1 };
        let mut rng = rng_from_seed(4);
        let w: Vec<f64> = (0..down.weight_count()).map(|_| rng.random::<f64>() - 0.5).collect();
        // [o][i][ky][kx] and [i][o][ky][kx] coincide when the roles swap.
        let x = Tensor { c: 2, h: 7, w: 7, data: (0..98).map(|_| rng.random::<f64>()).collect() };
        let y = Tensor { c: 3, h: 7, w: 7, data: (0..147).map(|_| rng.random::<f64>()).collect() };
        let cx = run_layer(&down, &w, &[0.0; 3], &x, (3, 7, 7), &[]);
        let ty = run_layer(&up, &w, &[0.0; 2], &y, (2, 7, 7), &[]);
        let lhs: f64 = cx.data.iter().zip(&y.data).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.data.iter().zip(&ty.data).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12, "{lhs} {rhs}");
    }
}
