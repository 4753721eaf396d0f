//! Layered network with exact reverse-mode gradients.
//!
//! Supported layers: 3x3 convolution (stride 1, zero padding 1), 2x2 max-pool
//! (stride 2) and fully-connected. A fully-connected layer following a
//! spatial layer flattens its input in channel-major order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Tensor;
use crate::scalar::Scalar;

const KERNEL: usize = 3;
const KERNEL_AREA: usize = KERNEL * KERNEL;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Sigmoid,
    None,
}

impl Activation {
    #[inline]
    fn apply<S: Scalar>(self, x: S) -> S {
        match self {
            Activation::Relu => x.max(S::zero()),
            Activation::Sigmoid => sigmoid(x),
            Activation::None => x,
        }
    }

    /// Derivative expressed through the activation's output.
    #[inline]
    fn derivative_from_output<S: Scalar>(self, y: S) -> S {
        match self {
            Activation::Relu => {
                if y > S::zero() {
                    S::one()
                } else {
                    S::zero()
                }
            }
            Activation::Sigmoid => y * (S::one() - y),
            Activation::None => S::one(),
        }
    }
}

#[inline]
pub(crate) fn sigmoid<S: Scalar>(x: S) -> S {
    if x >= S::zero() {
        S::one() / (S::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (S::one() + e)
    }
}

/// Architecture description used to build a network.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LayerSpec {
    Conv { out_channels: usize, activation: Activation },
    #[serde(rename = "maxpool")]
    MaxPool,
    Dense { outputs: usize, activation: Activation },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Conv<S> {
    pub in_channels: usize,
    pub out_channels: usize,
    pub height: usize,
    pub width: usize,
    /// `out_channels x in_channels x 3 x 3`.
    pub weight: Vec<S>,
    pub bias: Vec<S>,
    pub activation: Activation,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MaxPool {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dense<S> {
    pub inputs: usize,
    pub outputs: usize,
    /// `outputs x inputs`.
    pub weight: Vec<S>,
    pub bias: Vec<S>,
    pub activation: Activation,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Layer<S> {
    Conv(Conv<S>),
    MaxPool(MaxPool),
    Dense(Dense<S>),
}

impl<S: Scalar> Layer<S> {
    pub fn input_len(&self) -> usize {
        match self {
            Layer::Conv(c) => c.in_channels * c.height * c.width,
            Layer::MaxPool(p) => p.channels * p.height * p.width,
            Layer::Dense(d) => d.inputs,
        }
    }

    pub fn output_len(&self) -> usize {
        match self {
            Layer::Conv(c) => c.out_channels * c.height * c.width,
            Layer::MaxPool(p) => p.channels * (p.height / 2) * (p.width / 2),
            Layer::Dense(d) => d.outputs,
        }
    }

    fn activation(&self) -> Activation {
        match self {
            Layer::Conv(c) => c.activation,
            Layer::MaxPool(_) => Activation::None,
            Layer::Dense(d) => d.activation,
        }
    }

    fn params(&self) -> Option<(&[S], &[S])> {
        match self {
            Layer::Conv(c) => Some((&c.weight, &c.bias)),
            Layer::Dense(d) => Some((&d.weight, &d.bias)),
            Layer::MaxPool(_) => None,
        }
    }

    fn params_mut(&mut self) -> Option<(&mut [S], &mut [S])> {
        match self {
            Layer::Conv(c) => Some((&mut c.weight, &mut c.bias)),
            Layer::Dense(d) => Some((&mut d.weight, &mut d.bias)),
            Layer::MaxPool(_) => None,
        }
    }
}

/// Parameter gradients, one buffer per parameter tensor in layer order
/// (weight before bias).
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients<S> {
    pub tensors: Vec<Vec<S>>,
}

impl<S: Scalar> Gradients<S> {
    pub fn zeros_like(network: &Network<S>) -> Self {
        Gradients {
            tensors: network.params().iter().map(|p| vec![S::zero(); p.len()]).collect(),
        }
    }

    pub fn scale(&mut self, factor: S) {
        for t in &mut self.tensors {
            for g in t.iter_mut() {
                *g *= factor;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().flatten().all(|g| g.is_finite())
    }
}

/// Activations recorded by a batched forward pass, consumed by backward.
#[derive(Clone, Debug)]
pub struct Trace<S> {
    batch: usize,
    /// `acts[0]` is the input; `acts[i + 1]` is the output of layer `i`.
    acts: Vec<Vec<S>>,
    pool_argmax: Vec<Vec<u32>>,
}

impl<S: Scalar> Trace<S> {
    pub fn batch(&self) -> usize {
        self.batch
    }

    pub fn output(&self) -> &[S] {
        self.acts.last().expect("trace always holds the input")
    }
}

#[derive(Clone, Copy, Debug)]
pub struct BackwardOptions {
    pub param_grads: bool,
    pub input_grad: bool,
    /// The upstream gradient is taken with respect to the last layer's
    /// pre-activation instead of its output.
    pub upstream_is_preactivation: bool,
}

impl Default for BackwardOptions {
    fn default() -> Self {
        BackwardOptions {
            param_grads: true,
            input_grad: true,
            upstream_is_preactivation: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Network<S> {
    input_shape: Vec<usize>,
    layers: Vec<Layer<S>>,
}

impl<S: Scalar> Network<S> {
    /// Builds a network with seeded uniform Glorot initialization and zero biases.
    pub fn new(input_shape: &[usize], specs: &[LayerSpec], seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut network = Network::zeroed(input_shape, specs)?;
        for layer in &mut network.layers {
            let (fan_in, fan_out) = match layer {
                Layer::Conv(c) => (c.in_channels * KERNEL_AREA, c.out_channels * KERNEL_AREA),
                Layer::Dense(d) => (d.inputs, d.outputs),
                Layer::MaxPool(_) => continue,
            };
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let (weight, _) = layer.params_mut().expect("parametric layer");
            for w in weight.iter_mut() {
                *w = S::from_f64_lossy(rng.random_range(-limit..limit));
            }
        }
        Ok(network)
    }

    /// Builds a network whose parameters are all zero.
    pub fn zeroed(input_shape: &[usize], specs: &[LayerSpec]) -> Result<Self> {
        if specs.is_empty() {
            return Err(Error::invalid("network needs at least one layer"));
        }
        let mut spatial = match *input_shape {
            [c, h, w] if c > 0 && h > 0 && w > 0 => Some((c, h, w)),
            [n] if n > 0 => None,
            _ => return Err(Error::invalid(format!("unsupported input shape {input_shape:?}"))),
        };
        let mut flat: usize = input_shape.iter().product();
        let mut layers = Vec::with_capacity(specs.len());
        for spec in specs {
            let layer = match *spec {
                LayerSpec::Conv { out_channels, activation } => {
                    let (c, h, w) = spatial
                        .ok_or_else(|| Error::invalid("convolution requires a spatial input"))?;
                    if out_channels == 0 {
                        return Err(Error::invalid("convolution needs at least one output channel"));
                    }
                    spatial = Some((out_channels, h, w));
                    Layer::Conv(Conv {
                        in_channels: c,
                        out_channels,
                        height: h,
                        width: w,
                        weight: vec![S::zero(); out_channels * c * KERNEL_AREA],
                        bias: vec![S::zero(); out_channels],
                        activation,
                    })
                }
                LayerSpec::MaxPool => {
                    let (c, h, w) =
                        spatial.ok_or_else(|| Error::invalid("max-pool requires a spatial input"))?;
                    if h < 2 || w < 2 {
                        return Err(Error::invalid(format!("max-pool input {h}x{w} is smaller than 2x2")));
                    }
                    spatial = Some((c, h / 2, w / 2));
                    Layer::MaxPool(MaxPool { channels: c, height: h, width: w })
                }
                LayerSpec::Dense { outputs, activation } => {
                    if outputs == 0 {
                        return Err(Error::invalid("fully-connected layer needs at least one output"));
                    }
                    spatial = None;
                    Layer::Dense(Dense {
                        inputs: flat,
                        outputs,
                        weight: vec![S::zero(); outputs * flat],
                        bias: vec![S::zero(); outputs],
                        activation,
                    })
                }
            };
            flat = layer.output_len();
            layers.push(layer);
        }
        Ok(Network {
            input_shape: input_shape.to_vec(),
            layers,
        })
    }

    /// Assembles a network from explicit layers, checking that shapes compose.
    pub fn from_layers(input_shape: Vec<usize>, layers: Vec<Layer<S>>) -> Result<Self> {
        let specs: Vec<LayerSpec> = layers.iter().map(layer_spec).collect();
        let skeleton = Network::<S>::zeroed(&input_shape, &specs)?;
        for (built, given) in skeleton.layers.iter().zip(&layers) {
            let consistent = match (built, given) {
                (Layer::Conv(a), Layer::Conv(b)) => {
                    a.in_channels == b.in_channels
                        && a.height == b.height
                        && a.width == b.width
                        && a.weight.len() == b.weight.len()
                        && a.bias.len() == b.bias.len()
                }
                (Layer::MaxPool(a), Layer::MaxPool(b)) => a == b,
                (Layer::Dense(a), Layer::Dense(b)) => {
                    a.inputs == b.inputs && a.weight.len() == b.weight.len() && a.bias.len() == b.bias.len()
                }
                _ => false,
            };
            if !consistent {
                return Err(Error::invalid("layer shapes do not compose"));
            }
        }
        let network = Network { input_shape, layers };
        if !network.params().iter().all(|p| p.iter().all(|v| v.is_finite())) {
            return Err(Error::numeric("network parameters contain non-finite values"));
        }
        Ok(network)
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn input_len(&self) -> usize {
        self.input_shape.iter().product()
    }

    pub fn num_outputs(&self) -> usize {
        self.layers.last().map(Layer::output_len).unwrap_or(0)
    }

    pub fn layers(&self) -> &[Layer<S>] {
        &self.layers
    }

    pub fn layer_specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(layer_spec).collect()
    }

    /// Parameter tensors in canonical order (per layer: weight, then bias).
    pub fn params(&self) -> Vec<&[S]> {
        let mut out = Vec::new();
        for layer in &self.layers {
            if let Some((w, b)) = layer.params() {
                out.push(w);
                out.push(b);
            }
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut [S]> {
        let mut out = Vec::new();
        for layer in &mut self.layers {
            if let Some((w, b)) = layer.params_mut() {
                out.push(w);
                out.push(b);
            }
        }
        out
    }

    pub fn num_params(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    pub fn cast<T: Scalar>(&self) -> Network<T> {
        let conv = |v: &[S]| v.iter().map(|x| T::from_f64_lossy(x.to_f64_lossy())).collect::<Vec<T>>();
        let layers = self
            .layers
            .iter()
            .map(|layer| match layer {
                Layer::Conv(c) => Layer::Conv(Conv {
                    in_channels: c.in_channels,
                    out_channels: c.out_channels,
                    height: c.height,
                    width: c.width,
                    weight: conv(&c.weight),
                    bias: conv(&c.bias),
                    activation: c.activation,
                }),
                Layer::MaxPool(p) => Layer::MaxPool(p.clone()),
                Layer::Dense(d) => Layer::Dense(Dense {
                    inputs: d.inputs,
                    outputs: d.outputs,
                    weight: conv(&d.weight),
                    bias: conv(&d.bias),
                    activation: d.activation,
                }),
            })
            .collect();
        Network {
            input_shape: self.input_shape.clone(),
            layers,
        }
    }

    /// Single-sample forward pass returning the final layer's output.
    pub fn forward(&self, input: &Tensor<S>) -> Result<Tensor<S>> {
        if input.shape() != self.input_shape.as_slice() {
            return Err(Error::invalid(format!(
                "input shape {:?} does not match network input {:?}",
                input.shape(),
                self.input_shape
            )));
        }
        let (out, _) = self.forward_batch(input.data(), 1)?;
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::numeric("forward pass produced non-finite output"));
        }
        Tensor::vector(out)
    }

    /// Single-sample backward pass: gradients of `upstream . output` with
    /// respect to every parameter and to the input.
    pub fn backward(&self, input: &Tensor<S>, upstream: &Tensor<S>) -> Result<(Gradients<S>, Tensor<S>)> {
        if input.shape() != self.input_shape.as_slice() {
            return Err(Error::invalid(format!(
                "input shape {:?} does not match network input {:?}",
                input.shape(),
                self.input_shape
            )));
        }
        if upstream.len() != self.num_outputs() {
            return Err(Error::invalid(format!(
                "upstream gradient has {} entries, network has {} outputs",
                upstream.len(),
                self.num_outputs()
            )));
        }
        let (_, trace) = self.forward_batch(input.data(), 1)?;
        let (grads, input_grad) = self.backward_batch(&trace, upstream.data(), BackwardOptions::default())?;
        let input_grad = Tensor::new(self.input_shape.clone(), input_grad.expect("requested"))?;
        Ok((grads.expect("requested"), input_grad))
    }

    /// Forward pass over `batch` samples laid out contiguously.
    pub fn forward_batch(&self, inputs: &[S], batch: usize) -> Result<(Vec<S>, Trace<S>)> {
        if inputs.len() != batch * self.input_len() {
            return Err(Error::invalid(format!(
                "batch of {batch} needs {} input values, got {}",
                batch * self.input_len(),
                inputs.len()
            )));
        }
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        let mut pool_argmax = Vec::with_capacity(self.layers.len());
        acts.push(inputs.to_vec());
        for layer in &self.layers {
            let input = acts.last().expect("nonempty");
            let mut out = vec![S::zero(); batch * layer.output_len()];
            let mut argmax = Vec::new();
            match layer {
                Layer::Conv(c) => conv_forward(c, input, &mut out, batch),
                Layer::MaxPool(p) => {
                    argmax = vec![0u32; out.len()];
                    pool_forward(p, input, &mut out, &mut argmax, batch)
                }
                Layer::Dense(d) => dense_forward(d, input, &mut out, batch),
            }
            let act = layer.activation();
            if act != Activation::None {
                for v in out.iter_mut() {
                    *v = act.apply(*v);
                }
            }
            acts.push(out);
            pool_argmax.push(argmax);
        }
        let output = acts.last().expect("nonempty").clone();
        Ok((output, Trace { batch, acts, pool_argmax }))
    }

    /// Reverse pass over a recorded batch. Parameter gradients are summed over
    /// the batch; input gradients are per sample.
    pub fn backward_batch(
        &self,
        trace: &Trace<S>,
        upstream: &[S],
        opts: BackwardOptions,
    ) -> Result<(Option<Gradients<S>>, Option<Vec<S>>)> {
        let batch = trace.batch;
        if trace.acts.len() != self.layers.len() + 1 {
            return Err(Error::invalid("trace was recorded by a different network"));
        }
        if upstream.len() != batch * self.num_outputs() {
            return Err(Error::invalid(format!(
                "upstream gradient has {} entries, expected {}",
                upstream.len(),
                batch * self.num_outputs()
            )));
        }
        let mut grads = opts.param_grads.then(|| Gradients::zeros_like(self));
        let mut param_slot = self.params().len();
        let mut grad = upstream.to_vec();
        let last = self.layers.len() - 1;

        for (i, layer) in self.layers.iter().enumerate().rev() {
            let input = &trace.acts[i];
            let output = &trace.acts[i + 1];
            let act = layer.activation();
            let skip_act = i == last && opts.upstream_is_preactivation;
            if act != Activation::None && !skip_act {
                for (g, &y) in grad.iter_mut().zip(output) {
                    *g *= act.derivative_from_output(y);
                }
            }
            let need_input = i > 0 || opts.input_grad;
            let mut input_grad = if need_input {
                vec![S::zero(); batch * layer.input_len()]
            } else {
                Vec::new()
            };
            match layer {
                Layer::Conv(c) => {
                    param_slot -= 2;
                    let pg = grads.as_mut().map(|g| {
                        let (w, b) = g.tensors.split_at_mut(param_slot + 1);
                        (&mut w[param_slot][..], &mut b[0][..])
                    });
                    conv_backward(c, input, &grad, pg, need_input.then_some(&mut input_grad[..]), batch);
                }
                Layer::Dense(d) => {
                    param_slot -= 2;
                    let pg = grads.as_mut().map(|g| {
                        let (w, b) = g.tensors.split_at_mut(param_slot + 1);
                        (&mut w[param_slot][..], &mut b[0][..])
                    });
                    dense_backward(d, input, &grad, pg, need_input.then_some(&mut input_grad[..]), batch);
                }
                Layer::MaxPool(_) => {
                    if need_input {
                        let in_len = layer.input_len();
                        let out_len = layer.output_len();
                        for n in 0..batch {
                            let idx = &trace.pool_argmax[i][n * out_len..(n + 1) * out_len];
                            let g = &grad[n * out_len..(n + 1) * out_len];
                            let dst = &mut input_grad[n * in_len..(n + 1) * in_len];
                            for (&j, &gv) in idx.iter().zip(g) {
                                dst[j as usize] += gv;
                            }
                        }
                    }
                }
            }
            grad = input_grad;
        }
        Ok((grads, opts.input_grad.then_some(grad)))
    }

    /// Pattern of every non-differentiable switch (relu on/off, pool winner)
    /// seen in a trace. Two points with equal patterns lie in the same
    /// smooth region of the network.
    pub fn switch_pattern(&self, trace: &Trace<S>) -> Vec<u32> {
        let mut pattern = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            if layer.activation() == Activation::Relu {
                pattern.extend(trace.acts[i + 1].iter().map(|&v| u32::from(v > S::zero())));
            }
            pattern.extend_from_slice(&trace.pool_argmax[i]);
        }
        pattern
    }
}

fn layer_spec<S: Scalar>(layer: &Layer<S>) -> LayerSpec {
    match layer {
        Layer::Conv(c) => LayerSpec::Conv {
            out_channels: c.out_channels,
            activation: c.activation,
        },
        Layer::MaxPool(_) => LayerSpec::MaxPool,
        Layer::Dense(d) => LayerSpec::Dense {
            outputs: d.outputs,
            activation: d.activation,
        },
    }
}

/// Unfolds one `c x h x w` sample into `(c * 9) x (h * w)` patch columns.
fn im2col<S: Scalar>(input: &[S], c: usize, h: usize, w: usize, cols: &mut [S]) {
    let hw = h * w;
    for ci in 0..c {
        let plane = &input[ci * hw..(ci + 1) * hw];
        for ky in 0..KERNEL {
            for kx in 0..KERNEL {
                let row = &mut cols[((ci * KERNEL + ky) * KERNEL + kx) * hw..][..hw];
                for y in 0..h {
                    let sy = y as isize + ky as isize - 1;
                    let dst = &mut row[y * w..(y + 1) * w];
                    if sy < 0 || sy >= h as isize {
                        dst.fill(S::zero());
                        continue;
                    }
                    let src = &plane[sy as usize * w..(sy as usize + 1) * w];
                    for (x, d) in dst.iter_mut().enumerate() {
                        let sx = x as isize + kx as isize - 1;
                        *d = if sx < 0 || sx >= w as isize { S::zero() } else { src[sx as usize] };
                    }
                }
            }
        }
    }
}

fn col2im<S: Scalar>(cols: &[S], c: usize, h: usize, w: usize, out: &mut [S]) {
    let hw = h * w;
    for ci in 0..c {
        let plane = &mut out[ci * hw..(ci + 1) * hw];
        for ky in 0..KERNEL {
            for kx in 0..KERNEL {
                let row = &cols[((ci * KERNEL + ky) * KERNEL + kx) * hw..][..hw];
                for y in 0..h {
                    let sy = y as isize + ky as isize - 1;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let dst = &mut plane[sy as usize * w..(sy as usize + 1) * w];
                    for x in 0..w {
                        let sx = x as isize + kx as isize - 1;
                        if sx >= 0 && sx < w as isize {
                            dst[sx as usize] += row[y * w + x];
                        }
                    }
                }
            }
        }
    }
}

fn conv_forward<S: Scalar>(c: &Conv<S>, input: &[S], out: &mut [S], batch: usize) {
    let hw = c.height * c.width;
    let k = c.in_channels * KERNEL_AREA;
    let in_len = c.in_channels * hw;
    let out_len = c.out_channels * hw;
    let mut cols = vec![S::zero(); k * hw];
    for n in 0..batch {
        im2col(&input[n * in_len..(n + 1) * in_len], c.in_channels, c.height, c.width, &mut cols);
        let dst = &mut out[n * out_len..(n + 1) * out_len];
        for (o, row) in dst.chunks_exact_mut(hw).enumerate() {
            row.fill(c.bias[o]);
        }
        S::gemm(
            c.out_channels,
            k,
            hw,
            S::one(),
            (&c.weight, k as isize, 1),
            (&cols, hw as isize, 1),
            S::one(),
            (dst, hw as isize, 1),
        );
    }
}

fn conv_backward<S: Scalar>(
    c: &Conv<S>,
    input: &[S],
    dpre: &[S],
    params: Option<(&mut [S], &mut [S])>,
    mut input_grad: Option<&mut [S]>,
    batch: usize,
) {
    let hw = c.height * c.width;
    let k = c.in_channels * KERNEL_AREA;
    let in_len = c.in_channels * hw;
    let out_len = c.out_channels * hw;
    let mut cols = vec![S::zero(); k * hw];
    let mut dcols = vec![S::zero(); k * hw];
    let (mut dw, mut db) = match params {
        Some((w, b)) => (Some(w), Some(b)),
        None => (None, None),
    };
    for n in 0..batch {
        let g = &dpre[n * out_len..(n + 1) * out_len];
        if let (Some(dw), Some(db)) = (dw.as_deref_mut(), db.as_deref_mut()) {
            im2col(&input[n * in_len..(n + 1) * in_len], c.in_channels, c.height, c.width, &mut cols);
            S::gemm(
                c.out_channels,
                hw,
                k,
                S::one(),
                (g, hw as isize, 1),
                (&cols, 1, hw as isize),
                S::one(),
                (dw, k as isize, 1),
            );
            for (o, row) in g.chunks_exact(hw).enumerate() {
                db[o] += row.iter().copied().sum::<S>();
            }
        }
        if let Some(ig) = input_grad.as_deref_mut() {
            S::gemm(
                k,
                c.out_channels,
                hw,
                S::one(),
                (&c.weight, 1, k as isize),
                (g, hw as isize, 1),
                S::zero(),
                (&mut dcols, hw as isize, 1),
            );
            col2im(&dcols, c.in_channels, c.height, c.width, &mut ig[n * in_len..(n + 1) * in_len]);
        }
    }
}

fn pool_forward<S: Scalar>(p: &MaxPool, input: &[S], out: &mut [S], argmax: &mut [u32], batch: usize) {
    let (oh, ow) = (p.height / 2, p.width / 2);
    let in_len = p.channels * p.height * p.width;
    let out_len = p.channels * oh * ow;
    for n in 0..batch {
        let src = &input[n * in_len..(n + 1) * in_len];
        for ch in 0..p.channels {
            for y in 0..oh {
                for x in 0..ow {
                    let mut best = ch * p.height * p.width + 2 * y * p.width + 2 * x;
                    for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                        let j = ch * p.height * p.width + (2 * y + dy) * p.width + 2 * x + dx;
                        if src[j] > src[best] {
                            best = j;
                        }
                    }
                    let o = n * out_len + (ch * oh + y) * ow + x;
                    out[o] = src[best];
                    argmax[o] = best as u32;
                }
            }
        }
    }
}

fn dense_forward<S: Scalar>(d: &Dense<S>, input: &[S], out: &mut [S], batch: usize) {
    for row in out.chunks_exact_mut(d.outputs) {
        row.copy_from_slice(&d.bias);
    }
    S::gemm(
        batch,
        d.inputs,
        d.outputs,
        S::one(),
        (input, d.inputs as isize, 1),
        (&d.weight, 1, d.inputs as isize),
        S::one(),
        (out, d.outputs as isize, 1),
    );
}

fn dense_backward<S: Scalar>(
    d: &Dense<S>,
    input: &[S],
    dpre: &[S],
    params: Option<(&mut [S], &mut [S])>,
    input_grad: Option<&mut [S]>,
    batch: usize,
) {
    if let Some((dw, db)) = params {
        S::gemm(
            d.outputs,
            batch,
            d.inputs,
            S::one(),
            (dpre, 1, d.outputs as isize),
            (input, d.inputs as isize, 1),
            S::one(),
            (dw, d.inputs as isize, 1),
        );
        for row in dpre.chunks_exact(d.outputs) {
            for (b, &g) in db.iter_mut().zip(row) {
                *b += g;
            }
        }
    }
    if let Some(ig) = input_grad {
        S::gemm(
            batch,
            d.outputs,
            d.inputs,
            S::one(),
            (dpre, d.outputs as isize, 1),
            (&d.weight, d.inputs as isize, 1),
            S::zero(),
            (ig, d.inputs as isize, 1),
        );
    }
}
