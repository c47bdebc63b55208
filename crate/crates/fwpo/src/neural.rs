//! Minimal dense-network substrate: hand-written forward/backward passes with
//! input gradients, Adam, plain gradient steps, and Polyak target blending.
//!
//! Hidden layers use the rectifier; the output layer is identity, rectifier,
//! or hyperbolic tangent. `backward` differentiates the scalar
//! `⟨upstream, forward(x)⟩` with respect to every parameter and to the input,
//! which is all the agents need: the critic's action gradient is an input
//! gradient, and actor losses enter through the upstream vector.

use crate::linalg::Matrix;
use crate::scalar::Scalar;
use rand::Rng;
use std::io::{BufRead, BufReader, Read, Write};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputActivation {
    Identity,
    Relu,
    Tanh,
}

impl OutputActivation {
    fn name(self) -> &'static str {
        match self {
            Self::Identity => "identity",
            Self::Relu => "relu",
            Self::Tanh => "tanh",
        }
    }

    fn from_name(name: &str) -> Option<Self> {
        match name {
            "identity" => Some(Self::Identity),
            "relu" => Some(Self::Relu),
            "tanh" => Some(Self::Tanh),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Layer<R> {
    /// out × in weight matrix.
    w: Matrix<R>,
    b: Vec<R>,
}

/// Fully connected network with rectifier hidden activations.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseNet<R> {
    sizes: Vec<usize>,
    layers: Vec<Layer<R>>,
    output_activation: OutputActivation,
}

/// Per-parameter gradients mirroring a [`DenseNet`], plus the input gradient.
#[derive(Debug, Clone)]
pub struct Gradients<R> {
    pub w: Vec<Matrix<R>>,
    pub b: Vec<Vec<R>>,
    /// Gradient of `⟨upstream, forward(x)⟩` with respect to `x`.
    pub input: Vec<R>,
}

impl<R: Scalar> Gradients<R> {
    pub fn zeros_like(net: &DenseNet<R>) -> Self {
        Self {
            w: net
                .layers
                .iter()
                .map(|l| Matrix::zeros(l.w.rows(), l.w.cols()))
                .collect(),
            b: net
                .layers
                .iter()
                .map(|l| vec![R::zero(); l.b.len()])
                .collect(),
            input: vec![R::zero(); net.sizes[0]],
        }
    }

    /// self += scale · other
    pub fn accumulate(&mut self, other: &Gradients<R>, scale: R) {
        for (sw, ow) in self.w.iter_mut().zip(&other.w) {
            for i in 0..sw.rows() {
                for (s, o) in sw.row_mut(i).iter_mut().zip(ow.row(i)) {
                    *s = *s + scale * *o;
                }
            }
        }
        for (sb, ob) in self.b.iter_mut().zip(&other.b) {
            for (s, o) in sb.iter_mut().zip(ob) {
                *s = *s + scale * *o;
            }
        }
        for (s, o) in self.input.iter_mut().zip(&other.input) {
            *s = *s + scale * *o;
        }
    }
}

impl<R: Scalar> DenseNet<R> {
    /// Standard initialization: uniform `±1/√fan_in` per layer with the final
    /// layer in `±3e-3`.
    pub fn init(sizes: &[usize], output_activation: OutputActivation, rng: &mut impl Rng) -> Self {
        assert!(sizes.len() >= 2, "need at least input and output sizes");
        let last = sizes.len() - 2;
        let layers = (0..sizes.len() - 1)
            .map(|l| {
                let fan_in = sizes[l];
                let bound = if l == last {
                    3e-3
                } else {
                    1.0 / (fan_in as f64).sqrt()
                };
                let mut w = Matrix::zeros(sizes[l + 1], sizes[l]);
                for i in 0..sizes[l + 1] {
                    for v in w.row_mut(i).iter_mut() {
                        *v = R::of(rng.random_range(-bound..bound));
                    }
                }
                let b = (0..sizes[l + 1])
                    .map(|_| R::of(rng.random_range(-bound..bound)))
                    .collect();
                Layer { w, b }
            })
            .collect();
        Self {
            sizes: sizes.to_vec(),
            layers,
            output_activation,
        }
    }

    pub fn zeroed(sizes: &[usize], output_activation: OutputActivation) -> Self {
        let layers = (0..sizes.len() - 1)
            .map(|l| Layer {
                w: Matrix::zeros(sizes[l + 1], sizes[l]),
                b: vec![R::zero(); sizes[l + 1]],
            })
            .collect();
        Self {
            sizes: sizes.to_vec(),
            layers,
            output_activation,
        }
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn output_activation(&self) -> OutputActivation {
        self.output_activation
    }

    /// Direct access to layer parameters, for tests and hand-built nets.
    pub fn layer_mut(&mut self, l: usize) -> (&mut Matrix<R>, &mut Vec<R>) {
        let layer = &mut self.layers[l];
        (&mut layer.w, &mut layer.b)
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.w.rows() * l.w.cols() + l.b.len())
            .sum()
    }

    /// All parameters in documented order: layers in order, row-major weights
    /// then biases.
    pub fn flat_params(&self) -> Vec<R> {
        let mut out = Vec::with_capacity(self.param_count());
        for layer in &self.layers {
            for i in 0..layer.w.rows() {
                out.extend_from_slice(layer.w.row(i));
            }
            out.extend_from_slice(&layer.b);
        }
        out
    }

    /// Per-layer pre-activation vectors for an input; diagnostics use these
    /// to detect rectifier-kink proximity.
    pub fn preactivations(&self, x: &[R]) -> Vec<Vec<R>> {
        let mut h = x.to_vec();
        let last = self.layers.len() - 1;
        let mut out = Vec::with_capacity(self.layers.len());
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = layer.w.matvec(&h);
            for (zi, bi) in z.iter_mut().zip(&layer.b) {
                *zi = *zi + *bi;
            }
            h = if l < last {
                z.iter().map(|v| v.max(R::zero())).collect()
            } else {
                z.iter().map(|v| self.apply_output(*v)).collect()
            };
            out.push(z);
        }
        out
    }

    /// Copy of the network with all parameters replaced from flat order.
    pub fn with_flat_params(&self, params: &[R]) -> Self {
        assert_eq!(
            params.len(),
            self.param_count(),
            "flat parameter count mismatch"
        );
        let mut net = self.clone();
        let mut it = params.iter();
        for layer in net.layers.iter_mut() {
            for i in 0..layer.w.rows() {
                for p in layer.w.row_mut(i).iter_mut() {
                    *p = *it.next().unwrap();
                }
            }
            for p in layer.b.iter_mut() {
                *p = *it.next().unwrap();
            }
        }
        net
    }

    fn apply_output(&self, z: R) -> R {
        match self.output_activation {
            OutputActivation::Identity => z,
            OutputActivation::Relu => z.max(R::zero()),
            OutputActivation::Tanh => z.tanh(),
        }
    }

    pub fn forward(&self, x: &[R]) -> Vec<R> {
        assert_eq!(x.len(), self.sizes[0], "input dimension mismatch");
        let mut h = x.to_vec();
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = layer.w.matvec(&h);
            for (zi, bi) in z.iter_mut().zip(&layer.b) {
                *zi = *zi + *bi;
            }
            h = if l < last {
                z.into_iter().map(|v| v.max(R::zero())).collect()
            } else {
                z.into_iter().map(|v| self.apply_output(v)).collect()
            };
        }
        h
    }

    /// Gradients of `⟨upstream, forward(x)⟩` with respect to parameters and
    /// input.
    pub fn backward(&self, x: &[R], upstream: &[R]) -> Gradients<R> {
        assert_eq!(x.len(), self.sizes[0], "input dimension mismatch");
        assert_eq!(
            upstream.len(),
            self.output_dim(),
            "upstream dimension mismatch"
        );
        let last = self.layers.len() - 1;

        // Forward pass, caching layer inputs and pre-activations.
        let mut inputs: Vec<Vec<R>> = Vec::with_capacity(self.layers.len());
        let mut pre: Vec<Vec<R>> = Vec::with_capacity(self.layers.len());
        let mut h = x.to_vec();
        for (l, layer) in self.layers.iter().enumerate() {
            inputs.push(h.clone());
            let mut z = layer.w.matvec(&h);
            for (zi, bi) in z.iter_mut().zip(&layer.b) {
                *zi = *zi + *bi;
            }
            h = if l < last {
                z.iter().map(|v| v.max(R::zero())).collect()
            } else {
                z.iter().map(|v| self.apply_output(*v)).collect()
            };
            pre.push(z);
        }

        let mut grads = Gradients::zeros_like(self);
        let mut delta: Vec<R> = upstream
            .iter()
            .zip(&pre[last])
            .map(|(u, z)| match self.output_activation {
                OutputActivation::Identity => *u,
                OutputActivation::Relu => {
                    if *z > R::zero() {
                        *u
                    } else {
                        R::zero()
                    }
                }
                OutputActivation::Tanh => {
                    let t = z.tanh();
                    *u * (R::one() - t * t)
                }
            })
            .collect();

        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            for (i, di) in delta.iter().enumerate() {
                let grow = grads.w[l].row_mut(i);
                for (g, hj) in grow.iter_mut().zip(&inputs[l]) {
                    *g = *g + *di * *hj;
                }
            }
            grads.b[l].copy_from_slice(&delta);
            let back = layer.w.matvec_t(&delta);
            if l > 0 {
                delta = back
                    .into_iter()
                    .zip(&pre[l - 1])
                    .map(|(d, z)| if *z > R::zero() { d } else { R::zero() })
                    .collect();
            } else {
                grads.input = back;
            }
        }
        grads
    }

    /// Plain gradient-descent step: `p ← p − lr·g`.
    pub fn sgd_step(&mut self, grads: &Gradients<R>, lr: R) {
        for (layer, (gw, gb)) in self.layers.iter_mut().zip(grads.w.iter().zip(&grads.b)) {
            for i in 0..layer.w.rows() {
                for (p, g) in layer.w.row_mut(i).iter_mut().zip(gw.row(i)) {
                    *p = *p - lr * *g;
                }
            }
            for (p, g) in layer.b.iter_mut().zip(gb) {
                *p = *p - lr * *g;
            }
        }
    }

    /// Polyak blend toward `online`: `p ← τ·online + (1−τ)·p`.
    pub fn soft_update_from(&mut self, online: &DenseNet<R>, tau: R) {
        assert_eq!(self.sizes, online.sizes, "shape mismatch in soft update");
        let keep = R::one() - tau;
        for (layer, src) in self.layers.iter_mut().zip(&online.layers) {
            for i in 0..layer.w.rows() {
                for (p, o) in layer.w.row_mut(i).iter_mut().zip(src.w.row(i)) {
                    *p = tau * *o + keep * *p;
                }
            }
            for (p, o) in layer.b.iter_mut().zip(&src.b) {
                *p = tau * *o + keep * *p;
            }
        }
    }

    /// Writes the checkpoint: a header followed by one parameter per line in
    /// flat order (layers in order, row-major weights then biases).
    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "densenet v1")?;
        let sizes: Vec<String> = self.sizes.iter().map(|s| s.to_string()).collect();
        writeln!(w, "sizes {}", sizes.join(" "))?;
        writeln!(w, "output {}", self.output_activation.name())?;
        for p in self.flat_params() {
            writeln!(w, "{}", p.as_f64())?;
        }
        Ok(())
    }

    pub fn read_from<Rd: Read>(r: Rd) -> std::io::Result<Self> {
        let bad = |msg: &str| std::io::Error::new(std::io::ErrorKind::InvalidData, msg.to_string());
        let mut lines = BufReader::new(r).lines();
        let magic = lines.next().ok_or_else(|| bad("empty checkpoint"))??;
        if magic.trim() != "densenet v1" {
            return Err(bad("not a densenet checkpoint"));
        }
        let sizes_line = lines.next().ok_or_else(|| bad("missing sizes"))??;
        let sizes: Vec<usize> = sizes_line
            .strip_prefix("sizes ")
            .ok_or_else(|| bad("missing sizes header"))?
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| bad("bad size")))
            .collect::<Result<_, _>>()?;
        if sizes.len() < 2 {
            return Err(bad("need at least two layer sizes"));
        }
        let act_line = lines
            .next()
            .ok_or_else(|| bad("missing output activation"))??;
        let act = act_line
            .strip_prefix("output ")
            .and_then(OutputActivation::from_name)
            .ok_or_else(|| bad("unknown output activation"))?;
        let mut net = Self::zeroed(&sizes, act);
        let expected = net.param_count();
        let mut values = Vec::with_capacity(expected);
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let v: f64 = line
                .trim()
                .parse()
                .map_err(|_| bad("bad parameter value"))?;
            values.push(R::of(v));
        }
        if values.len() != expected {
            return Err(bad(&format!(
                "expected {expected} parameters, found {}",
                values.len()
            )));
        }
        let mut it = values.into_iter();
        for layer in net.layers.iter_mut() {
            for i in 0..layer.w.rows() {
                for p in layer.w.row_mut(i).iter_mut() {
                    *p = it.next().unwrap();
                }
            }
            for p in layer.b.iter_mut() {
                *p = it.next().unwrap();
            }
        }
        Ok(net)
    }

    pub fn save_file(&self, path: &std::path::Path) -> std::io::Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_to(std::io::BufWriter::new(file))
    }

    pub fn load_file(path: &std::path::Path) -> std::io::Result<Self> {
        Self::read_from(std::fs::File::open(path)?)
    }
}

/// Adam optimizer state (first/second moments, step counter).
#[derive(Debug, Clone)]
pub struct AdamState<R> {
    m_w: Vec<Matrix<R>>,
    m_b: Vec<Vec<R>>,
    v_w: Vec<Matrix<R>>,
    v_b: Vec<Vec<R>>,
    pub step: u64,
    pub beta1: R,
    pub beta2: R,
    pub epsilon: R,
}

impl<R: Scalar> AdamState<R> {
    pub fn new(net: &DenseNet<R>) -> Self {
        let zw = || {
            net.layers
                .iter()
                .map(|l| Matrix::zeros(l.w.rows(), l.w.cols()))
                .collect::<Vec<_>>()
        };
        let zb = || {
            net.layers
                .iter()
                .map(|l| vec![R::zero(); l.b.len()])
                .collect::<Vec<_>>()
        };
        Self {
            m_w: zw(),
            m_b: zb(),
            v_w: zw(),
            v_b: zb(),
            step: 0,
            beta1: R::of(0.9),
            beta2: R::of(0.999),
            epsilon: R::of(1e-8),
        }
    }
}

/// One Adam update with bias correction.
pub fn adam_step<R: Scalar>(
    net: &mut DenseNet<R>,
    grads: &Gradients<R>,
    state: &mut AdamState<R>,
    lr: R,
) {
    state.step += 1;
    let t = state.step as i32;
    let b1 = state.beta1;
    let b2 = state.beta2;
    let corr1 = R::one() - b1.powi(t);
    let corr2 = R::one() - b2.powi(t);
    let eps = state.epsilon;

    for (l, layer) in net.layers.iter_mut().enumerate() {
        for i in 0..layer.w.rows() {
            for j in 0..layer.w.cols() {
                let g = grads.w[l][(i, j)];
                let m = b1 * state.m_w[l][(i, j)] + (R::one() - b1) * g;
                let v = b2 * state.v_w[l][(i, j)] + (R::one() - b2) * g * g;
                state.m_w[l][(i, j)] = m;
                state.v_w[l][(i, j)] = v;
                layer.w[(i, j)] = layer.w[(i, j)] - lr * (m / corr1) / ((v / corr2).sqrt() + eps);
            }
        }
        for j in 0..layer.b.len() {
            let g = grads.b[l][j];
            let m = b1 * state.m_b[l][j] + (R::one() - b1) * g;
            let v = b2 * state.v_b[l][j] + (R::one() - b2) * g * g;
            state.m_b[l][j] = m;
            state.v_b[l][j] = v;
            layer.b[j] = layer.b[j] - lr * (m / corr1) / ((v / corr2).sqrt() + eps);
        }
    }
}
