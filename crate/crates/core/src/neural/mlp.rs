use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    pub(crate) fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the activation output.
    fn slope(self, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
            Activation::Identity => 1.0,
        }
    }
}

/// Layer widths (input first) and one activation per layer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub layer_sizes: Vec<usize>,
    pub activations: Vec<Activation>,
}

impl MlpSpec {
    pub fn new(layer_sizes: Vec<usize>, activations: Vec<Activation>) -> Result<Self> {
        let spec = Self {
            layer_sizes,
            activations,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_sizes.len() < 2 {
            return Err(Error::contract("mlp: need at least input and output sizes"));
        }
        if self.activations.len() != self.layer_sizes.len() - 1 {
            return Err(Error::contract(format!(
                "mlp: {} activations for {} layers",
                self.activations.len(),
                self.layer_sizes.len() - 1
            )));
        }
        if self.layer_sizes.contains(&0) {
            return Err(Error::contract("mlp: zero-width layer"));
        }
        Ok(())
    }

    /// Feature extractor (ReLU) followed by ReLU hidden layers and `head`.
    fn stacked(input: usize, extractor: usize, hidden: &[usize], output: usize, head: Activation) -> Self {
        let mut layer_sizes = vec![input, extractor];
        layer_sizes.extend_from_slice(hidden);
        layer_sizes.push(output);
        let mut activations = vec![Activation::Relu; layer_sizes.len() - 2];
        activations.push(head);
        Self {
            layer_sizes,
            activations,
        }
    }

    /// Actor: observation in, tanh-bounded action out.
    pub fn actor(obs_dim: usize, act_dim: usize, extractor: usize, hidden: &[usize]) -> Self {
        Self::stacked(obs_dim, extractor, hidden, act_dim, Activation::Tanh)
    }

    /// Critic: observation and action concatenated in, scalar value out.
    pub fn critic(obs_dim: usize, act_dim: usize, extractor: usize, hidden: &[usize]) -> Self {
        Self::stacked(obs_dim + act_dim, extractor, hidden, 1, Activation::Identity)
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().expect("validated spec")
    }

    pub fn layers(&self) -> usize {
        self.activations.len()
    }

    pub fn param_count(&self) -> usize {
        self.layer_sizes
            .windows(2)
            .map(|w| w[0] * w[1] + w[1])
            .sum()
    }
}

/// Parameters of a dense network, stored flat: per layer the `out x in`
/// row-major weights followed by the bias.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    spec: MlpSpec,
    params: Vec<f64>,
    offsets: Vec<usize>,
    generation: u64,
}

/// Activations saved by [`Mlp::forward`] for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    batch: usize,
    generation: u64,
    /// Layer inputs then the final output, each `batch x width`.
    outputs: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn batch(&self) -> usize {
        self.batch
    }

    /// Post-activation values of layer `i` (0 is the first hidden layer).
    pub fn layer_output(&self, i: usize) -> &[f64] {
        &self.outputs[i + 1]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    /// Same layout as [`Mlp::params`].
    pub params: Vec<f64>,
    /// `batch x input_dim`.
    pub input: Vec<f64>,
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (x, y) in ra.iter().zip(rb) {
        s += x * y;
    }
    s
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

impl Mlp {
    /// He-uniform weights for ReLU layers, Xavier-uniform otherwise, zero biases.
    pub fn init<R: Rng + ?Sized>(spec: &MlpSpec, rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(spec)?;
        for l in 0..spec.layers() {
            let (fan_in, fan_out) = (spec.layer_sizes[l], spec.layer_sizes[l + 1]);
            let limit = match spec.activations[l] {
                Activation::Relu => (6.0 / fan_in as f64).sqrt(),
                _ => (6.0 / (fan_in + fan_out) as f64).sqrt(),
            };
            let (w, _) = net.layer_mut(l);
            for x in w {
                *x = rng.random_range(-limit..limit);
            }
        }
        Ok(net)
    }

    pub fn zeros(spec: &MlpSpec) -> Result<Self> {
        spec.validate()?;
        let mut offsets = Vec::with_capacity(spec.layers() + 1);
        let mut at = 0;
        for w in spec.layer_sizes.windows(2) {
            offsets.push(at);
            at += w[0] * w[1] + w[1];
        }
        offsets.push(at);
        Ok(Self {
            spec: spec.clone(),
            params: vec![0.0; at],
            offsets,
            generation: 0,
        })
    }

    pub fn from_params(spec: &MlpSpec, params: Vec<f64>) -> Result<Self> {
        let mut net = Self::zeros(spec)?;
        if params.len() != net.params.len() {
            return Err(Error::contract(format!(
                "mlp: {} parameters for a spec needing {}",
                params.len(),
                net.params.len()
            )));
        }
        net.params = params;
        Ok(net)
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    /// Mutable access; invalidates outstanding forward caches.
    pub fn params_mut(&mut self) -> &mut [f64] {
        self.generation += 1;
        &mut self.params
    }

    /// Weights (`out x in`) and bias of layer `l`.
    pub fn layer(&self, l: usize) -> (&[f64], &[f64]) {
        let (start, end) = (self.offsets[l], self.offsets[l + 1]);
        let n_out = self.spec.layer_sizes[l + 1];
        self.params[start..end].split_at(end - start - n_out)
    }

    pub fn layer_mut(&mut self, l: usize) -> (&mut [f64], &mut [f64]) {
        self.generation += 1;
        let (start, end) = (self.offsets[l], self.offsets[l + 1]);
        let n_out = self.spec.layer_sizes[l + 1];
        self.params[start..end].split_at_mut(end - start - n_out)
    }

    /// Offset of layer `l` inside the flat parameter vector.
    pub fn layer_offset(&self, l: usize) -> usize {
        self.offsets[l]
    }

    fn check_input(&self, input: &[f64], batch: usize) -> Result<()> {
        if batch == 0 || input.len() != batch * self.spec.input_dim() {
            return Err(Error::contract(format!(
                "mlp forward: input of length {} for batch {} x {}",
                input.len(),
                batch,
                self.spec.input_dim()
            )));
        }
        Ok(())
    }

    fn layer_forward(&self, l: usize, x: &[f64], batch: usize) -> Vec<f64> {
        let (n_in, n_out) = (self.spec.layer_sizes[l], self.spec.layer_sizes[l + 1]);
        let act = self.spec.activations[l];
        let (w, b) = self.layer(l);
        let mut y = vec![0.0; batch * n_out];
        for (xr, yr) in x.chunks_exact(n_in).zip(y.chunks_exact_mut(n_out)) {
            for ((yo, wo), bo) in yr.iter_mut().zip(w.chunks_exact(n_in)).zip(b) {
                *yo = act.apply(bo + dot(wo, xr));
            }
        }
        y
    }

    /// Batched forward pass keeping every layer output for [`Mlp::backward`].
    pub fn forward(&self, input: &[f64], batch: usize) -> Result<(Vec<f64>, ForwardCache)> {
        self.check_input(input, batch)?;
        let mut outputs = Vec::with_capacity(self.spec.layers() + 1);
        outputs.push(input.to_vec());
        for l in 0..self.spec.layers() {
            let y = self.layer_forward(l, outputs.last().expect("input pushed"), batch);
            outputs.push(y);
        }
        let out = outputs.last().expect("at least one layer").clone();
        Ok((
            out,
            ForwardCache {
                batch,
                generation: self.generation,
                outputs,
            },
        ))
    }

    /// Forward pass without a cache.
    pub fn predict(&self, input: &[f64], batch: usize) -> Result<Vec<f64>> {
        self.check_input(input, batch)?;
        let mut x = input.to_vec();
        for l in 0..self.spec.layers() {
            x = self.layer_forward(l, &x, batch);
        }
        Ok(x)
    }

    /// Gradients of `sum(output * grad_output)` with respect to the parameters
    /// and the input. ReLU has slope 0 at 0.
    pub fn backward(&self, cache: &ForwardCache, grad_output: &[f64]) -> Result<Gradients> {
        self.backward_inner(cache, grad_output, true)
    }

    /// Input gradient only; parameter gradients are skipped.
    pub fn input_gradient(&self, cache: &ForwardCache, grad_output: &[f64]) -> Result<Vec<f64>> {
        self.backward_inner(cache, grad_output, false).map(|g| g.input)
    }

    fn backward_inner(
        &self,
        cache: &ForwardCache,
        grad_output: &[f64],
        want_params: bool,
    ) -> Result<Gradients> {
        if cache.generation != self.generation || cache.outputs.len() != self.spec.layers() + 1 {
            return Err(Error::contract("mlp backward: stale forward cache"));
        }
        let batch = cache.batch;
        if grad_output.len() != batch * self.spec.output_dim() {
            return Err(Error::contract(format!(
                "mlp backward: grad of length {} for batch {} x {}",
                grad_output.len(),
                batch,
                self.spec.output_dim()
            )));
        }
        let mut grads = if want_params {
            vec![0.0; self.params.len()]
        } else {
            Vec::new()
        };
        let mut delta = grad_output.to_vec();
        for l in (0..self.spec.layers()).rev() {
            let (n_in, n_out) = (self.spec.layer_sizes[l], self.spec.layer_sizes[l + 1]);
            let act = self.spec.activations[l];
            let y = &cache.outputs[l + 1];
            let x = &cache.outputs[l];
            for (d, &yv) in delta.iter_mut().zip(y) {
                *d *= act.slope(yv);
            }
            let (w, _) = self.layer(l);
            if want_params {
                let start = self.offsets[l];
                let (gw, gb) = grads[start..self.offsets[l + 1]].split_at_mut(n_in * n_out);
                for (dr, xr) in delta.chunks_exact(n_out).zip(x.chunks_exact(n_in)) {
                    for ((&d, gwo), gbo) in dr.iter().zip(gw.chunks_exact_mut(n_in)).zip(gb.iter_mut()) {
                        if d != 0.0 {
                            axpy(d, xr, gwo);
                            *gbo += d;
                        }
                    }
                }
            }
            let mut prev = vec![0.0; batch * n_in];
            for (dr, pr) in delta.chunks_exact(n_out).zip(prev.chunks_exact_mut(n_in)) {
                for (&d, wo) in dr.iter().zip(w.chunks_exact(n_in)) {
                    if d != 0.0 {
                        axpy(d, wo, pr);
                    }
                }
            }
            delta = prev;
        }
        Ok(Gradients {
            params: grads,
            input: delta,
        })
    }

    /// `self <- rho * self + (1 - rho) * other`.
    pub fn blend_from(&mut self, other: &Mlp, rho: f64) -> Result<()> {
        if other.spec != self.spec {
            return Err(Error::contract("polyak: network shapes differ"));
        }
        for (t, &s) in self.params_mut().iter_mut().zip(&other.params) {
            *t = rho * *t + (1.0 - rho) * s;
        }
        Ok(())
    }
}
