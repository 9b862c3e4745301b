use serde::{Deserialize, Serialize};

use super::{fastmath, NeuralError, Rng};

/// Hidden-layer nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Relu,
}

impl Activation {
    fn apply_slice(self, zs: &mut [f64]) {
        match self {
            Activation::Tanh => fastmath::tanh_scaled_slice(zs, 1.0),
            Activation::Relu => zs.iter_mut().for_each(|z| *z = z.max(0.0)),
        }
    }

    /// Derivative expressed through the activation's own output.
    #[inline]
    fn derivative_from_output(self, h: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - h * h,
            Activation::Relu => {
                if h > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Transform applied to the last layer's affine output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OutputTransform {
    Identity,
    /// `scale * tanh(z)`, so every component lies in `[-scale, scale]`.
    Bounded { scale: f64 },
}

/// Flat parameter carrier in canonical layer-major order: for each layer the
/// `out x in` row-major weight matrix followed by the `out` biases.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    values: Vec<f64>,
    layout: Vec<usize>,
}

impl ParamVector {
    pub fn from_parts(values: Vec<f64>, layout: Vec<usize>) -> Result<Self, NeuralError> {
        validate_sizes(&layout)?;
        let expected = param_count_for(&layout);
        if values.len() != expected {
            return Err(NeuralError::Shape {
                what: "parameter vector",
                expected,
                actual: values.len(),
            });
        }
        Ok(Self { values, layout })
    }

    pub fn zeros_like(layout: &[usize]) -> Self {
        Self {
            values: vec![0.0; param_count_for(layout)],
            layout: layout.to_vec(),
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Layer sizes this vector is laid out for.
    pub fn layout(&self) -> &[usize] {
        &self.layout
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `(weights, biases)` of layer `l`.
    pub fn layer(&self, l: usize) -> (&[f64], &[f64]) {
        let (w, b) = layer_ranges(&self.layout, l);
        (&self.values[w], &self.values[b])
    }

    /// Bitwise equality, so `-0.0 != 0.0` and identical NaN payloads compare equal.
    pub fn bits_equal(&self, other: &ParamVector) -> bool {
        self.layout == other.layout
            && self
                .values
                .iter()
                .zip(&other.values)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

/// Serialized form of a network's parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotDocument {
    pub format_version: u32,
    pub layer_sizes: Vec<usize>,
    pub activation: Activation,
    pub output_transform: OutputTransform,
    pub params: Vec<f64>,
}

pub const SNAPSHOT_FORMAT_VERSION: u32 = 1;

/// Dense feed-forward network stored as one flat parameter array.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layer_sizes: Vec<usize>,
    activation: Activation,
    output: OutputTransform,
    params: Vec<f64>,
}

/// Per-layer activations recorded by [`Mlp::forward_batch`] for backprop.
#[derive(Debug, Clone)]
pub struct Trace {
    batch: usize,
    // acts[0] is the input, acts[l] the post-activation output of layer l.
    acts: Vec<Vec<f64>>,
}

impl Trace {
    pub fn batch(&self) -> usize {
        self.batch
    }

    /// Network output, `batch x output_dim` row-major.
    pub fn output(&self) -> &[f64] {
        self.acts.last().map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn input(&self) -> &[f64] {
        &self.acts[0]
    }
}

fn validate_sizes(sizes: &[usize]) -> Result<(), NeuralError> {
    if sizes.len() < 2 {
        return Err(NeuralError::InvalidLayerSizes(format!(
            "need at least 2 layer sizes, got {}",
            sizes.len()
        )));
    }
    if let Some(pos) = sizes.iter().position(|&s| s == 0) {
        return Err(NeuralError::InvalidLayerSizes(format!(
            "layer {pos} has size 0"
        )));
    }
    Ok(())
}

fn param_count_for(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| (w[0] + 1) * w[1]).sum()
}

fn layer_ranges(
    sizes: &[usize],
    l: usize,
) -> (std::ops::Range<usize>, std::ops::Range<usize>) {
    let offset: usize = sizes[..l + 1].windows(2).map(|w| (w[0] + 1) * w[1]).sum();
    let (fan_in, fan_out) = (sizes[l], sizes[l + 1]);
    let w = offset..offset + fan_in * fan_out;
    let b = w.end..w.end + fan_out;
    (w, b)
}

/// `C = A * B + beta * C` for strided row/column layouts.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    rsa: usize,
    csa: usize,
    b: &[f64],
    rsb: usize,
    csb: usize,
    beta: f64,
    c: &mut [f64],
    rsc: usize,
    csc: usize,
) {
    if m == 0 || n == 0 {
        return;
    }
    let last = |r: usize, c: usize, rs: usize, cs: usize| (r - 1) * rs + (c - 1) * cs;
    if k > 0 {
        assert!(last(m, k, rsa, csa) < a.len());
        assert!(last(k, n, rsb, csb) < b.len());
    }
    assert!(last(m, n, rsc, csc) < c.len());
    // SAFETY: every index touched by dgemm is bounded by the asserts above and
    // `c` is borrowed mutably, so it cannot alias `a` or `b`.
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
            beta,
            c.as_mut_ptr(),
            rsc as isize,
            csc as isize,
        );
    }
}

impl Mlp {
    /// Network with every parameter set to zero.
    pub fn zeros(
        layer_sizes: &[usize],
        activation: Activation,
        output: OutputTransform,
    ) -> Result<Self, NeuralError> {
        validate_sizes(layer_sizes)?;
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            activation,
            output,
            params: vec![0.0; param_count_for(layer_sizes)],
        })
    }

    /// Weights uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`, biases zero.
    pub fn init(
        layer_sizes: &[usize],
        activation: Activation,
        output: OutputTransform,
        rng: &mut Rng,
    ) -> Result<Self, NeuralError> {
        let mut net = Self::zeros(layer_sizes, activation, output)?;
        for l in 0..net.num_layers() {
            let bound = 1.0 / (net.layer_sizes[l] as f64).sqrt();
            let (w, _) = layer_ranges(&net.layer_sizes, l);
            for p in &mut net.params[w] {
                *p = rng.uniform(-bound, bound);
            }
        }
        Ok(net)
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn output_transform(&self) -> OutputTransform {
        self.output
    }

    pub fn num_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().expect("validated non-empty")
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn layer_weights_mut(&mut self, l: usize) -> &mut [f64] {
        let (w, _) = layer_ranges(&self.layer_sizes, l);
        &mut self.params[w]
    }

    pub fn layer_bias_mut(&mut self, l: usize) -> &mut [f64] {
        let (_, b) = layer_ranges(&self.layer_sizes, l);
        &mut self.params[b]
    }

    pub fn same_architecture(&self, other: &Mlp) -> bool {
        self.layer_sizes == other.layer_sizes
            && self.activation == other.activation
            && self.output == other.output
    }

    pub fn snapshot(&self) -> ParamVector {
        ParamVector {
            values: self.params.clone(),
            layout: self.layer_sizes.clone(),
        }
    }

    pub fn restore(&mut self, snapshot: &ParamVector) -> Result<(), NeuralError> {
        if snapshot.layout != self.layer_sizes {
            return Err(NeuralError::Architecture(format!(
                "snapshot layout {:?} does not match network {:?}",
                snapshot.layout, self.layer_sizes
            )));
        }
        self.params.copy_from_slice(&snapshot.values);
        Ok(())
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>, NeuralError> {
        let trace = self.forward_batch(input, 1)?;
        Ok(trace.acts.into_iter().last().expect("at least one layer"))
    }

    /// Forward pass over `batch` row-major inputs.
    pub fn forward_batch(&self, inputs: &[f64], batch: usize) -> Result<Trace, NeuralError> {
        let expected = batch * self.input_dim();
        if inputs.len() != expected {
            return Err(NeuralError::Shape {
                what: "input",
                expected,
                actual: inputs.len(),
            });
        }
        let layers = self.num_layers();
        let mut acts = Vec::with_capacity(layers + 1);
        acts.push(inputs.to_vec());
        for l in 0..layers {
            let (fan_in, fan_out) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
            let (wr, br) = layer_ranges(&self.layer_sizes, l);
            let (w, b) = (&self.params[wr], &self.params[br]);
            let mut z = Vec::with_capacity(batch * fan_out);
            for _ in 0..batch {
                z.extend_from_slice(b);
            }
            // z (batch x out) += x (batch x in) * w^T
            gemm(
                batch, fan_in, fan_out, &acts[l], fan_in, 1, w, 1, fan_in, 1.0, &mut z, fan_out, 1,
            );
            if l + 1 < layers {
                self.activation.apply_slice(&mut z);
            } else if let OutputTransform::Bounded { scale } = self.output {
                fastmath::tanh_scaled_slice(&mut z, scale);
            }
            acts.push(z);
        }
        Ok(Trace { batch, acts })
    }

    /// Reverse-mode pass for `sum(output . output_grad)`.
    ///
    /// Writes the parameter gradient into `param_grad` (overwriting) and the
    /// input gradient into `input_grad` when requested.
    pub fn backward_batch(
        &self,
        trace: &Trace,
        output_grad: &[f64],
        mut param_grad: Option<&mut [f64]>,
        mut input_grad: Option<&mut [f64]>,
    ) -> Result<(), NeuralError> {
        let batch = trace.batch;
        if trace.acts.len() != self.layer_sizes.len()
            || trace.acts[0].len() != batch * self.input_dim()
        {
            return Err(NeuralError::Architecture(
                "trace was not produced by this network".into(),
            ));
        }
        let out_len = batch * self.output_dim();
        if output_grad.len() != out_len {
            return Err(NeuralError::Shape {
                what: "output gradient",
                expected: out_len,
                actual: output_grad.len(),
            });
        }
        if let Some(g) = param_grad.as_deref() {
            if g.len() != self.param_count() {
                return Err(NeuralError::Shape {
                    what: "parameter gradient buffer",
                    expected: self.param_count(),
                    actual: g.len(),
                });
            }
        }
        if let Some(g) = input_grad.as_deref() {
            if g.len() != batch * self.input_dim() {
                return Err(NeuralError::Shape {
                    what: "input gradient buffer",
                    expected: batch * self.input_dim(),
                    actual: g.len(),
                });
            }
        }

        let layers = self.num_layers();
        let mut delta = output_grad.to_vec();
        if let OutputTransform::Bounded { scale } = self.output {
            for (d, &y) in delta.iter_mut().zip(trace.output()) {
                // d/dz [s tanh z] = s (1 - tanh^2 z) = (s^2 - y^2) / s
                *d *= (scale * scale - y * y) / scale;
            }
        }

        for l in (0..layers).rev() {
            let (fan_in, fan_out) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
            let (wr, br) = layer_ranges(&self.layer_sizes, l);
            let x = &trace.acts[l];
            if let Some(g) = param_grad.as_deref_mut() {
                // dW (out x in) = delta^T * x
                gemm(
                    fan_out, batch, fan_in, &delta, 1, fan_out, x, fan_in, 1, 0.0,
                    &mut g[wr.clone()], fan_in, 1,
                );
                let gb = &mut g[br];
                gb.iter_mut().for_each(|v| *v = 0.0);
                for row in delta.chunks_exact(fan_out) {
                    for (acc, &d) in gb.iter_mut().zip(row) {
                        *acc += d;
                    }
                }
            }
            let need_dx = l > 0 || input_grad.is_some();
            if !need_dx {
                break;
            }
            let w = &self.params[wr];
            let mut dx = vec![0.0; batch * fan_in];
            // dx (batch x in) = delta (batch x out) * w (out x in)
            gemm(
                batch, fan_out, fan_in, &delta, fan_out, 1, w, fan_in, 1, 0.0, &mut dx, fan_in, 1,
            );
            if l > 0 {
                for (d, &h) in dx.iter_mut().zip(x) {
                    *d *= self.activation.derivative_from_output(h);
                }
                delta = dx;
            } else if let Some(g) = input_grad.as_deref_mut() {
                g.copy_from_slice(&dx);
            }
        }
        Ok(())
    }

    /// Gradient of `output . output_grad` with respect to all parameters.
    pub fn backward(&self, input: &[f64], output_grad: &[f64]) -> Result<ParamVector, NeuralError> {
        let trace = self.forward_batch(input, 1)?;
        let mut grad = ParamVector::zeros_like(&self.layer_sizes);
        self.backward_batch(&trace, output_grad, Some(&mut grad.values), None)?;
        Ok(grad)
    }

    pub fn to_document(&self) -> SnapshotDocument {
        SnapshotDocument {
            format_version: SNAPSHOT_FORMAT_VERSION,
            layer_sizes: self.layer_sizes.clone(),
            activation: self.activation,
            output_transform: self.output,
            params: self.params.clone(),
        }
    }

    pub fn from_document(doc: &SnapshotDocument) -> Result<Self, NeuralError> {
        if doc.format_version != SNAPSHOT_FORMAT_VERSION {
            return Err(NeuralError::Format(format!(
                "unsupported snapshot format_version {} (expected {})",
                doc.format_version, SNAPSHOT_FORMAT_VERSION
            )));
        }
        let mut net = Self::zeros(&doc.layer_sizes, doc.activation, doc.output_transform)?;
        let pv = ParamVector::from_parts(doc.params.clone(), doc.layer_sizes.clone())?;
        net.restore(&pv)?;
        Ok(net)
    }

    pub fn to_json(&self) -> Result<String, NeuralError> {
        if let Some(i) = self.params.iter().position(|p| !p.is_finite()) {
            return Err(NeuralError::Format(format!(
                "parameter {i} is not finite and cannot be serialized"
            )));
        }
        serde_json::to_string(&self.to_document()).map_err(|e| NeuralError::Format(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self, NeuralError> {
        let doc: SnapshotDocument =
            serde_json::from_str(text).map_err(|e| NeuralError::Format(e.to_string()))?;
        Self::from_document(&doc)
    }
}

/// `target <- tau * online + (1 - tau) * target`, elementwise.
pub fn polyak_update(target: &mut Mlp, online: &Mlp, tau: f64) -> Result<(), NeuralError> {
    if !target.same_architecture(online) {
        return Err(NeuralError::Architecture(format!(
            "polyak update between {:?} and {:?}",
            target.layer_sizes, online.layer_sizes
        )));
    }
    if !(0.0..=1.0).contains(&tau) {
        return Err(NeuralError::InvalidArgument(format!(
            "tau must lie in [0, 1], got {tau}"
        )));
    }
    let keep = 1.0 - tau;
    for (t, &o) in target.params.iter_mut().zip(&online.params) {
        *t = tau * o + keep * *t;
    }
    Ok(())
}

/// Copies parameters only; any optimizer state attached to `dst` is left alone.
pub fn hard_copy(dst: &mut Mlp, src: &Mlp) -> Result<(), NeuralError> {
    if !dst.same_architecture(src) {
        return Err(NeuralError::Architecture(format!(
            "hard copy from {:?} into {:?}",
            src.layer_sizes, dst.layer_sizes
        )));
    }
    dst.params.copy_from_slice(&src.params);
    Ok(())
}
