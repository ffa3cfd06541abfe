//! Multilayer-perceptron generators and discriminators.
//!
//! A network is described by an immutable [`NetSpec`] and owns its weights as
//! a single flat vector in [`NetParams`], laid out by a shape registry. To run
//! a network, bind its parameters onto a tape (as trainable leaves or as
//! constants) and call [`forward`]. Because the forward pass only sees tape
//! variables, the same code evaluates a discriminator whose weights are
//! themselves functions of the generator, which is what unrolled training
//! needs.

mod checkpoint;
pub mod norm;

pub use norm::{minibatch_features, virtual_batch_norm, NORM_EPS};

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::distributions::Rng;
use crate::error::{Error, Result};
use crate::ndcore::{Gradients, Matrix, Tape, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Relu,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormMode {
    None,
    Batch,
    Reference,
    Virtual,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Generator,
    Discriminator,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MinibatchFeatureSpec {
    pub channels: usize,
    pub dim: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetSpec {
    pub role: Role,
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub output_dim: usize,
    pub activation: Activation,
    pub norm: NormMode,
    /// Discriminator only.
    #[serde(default)]
    pub minibatch_features: Option<MinibatchFeatureSpec>,
    /// When nonzero, a one-hot label of this many classes is appended to the input.
    #[serde(default)]
    pub condition_classes: usize,
}

impl NetSpec {
    /// `z ∈ ℝ^z_dim → 2 × (64, tanh) → ℝ^x_dim`.
    pub fn default_generator(z_dim: usize, x_dim: usize) -> Self {
        NetSpec {
            role: Role::Generator,
            input_dim: z_dim,
            hidden: vec![64, 64],
            output_dim: x_dim,
            activation: Activation::Tanh,
            norm: NormMode::None,
            minibatch_features: None,
            condition_classes: 0,
        }
    }

    /// `x ∈ ℝ^x_dim → 2 × (64, relu) → 1 logit`.
    pub fn default_discriminator(x_dim: usize) -> Self {
        NetSpec {
            role: Role::Discriminator,
            input_dim: x_dim,
            hidden: vec![64, 64],
            output_dim: 1,
            activation: Activation::Relu,
            norm: NormMode::None,
            minibatch_features: None,
            condition_classes: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |detail: &str| Err(Error::contract("NetSpec", detail.to_string()));
        if self.hidden.is_empty() {
            return fail("at least one hidden layer is required");
        }
        if self.input_dim == 0 || self.output_dim == 0 || self.hidden.contains(&0) {
            return fail("layer widths must be positive");
        }
        if self.minibatch_features.is_some() && self.role == Role::Generator {
            return fail("minibatch features are a discriminator feature");
        }
        if let Some(mb) = self.minibatch_features {
            if mb.channels == 0 || mb.dim == 0 {
                return fail("minibatch feature channels and dim must be positive");
            }
        }
        Ok(())
    }

    /// Which hidden layers are normalised. The first discriminator layer is
    /// never normalised; the generator's output layer is linear and never
    /// normalised either.
    pub fn normalized_layers(&self) -> Vec<bool> {
        (0..self.hidden.len())
            .map(|l| {
                self.norm != NormMode::None && !(self.role == Role::Discriminator && l == 0)
            })
            .collect()
    }

    pub fn uses_reference(&self) -> bool {
        matches!(self.norm, NormMode::Reference | NormMode::Virtual)
            && self.normalized_layers().iter().any(|&n| n)
    }

    pub fn uses_batch_statistics(&self) -> bool {
        (self.norm == NormMode::Batch && self.normalized_layers().iter().any(|&n| n))
            || self.minibatch_features.is_some()
    }

    /// Width of the input the forward pass expects, label one-hot included.
    pub fn full_input_dim(&self) -> usize {
        self.input_dim + self.condition_classes
    }

    pub fn registry(&self) -> Vec<ParamShape> {
        let mut reg = Vec::new();
        let normed = self.normalized_layers();
        let mut fan_in = self.full_input_dim();
        for (l, &width) in self.hidden.iter().enumerate() {
            reg.push(ParamShape::new(format!("w{l}"), fan_in, width, Init::Glorot));
            reg.push(ParamShape::new(format!("b{l}"), 1, width, Init::Zero));
            if normed[l] {
                reg.push(ParamShape::new(format!("gamma{l}"), 1, width, Init::One));
                reg.push(ParamShape::new(format!("beta{l}"), 1, width, Init::Zero));
            }
            fan_in = width;
        }
        if let Some(mb) = self.minibatch_features {
            reg.push(ParamShape::new("mb_t", fan_in, mb.channels * mb.dim, Init::Glorot));
            fan_in += mb.channels;
        }
        reg.push(ParamShape::new("w_out", fan_in, self.output_dim, Init::Glorot));
        reg.push(ParamShape::new("b_out", 1, self.output_dim, Init::Zero));
        reg
    }

    pub fn init(&self, rng: &mut Rng) -> Result<NetParams> {
        self.validate()?;
        NetParams::init(self.registry(), rng)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Init {
    /// Uniform in `±√(6 / (fan_in + fan_out))`.
    Glorot,
    Zero,
    One,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamShape {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub init: Init,
}

impl ParamShape {
    pub fn new(name: impl Into<String>, rows: usize, cols: usize, init: Init) -> Self {
        ParamShape {
            name: name.into(),
            rows,
            cols,
            init,
        }
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Flat parameter vector plus the registry that gives it shape.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetParams {
    pub theta: Vec<f64>,
    registry: Vec<ParamShape>,
    /// Fixed reference batch for reference or virtual normalisation.
    pub reference: Option<Matrix>,
}

impl NetParams {
    pub fn new(theta: Vec<f64>, registry: Vec<ParamShape>) -> Result<Self> {
        let total: usize = registry.iter().map(ParamShape::len).sum();
        if total != theta.len() {
            return Err(Error::contract(
                "NetParams::new",
                format!("registry needs {total} values, got {}", theta.len()),
            ));
        }
        Ok(NetParams {
            theta,
            registry,
            reference: None,
        })
    }

    pub fn init(registry: Vec<ParamShape>, rng: &mut Rng) -> Result<Self> {
        let mut theta = Vec::new();
        for shape in &registry {
            match shape.init {
                Init::Zero => theta.extend(std::iter::repeat(0.0).take(shape.len())),
                Init::One => theta.extend(std::iter::repeat(1.0).take(shape.len())),
                Init::Glorot => {
                    let limit = (6.0 / (shape.rows + shape.cols) as f64).sqrt();
                    theta.extend((0..shape.len()).map(|_| rng.gen_range(-limit..limit)));
                }
            }
        }
        Self::new(theta, registry)
    }

    pub fn registry(&self) -> &[ParamShape] {
        &self.registry
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    /// Copies each registry slot onto the tape as a trainable leaf.
    pub fn bind(&self, tape: &mut Tape) -> Vec<Var> {
        self.slots().map(|m| tape.param(m)).collect()
    }

    /// Copies each registry slot onto the tape as a constant.
    pub fn bind_constant(&self, tape: &mut Tape) -> Vec<Var> {
        self.slots().map(|m| tape.constant(m)).collect()
    }

    fn slots(&self) -> impl Iterator<Item = Matrix> + '_ {
        let mut offset = 0;
        self.registry.iter().map(move |s| {
            let data = self.theta[offset..offset + s.len()].to_vec();
            offset += s.len();
            Matrix::from_vec(s.rows, s.cols, data).expect("registry shapes are consistent")
        })
    }

    /// Concatenates the gradients of bound leaves back into registry order.
    pub fn flat_grad(&self, grads: &Gradients, vars: &[Var]) -> Result<Vec<f64>> {
        if vars.len() != self.registry.len() {
            return Err(Error::contract("flat_grad", "variable count does not match registry"));
        }
        let mut out = Vec::with_capacity(self.theta.len());
        for (v, s) in vars.iter().zip(&self.registry) {
            let g = grads
                .wrt(*v)
                .ok_or_else(|| Error::contract("flat_grad", format!("{} is not a tape parameter", s.name)))?;
            out.extend_from_slice(g.as_slice());
        }
        Ok(out)
    }

    /// Values of the slot called `name`, if any.
    pub fn slot(&self, name: &str) -> Option<&[f64]> {
        let mut offset = 0;
        for s in &self.registry {
            if s.name == name {
                return Some(&self.theta[offset..offset + s.len()]);
            }
            offset += s.len();
        }
        None
    }
}

/// How normalised layers obtain their statistics on this call.
#[derive(Clone, Copy, Debug, Default)]
pub enum NormContext<'a> {
    #[default]
    Absent,
    /// Statistics of the batch being evaluated. Real and generated batches are
    /// passed in separate calls, so each is normalised by its own statistics.
    Batch,
    /// Fixed reference batch in input space (label one-hot included when the
    /// network is class-conditioned).
    Reference(&'a Matrix),
}

#[derive(Clone, Copy, Debug, Default)]
pub struct BatchContext<'a> {
    pub norm: NormContext<'a>,
    pub labels: Option<&'a [usize]>,
}

impl<'a> BatchContext<'a> {
    pub fn plain() -> Self {
        Self::default()
    }

    pub fn batch() -> Self {
        BatchContext {
            norm: NormContext::Batch,
            labels: None,
        }
    }

    pub fn reference(batch: &'a Matrix) -> Self {
        BatchContext {
            norm: NormContext::Reference(batch),
            labels: None,
        }
    }

    /// The context a network needs given its own parameters.
    pub fn for_params(spec: &NetSpec, params: &'a NetParams) -> Result<Self> {
        if spec.uses_reference() {
            let r = params.reference.as_ref().ok_or_else(|| {
                Error::contract("BatchContext", "reference normalisation without a reference batch")
            })?;
            Ok(Self::reference(r))
        } else if spec.norm == NormMode::Batch {
            Ok(Self::batch())
        } else {
            Ok(Self::plain())
        }
    }

    pub fn with_labels(mut self, labels: &'a [usize]) -> Self {
        self.labels = Some(labels);
        self
    }
}

/// Output of a forward pass.
#[derive(Clone, Copy, Debug)]
pub struct Forward {
    /// Logits for a discriminator, samples for a generator.
    pub output: Var,
    /// Activations of the last hidden layer, before minibatch features.
    pub features: Var,
}

/// Appends a one-hot encoding of `labels` to the rows of `x`.
pub fn append_one_hot(x: &Matrix, labels: &[usize], classes: usize) -> Result<Matrix> {
    if labels.len() != x.rows() {
        return Err(Error::contract("append_one_hot", "one label per row is required"));
    }
    let cols = x.cols() + classes;
    let mut data = Vec::with_capacity(x.rows() * cols);
    for (r, &label) in labels.iter().enumerate() {
        if label >= classes {
            return Err(Error::contract(
                "append_one_hot",
                format!("label {label} not below {classes}"),
            ));
        }
        data.extend_from_slice(x.row_slice(r));
        data.extend((0..classes).map(|c| if c == label { 1.0 } else { 0.0 }));
    }
    Matrix::from_vec(x.rows(), cols, data)
}

fn one_hot_var(tape: &mut Tape, rows: usize, labels: &[usize], classes: usize) -> Result<Var> {
    let m = append_one_hot(&Matrix::zeros(rows, 0), labels, classes)?;
    Ok(tape.constant(m))
}

/// Runs the network described by `spec` on the rows of `x`.
pub fn forward(
    tape: &mut Tape,
    spec: &NetSpec,
    params: &[Var],
    x: Var,
    ctx: &BatchContext<'_>,
) -> Result<Forward> {
    let registry = spec.registry();
    if params.len() != registry.len() {
        return Err(Error::contract(
            "forward",
            format!("{} parameter slots for a registry of {}", params.len(), registry.len()),
        ));
    }
    let rows = tape.value(x).rows();
    let mut h = x;
    if spec.condition_classes > 0 {
        let labels = ctx.labels.ok_or_else(|| {
            Error::contract("forward", "class-conditioned network called without labels")
        })?;
        if tape.value(x).cols() != spec.input_dim {
            return Err(Error::contract(
                "forward",
                format!("input has {} columns, expected {}", tape.value(x).cols(), spec.input_dim),
            ));
        }
        let oh = one_hot_var(tape, rows, labels, spec.condition_classes)?;
        h = tape.concat_cols(x, oh)?;
    } else if tape.value(x).cols() != spec.input_dim {
        return Err(Error::contract(
            "forward",
            format!("input has {} columns, expected {}", tape.value(x).cols(), spec.input_dim),
        ));
    }

    let normed = spec.normalized_layers();
    let needs_reference = spec.uses_reference();
    let mut reference = if needs_reference {
        match ctx.norm {
            NormContext::Reference(r) => {
                if r.rows() == 0 {
                    return Err(Error::contract("forward", "empty reference batch"));
                }
                if r.cols() != spec.full_input_dim() {
                    return Err(Error::contract("forward", "reference batch width mismatch"));
                }
                Some(tape.constant(r.clone()))
            }
            _ => {
                return Err(Error::contract(
                    "forward",
                    "reference/virtual normalisation needs a reference batch context",
                ))
            }
        }
    } else {
        None
    };
    if spec.norm == NormMode::Batch
        && normed.iter().any(|&n| n)
        && !matches!(ctx.norm, NormContext::Batch)
    {
        return Err(Error::contract("forward", "batch normalisation needs a batch context"));
    }

    let mut slot = 0;
    let mut next = || {
        let v = params[slot];
        slot += 1;
        v
    };
    for &is_normed in &normed {
        let (w, b) = (next(), next());
        let xw = tape.matmul(h, w)?;
        let mut pre = tape.add(xw, b)?;
        let mut ref_pre = match reference {
            Some(r) => {
                let rw = tape.matmul(r, w)?;
                Some(tape.add(rw, b)?)
            }
            None => None,
        };
        if is_normed {
            let (gamma, beta) = (next(), next());
            let normalized = match (spec.norm, ref_pre) {
                (NormMode::Batch, _) => norm::batch_norm(tape, pre, NORM_EPS)?,
                (NormMode::Reference, Some(rp)) => norm::reference_norm(tape, pre, rp, NORM_EPS)?,
                (NormMode::Virtual, Some(rp)) => norm::virtual_norm(tape, pre, rp, NORM_EPS)?,
                _ => unreachable!("reference presence checked above"),
            };
            let scaled = tape.mul(normalized, gamma)?;
            pre = tape.add(scaled, beta)?;
            if let Some(rp) = ref_pre {
                // The reference stream is normalised by its own statistics.
                let rn = norm::batch_norm(tape, rp, NORM_EPS)?;
                let rs = tape.mul(rn, gamma)?;
                ref_pre = Some(tape.add(rs, beta)?);
            }
        }
        h = activate(tape, spec.activation, pre);
        reference = ref_pre.map(|rp| activate(tape, spec.activation, rp));
    }
    let features = h;
    if let Some(mb) = spec.minibatch_features {
        let t = next();
        let o = minibatch_features(tape, h, t, mb.channels, mb.dim)?;
        h = tape.concat_cols(h, o)?;
    }
    let (w, b) = (next(), next());
    let out = tape.matmul(h, w)?;
    let output = tape.add(out, b)?;
    Ok(Forward { output, features })
}

fn activate(tape: &mut Tape, act: Activation, x: Var) -> Var {
    match act {
        Activation::Tanh => tape.tanh(x),
        Activation::Relu => tape.relu(x),
    }
}

/// Generator forward pass: maps latent rows `z` to samples.
pub fn generator_forward(
    tape: &mut Tape,
    spec: &NetSpec,
    params: &[Var],
    z: Var,
    ctx: &BatchContext<'_>,
) -> Result<Var> {
    if spec.role != Role::Generator {
        return Err(Error::contract("generator_forward", "spec is not a generator"));
    }
    Ok(forward(tape, spec, params, z, ctx)?.output)
}

/// Discriminator forward pass: one row of logits per input row.
pub fn discriminator_forward(
    tape: &mut Tape,
    spec: &NetSpec,
    params: &[Var],
    x: Var,
    ctx: &BatchContext<'_>,
) -> Result<Forward> {
    if spec.role != Role::Discriminator {
        return Err(Error::contract("discriminator_forward", "spec is not a discriminator"));
    }
    forward(tape, spec, params, x, ctx)
}

/// Generator families the trainer understands.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeneratorSpec {
    Mlp(NetSpec),
    /// `g(z) = z + shift`.
    Location { dim: usize },
    /// `g(z) = scale ⊙ z + shift`.
    Affine { dim: usize },
}

impl GeneratorSpec {
    pub fn z_dim(&self) -> usize {
        match self {
            GeneratorSpec::Mlp(s) => s.input_dim,
            GeneratorSpec::Location { dim } | GeneratorSpec::Affine { dim } => *dim,
        }
    }

    pub fn x_dim(&self) -> usize {
        match self {
            GeneratorSpec::Mlp(s) => s.output_dim,
            GeneratorSpec::Location { dim } | GeneratorSpec::Affine { dim } => *dim,
        }
    }

    pub fn registry(&self) -> Vec<ParamShape> {
        match self {
            GeneratorSpec::Mlp(s) => s.registry(),
            GeneratorSpec::Location { dim } => vec![ParamShape::new("shift", 1, *dim, Init::Zero)],
            GeneratorSpec::Affine { dim } => vec![
                ParamShape::new("scale", 1, *dim, Init::One),
                ParamShape::new("shift", 1, *dim, Init::Zero),
            ],
        }
    }

    pub fn uses_reference(&self) -> bool {
        matches!(self, GeneratorSpec::Mlp(s) if s.uses_reference())
    }

    pub fn uses_batch_statistics(&self) -> bool {
        matches!(self, GeneratorSpec::Mlp(s) if s.uses_batch_statistics())
    }

    pub fn init(&self, rng: &mut Rng) -> Result<NetParams> {
        match self {
            GeneratorSpec::Mlp(s) => {
                if s.role != Role::Generator {
                    return Err(Error::contract("GeneratorSpec", "MLP spec is not a generator"));
                }
                s.init(rng)
            }
            _ => NetParams::init(self.registry(), rng),
        }
    }

    pub fn forward(
        &self,
        tape: &mut Tape,
        params: &[Var],
        z: Var,
        ctx: &BatchContext<'_>,
    ) -> Result<Var> {
        match self {
            GeneratorSpec::Mlp(s) => generator_forward(tape, s, params, z, ctx),
            GeneratorSpec::Location { dim } => {
                check_latent(tape, z, *dim)?;
                tape.add(z, params[0])
            }
            GeneratorSpec::Affine { dim } => {
                check_latent(tape, z, *dim)?;
                let scaled = tape.mul(z, params[0])?;
                tape.add(scaled, params[1])
            }
        }
    }
}

fn check_latent(tape: &Tape, z: Var, dim: usize) -> Result<()> {
    if tape.value(z).cols() != dim {
        return Err(Error::contract(
            "generator_forward",
            format!("latent has {} columns, expected {dim}", tape.value(z).cols()),
        ));
    }
    Ok(())
}
