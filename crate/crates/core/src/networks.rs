//! The generator, discriminator and crop-mapper architectures.
//!
//! All three take a `[N, 9, 6, 1]` batch (9 composite windows × 6 bands).
//! Layers are grouped into named stages whose output shapes are the rows of
//! the published architecture tables; [`Network::shape_trace`] reports them.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::autodiff::{Activation, ChannelStats, Graph, Var};
use crate::conv::ConvGeometry;
use crate::dataset::{BANDS, TIMESTEPS};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const LEAKY_SLOPE: f64 = 0.2;
pub const NORM_EPS: f64 = 1e-5;
pub const INIT_STD: f64 = 0.02;
pub const BN_MOMENTUM: f64 = 0.1;

const ENCODER: ConvGeometry = ConvGeometry::new((3, 2), (1, 1), (0, 0));
const SAME_3X3: ConvGeometry = ConvGeometry::new((3, 3), (1, 1), (1, 1));
const HALVE_2X2: ConvGeometry = ConvGeometry::new((2, 2), (2, 2), (0, 0));
const COLLAPSE_2X1: ConvGeometry = ConvGeometry::new((2, 1), (1, 1), (0, 0));

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Role {
    /// Target → source generator.
    GeneratorG,
    /// Source → target generator.
    GeneratorF,
    /// Discriminator on the target domain.
    DiscriminatorX,
    /// Discriminator on the source domain.
    DiscriminatorY,
    CropMapper,
}

impl Role {
    pub const ALL: [Role; 5] = [
        Role::GeneratorG,
        Role::GeneratorF,
        Role::DiscriminatorX,
        Role::DiscriminatorY,
        Role::CropMapper,
    ];

    pub fn code(self) -> u8 {
        match self {
            Role::GeneratorG => 0,
            Role::GeneratorF => 1,
            Role::DiscriminatorX => 2,
            Role::DiscriminatorY => 3,
            Role::CropMapper => 4,
        }
    }

    pub fn from_code(code: u8) -> Option<Role> {
        Role::ALL.into_iter().find(|r| r.code() == code)
    }

    pub fn tag(self) -> &'static str {
        match self {
            Role::GeneratorG => "generator-G",
            Role::GeneratorF => "generator-F",
            Role::DiscriminatorX => "discriminator-X",
            Role::DiscriminatorY => "discriminator-Y",
            Role::CropMapper => "crop-mapper",
        }
    }

    pub fn architecture(self) -> Architecture {
        match self {
            Role::GeneratorG | Role::GeneratorF => Architecture::Generator,
            Role::DiscriminatorX | Role::DiscriminatorY => Architecture::Discriminator,
            Role::CropMapper => Architecture::CropMapper,
        }
    }
}

impl std::fmt::Display for Role {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Architecture {
    Generator,
    Discriminator,
    CropMapper,
}

#[derive(Clone, Debug, PartialEq)]
enum Layer {
    Conv { geom: ConvGeometry, kernel: usize, bias: usize },
    ConvTranspose { geom: ConvGeometry, kernel: usize, bias: usize },
    InstanceNorm { gain: usize, shift: usize },
    BatchNorm { gain: usize, shift: usize, stats: usize },
    Act(Activation),
    Flatten,
    Dense { weights: usize, bias: usize },
}

#[derive(Clone, Debug, PartialEq)]
struct Stage {
    name: &'static str,
    layers: Vec<Layer>,
}

/// Exponential moving averages kept by a batch-norm layer.
#[derive(Clone, Debug, PartialEq)]
pub struct RunningStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

impl RunningStats {
    /// Exponential moving average toward a batch's statistics; the variance
    /// enters unbiased.
    pub fn update(&mut self, batch: &ChannelStats, momentum: f64) {
        let unbias = if batch.count > 1 {
            batch.count as f64 / (batch.count as f64 - 1.0)
        } else {
            1.0
        };
        for c in 0..self.mean.len() {
            self.mean[c] = (1.0 - momentum) * self.mean[c] + momentum * batch.mean[c];
            self.var[c] = (1.0 - momentum) * self.var[c] + momentum * batch.var[c] * unbias;
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    role: Role,
    stages: Vec<Stage>,
    params: Vec<Tensor>,
    running: Vec<RunningStats>,
}

/// Accumulates layers and parameters while building a network.
struct Builder {
    rng: ChaCha8Rng,
    normal: Normal<f64>,
    /// Draw weights with std `sqrt(2 / fan_in)` instead of [`INIT_STD`].
    fan_in_scaled: bool,
    stages: Vec<Stage>,
    params: Vec<Tensor>,
    running: Vec<RunningStats>,
}

impl Builder {
    fn new(seed: u64) -> Self {
        Builder {
            rng: ChaCha8Rng::seed_from_u64(seed),
            normal: Normal::new(0.0, INIT_STD).expect("valid std"),
            fan_in_scaled: false,
            stages: Vec::new(),
            params: Vec::new(),
            running: Vec::new(),
        }
    }

    /// Kernels and weights; the last axis is the output width.
    fn random(&mut self, shape: &[usize]) -> usize {
        let normal = if self.fan_in_scaled {
            let fan_in: usize = shape[..shape.len() - 1].iter().product();
            Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("valid std")
        } else {
            self.normal
        };
        let t = Tensor::from_fn(shape, |_| normal.sample(&mut self.rng));
        self.params.push(t);
        self.params.len() - 1
    }

    fn filled(&mut self, shape: &[usize], value: f64) -> usize {
        self.params.push(Tensor::full(shape, value));
        self.params.len() - 1
    }

    fn conv(&mut self, geom: ConvGeometry, cin: usize, cout: usize) -> Layer {
        let kernel = self.random(&[geom.kernel.0, geom.kernel.1, cin, cout]);
        let bias = self.filled(&[cout], 0.0);
        Layer::Conv { geom, kernel, bias }
    }

    fn conv_transpose(&mut self, geom: ConvGeometry, cin: usize, cout: usize) -> Layer {
        let kernel = self.random(&[geom.kernel.0, geom.kernel.1, cout, cin]);
        let bias = self.filled(&[cout], 0.0);
        Layer::ConvTranspose { geom, kernel, bias }
    }

    fn instance_norm(&mut self, c: usize) -> Layer {
        let gain = self.filled(&[c], 1.0);
        let shift = self.filled(&[c], 0.0);
        Layer::InstanceNorm { gain, shift }
    }

    fn batch_norm(&mut self, c: usize) -> Layer {
        let gain = self.filled(&[c], 1.0);
        let shift = self.filled(&[c], 0.0);
        self.running.push(RunningStats {
            mean: vec![0.0; c],
            var: vec![1.0; c],
        });
        Layer::BatchNorm {
            gain,
            shift,
            stats: self.running.len() - 1,
        }
    }

    fn dense(&mut self, n: usize, m: usize) -> Layer {
        let weights = self.random(&[n, m]);
        let bias = self.filled(&[m], 0.0);
        Layer::Dense { weights, bias }
    }

    fn stage(&mut self, name: &'static str, layers: Vec<Layer>) {
        self.stages.push(Stage { name, layers });
    }

    fn finish(self, role: Role) -> Network {
        Network {
            role,
            stages: self.stages,
            params: self.params,
            running: self.running,
        }
    }
}

/// Encoder-decoder generator: four (conv, instance norm, LeakyReLU) stages
/// down to `1×2×32`, four (transposed conv, instance norm, LeakyReLU) stages
/// back to `9×6×1`, then ReLU.
///
/// Instance norm is left out of Encoder 4 and Decoder 1. Over the two
/// positions of the `1×2` bottleneck it maps every channel to ±1 with a
/// vanishing gradient, and on the single output channel it would erase each
/// sample's level.
pub fn build_generator(role: Role, seed: u64) -> Result<Network> {
    if role.architecture() != Architecture::Generator {
        return Err(Error::usage(format!("{role} is not a generator role")));
    }
    let mut b = Builder::new(seed);
    let leaky = Layer::Act(Activation::LeakyRelu(LEAKY_SLOPE));
    let widths = [1, 4, 8, 16, 32];
    let enc_names = ["Encoder 1", "Encoder 2", "Encoder 3", "Encoder 4"];
    for (i, name) in enc_names.into_iter().enumerate() {
        let conv = b.conv(ENCODER, widths[i], widths[i + 1]);
        if i == 3 {
            b.stage(name, vec![conv, leaky.clone()]);
        } else {
            let norm = b.instance_norm(widths[i + 1]);
            b.stage(name, vec![conv, norm, leaky.clone()]);
        }
    }
    let dec_names = ["Decoder 4", "Decoder 3", "Decoder 2", "Decoder 1"];
    for (i, name) in dec_names.into_iter().enumerate() {
        let (cin, cout) = (widths[4 - i], widths[3 - i]);
        let conv = b.conv_transpose(ENCODER, cin, cout);
        if i == 3 {
            b.stage(name, vec![conv, leaky.clone()]);
        } else {
            let norm = b.instance_norm(cout);
            b.stage(name, vec![conv, norm, leaky.clone()]);
        }
    }
    b.stage("Output", vec![Layer::Act(Activation::Relu)]);
    Ok(b.finish(role))
}

/// Patch discriminator ending in a single sigmoid probability.
///
/// Layers follow the table order conv → LeakyReLU → instance norm. There is
/// no instance norm after Conv 3 since its `2×1` output would be binarized.
pub fn build_discriminator(role: Role, seed: u64) -> Result<Network> {
    if role.architecture() != Architecture::Discriminator {
        return Err(Error::usage(format!("{role} is not a discriminator role")));
    }
    let mut b = Builder::new(seed);
    let leaky = Layer::Act(Activation::LeakyRelu(LEAKY_SLOPE));
    let c1 = b.conv(SAME_3X3, 1, 4);
    b.stage("Conv 1", vec![c1, leaky.clone()]);
    let n1 = b.instance_norm(4);
    b.stage("IN 1", vec![n1]);
    let c2 = b.conv(HALVE_2X2, 4, 8);
    b.stage("Conv 2", vec![c2, leaky.clone()]);
    let n2 = b.instance_norm(8);
    b.stage("IN 2", vec![n2]);
    let c3 = b.conv(HALVE_2X2, 8, 16);
    b.stage("Conv 3", vec![c3, leaky.clone()]);
    b.stage("IN 3", vec![]);
    let c4 = b.conv(COLLAPSE_2X1, 16, 1);
    b.stage("Conv 4", vec![c4, leaky]);
    b.stage("Output", vec![Layer::Flatten, Layer::Act(Activation::Sigmoid)]);
    Ok(b.finish(role))
}

/// CNN classifier producing the probability that a pixel is corn.
///
/// Weights are drawn with std `sqrt(2 / fan_in)`. At [`INIT_STD`] the
/// four-unit ReLU layer is small enough that early Adam steps at the
/// training learning rate can switch every unit off, leaving a constant
/// predictor. FC 2 feeds the sigmoid directly: a ReLU there would pin the
/// probability at or above one half.
pub fn build_crop_mapper(seed: u64) -> Network {
    let mut b = Builder::new(seed);
    b.fan_in_scaled = true;
    let relu = Layer::Act(Activation::Relu);
    let c1 = b.conv(SAME_3X3, 1, 2);
    b.stage("Conv 1", vec![c1, relu.clone()]);
    let n1 = b.batch_norm(2);
    b.stage("BN 1", vec![n1]);
    let c2 = b.conv(HALVE_2X2, 2, 2);
    b.stage("Conv 2", vec![c2, relu.clone()]);
    let n2 = b.batch_norm(2);
    b.stage("BN 2", vec![n2]);
    let c3 = b.conv(HALVE_2X2, 2, 4);
    b.stage("Conv 3", vec![c3, relu.clone()]);
    let n3 = b.batch_norm(4);
    b.stage("BN 3", vec![n3]);
    b.stage("Flatten", vec![Layer::Flatten]);
    let fc1 = b.dense(8, 4);
    b.stage("FC 1", vec![fc1, relu]);
    let fc2 = b.dense(4, 1);
    b.stage("FC 2", vec![fc2]);
    b.stage("Output", vec![Layer::Act(Activation::Sigmoid)]);
    b.finish(Role::CropMapper)
}

/// Builds the architecture belonging to `role`.
pub fn build(role: Role, seed: u64) -> Network {
    match role.architecture() {
        Architecture::Generator => build_generator(role, seed).expect("generator role"),
        Architecture::Discriminator => build_discriminator(role, seed).expect("discriminator role"),
        Architecture::CropMapper => build_crop_mapper(seed),
    }
}

impl Network {
    pub fn role(&self) -> Role {
        self.role
    }

    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor] {
        &mut self.params
    }

    pub fn running_stats(&self) -> &[RunningStats] {
        &self.running
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(Tensor::len).sum()
    }

    pub fn stage_names(&self) -> Vec<&'static str> {
        self.stages.iter().map(|s| s.name).collect()
    }

    /// Every tensor a checkpoint stores: parameters, then per batch-norm
    /// layer its running mean and variance.
    pub fn state_tensors(&self) -> Vec<Tensor> {
        let mut out = self.params.clone();
        for rs in &self.running {
            out.push(Tensor::new(vec![rs.mean.len()], rs.mean.clone()).expect("non-empty"));
            out.push(Tensor::new(vec![rs.var.len()], rs.var.clone()).expect("non-empty"));
        }
        out
    }

    /// Inverse of [`Network::state_tensors`]; shapes must match exactly.
    pub fn set_state_tensors(&mut self, tensors: Vec<Tensor>) -> Result<()> {
        let expected = self.params.len() + 2 * self.running.len();
        if tensors.len() != expected {
            return Err(Error::dim(format!("{} expects {expected} tensors, got {}", self.role, tensors.len())));
        }
        for (i, (have, want)) in tensors.iter().zip(self.state_tensors()).enumerate() {
            if have.shape() != want.shape() {
                return Err(Error::dim(format!(
                    "{} tensor {i}: expected {:?}, got {:?}",
                    self.role,
                    want.shape(),
                    have.shape()
                )));
            }
        }
        let mut it = tensors.into_iter();
        for p in self.params.iter_mut() {
            *p = it.next().expect("counted");
        }
        for rs in self.running.iter_mut() {
            rs.mean = it.next().expect("counted").into_data();
            rs.var = it.next().expect("counted").into_data();
        }
        Ok(())
    }

    /// Registers the parameters as graph leaves.
    pub fn bind(&self, g: &mut Graph, trainable: bool) -> Vec<Var> {
        self.params
            .iter()
            .map(|p| if trainable { g.param(p.clone()) } else { g.constant(p.clone()) })
            .collect()
    }

    /// Inference-mode forward pass (batch norm uses running statistics).
    pub fn forward(&self, g: &mut Graph, params: &[Var], x: Var) -> Result<Var> {
        self.run(g, params, x, None, None)
    }

    /// Training-mode forward pass: batch norm uses batch statistics and the
    /// running averages are updated.
    pub fn forward_train(&mut self, g: &mut Graph, params: &[Var], x: Var) -> Result<Var> {
        let mut stats = Vec::new();
        let out = self.run(g, params, x, Some(&mut stats), None)?;
        for (slot, s) in stats {
            self.running[slot].update(&s, BN_MOMENTUM);
        }
        Ok(out)
    }

    /// Per-stage output shapes (without the batch dimension), starting with
    /// the input shape under the name `"Input"`.
    pub fn shape_trace(&self) -> Result<Vec<(&'static str, Vec<usize>)>> {
        let mut g = Graph::new();
        let params = self.bind(&mut g, false);
        let x = g.constant(Tensor::full(&[1, TIMESTEPS, BANDS, 1], 0.5));
        let mut trace = vec![("Input", vec![TIMESTEPS, BANDS, 1])];
        self.run(&mut g, &params, x, None, Some(&mut trace))?;
        Ok(trace)
    }

    /// Convenience inference on a `[N, 9, 6, 1]` batch.
    pub fn predict(&self, input: &Tensor) -> Result<Tensor> {
        let mut g = Graph::new();
        let params = self.bind(&mut g, false);
        let x = g.constant(input.clone());
        let y = self.forward(&mut g, &params, x)?;
        Ok(g.value(y).clone())
    }

    /// Inference up to and including the named stage, e.g. the crop
    /// mapper's `"FC 1"` features.
    pub fn predict_through(&self, input: &Tensor, stage: &str) -> Result<Tensor> {
        let end = self
            .stages
            .iter()
            .position(|s| s.name == stage)
            .ok_or_else(|| Error::usage(format!("{} has no stage {stage:?}", self.role)))?;
        let mut head = self.clone();
        head.stages.truncate(end + 1);
        head.predict(input)
    }

    fn run(
        &self,
        g: &mut Graph,
        params: &[Var],
        mut x: Var,
        mut train_stats: Option<&mut Vec<(usize, ChannelStats)>>,
        mut trace: Option<&mut Vec<(&'static str, Vec<usize>)>>,
    ) -> Result<Var> {
        if params.len() != self.params.len() {
            return Err(Error::usage(format!(
                "{} has {} parameters, {} bound",
                self.role,
                self.params.len(),
                params.len()
            )));
        }
        for stage in &self.stages {
            for layer in &stage.layers {
                x = match *layer {
                    Layer::Conv { geom, kernel, bias } => g.conv2d(x, params[kernel], params[bias], geom)?,
                    Layer::ConvTranspose { geom, kernel, bias } => {
                        g.conv_transpose2d(x, params[kernel], params[bias], geom)?
                    }
                    Layer::InstanceNorm { gain, shift } => g.instance_norm(x, params[gain], params[shift], NORM_EPS)?,
                    Layer::BatchNorm { gain, shift, stats } => match train_stats.as_deref_mut() {
                        Some(collected) => {
                            let (y, s) = g.batch_norm_train(x, params[gain], params[shift], NORM_EPS)?;
                            collected.push((stats, s));
                            y
                        }
                        None => {
                            let rs = &self.running[stats];
                            g.batch_norm_eval(x, params[gain], params[shift], &rs.mean, &rs.var, NORM_EPS)?
                        }
                    },
                    Layer::Act(kind) => g.activation(x, kind),
                    Layer::Flatten => {
                        let s = g.value(x).shape();
                        let n = s[0];
                        let rest: usize = s[1..].iter().product();
                        g.reshape(x, &[n, rest])?
                    }
                    Layer::Dense { weights, bias } => g.dense(x, params[weights], params[bias])?,
                };
            }
            if let Some(t) = trace.as_deref_mut() {
                t.push((stage.name, g.value(x).shape()[1..].to_vec()));
            }
        }
        Ok(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_parameters() {
        for role in Role::ALL {
            assert_eq!(build(role, 7), build(role, 7));
            assert_ne!(build(role, 7).params(), build(role, 8).params());
        }
    }

    #[test]
    fn wrong_role_is_rejected() {
        assert!(build_generator(Role::CropMapper, 0).is_err());
        assert!(build_discriminator(Role::GeneratorG, 0).is_err());
    }

    #[test]
    fn role_codes_round_trip() {
        for role in Role::ALL {
            assert_eq!(Role::from_code(role.code()), Some(role));
        }
        assert_eq!(Role::from_code(9), None);
    }

    #[test]
    fn running_mean_converges_on_standard_normal_batches() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let mut rs = RunningStats {
            mean: vec![5.0; 3],
            var: vec![1.0; 3],
        };
        for _ in 0..300 {
            let mut g = Graph::new();
            let x = g.constant(Tensor::from_fn(&[32, 3], |_| normal.sample(&mut rng)));
            let gain = g.constant(Tensor::full(&[3], 1.0));
            let shift = g.constant(Tensor::zeros(&[3]));
            let (_, stats) = g.batch_norm_train(x, gain, shift, NORM_EPS).unwrap();
            rs.update(&stats, BN_MOMENTUM);
        }
        assert!(rs.mean.iter().all(|m| m.abs() < 0.1), "{:?}", rs.mean);
        assert!(rs.var.iter().all(|v| (v - 1.0).abs() < 0.3), "{:?}", rs.var);
    }

    #[test]
    fn predict_through_stops_at_the_stage() {
        let net = build_crop_mapper(2);
        let x = Tensor::full(&[3, TIMESTEPS, BANDS, 1], 0.4);
        assert_eq!(net.predict_through(&x, "FC 1").unwrap().shape(), [3, 4]);
        assert_eq!(net.predict_through(&x, "Output").unwrap(), net.predict(&x).unwrap());
        assert!(net.predict_through(&x, "Decoder 1").is_err());
    }

    #[test]
    fn eval_mode_is_deterministic() {
        let net = build_crop_mapper(4);
        let x = Tensor::from_fn(&[3, 9, 6, 1], |i| (i % 11) as f64 / 11.0);
        assert_eq!(net.predict(&x).unwrap(), net.predict(&x).unwrap());
    }
}
