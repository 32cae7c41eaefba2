//! Seeded gradient-check suites over every differentiable primitive and the
//! three composed networks.
//!
//! Each check runs [`TRIALS`] random draws and reports the worst relative
//! error between reverse-mode and central-difference derivatives.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Activation, Graph, Var};
use crate::conv::ConvGeometry;
use crate::error::Result;
use crate::gradcheck::{finite_diff_check, finite_diff_compare};
use crate::networks::{build, Role, NORM_EPS};
use crate::tensor::Tensor;

pub const TRIALS: usize = 100;
pub const PRIMITIVE_TOL: f64 = 1e-5;
pub const COMPOSITE_TOL: f64 = 1e-4;

const EPS: f64 = 1e-6;
/// Step for ops that are affine in every single coordinate. Central
/// differences are exact there, so a wider step only lowers rounding noise.
const AFFINE_EPS: f64 = 1e-3;
/// Step for the composed networks. Tiny components produced by cancellation
/// are otherwise lost in the rounding of the output; curvature between kinks
/// is small, and samples keep at least ten steps away from every kink.
const COMPOSITE_EPS: f64 = 1e-4;
/// Samples whose piecewise-linear nodes sit closer than this to a
/// breakpoint are redrawn.
const MIN_KINK_MARGIN: f64 = 1e-3;
/// Parameter components probed per composite trial.
const PARAM_PROBES: usize = 64;
/// Batch size of composite checks.
const BATCH: usize = 3;
/// Analytic gradients below this are zero up to rounding.
const ZERO_GRAD: f64 = 1e-12;
/// Largest central difference accepted for a zero gradient; rounding of an
/// O(1) output divided by the step stays far below it.
const ZERO_NOISE: f64 = 1e-7;

/// Outcome of one named check.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub worst: f64,
    pub tolerance: f64,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.worst < self.tolerance
    }
}

fn uniform(rng: &mut ChaCha8Rng, shape: &[usize], lo: f64, hi: f64) -> Tensor {
    Tensor::from_fn(shape, |_| rng.random_range(lo..hi))
}

/// Weighted sum with fixed random weights so every output element carries a
/// distinct gradient.
fn weighted_sum(g: &mut Graph, y: Var, seed: u64) -> Result<Var> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shape = g.value(y).shape().to_vec();
    let w = g.constant(uniform(&mut rng, &shape, -1.0, 1.0));
    let p = g.mul(y, w)?;
    Ok(g.sum(p))
}

fn kink_margin<F>(f: &F, inputs: &[Tensor]) -> Result<f64>
where
    F: Fn(&mut Graph, &[Var]) -> Result<Var>,
{
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.constant(t.clone())).collect();
    f(&mut g, &vars)?;
    Ok(g.kink_margin())
}

/// Worst relative error over `TRIALS` draws, probing every input component.
fn worst_error<F, I>(seed: u64, eps: f64, mut draw: I, f: F) -> Result<f64>
where
    F: Fn(&mut Graph, &[Var]) -> Result<Var>,
    I: FnMut(&mut ChaCha8Rng) -> Vec<Tensor>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let mut done = 0;
    while done < TRIALS {
        let inputs = draw(&mut rng);
        if kink_margin(&f, &inputs)? < MIN_KINK_MARGIN {
            continue;
        }
        worst = worst.max(finite_diff_check(&f, &inputs, eps)?);
        done += 1;
    }
    Ok(worst)
}

fn primitive(name: impl Into<String>, worst: f64) -> CheckResult {
    CheckResult {
        name: name.into(),
        worst,
        tolerance: PRIMITIVE_TOL,
    }
}

pub fn conv2d() -> Result<CheckResult> {
    let mut worst: f64 = 0.0;
    for (i, (geom, hw, cin, cout)) in [
        (ConvGeometry::new((3, 2), (1, 1), (0, 0)), (9, 6), 1, 4),
        (ConvGeometry::new((3, 3), (1, 1), (1, 1)), (9, 6), 2, 3),
        (ConvGeometry::new((2, 2), (2, 2), (0, 0)), (9, 6), 3, 2),
        (ConvGeometry::new((2, 1), (1, 1), (0, 0)), (2, 1), 4, 1),
    ]
    .into_iter()
    .enumerate()
    {
        let err = worst_error(
            10 + i as u64,
            AFFINE_EPS,
            |r| {
                vec![
                    uniform(r, &[2, hw.0, hw.1, cin], -1.0, 1.0),
                    uniform(r, &[geom.kernel.0, geom.kernel.1, cin, cout], -1.0, 1.0),
                    uniform(r, &[cout], -1.0, 1.0),
                ]
            },
            |g, v| {
                let y = g.conv2d(v[0], v[1], v[2], geom)?;
                weighted_sum(g, y, 1)
            },
        )?;
        worst = worst.max(err);
    }
    Ok(primitive("conv2d", worst))
}

pub fn conv_transpose2d() -> Result<CheckResult> {
    let geom = ConvGeometry::new((3, 2), (1, 1), (0, 0));
    let mut worst: f64 = 0.0;
    for (i, (hw, cin, cout)) in [((1, 2), 32, 16), ((3, 3), 4, 2), ((7, 5), 4, 1)].into_iter().enumerate() {
        let err = worst_error(
            20 + i as u64,
            AFFINE_EPS,
            |r| {
                vec![
                    uniform(r, &[2, hw.0, hw.1, cin], -1.0, 1.0),
                    uniform(r, &[3, 2, cout, cin], -1.0, 1.0),
                    uniform(r, &[cout], -1.0, 1.0),
                ]
            },
            |g, v| {
                let y = g.conv_transpose2d(v[0], v[1], v[2], geom)?;
                weighted_sum(g, y, 2)
            },
        )?;
        worst = worst.max(err);
    }
    Ok(primitive("conv_transpose2d", worst))
}

pub fn activations() -> Result<Vec<CheckResult>> {
    let mut out = Vec::new();
    for kind in [Activation::Relu, Activation::LeakyRelu(0.2), Activation::Sigmoid] {
        let err = worst_error(
            30,
            EPS,
            |r| vec![uniform(r, &[3, 4], -2.0, 2.0)],
            |g, v| {
                let y = g.activation(v[0], kind);
                weighted_sum(g, y, 3)
            },
        )?;
        out.push(primitive(format!("{kind:?}"), err));
    }
    Ok(out)
}

pub fn instance_norm() -> Result<CheckResult> {
    let err = worst_error(
        40,
        EPS,
        |r| {
            vec![
                uniform(r, &[2, 3, 3, 4], -1.0, 1.0),
                uniform(r, &[4], 0.5, 2.0),
                uniform(r, &[4], -1.0, 1.0),
            ]
        },
        |g, v| {
            let y = g.instance_norm(v[0], v[1], v[2], NORM_EPS)?;
            weighted_sum(g, y, 4)
        },
    )?;
    Ok(primitive("instance_norm", err))
}

pub fn batch_norm() -> Result<Vec<CheckResult>> {
    let train = worst_error(
        50,
        EPS,
        |r| {
            vec![
                uniform(r, &[4, 2, 1, 3], -1.0, 1.0),
                uniform(r, &[3], 0.5, 2.0),
                uniform(r, &[3], -1.0, 1.0),
            ]
        },
        |g, v| {
            let (y, _) = g.batch_norm_train(v[0], v[1], v[2], NORM_EPS)?;
            weighted_sum(g, y, 5)
        },
    )?;
    let eval = worst_error(
        51,
        EPS,
        |r| {
            vec![
                uniform(r, &[4, 3], -1.0, 1.0),
                uniform(r, &[3], 0.5, 2.0),
                uniform(r, &[3], -1.0, 1.0),
            ]
        },
        |g, v| {
            let y = g.batch_norm_eval(v[0], v[1], v[2], &[0.1, -0.2, 0.3], &[0.5, 1.0, 2.0], NORM_EPS)?;
            weighted_sum(g, y, 6)
        },
    )?;
    Ok(vec![primitive("batch_norm train", train), primitive("batch_norm eval", eval)])
}

pub fn dense() -> Result<CheckResult> {
    let err = worst_error(
        60,
        AFFINE_EPS,
        |r| {
            vec![
                uniform(r, &[3, 8], -1.0, 1.0),
                uniform(r, &[8, 4], -1.0, 1.0),
                uniform(r, &[4], -1.0, 1.0),
            ]
        },
        |g, v| {
            let y = g.dense(v[0], v[1], v[2])?;
            weighted_sum(g, y, 7)
        },
    )?;
    Ok(primitive("dense", err))
}

type Op = Box<dyn Fn(&mut Graph, &[Var]) -> Result<Var>>;

pub fn elementwise() -> Result<Vec<CheckResult>> {
    let pair = |r: &mut ChaCha8Rng| vec![uniform(r, &[2, 3], 0.1, 2.0), uniform(r, &[2, 3], -2.0, 2.0)];
    let cases: Vec<(&str, Op)> = vec![
        ("add", Box::new(|g, v| g.add(v[0], v[1]))),
        ("sub", Box::new(|g, v| g.sub(v[0], v[1]))),
        ("mul", Box::new(|g, v| g.mul(v[0], v[1]))),
        ("scale", Box::new(|g, v| Ok(g.scale(v[1], -1.7)))),
        ("add_scalar", Box::new(|g, v| Ok(g.add_scalar(v[1], 0.3)))),
        ("abs", Box::new(|g, v| Ok(g.abs(v[1])))),
        ("ln", Box::new(|g, v| Ok(g.ln(v[0])))),
        ("clamp", Box::new(|g, v| Ok(g.clamp(v[1], -0.5, 0.5)))),
        ("reshape", Box::new(|g, v| g.reshape(v[1], &[3, 2]))),
    ];
    let mut out = Vec::new();
    for (i, (name, op)) in cases.into_iter().enumerate() {
        let err = worst_error(70 + i as u64, EPS, pair, |g, v| {
            let y = op(g, v)?;
            weighted_sum(g, y, 8)
        })?;
        out.push(primitive(name, err));
    }
    for (name, reduce) in [("sum", Graph::sum as fn(&mut Graph, Var) -> Var), ("mean", Graph::mean)] {
        let err = worst_error(90, EPS, pair, |g, v| {
            let p = g.mul(v[0], v[1])?;
            Ok(reduce(g, p))
        })?;
        out.push(primitive(name, err));
    }
    let err = worst_error(91, EPS, pair, |g, v| g.l1_mean(v[0], v[1]))?;
    out.push(primitive("l1_mean", err));
    Ok(out)
}

/// Every primitive check.
pub fn primitives() -> Result<Vec<CheckResult>> {
    let mut out = vec![conv2d()?, conv_transpose2d()?];
    out.extend(activations()?);
    out.push(instance_norm()?);
    out.extend(batch_norm()?);
    out.push(dense()?);
    out.extend(elementwise()?);
    Ok(out)
}

/// Checks a whole network with respect to its full input batch and a random
/// sample of its parameters in each trial.
///
/// Some gradients are exactly zero: a bias or shift whose effect reaches a
/// normalization as a per-channel constant is subtracted again. A relative
/// metric cannot compare zero with rounding noise, so a component whose
/// analytic gradient vanishes passes when its central difference is within
/// the noise level and otherwise counts with its relative error.
pub fn network(role: Role, seed: u64, train_mode: bool) -> Result<CheckResult> {
    let net = build(role, 0);
    let shapes: Vec<Vec<usize>> = net.params().iter().map(|p| p.shape().to_vec()).collect();
    let forward = |g: &mut Graph, v: &[Var]| {
        let mut net = net.clone();
        let y = if train_mode {
            net.forward_train(g, &v[1..], v[0])?
        } else {
            net.forward(g, &v[1..], v[0])?
        };
        weighted_sum(g, y, 9)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let mut done = 0;
    while done < TRIALS {
        let mut inputs = vec![uniform(&mut rng, &[BATCH, 9, 6, 1], 0.0, 1.0)];
        // Weights well above the 0.02 initialization and positive biases,
        // gains and shifts keep ReLUs alive and outputs sensitive.
        inputs.extend(shapes.iter().map(|s| match s.len() {
            1 => uniform(&mut rng, s, 0.1, 0.6),
            _ => uniform(&mut rng, s, -0.6, 0.6),
        }));
        if kink_margin(&forward, &inputs)? < MIN_KINK_MARGIN {
            continue;
        }
        let mut probes: Vec<(usize, usize)> = (0..inputs[0].len()).map(|c| (0, c)).collect();
        for _ in 0..PARAM_PROBES {
            let t = rng.random_range(1..inputs.len());
            probes.push((t, rng.random_range(0..inputs[t].len())));
        }
        for c in finite_diff_compare(forward, &inputs, COMPOSITE_EPS, &probes)? {
            if c.analytic.abs() >= ZERO_GRAD || c.numeric.abs() >= ZERO_NOISE {
                worst = worst.max(c.relative_error());
            }
        }
        done += 1;
    }
    let mode = if train_mode { "train" } else { "eval" };
    Ok(CheckResult {
        name: format!("{role} ({mode})"),
        worst,
        tolerance: COMPOSITE_TOL,
    })
}

/// The generator, discriminator and crop mapper (both batch-norm modes).
pub fn networks() -> Result<Vec<CheckResult>> {
    Ok(vec![
        network(Role::GeneratorG, 100, false)?,
        network(Role::DiscriminatorY, 101, false)?,
        network(Role::CropMapper, 102, true)?,
        network(Role::CropMapper, 103, false)?,
    ])
}
