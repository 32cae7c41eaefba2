use cropgan_core::networks::{build, NORM_EPS};
use cropgan_core::{AdamConfig, AdamState, ConvGeometry, Graph, Role, Tensor, BANDS, TIMESTEPS};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random(rng: &mut ChaCha8Rng, shape: &[usize], scale: f64) -> Tensor {
    Tensor::from_fn(shape, |_| rng.random_range(-scale..scale))
}

fn dot(a: &Tensor, b: &Tensor) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
}

/// Inputs in [0, 1] plus the degenerate all-zero, all-one and constant batches.
fn input_batch(rng: &mut ChaCha8Rng, i: usize) -> Tensor {
    let n = 1 + i % 6;
    let shape = [n, TIMESTEPS, BANDS, 1];
    match i % 10 {
        0 => Tensor::zeros(&shape),
        1 => Tensor::full(&shape, 1.0),
        2 => Tensor::full(&shape, rng.random()),
        _ => Tensor::from_fn(&shape, |_| rng.random()),
    }
}

#[test]
fn no_non_finite_values_over_random_batches() {
    let roles = [Role::GeneratorG, Role::GeneratorF, Role::DiscriminatorX, Role::CropMapper];
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for i in 0..1000 {
        let mut net = build(roles[i % 4], i as u64);
        let x = input_batch(&mut rng, i);
        let mut g = Graph::new();
        let params = net.bind(&mut g, true);
        let xv = g.constant(x);
        let y = if net.role() == Role::CropMapper && g.value(xv).shape()[0] > 1 {
            net.forward_train(&mut g, &params, xv).unwrap()
        } else {
            net.forward(&mut g, &params, xv).unwrap()
        };
        assert!(g.value(y).data().iter().all(|v| v.is_finite()), "forward {i} ({})", net.role());
        let loss = g.mean(y);
        g.backward(loss).unwrap();
        for (k, &p) in params.iter().enumerate() {
            assert!(
                g.grad_or_zeros(p).data().iter().all(|v| v.is_finite()),
                "gradient {k} of batch {i} ({})",
                net.role()
            );
        }
    }
}

#[test]
fn instance_norm_standardizes_each_channel() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for case in 0..50 {
        let (n, h, w, c) = (1 + case % 3, 2 + case % 7, 1 + case % 5, 1 + case % 4);
        let offset = rng.random_range(-5.0..5.0);
        let x = Tensor::from_fn(&[n, h, w, c], |_| offset + rng.random_range(-2.0..2.0));
        let mut g = Graph::new();
        let xv = g.constant(x);
        let gain = g.constant(Tensor::full(&[c], 1.0));
        let shift = g.constant(Tensor::zeros(&[c]));
        let y = g.instance_norm(xv, gain, shift, NORM_EPS).unwrap();
        let y = g.value(y).data();
        for s in 0..n {
            for ch in 0..c {
                let vals: Vec<f64> = (0..h * w).map(|p| y[(s * h * w + p) * c + ch]).collect();
                let mean = vals.iter().sum::<f64>() / vals.len() as f64;
                let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64;
                assert!(mean.abs() < 1e-10, "mean {mean}");
                assert!((var - 1.0).abs() < 1e-3, "variance {var}");
            }
        }
    }
}

#[test]
fn transposed_conv_is_the_adjoint_of_conv() {
    let enc = ConvGeometry::new((3, 2), (1, 1), (0, 0));
    let same = ConvGeometry::new((3, 3), (1, 1), (1, 1));
    // (input size, channels in, channels out) of every generator encoder
    // stage, plus a same-padded case.
    let cases = [
        (enc, (9, 6), 1, 4),
        (enc, (7, 5), 4, 8),
        (enc, (5, 4), 8, 16),
        (enc, (3, 3), 16, 32),
        (same, (9, 6), 1, 4),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for (geom, (h, w), a, b) in cases {
        let (oh, ow) = geom.output_size(h, w).unwrap();
        assert_eq!(geom.transposed_output_size(oh, ow).unwrap(), (h, w));
        for n in [1, 3] {
            let x = random(&mut rng, &[n, h, w, a], 1.0);
            let y = random(&mut rng, &[n, oh, ow, b], 1.0);
            let k = random(&mut rng, &[geom.kernel.0, geom.kernel.1, a, b], 1.0);
            let mut g = Graph::new();
            let (xv, yv, kv) = (g.constant(x.clone()), g.constant(y.clone()), g.constant(k));
            let (zero_b, zero_a) = (g.constant(Tensor::zeros(&[b])), g.constant(Tensor::zeros(&[a])));
            let ax = g.conv2d(xv, kv, zero_b, geom).unwrap();
            let aty = g.conv_transpose2d(yv, kv, zero_a, geom).unwrap();
            let lhs = dot(g.value(ax), &y);
            let rhs = dot(&x, g.value(aty));
            assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()), "{lhs} vs {rhs} for {h}x{w} {a}->{b}");
        }
    }
}

#[test]
fn adam_first_step_moves_by_the_learning_rate() {
    let config = AdamConfig::default();
    let params = vec![Tensor::new(vec![4], vec![0.1, -0.2, 0.3, 0.0]).unwrap()];
    let grads = vec![Tensor::new(vec![4], vec![2.0, -0.5, 1e-3, 0.0]).unwrap()];
    let mut state = AdamState::new(config, &params);
    let mut p = params.clone();
    state.step(&mut p, &grads).unwrap();
    for ((before, after), g) in params[0].data().iter().zip(p[0].data()).zip(grads[0].data()) {
        // The bias-corrected ratio m/√v is sign(g) up to epsilon.
        let expected = if *g == 0.0 {
            *before
        } else {
            before - config.learning_rate * g / (g.abs() + config.epsilon)
        };
        assert!((after - expected).abs() < 1e-15, "{after} vs {expected}");
    }
    assert_eq!(state.step, 1);
}
