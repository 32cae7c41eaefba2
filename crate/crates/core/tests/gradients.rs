//! Reverse-mode gradients against central differences for every
//! differentiable primitive and for the three composed networks.

use cropgan_core::gradsuite::{self, CheckResult};

fn assert_all(results: Vec<CheckResult>) {
    for r in results {
        assert!(r.passed(), "{}: max relative error {:e} (tolerance {:e})", r.name, r.worst, r.tolerance);
    }
}

#[test]
fn conv2d_gradients() {
    assert_all(vec![gradsuite::conv2d().unwrap()]);
}

#[test]
fn conv_transpose2d_gradients() {
    assert_all(vec![gradsuite::conv_transpose2d().unwrap()]);
}

#[test]
fn activation_gradients() {
    assert_all(gradsuite::activations().unwrap());
}

#[test]
fn instance_norm_gradients() {
    assert_all(vec![gradsuite::instance_norm().unwrap()]);
}

#[test]
fn batch_norm_gradients() {
    assert_all(gradsuite::batch_norm().unwrap());
}

#[test]
fn dense_gradients() {
    assert_all(vec![gradsuite::dense().unwrap()]);
}

#[test]
fn elementwise_gradients() {
    assert_all(gradsuite::elementwise().unwrap());
}

#[test]
fn generator_gradients() {
    assert_all(vec![gradsuite::network(cropgan_core::Role::GeneratorG, 100, false).unwrap()]);
}

#[test]
fn discriminator_gradients() {
    assert_all(vec![gradsuite::network(cropgan_core::Role::DiscriminatorY, 101, false).unwrap()]);
}

#[test]
fn crop_mapper_gradients() {
    assert_all(vec![
        gradsuite::network(cropgan_core::Role::CropMapper, 102, true).unwrap(),
        gradsuite::network(cropgan_core::Role::CropMapper, 103, false).unwrap(),
    ]);
}
