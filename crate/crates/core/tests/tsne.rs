//! Exact t-SNE: affinities, optimization and determinism.

mod support;

use cropgan_core::tsne::{subsample, tsne, TsneConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn tsne_properties() {
    support::checks::tsne_suite().assert();
}

#[test]
fn same_seed_same_embedding() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let pts: Vec<Vec<f64>> = (0..30).map(|_| (0..4).map(|_| rng.random()).collect()).collect();
    let config = TsneConfig {
        perplexity: 5.0,
        iterations: 300,
        seed: 3,
        ..TsneConfig::default()
    };
    assert_eq!(tsne(&pts, &config).unwrap(), tsne(&pts, &config).unwrap());
}

#[test]
fn invalid_inputs_are_rejected() {
    let mut pts: Vec<Vec<f64>> = (0..20).map(|i| vec![f64::from(i), 0.0]).collect();
    let config = TsneConfig {
        perplexity: 5.0,
        ..TsneConfig::default()
    };
    assert!(tsne(&pts, &TsneConfig { perplexity: 10.0, ..config }).is_err());
    pts[3][1] = f64::NAN;
    assert!(matches!(tsne(&pts, &config), Err(cropgan_core::Error::Usage(_))));
}

#[test]
fn subsample_is_seeded() {
    assert_eq!(subsample(10_000, 5000, 1), subsample(10_000, 5000, 1));
    assert_ne!(subsample(10_000, 5000, 1), subsample(10_000, 5000, 2));
}
