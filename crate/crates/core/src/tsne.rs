//! Exact t-SNE embedding into two dimensions.
//!
//! O(n²) in memory and time per iteration; meant for a few thousand points.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

/// Largest number of points embedded in one run.
pub const MAX_POINTS: usize = 5000;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TsneConfig {
    pub perplexity: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub exaggeration: f64,
    /// Iterations run with exaggerated affinities and the initial momentum.
    pub exaggeration_iters: usize,
    pub initial_momentum: f64,
    pub final_momentum: f64,
    pub seed: u64,
}

impl Default for TsneConfig {
    fn default() -> Self {
        TsneConfig {
            perplexity: 30.0,
            iterations: 1000,
            learning_rate: 200.0,
            exaggeration: 12.0,
            exaggeration_iters: 250,
            initial_momentum: 0.5,
            final_momentum: 0.8,
            seed: 0,
        }
    }
}

/// Standard deviation of the initial embedding.
const INIT_STD: f64 = 1e-4;
const MIN_GAIN: f64 = 0.01;
const ENTROPY_TOL: f64 = 1e-10;
const MAX_SEARCH_STEPS: usize = 200;

/// Conditional affinities of every point to its neighbours.
#[derive(Clone, Debug, PartialEq)]
pub struct Conditional {
    /// Row-major `n × n`; row `i` is `p(j | i)` with a zero diagonal.
    pub p: Vec<f64>,
    /// Precision `1 / (2σ²)` chosen for each point.
    pub beta: Vec<f64>,
    /// Perplexity actually reached for each point.
    pub perplexity: Vec<f64>,
}

pub fn squared_distances(points: &[Vec<f64>]) -> Vec<f64> {
    let n = points.len();
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let v: f64 = points[i].iter().zip(&points[j]).map(|(a, b)| (a - b) * (a - b)).sum();
            d[i * n + j] = v;
            d[j * n + i] = v;
        }
    }
    d
}

/// Row of Gaussian affinities at precision `beta`; returns its entropy (nats).
fn affinity_row(dist: &[f64], i: usize, beta: f64, row: &mut [f64]) -> f64 {
    let min = dist
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(_, &d)| d)
        .fold(f64::INFINITY, f64::min);
    let mut sum = 0.0;
    let mut weighted = 0.0;
    for (j, (r, &d)) in row.iter_mut().zip(dist).enumerate() {
        if j == i {
            *r = 0.0;
            continue;
        }
        let shifted = d - min;
        *r = (-beta * shifted).exp();
        sum += *r;
        weighted += shifted * *r;
    }
    row.iter_mut().for_each(|r| *r /= sum);
    sum.ln() + beta * weighted / sum
}

/// Searches each point's precision so its conditional distribution reaches
/// the target perplexity.
pub fn conditional_affinities(dist: &[f64], n: usize, perplexity: f64) -> Conditional {
    let target = perplexity.ln();
    let mut p = vec![0.0; n * n];
    let mut beta = vec![1.0; n];
    let mut reached = vec![0.0; n];
    for i in 0..n {
        let d = &dist[i * n..(i + 1) * n];
        let row = &mut p[i * n..(i + 1) * n];
        let (mut lo, mut hi) = (0.0_f64, f64::INFINITY);
        let mut b = 1.0;
        let mut h = affinity_row(d, i, b, row);
        for _ in 0..MAX_SEARCH_STEPS {
            if (h - target).abs() < ENTROPY_TOL {
                break;
            }
            if h > target {
                lo = b;
                b = if hi.is_finite() { (b + hi) / 2.0 } else { b * 2.0 };
            } else {
                hi = b;
                b = (b + lo) / 2.0;
            }
            h = affinity_row(d, i, b, row);
        }
        beta[i] = b;
        reached[i] = h.exp();
    }
    Conditional {
        p,
        beta,
        perplexity: reached,
    }
}

/// Symmetrized joint affinities `(p(j|i) + p(i|j)) / 2n`.
pub fn joint_affinities(cond: &Conditional, n: usize) -> Vec<f64> {
    let mut p = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            p[i * n + j] = (cond.p[i * n + j] + cond.p[j * n + i]) / (2.0 * n as f64);
        }
    }
    p
}

/// Unnormalized Student-t kernel `1 / (1 + |yi − yj|²)` and its sum.
fn student_kernel(y: &[[f64; 2]]) -> (Vec<f64>, f64) {
    let n = y.len();
    let mut num = vec![0.0; n * n];
    let mut z = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let dx = y[i][0] - y[j][0];
            let dy = y[i][1] - y[j][1];
            let v = 1.0 / (1.0 + dx * dx + dy * dy);
            num[i * n + j] = v;
            num[j * n + i] = v;
            z += 2.0 * v;
        }
    }
    (num, z)
}

/// `KL(P ‖ Q)` for the embedding `y`.
pub fn kl_divergence(p: &[f64], y: &[[f64; 2]]) -> f64 {
    let n = y.len();
    let (num, z) = student_kernel(y);
    let mut kl = 0.0;
    for i in 0..n {
        for j in 0..n {
            let pij = p[i * n + j];
            if i != j && pij > 0.0 {
                let q = (num[i * n + j] / z).max(f64::MIN_POSITIVE);
                kl += pij * (pij / q).ln();
            }
        }
    }
    kl
}

#[derive(Clone, Debug, PartialEq)]
pub struct TsneResult {
    pub coords: Vec<[f64; 2]>,
    /// KL divergence of the initial embedding.
    pub kl_initial: f64,
    pub kl_final: f64,
    /// Perplexity reached by each point's bandwidth search.
    pub perplexity: Vec<f64>,
}

/// Embeds `points` (all of equal dimension) into the plane.
pub fn tsne(points: &[Vec<f64>], config: &TsneConfig) -> Result<TsneResult> {
    let n = points.len();
    if n < 4 {
        return Err(Error::config(format!("t-SNE needs at least 4 points, got {n}")));
    }
    if n > MAX_POINTS {
        return Err(Error::config(format!("t-SNE is limited to {MAX_POINTS} points; subsample first")));
    }
    if !(config.perplexity > 0.0 && config.perplexity < (n as f64 - 1.0) / 3.0) {
        return Err(Error::config(format!(
            "perplexity {} must lie in (0, {})",
            config.perplexity,
            (n as f64 - 1.0) / 3.0
        )));
    }
    let d = points[0].len();
    if points.iter().any(|p| p.len() != d) {
        return Err(Error::dim("t-SNE points differ in dimension"));
    }
    if points.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::usage("t-SNE input contains non-finite values"));
    }

    let dist = squared_distances(points);
    let cond = conditional_affinities(&dist, n, config.perplexity);
    let p = joint_affinities(&cond, n);

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let normal = Normal::new(0.0, INIT_STD).expect("finite std");
    let mut y: Vec<[f64; 2]> = (0..n).map(|_| [normal.sample(&mut rng), normal.sample(&mut rng)]).collect();
    let kl_initial = kl_divergence(&p, &y);

    let mut velocity = vec![[0.0; 2]; n];
    let mut gains = vec![[1.0_f64; 2]; n];
    let mut grad = vec![[0.0; 2]; n];
    for iter in 0..config.iterations {
        let early = iter < config.exaggeration_iters;
        let exaggeration = if early { config.exaggeration } else { 1.0 };
        let momentum = if early { config.initial_momentum } else { config.final_momentum };
        let (num, z) = student_kernel(&y);
        for i in 0..n {
            let mut g = [0.0; 2];
            for j in 0..n {
                if i == j {
                    continue;
                }
                let w = num[i * n + j];
                let coeff = (exaggeration * p[i * n + j] - w / z) * w;
                g[0] += coeff * (y[i][0] - y[j][0]);
                g[1] += coeff * (y[i][1] - y[j][1]);
            }
            grad[i] = [4.0 * g[0], 4.0 * g[1]];
        }
        for i in 0..n {
            for k in 0..2 {
                gains[i][k] = if (grad[i][k] > 0.0) != (velocity[i][k] > 0.0) {
                    gains[i][k] + 0.2
                } else {
                    (gains[i][k] * 0.8).max(MIN_GAIN)
                };
                velocity[i][k] = momentum * velocity[i][k] - config.learning_rate * gains[i][k] * grad[i][k];
                y[i][k] += velocity[i][k];
            }
        }
        let mean = y.iter().fold([0.0; 2], |m, p| [m[0] + p[0], m[1] + p[1]]);
        for p in y.iter_mut() {
            p[0] -= mean[0] / n as f64;
            p[1] -= mean[1] / n as f64;
        }
    }
    if y.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Divergence("t-SNE produced non-finite coordinates".into()));
    }
    let kl_final = kl_divergence(&p, &y);
    Ok(TsneResult {
        coords: y,
        kl_initial,
        kl_final,
        perplexity: cond.perplexity,
    })
}

/// Seeded choice of at most `cap` indices out of `n`, in ascending order.
pub fn subsample(n: usize, cap: usize, seed: u64) -> Vec<usize> {
    if n <= cap {
        return (0..n).collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = index::sample(&mut rng, n, cap).into_vec();
    picked.sort_unstable();
    picked
}
