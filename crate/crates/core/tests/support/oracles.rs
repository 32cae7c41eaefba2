//! Independent reference implementations, written directly from the
//! definitions without reusing library code paths.

use cropgan_core::preprocess::SceneStack;
use cropgan_core::{BANDS, TIMESTEPS};

/// OA, F1 and kappa counted pair by pair.
pub fn brute_metrics(pred: &[u8], truth: &[u8]) -> (f64, f64, f64) {
    let n = pred.len() as f64;
    let agree = pred.iter().zip(truth).filter(|(p, t)| (**p != 0) == (**t != 0)).count() as f64;
    let oa = agree / n;

    let mut hits = 0.0;
    let mut predicted = 0.0;
    let mut actual = 0.0;
    for (&p, &t) in pred.iter().zip(truth) {
        if p != 0 {
            predicted += 1.0;
        }
        if t != 0 {
            actual += 1.0;
        }
        if p != 0 && t != 0 {
            hits += 1.0;
        }
    }
    // Harmonic mean of precision and recall.
    let f1 = if predicted + actual == 0.0 { 0.0 } else { 2.0 * hits / (predicted + actual) };

    // Chance agreement from the marginal rates of each class.
    let pe = (predicted / n) * (actual / n) + ((n - predicted) / n) * ((n - actual) / n);
    let kappa = if pe == 1.0 { 0.0 } else { (oa - pe) / (1.0 - pe) };
    (oa, f1, kappa)
}

/// Per cropland pixel in row-major order: the mean of every cloud-free
/// observation whose day falls in each window, scaled by 1/10000.
pub fn brute_composite(stack: &SceneStack) -> Vec<[[Option<f64>; BANDS]; TIMESTEPS]> {
    let n = stack.width * stack.height;
    let w = &stack.windows;
    let mut out = Vec::new();
    for p in 0..n {
        if stack.cropland[p] == 0 {
            continue;
        }
        let mut px = [[None; BANDS]; TIMESTEPS];
        for t in 0..TIMESTEPS {
            let (lo, hi) = (w.starts[t], w.starts[t] + w.len);
            let clear: Vec<_> = stack
                .observations
                .iter()
                .filter(|o| o.day >= lo && o.day < hi && o.cloud[p] == 0)
                .collect();
            if clear.is_empty() {
                continue;
            }
            for b in 0..BANDS {
                let total: u64 = clear.iter().map(|o| u64::from(o.bands[b * n + p])).sum();
                px[t][b] = Some(total as f64 / (clear.len() as f64 * 10000.0));
            }
        }
        out.push(px);
    }
    out
}

/// Exhaustive argmin over the post-warmup epochs, earliest on ties.
pub fn brute_select(totals: &[f64], warmup: usize) -> usize {
    let min = totals[warmup..].iter().copied().fold(f64::INFINITY, f64::min);
    (warmup..totals.len()).find(|&i| totals[i] == min).unwrap()
}
