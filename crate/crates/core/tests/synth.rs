//! Synthetic domains and scenes: shift model, round trip through the
//! preprocessor, and learnability of the benchmark.

use cropgan_core::classifier::{predict, split_dataset, train_classifier, ClassifierConfig, SplitSpec};
use cropgan_core::metrics::confusion;
use cropgan_core::preprocess::{ndvi, preprocess, save_scene};
use cropgan_core::synth::{make_domain, make_scene, DomainShift, DomainSpec, Preset, SceneSpec};
use cropgan_core::{LabeledDataset, TIMESTEPS};

#[test]
fn day_shift_equals_moved_windows() {
    for d in [-30i32, -10, 0, 12] {
        let shifted = DomainSpec::new(
            25,
            DomainShift {
                day_shift: f64::from(d),
                ..DomainShift::default()
            },
            5,
        );
        let mut moved = DomainSpec::new(25, DomainShift::default(), 5);
        moved.windows = moved.windows.offset(-d);
        let a = make_domain(&shifted, "a").unwrap();
        let b = make_domain(&moved, "b").unwrap();
        let worst = a
            .samples
            .iter()
            .zip(&b.samples)
            .flat_map(|(x, y)| x.flat().zip(y.flat()).map(|(u, v)| (u - v).abs()).collect::<Vec<_>>())
            .fold(0.0, f64::max);
        assert!(worst <= 1e-12, "shift {d}: {worst:e}");
    }
}

fn mean_ndvi(ds: &LabeledDataset, label: u8) -> [f64; TIMESTEPS] {
    let labels = ds.labels.as_ref().unwrap();
    let mut sum = [0.0; TIMESTEPS];
    let mut n = 0.0;
    for (s, _) in ds.samples.iter().zip(labels).filter(|(_, &l)| l == label) {
        for (acc, v) in sum.iter_mut().zip(ndvi(s)) {
            *acc += v;
        }
        n += 1.0;
    }
    sum.map(|v| v / n)
}

fn argmax(v: &[f64]) -> usize {
    (0..v.len()).fold(0, |best, i| if v[i] > v[best] { i } else { best })
}

fn clean(n: usize, shift: DomainShift, seed: u64) -> LabeledDataset {
    let mut spec = DomainSpec::new(n, DomainShift { noise_std: 0.0, ..shift }, seed);
    spec.jitter = cropgan_core::synth::Jitter::NONE;
    make_domain(&spec, "d").unwrap()
}

#[test]
fn canada_like_peak_arrives_three_slots_earlier() {
    let src = mean_ndvi(&clean(4, DomainShift::default(), 1), 1);
    let tgt = mean_ndvi(&clean(4, Preset::CanadaLike.shift(), 1), 1);
    assert_eq!(argmax(&src), argmax(&tgt) + 3, "source {src:?} target {tgt:?}");
}

#[test]
fn china_like_peak_is_higher() {
    let src = mean_ndvi(&clean(4, DomainShift::default(), 1), 1);
    let tgt = mean_ndvi(&clean(4, Preset::ChinaLike.shift(), 1), 1);
    let max = |v: &[f64]| v.iter().copied().fold(f64::MIN, f64::max);
    assert!(max(&tgt) > max(&src));
}

#[test]
fn nearest_ndvi_centroid_separates_classes() {
    let train = make_domain(&DomainSpec::new(300, DomainShift::default(), 2), "train").unwrap();
    let test = make_domain(&DomainSpec::new(300, DomainShift::default(), 3), "test").unwrap();
    let (corn, other) = (mean_ndvi(&train, 1), mean_ndvi(&train, 0));
    let dist = |a: &[f64; TIMESTEPS], b: &[f64; TIMESTEPS]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>();
    let pred: Vec<u8> = test.samples.iter().map(|s| u8::from(dist(&ndvi(s), &corn) < dist(&ndvi(s), &other))).collect();
    let f1 = confusion(&pred, test.labels.as_ref().unwrap()).unwrap().f1();
    assert!(f1 >= 0.9, "nearest-centroid F1 {f1}");
}

#[test]
fn unshifted_domains_transfer() {
    let source = make_domain(&DomainSpec::new(300, DomainShift::default(), 10), "source").unwrap();
    let target = make_domain(&DomainSpec::new(300, DomainShift::default(), 11), "target").unwrap();
    let (train, val, _) = split_dataset(&source, &SplitSpec::new(0)).unwrap();
    let config = ClassifierConfig {
        epochs: 30,
        ..ClassifierConfig::new(0)
    };
    let clf = train_classifier(&train, &val, &config).unwrap();
    let pred = predict(&clf.checkpoint.network, &target).unwrap();
    let f1 = confusion(&pred.labels, target.labels.as_ref().unwrap()).unwrap().f1();
    assert!(f1 >= 0.95, "F1 on the unshifted target {f1}");
}

fn scene_spec(cloud: f64, noise: f64) -> SceneSpec {
    let shift = DomainShift {
        noise_std: noise,
        ..DomainShift::default()
    };
    let mut spec = SceneSpec::new(12, 8, 4, DomainSpec::new(1, shift, 21));
    spec.cloud_gap_prob = cloud;
    spec
}

#[test]
fn clear_scene_round_trips_through_the_preprocessor() {
    let scene = make_scene(&scene_spec(0.0, 0.0)).unwrap();
    let (ds, report) = preprocess(&scene.stack, "scene").unwrap();
    assert_eq!(report.dropped, 0);
    assert_eq!(report.retained + report.non_cropland, report.pixels);
    let coords = ds.coords.as_ref().unwrap();
    let mut worst: f64 = 0.0;
    for (s, &(x, y)) in ds.samples.iter().zip(coords) {
        let r = &scene.reference[y as usize * 12 + x as usize];
        for (a, b) in s.flat().zip(r.flat()) {
            worst = worst.max((a - b).abs());
        }
    }
    assert!(worst <= 5e-5, "max error {worst:e}");
    let truth = scene.stack.truth.as_ref().unwrap();
    for (&l, &(x, y)) in ds.labels.as_ref().unwrap().iter().zip(coords) {
        assert_eq!(l, truth[y as usize * 12 + x as usize]);
    }
}

#[test]
fn corn_fraction_is_met_to_one_field() {
    let scene = make_scene(&scene_spec(0.0, 0.02)).unwrap();
    let truth = scene.stack.truth.as_ref().unwrap();
    let corn = truth.iter().filter(|&&t| t == 1).count();
    // Six 4×4 fields, half of them corn.
    assert!(corn.abs_diff(3 * 16) <= 16, "{corn} corn pixels");
}

#[test]
fn cloudy_scene_still_accounts_for_every_pixel() {
    let scene = make_scene(&scene_spec(0.4, 0.02)).unwrap();
    let (ds, report) = preprocess(&scene.stack, "scene").unwrap();
    assert_eq!(report.retained + report.dropped + report.non_cropland, 96);
    assert!(ds.samples.iter().all(|s| s.in_unit_range()));
}

#[test]
fn same_seed_writes_identical_scene_directories() {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        save_scene(&make_scene(&scene_spec(0.3, 0.02)).unwrap().stack, d.path()).unwrap();
    }
    let mut names: Vec<_> = std::fs::read_dir(dirs[0].path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.len() > 3);
    for name in names {
        let a = std::fs::read(dirs[0].path().join(&name)).unwrap();
        let b = std::fs::read(dirs[1].path().join(&name)).unwrap();
        assert_eq!(a, b, "{name:?}");
    }
}
