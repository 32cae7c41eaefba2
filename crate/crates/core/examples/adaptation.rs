//! Source-trained classifier on a shifted target, with and without
//! adaptation. Usage: adaptation [preset] [seed] [epochs] [n_per_class]

use cropgan_core::benchmark::{run, BenchmarkConfig};
use cropgan_core::synth::Preset;

fn main() -> cropgan_core::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let preset = Preset::from_name(args.get(1).map_or("canada-like", String::as_str)).expect("preset name");
    let seed: u64 = args.get(2).map_or(0, |s| s.parse().expect("seed"));
    let epochs: usize = args.get(3).map_or(300, |s| s.parse().expect("epochs"));
    let n: usize = args.get(4).map_or(1000, |s| s.parse().expect("n_per_class"));

    let mut config = BenchmarkConfig::new(preset, seed);
    config.n_per_class = n;
    config.gan.epochs = epochs;
    config.gan.warmup_epochs = (epochs / 6).min(config.gan.warmup_epochs);
    let r = run(&config)?;
    for rec in r.gan.history.records.iter().step_by((epochs / 15).max(1)) {
        let l = &rec.losses;
        println!(
            "epoch {:3} total {:.4} adv {:.3}/{:.3} cyc {:.4}/{:.4} id {:.4}/{:.4}",
            rec.epoch, rec.total, l.adv_g, l.adv_f, l.cyc_x, l.cyc_y, l.id_g, l.id_f
        );
    }
    println!(
        "{:.1}s source-test F1 {:.4} direct F1 {:.4} adapted F1 {:.4} (epoch {}) delta {:+.4}",
        r.seconds,
        r.source_test.f1,
        r.direct.f1,
        r.adapted.f1,
        r.selected_epoch,
        r.f1_gain()
    );
    Ok(())
}
