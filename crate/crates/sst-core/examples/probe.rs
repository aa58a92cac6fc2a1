//! Scratch harness: sampler ordering on the synthetic corpus.

use sst_core::corpus::{generate_synthetic, SyntheticSpec};
use sst_core::experiment::{run_classification, ExperimentConfig};
use sst_core::sampling::SamplerKind;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let train_n: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(400);
    let test_n: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(200);
    let seeds: u64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(3);
    let lr: f64 = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(0.1);

    for kind in [SamplerKind::Soft, SamplerKind::Hard, SamplerKind::Uniform, SamplerKind::Random, SamplerKind::Negative] {
        let mut accs = Vec::new();
        for seed in 0..seeds {
            let spec = SyntheticSpec { seed: 1000 + seed, ..SyntheticSpec::default() };
            let (mut all, _) = generate_synthetic(&spec, train_n + test_n).unwrap();
            let test = all.split_off(train_n);
            let train = all;
            let epochs: usize = std::env::var("EPOCHS").ok().and_then(|v| v.parse().ok()).unwrap_or(10);
            let cfg = ExperimentConfig {
                sampler: kind,
                matcher_lr: lr,
                epochs,
                seed,
                ..ExperimentConfig::default()
            };
            let t0 = std::time::Instant::now();
            let outcome = run_classification(&train, &test, &cfg).unwrap();
            accs.push(outcome.report.accuracy);
            if seed == 0 {
                eprintln!("  ({kind} seed0 took {:?})", t0.elapsed());
            }
        }
        let mean = accs.iter().sum::<f64>() / accs.len() as f64;
        println!(
            "{kind:>9}: mean acc {:.4}  per-seed {:?}",
            mean,
            accs.iter().map(|a| (a * 1000.0).round() / 1000.0).collect::<Vec<_>>()
        );
    }
}
