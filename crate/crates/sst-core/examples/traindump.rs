//! Scratch: inspect one training run in detail.

use sst_core::corpus::{generate_synthetic, SyntheticSpec};
use sst_core::experiment::{run_classification, ExperimentConfig};
use sst_core::sampling::SamplerKind;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let sampler: SamplerKind = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(SamplerKind::Soft);
    let seed: u64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(1);
    let lr: f64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(0.01);

    let spec = SyntheticSpec { seed: 1000 + seed, ..SyntheticSpec::default() };
    let (train, _) = generate_synthetic(&spec, 600).unwrap();
    let spec_t = SyntheticSpec { seed: 2000 + seed, ..SyntheticSpec::default() };
    let (test, _) = generate_synthetic(&spec_t, 300).unwrap();

    let cfg = ExperimentConfig { sampler, matcher_lr: lr, seed, ..ExperimentConfig::default() };
    let outcome = run_classification(&train, &test, &cfg).unwrap();
    println!("loss curve: {:?}", outcome.loss_curve.iter().map(|l| (l * 1000.0).round() / 1000.0).collect::<Vec<_>>());
    println!("weights:    {:?}", outcome.matcher.weights.map(|w| (w * 1000.0).round() / 1000.0));
    println!("accuracy:   {:.3}  (P {:.3} R {:.3} F1 {:.3})", outcome.report.accuracy, outcome.report.precision, outcome.report.recall, outcome.report.f1);
    println!("confusion:  tp {} fp {} tn {} fn {}", outcome.report.tp, outcome.report.fp, outcome.report.tn, outcome.report.fn_);

    let mut pos: Vec<f64> = outcome.predictions.iter().filter(|(_, _, l)| *l == 1).map(|(_, s, _)| *s).collect();
    let mut neg: Vec<f64> = outcome.predictions.iter().filter(|(_, _, l)| *l == 0).map(|(_, s, _)| *s).collect();
    pos.sort_by(f64::total_cmp);
    neg.sort_by(f64::total_cmp);
    let q = |v: &[f64], p: f64| v[((v.len() - 1) as f64 * p) as usize];
    println!("pos scores: p10 {:.3} p50 {:.3} p90 {:.3}", q(&pos, 0.1), q(&pos, 0.5), q(&pos, 0.9));
    println!("neg scores: p10 {:.3} p50 {:.3} p90 {:.3}", q(&neg, 0.1), q(&neg, 0.5), q(&neg, 0.9));
}
