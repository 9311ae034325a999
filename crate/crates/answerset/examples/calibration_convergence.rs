//! Train a calibrated set policy on stochastically-correct answers and watch
//! the verbalized confidences converge to the true correctness probability.
//! Run with `cargo run --release --example calibration_convergence`.

use answerset::sim::{evaluate_policy, train, ToyTask, TrainConfig, TrainMode};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    // Every answer is correct with probability 0.7 on each draw. The Brier
    // penalty is a proper scoring rule, so the optimal confidence is 0.7 and
    // the optimal expected penalty is p(1-p) = 0.21.
    let p = 0.7;
    let task = ToyTask::new(2, [0, 1])
        .unwrap()
        .with_noise([(0, p), (1, p)])
        .unwrap();

    let mut config = TrainConfig::new(TrainMode::RlcrMulti, 2);
    config.steps = 2000;
    config.group_size = 512;
    config.temperature = 2.0;
    config.seed = 0;

    println!("training 2000 steps (group 512, temperature 2.0)...");
    let (policy, stats) = train(&task, &config).unwrap();
    let brier_series = stats.mean_brier.as_ref().unwrap();
    for step in [0, 250, 500, 1000, 1500, 1999] {
        println!(
            "  step {step:>4}: mean brier penalty {:.4}",
            brier_series[step]
        );
    }

    let mut rng = ChaCha8Rng::seed_from_u64(999);
    let eval = evaluate_policy(&task, &policy, &config, 2000, &mut rng).unwrap();
    println!("\nevaluation over 2000 sampled sets:");
    for id in 0..2 {
        println!(
            "  answer a{id}: mean confidence {:.3} (true p = {p})",
            eval.mean_confidence(id).unwrap()
        );
    }
    println!(
        "  mean multi-brier {:.4} vs analytic floor p(1-p) = {:.2}",
        eval.mean_brier.unwrap(),
        p * (1.0 - p)
    );
}
