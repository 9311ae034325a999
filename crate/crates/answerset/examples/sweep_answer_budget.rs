//! Train one set policy per answer budget k and tabulate how many distinct
//! correct answers each recovers per set.
//! Run with `cargo run --release --example sweep_answer_budget`.

use answerset::sim::{sweep_k, ToyTask, TrainConfig, TrainMode};

fn main() {
    // 12 possible answers, 6 gold: budgets below N leave headroom, so each
    // extra slot should surface another correct answer.
    let task = ToyTask::new(12, [1, 3, 5, 7, 9, 11]).unwrap();
    let mut base = TrainConfig::new(TrainMode::RlvrMulti, 2);
    base.seed = 7;

    let cells = sweep_k(&task, &base, &[2, 3, 4, 5], 1000).unwrap();
    println!("k   unique correct   coverage");
    for (cell, stats) in &cells {
        println!(
            "{}   {:>14.3}   {:>8.3}   (final mean reward {:.3})",
            cell.k,
            cell.unique_correct,
            cell.coverage_mean,
            stats.mean_reward.last().unwrap()
        );
    }
}
