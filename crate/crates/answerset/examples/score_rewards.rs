//! Reward breakdowns for single- and multi-answer generations, with the
//! format gate applied. Run with `cargo run --example score_rewards`.

use answerset::reward::{
    apply_format_gate, multi_brier, rlcr_multi_reward, rlcr_single_reward, rlvr_multi_reward,
    RewardBreakdown,
};
use answerset::tagparse::{parse, validate_format, NRegime, RawGeneration, TagSchema};
use answerset::verify::{verify_set, GoldSpec};

fn main() {
    // A differential-diagnosis style gold set: several answers are
    // simultaneously correct.
    let gold = GoldSpec::new([
        "Pneumonia",
        "Pulmonary neoplasm",
        "Bronchitis",
        "Tuberculosis",
        "Possible NSTEMI / STEMI",
        "GERD",
        "Unstable angina",
        "Pericarditis",
        "Stable angina",
    ])
    .unwrap();
    println!("gold set: {} distinct answers\n", gold.n());

    let answers = ["Pulmonary Embolism", "Pneumonia", "Tuberculosis"];
    let bits = verify_set(&answers, &gold);
    println!("candidates {answers:?}");
    println!("  correctness bits: {:?}", bits.bits);
    println!("  set reward:       {}", rlvr_multi_reward(&answers, &gold));

    let confidences = [0.45, 0.35, 0.20];
    println!("  with confidences {confidences:?}:");
    println!(
        "    multi-brier penalty: {:.4}",
        multi_brier(&answers, &confidences, &gold)
    );
    println!(
        "    combined reward:     {:.4}",
        rlcr_multi_reward(&answers, &confidences, &gold)
    );

    println!("\nsingle-answer rewards:");
    for (answer, q) in [("Tuberculosis", 0.95), ("Pulmonary Embolism", 0.75)] {
        println!(
            "  {answer:<20} q={q:.2} -> {:.4}",
            rlcr_single_reward(answer, q, &gold)
        );
    }

    // The gate zeroes everything when the output breaks the format rules.
    let schema = TagSchema::multi(3, false, NRegime::MultiGold).unwrap();
    let text = "<think>t</think><answer1>Pneumonia</answer1>\
                <answer2>GERD</answer2><answer3>pneumonia</answer3>";
    let parsed = parse(&RawGeneration::new(text, 0), &schema);
    let verdict = validate_format(&parsed, &schema);
    let gated = apply_format_gate(
        RewardBreakdown::ungated(rlvr_multi_reward(&parsed.answers, &gold), 0.0),
        &verdict,
    );
    println!("\nduplicate set {:?}:", parsed.answers);
    println!("  ungated correctness: {}", gated.correctness_sum);
    println!("  gated total:         {} (format gate fired)", gated.total);
}
