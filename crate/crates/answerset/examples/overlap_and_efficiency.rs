//! Reasoning-overlap and token-efficiency analysis: how much text repeated
//! independent samples re-instantiate, and how many tokens a set costs under
//! each construction. Run with `cargo run --example overlap_and_efficiency`.

use answerset::calib::{ngram_overlap, token_efficiency, RecordSource, SetRecord};
use answerset::verify::CorrectnessVector;

fn main() {
    // Three independent samples answering the same prompt: the final answers
    // differ, but the reasoning scaffolding is mostly shared.
    let samples = [
        "the patient reports fever chills and a productive cough so an acute \
         infectious process is likely and the top candidate is pneumonia",
        "the patient reports fever chills and a productive cough so an acute \
         infectious process is likely and the top candidate is bronchitis",
        "given fever chills and a productive cough an infectious process is \
         likely and the leading diagnosis is pneumonia",
    ];
    for n in [2, 4, 6] {
        let value = ngram_overlap(&samples, n).unwrap();
        println!("{n}-gram overlap across 3 samples: {value:.3}");
    }
    println!();

    let hand = ["a b c", "a b d"];
    println!(
        "toy pair \"a b c\" vs \"a b d\": bigram overlap = {:.4} (1/3 exactly)\n",
        ngram_overlap(&hand, 2).unwrap()
    );

    // Token efficiency: one k-answer generation vs k separate generations.
    let set_record = |id: &str, tokens: u64, source: RecordSource| {
        SetRecord::new(
            id,
            vec!["x".into(), "y".into(), "z".into()],
            None,
            CorrectnessVector {
                bits: vec![true, true, false],
            },
            tokens,
            source,
        )
        .unwrap()
    };
    let multi: Vec<SetRecord> = (0..50)
        .map(|i| {
            set_record(
                &format!("m{i}"),
                540 + (i % 5) * 10,
                RecordSource::MultiOneGeneration,
            )
        })
        .collect();
    let single: Vec<SetRecord> = (0..50)
        .map(|i| {
            set_record(
                &format!("s{i}"),
                980 + (i % 5) * 10,
                RecordSource::SingleKSamples,
            )
        })
        .collect();
    let ratio = token_efficiency(&multi, &single).unwrap();
    println!(
        "one-generation sets average {:.0} tokens, k-sample sets {:.0}:",
        multi.iter().map(|r| r.token_total as f64).sum::<f64>() / multi.len() as f64,
        single.iter().map(|r| r.token_total as f64).sum::<f64>() / single.len() as f64,
    );
    println!("token efficiency ratio = {ratio:.3} (multi cost / single cost)");
}
