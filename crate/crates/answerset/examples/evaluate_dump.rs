//! Run the full evaluation pipeline on the bundled sample dump and print one
//! metrics line per (method, source) group plus a reliability curve.
//! Run with `cargo run --example evaluate_dump`.

use std::path::Path;

use answerset::harness::{evaluate, ingest, RunConfig};

fn main() {
    let dump = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/data/sample_dump.jsonl");
    let ingested = ingest(&dump).expect("bundled dump is readable");
    println!(
        "ingested {} records ({} rejected lines)\n",
        ingested.records.len(),
        ingested.issues.len()
    );

    let config = RunConfig {
        seed: 123,
        ..RunConfig::default()
    };
    let report = evaluate(&ingested.records, &config).expect("evaluation succeeds");

    for group in &report.groups {
        let r = &group.report;
        println!("{} [{}]", group.method, group.source.label());
        println!("  coverage (fraction):   {:.4}", r.coverage_mean);
        println!("  avg # correct per set: {:.4}", r.correct_count);
        println!(
            "  pass@1 / pass@k:       {:.4} / {:.4}",
            r.pass1, r.pass_at_k
        );
        println!("  uniqueness (mean):     {:.4}", r.uniqueness_mean);
        println!("  avg token total:       {:.1}", r.avg_token_total);
        if let (Some(b1), Some(bp)) = (r.brier_top1, r.brier_pooled) {
            println!("  brier top-1 / pooled:  {b1:.4} / {bp:.4}");
        }
        if let (Some(e1), Some(ep), Some(se)) = (r.ece_top1, r.ece_pooled, r.set_ece) {
            println!("  ece top-1 / pooled:    {e1:.4} / {ep:.4}");
            println!("  set ece:               {se:.4}");
        }
        if r.n_invalid > 0 {
            println!(
                "  ({} records entered as all-wrong after parse failures)",
                r.n_invalid
            );
        }
        println!();
    }

    if let Some(group) = report
        .groups
        .iter()
        .find(|g| g.curves.contains_key("pooled"))
    {
        println!("pooled reliability curve for {}:", group.method);
        println!("  bin          n   conf    acc");
        for bin in &group.curves["pooled"] {
            if bin.count == 0 {
                continue;
            }
            println!(
                "  [{:.1},{:.1})  {:3}   {:.3}  {:.3}",
                bin.lo,
                bin.hi,
                bin.count,
                bin.mean_conf.unwrap(),
                bin.mean_acc.unwrap()
            );
        }
    }
}
