//! Parse structured generations and inspect the violations the parser
//! records. Run with `cargo run --example parse_generations`.

use answerset::tagparse::{
    parse, parse_with_options, validate_format, NRegime, ParseOptions, RawGeneration, TagSchema,
};

fn show(label: &str, raw: &RawGeneration, schema: &TagSchema) {
    let parsed = parse(raw, schema);
    println!("== {label}");
    println!("   answers:     {:?}", parsed.answers);
    if let Some(confs) = &parsed.confidences {
        println!("   confidences: {confs:?}");
    }
    let codes: Vec<&str> = parsed.violations.iter().map(|v| v.code()).collect();
    println!("   violations:  [{}]", codes.join(", "));
    let verdict = validate_format(&parsed, schema);
    println!(
        "   format gate: {}",
        if verdict.ok { "pass" } else { "FAIL" }
    );
    println!();
}

fn main() {
    let multi = TagSchema::multi(3, true, NRegime::SingleGold).unwrap();

    let clean = RawGeneration::new(
        "<think>TB fits the wasting and hemoptysis; pneumonia fits the fever; \
         bronchitis is possible but weaker.</think>\
         <answer1>Tuberculosis</answer1><confidence1>0.40</confidence1>\
         <answer2>Pneumonia</answer2><confidence2>0.30</confidence2>\
         <answer3>Bronchitis</answer3><confidence3>0.30</confidence3>",
        412,
    );
    show(
        "well-formed calibrated set (confidences sum to 1.00)",
        &clean,
        &multi,
    );

    let duplicate = RawGeneration::new(
        "<think>t</think>\
         <answer1>Pneumonia</answer1><confidence1>0.5</confidence1>\
         <answer2>Bronchitis</answer2><confidence2>0.2</confidence2>\
         <answer3> pneumonia. </answer3><confidence3>0.2</confidence3>",
        398,
    );
    show(
        "duplicate answer under canonicalization",
        &duplicate,
        &multi,
    );

    let oversum = RawGeneration::new(
        "<think>t</think>\
         <answer1>A</answer1><confidence1>0.5</confidence1>\
         <answer2>B</answer2><confidence2>0.4</confidence2>\
         <answer3>C</answer3><confidence3>0.2</confidence3>",
        56,
    );
    show(
        "confidence sum 1.1 in the single-gold regime",
        &oversum,
        &multi,
    );

    let single = TagSchema::single(true, NRegime::MultiGold);
    let percentage = RawGeneration::new(
        "<think>settling on tuberculosis</think> <answer>Tuberculosis\n</answer>\n\
         <confidence>95.</confidence>",
        498,
    );
    show("percentage confidence, strict mode", &percentage, &single);

    let lenient = parse_with_options(
        &percentage,
        &single,
        ParseOptions {
            lenient_confidence: true,
        },
    );
    println!("== same text with --lenient-confidence");
    println!("   confidences: {:?}", lenient.valid_confidences());
    println!("   warnings:    {:?}", lenient.warnings);
}
