//! Apply the code-quality rules to source text: indentation consistency
//! (leading spaces modulo the indent width), line length, trailing
//! whitespace, function length, and import placement.
//!
//! Run with: `cargo run --example code_quality`

use mddkit::constraint::{check_code_quality, CodeQualityRuleSet};

fn main() {
    let rules = CodeQualityRuleSet::default();
    println!(
        "rules: indent={} max-line={} max-function={} trailing-ws={} imports-at-top={}",
        rules.space_per_indent,
        rules.max_line_length,
        rules.max_function_length,
        !rules.trailing_whitespace_allowed,
        rules.imports_at_top_required,
    );

    let clean = "use runtime\n\nagent Probe {\n    on start() {\n        log \"ok\"\n    }\n}\n";
    println!("\nclean snippet: {} violations", check_code_quality("clean.sim", clean, &rules).len());

    let messy = concat!(
        "agent Probe {\n",
        "   log \"three spaces\"\n",      // 3 % 4 != 0
        "\tlog \"tab\"\n",                // tab in indentation
        "    log \"trailing\"   \n",      // trailing whitespace
        "}\n",
        "use late_import\n",              // import after a definition
    );
    println!("messy snippet:");
    for violation in check_code_quality("messy.sim", messy, &rules) {
        println!("  {violation}");
    }

    // The same checks with a custom rule set.
    let tight = CodeQualityRuleSet { max_line_length: 30, ..CodeQualityRuleSet::default() };
    let wide = "log \"this line is comfortably wider than thirty characters\"\n";
    for violation in check_code_quality("wide.sim", wide, &tight) {
        println!("tightened: {violation}");
    }
}
