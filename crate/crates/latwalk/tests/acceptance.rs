//! Full acceptance gate: every registered check runs at its production
//! configuration and must pass. One line is printed per check; run with
//! `cargo test --test acceptance -- --nocapture` to watch progress.

use latwalk::verify::registry;

#[test]
fn acceptance_suite() {
    let mut failures = Vec::new();
    for check in registry() {
        let started = std::time::Instant::now();
        match check.run() {
            Ok(out) => {
                println!(
                    "{}: {}  [{:.1}s]  {}",
                    out.name,
                    if out.pass { "PASS" } else { "FAIL" },
                    started.elapsed().as_secs_f64(),
                    out.detail
                );
                if !out.pass {
                    failures.push(format!("{}: {}", out.name, out.detail));
                }
            }
            Err(e) => {
                println!(
                    "{}: ERROR  [{:.1}s]  {e}",
                    check.name(),
                    started.elapsed().as_secs_f64()
                );
                failures.push(format!("{}: error: {e}", check.name()));
            }
        }
    }
    assert!(
        failures.is_empty(),
        "{} acceptance check(s) failed:\n{}",
        failures.len(),
        failures.join("\n")
    );
}
