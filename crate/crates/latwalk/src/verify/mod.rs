//! Verification harness: envelope fits, comparability and Poincare audits,
//! counterexample scans, and the named acceptance checks.
//!
//! Every check avoids assuming any particular constant: claims of the form
//! `A ≍ B` become ratio bands tested for scale stability, and two-sided
//! bounds become supporting envelopes whose per-bin spread is the testable
//! number.

pub mod audits;
pub mod checks;
pub mod fits;

pub use audits::{
    comparability_audit, gaussian_sandwich_fit, ondiag_exponent_fit, ondiag_grid, poincare_audit,
    recurrence_probe, tent_counterexample_scan, AuditReport, ComparabilitySpec, OndiagPoint,
    SandwichFit, SandwichSpec, Verdict,
};
pub use checks::{registry, run_check, Check, CheckOutcome};
pub use fits::{fit_envelopes, least_squares, log_log_slope, BoundFit, EnvelopeSample, LineFit};
