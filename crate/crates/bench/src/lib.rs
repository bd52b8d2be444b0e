//! Shared fixtures for the criterion benchmarks.

use qhdkit::bench::builtin;
use qhdkit::Problem;

/// Unit-box working problem of a built-in instance.
pub fn working(id: &str) -> Problem {
    builtin(id).expect("known instance").problem.normalize_to_unit_box()
}
