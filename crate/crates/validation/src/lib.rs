//! Fixtures and reference implementations for the acceptance suite. The
//! phantom builders and oracles are shared with the core crate's own tests.

#[path = "../../core/tests/common/mod.rs"]
mod common;

pub use common::*;

/// Print one verdict line and hand the outcome back for asserting.
pub fn verdict(n: u32, title: &str, pass: bool, detail: impl std::fmt::Display) -> bool {
    let tag = if pass { "PASS" } else { "FAIL" };
    println!("criterion {n:>2} {tag} {title}: {detail}");
    pass
}
