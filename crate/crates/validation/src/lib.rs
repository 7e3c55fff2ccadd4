//! Acceptance checks that exercise the whole workspace end to end.
//!
//! Everything lives in `tests/acceptance.rs`; run it with
//! `cargo test -p tofmpi-validation --test acceptance -- --nocapture`.
//! Each check prints one `ACCEPTANCE <n> PASS|FAIL` line.
