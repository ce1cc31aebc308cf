//! End-to-end acceptance checks live in `tests/acceptance.rs`. Run them with
//! `cargo test -p ifa-validation --test acceptance`; pass a criterion id
//! (`T3`) to run a single one.
