//! Holds the full-scale acceptance tests; see `tests/acceptance.rs`.
