//! End-to-end acceptance checks for `offload-core`; see `tests/acceptance.rs`.
