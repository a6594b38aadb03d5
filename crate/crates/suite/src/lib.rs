//! Holds the workspace acceptance suite under `tests/`; run it with
//! `cargo test -p coopcell-suite --test acceptance`.
