#![allow(dead_code)]

#[path = "../../../core/tests/support/oracles.rs"]
pub mod oracles;
#[path = "../../../core/tests/support/synthetic.rs"]
pub mod synthetic;

pub mod fixtures;
