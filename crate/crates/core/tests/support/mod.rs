pub mod oracles;
pub mod synthetic;
