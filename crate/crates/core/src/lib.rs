//! Compositional verification of polyglot state-machine systems.

pub mod checker;
pub mod codegen;
pub mod engine;
pub mod example;
pub mod il;
pub mod minilang;
pub mod model;
pub mod oracles;
