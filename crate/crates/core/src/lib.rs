//! Parser, simulator and verifier for block-based robot programs on a 5x5
//! grid world.
//!
//! The pipeline is `parse_program` -> `lower` -> `execute` -> `check`:
//! Blockly XML becomes a typed AST, the AST is flattened into primitive
//! actions, the actions are simulated one unit step at a time against a
//! [`TaskSpec`](tasks::TaskSpec), and the resulting trace is judged against
//! the task's success rule.

pub mod block_ast;
pub mod cli;
pub mod executor;
pub mod grid;
pub mod oracle;
pub mod server;
pub mod service;
pub mod tasks;
pub mod verdict;
