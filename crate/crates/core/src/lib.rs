pub mod belief;
pub mod config;
pub mod coordinator;
pub mod grid;
pub mod info_gain;
pub mod mcts;
pub mod search;
pub mod sim;
pub mod validate;
