//! A laboratory for stochastic approximation with decreasing steps.
//!
//! The crate simulates `x_{n+1} = x_n + a(n) (h(x_n) + M_{n+1})`, compares it
//! with the flow of `x' = h(x)` block by block, and estimates tightness,
//! lock-in probabilities, and sample complexity by seeded Monte Carlo.

pub mod analysis;
pub mod config;
pub mod engine;
pub mod noise;
pub mod problem;
pub mod replica;
pub mod run;
pub mod schedule;
pub mod stats;
