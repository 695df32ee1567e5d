// `!(x > 0.0)` is how configs reject NaN as well as non-positive values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bc;
pub mod dystil;
pub mod gridworld;
pub mod harness;
pub mod llm_client;
pub mod policy;
pub mod ppo;
pub mod rng;
pub mod strategy;
pub mod textgen;
pub mod trajectory;
