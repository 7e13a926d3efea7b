pub mod attack;
pub mod config;
pub mod gasf;
pub mod market;
pub mod nn;
pub mod patterns;
pub mod render;
