pub mod cli;
pub mod config;
pub mod exact;
pub mod fidelity;
pub mod manifest;
pub mod metrics;
pub mod model;
pub mod network;
pub mod saturation;
pub mod torque;
