//! Desk-scale federated training environment.

pub mod model;
pub mod problem;
pub mod train;
