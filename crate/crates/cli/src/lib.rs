//! Command line and HTTP front ends for running smart light experiments.

pub mod api;
pub mod cli;
pub mod http;
pub mod service;
