//! File formats, constants cache, Monte Carlo harness and command line for
//! [`fbmest_core`].

pub mod cache;
pub mod cli;
pub mod config;
pub mod io;
pub mod mc;
