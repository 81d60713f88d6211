//! Minimax-regret universal coding: model families, priors, Bayes and tilted
//! mixtures, exact regret evaluation and an arithmetic coder.
//!
//! `no_std` with `alloc`; file formats and the command-line front end live in the
//! companion `minimax-cli` crate.
#![no_std]
// float methods come from `num_traits::Float` without std; once std is anywhere in the
// build graph (tests, the CLI) its inherent methods win and those imports go unused
#![allow(unused_imports)]

extern crate alloc;

pub mod arith_coding;
pub mod error;
pub mod mixtures;
pub mod model_families;
pub mod numeric;
pub mod priors;
pub mod regret_lab;

pub use error::{Error, Result};
