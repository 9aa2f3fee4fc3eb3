//! Codon-based artificial-life soup.

pub mod alphabet;
pub mod ancestor;
pub mod ecology;
pub mod genome;
pub mod isa;
pub mod lab;
pub mod mutation;
pub mod rng;
pub mod vm;
