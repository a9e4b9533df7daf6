//! Desk-scale sentence-embedding training and retrieval evaluation.
//!
//! The crate trains a small mean-pooled text encoder with two objectives —
//! an in-batch ranking loss over positive pairs, and a dual setup that
//! alternates the ranking loss with a labeled cosine-similarity MSE loss —
//! then evaluates the result with a chunk-based cosine-retrieval benchmark
//! over syllabus-style documents (chunk, embed, retrieve top-k, answer,
//! grade per category).
//!
//! Module map:
//! - [`numerics`]: dense vector/matrix kernels and the finite-difference
//!   gradient oracle
//! - [`encoder`]: tokenizer, vocabulary, and the trainable encoder with its
//!   exact backward pass
//! - [`losses`]: the two training objectives
//! - [`trainer`]: AdamW, warmup-cosine schedule, and the training loops
//! - [`dataset`]: pair formats, batching, and the synthetic corpus generator
//! - [`retrieval`]: word chunking, brute-force cosine index, top-k
//! - [`evaluation`]: the category benchmark with answer backends and grading
//! - [`persist`]: checkpoint and index serialization
//!
//! Hot loops (batch encoding, index building, top-k scans, benchmark cells,
//! per-batch backward passes) run data-parallel under the default `parallel`
//! feature and fall back to sequential loops without it; both paths produce
//! bit-identical results.

pub mod dataset;
pub mod encoder;
pub mod error;
pub mod evaluation;
pub mod losses;
pub mod numerics;
pub mod persist;
pub mod retrieval;
pub mod trainer;

pub use error::{Error, Result};
