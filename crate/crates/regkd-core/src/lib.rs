//! Core library for building regulation-grounded instruction-tuning datasets
//! by response-based distillation from a teacher model.
//!
//! Everything in this crate is deterministic and free of IO: corpus
//! segmentation, the canonical JSONL record format, prompt templates with an
//! offline mock teacher, generation orchestration, rule-based data auditing,
//! the tiered evaluation harness, and resource/convergence analysis. Remote
//! teacher access, file handling, and the command line live in the companion
//! `regkd-cli` crate, which plugs in through the [`teacher::TeacherClient`]
//! and [`eval::ModelAdapter`] traits.
//!
//! The crate is `no_std` (with `alloc`), so the same pipeline logic can be
//! embedded anywhere a deterministic reference implementation is useful.

#![no_std]
#![deny(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod audit;
pub mod corpus;
pub mod dataset;
pub mod eval;
pub mod generate;
pub mod resources;
pub mod rng;
pub mod teacher;
pub mod text;

pub use corpus::{Article, CorpusIndex, RegulationDocument};
pub use dataset::{DatasetPhase, InstructionRecord, RecordKind, RecordMeta, RecordOrigin};
pub use teacher::{ChatExchange, PromptTemplate, TeacherClient, TeacherConfig};
