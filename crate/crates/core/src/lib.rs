//! Domain-randomized synthetic ECG generation.
//!
//! The generator draws waveform, heart-rhythm and noise parameters from
//! scalable ranges, synthesizes labelled single-lead ECG segments and
//! conditions them for sequence-labelling r-wave detectors. The detection side
//! turns per-sample probabilities back into peak indices and scores them.
//!
//! ```
//! use ecg_synth::dataset::{next_example, GenerationConfig};
//! use ecg_synth::param_space::{default_space, Scaling};
//!
//! let space = default_space().with_scaling(Scaling::uniform(3.0));
//! let config = GenerationConfig::new(space, 7);
//! let example = next_example(&config, None, 0).unwrap();
//! assert_eq!(example.signal.len(), 1000);
//! ```

#![allow(
    clippy::neg_cmp_op_on_partial_ord,
    clippy::needless_range_loop,
    clippy::large_enum_variant
)]

pub mod artefact;
pub mod conditioning;
pub mod dataset;
pub mod error;
pub mod io;
pub mod metrics;
pub mod noise;
pub mod param_space;
pub mod postprocess;
pub mod rr;
pub mod seed;
pub mod waveform;

pub use error::{Error, Result};
