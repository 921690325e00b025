//! Qutrit gate compilation, pulse dynamics and state tomography.
// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acceptance;
pub mod cli;
pub mod dynamics;
pub mod error;
pub mod pulses;
pub mod qmath;
pub mod report;
pub mod synth;
pub mod tomo;

pub use error::{Error, Result};
pub use pulses::{Channel, Pulse, PulseSequence, VirtualPhase};
pub use qmath::{DensityMatrix3, Unitary3};
pub use synth::{decompose, Scheme};
