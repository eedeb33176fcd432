//! Numerical toolkit for Ruelle-Pollicott resonances of hyperbolic flows.
//!
//! The crate builds the phase-space objects used in the semiclassical approach
//! to transfer operators: the anisotropic metric `g`, wave packets and the
//! Bargmann transform, anti-Wick quantization with weighted Sobolev norms,
//! escape functions, and two exactly solvable resonance models (a weighted
//! shift and the suspension of the cat map). A box-counting module covers the
//! fractal Weyl exponent for Hölder one-forms.
//!
//! Every module is pure and deterministic given its seed; the `ruelle` binary
//! wraps them into reproducible experiments.

pub mod bracket_metric;
pub mod cli;
pub mod config;
pub mod error;
pub mod escape;
pub mod fractal_count;
pub mod numerics;
pub mod quantize;
pub mod shift_model;
pub mod suspension;
pub mod verify;
pub mod wavepackets;

pub use bracket_metric::{jbracket, MetricParams, PhasePoint};
pub use error::{Error, Result};
