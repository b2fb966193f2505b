//! Frame-domain neural emulation of LFO-driven audio modulation effects.
//!
//! The crate has three layers:
//!
//! * Reference DSP: sample-accurate phaser and flanger implementations plus
//!   test-signal generators ([`signal`], [`oracle`]). These render the
//!   ground-truth audio the neural model is trained against.
//! * A small reverse-mode autodiff engine over dense `f64` matrices
//!   ([`autodiff`]) and a windowed DFT analysis/synthesis pipeline built on
//!   it ([`spectral`]).
//! * The model itself ([`model`]): a trainable sinusoid bank feeding an LSTM
//!   and a FiLM-conditioned MLP that predicts one complex transfer function
//!   per analysis frame, applied multiplicatively to the dry spectrogram.
//!   Training ([`train`]), losses ([`loss`]) and evaluation ([`eval`]) sit
//!   on top, with a CLI front end in [`cli`].

pub mod autodiff;
pub mod cli;
pub mod error;
pub mod eval;
pub mod loss;
pub mod model;
pub mod oracle;
pub mod signal;
pub mod spectral;
pub mod train;

pub use error::{Error, Result};
