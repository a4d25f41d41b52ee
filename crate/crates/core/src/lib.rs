//! Desk-scale speech synthesis workbench.
//!
//! Implements the classical SPSS back-end pieces needed to cross-compare
//! acoustic models (RNN, shallow-autoregressive, GAN postfilter) and waveform
//! generators (source-filter vocoder, Griffin-Lim phase recovery, conditional
//! Wavenet), plus the diagnostics used to inspect them (global variance,
//! modulation spectrum, instantaneous frequency).

pub mod acoustic;
pub mod features;
pub mod neural;
pub mod signal;
pub mod vocoder;
pub mod wavenet;
