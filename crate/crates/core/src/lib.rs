//! Reconstruction of the complex envelope of a broadband pulse from an SHG
//! spectrogram recorded under families of known phase-only spectral
//! transfer functions.
//!
//! The crate provides the shared grid/field types with a fixed Fourier
//! convention ([`grid`], [`field`]), the transfer-function families and
//! their scan-limit theory ([`phase`]), the spectrogram forward model
//! ([`forward`]), the iterative reconstruction engine ([`engine`]) and a
//! seeded Monte-Carlo benchmark harness ([`bench`]).

pub mod bench;
pub mod engine;
pub mod error;
pub mod field;
pub mod forward;
pub mod grid;
pub mod phase;

pub use error::{Error, Result};
pub use field::{Domain, Field};
pub use grid::Grid;
