//! Measurement-induced nonlinear operators for linear optics.
//!
//! Beam-splitter networks are described at the level of mode operators
//! ([`interferometer::ModeUnitary`]), lifted to truncated Fock spaces with
//! permanents, and conditioned on ancilla detection outcomes to produce
//! non-unitary [`conditioning::ConditionalOperator`]s. On top of that sit the
//! gate recipes in [`gates`], the seeded Nelder–Mead search in [`optimizer`]
//! and the absorbing-element and detector models in [`lossy`].
//!
//! The crate is `no_std` and only needs `alloc`. Enable the `parallel`
//! feature to evaluate optimizer restarts on a rayon pool.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(any(feature = "std", test))]
extern crate std;

pub mod conditioning;
pub mod error;
pub mod float;
pub mod fock;
pub mod gates;
pub mod interferometer;
pub mod linalg;
pub mod lossy;
pub mod optimizer;
pub mod permanent;
pub mod rng;

pub use error::{Error, Result};
pub use linalg::{CMatrix, C64};
