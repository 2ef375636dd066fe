//! Simulation and analysis toolkit for measuring the complex expectation
//! value of a non-Hermitian polarization operator.
//!
//! Two routes are modeled side by side:
//!
//! * a Mach–Zehnder interferometer with `R` in one arm and `U†` in the other,
//!   where `|⟨A⟩|` and the weak value of `R` follow from fringe visibilities
//!   ([`mzi`], [`synth`], [`fit`]);
//! * a conventional weak measurement of `R = Π_H` with a birefringent beam
//!   displacer, where the weak value follows from the pointer centroid shift
//!   ([`weakmeas`]).
//!
//! [`jones`] holds the shared 2×2 algebra, including the polar decomposition
//! `A = U·R` that links the two.

pub mod fit;
pub mod io;
pub mod jones;
pub mod mzi;
pub mod quad;
pub mod synth;
pub mod weakmeas;

pub use jones::{JonesMatrix, JonesVector, PolarDecomposition};
pub use mzi::{MziConfig, VisibilityResult};
pub use synth::{DetectorConfig, FringeModelParams, FringeProfile};
