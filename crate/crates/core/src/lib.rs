//! First-order relativistic corrections to Gaussian wave packets in a
//! harmonic trap, with an exact truncated-Fock-basis reference.
//!
//! The oscillator is H = p²/2m + mω²q²/2 − p⁴/(8m³c²). The perturbative
//! engine ([`dynamics`]) assembles the O(1/c²) corrections to the packet
//! widths from channel coefficients ([`coeffs`]) and static Gaussian
//! covariances ([`gaussian`]); [`fock`] propagates the same packet exactly
//! and checks the engine order by order.

pub mod coeffs;
pub mod dynamics;
mod error;
pub mod fock;
pub mod gaussian;
pub mod params;
pub mod quadrature;

pub use coeffs::{CoeffChannel, CoeffDiscrepancy, CoeffSet, CoeffSource, Mixing, Side};
pub use dynamics::{DiscrepancyReport, MomentSeries, ProductForm, ScalingSample, SecularFit};
pub use error::{Error, Result};
pub use fock::{FockConfig, FockState, OperatorMatrix};
pub use gaussian::{CovarianceTable, MomentKind, WeylOrder, WeylSpec, Word};
pub use params::{
    eta_e, ground_packet, to_natural, GaussianPacket, OscillatorParams, ScaleRecord,
    ValidityDiagnostics, ValidityThresholds,
};
