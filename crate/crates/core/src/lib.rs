//! Simulation and analysis toolkit for an open plano-concave microcavity coupled to the
//! zero phonon line of a solid-state emitter.
//!
//! The crate is organised around the physical pipeline:
//!
//! * [`spectrum`] — emitter spectra (ZPL doublet + phonon sideband), synthesis, integration,
//!   Debye-Waller extraction and Gaussian peak fitting.
//! * [`cavity`] — Hermite-Gauss mode structure of the plano-concave resonator: Rayleigh range,
//!   mode volume, resonance ladder, finesse/Q relations and the maximum Purcell factor.
//! * [`dbr`] — one-dimensional transfer-matrix electromagnetics for the Bragg mirrors:
//!   reflectivity, stop bands, penetration depths and standing-wave field profiles.
//! * [`dipole`] — dipole-pair geometry: polar/azimuthal angles from polarisation data, thermal
//!   branching, and the cavity overlap factors ξ.
//! * [`purcell`] — the coupling model itself: Lorentzian mode filtering, axial spectra, the ZPL
//!   coupling integral, cavity-filtered spectra, tuning scans and rate composition.
//! * [`inhom`] — ensemble averaging over a distribution of cavity positions: decay curves and
//!   the initial-slope rate enhancement.
//! * [`analysis`] — experimental reductions: saturation fits, lifetime fits, photon-correlation
//!   background correction.
//! * [`config`] — the run configuration document shared by the CLI and the reproduction suite.
//! * [`reproduce`] — the one-shot verification table comparing computed quantities against their
//!   reference values.
//!
//! All types are immutable after construction and all operations are pure functions; everything
//! is `Send + Sync` and safe to evaluate concurrently.

pub mod analysis;
pub mod cavity;
pub mod config;
pub mod dbr;
pub mod dipole;
pub mod fit;
pub mod inhom;
pub mod output;
pub mod purcell;
pub mod quad;
pub mod reproduce;
pub mod spectrum;

/// Boltzmann constant in meV/K.
pub const K_B_MEV_PER_K: f64 = 0.0861733;

/// hc in eV·nm, used to convert energy splittings to wavelength splittings.
pub const HC_EV_NM: f64 = 1239.841984;
