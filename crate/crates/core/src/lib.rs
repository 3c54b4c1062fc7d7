//! Desk-scale numerical model of an atomic-frequency-comb (AFC) spin-wave
//! optical memory in a Pr³⁺:Y₂SiO₅ crystal.
//!
//! The crate is organised around the stages of a storage experiment:
//!
//! - [`spectrum`] — hyperfine level scheme, spectral-hole-burning preparation
//!   (pit, burn-back, clean, comb) and optical-depth profiles.
//! - [`propagation`] — complex field envelopes sent through a spectral grid
//!   via a Kramers–Kronig transfer function; AFC echo extraction and the
//!   analytic comb-efficiency formulas.
//! - [`spinwave`] — chirped control-pulse transfer (optical Bloch equations),
//!   spin dephasing, and the total-efficiency composition.
//! - [`detection`] — filter/detection chain, noise budget, Poissonian
//!   photon-counting Monte Carlo, SNR estimation.
//! - [`qubit`] — time-bin qubit storage, double-write interference analysis
//!   and the fidelity model.
//! - [`benchmark`] — classical measure-and-prepare fidelity bound for weak
//!   coherent inputs and the quantum/classical crossing.
//! - [`fitkit`] — weighted least-squares fits (linear, Gaussian decay,
//!   sinusoid, fidelity model).
//! - [`harness`] — config-driven experiment runner producing CSV/JSON
//!   reports.
//!
//! All quantities use MHz for frequencies and µs for times so the two are a
//! conjugate Fourier pair. Types are immutable after construction and the
//! operations are pure functions; seeded Monte Carlo paths use per-trial
//! substreams so results do not depend on evaluation order.

pub mod benchmark;
pub mod detection;
pub mod error;
pub mod fitkit;
pub mod fourier;
pub mod harness;
pub mod propagation;
pub mod qubit;
pub mod rng;
pub mod spectrum;
pub mod spinwave;

pub use error::{Error, Result};
pub use propagation::{afc_efficiency_analytic, EchoReport, FieldEnvelope};
pub use spectrum::{CombSpec, HyperfineScheme, SpectralGrid, ToothShape};
pub use spinwave::EfficiencyBreakdown;
