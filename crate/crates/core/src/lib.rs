//! Simulator for a giant atom coupled to a 1D bosonic waveguide at multiple
//! points.
//!
//! The atom (a transmon in the harmonic limit) couples to the waveguide field
//! at legs `x_m` with signed weights `w_m`; field travel time between legs
//! makes the atomic equation of motion a delay differential equation with a
//! memory kernel supported on the pairwise delays `|x_m − x_m'|` (velocity
//! `v = 1` throughout). The crate provides:
//!
//! - [`model`] — layouts, unit conventions, piecewise-constant control
//!   schedules;
//! - [`kernel`] — the deduplicated delay table and the two-group effective
//!   reduction;
//! - [`laplace`] — the transcendental pole equation, residues, and the
//!   analytic amplitudes `χ(t)`, `ξ_k(t)`;
//! - [`dynamics`] — direct RK4 integration of the delay EOM and field
//!   reconstruction from retarded emission;
//! - [`scattering`] — linear-response reflection/transmission, Lamb shift,
//!   side peaks, and the non-Markovian criterion;
//! - [`darkstate`] — dark-mode conditions, amplitudes, bound-state profiles;
//! - [`protocol`] — Gaussian packets and the catch/release experiment.
//!
//! Core math is generic over the scalar type via [`real::Real`]; the `*64`
//! aliases below fix `f64` for ordinary use.

pub mod darkstate;
pub mod dynamics;
pub mod error;
pub mod kernel;
pub mod laplace;
pub mod model;
pub mod protocol;
pub mod quad;
pub mod real;
pub mod scattering;

pub use error::{Error, Result};
pub use real::Real;

/// Default working scalar.
pub type R64 = f64;
/// Complex amplitude over the default scalar.
pub type C64 = num_complex::Complex<f64>;

pub type AtomLayout64 = model::AtomLayout<f64>;
pub type ControlSchedule64 = model::ControlSchedule<f64>;
pub type UnitsDoc64 = model::UnitsDoc<f64>;
pub type DelayTable64 = kernel::DelayTable<f64>;
pub type EffectiveTwoPoint64 = kernel::EffectiveTwoPoint<f64>;
pub type PoleSet64 = laplace::PoleSet<f64>;
pub type Trajectory64 = dynamics::Trajectory<f64>;
pub type FieldSnapshot64 = dynamics::FieldSnapshot<f64>;
pub type PacketSpec64 = protocol::PacketSpec<f64>;
pub type CatchResult64 = protocol::CatchResult<f64>;
