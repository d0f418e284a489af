//! Coherent sets of quasi-periodically driven, divergence-free flows on the
//! two-torus with additive noise.
//!
//! The pipeline runs:
//!
//! 1. [`fourier_field`]: sparse Fourier tables of the driven velocity `v(θ, x)`;
//! 2. [`mode_select`]: the finite Galerkin mode set `S ⊂ ℤ² × ℤ²`;
//! 3. [`generator`]: the sparse discrete augmented generator `Γ_S`;
//! 4. [`spectral`]: eigenpairs of `Γ_S` nearest a shift (shift-invert Arnoldi);
//! 5. [`coherent`]: fibres of an eigenfunction and the coherent-set rules;
//! 6. [`sde`]: Euler–Maruyama particle ensembles and survival statistics.
//!
//! Field, generator and simulation code is generic over [`Real`] (`f32` or
//! `f64`); the eigensolver and everything downstream of it run in `f64`.

pub mod block_lu;
pub mod coherent;
pub mod error;
pub mod fourier_field;
pub mod generator;
pub mod mode;
pub mod mode_select;
pub mod presets;
pub mod scalar;
pub mod sde;
pub mod sparse;
pub mod spectral;

pub use error::{Error, Result};
pub use mode::ModeIndex;
pub use mode_select::{ModeSet, ModeSetKind};
pub use scalar::Real;

pub type C64 = num_complex::Complex<f64>;

pub type FourierField<T = f64> = fourier_field::FourierField<T>;
pub type FourierField64 = fourier_field::FourierField<f64>;
pub type FourierField32 = fourier_field::FourierField<f32>;
pub type DiscreteGenerator<T = f64> = generator::DiscreteGenerator<T>;
pub type Generator64 = generator::DiscreteGenerator<f64>;
pub type Generator32 = generator::DiscreteGenerator<f32>;
pub type CoefficientVector<T = f64> = generator::CoefficientVector<T>;
pub type CoefficientVector64 = generator::CoefficientVector<f64>;
