//! Möbius-invariant energies, metrics and gradient flows for closed space curves.
//!
//! Curves are truncated Fourier series sampled on a uniform grid. Everything
//! numerical is generic over [`Real`] (`f32` or `f64`); the aliases below fix
//! the scalar for the common cases.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod check;
pub mod conformal;
pub mod curve;
pub mod energy;
pub mod error;
pub mod flow;
pub mod fourier;
pub mod gradient;
pub mod io;
pub mod metric;
pub mod moebius;
pub mod quadrature;
pub mod scalar;
pub mod vec3;

pub use conformal::{
    conformal_angle, potential_v_cosine, potential_v_hadamard, AngleField, HadamardLadder, PotentialMethod,
    PotentialProfile,
};
pub use curve::{roundness, KnotCurve, Preset, ReparamMap, SampledKnot};
pub use energy::{energy_e_cosine, energy_e_fhw, energy_e_from_v, energy_e_mu, EnergyMethod, EnergyReport, MuKernel};
pub use error::{KnotError, Result};
pub use flow::{invariance_probe, run_flow, FlowConfig, FlowTrace};
pub use gradient::{grad_e_hadamard, grad_e_pv, weighted_gradient, GradientField, GradientRoute};
pub use metric::{build_weight, l2_inner, weighted_inner, TangentField, WeightFunction, WeightKind};
pub use moebius::{MoebiusTransform, Primitive};
pub use scalar::Real;
pub use vec3::{Mat3, Vec3};

pub type KnotCurve64 = KnotCurve<f64>;
pub type KnotCurve32 = KnotCurve<f32>;
pub type SampledKnot64 = SampledKnot<f64>;
pub type SampledKnot32 = SampledKnot<f32>;
pub type MoebiusTransform64 = MoebiusTransform<f64>;
pub type MoebiusTransform32 = MoebiusTransform<f32>;
pub type TangentField64 = TangentField<f64>;
pub type WeightFunction64 = WeightFunction<f64>;
pub type FlowTrace64 = FlowTrace<f64>;
