//! Numerical laboratory for Colombeau generalized functions valued in
//! manifolds and vector bundles.
//!
//! Nets are ε-parametrized families of smooth maps sampled on a finite
//! ε-grid. Growth and decay are read off log-log fits, and every verdict
//! records the sampling it was made with.

// NaN-rejecting guards are written as `!(x > 0.0)` on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// `Scalar` carries no compound-assignment bounds.
#![allow(clippy::assign_op_pattern)]

pub mod association;
pub mod asymptotics;
pub mod bundle_maps;
pub mod error;
pub mod expr;
pub mod geometry;
pub mod impulsive_wave;
pub mod jet;
pub mod manifold_maps;
pub mod net;
pub mod ode;
pub mod profiles;
pub mod quadrature;
pub mod records;
pub mod regression;
pub mod scalar;
pub mod suite;

pub use error::{Error, Result};

pub type Jet64 = jet::Jet<f64>;
pub type DormandPrince64 = ode::DormandPrince<f64>;
pub type SimpsonOptions64 = quadrature::SimpsonOptions<f64>;
pub type CompositeGauss64 = quadrature::CompositeGauss<f64>;
pub type LineFit64 = regression::LineFit<f64>;
