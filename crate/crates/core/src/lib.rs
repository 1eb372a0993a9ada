//! Nonparametric inference of a time-varying infection rate `β(t)` and a
//! constant recovery rate `γ` for the stochastic SIR model.
//!
//! The pipeline runs bottom-up through the modules:
//!
//! 1. [`sir`]: states, observed paths and simulators;
//! 2. [`spline`]: clamped B-spline bases for `β(t)`;
//! 3. [`likelihood`]: tau-leap and diffusion approximate likelihoods;
//! 4. [`knots`]: moving-average rate estimates, feature-based knot placement
//!    and forward BIC selection of the number of knots;
//! 5. [`estimator`]: maximum likelihood over `(γ, spline coefficients)`;
//! 6. [`bootstrap`]: parametric bootstrap confidence bands;
//! 7. [`metrics`]: IMSE, coverage and `R₀(t)`.

pub mod bootstrap;
pub mod error;
pub mod estimator;
pub mod knots;
pub mod likelihood;
pub mod metrics;
pub mod normal;
pub mod quad;
pub mod rng;
pub mod sir;
pub mod spline;

mod simplex;

pub use error::{Error, Result};
pub use likelihood::{Family, LikelihoodConfig, ParameterVector};
pub use sir::{ConstantRate, CountState, EpidemicPath, InfectionRate, ProportionState, RatePair};
pub use spline::{KnotVector, SplineModel};
