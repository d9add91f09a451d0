//! Structure-preserving integrators for stochastic Poisson systems.
//!
//! A stochastic Poisson system `dy = B(y) (grad K_0 dt + sum_r grad K_r o dW_r)`
//! is mapped through a canonical chart `theta(y) = (P, Q, C)` to a stochastic
//! Hamiltonian system with frozen Casimirs `C`, advanced there with an
//! alpha-generating symplectic scheme, and mapped back. The result conserves
//! every Casimir exactly and is a Poisson map.
//!
//! Built-in models live in [`models`]: the stochastic rigid body and the
//! stochastic Lotka-Volterra system.

pub mod alpha;
pub mod canonical;
pub mod error;
pub mod fd;
pub mod models;
pub mod noise;
pub mod poisson;
pub mod sde;

pub type Vector = nalgebra::DVector<f64>;
pub type Matrix = nalgebra::DMatrix<f64>;

pub use alpha::{alpha_step, sbar_gradient, symplectic_residual, AlphaScheme, AlphaSchemeConfig, SbarGradient};
pub use canonical::{
    poisson_integrator, transform_system, verify_chart, CanonicalShs, Chart, IdentityChart, Orientation,
    PoissonIntegrator, ShsSde, TransformedShs,
};
pub use error::{Error, Result};
pub use noise::{sample_increments, sample_increments_stream, TimeGrid, TruncationPolicy, WienerIncrements};
pub use poisson::{
    bracket, check_casimir, check_jacobi, check_skew, poisson_map_residual, CheckReport, Derivatives, PoissonSde,
    PoissonSystem,
};
pub use sde::{
    fit_slope, integrate, ms_error, ms_errors, DriftImplicitEuler, EulerMaruyama, FailurePolicy, Midpoint,
    Milstein, MsErrorSetup, OrderEstimate, Stepper, StratonovichSde, Trajectory,
};
