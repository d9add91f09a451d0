//! Built-in models: the stochastic rigid body and the stochastic
//! Lotka-Volterra system.

pub mod slv;
pub mod srb;
