//! Shared fixtures for the criterion benchmarks.

use stochpoisson::models::slv::{self, LotkaVolterra, LvParams};
use stochpoisson::models::srb::{self, RigidBody, RigidBodyParams};
use stochpoisson::{FailurePolicy, MsErrorSetup, PoissonSde, Vector};

/// Rigid body at its default state with the default parameters.
pub fn rigid_body() -> (RigidBodyParams, Vector) {
    (RigidBodyParams::standard(), srb::default_initial_state())
}

pub fn lotka_volterra() -> (LvParams, Vector) {
    (LvParams::standard(), slv::default_initial_state())
}

pub fn rigid_body_sde() -> PoissonSde<RigidBody> {
    PoissonSde::new(RigidBody::new(RigidBodyParams::standard()).unwrap())
}

pub fn lotka_volterra_sde() -> PoissonSde<LotkaVolterra> {
    PoissonSde::new(LotkaVolterra::new(LvParams::standard()).unwrap())
}

/// Small order experiment; large enough to exercise the coupling.
pub fn small_order_setup(y0: Vector) -> MsErrorSetup {
    MsErrorSetup {
        y0,
        t_end: 0.4,
        step_sizes: vec![0.04, 0.02, 0.01],
        reference_step: 0.0005,
        n_samples: 8,
        seed: 7,
        noise_dim: 1,
        failure: FailurePolicy::Abort,
    }
}
