//! Stochastic rigid body `dy = y x (I^{-1} y) (dt + c o dW)` on the sphere
//! `|y|^2 = 2C`.

use crate::alpha::{AlphaScheme, AlphaSchemeConfig};
use crate::canonical::{canonical_target, CanonicalShs, Chart, Orientation, PoissonIntegrator};
use crate::noise::TruncationPolicy;
use crate::poisson::PoissonSystem;
use crate::sde::{Midpoint, StratonovichSde, Stepper};
use crate::{Error, Matrix, Result, Vector};

/// Moments of inertia and noise amplitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidBodyParams {
    pub i1: f64,
    pub i2: f64,
    pub i3: f64,
    pub c1: f64,
}

impl RigidBodyParams {
    pub fn new(i1: f64, i2: f64, i3: f64, c1: f64) -> Result<Self> {
        let p = Self { i1, i2, i3, c1 };
        p.validate()?;
        Ok(p)
    }

    /// `I1 = sqrt 2 + sqrt(2/1.51)`, `I2 = sqrt 2 - 0.51 sqrt(2/1.51)`,
    /// `I3 = 1`, `c1 = 0.2`.
    pub fn standard() -> Self {
        let s = (2.0f64 / 1.51).sqrt();
        Self {
            i1: 2.0f64.sqrt() + s,
            i2: 2.0f64.sqrt() - 0.51 * s,
            i3: 1.0,
            c1: 0.2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("I1", self.i1), ("I2", self.i2), ("I3", self.i3)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} = {v} must be positive")));
            }
        }
        if !self.c1.is_finite() {
            return Err(Error::InvalidParameter("c1 must be finite".into()));
        }
        Ok(())
    }

    fn inv(&self) -> [f64; 3] {
        [1.0 / self.i1, 1.0 / self.i2, 1.0 / self.i3]
    }
}

impl Default for RigidBodyParams {
    fn default() -> Self {
        Self::standard()
    }
}

/// Default initial state `(1/sqrt 2, 1/sqrt 2, 0)`.
pub fn default_initial_state() -> Vector {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    Vector::from_column_slice(&[s, s, 0.0])
}

/// `C(y) = |y|^2 / 2`.
pub fn casimir(y: &Vector) -> f64 {
    0.5 * y.norm_squared()
}

pub fn casimir_gradient(y: &Vector) -> Vector {
    y.clone()
}

/// The rigid body as a Poisson system with kinetic energy `K` as drift
/// Hamiltonian and `c1 K` on the single noise channel.
#[derive(Debug, Clone, Copy)]
pub struct RigidBody {
    params: RigidBodyParams,
}

impl RigidBody {
    pub fn new(params: RigidBodyParams) -> Result<Self> {
        params.validate()?;
        Ok(Self { params })
    }

    pub fn params(&self) -> &RigidBodyParams {
        &self.params
    }

    fn scale(&self, r: usize) -> f64 {
        if r == 0 {
            1.0
        } else {
            self.params.c1
        }
    }
}

fn check_len(y: &Vector, n: usize) -> Result<()> {
    if y.len() != n {
        return Err(Error::InvalidParameter(format!(
            "state has length {}, expected {n}",
            y.len()
        )));
    }
    Ok(())
}

/// `B = [[0, -y3, y2], [y3, 0, -y1], [-y2, y1, 0]]`.
pub fn structure_matrix(y: &Vector) -> Matrix {
    Matrix::from_row_slice(3, 3, &[0.0, -y[2], y[1], y[2], 0.0, -y[0], -y[1], y[0], 0.0])
}

impl PoissonSystem for RigidBody {
    fn dim(&self) -> usize {
        3
    }
    fn noise_dim(&self) -> usize {
        1
    }
    fn rank(&self) -> usize {
        2
    }
    fn structure(&self, y: &Vector) -> Result<Matrix> {
        check_len(y, 3)?;
        Ok(structure_matrix(y))
    }
    fn has_structure_derivative(&self) -> bool {
        true
    }
    fn structure_derivative(&self, _y: &Vector) -> Result<Vec<Matrix>> {
        let e = |s| {
            let mut u = Vector::zeros(3);
            u[s] = 1.0;
            structure_matrix(&u)
        };
        Ok(vec![e(0), e(1), e(2)])
    }
    fn hamiltonian(&self, r: usize, y: &Vector) -> Result<f64> {
        check_len(y, 3)?;
        let inv = self.params.inv();
        let k: f64 = (0..3).map(|i| y[i] * y[i] * inv[i]).sum::<f64>() * 0.5;
        Ok(self.scale(r) * k)
    }
    fn hamiltonian_gradient(&self, r: usize, y: &Vector) -> Result<Vector> {
        check_len(y, 3)?;
        let inv = self.params.inv();
        let s = self.scale(r);
        Ok(Vector::from_fn(3, |i, _| s * y[i] * inv[i]))
    }
    fn has_hamiltonian_hessian(&self) -> bool {
        true
    }
    fn hamiltonian_hessian(&self, r: usize, _y: &Vector) -> Result<Matrix> {
        let inv = self.params.inv();
        Ok(Matrix::from_diagonal(&Vector::from_column_slice(&inv)) * self.scale(r))
    }
}

/// `(P, Q, C) = (y2, atan2(y3, y1), |y|^2 / 2)`, defined where
/// `y1^2 + y3^2 > 0`.
#[derive(Debug, Clone, Copy, Default)]
pub struct SrbChart;

impl Chart for SrbChart {
    fn dim(&self) -> usize {
        3
    }
    fn dof(&self) -> usize {
        1
    }
    fn contains(&self, y: &Vector) -> bool {
        y.len() == 3 && y.iter().all(|v| v.is_finite()) && y[0] * y[0] + y[2] * y[2] > 0.0
    }
    fn to_canonical(&self, y: &Vector) -> Result<Vector> {
        if !self.contains(y) {
            return Err(Error::domain(y.as_slice(), "rigid-body chart needs y1^2 + y3^2 > 0"));
        }
        Ok(Vector::from_column_slice(&[y[1], y[2].atan2(y[0]), casimir(y)]))
    }
    fn from_canonical(&self, ybar: &Vector) -> Result<Vector> {
        check_len(ybar, 3)?;
        let (p, q, c) = (ybar[0], ybar[1], ybar[2]);
        let u = 2.0 * c - p * p;
        if !(u > 0.0) {
            return Err(Error::domain(ybar.as_slice(), "rigid-body chart needs P^2 < 2C"));
        }
        let s = u.sqrt();
        Ok(Vector::from_column_slice(&[s * q.cos(), p, s * q.sin()]))
    }
    fn target(&self) -> Matrix {
        canonical_target(1, 1, Orientation::Standard)
    }
    fn has_jacobian(&self) -> bool {
        true
    }
    fn jacobian(&self, y: &Vector) -> Result<Matrix> {
        if !self.contains(y) {
            return Err(Error::domain(y.as_slice(), "rigid-body chart needs y1^2 + y3^2 > 0"));
        }
        let rho2 = y[0] * y[0] + y[2] * y[2];
        Ok(Matrix::from_row_slice(
            3,
            3,
            &[0.0, 1.0, 0.0, -y[2] / rho2, 0.0, y[0] / rho2, y[0], y[1], y[2]],
        ))
    }
    fn has_inverse_jacobian(&self) -> bool {
        true
    }
    fn inverse_jacobian(&self, ybar: &Vector) -> Result<Matrix> {
        check_len(ybar, 3)?;
        let (p, q, c) = (ybar[0], ybar[1], ybar[2]);
        let u = 2.0 * c - p * p;
        if !(u > 0.0) {
            return Err(Error::domain(ybar.as_slice(), "rigid-body chart needs P^2 < 2C"));
        }
        let s = u.sqrt();
        let (sq, cq) = q.sin_cos();
        Ok(Matrix::from_row_slice(
            3,
            3,
            &[-p / s * cq, -s * sq, cq / s, 1.0, 0.0, 0.0, -p / s * sq, s * cq, sq / s],
        ))
    }
}

/// Transformed rigid body in `(P, Q)`:
/// `H = (2C - P^2) cos^2 Q / (2 I1) + P^2 / (2 I2) + (2C - P^2) sin^2 Q / (2 I3)`,
/// with `c1 H` on the noise channel.
#[derive(Debug, Clone)]
pub struct SrbShs {
    params: RigidBodyParams,
    casimir: [f64; 1],
}

impl SrbShs {
    pub fn new(params: RigidBodyParams, c: f64) -> Result<Self> {
        params.validate()?;
        if !(c > 0.0) {
            return Err(Error::InvalidParameter(format!("Casimir value {c} must be positive")));
        }
        Ok(Self { params, casimir: [c] })
    }

    fn scale(&self, r: usize) -> f64 {
        if r == 0 {
            1.0
        } else {
            self.params.c1
        }
    }

    fn pieces(&self, z: &Vector) -> Result<(f64, f64, f64, f64, f64)> {
        check_len(z, 2)?;
        let u = 2.0 * self.casimir[0] - z[0] * z[0];
        let [a1, a2, a3] = self.params.inv();
        let (s, c) = z[1].sin_cos();
        // g = dH/dP / P, k = (1/I3 - 1/I1) / 2
        let g = a2 - c * c * a1 - s * s * a3;
        let k = 0.5 * (a3 - a1);
        Ok((z[0], z[1], u, g, k))
    }
}

impl CanonicalShs for SrbShs {
    fn dof(&self) -> usize {
        1
    }
    fn noise_dim(&self) -> usize {
        1
    }
    fn casimirs(&self) -> &[f64] {
        &self.casimir
    }
    fn hamiltonian(&self, r: usize, z: &Vector) -> Result<f64> {
        let (p, q, u, _, _) = self.pieces(z)?;
        let [a1, a2, a3] = self.params.inv();
        let (s, c) = q.sin_cos();
        Ok(self.scale(r) * 0.5 * (u * c * c * a1 + p * p * a2 + u * s * s * a3))
    }
    fn gradient(&self, r: usize, z: &Vector) -> Result<Vector> {
        let (p, q, u, g, k) = self.pieces(z)?;
        let s = self.scale(r);
        Ok(Vector::from_column_slice(&[s * p * g, s * u * k * (2.0 * q).sin()]))
    }
    fn has_hessian(&self) -> bool {
        true
    }
    fn hessian(&self, r: usize, z: &Vector) -> Result<Matrix> {
        let (p, q, u, g, k) = self.pieces(z)?;
        let s = self.scale(r);
        let pq = -2.0 * k * p * (2.0 * q).sin();
        let qq = 2.0 * u * k * (2.0 * q).cos();
        Ok(Matrix::from_row_slice(2, 2, &[g, pq, pq, qq]) * s)
    }
}

/// Alpha-generating Poisson integrator for the rigid body started at `y0`.
pub type SrbAlphaScheme = PoissonIntegrator<SrbChart, AlphaScheme<SrbShs>>;

pub fn srb_alpha_scheme(params: RigidBodyParams, y0: &Vector, config: AlphaSchemeConfig) -> Result<SrbAlphaScheme> {
    if !SrbChart.contains(y0) {
        return Err(Error::domain(y0.as_slice(), "initial state outside the rigid-body chart"));
    }
    params.validate()?;
    config.validate()?;
    PoissonIntegrator::new(
        SrbChart,
        move |c: &[f64]| AlphaScheme::new(SrbShs::new(params, c[0])?, config),
        y0,
    )
}

/// Angles of `y = R (cos t1 cos t2, cos t1 sin t2, sin t1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphericalState {
    pub theta1: f64,
    pub theta2: f64,
    pub radius: f64,
}

impl SphericalState {
    pub fn from_cartesian(y: &Vector) -> Result<Self> {
        check_len(y, 3)?;
        let radius = y.norm();
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::domain(y.as_slice(), "spherical coordinates need y != 0"));
        }
        Ok(Self {
            theta1: (y[2] / radius).clamp(-1.0, 1.0).asin(),
            theta2: y[1].atan2(y[0]),
            radius,
        })
    }

    pub fn to_cartesian(&self) -> Vector {
        angles_to_cartesian(self.theta1, self.theta2, self.radius)
    }
}

fn angles_to_cartesian(t1: f64, t2: f64, radius: f64) -> Vector {
    let (s1, c1) = t1.sin_cos();
    let (s2, c2) = t2.sin_cos();
    Vector::from_column_slice(&[radius * c1 * c2, radius * c1 * s2, radius * s1])
}

/// Rigid body in the angles `(theta1, theta2)` at fixed radius `R`:
/// both components are `f(theta) (dt + c1 o dW)`.
#[derive(Debug, Clone, Copy)]
pub struct SphericalSde {
    params: RigidBodyParams,
    radius: f64,
}

impl SphericalSde {
    pub fn new(params: RigidBodyParams, radius: f64) -> Result<Self> {
        params.validate()?;
        if !(radius > 0.0) {
            return Err(Error::InvalidParameter(format!("radius {radius} must be positive")));
        }
        Ok(Self { params, radius })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    fn field(&self, t: &Vector) -> Result<Vector> {
        check_len(t, 2)?;
        let [a1, a2, a3] = self.params.inv();
        let (s1, c1) = t[0].sin_cos();
        let (s2, c2) = t[1].sin_cos();
        let r = self.radius;
        Ok(Vector::from_column_slice(&[
            r * (a2 - a1) * c1 * s2 * c2,
            r * s1 * ((a1 - a3) * c2 * c2 - (a3 - a2) * s2 * s2),
        ]))
    }

    fn field_jacobian(&self, t: &Vector) -> Result<Matrix> {
        check_len(t, 2)?;
        let [a1, a2, a3] = self.params.inv();
        let (s1, c1) = t[0].sin_cos();
        let (s2, c2) = t[1].sin_cos();
        let r = self.radius;
        let beta = a1 - a3;
        let gamma = a3 - a2;
        let w = beta * c2 * c2 - gamma * s2 * s2;
        let two = 2.0 * t[1];
        Ok(Matrix::from_row_slice(
            2,
            2,
            &[
                -r * (a2 - a1) * s1 * s2 * c2,
                r * (a2 - a1) * c1 * two.cos(),
                r * c1 * w,
                -r * s1 * (beta + gamma) * two.sin(),
            ],
        ))
    }
}

impl StratonovichSde for SphericalSde {
    fn dim(&self) -> usize {
        2
    }
    fn noise_dim(&self) -> usize {
        1
    }
    fn drift(&self, t: &Vector) -> Result<Vector> {
        self.field(t)
    }
    fn diffusion(&self, _r: usize, t: &Vector) -> Result<Vector> {
        Ok(self.field(t)? * self.params.c1)
    }
    fn has_diffusion_jacobian(&self) -> bool {
        true
    }
    fn diffusion_jacobian(&self, _r: usize, t: &Vector) -> Result<Matrix> {
        Ok(self.field_jacobian(t)? * self.params.c1)
    }
}

/// Midpoint rule in the angles with truncated increments, mapped back at
/// the radius fixed by `y0`.
pub struct SphericalScheme {
    midpoint: Midpoint<SphericalSde>,
    radius: f64,
}

impl SphericalScheme {
    pub fn new(params: RigidBodyParams, y0: &Vector, tol: f64) -> Result<Self> {
        SphericalState::from_cartesian(y0)?;
        let radius = (2.0 * casimir(y0)).sqrt();
        let sde = SphericalSde::new(params, radius)?;
        Ok(Self {
            midpoint: Midpoint::new(sde)
                .with_tol(tol)
                .with_truncation(TruncationPolicy::default()),
            radius,
        })
    }

    pub fn with_truncation(mut self, truncation: TruncationPolicy) -> Self {
        self.midpoint = self.midpoint.with_truncation(truncation);
        self
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn angle_step(&self, t: &Vector, h: f64, dw: &[f64]) -> Result<Vector> {
        self.midpoint.step(t, h, dw)
    }
}

impl Stepper for SphericalScheme {
    fn dim(&self) -> usize {
        3
    }
    fn step(&self, y: &Vector, h: f64, dw: &[f64]) -> Result<Vector> {
        let s = SphericalState::from_cartesian(y)?;
        let t = Vector::from_column_slice(&[s.theta1, s.theta2]);
        let next = self.midpoint.step(&t, h, dw)?;
        Ok(angles_to_cartesian(next[0], next[1], self.radius))
    }
}
