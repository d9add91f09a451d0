//! Three-species stochastic Lotka-Volterra system on the positive octant.

use crate::alpha::{AlphaScheme, AlphaSchemeConfig};
use crate::canonical::{canonical_target, CanonicalShs, Chart, Orientation, PoissonIntegrator};
use crate::poisson::PoissonSystem;
use crate::{Error, Matrix, Result, Vector};

/// Largest exponent accepted before reporting an overflow.
pub const EXP_CAP: f64 = 700.0;

fn exp_checked(x: f64) -> Result<f64> {
    if x > EXP_CAP || x.is_nan() {
        return Err(Error::Overflow(x));
    }
    Ok(x.exp())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LvParams {
    pub a: f64,
    pub b: f64,
    pub r: f64,
    pub nu: f64,
    pub mu: f64,
    pub c2: f64,
}

impl LvParams {
    pub fn new(a: f64, b: f64, r: f64, nu: f64, mu: f64, c2: f64) -> Result<Self> {
        let p = Self { a, b, r, nu, mu, c2 };
        p.validate()?;
        Ok(p)
    }

    /// `a = -2, b = -1, c2 = 0.2, r = -0.5, mu = 2, nu = 1`.
    pub fn standard() -> Self {
        Self {
            a: -2.0,
            b: -1.0,
            r: -0.5,
            nu: 1.0,
            mu: 2.0,
            c2: 0.2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.a, self.b, self.r, self.nu, self.mu, self.c2];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("Lotka-Volterra parameters must be finite".into()));
        }
        if self.r == 0.0 {
            return Err(Error::InvalidParameter("r must be nonzero".into()));
        }
        Ok(())
    }
}

impl Default for LvParams {
    fn default() -> Self {
        Self::standard()
    }
}

/// Default initial state `(2, 0.9, 0.5)`.
pub fn default_initial_state() -> Vector {
    Vector::from_column_slice(&[2.0, 0.9, 0.5])
}

fn positive(y: &Vector) -> bool {
    y.len() == 3 && y.iter().all(|v| *v > 0.0 && v.is_finite())
}

fn require_positive(y: &Vector) -> Result<()> {
    if positive(y) {
        Ok(())
    } else {
        Err(Error::domain(y.as_slice(), "Lotka-Volterra state must be componentwise positive"))
    }
}

/// `C(y) = ln(y1) / r - b ln(y2) + ln(y3)`.
pub fn casimir(params: &LvParams, y: &Vector) -> Result<f64> {
    require_positive(y)?;
    Ok(y[0].ln() / params.r - params.b * y[1].ln() + y[2].ln())
}

pub fn casimir_gradient(params: &LvParams, y: &Vector) -> Result<Vector> {
    require_positive(y)?;
    Ok(Vector::from_column_slice(&[
        1.0 / (params.r * y[0]),
        -params.b / y[1],
        1.0 / y[2],
    ]))
}

/// `B = [[0, r y1 y2, b r y1 y3], [-r y1 y2, 0, y2 y3], [-b r y1 y3, -y2 y3, 0]]`
/// with `K = ab y1 + y2 - a y3 + nu ln y2 - mu ln y3` and `c2 K` on the
/// noise channel.
#[derive(Debug, Clone, Copy)]
pub struct LotkaVolterra {
    params: LvParams,
}

impl LotkaVolterra {
    pub fn new(params: LvParams) -> Result<Self> {
        params.validate()?;
        Ok(Self { params })
    }

    pub fn params(&self) -> &LvParams {
        &self.params
    }

    fn scale(&self, r: usize) -> f64 {
        if r == 0 {
            1.0
        } else {
            self.params.c2
        }
    }
}

impl PoissonSystem for LotkaVolterra {
    fn dim(&self) -> usize {
        3
    }
    fn noise_dim(&self) -> usize {
        1
    }
    fn rank(&self) -> usize {
        2
    }
    fn contains(&self, y: &Vector) -> bool {
        positive(y)
    }
    fn structure(&self, y: &Vector) -> Result<Matrix> {
        if y.len() != 3 {
            return Err(Error::InvalidParameter("state must have length 3".into()));
        }
        let LvParams { b, r, .. } = self.params;
        let (u12, u13, u23) = (r * y[0] * y[1], b * r * y[0] * y[2], y[1] * y[2]);
        Ok(Matrix::from_row_slice(
            3,
            3,
            &[0.0, u12, u13, -u12, 0.0, u23, -u13, -u23, 0.0],
        ))
    }
    fn has_structure_derivative(&self) -> bool {
        true
    }
    fn structure_derivative(&self, y: &Vector) -> Result<Vec<Matrix>> {
        let LvParams { b, r, .. } = self.params;
        let skew = |u12: f64, u13: f64, u23: f64| {
            Matrix::from_row_slice(3, 3, &[0.0, u12, u13, -u12, 0.0, u23, -u13, -u23, 0.0])
        };
        Ok(vec![
            skew(r * y[1], b * r * y[2], 0.0),
            skew(r * y[0], 0.0, y[2]),
            skew(0.0, b * r * y[0], y[1]),
        ])
    }
    fn hamiltonian(&self, r: usize, y: &Vector) -> Result<f64> {
        require_positive(y)?;
        let LvParams { a, b, nu, mu, .. } = self.params;
        let k = a * b * y[0] + y[1] - a * y[2] + nu * y[1].ln() - mu * y[2].ln();
        Ok(self.scale(r) * k)
    }
    fn hamiltonian_gradient(&self, r: usize, y: &Vector) -> Result<Vector> {
        require_positive(y)?;
        let LvParams { a, b, nu, mu, .. } = self.params;
        let g = Vector::from_column_slice(&[a * b, 1.0 + nu / y[1], -a - mu / y[2]]);
        Ok(g * self.scale(r))
    }
    fn has_hamiltonian_hessian(&self) -> bool {
        true
    }
    fn hamiltonian_hessian(&self, r: usize, y: &Vector) -> Result<Matrix> {
        require_positive(y)?;
        let LvParams { nu, mu, .. } = self.params;
        let d = Vector::from_column_slice(&[0.0, -nu / (y[1] * y[1]), mu / (y[2] * y[2])]);
        Ok(Matrix::from_diagonal(&d) * self.scale(r))
    }
}

/// `(P, Q, C) = (ln y3, -ln y2, C(y))`; the target has the reversed
/// orientation `[[0, 1], [-1, 0]]`.
#[derive(Debug, Clone, Copy)]
pub struct SlvChart {
    params: LvParams,
}

impl SlvChart {
    pub fn new(params: LvParams) -> Result<Self> {
        params.validate()?;
        Ok(Self { params })
    }
}

impl Chart for SlvChart {
    fn dim(&self) -> usize {
        3
    }
    fn dof(&self) -> usize {
        1
    }
    fn contains(&self, y: &Vector) -> bool {
        positive(y)
    }
    fn to_canonical(&self, y: &Vector) -> Result<Vector> {
        Ok(Vector::from_column_slice(&[
            y[2].ln(),
            -y[1].ln(),
            casimir(&self.params, y)?,
        ]))
    }
    fn from_canonical(&self, ybar: &Vector) -> Result<Vector> {
        let LvParams { b, r, .. } = self.params;
        let (p, q, c) = (ybar[0], ybar[1], ybar[2]);
        Ok(Vector::from_column_slice(&[
            exp_checked(r * (c - p - b * q))?,
            exp_checked(-q)?,
            exp_checked(p)?,
        ]))
    }
    fn target(&self) -> Matrix {
        canonical_target(1, 1, Orientation::Reversed)
    }
    fn has_jacobian(&self) -> bool {
        true
    }
    fn jacobian(&self, y: &Vector) -> Result<Matrix> {
        require_positive(y)?;
        let LvParams { b, r, .. } = self.params;
        Ok(Matrix::from_row_slice(
            3,
            3,
            &[
                0.0,
                0.0,
                1.0 / y[2],
                0.0,
                -1.0 / y[1],
                0.0,
                1.0 / (r * y[0]),
                -b / y[1],
                1.0 / y[2],
            ],
        ))
    }
    fn has_inverse_jacobian(&self) -> bool {
        true
    }
    fn inverse_jacobian(&self, ybar: &Vector) -> Result<Matrix> {
        let LvParams { b, r, .. } = self.params;
        let (p, q, c) = (ybar[0], ybar[1], ybar[2]);
        let e = exp_checked(r * (c - p - b * q))?;
        let eq = exp_checked(-q)?;
        let ep = exp_checked(p)?;
        Ok(Matrix::from_row_slice(
            3,
            3,
            &[-r * e, -r * b * e, r * e, 0.0, -eq, 0.0, ep, 0.0, 0.0],
        ))
    }
}

/// Transformed system in `(P, Q)`:
/// `H = -ab E - exp(-Q) + nu Q + a exp(P) + mu P`, `E = exp(r (C - P - b Q))`,
/// with `c2 H` on the noise channel. `H` is `-K` pulled back through the
/// chart, which turns the reversed target into the standard one.
#[derive(Debug, Clone)]
pub struct SlvShs {
    params: LvParams,
    casimir: [f64; 1],
}

impl SlvShs {
    pub fn new(params: LvParams, c: f64) -> Result<Self> {
        params.validate()?;
        if !c.is_finite() {
            return Err(Error::InvalidParameter("Casimir value must be finite".into()));
        }
        Ok(Self { params, casimir: [c] })
    }

    fn scale(&self, r: usize) -> f64 {
        if r == 0 {
            1.0
        } else {
            self.params.c2
        }
    }

    fn exps(&self, z: &Vector) -> Result<(f64, f64, f64)> {
        if z.len() != 2 {
            return Err(Error::InvalidParameter("canonical state must have length 2".into()));
        }
        let LvParams { b, r, .. } = self.params;
        let (p, q) = (z[0], z[1]);
        Ok((
            exp_checked(r * (self.casimir[0] - p - b * q))?,
            exp_checked(-q)?,
            exp_checked(p)?,
        ))
    }
}

impl CanonicalShs for SlvShs {
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
        let (e, eq, ep) = self.exps(z)?;
        let LvParams { a, b, nu, mu, .. } = self.params;
        Ok(self.scale(r) * (-a * b * e - eq + nu * z[1] + a * ep + mu * z[0]))
    }
    fn gradient(&self, r: usize, z: &Vector) -> Result<Vector> {
        let (e, eq, ep) = self.exps(z)?;
        let LvParams { a, b, r: rr, nu, mu, .. } = self.params;
        let hp = a * b * rr * e + a * ep + mu;
        let hq = a * b * b * rr * e + eq + nu;
        Ok(Vector::from_column_slice(&[hp, hq]) * self.scale(r))
    }
    fn has_hessian(&self) -> bool {
        true
    }
    fn hessian(&self, r: usize, z: &Vector) -> Result<Matrix> {
        let (e, eq, ep) = self.exps(z)?;
        let LvParams { a, b, r: rr, .. } = self.params;
        let k = a * b * rr * rr * e;
        let pp = -k + a * ep;
        let pq = -k * b;
        let qq = -k * b * b - eq;
        Ok(Matrix::from_row_slice(2, 2, &[pp, pq, pq, qq]) * self.scale(r))
    }
}

/// Alpha-generating Poisson integrator for the Lotka-Volterra system
/// started at `y0`.
pub type SlvAlphaScheme = PoissonIntegrator<SlvChart, AlphaScheme<SlvShs>>;

pub fn slv_alpha_scheme(params: LvParams, y0: &Vector, config: AlphaSchemeConfig) -> Result<SlvAlphaScheme> {
    let chart = SlvChart::new(params)?;
    config.validate()?;
    PoissonIntegrator::new(
        chart,
        move |c: &[f64]| AlphaScheme::new(SlvShs::new(params, c[0])?, config),
        y0,
    )
}
