//! Canonical coordinate charts `y -> (P, Q, C)`, the transformed stochastic
//! Hamiltonian system with frozen Casimirs, and the Poisson integrator built
//! by conjugating a symplectic stepper with a chart.

use crate::poisson::{check_points, CheckReport, PoissonSystem};
use crate::sde::{StratonovichSde, Stepper};
use crate::{fd, Error, Matrix, Result, Vector};

/// Sign convention of the canonical block of a target structure matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    /// `[[0, -I], [I, 0]]`, i.e. `dP = -dH/dQ`, `dQ = dH/dP`.
    Standard,
    /// `[[0, I], [-I, 0]]`.
    Reversed,
}

impl Orientation {
    pub fn sign(self) -> f64 {
        match self {
            Orientation::Standard => 1.0,
            Orientation::Reversed => -1.0,
        }
    }

    /// Reads the orientation off a target matrix `[[+-J^{-1}, 0], [0, 0]]`.
    pub fn of(target: &Matrix, n: usize) -> Result<Self> {
        let d = target.nrows();
        for orientation in [Orientation::Standard, Orientation::Reversed] {
            if *target == canonical_target(n, d - 2 * n, orientation) {
                return Ok(orientation);
            }
        }
        Err(Error::InvalidParameter(format!(
            "target matrix is not a canonical block structure for n = {n}"
        )))
    }
}

/// `J^{-1} = [[0, -I], [I, 0]]` of size `2n`.
pub fn j_inverse(n: usize) -> Matrix {
    let mut m = Matrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        m[(i, n + i)] = -1.0;
        m[(n + i, i)] = 1.0;
    }
    m
}

/// `[[s J^{-1}, 0], [0, 0_l]]`.
pub fn canonical_target(n: usize, l: usize, orientation: Orientation) -> Matrix {
    let mut m = Matrix::zeros(2 * n + l, 2 * n + l);
    m.view_mut((0, 0), (2 * n, 2 * n))
        .copy_from(&(j_inverse(n) * orientation.sign()));
    m
}

/// Local coordinates `theta(y) = (P, Q, C)` with `C` the Casimirs.
pub trait Chart: Send + Sync {
    fn dim(&self) -> usize;
    /// Degrees of freedom `n`.
    fn dof(&self) -> usize;

    fn casimir_count(&self) -> usize {
        self.dim() - 2 * self.dof()
    }

    fn contains(&self, y: &Vector) -> bool;
    fn to_canonical(&self, y: &Vector) -> Result<Vector>;
    fn from_canonical(&self, ybar: &Vector) -> Result<Vector>;
    /// Constant target structure matrix `B_0`.
    fn target(&self) -> Matrix;

    fn has_jacobian(&self) -> bool {
        false
    }

    /// `A(y) = d theta / d y`.
    fn jacobian(&self, _y: &Vector) -> Result<Matrix> {
        Err(Error::MissingDerivative("chart Jacobian"))
    }

    fn has_inverse_jacobian(&self) -> bool {
        false
    }

    /// `d theta^{-1} / d ybar`.
    fn inverse_jacobian(&self, _ybar: &Vector) -> Result<Matrix> {
        Err(Error::MissingDerivative("inverse chart Jacobian"))
    }
}

impl<T: Chart + ?Sized> Chart for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn dof(&self) -> usize {
        (**self).dof()
    }
    fn contains(&self, y: &Vector) -> bool {
        (**self).contains(y)
    }
    fn to_canonical(&self, y: &Vector) -> Result<Vector> {
        (**self).to_canonical(y)
    }
    fn from_canonical(&self, ybar: &Vector) -> Result<Vector> {
        (**self).from_canonical(ybar)
    }
    fn target(&self) -> Matrix {
        (**self).target()
    }
    fn has_jacobian(&self) -> bool {
        (**self).has_jacobian()
    }
    fn jacobian(&self, y: &Vector) -> Result<Matrix> {
        (**self).jacobian(y)
    }
    fn has_inverse_jacobian(&self) -> bool {
        (**self).has_inverse_jacobian()
    }
    fn inverse_jacobian(&self, ybar: &Vector) -> Result<Matrix> {
        (**self).inverse_jacobian(ybar)
    }
}

impl<T: Chart + ?Sized> Chart for Box<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn dof(&self) -> usize {
        (**self).dof()
    }
    fn contains(&self, y: &Vector) -> bool {
        (**self).contains(y)
    }
    fn to_canonical(&self, y: &Vector) -> Result<Vector> {
        (**self).to_canonical(y)
    }
    fn from_canonical(&self, ybar: &Vector) -> Result<Vector> {
        (**self).from_canonical(ybar)
    }
    fn target(&self) -> Matrix {
        (**self).target()
    }
    fn has_jacobian(&self) -> bool {
        (**self).has_jacobian()
    }
    fn jacobian(&self, y: &Vector) -> Result<Matrix> {
        (**self).jacobian(y)
    }
    fn has_inverse_jacobian(&self) -> bool {
        (**self).has_inverse_jacobian()
    }
    fn inverse_jacobian(&self, ybar: &Vector) -> Result<Matrix> {
        (**self).inverse_jacobian(ybar)
    }
}

impl<T: Chart + ?Sized> Chart for std::sync::Arc<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn dof(&self) -> usize {
        (**self).dof()
    }
    fn contains(&self, y: &Vector) -> bool {
        (**self).contains(y)
    }
    fn to_canonical(&self, y: &Vector) -> Result<Vector> {
        (**self).to_canonical(y)
    }
    fn from_canonical(&self, ybar: &Vector) -> Result<Vector> {
        (**self).from_canonical(ybar)
    }
    fn target(&self) -> Matrix {
        (**self).target()
    }
    fn has_jacobian(&self) -> bool {
        (**self).has_jacobian()
    }
    fn jacobian(&self, y: &Vector) -> Result<Matrix> {
        (**self).jacobian(y)
    }
    fn has_inverse_jacobian(&self) -> bool {
        (**self).has_inverse_jacobian()
    }
    fn inverse_jacobian(&self, ybar: &Vector) -> Result<Matrix> {
        (**self).inverse_jacobian(ybar)
    }
}

/// `A(y)`, analytic when the chart provides it.
pub fn chart_jacobian<C: Chart + ?Sized>(chart: &C, y: &Vector) -> Result<Matrix> {
    if chart.has_jacobian() {
        chart.jacobian(y)
    } else {
        fd::jacobian(|x| chart.to_canonical(x), y, fd::default_step(y))
    }
}

fn inverse_chart_jacobian<C: Chart + ?Sized>(chart: &C, ybar: &Vector) -> Result<Matrix> {
    if chart.has_inverse_jacobian() {
        chart.inverse_jacobian(ybar)
    } else {
        fd::jacobian(|x| chart.from_canonical(x), ybar, fd::default_step(ybar))
    }
}

/// Condition number above which a chart Jacobian counts as singular.
pub const SINGULAR_CONDITION: f64 = 1e12;

/// `max ||A(y) B(y) A(y)^T - B_0||_inf` over the points.
pub fn verify_chart<C, P>(chart: &C, sys: &P, points: &[Vector]) -> Result<CheckReport>
where
    C: Chart + ?Sized,
    P: PoissonSystem + ?Sized,
{
    let target = chart.target();
    check_points(points, |y| {
        if !chart.contains(y) {
            return Err(Error::domain(y.as_slice(), "point outside the chart domain"));
        }
        let a = chart_jacobian(chart, y)?;
        let sv = a.singular_values();
        let condition = sv.max() / sv.min();
        if !(condition < SINGULAR_CONDITION) {
            return Err(Error::SingularJacobian {
                point: y.as_slice().to_vec(),
                condition,
            });
        }
        Ok((&a * sys.structure(y)? * a.transpose() - &target).amax())
    })
}

/// Stochastic Hamiltonian system in `Z = (P, Q)` with frozen Casimirs:
/// `dZ = J^{-1} (grad H_0 dt + sum_r grad H_r o dW_r)`.
pub trait CanonicalShs: Send + Sync {
    fn dof(&self) -> usize;
    fn noise_dim(&self) -> usize;
    fn casimirs(&self) -> &[f64];
    fn hamiltonian(&self, r: usize, z: &Vector) -> Result<f64>;
    /// `(dH_r/dP; dH_r/dQ)`.
    fn gradient(&self, r: usize, z: &Vector) -> Result<Vector>;

    fn has_hessian(&self) -> bool {
        false
    }

    fn hessian(&self, _r: usize, _z: &Vector) -> Result<Matrix> {
        Err(Error::MissingDerivative("canonical Hamiltonian Hessian"))
    }
}

impl<T: CanonicalShs + ?Sized> CanonicalShs for &T {
    fn dof(&self) -> usize {
        (**self).dof()
    }
    fn noise_dim(&self) -> usize {
        (**self).noise_dim()
    }
    fn casimirs(&self) -> &[f64] {
        (**self).casimirs()
    }
    fn hamiltonian(&self, r: usize, z: &Vector) -> Result<f64> {
        (**self).hamiltonian(r, z)
    }
    fn gradient(&self, r: usize, z: &Vector) -> Result<Vector> {
        (**self).gradient(r, z)
    }
    fn has_hessian(&self) -> bool {
        (**self).has_hessian()
    }
    fn hessian(&self, r: usize, z: &Vector) -> Result<Matrix> {
        (**self).hessian(r, z)
    }
}

impl<T: CanonicalShs + ?Sized> CanonicalShs for Box<T> {
    fn dof(&self) -> usize {
        (**self).dof()
    }
    fn noise_dim(&self) -> usize {
        (**self).noise_dim()
    }
    fn casimirs(&self) -> &[f64] {
        (**self).casimirs()
    }
    fn hamiltonian(&self, r: usize, z: &Vector) -> Result<f64> {
        (**self).hamiltonian(r, z)
    }
    fn gradient(&self, r: usize, z: &Vector) -> Result<Vector> {
        (**self).gradient(r, z)
    }
    fn has_hessian(&self) -> bool {
        (**self).has_hessian()
    }
    fn hessian(&self, r: usize, z: &Vector) -> Result<Matrix> {
        (**self).hessian(r, z)
    }
}

impl<T: CanonicalShs + ?Sized> CanonicalShs for std::sync::Arc<T> {
    fn dof(&self) -> usize {
        (**self).dof()
    }
    fn noise_dim(&self) -> usize {
        (**self).noise_dim()
    }
    fn casimirs(&self) -> &[f64] {
        (**self).casimirs()
    }
    fn hamiltonian(&self, r: usize, z: &Vector) -> Result<f64> {
        (**self).hamiltonian(r, z)
    }
    fn gradient(&self, r: usize, z: &Vector) -> Result<Vector> {
        (**self).gradient(r, z)
    }
    fn has_hessian(&self) -> bool {
        (**self).has_hessian()
    }
    fn hessian(&self, r: usize, z: &Vector) -> Result<Matrix> {
        (**self).hessian(r, z)
    }
}

/// Generic transformed system `H_r(Z; C) = s K_r(theta^{-1}(Z, C))`, with `s`
/// the sign of the chart orientation so that the result always uses the
/// standard `J^{-1}`.
///
/// Gradients use the chain rule through the inverse chart Jacobian;
/// Hessians are central differences of those gradients.
pub struct TransformedShs<P, C> {
    sys: P,
    chart: C,
    casimirs: Vec<f64>,
    sign: f64,
}

impl<P: PoissonSystem, C: Chart> TransformedShs<P, C> {
    fn lift(&self, z: &Vector) -> Vector {
        let mut ybar = Vector::zeros(self.chart.dim());
        let m = z.len();
        ybar.rows_mut(0, m).copy_from(z);
        for (i, c) in self.casimirs.iter().enumerate() {
            ybar[m + i] = *c;
        }
        ybar
    }

    pub fn orientation_sign(&self) -> f64 {
        self.sign
    }

    /// Transformed system on the level set with the given Casimir values.
    pub fn new(sys: P, chart: C, casimirs: Vec<f64>) -> Result<Self> {
        let n = chart.dof();
        if casimirs.len() != chart.dim() - 2 * n {
            return Err(Error::InvalidParameter(format!(
                "chart has {} Casimirs, got {} values",
                chart.dim() - 2 * n,
                casimirs.len()
            )));
        }
        let sign = Orientation::of(&chart.target(), n)?.sign();
        Ok(Self {
            sys,
            chart,
            casimirs,
            sign,
        })
    }
}

/// Freezes `C = theta(y0)_{2n..}` and builds the transformed system.
pub fn transform_system<P: PoissonSystem, C: Chart>(sys: P, chart: C, y0: &Vector) -> Result<TransformedShs<P, C>> {
    if !chart.contains(y0) {
        return Err(Error::domain(y0.as_slice(), "initial state outside the chart domain"));
    }
    let ybar = chart.to_canonical(y0)?;
    let casimirs = ybar.as_slice()[2 * chart.dof()..].to_vec();
    TransformedShs::new(sys, chart, casimirs)
}

impl<P: PoissonSystem, C: Chart> CanonicalShs for TransformedShs<P, C> {
    fn dof(&self) -> usize {
        self.chart.dof()
    }
    fn noise_dim(&self) -> usize {
        self.sys.noise_dim()
    }
    fn casimirs(&self) -> &[f64] {
        &self.casimirs
    }
    fn hamiltonian(&self, r: usize, z: &Vector) -> Result<f64> {
        let y = self.chart.from_canonical(&self.lift(z))?;
        Ok(self.sign * self.sys.hamiltonian(r, &y)?)
    }
    fn gradient(&self, r: usize, z: &Vector) -> Result<Vector> {
        let ybar = self.lift(z);
        let y = self.chart.from_canonical(&ybar)?;
        let d = inverse_chart_jacobian(&self.chart, &ybar)?;
        let dz = d.columns(0, z.len());
        Ok(dz.transpose() * self.sys.hamiltonian_gradient(r, &y)? * self.sign)
    }
    fn has_hessian(&self) -> bool {
        true
    }
    fn hessian(&self, r: usize, z: &Vector) -> Result<Matrix> {
        let h = fd::jacobian(|x| self.gradient(r, x), z, fd::default_step(z))?;
        Ok((&h + h.transpose()) * 0.5)
    }
}

/// A canonical system viewed as a Stratonovich SDE in `Z`.
pub struct ShsSde<S> {
    shs: S,
    j_inv: Matrix,
}

impl<S: CanonicalShs> ShsSde<S> {
    pub fn new(shs: S) -> Self {
        let j_inv = j_inverse(shs.dof());
        Self { shs, j_inv }
    }
}

impl<S: CanonicalShs> StratonovichSde for ShsSde<S> {
    fn dim(&self) -> usize {
        2 * self.shs.dof()
    }
    fn noise_dim(&self) -> usize {
        self.shs.noise_dim()
    }
    fn drift(&self, z: &Vector) -> Result<Vector> {
        Ok(&self.j_inv * self.shs.gradient(0, z)?)
    }
    fn diffusion(&self, r: usize, z: &Vector) -> Result<Vector> {
        Ok(&self.j_inv * self.shs.gradient(r + 1, z)?)
    }
    fn has_diffusion_jacobian(&self) -> bool {
        self.shs.has_hessian()
    }
    fn diffusion_jacobian(&self, r: usize, z: &Vector) -> Result<Matrix> {
        Ok(&self.j_inv * self.shs.hessian(r + 1, z)?)
    }
}

/// Builds the canonical stepper for given Casimir values.
pub type StepperFactory<S> = Box<dyn Fn(&[f64]) -> Result<S> + Send + Sync>;

/// `y -> theta^{-1}(stepper(Z(theta(y))), C)` with `C` frozen from the
/// initial state.
///
/// [`Stepper::step`] uses the stepper built once for the frozen `C`;
/// [`PoissonIntegrator::local_step`] rebuilds it from the Casimirs of the
/// given state, which is the one-step map as a function on the full space.
pub struct PoissonIntegrator<C, S> {
    chart: C,
    factory: StepperFactory<S>,
    stepper: S,
    casimirs: Vec<f64>,
}

impl<C: Chart, S: Stepper> PoissonIntegrator<C, S> {
    pub fn new<F>(chart: C, factory: F, y0: &Vector) -> Result<Self>
    where
        F: Fn(&[f64]) -> Result<S> + Send + Sync + 'static,
    {
        if !chart.contains(y0) {
            return Err(Error::domain(y0.as_slice(), "initial state outside the chart domain"));
        }
        let ybar = chart.to_canonical(y0)?;
        let casimirs = ybar.as_slice()[2 * chart.dof()..].to_vec();
        let stepper = factory(&casimirs)?;
        if stepper.dim() != 2 * chart.dof() {
            return Err(Error::InvalidParameter(format!(
                "canonical stepper has dimension {}, chart needs {}",
                stepper.dim(),
                2 * chart.dof()
            )));
        }
        Ok(Self {
            chart,
            factory: Box::new(factory),
            stepper,
            casimirs,
        })
    }

    pub fn casimirs(&self) -> &[f64] {
        &self.casimirs
    }

    pub fn chart(&self) -> &C {
        &self.chart
    }

    pub fn stepper(&self) -> &S {
        &self.stepper
    }

    /// One step in canonical coordinates, without mapping back.
    pub fn canonical_step(&self, z: &Vector, h: f64, dw: &[f64]) -> Result<Vector> {
        self.stepper.step(z, h, dw)
    }

    /// One step with the Casimirs taken from `y` instead of the frozen ones.
    pub fn local_step(&self, y: &Vector, h: f64, dw: &[f64]) -> Result<Vector> {
        let ybar = self.canonical(y)?;
        let casimirs = &ybar.as_slice()[2 * self.chart.dof()..];
        let stepper = (self.factory)(casimirs)?;
        self.advance(&stepper, &ybar, casimirs, h, dw)
    }

    fn canonical(&self, y: &Vector) -> Result<Vector> {
        if !self.chart.contains(y) {
            return Err(Error::domain(y.as_slice(), "state left the chart domain"));
        }
        self.chart.to_canonical(y)
    }

    fn advance(&self, stepper: &S, ybar: &Vector, casimirs: &[f64], h: f64, dw: &[f64]) -> Result<Vector> {
        let n2 = 2 * self.chart.dof();
        let z = ybar.rows(0, n2).into_owned();
        let z_next = stepper.step(&z, h, dw)?;
        let mut ybar_next = Vector::zeros(self.chart.dim());
        ybar_next.rows_mut(0, n2).copy_from(&z_next);
        for (i, c) in casimirs.iter().enumerate() {
            ybar_next[n2 + i] = *c;
        }
        let next = self.chart.from_canonical(&ybar_next)?;
        if next.iter().any(|v| !v.is_finite()) || !self.chart.contains(&next) {
            return Err(Error::domain(next.as_slice(), "iterate left the chart domain"));
        }
        Ok(next)
    }
}

/// Poisson integrator from a chart and a factory for a symplectic stepper
/// on the canonical system with given Casimirs.
pub fn poisson_integrator<C, S, F>(chart: C, factory: F, y0: &Vector) -> Result<PoissonIntegrator<C, S>>
where
    C: Chart,
    S: Stepper,
    F: Fn(&[f64]) -> Result<S> + Send + Sync + 'static,
{
    PoissonIntegrator::new(chart, factory, y0)
}

impl<C: Chart, S: Stepper> Stepper for PoissonIntegrator<C, S> {
    fn dim(&self) -> usize {
        self.chart.dim()
    }

    fn step(&self, y: &Vector, h: f64, dw: &[f64]) -> Result<Vector> {
        let ybar = self.canonical(y)?;
        self.advance(&self.stepper, &ybar, &self.casimirs, h, dw)
    }
}

/// `theta = id` on a canonical `2n`-dimensional system.
#[derive(Debug, Clone, Copy)]
pub struct IdentityChart {
    pub n: usize,
}

impl Chart for IdentityChart {
    fn dim(&self) -> usize {
        2 * self.n
    }
    fn dof(&self) -> usize {
        self.n
    }
    fn contains(&self, _y: &Vector) -> bool {
        true
    }
    fn to_canonical(&self, y: &Vector) -> Result<Vector> {
        Ok(y.clone())
    }
    fn from_canonical(&self, ybar: &Vector) -> Result<Vector> {
        Ok(ybar.clone())
    }
    fn target(&self) -> Matrix {
        j_inverse(self.n)
    }
    fn has_jacobian(&self) -> bool {
        true
    }
    fn jacobian(&self, _y: &Vector) -> Result<Matrix> {
        Ok(Matrix::identity(2 * self.n, 2 * self.n))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poisson::tests::oscillator;
    use crate::sde::FnStepper;

    fn v(x: &[f64]) -> Vector {
        Vector::from_column_slice(x)
    }

    #[test]
    fn orientation_detection() {
        let std = canonical_target(1, 1, Orientation::Standard);
        assert_eq!(std[(0, 1)], -1.0);
        assert_eq!(Orientation::of(&std, 1).unwrap(), Orientation::Standard);
        let rev = canonical_target(1, 1, Orientation::Reversed);
        assert_eq!(Orientation::of(&rev, 1).unwrap(), Orientation::Reversed);
        assert!(Orientation::of(&Matrix::identity(3, 3), 1).is_err());
    }

    #[test]
    fn identity_chart_on_canonical_system() {
        let pts: Vec<Vector> = (0..10).map(|i| v(&[i as f64 * 0.1, 1.0 - i as f64 * 0.2])).collect();
        let r = verify_chart(&IdentityChart { n: 1 }, &oscillator(), &pts).unwrap();
        assert_eq!(r.max_residual, 0.0);
    }

    #[test]
    fn singular_chart_detected() {
        struct Squash;
        impl Chart for Squash {
            fn dim(&self) -> usize {
                2
            }
            fn dof(&self) -> usize {
                1
            }
            fn contains(&self, _y: &Vector) -> bool {
                true
            }
            fn to_canonical(&self, y: &Vector) -> Result<Vector> {
                Ok(v(&[y[0], y[0]]))
            }
            fn from_canonical(&self, ybar: &Vector) -> Result<Vector> {
                Ok(ybar.clone())
            }
            fn target(&self) -> Matrix {
                j_inverse(1)
            }
        }
        let err = verify_chart(&Squash, &oscillator(), &[v(&[0.5, 0.5])]).unwrap_err();
        assert!(matches!(err, Error::SingularJacobian { .. }));
    }

    #[test]
    fn identity_stepper_gives_identity_map() {
        let id = |_: &[f64]| Ok(FnStepper::new(2, |z: &Vector, _h, _dw: &[f64]| Ok(z.clone())));
        let y0 = v(&[0.3, -0.8]);
        let integ = poisson_integrator(IdentityChart { n: 1 }, id, &y0).unwrap();
        assert_eq!(integ.step(&y0, 0.01, &[0.1]).unwrap(), y0);
    }

    #[test]
    fn transformed_oscillator_matches_hamiltonian() {
        let shs = transform_system(oscillator(), IdentityChart { n: 1 }, &v(&[1.0, 0.0])).unwrap();
        let z = v(&[0.4, 0.7]);
        assert!((shs.hamiltonian(0, &z).unwrap() - 0.5 * (0.16 + 0.49)).abs() < 1e-15);
        let g = shs.gradient(1, &z).unwrap();
        assert!((g - v(&[0.12, 0.21])).amax() < 1e-9);
        let hs = shs.hessian(0, &z).unwrap();
        assert!((hs - Matrix::identity(2, 2)).amax() < 1e-6);
    }
}
