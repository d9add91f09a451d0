//! Stochastic Poisson systems `dy = B(y) (grad K_0 dt + sum_r grad K_r o dW_r)`
//! and numerical validators for their structure.

use rayon::prelude::*;

use crate::noise::WienerIncrements;
use crate::sde::{integrate_endpoint, Midpoint, StratonovichSde, DEFAULT_MAX_ITER};
use crate::{fd, Error, Matrix, Result, Vector};

/// Structure matrix field plus Hamiltonians `K_0 .. K_m`.
///
/// Hamiltonian index `0` is the drift Hamiltonian; index `r >= 1` drives
/// noise channel `r - 1`.
pub trait PoissonSystem: Send + Sync {
    fn dim(&self) -> usize;
    fn noise_dim(&self) -> usize;
    /// Declared (not verified) rank `2n` of `B`.
    fn rank(&self) -> usize;

    fn contains(&self, _y: &Vector) -> bool {
        true
    }

    fn structure(&self, y: &Vector) -> Result<Matrix>;

    fn has_structure_derivative(&self) -> bool {
        false
    }

    /// Entry `s` is `dB/dy_s`.
    fn structure_derivative(&self, _y: &Vector) -> Result<Vec<Matrix>> {
        Err(Error::MissingDerivative("structure matrix derivative"))
    }

    fn hamiltonian(&self, r: usize, y: &Vector) -> Result<f64>;
    fn hamiltonian_gradient(&self, r: usize, y: &Vector) -> Result<Vector>;

    fn has_hamiltonian_hessian(&self) -> bool {
        false
    }

    fn hamiltonian_hessian(&self, _r: usize, _y: &Vector) -> Result<Matrix> {
        Err(Error::MissingDerivative("Hamiltonian Hessian"))
    }
}

impl<T: PoissonSystem + ?Sized> PoissonSystem for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn noise_dim(&self) -> usize {
        (**self).noise_dim()
    }
    fn rank(&self) -> usize {
        (**self).rank()
    }
    fn contains(&self, y: &Vector) -> bool {
        (**self).contains(y)
    }
    fn structure(&self, y: &Vector) -> Result<Matrix> {
        (**self).structure(y)
    }
    fn has_structure_derivative(&self) -> bool {
        (**self).has_structure_derivative()
    }
    fn structure_derivative(&self, y: &Vector) -> Result<Vec<Matrix>> {
        (**self).structure_derivative(y)
    }
    fn hamiltonian(&self, r: usize, y: &Vector) -> Result<f64> {
        (**self).hamiltonian(r, y)
    }
    fn hamiltonian_gradient(&self, r: usize, y: &Vector) -> Result<Vector> {
        (**self).hamiltonian_gradient(r, y)
    }
    fn has_hamiltonian_hessian(&self) -> bool {
        (**self).has_hamiltonian_hessian()
    }
    fn hamiltonian_hessian(&self, r: usize, y: &Vector) -> Result<Matrix> {
        (**self).hamiltonian_hessian(r, y)
    }
}

impl<T: PoissonSystem + ?Sized> PoissonSystem for Box<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn noise_dim(&self) -> usize {
        (**self).noise_dim()
    }
    fn rank(&self) -> usize {
        (**self).rank()
    }
    fn contains(&self, y: &Vector) -> bool {
        (**self).contains(y)
    }
    fn structure(&self, y: &Vector) -> Result<Matrix> {
        (**self).structure(y)
    }
    fn has_structure_derivative(&self) -> bool {
        (**self).has_structure_derivative()
    }
    fn structure_derivative(&self, y: &Vector) -> Result<Vec<Matrix>> {
        (**self).structure_derivative(y)
    }
    fn hamiltonian(&self, r: usize, y: &Vector) -> Result<f64> {
        (**self).hamiltonian(r, y)
    }
    fn hamiltonian_gradient(&self, r: usize, y: &Vector) -> Result<Vector> {
        (**self).hamiltonian_gradient(r, y)
    }
    fn has_hamiltonian_hessian(&self) -> bool {
        (**self).has_hamiltonian_hessian()
    }
    fn hamiltonian_hessian(&self, r: usize, y: &Vector) -> Result<Matrix> {
        (**self).hamiltonian_hessian(r, y)
    }
}

impl<T: PoissonSystem + ?Sized> PoissonSystem for std::sync::Arc<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn noise_dim(&self) -> usize {
        (**self).noise_dim()
    }
    fn rank(&self) -> usize {
        (**self).rank()
    }
    fn contains(&self, y: &Vector) -> bool {
        (**self).contains(y)
    }
    fn structure(&self, y: &Vector) -> Result<Matrix> {
        (**self).structure(y)
    }
    fn has_structure_derivative(&self) -> bool {
        (**self).has_structure_derivative()
    }
    fn structure_derivative(&self, y: &Vector) -> Result<Vec<Matrix>> {
        (**self).structure_derivative(y)
    }
    fn hamiltonian(&self, r: usize, y: &Vector) -> Result<f64> {
        (**self).hamiltonian(r, y)
    }
    fn hamiltonian_gradient(&self, r: usize, y: &Vector) -> Result<Vector> {
        (**self).hamiltonian_gradient(r, y)
    }
    fn has_hamiltonian_hessian(&self) -> bool {
        (**self).has_hamiltonian_hessian()
    }
    fn hamiltonian_hessian(&self, r: usize, y: &Vector) -> Result<Matrix> {
        (**self).hamiltonian_hessian(r, y)
    }
}

/// Where derivative data comes from when the system lacks it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Derivatives {
    #[default]
    AnalyticOnly,
    AllowFiniteDifferences,
}

/// `dB/dy_s` for all `s`, analytic if available.
pub fn structure_derivative<P: PoissonSystem + ?Sized>(
    sys: &P,
    y: &Vector,
    derivatives: Derivatives,
) -> Result<Vec<Matrix>> {
    if sys.has_structure_derivative() {
        sys.structure_derivative(y)
    } else if derivatives == Derivatives::AllowFiniteDifferences {
        fd::matrix_derivative(|x| sys.structure(x), y, fd::default_step(y))
    } else {
        Err(Error::MissingDerivative("structure matrix derivative"))
    }
}

/// `M_i(y) = B'(y)(grad K_i) + B(y) hess K_i`, the Jacobian of the vector
/// field `B grad K_i`.
pub fn generator_matrix<P: PoissonSystem + ?Sized>(sys: &P, i: usize, y: &Vector) -> Result<Matrix> {
    let db = sys.structure_derivative(y)?;
    let grad = sys.hamiltonian_gradient(i, y)?;
    let hess = sys.hamiltonian_hessian(i, y)?;
    let cols: Vec<Vector> = db.iter().map(|d| d * &grad).collect();
    Ok(Matrix::from_columns(&cols) + sys.structure(y)? * hess)
}

/// The SDE coefficients `a = B grad K_0`, `b_r = B grad K_{r+1}` of a Poisson
/// system.
#[derive(Debug, Clone)]
pub struct PoissonSde<P> {
    sys: P,
}

impl<P: PoissonSystem> PoissonSde<P> {
    pub fn new(sys: P) -> Self {
        Self { sys }
    }

    pub fn system(&self) -> &P {
        &self.sys
    }
}

/// Drift and diffusion fields of `sys`.
pub fn drift_and_diffusions<P: PoissonSystem>(sys: P) -> PoissonSde<P> {
    PoissonSde::new(sys)
}

impl<P: PoissonSystem> StratonovichSde for PoissonSde<P> {
    fn dim(&self) -> usize {
        self.sys.dim()
    }
    fn noise_dim(&self) -> usize {
        self.sys.noise_dim()
    }
    fn drift(&self, y: &Vector) -> Result<Vector> {
        Ok(self.sys.structure(y)? * self.sys.hamiltonian_gradient(0, y)?)
    }
    fn diffusion(&self, r: usize, y: &Vector) -> Result<Vector> {
        Ok(self.sys.structure(y)? * self.sys.hamiltonian_gradient(r + 1, y)?)
    }
    fn has_diffusion_jacobian(&self) -> bool {
        self.sys.has_structure_derivative() && self.sys.has_hamiltonian_hessian()
    }
    fn diffusion_jacobian(&self, r: usize, y: &Vector) -> Result<Matrix> {
        generator_matrix(&self.sys, r + 1, y)
    }
}

/// `{F, G}(y) = grad F^T B(y) grad G`.
pub fn bracket<P, F, G>(grad_f: F, grad_g: G, sys: &P, y: &Vector) -> Result<f64>
where
    P: PoissonSystem + ?Sized,
    F: Fn(&Vector) -> Vector,
    G: Fn(&Vector) -> Vector,
{
    let b = sys.structure(y)?;
    Ok(grad_f(y).dot(&(b * grad_g(y))))
}

/// Worst residual of a pointwise check.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub max_residual: f64,
    pub worst_point: Vector,
    pub points_tested: usize,
}

impl CheckReport {
    pub fn passes(&self, threshold: f64) -> bool {
        self.max_residual < threshold
    }
}

/// Evaluates `residual` at every point (in parallel) and keeps the first
/// worst one.
pub fn check_points<F>(points: &[Vector], residual: F) -> Result<CheckReport>
where
    F: Fn(&Vector) -> Result<f64> + Sync,
{
    if points.is_empty() {
        return Err(Error::InvalidParameter("no points to check".into()));
    }
    let values: Vec<f64> = points.par_iter().map(&residual).collect::<Result<_>>()?;
    let mut worst = 0;
    for (i, &v) in values.iter().enumerate() {
        // NaN residuals count as failures.
        if v.is_nan() {
            worst = i;
            break;
        }
        if v > values[worst] {
            worst = i;
        }
    }
    Ok(CheckReport {
        max_residual: values[worst],
        worst_point: points[worst].clone(),
        points_tested: points.len(),
    })
}

/// `max ||B(y) + B(y)^T||_inf` over the points.
pub fn check_skew<P: PoissonSystem + ?Sized>(sys: &P, points: &[Vector]) -> Result<CheckReport> {
    check_points(points, |y| {
        let b = sys.structure(y)?;
        Ok((&b + b.transpose()).amax())
    })
}

/// Cyclic Jacobi residual
/// `max_{i,j,k} |sum_s (db_ij/dy_s b_sk + db_jk/dy_s b_si + db_ki/dy_s b_sj)|`.
pub fn check_jacobi<P: PoissonSystem + ?Sized>(
    sys: &P,
    points: &[Vector],
    derivatives: Derivatives,
) -> Result<CheckReport> {
    check_points(points, |y| {
        let b = sys.structure(y)?;
        let db = structure_derivative(sys, y, derivatives)?;
        Ok(jacobi_residual(&b, &db))
    })
}

fn jacobi_residual(b: &Matrix, db: &[Matrix]) -> f64 {
    let d = b.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                let mut acc = 0.0;
                for (s, ds) in db.iter().enumerate() {
                    acc += ds[(i, j)] * b[(s, k)] + ds[(j, k)] * b[(s, i)] + ds[(k, i)] * b[(s, j)];
                }
                worst = worst.max(acc.abs());
            }
        }
    }
    worst
}

/// `max ||grad C(y)^T B(y)||_inf` over the points.
pub fn check_casimir<P, F>(grad_c: F, sys: &P, points: &[Vector]) -> Result<CheckReport>
where
    P: PoissonSystem + ?Sized,
    F: Fn(&Vector) -> Vector + Sync,
{
    check_points(points, |y| {
        let b = sys.structure(y)?;
        Ok((grad_c(y).transpose() * b).amax())
    })
}

/// Central-difference Jacobian of a one-step map with its increments held
/// fixed inside `map`.
pub fn step_jacobian_fd<F>(map: F, y: &Vector, eps: f64) -> Result<Matrix>
where
    F: Fn(&Vector) -> Result<Vector>,
{
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!("fd step {eps} must be positive")));
    }
    fd::jacobian(map, y, eps)
}

/// `||M B(y) M^T - B(phi(y))||_inf` with `M` the fd Jacobian of `phi` at `y`.
pub fn poisson_map_residual<P, F>(map: F, sys: &P, y: &Vector, eps: f64) -> Result<f64>
where
    P: PoissonSystem + ?Sized,
    F: Fn(&Vector) -> Result<Vector>,
{
    let m = step_jacobian_fd(&map, y, eps)?;
    let image = map(y)?;
    let lhs = &m * sys.structure(y)? * m.transpose();
    Ok((lhs - sys.structure(&image)?).amax())
}

/// State plus first variations `z_j = d phi_t / d y0_j`, stacked as
/// `[y; z_1; ...; z_d]`.
pub struct VariationalSde<P> {
    sys: P,
}

impl<P: PoissonSystem> VariationalSde<P> {
    pub fn new(sys: P) -> Result<Self> {
        if !(sys.has_structure_derivative() && sys.has_hamiltonian_hessian()) {
            return Err(Error::MissingDerivative(
                "variational equation needs dB and Hamiltonian Hessians",
            ));
        }
        Ok(Self { sys })
    }

    fn field(&self, i: usize, x: &Vector) -> Result<Vector> {
        let d = self.sys.dim();
        let y = x.rows(0, d).into_owned();
        let b = self.sys.structure(&y)?;
        let m = generator_matrix(&self.sys, i, &y)?;
        let mut out = Vector::zeros(d * (d + 1));
        out.rows_mut(0, d)
            .copy_from(&(b * self.sys.hamiltonian_gradient(i, &y)?));
        for j in 0..d {
            let z = x.rows(d * (j + 1), d);
            out.rows_mut(d * (j + 1), d).copy_from(&(&m * z));
        }
        Ok(out)
    }

    /// Initial augmented state `[y0; e_1; ...; e_d]`.
    pub fn initial(&self, y0: &Vector) -> Vector {
        let d = self.sys.dim();
        let mut x = Vector::zeros(d * (d + 1));
        x.rows_mut(0, d).copy_from(y0);
        for j in 0..d {
            x[d * (j + 1) + j] = 1.0;
        }
        x
    }

    /// Splits an augmented state into `(y, [z_1 ... z_d])`.
    pub fn split(&self, x: &Vector) -> (Vector, Matrix) {
        let d = self.sys.dim();
        let y = x.rows(0, d).into_owned();
        let z = Matrix::from_column_slice(d, d, &x.as_slice()[d..]);
        (y, z)
    }
}

impl<P: PoissonSystem> StratonovichSde for VariationalSde<P> {
    fn dim(&self) -> usize {
        let d = self.sys.dim();
        d * (d + 1)
    }
    fn noise_dim(&self) -> usize {
        self.sys.noise_dim()
    }
    fn drift(&self, x: &Vector) -> Result<Vector> {
        self.field(0, x)
    }
    fn diffusion(&self, r: usize, x: &Vector) -> Result<Vector> {
        self.field(r + 1, x)
    }
}

/// Integrates the variational equation alongside the state with the
/// midpoint rule on the grid of `noise`; returns `(y(T), d y(T) / d y0)`.
pub fn variational_flow<P: PoissonSystem>(
    sys: P,
    y0: &Vector,
    noise: &WienerIncrements,
    tol: f64,
) -> Result<(Vector, Matrix)> {
    let sde = VariationalSde::new(sys)?;
    let x0 = sde.initial(y0);
    let stepper = Midpoint::new(&sde).with_tol(tol).with_max_iter(DEFAULT_MAX_ITER);
    let x = integrate_endpoint(&stepper, &x0, noise)?;
    Ok(sde.split(&x))
}

/// Jacobian of the flow map at `y0` from the variational equation.
pub fn variational_jacobian<P: PoissonSystem>(
    sys: P,
    y0: &Vector,
    noise: &WienerIncrements,
    tol: f64,
) -> Result<Matrix> {
    variational_flow(sys, y0, noise, tol).map(|(_, z)| z)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::noise::{sample_increments, TimeGrid};

    /// `B = J^{-1} = [[0, -I], [I, 0]]` with quadratic Hamiltonians
    /// `K_r(z) = 1/2 z^T S_r z`.
    pub(crate) struct LinearCanonical {
        pub n: usize,
        pub hessians: Vec<Matrix>,
    }

    pub(crate) fn j_inv(n: usize) -> Matrix {
        let mut m = Matrix::zeros(2 * n, 2 * n);
        for i in 0..n {
            m[(i, n + i)] = -1.0;
            m[(n + i, i)] = 1.0;
        }
        m
    }

    impl PoissonSystem for LinearCanonical {
        fn dim(&self) -> usize {
            2 * self.n
        }
        fn noise_dim(&self) -> usize {
            self.hessians.len() - 1
        }
        fn rank(&self) -> usize {
            2 * self.n
        }
        fn structure(&self, _y: &Vector) -> Result<Matrix> {
            Ok(j_inv(self.n))
        }
        fn has_structure_derivative(&self) -> bool {
            true
        }
        fn structure_derivative(&self, _y: &Vector) -> Result<Vec<Matrix>> {
            Ok(vec![Matrix::zeros(2 * self.n, 2 * self.n); 2 * self.n])
        }
        fn hamiltonian(&self, r: usize, y: &Vector) -> Result<f64> {
            Ok(0.5 * y.dot(&(&self.hessians[r] * y)))
        }
        fn hamiltonian_gradient(&self, r: usize, y: &Vector) -> Result<Vector> {
            Ok(&self.hessians[r] * y)
        }
        fn has_hamiltonian_hessian(&self) -> bool {
            true
        }
        fn hamiltonian_hessian(&self, r: usize, _y: &Vector) -> Result<Matrix> {
            Ok(self.hessians[r].clone())
        }
    }

    pub(crate) fn oscillator() -> LinearCanonical {
        LinearCanonical {
            n: 1,
            hessians: vec![Matrix::identity(2, 2), Matrix::identity(2, 2) * 0.3],
        }
    }

    /// `b_12 = y_1^2` on an otherwise canonical 3x3 structure.
    struct NonJacobi;

    impl PoissonSystem for NonJacobi {
        fn dim(&self) -> usize {
            3
        }
        fn noise_dim(&self) -> usize {
            0
        }
        fn rank(&self) -> usize {
            2
        }
        fn structure(&self, y: &Vector) -> Result<Matrix> {
            Ok(Matrix::from_row_slice(
                3,
                3,
                &[0.0, y[0] * y[0], 1.0, -y[0] * y[0], 0.0, 1.0, -1.0, -1.0, 0.0],
            ))
        }
        fn hamiltonian(&self, _r: usize, _y: &Vector) -> Result<f64> {
            Ok(0.0)
        }
        fn hamiltonian_gradient(&self, _r: usize, _y: &Vector) -> Result<Vector> {
            Ok(Vector::zeros(3))
        }
    }

    struct Corrupted<P>(P);

    impl<P: PoissonSystem> PoissonSystem for Corrupted<P> {
        fn dim(&self) -> usize {
            self.0.dim()
        }
        fn noise_dim(&self) -> usize {
            self.0.noise_dim()
        }
        fn rank(&self) -> usize {
            self.0.rank()
        }
        fn structure(&self, y: &Vector) -> Result<Matrix> {
            Ok(self.0.structure(y)? + Matrix::identity(self.dim(), self.dim()))
        }
        fn hamiltonian(&self, r: usize, y: &Vector) -> Result<f64> {
            self.0.hamiltonian(r, y)
        }
        fn hamiltonian_gradient(&self, r: usize, y: &Vector) -> Result<Vector> {
            self.0.hamiltonian_gradient(r, y)
        }
    }

    fn v(x: &[f64]) -> Vector {
        Vector::from_column_slice(x)
    }

    fn grid_points(d: usize, n: usize) -> Vec<Vector> {
        (0..n)
            .map(|i| Vector::from_fn(d, |j, _| ((i * 7 + j * 3) % 11) as f64 / 5.0 - 1.0))
            .collect()
    }

    #[test]
    fn oscillator_drift() {
        let sde = drift_and_diffusions(oscillator());
        let a = sde.drift(&v(&[0.4, -1.5])).unwrap();
        // a(p, q) = (-q, p)
        assert_eq!(a, v(&[1.5, 0.4]));
    }

    #[test]
    fn canonical_pair_bracket() {
        let sys = oscillator();
        let y = v(&[0.2, 0.9]);
        let p = |_: &Vector| v(&[1.0, 0.0]);
        let q = |_: &Vector| v(&[0.0, 1.0]);
        assert_eq!(bracket(p, q, &sys, &y).unwrap(), -1.0);
        assert_eq!(bracket(p, p, &sys, &y).unwrap(), 0.0);
    }

    #[test]
    fn skew_and_corruption() {
        let pts = grid_points(2, 10);
        assert_eq!(check_skew(&oscillator(), &pts).unwrap().max_residual, 0.0);
        let bad = check_skew(&Corrupted(oscillator()), &pts).unwrap();
        assert!(bad.max_residual >= 2.0);
        assert_eq!(bad.points_tested, 10);
    }

    #[test]
    fn jacobi_constant_and_counterexample() {
        let pts = grid_points(2, 5);
        let r = check_jacobi(&oscillator(), &pts, Derivatives::AnalyticOnly).unwrap();
        assert_eq!(r.max_residual, 0.0);
        let pts3: Vec<Vector> = grid_points(3, 5).into_iter().map(|p| p.add_scalar(2.5)).collect();
        assert!(matches!(
            check_jacobi(&NonJacobi, &pts3, Derivatives::AnalyticOnly),
            Err(Error::MissingDerivative(_))
        ));
        let r = check_jacobi(&NonJacobi, &pts3, Derivatives::AllowFiniteDifferences).unwrap();
        assert!(r.max_residual > 1.0, "{}", r.max_residual);
    }

    #[test]
    fn fd_jacobian_of_linear_map() {
        let m = Matrix::from_row_slice(3, 3, &[1.0, 2.0, 0.0, -1.0, 0.5, 3.0, 0.0, 0.25, -2.0]);
        let y = v(&[0.1, 0.2, 0.3]);
        let jac = step_jacobian_fd(|x| Ok(&m * x), &y, 1e-5).unwrap();
        assert!((jac - &m).amax() < 1e-9);
        let id = step_jacobian_fd(|x| Ok(x.clone()), &y, 1e-5).unwrap();
        assert!((id - Matrix::identity(3, 3)).amax() < 1e-10);
    }

    #[test]
    fn rotation_is_poisson_map() {
        let (c, s) = (0.3f64.cos(), 0.3f64.sin());
        let rot = Matrix::from_row_slice(2, 2, &[c, -s, s, c]);
        let r = poisson_map_residual(|x| Ok(&rot * x), &oscillator(), &v(&[0.5, -0.2]), 1e-6).unwrap();
        assert!(r < 1e-9);
    }

    #[test]
    fn variational_identity_for_zero_hamiltonians() {
        let sys = LinearCanonical {
            n: 1,
            hessians: vec![Matrix::zeros(2, 2), Matrix::zeros(2, 2)],
        };
        let noise = sample_increments(TimeGrid::new(0.0, 0.5, 50).unwrap(), 1, 4).unwrap();
        let z = variational_jacobian(&sys, &v(&[0.3, 0.1]), &noise, 1e-13).unwrap();
        assert_eq!(z, Matrix::identity(2, 2));
    }

    #[test]
    fn variational_jacobian_is_symplectic_for_linear_shs() {
        let s0 = Matrix::from_row_slice(4, 4, &[
            2.0, 0.3, 0.0, 0.1, 0.3, 1.0, 0.2, 0.0, 0.0, 0.2, 1.5, 0.4, 0.1, 0.0, 0.4, 0.8,
        ]);
        let s1 = Matrix::identity(4, 4) * 0.5;
        let sys = LinearCanonical {
            n: 2,
            hessians: vec![s0, s1],
        };
        let noise = sample_increments(TimeGrid::new(0.0, 1.0, 200).unwrap(), 1, 9).unwrap();
        let z = variational_jacobian(&sys, &v(&[0.1, 0.2, 0.3, 0.4]), &noise, 1e-14).unwrap();
        let j = j_inv(2);
        assert!((&z * &j * z.transpose() - &j).amax() < 1e-8);
        assert!((z.determinant() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn variational_matches_fd_of_midpoint_flow() {
        let sys = oscillator();
        let noise = sample_increments(TimeGrid::new(0.0, 0.2, 100).unwrap(), 1, 2).unwrap();
        let y0 = v(&[0.7, -0.4]);
        let z = variational_jacobian(&sys, &y0, &noise, 1e-14).unwrap();
        let sde = drift_and_diffusions(&sys);
        let mp = Midpoint::new(&sde).with_tol(1e-14);
        let flow = |x: &Vector| integrate_endpoint(&mp, x, &noise);
        let fdj = step_jacobian_fd(flow, &y0, 1e-6).unwrap();
        assert!((z - fdj).amax() < 1e-7);
    }
}
