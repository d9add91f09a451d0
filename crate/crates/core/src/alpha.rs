//! The alpha-generating-function symplectic schemes for canonical stochastic
//! Hamiltonian systems with one noise channel.
//!
//! With `Z = (P, Q)` the truncated generating function is
//! `S(P^, Q^) = H_0 h + H_1 dW + (2 alpha - 1) (dH_1/dQ . dH_1/dP) dW^2 / 2`
//! and one step solves
//! `P' = P - dS/dQ^`, `Q' = Q + dS/dP^` at
//! `P^ = (1 - alpha) P + alpha P'`, `Q^ = (1 - alpha) Q' + alpha Q`.

use crate::canonical::{j_inverse, CanonicalShs};
use crate::noise::TruncationPolicy;
use crate::sde::{fixed_point, Stepper, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::{fd, Error, Result, Vector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaSchemeConfig {
    pub alpha: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub truncation: TruncationPolicy,
}

impl AlphaSchemeConfig {
    /// `tol = 1e-12`, 100 iterations, truncation with `k = 4`.
    pub fn new(alpha: f64) -> Result<Self> {
        let cfg = Self {
            alpha,
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            truncation: TruncationPolicy::default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn with_truncation(mut self, truncation: TruncationPolicy) -> Self {
        self.truncation = truncation;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidParameter(format!("alpha = {} outside [0, 1]", self.alpha)));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParameter(format!("tolerance {} must be positive", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter("max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

/// Partial derivatives of the truncated generating function.
#[derive(Debug, Clone, PartialEq)]
pub struct SbarGradient {
    pub d_p: Vector,
    pub d_q: Vector,
}

fn check_noise<S: CanonicalShs + ?Sized>(shs: &S) -> Result<()> {
    if shs.noise_dim() > 1 {
        return Err(Error::Unsupported(format!(
            "alpha-generating schemes need a single noise channel, got {}",
            shs.noise_dim()
        )));
    }
    Ok(())
}

/// Gradient of the truncated generating function at `(P^, Q^)`.
pub fn sbar_gradient<S: CanonicalShs + ?Sized>(
    shs: &S,
    p_hat: &Vector,
    q_hat: &Vector,
    h: f64,
    dw: f64,
    alpha: f64,
) -> Result<SbarGradient> {
    check_noise(shs)?;
    let n = shs.dof();
    let mut z = Vector::zeros(2 * n);
    z.rows_mut(0, n).copy_from(p_hat);
    z.rows_mut(n, n).copy_from(q_hat);
    let g = sbar_gradient_z(shs, &z, h, dw, alpha)?;
    Ok(SbarGradient {
        d_p: g.rows(0, n).into_owned(),
        d_q: g.rows(n, n).into_owned(),
    })
}

fn sbar_gradient_z<S: CanonicalShs + ?Sized>(shs: &S, z: &Vector, h: f64, dw: f64, alpha: f64) -> Result<Vector> {
    let mut g = shs.gradient(0, z)? * h;
    if shs.noise_dim() == 0 {
        return Ok(g);
    }
    let g1 = shs.gradient(1, z)?;
    g += &g1 * dw;
    let coeff = (2.0 * alpha - 1.0) * 0.5 * dw * dw;
    if coeff != 0.0 {
        if !shs.has_hessian() {
            return Err(Error::MissingDerivative("noise Hamiltonian Hessian"));
        }
        // d(H_Q . H_P) = Hess (H_Q; H_P)
        let n = shs.dof();
        let mut swapped = Vector::zeros(2 * n);
        swapped.rows_mut(0, n).copy_from(&g1.rows(n, n));
        swapped.rows_mut(n, n).copy_from(&g1.rows(0, n));
        g += shs.hessian(1, z)? * swapped * coeff;
    }
    Ok(g)
}

/// One implicit step from `z = (P, Q)`; `dw` must already be truncated.
pub fn alpha_step<S: CanonicalShs + ?Sized>(
    shs: &S,
    z: &Vector,
    h: f64,
    dw: f64,
    config: &AlphaSchemeConfig,
) -> Result<Vector> {
    alpha_step_counted(shs, z, h, dw, config).map(|(v, _)| v)
}

/// As [`alpha_step`], also returning the number of fixed-point iterations.
pub fn alpha_step_counted<S: CanonicalShs + ?Sized>(
    shs: &S,
    z: &Vector,
    h: f64,
    dw: f64,
    config: &AlphaSchemeConfig,
) -> Result<(Vector, usize)> {
    config.validate()?;
    check_noise(shs)?;
    let n = shs.dof();
    if z.len() != 2 * n {
        return Err(Error::InvalidParameter(format!(
            "state has length {}, expected {}",
            z.len(),
            2 * n
        )));
    }
    let a = config.alpha;
    let p0 = z.rows(0, n);
    let q0 = z.rows(n, n);
    fixed_point(z.clone(), config.tol, config.max_iter, |next| {
        let mut hat = Vector::zeros(2 * n);
        hat.rows_mut(0, n)
            .copy_from(&(p0 * (1.0 - a) + next.rows(0, n) * a));
        hat.rows_mut(n, n)
            .copy_from(&(next.rows(n, n) * (1.0 - a) + q0 * a));
        let g = sbar_gradient_z(shs, &hat, h, dw, a)?;
        let mut out = Vector::zeros(2 * n);
        out.rows_mut(0, n).copy_from(&(p0 - g.rows(n, n)));
        out.rows_mut(n, n).copy_from(&(q0 + g.rows(0, n)));
        Ok(out)
    })
}

/// The alpha-generating scheme as a stepper on `Z`, truncating increments
/// per its configuration.
pub struct AlphaScheme<S> {
    shs: S,
    config: AlphaSchemeConfig,
}

impl<S: CanonicalShs> AlphaScheme<S> {
    pub fn new(shs: S, config: AlphaSchemeConfig) -> Result<Self> {
        config.validate()?;
        check_noise(&shs)?;
        if config.alpha != 0.5 && shs.noise_dim() == 1 && !shs.has_hessian() {
            return Err(Error::MissingDerivative("noise Hamiltonian Hessian"));
        }
        Ok(Self { shs, config })
    }

    pub fn shs(&self) -> &S {
        &self.shs
    }

    pub fn config(&self) -> &AlphaSchemeConfig {
        &self.config
    }
}

impl<S: CanonicalShs> Stepper for AlphaScheme<S> {
    fn dim(&self) -> usize {
        2 * self.shs.dof()
    }

    fn step(&self, z: &Vector, h: f64, dw: &[f64]) -> Result<Vector> {
        let w = match dw.first() {
            Some(&w) => self.config.truncation.apply_increment(w, h)?,
            None => 0.0,
        };
        alpha_step(&self.shs, z, h, w, &self.config)
    }
}

/// `||M J^{-1} M^T - J^{-1}||_inf` with `M` the central-difference Jacobian
/// of `map` at `z`.
pub fn symplectic_residual<F>(map: F, z: &Vector, eps: f64) -> Result<f64>
where
    F: Fn(&Vector) -> Result<Vector>,
{
    if !z.len().is_multiple_of(2) {
        return Err(Error::InvalidParameter("symplectic residual needs an even dimension".into()));
    }
    let m = fd::jacobian(map, z, eps)?;
    let j = j_inverse(z.len() / 2);
    Ok((&m * &j * m.transpose() - j).amax())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::canonical::ShsSde;
    use crate::sde::midpoint_step;
    use crate::Matrix;
    use proptest::prelude::*;

    fn v(x: &[f64]) -> Vector {
        Vector::from_column_slice(x)
    }

    /// `H_0 = P^2/2 - cos Q`, `H_1 = sin(Q)/2 + P^2/4 + PQ/10`.
    struct Pendulum {
        hessian: bool,
    }

    impl CanonicalShs for Pendulum {
        fn dof(&self) -> usize {
            1
        }
        fn noise_dim(&self) -> usize {
            1
        }
        fn casimirs(&self) -> &[f64] {
            &[]
        }
        fn hamiltonian(&self, r: usize, z: &Vector) -> Result<f64> {
            let (p, q) = (z[0], z[1]);
            Ok(match r {
                0 => 0.5 * p * p - q.cos(),
                _ => 0.5 * q.sin() + 0.25 * p * p + 0.1 * p * q,
            })
        }
        fn gradient(&self, r: usize, z: &Vector) -> Result<Vector> {
            let (p, q) = (z[0], z[1]);
            Ok(match r {
                0 => v(&[p, q.sin()]),
                _ => v(&[0.5 * p + 0.1 * q, 0.5 * q.cos() + 0.1 * p]),
            })
        }
        fn has_hessian(&self) -> bool {
            self.hessian
        }
        fn hessian(&self, r: usize, z: &Vector) -> Result<Matrix> {
            if !self.hessian {
                return Err(Error::MissingDerivative("test"));
            }
            let q = z[1];
            Ok(match r {
                0 => Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, q.cos()]),
                _ => Matrix::from_row_slice(2, 2, &[0.5, 0.1, 0.1, -0.5 * q.sin()]),
            })
        }
    }

    struct Quadratic {
        drift: Matrix,
        noise: Option<Matrix>,
    }

    impl CanonicalShs for Quadratic {
        fn dof(&self) -> usize {
            self.drift.nrows() / 2
        }
        fn noise_dim(&self) -> usize {
            self.noise.is_some() as usize
        }
        fn casimirs(&self) -> &[f64] {
            &[]
        }
        fn hamiltonian(&self, r: usize, z: &Vector) -> Result<f64> {
            let s = if r == 0 { &self.drift } else { self.noise.as_ref().unwrap() };
            Ok(0.5 * z.dot(&(s * z)))
        }
        fn gradient(&self, r: usize, z: &Vector) -> Result<Vector> {
            let s = if r == 0 { &self.drift } else { self.noise.as_ref().unwrap() };
            Ok(s * z)
        }
        fn has_hessian(&self) -> bool {
            true
        }
        fn hessian(&self, r: usize, _z: &Vector) -> Result<Matrix> {
            Ok(if r == 0 { self.drift.clone() } else { self.noise.clone().unwrap() })
        }
    }

    fn cfg(alpha: f64) -> AlphaSchemeConfig {
        AlphaSchemeConfig::new(alpha).unwrap()
    }

    #[test]
    fn rejects_alpha_outside_unit_interval() {
        assert!(AlphaSchemeConfig::new(1.5).is_err());
        assert!(AlphaSchemeConfig::new(-0.1).is_err());
    }

    #[test]
    fn half_alpha_drops_correction() {
        let shs = Pendulum { hessian: false };
        let (p, q) = (v(&[0.3]), v(&[-0.4]));
        let g = sbar_gradient(&shs, &p, &q, 0.01, 0.05, 0.5).unwrap();
        let z = v(&[0.3, -0.4]);
        let expect = shs.gradient(0, &z).unwrap() * 0.01 + shs.gradient(1, &z).unwrap() * 0.05;
        assert!((g.d_p[0] - expect[0]).abs() < 1e-16);
        assert!((g.d_q[0] - expect[1]).abs() < 1e-16);
    }

    #[test]
    fn missing_hessian_is_an_error() {
        let shs = Pendulum { hessian: false };
        let err = sbar_gradient(&shs, &v(&[0.3]), &v(&[0.1]), 0.01, 0.05, 0.0).unwrap_err();
        assert_eq!(err, Error::MissingDerivative("noise Hamiltonian Hessian"));
        assert!(AlphaScheme::new(Pendulum { hessian: false }, cfg(1.0)).is_err());
    }

    #[test]
    fn correction_matches_finite_differences() {
        let shs = Pendulum { hessian: true };
        let z = v(&[0.7, -1.1]);
        let (h, dw, alpha) = (0.02, 0.3, 0.0);
        let sbar = |x: &Vector| -> Result<f64> {
            let g1 = shs.gradient(1, x)?;
            Ok(shs.hamiltonian(0, x)? * h
                + shs.hamiltonian(1, x)? * dw
                + (2.0 * alpha - 1.0) * g1[1] * g1[0] * dw * dw * 0.5)
        };
        let expect = fd::gradient(sbar, &z, 1e-5).unwrap();
        let g = sbar_gradient(&shs, &v(&[z[0]]), &v(&[z[1]]), h, dw, alpha).unwrap();
        assert!((g.d_p[0] - expect[0]).abs() < 1e-9);
        assert!((g.d_q[0] - expect[1]).abs() < 1e-9);
    }

    #[test]
    fn zero_hamiltonians_give_identity_in_one_iteration() {
        let shs = Quadratic {
            drift: Matrix::zeros(2, 2),
            noise: Some(Matrix::zeros(2, 2)),
        };
        let z = v(&[0.4, 2.0]);
        let (next, it) = alpha_step_counted(&shs, &z, 0.1, 0.3, &cfg(0.3)).unwrap();
        assert_eq!(next, z);
        assert_eq!(it, 1);
    }

    #[test]
    fn two_noise_channels_unsupported() {
        struct Two;
        impl CanonicalShs for Two {
            fn dof(&self) -> usize {
                1
            }
            fn noise_dim(&self) -> usize {
                2
            }
            fn casimirs(&self) -> &[f64] {
                &[]
            }
            fn hamiltonian(&self, _r: usize, _z: &Vector) -> Result<f64> {
                Ok(0.0)
            }
            fn gradient(&self, _r: usize, _z: &Vector) -> Result<Vector> {
                Ok(Vector::zeros(2))
            }
        }
        assert!(matches!(
            alpha_step(&Two, &v(&[0.0, 0.0]), 0.1, 0.1, &cfg(0.5)),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn harmonic_midpoint_is_cayley_map() {
        let shs = Quadratic {
            drift: Matrix::identity(2, 2),
            noise: None,
        };
        let h = 0.1;
        let j = j_inverse(1);
        let id = Matrix::identity(2, 2);
        let cayley = (&id - &j * (h / 2.0)).try_inverse().unwrap() * (&id + &j * (h / 2.0));
        let z = v(&[0.8, -0.3]);
        let next = alpha_step(&shs, &z, h, 0.0, &cfg(0.5)).unwrap();
        assert!((next - &cayley * &z).amax() < 1e-12);
        let res = symplectic_residual(|x| alpha_step(&shs, x, h, 0.0, &cfg(0.5)), &z, 1e-6).unwrap();
        assert!(res < 1e-9, "residual {res}");
        assert!((&cayley * &j * cayley.transpose() - j).amax() < 1e-12);
    }

    #[test]
    fn symplectic_for_alpha_family() {
        let shs = Pendulum { hessian: true };
        let z = v(&[0.6, 1.2]);
        for alpha in [0.0, 0.25, 0.5, 0.75, 1.0] {
            let c = cfg(alpha);
            let res = symplectic_residual(|x| alpha_step(&shs, x, 0.05, 0.2, &c), &z, 1e-6).unwrap();
            assert!(res < 1e-6, "alpha {alpha}: {res}");
        }
    }

    #[test]
    fn euler_step_is_not_symplectic() {
        let shs = Pendulum { hessian: true };
        let euler = |x: &Vector| -> Result<Vector> {
            let g0 = shs.gradient(0, x)?;
            let g1 = shs.gradient(1, x)?;
            let j = j_inverse(1);
            Ok(x + &j * g0 * 0.05 + &j * g1 * 0.2)
        };
        assert!(symplectic_residual(euler, &v(&[0.6, 1.2]), 1e-6).unwrap() > 1e-3);
    }

    #[test]
    fn large_steps_fail_to_converge() {
        let shs = Pendulum { hessian: true };
        let c = cfg(0.5).with_max_iter(20);
        let err = alpha_step(&shs, &v(&[3.0, 1.0]), 5.0, 0.0, &c).unwrap_err();
        assert!(matches!(err, Error::NonConvergence { .. } | Error::Divergence));
    }

    #[test]
    fn stepper_truncates_increments() {
        let shs = Quadratic {
            drift: Matrix::zeros(2, 2),
            noise: Some(Matrix::identity(2, 2)),
        };
        let scheme = AlphaScheme::new(shs, cfg(0.5)).unwrap();
        let h = 0.01;
        let bound = TruncationPolicy::default().bound(h).unwrap() * h.sqrt();
        let z = v(&[1.0, 0.0]);
        let a = scheme.step(&z, h, &[10.0]).unwrap();
        let b = alpha_step(scheme.shs(), &z, h, bound, scheme.config()).unwrap();
        assert!((a - b).amax() < 1e-15);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn adjoint_step_returns(p in -1.5f64..1.5, q in -1.5f64..1.5, dw in -0.3f64..0.3, alpha in 0.0f64..=1.0) {
            let shs = Pendulum { hessian: true };
            let h = 0.02;
            let z = v(&[p, q]);
            let fwd = alpha_step(&shs, &z, h, dw, &cfg(alpha)).unwrap();
            let back = alpha_step(&shs, &fwd, -h, -dw, &cfg(1.0 - alpha)).unwrap();
            prop_assert!((back - z).amax() < 10.0 * DEFAULT_TOL);
        }

        #[test]
        fn half_alpha_equals_midpoint(p in -1.5f64..1.5, q in -1.5f64..1.5, dw in -0.3f64..0.3) {
            let shs = Pendulum { hessian: true };
            let h = 0.02;
            let z = v(&[p, q]);
            let a = alpha_step(&shs, &z, h, dw, &cfg(0.5)).unwrap();
            let m = midpoint_step(&ShsSde::new(&shs), &z, h, &[dw], DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
            prop_assert!((a - m).amax() < 10.0 * DEFAULT_TOL);
        }
    }
}
