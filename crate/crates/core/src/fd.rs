//! Central finite differences used as oracles and as fallbacks for missing
//! analytic derivatives.

use crate::{Matrix, Result, Vector};

/// Default central-difference step: cube root of machine epsilon scaled by
/// `1 + |y|_inf`.
pub fn default_step(y: &Vector) -> f64 {
    f64::EPSILON.cbrt() * (1.0 + y.amax())
}

/// Jacobian of `f` at `y` with central differences; column `j` is
/// `(f(y + eps e_j) - f(y - eps e_j)) / (2 eps)`.
pub fn jacobian<F>(f: F, y: &Vector, eps: f64) -> Result<Matrix>
where
    F: Fn(&Vector) -> Result<Vector>,
{
    let mut cols = Vec::with_capacity(y.len());
    let mut probe = y.clone();
    for j in 0..y.len() {
        probe[j] = y[j] + eps;
        let plus = f(&probe)?;
        probe[j] = y[j] - eps;
        let minus = f(&probe)?;
        probe[j] = y[j];
        cols.push((plus - minus) / (2.0 * eps));
    }
    Ok(Matrix::from_columns(&cols))
}

/// Gradient of a scalar field with central differences.
pub fn gradient<F>(f: F, y: &Vector, eps: f64) -> Result<Vector>
where
    F: Fn(&Vector) -> Result<f64>,
{
    let mut g = Vector::zeros(y.len());
    let mut probe = y.clone();
    for j in 0..y.len() {
        probe[j] = y[j] + eps;
        let plus = f(&probe)?;
        probe[j] = y[j] - eps;
        let minus = f(&probe)?;
        probe[j] = y[j];
        g[j] = (plus - minus) / (2.0 * eps);
    }
    Ok(g)
}

/// Derivatives of a matrix field: entry `s` of the result is `dM/dy_s`.
pub fn matrix_derivative<F>(f: F, y: &Vector, eps: f64) -> Result<Vec<Matrix>>
where
    F: Fn(&Vector) -> Result<Matrix>,
{
    let mut out = Vec::with_capacity(y.len());
    let mut probe = y.clone();
    for s in 0..y.len() {
        probe[s] = y[s] + eps;
        let plus = f(&probe)?;
        probe[s] = y[s] - eps;
        let minus = f(&probe)?;
        probe[s] = y[s];
        out.push((plus - minus) / (2.0 * eps));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_map_is_exact() {
        let m = Matrix::from_row_slice(2, 2, &[1.0, 2.0, -3.0, 0.5]);
        let y = Vector::from_vec(vec![0.3, -0.7]);
        let jac = jacobian(|x| Ok(&m * x), &y, 1e-3).unwrap();
        assert!((jac - &m).amax() < 1e-12);
    }

    #[test]
    fn quadratic_gradient() {
        let y = Vector::from_vec(vec![1.0, 2.0]);
        let g = gradient(|x| Ok(x[0] * x[0] + 3.0 * x[0] * x[1]), &y, default_step(&y)).unwrap();
        assert!((g[0] - 8.0).abs() < 1e-8);
        assert!((g[1] - 3.0).abs() < 1e-8);
    }
}
