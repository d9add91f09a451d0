//! Stratonovich SDEs, baseline one-step schemes, trajectory recording and
//! the coupled-path strong error estimator.

use rayon::prelude::*;

use crate::noise::{sample_increments_stream, TimeGrid, TruncationPolicy, WienerIncrements};
use crate::{fd, Error, Matrix, Result, Vector};

/// `dy = a(y) dt + sum_r b_r(y) o dW_r`.
pub trait StratonovichSde: Send + Sync {
    fn dim(&self) -> usize;
    fn noise_dim(&self) -> usize;
    fn drift(&self, y: &Vector) -> Result<Vector>;
    fn diffusion(&self, r: usize, y: &Vector) -> Result<Vector>;

    fn has_diffusion_jacobian(&self) -> bool {
        false
    }

    /// `b_r'(y)`, the Jacobian of the `r`-th diffusion field.
    fn diffusion_jacobian(&self, _r: usize, _y: &Vector) -> Result<Matrix> {
        Err(Error::MissingDerivative("diffusion Jacobian"))
    }
}

impl<T: StratonovichSde + ?Sized> StratonovichSde for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn noise_dim(&self) -> usize {
        (**self).noise_dim()
    }
    fn drift(&self, y: &Vector) -> Result<Vector> {
        (**self).drift(y)
    }
    fn diffusion(&self, r: usize, y: &Vector) -> Result<Vector> {
        (**self).diffusion(r, y)
    }
    fn has_diffusion_jacobian(&self) -> bool {
        (**self).has_diffusion_jacobian()
    }
    fn diffusion_jacobian(&self, r: usize, y: &Vector) -> Result<Matrix> {
        (**self).diffusion_jacobian(r, y)
    }
}

impl<T: StratonovichSde + ?Sized> StratonovichSde for Box<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn noise_dim(&self) -> usize {
        (**self).noise_dim()
    }
    fn drift(&self, y: &Vector) -> Result<Vector> {
        (**self).drift(y)
    }
    fn diffusion(&self, r: usize, y: &Vector) -> Result<Vector> {
        (**self).diffusion(r, y)
    }
    fn has_diffusion_jacobian(&self) -> bool {
        (**self).has_diffusion_jacobian()
    }
    fn diffusion_jacobian(&self, r: usize, y: &Vector) -> Result<Matrix> {
        (**self).diffusion_jacobian(r, y)
    }
}

impl<T: StratonovichSde + ?Sized> StratonovichSde for std::sync::Arc<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn noise_dim(&self) -> usize {
        (**self).noise_dim()
    }
    fn drift(&self, y: &Vector) -> Result<Vector> {
        (**self).drift(y)
    }
    fn diffusion(&self, r: usize, y: &Vector) -> Result<Vector> {
        (**self).diffusion(r, y)
    }
    fn has_diffusion_jacobian(&self) -> bool {
        (**self).has_diffusion_jacobian()
    }
    fn diffusion_jacobian(&self, r: usize, y: &Vector) -> Result<Matrix> {
        (**self).diffusion_jacobian(r, y)
    }
}

/// `dy = a(y) dt + sum_r b_r(y) dW_r` in the Ito sense.
pub trait ItoSde: Send + Sync {
    fn dim(&self) -> usize;
    fn noise_dim(&self) -> usize;
    fn ito_drift(&self, y: &Vector) -> Result<Vector>;
    fn diffusion(&self, r: usize, y: &Vector) -> Result<Vector>;
    fn diffusion_jacobian(&self, r: usize, y: &Vector) -> Result<Matrix>;
}

type VectorField = Box<dyn Fn(&Vector) -> Vector + Send + Sync>;
type MatrixField = Box<dyn Fn(&Vector) -> Matrix + Send + Sync>;

/// Stratonovich SDE assembled from closures.
pub struct FnSde {
    dim: usize,
    drift: VectorField,
    diffusions: Vec<VectorField>,
    jacobians: Option<Vec<MatrixField>>,
}

impl FnSde {
    pub fn new(
        dim: usize,
        drift: impl Fn(&Vector) -> Vector + Send + Sync + 'static,
    ) -> Self {
        Self {
            dim,
            drift: Box::new(drift),
            diffusions: Vec::new(),
            jacobians: None,
        }
    }

    pub fn with_diffusion(mut self, b: impl Fn(&Vector) -> Vector + Send + Sync + 'static) -> Self {
        self.diffusions.push(Box::new(b));
        self
    }

    /// Analytic diffusion Jacobians, one per diffusion channel.
    pub fn with_jacobians(mut self, jacobians: Vec<MatrixField>) -> Self {
        self.jacobians = Some(jacobians);
        self
    }
}

impl StratonovichSde for FnSde {
    fn dim(&self) -> usize {
        self.dim
    }
    fn noise_dim(&self) -> usize {
        self.diffusions.len()
    }
    fn drift(&self, y: &Vector) -> Result<Vector> {
        Ok((self.drift)(y))
    }
    fn diffusion(&self, r: usize, y: &Vector) -> Result<Vector> {
        Ok((self.diffusions[r])(y))
    }
    fn has_diffusion_jacobian(&self) -> bool {
        self.jacobians.is_some()
    }
    fn diffusion_jacobian(&self, r: usize, y: &Vector) -> Result<Matrix> {
        match &self.jacobians {
            Some(j) => Ok((j[r])(y)),
            None => Err(Error::MissingDerivative("diffusion Jacobian")),
        }
    }
}

/// Diffusion Jacobian from the SDE, or central differences when allowed.
fn diffusion_jacobian_or_fd<S: StratonovichSde + ?Sized>(
    sde: &S,
    r: usize,
    y: &Vector,
    allow_fd: bool,
) -> Result<Matrix> {
    if sde.has_diffusion_jacobian() {
        sde.diffusion_jacobian(r, y)
    } else if allow_fd {
        fd::jacobian(|x| sde.diffusion(r, x), y, fd::default_step(y))
    } else {
        Err(Error::MissingDerivative(
            "diffusion Jacobian (finite differences disabled)",
        ))
    }
}

/// Ito drift `a(y) + 1/2 sum_r b_r'(y) b_r(y)` of a Stratonovich SDE.
pub fn strat_to_ito_drift<S: StratonovichSde + ?Sized>(
    sde: &S,
    y: &Vector,
    allow_fd: bool,
) -> Result<Vector> {
    let mut a = sde.drift(y)?;
    for r in 0..sde.noise_dim() {
        let b = sde.diffusion(r, y)?;
        let jac = diffusion_jacobian_or_fd(sde, r, y, allow_fd)?;
        a += 0.5 * jac * b;
    }
    Ok(a)
}

/// Ito view of a Stratonovich SDE.
pub struct ItoForm<S> {
    sde: S,
    allow_fd: bool,
}

impl<S: StratonovichSde> ItoForm<S> {
    /// Uses analytic diffusion Jacobians only.
    pub fn new(sde: S) -> Self {
        Self {
            sde,
            allow_fd: false,
        }
    }

    /// Falls back to central differences for missing diffusion Jacobians.
    pub fn with_fd_fallback(sde: S) -> Self {
        Self {
            sde,
            allow_fd: true,
        }
    }

    pub fn inner(&self) -> &S {
        &self.sde
    }
}

impl<S: StratonovichSde> ItoSde for ItoForm<S> {
    fn dim(&self) -> usize {
        self.sde.dim()
    }
    fn noise_dim(&self) -> usize {
        self.sde.noise_dim()
    }
    fn ito_drift(&self, y: &Vector) -> Result<Vector> {
        strat_to_ito_drift(&self.sde, y, self.allow_fd)
    }
    fn diffusion(&self, r: usize, y: &Vector) -> Result<Vector> {
        self.sde.diffusion(r, y)
    }
    fn diffusion_jacobian(&self, r: usize, y: &Vector) -> Result<Matrix> {
        diffusion_jacobian_or_fd(&self.sde, r, y, self.allow_fd)
    }
}

/// A one-step map `(y, h, dW) -> y'`.
pub trait Stepper: Send + Sync {
    fn dim(&self) -> usize;
    fn step(&self, y: &Vector, h: f64, dw: &[f64]) -> Result<Vector>;
}

impl<T: Stepper + ?Sized> Stepper for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn step(&self, y: &Vector, h: f64, dw: &[f64]) -> Result<Vector> {
        (**self).step(y, h, dw)
    }
}

impl<T: Stepper + ?Sized> Stepper for Box<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn step(&self, y: &Vector, h: f64, dw: &[f64]) -> Result<Vector> {
        (**self).step(y, h, dw)
    }
}

impl<T: Stepper + ?Sized> Stepper for std::sync::Arc<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn step(&self, y: &Vector, h: f64, dw: &[f64]) -> Result<Vector> {
        (**self).step(y, h, dw)
    }
}

/// Iterates `x <- map(x)` from `init` until successive iterates differ by
/// less than `tol` in the max norm. Returns the iterate and the number of
/// map evaluations.
pub(crate) fn fixed_point<F>(init: Vector, tol: f64, max_iter: usize, mut map: F) -> Result<(Vector, usize)>
where
    F: FnMut(&Vector) -> Result<Vector>,
{
    let mut x = init;
    let mut last = f64::INFINITY;
    for it in 1..=max_iter {
        let next = map(&x)?;
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence);
        }
        last = (&next - &x).amax();
        x = next;
        if last < tol {
            return Ok((x, it));
        }
    }
    Err(Error::NonConvergence {
        iterations: max_iter,
        residual: last,
    })
}

pub const DEFAULT_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_ITER: usize = 100;

fn check_increments(noise_dim: usize, dw: &[f64]) -> Result<()> {
    if dw.len() != noise_dim {
        return Err(Error::InvalidParameter(format!(
            "got {} Wiener increments for {noise_dim} noise channels",
            dw.len()
        )));
    }
    Ok(())
}

/// Explicit Euler-Maruyama step on the Ito form.
pub fn euler_maruyama_step<I: ItoSde + ?Sized>(sde: &I, y: &Vector, h: f64, dw: &[f64]) -> Result<Vector> {
    check_increments(sde.noise_dim(), dw)?;
    let mut next = y + sde.ito_drift(y)? * h;
    for (r, &w) in dw.iter().enumerate() {
        next += sde.diffusion(r, y)? * w;
    }
    Ok(next)
}

/// Milstein step for a single noise channel:
/// Euler-Maruyama plus `1/2 b'(y) b(y) (dW^2 - h)`.
pub fn milstein_step<I: ItoSde + ?Sized>(sde: &I, y: &Vector, h: f64, dw: &[f64]) -> Result<Vector> {
    if sde.noise_dim() != 1 || dw.len() != 1 {
        return Err(Error::Unsupported(format!(
            "Milstein step needs a single noise channel, got {}",
            sde.noise_dim()
        )));
    }
    let w = dw[0];
    let b = sde.diffusion(0, y)?;
    let jac = sde.diffusion_jacobian(0, y)?;
    let mut next = y + sde.ito_drift(y)? * h + &b * w;
    next += 0.5 * (jac * b) * (w * w - h);
    Ok(next)
}

/// Stratonovich midpoint step `y' = y + a(m) h + sum_r b_r(m) dW_r`,
/// `m = (y + y') / 2`, solved by fixed-point iteration.
pub fn midpoint_step<S: StratonovichSde + ?Sized>(
    sde: &S,
    y: &Vector,
    h: f64,
    dw: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<Vector> {
    midpoint_step_counted(sde, y, h, dw, tol, max_iter).map(|(v, _)| v)
}

pub(crate) fn midpoint_step_counted<S: StratonovichSde + ?Sized>(
    sde: &S,
    y: &Vector,
    h: f64,
    dw: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vector, usize)> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance {tol} must be positive")));
    }
    check_increments(sde.noise_dim(), dw)?;
    fixed_point(y.clone(), tol, max_iter, |next| {
        let mid = (y + next) * 0.5;
        let mut out = y + sde.drift(&mid)? * h;
        for (r, &w) in dw.iter().enumerate() {
            out += sde.diffusion(r, &mid)? * w;
        }
        Ok(out)
    })
}

/// Euler-Maruyama scheme on the Ito form of a Stratonovich SDE.
pub struct EulerMaruyama<I> {
    sde: I,
}

impl<S: StratonovichSde> EulerMaruyama<ItoForm<S>> {
    pub fn from_stratonovich(sde: S) -> Self {
        Self {
            sde: ItoForm::new(sde),
        }
    }
}

impl<I: ItoSde> EulerMaruyama<I> {
    pub fn new(sde: I) -> Self {
        Self { sde }
    }
}

impl<I: ItoSde> Stepper for EulerMaruyama<I> {
    fn dim(&self) -> usize {
        self.sde.dim()
    }
    fn step(&self, y: &Vector, h: f64, dw: &[f64]) -> Result<Vector> {
        euler_maruyama_step(&self.sde, y, h, dw)
    }
}

pub struct Milstein<I> {
    sde: I,
}

impl<I: ItoSde> Milstein<I> {
    pub fn new(sde: I) -> Self {
        Self { sde }
    }
}

impl<I: ItoSde> Stepper for Milstein<I> {
    fn dim(&self) -> usize {
        self.sde.dim()
    }
    fn step(&self, y: &Vector, h: f64, dw: &[f64]) -> Result<Vector> {
        milstein_step(&self.sde, y, h, dw)
    }
}

/// Drift-implicit, diffusion-explicit Euler on the Ito form:
/// `y' = y + a(y') h + sum_r b_r(y) dW_r`.
pub struct DriftImplicitEuler<I> {
    sde: I,
    tol: f64,
    max_iter: usize,
}

impl<I: ItoSde> DriftImplicitEuler<I> {
    pub fn new(sde: I) -> Self {
        Self {
            sde,
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

impl<I: ItoSde> Stepper for DriftImplicitEuler<I> {
    fn dim(&self) -> usize {
        self.sde.dim()
    }
    fn step(&self, y: &Vector, h: f64, dw: &[f64]) -> Result<Vector> {
        check_increments(self.sde.noise_dim(), dw)?;
        let mut explicit = y.clone();
        for (r, &w) in dw.iter().enumerate() {
            explicit += self.sde.diffusion(r, y)? * w;
        }
        fixed_point(y.clone(), self.tol, self.max_iter, |next| {
            Ok(&explicit + self.sde.ito_drift(next)? * h)
        })
        .map(|(v, _)| v)
    }
}

/// Midpoint rule for a Stratonovich SDE, optionally truncating increments.
pub struct Midpoint<S> {
    sde: S,
    tol: f64,
    max_iter: usize,
    truncation: TruncationPolicy,
}

impl<S: StratonovichSde> Midpoint<S> {
    /// Defaults: `tol = 1e-12`, 100 iterations, no truncation.
    pub fn new(sde: S) -> Self {
        Self {
            sde,
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            truncation: TruncationPolicy::disabled(),
        }
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

    pub fn sde(&self) -> &S {
        &self.sde
    }
}

impl<S: StratonovichSde> Stepper for Midpoint<S> {
    fn dim(&self) -> usize {
        self.sde.dim()
    }
    fn step(&self, y: &Vector, h: f64, dw: &[f64]) -> Result<Vector> {
        if self.truncation.is_enabled() {
            let dw = dw
                .iter()
                .map(|&w| self.truncation.apply_increment(w, h))
                .collect::<Result<Vec<_>>>()?;
            midpoint_step(&self.sde, y, h, &dw, self.tol, self.max_iter)
        } else {
            midpoint_step(&self.sde, y, h, dw, self.tol, self.max_iter)
        }
    }
}

/// Stepper from a closure.
pub struct FnStepper<F> {
    dim: usize,
    f: F,
}

impl<F> FnStepper<F>
where
    F: Fn(&Vector, f64, &[f64]) -> Result<Vector> + Send + Sync,
{
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F> Stepper for FnStepper<F>
where
    F: Fn(&Vector, f64, &[f64]) -> Result<Vector> + Send + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }
    fn step(&self, y: &Vector, h: f64, dw: &[f64]) -> Result<Vector> {
        (self.f)(y, h, dw)
    }
}

/// States on a time grid plus named scalar functionals of the states.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    grid: TimeGrid,
    states: Vec<Vector>,
    functionals: Vec<(String, Vec<f64>)>,
}

impl Trajectory {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn states(&self) -> &[Vector] {
        &self.states
    }

    pub fn last(&self) -> &Vector {
        self.states.last().expect("trajectory holds at least y0")
    }

    /// Evaluates `f` on every state and stores it under `name`.
    pub fn record<F>(&mut self, name: impl Into<String>, f: F) -> Result<&[f64]>
    where
        F: Fn(&Vector) -> Result<f64>,
    {
        let values = self.states.iter().map(f).collect::<Result<Vec<_>>>()?;
        self.functionals.push((name.into(), values));
        Ok(&self.functionals.last().unwrap().1)
    }

    pub fn functional(&self, name: &str) -> Option<&[f64]> {
        self.functionals
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
    }

    /// `max_n |f(y_n) - f(y_0)|` for a recorded functional.
    pub fn max_drift(&self, name: &str) -> Option<f64> {
        let v = self.functional(name)?;
        let v0 = v[0];
        Some(v.iter().map(|x| (x - v0).abs()).fold(0.0, f64::max))
    }
}

fn check_noise<S: Stepper + ?Sized>(stepper: &S, y0: &Vector, noise: &WienerIncrements) -> Result<()> {
    if y0.len() != stepper.dim() {
        return Err(Error::InvalidParameter(format!(
            "initial state has dimension {}, stepper expects {}",
            y0.len(),
            stepper.dim()
        )));
    }
    if noise.grid().n_steps() == 0 {
        return Err(Error::InvalidGrid("empty grid".into()));
    }
    Ok(())
}

/// Runs `stepper` over the grid of `noise` starting from `y0`.
pub fn integrate<S: Stepper + ?Sized>(stepper: &S, y0: &Vector, noise: &WienerIncrements) -> Result<Trajectory> {
    check_noise(stepper, y0, noise)?;
    let grid = *noise.grid();
    let h = grid.step();
    let mut states = Vec::with_capacity(grid.n_steps() + 1);
    states.push(y0.clone());
    for j in 0..grid.n_steps() {
        let next = stepper
            .step(&states[j], h, noise.step(j))
            .map_err(|e| Error::StepFailed {
                step: j,
                source: Box::new(e),
            })?;
        states.push(next);
    }
    Ok(Trajectory {
        grid,
        states,
        functionals: Vec::new(),
    })
}

/// Final state only, without storing the path.
pub fn integrate_endpoint<S: Stepper + ?Sized>(stepper: &S, y0: &Vector, noise: &WienerIncrements) -> Result<Vector> {
    check_noise(stepper, y0, noise)?;
    let h = noise.grid().step();
    let mut y = y0.clone();
    for j in 0..noise.grid().n_steps() {
        y = stepper.step(&y, h, noise.step(j)).map_err(|e| Error::StepFailed {
            step: j,
            source: Box::new(e),
        })?;
    }
    Ok(y)
}

/// Least-squares slope of `ln e` against `ln h`.
pub fn fit_slope(step_sizes: &[f64], errors: &[f64]) -> Result<f64> {
    if step_sizes.len() != errors.len() || step_sizes.len() < 2 {
        return Err(Error::InvalidParameter(
            "slope fit needs at least two (h, e) pairs".into(),
        ));
    }
    if step_sizes.iter().chain(errors).any(|v| !(*v > 0.0)) {
        return Err(Error::InvalidParameter(
            "slope fit needs positive step sizes and errors".into(),
        ));
    }
    let xs: Vec<f64> = step_sizes.iter().map(|h| h.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter("step sizes must differ".into()));
    }
    Ok(sxy / sxx)
}

/// What to do when a Monte Carlo sample fails.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FailurePolicy {
    #[default]
    Abort,
    /// Exclude failed samples and report their stream indices.
    Drop,
}

/// Coupled-path strong error experiment.
#[derive(Debug, Clone)]
pub struct MsErrorSetup {
    pub y0: Vector,
    pub t_end: f64,
    pub step_sizes: Vec<f64>,
    pub reference_step: f64,
    pub n_samples: usize,
    pub seed: u64,
    pub noise_dim: usize,
    pub failure: FailurePolicy,
}

/// Root-mean-square endpoint errors per step size.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderEstimate {
    /// Strictly decreasing.
    pub step_sizes: Vec<f64>,
    pub errors: Vec<f64>,
    /// `None` when some error is zero.
    pub slope: Option<f64>,
    pub samples: usize,
    pub dropped: Vec<u64>,
}

/// Strong errors of several schemes against one reference, all driven by
/// the same fine Brownian paths (sample `i` uses stream `i` of the seed).
pub fn ms_errors(schemes: &[&dyn Stepper], reference: &dyn Stepper, setup: &MsErrorSetup) -> Result<Vec<OrderEstimate>> {
    if setup.n_samples == 0 {
        return Err(Error::InvalidParameter("need at least one sample".into()));
    }
    let fine_grid = TimeGrid::with_step(0.0, setup.t_end, setup.reference_step)?;
    let mut step_sizes = setup.step_sizes.clone();
    step_sizes.sort_by(|a, b| b.partial_cmp(a).unwrap());
    step_sizes.dedup();
    let factors = step_sizes
        .iter()
        .map(|&h| {
            let ratio = h / setup.reference_step;
            let f = ratio.round();
            if f < 1.0 || (ratio - f).abs() > 1e-9 * f || fine_grid.n_steps() % (f as usize) != 0 {
                Err(Error::InvalidGrid(format!(
                    "step {h} is not a multiple of the reference step {} dividing the grid",
                    setup.reference_step
                )))
            } else {
                Ok(f as usize)
            }
        })
        .collect::<Result<Vec<_>>>()?;

    let run_sample = |i: u64| -> Result<Vec<Vec<f64>>> {
        let fine = sample_increments_stream(fine_grid, setup.noise_dim, setup.seed, i)?;
        let reference_end = integrate_endpoint(reference, &setup.y0, &fine)?;
        let mut out = vec![Vec::with_capacity(factors.len()); schemes.len()];
        for &factor in &factors {
            let coarse = fine.coarsen(factor)?;
            for (s, scheme) in schemes.iter().enumerate() {
                let end = integrate_endpoint(*scheme, &setup.y0, &coarse)?;
                out[s].push((end - &reference_end).norm_squared());
            }
        }
        Ok(out)
    };

    let results: Vec<Result<Vec<Vec<f64>>>> = (0..setup.n_samples as u64)
        .into_par_iter()
        .map(run_sample)
        .collect();

    let mut sums = vec![vec![0.0; factors.len()]; schemes.len()];
    let mut used = 0usize;
    let mut dropped = Vec::new();
    for (i, res) in results.into_iter().enumerate() {
        match res {
            Ok(sq) => {
                used += 1;
                for (acc, vals) in sums.iter_mut().zip(sq) {
                    for (a, v) in acc.iter_mut().zip(vals) {
                        *a += v;
                    }
                }
            }
            Err(e) => match setup.failure {
                FailurePolicy::Abort => {
                    return Err(Error::SampleFailed {
                        sample: i as u64,
                        seed: setup.seed,
                        source: Box::new(e),
                    })
                }
                FailurePolicy::Drop => dropped.push(i as u64),
            },
        }
    }
    if used == 0 {
        return Err(Error::InvalidParameter("every sample failed".into()));
    }
    Ok(sums
        .into_iter()
        .map(|acc| {
            let errors: Vec<f64> = acc.iter().map(|s| (s / used as f64).sqrt()).collect();
            let slope = fit_slope(&step_sizes, &errors).ok();
            OrderEstimate {
                step_sizes: step_sizes.clone(),
                errors,
                slope,
                samples: used,
                dropped: dropped.clone(),
            }
        })
        .collect())
}

/// Single-scheme form of [`ms_errors`].
pub fn ms_error(scheme: &dyn Stepper, reference: &dyn Stepper, setup: &MsErrorSetup) -> Result<OrderEstimate> {
    Ok(ms_errors(&[scheme], reference, setup)?.remove(0))
}
