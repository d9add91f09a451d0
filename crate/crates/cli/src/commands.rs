//! The four subcommands.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stochpoisson::models::srb::SphericalScheme;
use stochpoisson::{
    alpha_step, check_casimir, check_jacobi, check_skew, integrate, ms_errors, poisson_map_residual,
    sample_increments, symplectic_residual, verify_chart, AlphaSchemeConfig, CheckReport, Derivatives,
    DriftImplicitEuler, Error, EulerMaruyama, FailurePolicy, Midpoint, MsErrorSetup, Stepper, TimeGrid,
    TruncationPolicy, Vector,
};

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};
use crate::model::{Family, Model};
use crate::output::{quoted, write_metadata, Sink};

pub const PATH_STEP: f64 = 0.01;
pub const ORDER_STEPS: [f64; 4] = [0.04, 0.02, 0.01, 0.005];
/// Fine steps per output step for the paths reference, before the cap.
pub const REFERENCE_REFINEMENT: usize = 1000;
pub const REFERENCE_STEP_CAP: usize = 1_000_000;

fn truncation(cfg: &ExperimentConfig) -> CliResult<TruncationPolicy> {
    if cfg.truncation_k == 0.0 {
        Ok(TruncationPolicy::disabled())
    } else {
        TruncationPolicy::new(cfg.truncation_k).map_err(|e| CliError::Config(e.to_string()))
    }
}

fn alpha_config(cfg: &ExperimentConfig, alpha: f64) -> CliResult<AlphaSchemeConfig> {
    Ok(AlphaSchemeConfig::new(alpha)
        .map_err(|e| CliError::Config(e.to_string()))?
        .with_tol(cfg.tol)
        .with_truncation(truncation(cfg)?))
}

fn grid(t_end: f64, h: f64) -> CliResult<TimeGrid> {
    TimeGrid::with_step(0.0, t_end, h).map_err(|e| CliError::Config(e.to_string()))
}

fn spherical(cfg: &ExperimentConfig, model: &Model) -> CliResult<SphericalScheme> {
    match &model.family {
        Family::RigidBody(p) => Ok(SphericalScheme::new(*p, &model.y0, cfg.tol)?.with_truncation(truncation(cfg)?)),
        _ => Err(CliError::Config("the spherical scheme exists only for the rigid body".into())),
    }
}

/// The scheme used by `paths` and `casimir`: spherical if requested, else
/// the alpha scheme for the first alpha.
fn primary_scheme(cfg: &ExperimentConfig, model: &Model) -> CliResult<(Box<dyn Stepper>, String)> {
    if cfg.spherical {
        return Ok((Box::new(spherical(cfg, model)?), "spherical midpoint".into()));
    }
    let alpha = cfg.alpha[0];
    Ok((Box::new(model.scheme(alpha_config(cfg, alpha)?, &model.y0)?), format!("alpha = {alpha}")))
}

fn casimir_default_horizon(model: &Model) -> f64 {
    match model.family {
        Family::RigidBody(_) => 500.0,
        _ => 10.0,
    }
}

fn order_default_horizon(model: &Model) -> f64 {
    match model.family {
        Family::RigidBody(_) => 10.0,
        Family::LotkaVolterra(_) => 2.0,
        Family::Custom(_) => 10.0,
    }
}

/// Shortest round-trip form, which is also a valid TOML float.
fn meta_num(x: f64) -> String {
    format!("{x:?}")
}

fn common_metadata(cfg: &ExperimentConfig, model: &Model) -> Vec<(&'static str, String)> {
    vec![
        ("system", quoted(&model.name)),
        ("seed", cfg.seed.to_string()),
        ("truncation_k", meta_num(cfg.truncation_k)),
        ("tol", meta_num(cfg.tol)),
        ("y0", format!("[{}]", model.y0.iter().map(|v| meta_num(*v)).collect::<Vec<_>>().join(", "))),
    ]
}

pub fn paths(cfg: &ExperimentConfig) -> CliResult<()> {
    let model = Model::from_config(cfg)?;
    let h = cfg.h.as_ref().map_or(PATH_STEP, |h| h[0]);
    let t_end = cfg.t_end.unwrap_or(10.0);
    let coarse_grid = grid(t_end, h)?;
    let n = coarse_grid.n_steps();
    let factor = REFERENCE_REFINEMENT.min(REFERENCE_STEP_CAP / n).max(1);
    let fine_grid = TimeGrid::new(0.0, t_end, n * factor)?;
    let fine = sample_increments(fine_grid, model.noise_dim(), cfg.seed)?;
    let coarse = fine.coarsen(factor)?;

    let (scheme, label) = primary_scheme(cfg, &model)?;
    let path = integrate(&scheme, &model.y0, &coarse)?;

    let reference = Midpoint::new(model.sde()).with_tol(cfg.tol);
    let hf = fine_grid.step();
    let mut y = model.y0.clone();
    let mut reference_states = vec![y.clone()];
    for j in 0..fine_grid.n_steps() {
        y = reference.step(&y, hf, fine.step(j)).map_err(|e| Error::StepFailed {
            step: j,
            source: Box::new(e),
        })?;
        if (j + 1) % factor == 0 {
            reference_states.push(y.clone());
        }
    }

    let d = model.dim();
    let mut sink = Sink::open(cfg.output.as_deref())?;
    let mut header = vec!["t".to_string()];
    header.extend((1..=d).map(|i| format!("y{i}")));
    header.extend((1..=d).map(|i| format!("y{i}_ref")));
    sink.header(&header)?;
    for (j, (s, r)) in path.states().iter().zip(&reference_states).enumerate() {
        let mut row = vec![coarse_grid.time(j)];
        row.extend(s.iter());
        row.extend(r.iter());
        sink.row(&row)?;
    }
    let csv = sink.path().map(|p| p.to_path_buf());
    sink.finish()?;

    let mut meta = vec![("command", quoted("paths")), ("scheme", quoted(&label))];
    meta.extend(common_metadata(cfg, &model));
    meta.extend([
        ("h", meta_num(h)),
        ("t_end", meta_num(t_end)),
        ("steps", n.to_string()),
        ("reference", quoted("midpoint, untruncated increments")),
        ("reference_step", meta_num(hf)),
        ("reference_refinement", factor.to_string()),
        ("reference_step_cap", REFERENCE_STEP_CAP.to_string()),
        ("reference_capped", (factor < REFERENCE_REFINEMENT).to_string()),
    ]);
    write_metadata(csv.as_deref(), &meta)
}

/// Casimir values along a run, cut short at the first failing step.
fn casimir_series(
    stepper: &dyn Stepper,
    model: &Model,
    noise: &stochpoisson::WienerIncrements,
) -> (Vec<Vec<f64>>, Option<Error>) {
    let h = noise.grid().step();
    let l = model.casimir_count();
    let eval = |y: &Vector| (0..l).map(|i| model.casimir(i, y)).collect::<stochpoisson::Result<Vec<f64>>>();
    let mut out = Vec::with_capacity(noise.grid().n_steps() + 1);
    let mut y = model.y0.clone();
    match eval(&y) {
        Ok(c) => out.push(c),
        Err(e) => return (out, Some(e)),
    }
    for j in 0..noise.grid().n_steps() {
        let next = stepper.step(&y, h, noise.step(j)).and_then(|n| eval(&n).map(|c| (n, c)));
        match next {
            Ok((n, c)) => {
                y = n;
                out.push(c);
            }
            Err(e) => {
                return (
                    out,
                    Some(Error::StepFailed {
                        step: j,
                        source: Box::new(e),
                    }),
                )
            }
        }
    }
    (out, None)
}

pub fn casimir(cfg: &ExperimentConfig) -> CliResult<()> {
    let model = Model::from_config(cfg)?;
    let l = model.casimir_count();
    if l == 0 {
        return Err(CliError::Config("the system has no Casimir function".into()));
    }
    let h = cfg.h.as_ref().map_or(PATH_STEP, |h| h[0]);
    let t_end = cfg.t_end.unwrap_or_else(|| casimir_default_horizon(&model));
    let g = grid(t_end, h)?;
    let noise = sample_increments(g, model.noise_dim(), cfg.seed)?;

    let (scheme, label) = primary_scheme(cfg, &model)?;
    let (scheme_values, failure) = casimir_series(scheme.as_ref(), &model, &noise);
    if let Some(e) = failure {
        return Err(e.into());
    }

    let em = EulerMaruyama::new(model.ito());
    let mut comparators: Vec<(&str, Box<dyn Stepper>)> = vec![("em", Box::new(em))];
    if matches!(model.family, Family::LotkaVolterra(_)) {
        comparators.push(("iem", Box::new(DriftImplicitEuler::new(model.ito()))));
    }
    let mut columns = vec![("scheme", scheme_values)];
    for (name, stepper) in &comparators {
        let (values, failure) = casimir_series(stepper.as_ref(), &model, &noise);
        if let Some(e) = failure {
            eprintln!("warning: {name} comparator failed ({e}); later values are NaN");
        }
        columns.push((name, values));
    }

    let mut sink = Sink::open(cfg.output.as_deref())?;
    let mut header = vec!["t".to_string()];
    for (name, _) in &columns {
        for i in 1..=l {
            header.push(if l == 1 {
                format!("casimir_{name}")
            } else {
                format!("casimir{i}_{name}")
            });
        }
    }
    sink.header(&header)?;
    let nan = vec![f64::NAN; l];
    for j in 0..=g.n_steps() {
        let mut row = vec![g.time(j)];
        for (_, values) in &columns {
            row.extend(values.get(j).unwrap_or(&nan));
        }
        sink.row(&row)?;
    }
    let csv = sink.path().map(|p| p.to_path_buf());
    sink.finish()?;

    let mut meta = vec![("command", quoted("casimir")), ("scheme", quoted(&label))];
    meta.extend(common_metadata(cfg, &model));
    meta.extend([("h", meta_num(h)), ("t_end", meta_num(t_end))]);
    write_metadata(csv.as_deref(), &meta)
}

pub fn order(cfg: &ExperimentConfig) -> CliResult<()> {
    let model = Model::from_config(cfg)?;
    let steps = cfg.h.clone().unwrap_or_else(|| ORDER_STEPS.to_vec());
    let t_end = cfg.t_end.unwrap_or_else(|| order_default_horizon(&model));
    let finest = steps.iter().copied().fold(f64::INFINITY, f64::min);
    let reference_step = finest / cfg.reference_divisor;

    let mut schemes: Vec<Box<dyn Stepper>> = Vec::new();
    let mut names = Vec::new();
    for &alpha in &cfg.alpha {
        schemes.push(Box::new(model.scheme(alpha_config(cfg, alpha)?, &model.y0)?));
        names.push(format!("rms_alpha_{alpha}"));
    }
    if cfg.spherical {
        schemes.push(Box::new(spherical(cfg, &model)?));
        names.push("rms_spherical".to_string());
    }
    let reference = Midpoint::new(model.sde()).with_tol(cfg.tol);
    let setup = MsErrorSetup {
        y0: model.y0.clone(),
        t_end,
        step_sizes: steps,
        reference_step,
        n_samples: cfg.samples,
        seed: cfg.seed,
        noise_dim: model.noise_dim(),
        failure: if cfg.drop_failed {
            FailurePolicy::Drop
        } else {
            FailurePolicy::Abort
        },
    };
    let refs: Vec<&dyn Stepper> = schemes.iter().map(|s| s.as_ref()).collect();
    let estimates = ms_errors(&refs, &reference, &setup).map_err(|e| match e {
        Error::InvalidGrid(m) => CliError::Config(m),
        other => CliError::Numerical(other),
    })?;

    let mut sink = Sink::open(cfg.output.as_deref())?;
    let mut header = vec!["h".to_string()];
    header.extend(names.iter().cloned());
    sink.header(&header)?;
    for (k, h) in estimates[0].step_sizes.iter().enumerate() {
        let mut row = vec![*h];
        row.extend(estimates.iter().map(|e| e.errors[k]));
        sink.row(&row)?;
    }
    let csv_on_stdout = sink.is_stdout();
    let csv = sink.path().map(|p| p.to_path_buf());
    sink.finish()?;

    let prefix = if csv_on_stdout { "# " } else { "" };
    for (name, e) in names.iter().zip(&estimates) {
        let slope = e.slope.map_or("n/a".to_string(), |s| format!("{s:.4}"));
        println!("{prefix}slope {name} = {slope}");
    }
    let dropped = &estimates[0].dropped;
    if !dropped.is_empty() {
        eprintln!("warning: dropped {} failed samples: {:?}", dropped.len(), dropped);
    }

    let mut meta = vec![("command", quoted("order"))];
    meta.extend(common_metadata(cfg, &model));
    meta.extend([
        ("t_end", meta_num(t_end)),
        ("samples", estimates[0].samples.to_string()),
        ("reference", quoted("midpoint, untruncated increments")),
        ("reference_step", meta_num(reference_step)),
    ]);
    write_metadata(csv.as_deref(), &meta)
}

/// Thresholds applied by `check`.
pub const SKEW_THRESHOLD: f64 = 1e-10;
pub const JACOBI_THRESHOLD: f64 = 1e-8;
pub const CASIMIR_THRESHOLD: f64 = 1e-8;
pub const CHART_THRESHOLD: f64 = 1e-8;
pub const SYMPLECTIC_THRESHOLD: f64 = 1e-6;
pub const POISSON_MAP_THRESHOLD: f64 = 1e-6;
const CHECK_POINTS: usize = 100;
const MAP_POINTS: usize = 20;
const FD_STEP: f64 = 1e-6;

struct CheckLine {
    name: String,
    threshold: f64,
    result: CliResult<f64>,
}

impl CheckLine {
    fn passed(&self) -> bool {
        matches!(self.result, Ok(r) if r <= self.threshold)
    }
}

fn report(r: stochpoisson::Result<CheckReport>) -> CliResult<f64> {
    Ok(r?.max_residual)
}

fn increments(rng: &mut ChaCha8Rng, m: usize) -> Vec<f64> {
    (0..m).map(|_| rng.gen_range(-0.2..0.2)).collect()
}

fn symplectic_worst(cfg: &ExperimentConfig, model: &Model, points: &[Vector], h: f64, seed: u64) -> CliResult<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n2 = 2 * model.chart.dof();
    let mut worst = 0.0f64;
    for y in points {
        let ybar = model.chart.to_canonical(y)?;
        let shs = model.shs(&ybar.as_slice()[n2..])?;
        let z = ybar.rows(0, n2).into_owned();
        let dw = increments(&mut rng, model.noise_dim());
        for &alpha in &cfg.alpha {
            let c = alpha_config(cfg, alpha)?;
            let r = symplectic_residual(|x| alpha_step(&shs, x, h, dw[0], &c), &z, FD_STEP)?;
            worst = worst.max(r);
        }
    }
    Ok(worst)
}

fn poisson_map_worst(cfg: &ExperimentConfig, model: &Model, points: &[Vector], h: f64, seed: u64) -> CliResult<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for y in points {
        let dw = increments(&mut rng, model.noise_dim());
        for &alpha in &cfg.alpha {
            let scheme = model.scheme(alpha_config(cfg, alpha)?, y)?;
            let r = poisson_map_residual(|x| scheme.local_step(x, h, &dw), &model.system, y, FD_STEP)?;
            worst = worst.max(r);
        }
    }
    Ok(worst)
}

pub fn check(cfg: &ExperimentConfig) -> CliResult<()> {
    let model = Model::from_config(cfg)?;
    if model.noise_dim() != 1 {
        return Err(CliError::Config("the alpha schemes support a single noise channel".into()));
    }
    let h = cfg.h.as_ref().map_or(PATH_STEP, |h| h[0]);
    let points = model.sample_points(CHECK_POINTS, cfg.seed)?;
    let sys = &model.system;
    let mut lines = vec![
        CheckLine {
            name: "skew".into(),
            threshold: SKEW_THRESHOLD,
            result: report(check_skew(sys, &points)),
        },
        CheckLine {
            name: "jacobi".into(),
            threshold: JACOBI_THRESHOLD,
            result: report(check_jacobi(sys, &points, Derivatives::AnalyticOnly)),
        },
    ];
    for i in 0..model.casimir_count() {
        let grad = |y: &Vector| model.casimir_gradient(i, y).unwrap_or_else(|_| Vector::from_element(y.len(), f64::NAN));
        lines.push(CheckLine {
            name: if model.casimir_count() == 1 { "casimir".into() } else { format!("casimir{}", i + 1) },
            threshold: CASIMIR_THRESHOLD,
            result: report(check_casimir(grad, sys, &points)),
        });
    }
    lines.push(CheckLine {
        name: "chart".into(),
        threshold: CHART_THRESHOLD,
        result: report(verify_chart(&model.chart, sys, &points)),
    });
    let few = &points[..MAP_POINTS];
    lines.push(CheckLine {
        name: "symplecticity".into(),
        threshold: SYMPLECTIC_THRESHOLD,
        result: symplectic_worst(cfg, &model, few, h, cfg.seed.wrapping_add(1)),
    });
    lines.push(CheckLine {
        name: "poisson-map".into(),
        threshold: POISSON_MAP_THRESHOLD,
        result: poisson_map_worst(cfg, &model, few, h, cfg.seed.wrapping_add(2)),
    });

    println!("system {}: {} points, alpha {:?}, h = {h}", model.name, points.len(), cfg.alpha);
    let mut failed = Vec::new();
    for line in &lines {
        let status = if line.passed() { "PASS" } else { "FAIL" };
        let value = match &line.result {
            Ok(r) => format!("{r:.3e}"),
            Err(e) => format!("error: {e}"),
        };
        println!("{status} {:<14} residual {value} (threshold {:.0e})", line.name, line.threshold);
        if !line.passed() {
            failed.push(line.name.clone());
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Validation(format!("failed checks: {}", failed.join(", "))))
    }
}
