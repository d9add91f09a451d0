//! Uniform view of the built-in models and custom systems.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stochpoisson::models::slv::{self, LotkaVolterra, LvParams, SlvChart, SlvShs};
use stochpoisson::models::srb::{self, RigidBody, RigidBodyParams, SrbChart, SrbShs};
use stochpoisson::sde::ItoForm;
use stochpoisson::{
    AlphaScheme, AlphaSchemeConfig, CanonicalShs, Chart, PoissonIntegrator, PoissonSde, PoissonSystem, Result,
    Vector,
};

use crate::config::{ExperimentConfig, SystemKind};
use crate::custom::CustomSpec;
use crate::error::{CliError, CliResult};

pub type DynSystem = Arc<dyn PoissonSystem>;
pub type DynChart = Arc<dyn Chart>;
pub type DynShs = Box<dyn CanonicalShs>;
pub type ComposedScheme = PoissonIntegrator<DynChart, AlphaScheme<DynShs>>;
type ShsBuilder = Arc<dyn Fn(&[f64]) -> Result<DynShs> + Send + Sync>;
type ScalarField = Arc<dyn Fn(&Vector) -> Result<f64> + Send + Sync>;

#[derive(Debug, Clone)]
pub enum Family {
    RigidBody(RigidBodyParams),
    LotkaVolterra(LvParams),
    Custom(Arc<CustomSpec>),
}

pub struct Model {
    pub name: String,
    pub family: Family,
    pub system: DynSystem,
    pub chart: DynChart,
    pub y0: Vector,
    casimirs: Vec<ScalarField>,
    shs: ShsBuilder,
    sample_box: Vec<[f64; 2]>,
}

fn take_params<const N: usize>(
    keys: [&str; N],
    mut values: [f64; N],
    given: &BTreeMap<String, f64>,
    model: &str,
) -> CliResult<[f64; N]> {
    for (k, v) in given {
        match keys.iter().position(|key| key == k) {
            Some(i) => values[i] = *v,
            None => {
                return Err(CliError::Config(format!(
                    "unknown {model} parameter '{k}' (expected one of {})",
                    keys.join(", ")
                )))
            }
        }
    }
    Ok(values)
}

fn config_err(e: stochpoisson::Error) -> CliError {
    CliError::Config(e.to_string())
}

impl Model {
    pub fn from_config(cfg: &ExperimentConfig) -> CliResult<Self> {
        let mut model = match &cfg.system {
            SystemKind::RigidBody => Self::rigid_body(&cfg.params)?,
            SystemKind::LotkaVolterra => Self::lotka_volterra(&cfg.params)?,
            SystemKind::Custom(path) => Self::custom(CustomSpec::load(path, &cfg.params)?)?,
        };
        if let Some(y0) = &cfg.y0 {
            if y0.len() != model.dim() {
                return Err(CliError::Config(format!(
                    "y0 has {} components, the system has {}",
                    y0.len(),
                    model.dim()
                )));
            }
            model.y0 = Vector::from_column_slice(y0);
        }
        if !model.chart.contains(&model.y0) || !model.system.contains(&model.y0) {
            return Err(CliError::Config(format!("y0 = {:?} is outside the domain", model.y0.as_slice())));
        }
        Ok(model)
    }

    fn rigid_body(given: &BTreeMap<String, f64>) -> CliResult<Self> {
        let d = RigidBodyParams::standard();
        let [i1, i2, i3, c1] = take_params(["i1", "i2", "i3", "c1"], [d.i1, d.i2, d.i3, d.c1], given, "rigid body")?;
        let params = RigidBodyParams::new(i1, i2, i3, c1).map_err(config_err)?;
        Ok(Self {
            name: "srb".into(),
            family: Family::RigidBody(params),
            system: Arc::new(RigidBody::new(params).map_err(config_err)?),
            chart: Arc::new(SrbChart),
            y0: srb::default_initial_state(),
            casimirs: vec![Arc::new(|y| Ok(srb::casimir(y)))],
            shs: Arc::new(move |c| Ok(Box::new(SrbShs::new(params, c[0])?) as DynShs)),
            sample_box: vec![[-1.5, 1.5]; 3],
        })
    }

    fn lotka_volterra(given: &BTreeMap<String, f64>) -> CliResult<Self> {
        let d = LvParams::standard();
        let [a, b, r, nu, mu, c2] = take_params(
            ["a", "b", "r", "nu", "mu", "c2"],
            [d.a, d.b, d.r, d.nu, d.mu, d.c2],
            given,
            "Lotka-Volterra",
        )?;
        let params = LvParams::new(a, b, r, nu, mu, c2).map_err(config_err)?;
        Ok(Self {
            name: "slv".into(),
            family: Family::LotkaVolterra(params),
            system: Arc::new(LotkaVolterra::new(params).map_err(config_err)?),
            chart: Arc::new(SlvChart::new(params).map_err(config_err)?),
            y0: slv::default_initial_state(),
            casimirs: vec![Arc::new(move |y| slv::casimir(&params, y))],
            shs: Arc::new(move |c| Ok(Box::new(SlvShs::new(params, c[0])?) as DynShs)),
            sample_box: vec![[0.2, 2.5]; 3],
        })
    }

    fn custom(spec: CustomSpec) -> CliResult<Self> {
        let spec = Arc::new(spec);
        let casimirs = (0..spec.casimirs.len())
            .map(|i| {
                let spec = spec.clone();
                Arc::new(move |y: &Vector| Ok(spec.casimir_value(i, y))) as ScalarField
            })
            .collect();
        let shs_spec = spec.clone();
        Ok(Self {
            name: spec.name.clone(),
            family: Family::Custom(spec.clone()),
            system: Arc::new(spec.system.clone()),
            chart: Arc::new(spec.chart.clone()),
            y0: Vector::from_column_slice(&spec.y0),
            sample_box: spec.sample_box.clone(),
            casimirs,
            shs: Arc::new(move |c| Ok(Box::new(shs_spec.shs(c)?) as DynShs)),
        })
    }

    pub fn dim(&self) -> usize {
        self.system.dim()
    }

    pub fn noise_dim(&self) -> usize {
        self.system.noise_dim()
    }

    pub fn casimir_count(&self) -> usize {
        self.casimirs.len()
    }

    pub fn casimir(&self, i: usize, y: &Vector) -> Result<f64> {
        (self.casimirs[i])(y)
    }

    pub fn casimir_gradient(&self, i: usize, y: &Vector) -> Result<Vector> {
        match &self.family {
            Family::RigidBody(_) => Ok(srb::casimir_gradient(y)),
            Family::LotkaVolterra(p) => slv::casimir_gradient(p, y),
            Family::Custom(spec) => Ok(spec.casimir_gradient(i, y)),
        }
    }

    /// Canonical system on the level set with the given Casimir values.
    pub fn shs(&self, casimirs: &[f64]) -> Result<DynShs> {
        (self.shs)(casimirs)
    }

    /// Alpha scheme composed with the chart, Casimirs frozen at `y0`.
    pub fn scheme(&self, config: AlphaSchemeConfig, y0: &Vector) -> Result<ComposedScheme> {
        let shs = self.shs.clone();
        PoissonIntegrator::new(self.chart.clone(), move |c: &[f64]| AlphaScheme::new(shs(c)?, config), y0)
    }

    pub fn sde(&self) -> PoissonSde<DynSystem> {
        PoissonSde::new(self.system.clone())
    }

    pub fn ito(&self) -> ItoForm<PoissonSde<DynSystem>> {
        ItoForm::new(self.sde())
    }

    /// Uniform points in the sample box that lie in the domain.
    pub fn sample_points(&self, n: usize, seed: u64) -> CliResult<Vec<Vector>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(n);
        let mut tries = 0usize;
        while out.len() < n {
            tries += 1;
            if tries > 1000 * n {
                return Err(CliError::Config(format!(
                    "sample box yields too few points inside the domain ({} of {n})",
                    out.len()
                )));
            }
            let y = Vector::from_iterator(self.dim(), self.sample_box.iter().map(|[lo, hi]| rng.gen_range(*lo..*hi)));
            if self.system.contains(&y) && self.chart.contains(&y) {
                out.push(y);
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use stochpoisson::Stepper;

    #[test]
    fn parameter_names_checked() {
        let mut cfg = ExperimentConfig::default();
        cfg.params.insert("i2".into(), 0.9);
        let m = Model::from_config(&cfg).unwrap();
        assert!(matches!(m.family, Family::RigidBody(p) if p.i2 == 0.9));
        cfg.params.insert("a".into(), 1.0);
        assert!(matches!(Model::from_config(&cfg), Err(CliError::Config(_))));
    }

    #[test]
    fn y0_checked_against_domain() {
        let cfg = ExperimentConfig {
            system: SystemKind::LotkaVolterra,
            y0: Some(vec![1.0, -1.0, 1.0]),
            ..Default::default()
        };
        assert!(matches!(Model::from_config(&cfg), Err(CliError::Config(_))));
    }

    #[test]
    fn composed_scheme_keeps_casimir() {
        let cfg = ExperimentConfig {
            system: SystemKind::LotkaVolterra,
            ..Default::default()
        };
        let m = Model::from_config(&cfg).unwrap();
        let s = m.scheme(AlphaSchemeConfig::new(0.0).unwrap(), &m.y0).unwrap();
        let mut y = m.y0.clone();
        for k in 0..50 {
            y = s.step(&y, 0.01, &[0.05 * ((k % 7) as f64 - 3.0)]).unwrap();
        }
        assert!((m.casimir(0, &y).unwrap() - m.casimir(0, &m.y0).unwrap()).abs() < 1e-10);
    }
}
