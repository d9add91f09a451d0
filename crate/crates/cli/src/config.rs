//! Experiment settings: built-in defaults, then a TOML file, then flags.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq)]
pub enum SystemKind {
    RigidBody,
    LotkaVolterra,
    Custom(PathBuf),
}

impl SystemKind {
    /// `srb`, `slv`, or a path to a custom system file.
    pub fn parse(s: &str, base: Option<&Path>) -> Self {
        match s {
            "srb" | "rigid-body" => SystemKind::RigidBody,
            "slv" | "lotka-volterra" => SystemKind::LotkaVolterra,
            path => {
                let p = PathBuf::from(path);
                match base {
                    Some(dir) if p.is_relative() => SystemKind::Custom(dir.join(p)),
                    _ => SystemKind::Custom(p),
                }
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            SystemKind::RigidBody => "srb".into(),
            SystemKind::LotkaVolterra => "slv".into(),
            SystemKind::Custom(p) => p.display().to_string(),
        }
    }
}

/// Partial settings as read from a file or from flags.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    pub system: Option<String>,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    pub alpha: Option<Vec<f64>>,
    pub h: Option<Vec<f64>>,
    #[serde(alias = "T")]
    pub t_end: Option<f64>,
    pub samples: Option<usize>,
    pub seed: Option<u64>,
    pub truncation_k: Option<f64>,
    pub tol: Option<f64>,
    pub output: Option<PathBuf>,
    pub y0: Option<Vec<f64>>,
    pub reference_divisor: Option<f64>,
    pub spherical: Option<bool>,
    pub drop_failed: Option<bool>,
}

impl Overrides {
    pub fn from_file(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

/// Fully merged settings. Command-dependent values stay optional until the
/// command fills them in.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub system: SystemKind,
    pub params: BTreeMap<String, f64>,
    pub alpha: Vec<f64>,
    pub h: Option<Vec<f64>>,
    pub t_end: Option<f64>,
    pub samples: usize,
    pub seed: u64,
    /// `0` disables increment truncation.
    pub truncation_k: f64,
    pub tol: f64,
    pub output: Option<PathBuf>,
    pub y0: Option<Vec<f64>>,
    pub reference_divisor: f64,
    pub spherical: bool,
    pub drop_failed: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            system: SystemKind::RigidBody,
            params: BTreeMap::new(),
            alpha: vec![0.0, 0.5, 1.0],
            h: None,
            t_end: None,
            samples: 500,
            seed: 2024,
            truncation_k: 4.0,
            tol: 1e-12,
            output: None,
            y0: None,
            reference_divisor: 20.0,
            spherical: false,
            drop_failed: false,
        }
    }
}

impl ExperimentConfig {
    /// Applies `o` on top of `self`; `base` resolves a relative system path.
    pub fn apply(&mut self, o: Overrides, base: Option<&Path>) {
        if let Some(s) = o.system {
            self.system = SystemKind::parse(&s, base);
        }
        self.params.extend(o.params);
        macro_rules! take {
            ($($field:ident),*) => {
                $(if let Some(v) = o.$field { self.$field = v; })*
            };
        }
        take!(alpha, samples, seed, truncation_k, tol, reference_divisor, spherical, drop_failed);
        macro_rules! take_opt {
            ($($field:ident),*) => {
                $(if o.$field.is_some() { self.$field = o.$field; })*
            };
        }
        take_opt!(h, t_end, y0);
        if let Some(p) = o.output {
            self.output = Some(match base {
                Some(dir) if p.is_relative() => dir.join(p),
                _ => p,
            });
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.alpha.is_empty() {
            return bad("alpha list is empty".into());
        }
        if let Some(a) = self.alpha.iter().find(|a| !(0.0..=1.0).contains(*a)) {
            return bad(format!("alpha = {a} is outside [0, 1]"));
        }
        if let Some(h) = &self.h {
            if h.is_empty() {
                return bad("h list is empty".into());
            }
            if let Some(x) = h.iter().find(|x| !(**x > 0.0 && **x < 1.0)) {
                return bad(format!("step h = {x} must lie in (0, 1)"));
            }
        }
        if let Some(t) = self.t_end {
            if !(t > 0.0 && t.is_finite()) {
                return bad(format!("T = {t} must be positive"));
            }
        }
        if self.samples == 0 {
            return bad("samples must be at least 1".into());
        }
        if !(self.truncation_k == 0.0 || self.truncation_k >= 1.0) || !self.truncation_k.is_finite() {
            return bad(format!("truncation_k = {} must be 0 (off) or >= 1", self.truncation_k));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return bad(format!("tol = {} must be positive", self.tol));
        }
        if !(self.reference_divisor >= 1.0) || self.reference_divisor.fract() != 0.0 {
            return bad(format!("reference_divisor = {} must be a positive integer", self.reference_divisor));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_override_defaults() {
        let file: Overrides = toml::from_str(
            "system = \"slv\"\nalpha = [0.5]\nT = 3.0\nseed = 7\n[params]\nc2 = 0.1\n",
        )
        .unwrap();
        let flags = Overrides {
            seed: Some(9),
            params: [("a".to_string(), -1.0)].into(),
            ..Default::default()
        };
        let mut cfg = ExperimentConfig::default();
        cfg.apply(file, None);
        cfg.apply(flags, None);
        assert_eq!(cfg.system, SystemKind::LotkaVolterra);
        assert_eq!(cfg.alpha, vec![0.5]);
        assert_eq!(cfg.t_end, Some(3.0));
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.samples, 500);
        assert_eq!(cfg.params.get("c2"), Some(&0.1));
        assert_eq!(cfg.params.get("a"), Some(&-1.0));
        cfg.validate().unwrap();
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(toml::from_str::<Overrides>("stepsize = 0.1").is_err());
    }

    #[test]
    fn relative_paths_follow_the_file() {
        let o: Overrides = toml::from_str("system = \"sys.toml\"\noutput = \"out.csv\"").unwrap();
        let mut cfg = ExperimentConfig::default();
        cfg.apply(o, Some(Path::new("/tmp/exp")));
        assert_eq!(cfg.system, SystemKind::Custom("/tmp/exp/sys.toml".into()));
        assert_eq!(cfg.output, Some("/tmp/exp/out.csv".into()));
    }

    #[test]
    fn invalid_values_rejected() {
        let cases: [fn(&mut ExperimentConfig); 5] = [
            |c| c.alpha = vec![1.5],
            |c| c.h = Some(vec![0.0]),
            |c| c.truncation_k = 0.5,
            |c| c.samples = 0,
            |c| c.reference_divisor = 2.5,
        ];
        for f in cases {
            let mut cfg = ExperimentConfig::default();
            f(&mut cfg);
            assert!(cfg.validate().is_err());
        }
    }
}
