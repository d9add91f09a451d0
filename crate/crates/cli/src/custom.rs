//! Poisson systems and charts given as expression strings in a TOML file.
//!
//! ```toml
//! variables = ["q", "p", "c"]
//! params = { w = 1.0, s = 0.2 }
//! structure = [["0", "1", "0"], ["-1", "0", "0"], ["0", "0", "0"]]
//! hamiltonians = ["(p^2 + w^2*q^2)/2", "s*q"]
//! casimirs = ["c"]
//! y0 = [1.0, 0.0, 0.3]
//!
//! [chart]
//! canonical_variables = ["P", "Q", "C"]
//! to_canonical = ["p", "q", "c"]
//! from_canonical = ["Q", "P", "C"]
//! orientation = "standard"
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;
use stochpoisson::canonical::{canonical_target, Orientation};
use stochpoisson::{CanonicalShs, Chart, Error, Matrix, PoissonSystem, Result, Vector};

use crate::error::{CliError, CliResult};
use crate::expr::{Condition, Expr, Jet, Scope};

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum Entry {
    Number(f64),
    Text(String),
}

impl Entry {
    fn text(&self) -> String {
        match self {
            Entry::Number(x) => format!("{x:?}"),
            Entry::Text(s) => s.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
enum OrientationName {
    #[default]
    Standard,
    Reversed,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChartFile {
    canonical_variables: Option<Vec<String>>,
    to_canonical: Vec<Entry>,
    from_canonical: Vec<Entry>,
    #[serde(default)]
    orientation: OrientationName,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemFile {
    name: Option<String>,
    variables: Vec<String>,
    #[serde(default)]
    params: BTreeMap<String, f64>,
    structure: Vec<Vec<Entry>>,
    hamiltonians: Vec<Entry>,
    #[serde(default)]
    casimirs: Vec<Entry>,
    y0: Vec<f64>,
    domain: Option<String>,
    sample_box: Option<Vec<[f64; 2]>>,
    chart: ChartFile,
}

/// Everything loaded from a custom system file.
#[derive(Debug, Clone)]
pub struct CustomSpec {
    pub name: String,
    pub system: CustomSystem,
    pub chart: CustomChart,
    pub casimirs: Vec<Expr>,
    pub y0: Vec<f64>,
    pub sample_box: Vec<[f64; 2]>,
}

#[derive(Debug, Clone)]
pub struct CustomSystem {
    dim: usize,
    structure: Vec<Expr>,
    hamiltonians: Vec<Expr>,
    domain: Option<Condition>,
    rank: usize,
}

#[derive(Debug, Clone)]
pub struct CustomChart {
    dim: usize,
    to_canonical: Vec<Expr>,
    from_canonical: Vec<Expr>,
    domain: Option<Condition>,
    dof: usize,
    orientation: Orientation,
}

fn parse_all(entries: &[Entry], scope: &Scope) -> CliResult<Vec<Expr>> {
    entries.iter().map(|e| Expr::parse(&e.text(), scope)).collect()
}

fn eval_vector(exprs: &[Expr], x: &Vector) -> Vector {
    Vector::from_iterator(exprs.len(), exprs.iter().map(|e| e.eval(x.as_slice())))
}

/// Rows are the gradients of the components.
fn jacobian_of(exprs: &[Expr], x: &Vector) -> Matrix {
    let mut m = Matrix::zeros(exprs.len(), x.len());
    for (i, e) in exprs.iter().enumerate() {
        let j = e.jet(x.as_slice());
        for (k, g) in j.grad.iter().enumerate() {
            m[(i, k)] = *g;
        }
    }
    m
}

fn in_domain(domain: &Option<Condition>, y: &Vector) -> bool {
    y.iter().all(|v| v.is_finite()) && domain.as_ref().is_none_or(|d| d.holds(y.as_slice()))
}

impl CustomSpec {
    pub fn load(path: &Path, overrides: &BTreeMap<String, f64>) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let file: SystemFile =
            toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let name = file.name.clone().unwrap_or_else(|| path.display().to_string());
        let mut spec = Self::build(file, overrides).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        spec.name = name;
        Ok(spec)
    }

    fn build(file: SystemFile, overrides: &BTreeMap<String, f64>) -> CliResult<Self> {
        let bad = |m: String| Err(CliError::Config(m));
        let d = file.variables.len();
        let l = file.casimirs.len();
        if d == 0 {
            return bad("no variables".into());
        }
        if l > d || !(d - l).is_multiple_of(2) {
            return bad(format!("{d} variables with {l} Casimirs leave an odd symplectic part"));
        }
        let dof = (d - l) / 2;
        let mut params = file.params.clone();
        for (k, v) in overrides {
            match params.get_mut(k) {
                Some(slot) => *slot = *v,
                None => return bad(format!("unknown parameter '{k}'")),
            }
        }
        let params: Vec<(String, f64)> = params.into_iter().collect();
        let scope = Scope::new(&file.variables, &params)?;

        if file.structure.len() != d || file.structure.iter().any(|row| row.len() != d) {
            return bad(format!("structure must be a {d}x{d} matrix"));
        }
        let entries: Vec<Entry> = file.structure.into_iter().flatten().collect();
        let structure = parse_all(&entries, &scope)?;
        if file.hamiltonians.len() < 2 {
            return bad("need a drift Hamiltonian and at least one noise Hamiltonian".into());
        }
        let hamiltonians = parse_all(&file.hamiltonians, &scope)?;
        let casimirs = parse_all(&file.casimirs, &scope)?;
        let domain = file.domain.as_deref().map(|s| Condition::parse(s, &scope)).transpose()?;

        let canonical_names = file.chart.canonical_variables.clone().unwrap_or_else(|| {
            (1..=dof)
                .map(|i| format!("P{i}"))
                .chain((1..=dof).map(|i| format!("Q{i}")))
                .chain((1..=l).map(|i| format!("C{i}")))
                .collect()
        });
        if canonical_names.len() != d {
            return bad(format!("chart needs {d} canonical variables"));
        }
        let canonical_scope = Scope::new(&canonical_names, &params)?;
        if file.chart.to_canonical.len() != d || file.chart.from_canonical.len() != d {
            return bad(format!("chart maps need {d} components each"));
        }
        let orientation = match file.chart.orientation {
            OrientationName::Standard => Orientation::Standard,
            OrientationName::Reversed => Orientation::Reversed,
        };
        let chart = CustomChart {
            to_canonical: parse_all(&file.chart.to_canonical, &scope)?,
            from_canonical: parse_all(&file.chart.from_canonical, &canonical_scope)?,
            dim: d,
            domain: domain.clone(),
            dof,
            orientation,
        };

        if file.y0.len() != d {
            return bad(format!("y0 needs {d} components"));
        }
        let sample_box = match file.sample_box {
            Some(b) if b.len() != d => return bad(format!("sample_box needs {d} intervals")),
            Some(b) => {
                if b.iter().any(|[lo, hi]| !(lo < hi)) {
                    return bad("sample_box intervals must have lo < hi".into());
                }
                b
            }
            None => file.y0.iter().map(|v| [v - 0.5, v + 0.5]).collect(),
        };
        let system = CustomSystem {
            dim: d,
            structure,
            hamiltonians,
            domain,
            rank: 2 * dof,
        };
        Ok(Self {
            name: String::new(),
            system,
            chart,
            casimirs,
            y0: file.y0,
            sample_box,
        })
    }

    pub fn casimir_value(&self, i: usize, y: &Vector) -> f64 {
        self.casimirs[i].eval(y.as_slice())
    }

    pub fn casimir_gradient(&self, i: usize, y: &Vector) -> Vector {
        Vector::from_vec(self.casimirs[i].jet(y.as_slice()).grad)
    }

    /// Canonical system on the level set with the given Casimir values.
    pub fn shs(&self, casimirs: &[f64]) -> Result<CustomShs> {
        let l = self.chart.casimir_count();
        if casimirs.len() != l {
            return Err(Error::InvalidParameter(format!("expected {l} Casimir values, got {}", casimirs.len())));
        }
        Ok(CustomShs {
            from_canonical: self.chart.from_canonical.clone(),
            hamiltonians: self.system.hamiltonians.clone(),
            casimirs: casimirs.to_vec(),
            dof: self.chart.dof,
            sign: self.chart.orientation.sign(),
        })
    }
}

impl PoissonSystem for CustomSystem {
    fn dim(&self) -> usize {
        self.dim
    }
    fn noise_dim(&self) -> usize {
        self.hamiltonians.len() - 1
    }
    fn rank(&self) -> usize {
        self.rank
    }
    fn contains(&self, y: &Vector) -> bool {
        in_domain(&self.domain, y)
    }
    fn structure(&self, y: &Vector) -> Result<Matrix> {
        let d = self.dim();
        Ok(Matrix::from_row_slice(d, d, eval_vector(&self.structure, y).as_slice()))
    }
    fn has_structure_derivative(&self) -> bool {
        true
    }
    fn structure_derivative(&self, y: &Vector) -> Result<Vec<Matrix>> {
        let d = self.dim();
        let j = jacobian_of(&self.structure, y);
        Ok((0..d)
            .map(|s| Matrix::from_row_iterator(d, d, j.column(s).iter().copied()))
            .collect())
    }
    fn hamiltonian(&self, r: usize, y: &Vector) -> Result<f64> {
        Ok(self.hamiltonians[r].eval(y.as_slice()))
    }
    fn hamiltonian_gradient(&self, r: usize, y: &Vector) -> Result<Vector> {
        Ok(Vector::from_vec(self.hamiltonians[r].jet(y.as_slice()).grad))
    }
    fn has_hamiltonian_hessian(&self) -> bool {
        true
    }
    fn hamiltonian_hessian(&self, r: usize, y: &Vector) -> Result<Matrix> {
        let d = self.dim();
        Ok(Matrix::from_row_slice(d, d, &self.hamiltonians[r].jet(y.as_slice()).hess))
    }
}

impl Chart for CustomChart {
    fn dim(&self) -> usize {
        self.dim
    }
    fn dof(&self) -> usize {
        self.dof
    }
    fn casimir_count(&self) -> usize {
        self.dim() - 2 * self.dof
    }
    fn contains(&self, y: &Vector) -> bool {
        in_domain(&self.domain, y)
    }
    fn to_canonical(&self, y: &Vector) -> Result<Vector> {
        Ok(eval_vector(&self.to_canonical, y))
    }
    fn from_canonical(&self, ybar: &Vector) -> Result<Vector> {
        Ok(eval_vector(&self.from_canonical, ybar))
    }
    fn target(&self) -> Matrix {
        canonical_target(self.dof, self.casimir_count(), self.orientation)
    }
    fn has_jacobian(&self) -> bool {
        true
    }
    fn jacobian(&self, y: &Vector) -> Result<Matrix> {
        Ok(jacobian_of(&self.to_canonical, y))
    }
    fn has_inverse_jacobian(&self) -> bool {
        true
    }
    fn inverse_jacobian(&self, ybar: &Vector) -> Result<Matrix> {
        Ok(jacobian_of(&self.from_canonical, ybar))
    }
}

/// `H_r(Z) = s K_r(theta^{-1}(Z, C))` with exact derivatives through the
/// composition.
#[derive(Debug, Clone)]
pub struct CustomShs {
    from_canonical: Vec<Expr>,
    hamiltonians: Vec<Expr>,
    casimirs: Vec<f64>,
    dof: usize,
    sign: f64,
}

impl CustomShs {
    fn jet(&self, r: usize, z: &Vector) -> Jet {
        let k = z.len();
        let ybar: Vec<Jet> = Jet::seeds(z.as_slice())
            .into_iter()
            .chain(self.casimirs.iter().map(|c| Jet::constant(*c, k)))
            .collect();
        let y: Vec<Jet> = self.from_canonical.iter().map(|e| e.eval_jet(&ybar, k)).collect();
        self.hamiltonians[r].eval_jet(&y, k)
    }
}

impl CanonicalShs for CustomShs {
    fn dof(&self) -> usize {
        self.dof
    }
    fn noise_dim(&self) -> usize {
        self.hamiltonians.len() - 1
    }
    fn casimirs(&self) -> &[f64] {
        &self.casimirs
    }
    fn hamiltonian(&self, r: usize, z: &Vector) -> Result<f64> {
        let mut ybar = z.as_slice().to_vec();
        ybar.extend(&self.casimirs);
        let y: Vec<f64> = self.from_canonical.iter().map(|e| e.eval(&ybar)).collect();
        Ok(self.sign * self.hamiltonians[r].eval(&y))
    }
    fn gradient(&self, r: usize, z: &Vector) -> Result<Vector> {
        Ok(Vector::from_vec(self.jet(r, z).grad) * self.sign)
    }
    fn has_hessian(&self) -> bool {
        true
    }
    fn hessian(&self, r: usize, z: &Vector) -> Result<Matrix> {
        let k = z.len();
        Ok(Matrix::from_row_slice(k, k, &self.jet(r, z).hess) * self.sign)
    }
}
