//! Real-valued expressions over named variables, with exact first and
//! second derivatives by forward-mode differentiation.
//!
//! Parsing is done by `evalexpr`; its tree is compiled into a small
//! arithmetic IR with parameters folded into constants.

use evalexpr::{Node, Operator, Value};

use crate::error::CliError;

const UNARY: [&str; 7] = ["sin", "cos", "tan", "exp", "ln", "sqrt", "abs"];
const BINARY: [&str; 2] = ["atan2", "pow"];

/// Variable names plus parameter values.
#[derive(Debug, Clone)]
pub struct Scope {
    variables: Vec<String>,
    params: Vec<(String, f64)>,
}

impl Scope {
    pub fn new(variables: &[String], params: &[(String, f64)]) -> Result<Self, CliError> {
        let names: Vec<&str> = variables
            .iter()
            .map(String::as_str)
            .chain(params.iter().map(|(k, _)| k.as_str()))
            .collect();
        for (i, n) in names.iter().enumerate() {
            if !is_identifier(n) {
                return Err(CliError::Config(format!("'{n}' is not a valid identifier")));
            }
            if UNARY.contains(n) || BINARY.contains(n) {
                return Err(CliError::Config(format!("'{n}' shadows a built-in function")));
            }
            if names[..i].contains(n) {
                return Err(CliError::Config(format!("name '{n}' is defined twice")));
            }
        }
        Ok(Self {
            variables: variables.to_vec(),
            params: params.to_vec(),
        })
    }

}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Value, gradient and Hessian with respect to `k` seed directions.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub grad: Vec<f64>,
    /// Row-major `k x k`.
    pub hess: Vec<f64>,
}

impl Jet {
    pub fn constant(value: f64, k: usize) -> Self {
        Self {
            value,
            grad: vec![0.0; k],
            hess: vec![0.0; k * k],
        }
    }

    /// The `i`-th of `k` independent variables.
    pub fn variable(value: f64, i: usize, k: usize) -> Self {
        let mut j = Self::constant(value, k);
        j.grad[i] = 1.0;
        j
    }

    pub fn seeds(x: &[f64]) -> Vec<Jet> {
        x.iter().enumerate().map(|(i, v)| Jet::variable(*v, i, x.len())).collect()
    }

    fn k(&self) -> usize {
        self.grad.len()
    }

    fn zip(&self, other: &Jet, f: impl Fn(f64, f64) -> f64) -> Jet {
        Jet {
            value: f(self.value, other.value),
            grad: self.grad.iter().zip(&other.grad).map(|(a, b)| f(*a, *b)).collect(),
            hess: self.hess.iter().zip(&other.hess).map(|(a, b)| f(*a, *b)).collect(),
        }
    }

    /// `f(a)` from `f(a), f'(a), f''(a)`.
    fn chain(&self, f: f64, d1: f64, d2: f64) -> Jet {
        let k = self.k();
        let mut hess = vec![0.0; k * k];
        for i in 0..k {
            for j in 0..k {
                hess[i * k + j] = d1 * self.hess[i * k + j] + d2 * self.grad[i] * self.grad[j];
            }
        }
        Jet {
            value: f,
            grad: self.grad.iter().map(|g| d1 * g).collect(),
            hess,
        }
    }

    /// `f(a, b)` from the value and partial derivatives up to order two.
    #[allow(clippy::too_many_arguments)]
    fn chain2(a: &Jet, b: &Jet, f: f64, fa: f64, fb: f64, faa: f64, fab: f64, fbb: f64) -> Jet {
        let k = a.k();
        let mut hess = vec![0.0; k * k];
        for i in 0..k {
            for j in 0..k {
                let (ai, aj, bi, bj) = (a.grad[i], a.grad[j], b.grad[i], b.grad[j]);
                hess[i * k + j] = fa * a.hess[i * k + j]
                    + fb * b.hess[i * k + j]
                    + faa * ai * aj
                    + fbb * bi * bj
                    + fab * (ai * bj + bi * aj);
            }
        }
        Jet {
            value: f,
            grad: a.grad.iter().zip(&b.grad).map(|(x, y)| fa * x + fb * y).collect(),
            hess,
        }
    }

    fn is_constant(&self) -> bool {
        self.grad.iter().all(|g| *g == 0.0) && self.hess.iter().all(|h| *h == 0.0)
    }

    fn mul(&self, o: &Jet) -> Jet {
        Jet::chain2(self, o, self.value * o.value, o.value, self.value, 0.0, 1.0, 0.0)
    }

    fn div(&self, o: &Jet) -> Jet {
        let (a, b) = (self.value, o.value);
        Jet::chain2(self, o, a / b, 1.0 / b, -a / (b * b), 0.0, -1.0 / (b * b), 2.0 * a / (b * b * b))
    }

    fn pow(&self, o: &Jet) -> Jet {
        let (a, c) = (self.value, o.value);
        if o.is_constant() {
            let d1 = if c == 0.0 { 0.0 } else { c * a.powf(c - 1.0) };
            let d2 = if c == 0.0 || c == 1.0 { 0.0 } else { c * (c - 1.0) * a.powf(c - 2.0) };
            return self.chain(a.powf(c), d1, d2);
        }
        let f = a.powf(c);
        let la = a.ln();
        Jet::chain2(
            self,
            o,
            f,
            c * a.powf(c - 1.0),
            f * la,
            c * (c - 1.0) * a.powf(c - 2.0),
            a.powf(c - 1.0) * (1.0 + c * la),
            f * la * la,
        )
    }

    fn atan2(&self, o: &Jet) -> Jet {
        let (y, x) = (self.value, o.value);
        let r2 = x * x + y * y;
        let r4 = r2 * r2;
        Jet::chain2(self, o, y.atan2(x), x / r2, -y / r2, -2.0 * x * y / r4, (y * y - x * x) / r4, 2.0 * x * y / r4)
    }

    fn unary(&self, name: Func) -> Jet {
        let a = self.value;
        match name {
            Func::Sin => self.chain(a.sin(), a.cos(), -a.sin()),
            Func::Cos => self.chain(a.cos(), -a.sin(), -a.cos()),
            Func::Tan => {
                let t = a.tan();
                let s = 1.0 + t * t;
                self.chain(t, s, 2.0 * t * s)
            }
            Func::Exp => {
                let e = a.exp();
                self.chain(e, e, e)
            }
            Func::Ln => self.chain(a.ln(), 1.0 / a, -1.0 / (a * a)),
            Func::Sqrt => {
                let s = a.sqrt();
                self.chain(s, 0.5 / s, -0.25 / (s * a))
            }
            Func::Abs => self.chain(a.abs(), a.signum(), 0.0),
            Func::Atan2 | Func::Pow => unreachable!("binary function"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Ln,
    Sqrt,
    Abs,
    Atan2,
    Pow,
}

impl Func {
    fn from_name(s: &str) -> Option<Self> {
        Some(match s {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "exp" => Func::Exp,
            "ln" => Func::Ln,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            "atan2" => Func::Atan2,
            "pow" => Func::Pow,
            _ => return None,
        })
    }

    fn arity(self) -> usize {
        match self {
            Func::Atan2 | Func::Pow => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone)]
enum Ir {
    Const(f64),
    Var(usize),
    Neg(Box<Ir>),
    Add(Box<Ir>, Box<Ir>),
    Sub(Box<Ir>, Box<Ir>),
    Mul(Box<Ir>, Box<Ir>),
    Div(Box<Ir>, Box<Ir>),
    Pow(Box<Ir>, Box<Ir>),
    Call(Func, Vec<Ir>),
}

#[derive(Debug, Clone, Copy)]
enum Cmp {
    Eq,
    Neq,
    Gt,
    Lt,
    Geq,
    Leq,
}

#[derive(Debug, Clone)]
enum Cond {
    Const(bool),
    Cmp(Cmp, Ir, Ir),
    And(Box<Cond>, Box<Cond>),
    Or(Box<Cond>, Box<Cond>),
    Not(Box<Cond>),
}

struct Compiler<'a> {
    scope: &'a Scope,
    src: &'a str,
}

impl Compiler<'_> {
    fn err(&self, m: impl std::fmt::Display) -> CliError {
        CliError::Config(format!("in '{}': {m}", self.src))
    }

    /// Strips the root and parenthesis wrappers.
    fn inner<'n>(&self, mut node: &'n Node) -> Result<&'n Node, CliError> {
        while let Operator::RootNode = node.operator() {
            match node.children() {
                [only] => node = only,
                [] => return Err(self.err("empty expression")),
                _ => return Err(self.err("unexpected sequence")),
            }
        }
        Ok(node)
    }

    fn two<'n>(&self, node: &'n Node) -> Result<(&'n Node, &'n Node), CliError> {
        match node.children() {
            [a, b] => Ok((a, b)),
            _ => Err(self.err("malformed binary operation")),
        }
    }

    fn num(&self, node: &Node) -> Result<Ir, CliError> {
        let node = self.inner(node)?;
        let bin = |f: fn(Box<Ir>, Box<Ir>) -> Ir| -> Result<Ir, CliError> {
            let (a, b) = self.two(node)?;
            Ok(f(Box::new(self.num(a)?), Box::new(self.num(b)?)))
        };
        match node.operator() {
            Operator::Const { value } => match value {
                Value::Float(x) => Ok(Ir::Const(*x)),
                Value::Int(i) => Ok(Ir::Const(*i as f64)),
                other => Err(self.err(format!("{other} is not a number"))),
            },
            Operator::VariableIdentifierRead { identifier } => {
                if let Some(i) = self.scope.variables.iter().position(|v| v == identifier) {
                    Ok(Ir::Var(i))
                } else if let Some((_, v)) = self.scope.params.iter().find(|(k, _)| k == identifier) {
                    Ok(Ir::Const(*v))
                } else {
                    Err(self.err(format!("unknown name '{identifier}'")))
                }
            }
            Operator::Neg => match node.children() {
                [a] => Ok(Ir::Neg(Box::new(self.num(a)?))),
                _ => Err(self.err("malformed negation")),
            },
            Operator::Add => bin(Ir::Add),
            Operator::Sub => bin(Ir::Sub),
            Operator::Mul => bin(Ir::Mul),
            Operator::Div => bin(Ir::Div),
            Operator::Exp => bin(Ir::Pow),
            Operator::FunctionIdentifier { identifier } => {
                let f = Func::from_name(identifier)
                    .ok_or_else(|| self.err(format!("unknown function '{identifier}'")))?;
                let arg = match node.children() {
                    [a] => self.inner(a)?,
                    _ => return Err(self.err(format!("malformed call to '{identifier}'"))),
                };
                let args: Vec<&Node> = match arg.operator() {
                    Operator::Tuple => arg.children().iter().collect(),
                    _ => vec![arg],
                };
                if args.len() != f.arity() {
                    return Err(self.err(format!("'{identifier}' takes {} argument(s)", f.arity())));
                }
                Ok(Ir::Call(f, args.into_iter().map(|a| self.num(a)).collect::<Result<_, _>>()?))
            }
            op => Err(self.err(format!("operator {op:?} is not allowed in a numeric expression"))),
        }
    }

    fn cond(&self, node: &Node) -> Result<Cond, CliError> {
        let node = self.inner(node)?;
        let cmp = |c: Cmp| -> Result<Cond, CliError> {
            let (a, b) = self.two(node)?;
            Ok(Cond::Cmp(c, self.num(a)?, self.num(b)?))
        };
        match node.operator() {
            Operator::Const { value: Value::Boolean(b) } => Ok(Cond::Const(*b)),
            Operator::Eq => cmp(Cmp::Eq),
            Operator::Neq => cmp(Cmp::Neq),
            Operator::Gt => cmp(Cmp::Gt),
            Operator::Lt => cmp(Cmp::Lt),
            Operator::Geq => cmp(Cmp::Geq),
            Operator::Leq => cmp(Cmp::Leq),
            Operator::And | Operator::Or => {
                let (a, b) = self.two(node)?;
                let (a, b) = (Box::new(self.cond(a)?), Box::new(self.cond(b)?));
                Ok(if matches!(node.operator(), Operator::And) {
                    Cond::And(a, b)
                } else {
                    Cond::Or(a, b)
                })
            }
            Operator::Not => match node.children() {
                [a] => Ok(Cond::Not(Box::new(self.cond(a)?))),
                _ => Err(self.err("malformed negation")),
            },
            op => Err(self.err(format!("operator {op:?} does not give a boolean"))),
        }
    }
}

fn parse_tree(src: &str) -> Result<Node, CliError> {
    evalexpr::build_operator_tree(src).map_err(|e| CliError::Config(format!("cannot parse '{src}': {e}")))
}

fn eval_f64(ir: &Ir, x: &[f64]) -> f64 {
    match ir {
        Ir::Const(c) => *c,
        Ir::Var(i) => x[*i],
        Ir::Neg(a) => -eval_f64(a, x),
        Ir::Add(a, b) => eval_f64(a, x) + eval_f64(b, x),
        Ir::Sub(a, b) => eval_f64(a, x) - eval_f64(b, x),
        Ir::Mul(a, b) => eval_f64(a, x) * eval_f64(b, x),
        Ir::Div(a, b) => eval_f64(a, x) / eval_f64(b, x),
        Ir::Pow(a, b) => eval_f64(a, x).powf(eval_f64(b, x)),
        Ir::Call(f, args) => {
            let a = eval_f64(&args[0], x);
            match f {
                Func::Sin => a.sin(),
                Func::Cos => a.cos(),
                Func::Tan => a.tan(),
                Func::Exp => a.exp(),
                Func::Ln => a.ln(),
                Func::Sqrt => a.sqrt(),
                Func::Abs => a.abs(),
                Func::Atan2 => a.atan2(eval_f64(&args[1], x)),
                Func::Pow => a.powf(eval_f64(&args[1], x)),
            }
        }
    }
}

fn eval_jet(ir: &Ir, x: &[Jet], k: usize) -> Jet {
    match ir {
        Ir::Const(c) => Jet::constant(*c, k),
        Ir::Var(i) => x[*i].clone(),
        Ir::Neg(a) => {
            let a = eval_jet(a, x, k);
            a.zip(&a, |v, _| -v)
        }
        Ir::Add(a, b) => eval_jet(a, x, k).zip(&eval_jet(b, x, k), |p, q| p + q),
        Ir::Sub(a, b) => eval_jet(a, x, k).zip(&eval_jet(b, x, k), |p, q| p - q),
        Ir::Mul(a, b) => eval_jet(a, x, k).mul(&eval_jet(b, x, k)),
        Ir::Div(a, b) => eval_jet(a, x, k).div(&eval_jet(b, x, k)),
        Ir::Pow(a, b) => eval_jet(a, x, k).pow(&eval_jet(b, x, k)),
        Ir::Call(f, args) => {
            let a = eval_jet(&args[0], x, k);
            match f {
                Func::Atan2 => a.atan2(&eval_jet(&args[1], x, k)),
                Func::Pow => a.pow(&eval_jet(&args[1], x, k)),
                f => a.unary(*f),
            }
        }
    }
}

/// A compiled numeric expression.
#[derive(Debug, Clone)]
pub struct Expr {
    source: String,
    ir: Ir,
}

impl Expr {
    pub fn parse(src: &str, scope: &Scope) -> Result<Self, CliError> {
        let tree = parse_tree(src)?;
        let ir = Compiler { scope, src }.num(&tree)?;
        Ok(Self {
            source: src.to_string(),
            ir,
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        eval_f64(&self.ir, x)
    }

    /// Evaluates with jet-valued variables; `k` is their seed count.
    pub fn eval_jet(&self, x: &[Jet], k: usize) -> Jet {
        eval_jet(&self.ir, x, k)
    }

    /// Value, gradient and Hessian at `x`.
    pub fn jet(&self, x: &[f64]) -> Jet {
        self.eval_jet(&Jet::seeds(x), x.len())
    }
}

/// A compiled boolean condition, such as a domain test.
#[derive(Debug, Clone)]
pub struct Condition {
    cond: Cond,
}

impl Condition {
    pub fn parse(src: &str, scope: &Scope) -> Result<Self, CliError> {
        let tree = parse_tree(src)?;
        let cond = Compiler { scope, src }.cond(&tree)?;
        Ok(Self { cond })
    }

    pub fn holds(&self, x: &[f64]) -> bool {
        fn go(c: &Cond, x: &[f64]) -> bool {
            match c {
                Cond::Const(b) => *b,
                Cond::Cmp(op, a, b) => {
                    let (a, b) = (eval_f64(a, x), eval_f64(b, x));
                    match op {
                        Cmp::Eq => a == b,
                        Cmp::Neq => a != b,
                        Cmp::Gt => a > b,
                        Cmp::Lt => a < b,
                        Cmp::Geq => a >= b,
                        Cmp::Leq => a <= b,
                    }
                }
                Cond::And(a, b) => go(a, x) && go(b, x),
                Cond::Or(a, b) => go(a, x) || go(b, x),
                Cond::Not(a) => !go(a, x),
            }
        }
        go(&self.cond, x)
    }
}
