//! TOML case files.
//!
//! Scalars may be numbers or expressions in `x`, `y`, `z`, `t` and the names
//! of the `[parameters]` table. The full schema is documented in
//! `docs/config.md`.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use evalexpr::{
    Context, DefaultNumericTypes, EvalexprError, EvalexprResult, Node, Value,
    build_operator_tree,
};
use evalexpr::error::EvalexprResultValue;
use serde::Deserialize;

use super::waves::ricker;
use super::{CaseSpec, Dynamics, ExactSolution, Expected, MeshSource, Mode, Probe};
use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::material::{CosseratMaterial2D, CosseratMaterial3D, Material};
use crate::mesh::MeshFormat;
use crate::solver::{DampingScheme, SolverConfig, SolverKind};
use crate::system::{
    BodyLoads, BoundaryConditions, BoundaryLoad, Constraint, DampingTrace, Direction, Field, ScalarFn, SurfaceTrace,
    VectorFn,
};

/// A parsed case file: the case and an optional solver override.
pub struct CaseConfig {
    pub spec: CaseSpec,
    pub solver: Option<SolverConfig>,
}

/// Read a case file. Relative mesh paths are resolved against the file's
/// directory.
pub fn load(path: impl AsRef<Path>) -> Result<CaseConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    parse(&text, base)
}

pub fn parse(text: &str, base_dir: &Path) -> Result<CaseConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    raw.build(base_dir)
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum Scalar {
    Number(f64),
    Text(String),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    name: String,
    #[serde(default)]
    description: String,
    #[serde(default)]
    parameters: BTreeMap<String, Scalar>,
    mesh: RawMesh,
    material: RawMaterial,
    #[serde(default)]
    boundary: BTreeMap<String, RawBoundary>,
    #[serde(default)]
    body: RawBody,
    dynamics: Option<RawDynamics>,
    #[serde(default)]
    expected: BTreeMap<String, Scalar>,
    exact: Option<RawExact>,
    #[serde(default)]
    options: RawOptions,
    solver: Option<RawSolver>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMesh {
    kind: String,
    origin: Option<Vec<Scalar>>,
    size: Option<Vec<Scalar>>,
    cells: Option<Vec<usize>>,
    path: Option<PathBuf>,
    format: Option<String>,
    dim: Option<usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMaterial {
    #[serde(alias = "G")]
    shear_modulus: Scalar,
    #[serde(alias = "nu")]
    poisson_ratio: Option<Scalar>,
    lambda: Option<Scalar>,
    #[serde(alias = "K")]
    bulk_modulus: Option<Scalar>,
    #[serde(alias = "a")]
    coupling_ratio: Option<Scalar>,
    #[serde(alias = "Gc")]
    coupling_modulus: Option<Scalar>,
    #[serde(alias = "l")]
    length: Option<Scalar>,
    #[serde(alias = "L")]
    l_modulus: Option<Scalar>,
    #[serde(alias = "M")]
    m_modulus: Option<Scalar>,
    #[serde(alias = "Mc")]
    mc_modulus: Option<Scalar>,
    #[serde(alias = "rho")]
    density: Option<Scalar>,
    #[serde(alias = "I")]
    micro_inertia: Option<Scalar>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawBoundary {
    displacement: Option<Vec<Scalar>>,
    rotation: Option<Vec<Scalar>>,
    #[serde(default)]
    constraints: Vec<RawConstraint>,
    traction: Option<Vec<Scalar>>,
    couple: Option<Vec<Scalar>>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawDirection {
    Named(String),
    Vector(Vec<f64>),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConstraint {
    field: String,
    direction: RawDirection,
    #[serde(default = "zero")]
    value: Scalar,
}

fn zero() -> Scalar {
    Scalar::Number(0.0)
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawBody {
    force: Option<Vec<Scalar>>,
    couple: Option<Vec<Scalar>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDynamics {
    end_time: Scalar,
    dt: Scalar,
    #[serde(default)]
    scheme: Option<String>,
    initial_displacement: Option<Vec<Scalar>>,
    initial_velocity: Option<Vec<Scalar>>,
    #[serde(default)]
    probes: Vec<RawProbe>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProbe {
    name: String,
    point: Vec<Scalar>,
    #[serde(default = "displacement")]
    field: String,
    component: usize,
    #[serde(default)]
    rate: bool,
}

fn displacement() -> String {
    "displacement".into()
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExact {
    displacement: Vec<Scalar>,
    rotation: Vec<Scalar>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawOptions {
    surface_trace: Option<String>,
    damping_trace: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    kind: Option<String>,
    tolerance: Option<f64>,
    max_iterations: Option<usize>,
}

/// Rewrite numeric literals as plain decimals with a fractional part, so
/// that `/` never truncates and exponent notation is accepted.
fn floatify(src: &str) -> String {
    let chars: Vec<char> = src.chars().collect();
    let digit = |i: usize| chars.get(i).is_some_and(char::is_ascii_digit);
    let mut out = String::with_capacity(src.len() + 8);
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let glued = i > 0 && (chars[i - 1].is_alphanumeric() || chars[i - 1] == '_' || chars[i - 1] == '.');
        let starts_number = !glued && (c.is_ascii_digit() || (c == '.' && digit(i + 1)));
        if !starts_number {
            out.push(c);
            i += 1;
            continue;
        }
        let start = i;
        while digit(i) {
            i += 1;
        }
        if chars.get(i) == Some(&'.') {
            i += 1;
            while digit(i) {
                i += 1;
            }
        }
        if matches!(chars.get(i), Some('e' | 'E')) {
            let sign = usize::from(matches!(chars.get(i + 1), Some('+' | '-')));
            if digit(i + 1 + sign) {
                i += 1 + sign;
                while digit(i) {
                    i += 1;
                }
            }
        }
        let literal: String = chars[start..i].iter().collect();
        match literal.parse::<f64>() {
            Ok(v) => {
                let text = v.to_string();
                out.push_str(&text);
                if !text.contains('.') {
                    out.push_str(".0");
                }
            }
            Err(_) => out.push_str(&literal),
        }
    }
    out
}

/// Evaluation context: coordinates, time, parameters and a few functions
/// beyond the `math::` builtins.
struct Scope<'a> {
    vars: [Value; 4],
    params: &'a HashMap<String, Value>,
}

const VARIABLES: [&str; 4] = ["x", "y", "z", "t"];

fn numbers(arg: &Value) -> EvalexprResult<Vec<f64>> {
    match arg {
        Value::Tuple(items) => items.iter().map(Value::as_number).collect(),
        other => Ok(vec![other.as_number()?]),
    }
}

impl Context for Scope<'_> {
    type NumericTypes = DefaultNumericTypes;

    fn get_value(&self, identifier: &str) -> Option<&Value> {
        match VARIABLES.iter().position(|v| *v == identifier) {
            Some(i) => Some(&self.vars[i]),
            None => self.params.get(identifier),
        }
    }

    fn call_function(&self, identifier: &str, argument: &Value) -> EvalexprResultValue {
        let unary: Option<fn(f64) -> f64> = match identifier {
            "sin" => Some(f64::sin),
            "cos" => Some(f64::cos),
            "tan" => Some(f64::tan),
            "exp" => Some(f64::exp),
            "ln" => Some(f64::ln),
            "log10" => Some(f64::log10),
            "sqrt" => Some(f64::sqrt),
            "abs" => Some(f64::abs),
            "sinh" => Some(f64::sinh),
            "cosh" => Some(f64::cosh),
            "tanh" => Some(f64::tanh),
            "step" => Some(|v| if v >= 0.0 { 1.0 } else { 0.0 }),
            _ => None,
        };
        let args = numbers(argument);
        if let Some(f) = unary {
            return match args?.as_slice() {
                [v] => Ok(Value::Float(f(*v))),
                _ => Err(EvalexprError::CustomMessage(format!("{identifier} takes one argument"))),
            };
        }
        if identifier == "ricker" {
            return match args?.as_slice() {
                [fc, t0, t] => Ok(Value::Float(ricker(*fc, *t0, *t))),
                _ => Err(EvalexprError::CustomMessage("ricker(fc, t0, t) takes three arguments".into())),
            };
        }
        Err(EvalexprError::FunctionIdentifierNotFound(identifier.to_string()))
    }

    fn are_builtin_functions_disabled(&self) -> bool {
        false
    }

    fn set_builtin_functions_disabled(&mut self, _disabled: bool) -> EvalexprResult<()> {
        Err(EvalexprError::CustomMessage("builtin functions cannot be disabled".into()))
    }
}

/// A compiled scalar expression.
#[derive(Clone)]
struct Expr {
    source: String,
    node: Arc<Node>,
    params: Arc<HashMap<String, Value>>,
    /// Set when the expression does not depend on `x, y, z, t`.
    constant: Option<f64>,
}

impl Expr {
    fn compile(src: &str, params: &Arc<HashMap<String, Value>>) -> Result<Expr> {
        let node = build_operator_tree::<DefaultNumericTypes>(&floatify(src))
            .map_err(|e| Error::Config(format!("expression '{src}': {e}")))?;
        for id in node.iter_variable_identifiers() {
            if !VARIABLES.contains(&id) && !params.contains_key(id) {
                return Err(Error::Config(format!("expression '{src}': unknown name '{id}'")));
            }
        }
        let varying = node.iter_variable_identifiers().any(|id| VARIABLES.contains(&id));
        let mut e = Expr { source: src.to_string(), node: Arc::new(node), params: params.clone(), constant: None };
        let v = e.try_eval(&Point::zeros(), 0.0)?;
        if !varying {
            e.constant = Some(v);
        }
        Ok(e)
    }

    fn try_eval(&self, x: &Point, t: f64) -> Result<f64> {
        let scope = Scope {
            vars: [Value::Float(x[0]), Value::Float(x[1]), Value::Float(x[2]), Value::Float(t)],
            params: &self.params,
        };
        self.node
            .eval_number_with_context(&scope)
            .map_err(|e| Error::Config(format!("expression '{}': {e}", self.source)))
    }

    fn eval(&self, x: &Point, t: f64) -> f64 {
        self.constant.unwrap_or_else(|| self.try_eval(x, t).unwrap_or(f64::NAN))
    }
}

/// Builds functions and constants from raw scalars.
struct Builder {
    params: Arc<HashMap<String, Value>>,
}

impl Builder {
    /// Resolve parameters that may refer to each other, in any order.
    fn new(raw: &BTreeMap<String, Scalar>) -> Result<Builder> {
        let mut known: HashMap<String, Value> = HashMap::new();
        known.insert("pi".into(), Value::Float(std::f64::consts::PI));
        for (name, _) in raw {
            if VARIABLES.contains(&name.as_str()) || name == "pi" {
                return Err(Error::Config(format!("parameter name '{name}' is reserved")));
            }
        }
        let mut pending: Vec<(&String, &Scalar)> = raw.iter().collect();
        while !pending.is_empty() {
            let before = pending.len();
            let mut last_error = None;
            pending.retain(|(name, value)| {
                let v = match value {
                    Scalar::Number(v) => Ok(*v),
                    Scalar::Text(s) => Expr::compile(s, &Arc::new(known.clone())).and_then(|e| {
                        e.constant.ok_or_else(|| Error::Config(format!("parameter '{name}' depends on x, y, z or t")))
                    }),
                };
                match v {
                    Ok(v) => {
                        known.insert((*name).clone(), Value::Float(v));
                        false
                    }
                    Err(e) => {
                        last_error = Some(e);
                        true
                    }
                }
            });
            if pending.len() == before {
                return Err(last_error.expect("a parameter failed"));
            }
        }
        Ok(Builder { params: Arc::new(known) })
    }

    fn expr(&self, s: &Scalar) -> Result<Expr> {
        match s {
            Scalar::Number(v) => Ok(Expr {
                source: v.to_string(),
                node: Arc::new(build_operator_tree::<DefaultNumericTypes>("0.0").expect("literal")),
                params: self.params.clone(),
                constant: Some(*v),
            }),
            Scalar::Text(src) => Expr::compile(src, &self.params),
        }
    }

    fn number(&self, s: &Scalar, what: &str) -> Result<f64> {
        self.expr(s)?
            .constant
            .ok_or_else(|| Error::Config(format!("{what} must not depend on x, y, z or t")))
    }

    fn opt_number(&self, s: &Option<Scalar>, what: &str) -> Result<Option<f64>> {
        s.as_ref().map(|s| self.number(s, what)).transpose()
    }

    fn numbers<const N: usize>(&self, list: &[Scalar], what: &str) -> Result<[f64; N]> {
        if list.len() != N {
            return Err(Error::Config(format!("{what} needs {N} entries, got {}", list.len())));
        }
        let mut out = [0.0; N];
        for (o, s) in out.iter_mut().zip(list) {
            *o = self.number(s, what)?;
        }
        Ok(out)
    }

    fn scalar_fn(&self, s: &Scalar) -> Result<ScalarFn> {
        let e = self.expr(s)?;
        Ok(Arc::new(move |x: &Point, t| e.eval(x, t)))
    }

    /// Vector field from up to three component expressions; missing
    /// components are zero.
    fn vector_fn(&self, list: &[Scalar], what: &str) -> Result<VectorFn> {
        if list.is_empty() || list.len() > 3 {
            return Err(Error::Config(format!("{what} needs 1 to 3 components")));
        }
        let exprs: Vec<Expr> = list.iter().map(|s| self.expr(s)).collect::<Result<_>>()?;
        Ok(Arc::new(move |x: &Point, t| {
            let mut v = [0.0; 3];
            for (o, e) in v.iter_mut().zip(&exprs) {
                *o = e.eval(x, t);
            }
            v
        }))
    }
}

fn is_free(s: &Scalar) -> bool {
    matches!(s, Scalar::Text(t) if t.trim() == "free")
}

fn parse_field(s: &str) -> Result<Field> {
    match s {
        "displacement" | "u" => Ok(Field::Displacement),
        "rotation" | "phi" => Ok(Field::Rotation),
        _ => Err(Error::Config(format!("unknown field '{s}' (displacement|rotation)"))),
    }
}

fn parse_direction(d: &RawDirection) -> Result<Direction> {
    match d {
        RawDirection::Named(s) => match s.as_str() {
            "x" => Ok(Direction::Axis(0)),
            "y" => Ok(Direction::Axis(1)),
            "z" => Ok(Direction::Axis(2)),
            "normal" => Ok(Direction::Normal),
            _ => Err(Error::Config(format!("unknown direction '{s}' (x|y|z|normal|[vector])"))),
        },
        RawDirection::Vector(v) => {
            let mut p = Point::zeros();
            if v.is_empty() || v.len() > 3 {
                return Err(Error::Config("direction vector needs 1 to 3 entries".into()));
            }
            for (i, c) in v.iter().enumerate() {
                p[i] = *c;
            }
            if p.norm() == 0.0 {
                return Err(Error::Config("direction vector is zero".into()));
            }
            Ok(Direction::Vector(p))
        }
    }
}

impl RawConfig {
    fn build(self, base_dir: &Path) -> Result<CaseConfig> {
        let b = Builder::new(&self.parameters)?;
        let mesh = self.mesh.build(&b, base_dir)?;
        let dim = match (&mesh, self.mesh.dim) {
            (_, Some(d @ (2 | 3))) => d,
            (_, Some(d)) => return Err(Error::Config(format!("dimension {d} is not 2 or 3"))),
            (m, None) => m.dim().ok_or_else(|| Error::Config("file meshes need `dim` in [mesh]".into()))?,
        };
        if mesh.dim().is_some_and(|d| d != dim) {
            return Err(Error::Config("`dim` contradicts the mesh kind".into()));
        }
        let material = self.material.build(&b, dim)?;
        let rot = if dim == 2 { 1 } else { 3 };

        let mut bcs = BoundaryConditions::new();
        if let Some(s) = &self.options.surface_trace {
            bcs.surface_trace = match s.as_str() {
                "facet" => SurfaceTrace::Facet,
                "cell" => SurfaceTrace::Cell,
                _ => return Err(Error::Config(format!("unknown surface trace '{s}' (facet|cell)"))),
            };
        }
        if let Some(s) = &self.options.damping_trace {
            bcs.damping_trace = match s.as_str() {
                "facet" => DampingTrace::Facet,
                "cell" => DampingTrace::Cell,
                _ => return Err(Error::Config(format!("unknown damping trace '{s}' (facet|cell)"))),
            };
        }
        for (tag, raw) in &self.boundary {
            let mut any = false;
            for (list, field, n) in [(&raw.displacement, Field::Displacement, dim), (&raw.rotation, Field::Rotation, rot)] {
                let Some(list) = list else { continue };
                if list.len() != n {
                    return Err(Error::Config(format!("boundary '{tag}': {field:?} needs {n} entries")));
                }
                for (i, s) in list.iter().enumerate() {
                    if !is_free(s) {
                        bcs.constrain(tag, Constraint::new(field, Direction::Axis(i), b.scalar_fn(s)?));
                        any = true;
                    }
                }
            }
            for c in &raw.constraints {
                let field = parse_field(&c.field)?;
                let direction = parse_direction(&c.direction)?;
                if let Direction::Axis(i) = direction {
                    let n = if field == Field::Displacement { dim } else { rot };
                    if i >= n {
                        return Err(Error::Config(format!("boundary '{tag}': axis {i} out of range")));
                    }
                }
                bcs.constrain(tag, Constraint::new(field, direction, b.scalar_fn(&c.value)?));
                any = true;
            }
            let traction = raw.traction.as_deref().map(|l| b.vector_fn(l, "traction")).transpose()?;
            let couple = raw.couple.as_deref().map(|l| b.vector_fn(l, "couple")).transpose()?;
            // Free tags get an empty load entry so that they count as covered.
            if traction.is_some() || couple.is_some() || !any {
                bcs.load(tag, BoundaryLoad { traction, couple });
            }
        }

        let body = BodyLoads {
            force: self.body.force.as_deref().map(|l| b.vector_fn(l, "body force")).transpose()?,
            couple: self.body.couple.as_deref().map(|l| b.vector_fn(l, "body couple")).transpose()?,
        };

        let mode = match &self.dynamics {
            None => Mode::Static,
            Some(d) => Mode::Dynamic(d.build(&b)?),
        };

        let mut expected = Vec::new();
        for (name, s) in &self.expected {
            let e = b.expr(s)?;
            expected.push((
                name.clone(),
                match e.constant {
                    Some(v) => Expected::Constant(v),
                    None => Expected::Field(Arc::new(move |x: &Point, t| e.eval(x, t))),
                },
            ));
        }
        let (sn, mn) = super::component_names(dim);
        if let Some((name, _)) = expected.iter().find(|(n, _)| !sn.contains(n) && !mn.contains(n)) {
            return Err(Error::Config(format!("unknown stress component '{name}'")));
        }

        let exact = self
            .exact
            .as_ref()
            .map(|e| -> Result<ExactSolution> {
                Ok(ExactSolution {
                    displacement: b.vector_fn(&e.displacement, "exact displacement")?,
                    rotation: b.vector_fn(&e.rotation, "exact rotation")?,
                })
            })
            .transpose()?;

        let solver = self
            .solver
            .as_ref()
            .map(|s| -> Result<SolverConfig> {
                let mut cfg = SolverConfig::default();
                if let Some(k) = &s.kind {
                    cfg.kind = SolverKind::from_str(k)?;
                }
                if let Some(t) = s.tolerance {
                    cfg.tolerance = t;
                }
                cfg.max_iterations = s.max_iterations;
                Ok(cfg)
            })
            .transpose()?;

        Ok(CaseConfig {
            spec: CaseSpec {
                name: self.name,
                description: self.description,
                mesh,
                material,
                bcs,
                body,
                mode,
                expected,
                exact,
                strict_tags: true,
            },
            solver,
        })
    }
}

impl RawMesh {
    fn build(&self, b: &Builder, base_dir: &Path) -> Result<MeshSource> {
        let need = |o: &Option<Vec<Scalar>>, what: &str| {
            o.clone().ok_or_else(|| Error::Config(format!("[mesh] {} needs `{what}`", self.kind)))
        };
        let cells = || self.cells.clone().ok_or_else(|| Error::Config(format!("[mesh] {} needs `cells`", self.kind)));
        match self.kind.as_str() {
            "rectangle" => {
                let origin = self.origin.clone().unwrap_or_else(|| vec![Scalar::Number(0.0); 2]);
                let c = cells()?;
                if c.len() != 2 || c.contains(&0) {
                    return Err(Error::Config("rectangle `cells` needs two positive counts".into()));
                }
                let size: [f64; 2] = b.numbers(&need(&self.size, "size")?, "mesh size")?;
                if size.iter().any(|s| !(*s > 0.0)) {
                    return Err(Error::Config("mesh size must be positive".into()));
                }
                Ok(MeshSource::Rectangle { origin: b.numbers(&origin, "mesh origin")?, size, cells: [c[0], c[1]] })
            }
            "box" => {
                let origin = self.origin.clone().unwrap_or_else(|| vec![Scalar::Number(0.0); 3]);
                let c = cells()?;
                if c.len() != 3 || c.contains(&0) {
                    return Err(Error::Config("box `cells` needs three positive counts".into()));
                }
                let size: [f64; 3] = b.numbers(&need(&self.size, "size")?, "mesh size")?;
                if size.iter().any(|s| !(*s > 0.0)) {
                    return Err(Error::Config("mesh size must be positive".into()));
                }
                Ok(MeshSource::Box { origin: b.numbers(&origin, "mesh origin")?, size, cells: [c[0], c[1], c[2]] })
            }
            "file" => {
                let rel = self.path.clone().ok_or_else(|| Error::Config("[mesh] file needs `path`".into()))?;
                let path = if rel.is_absolute() { rel } else { base_dir.join(rel) };
                let format = match self.format.as_deref() {
                    Some("gmsh") | Some("msh") => MeshFormat::GmshMsh,
                    Some("json") => MeshFormat::InternalJson,
                    Some(f) => return Err(Error::Config(format!("unknown mesh format '{f}' (gmsh|json)"))),
                    None => MeshFormat::from_path(&path)
                        .ok_or_else(|| Error::Config(format!("cannot infer mesh format of {}", path.display())))?,
                };
                Ok(MeshSource::File { path, format })
            }
            k => Err(Error::Config(format!("unknown mesh kind '{k}' (rectangle|box|file)"))),
        }
    }
}

impl RawMaterial {
    fn build(&self, b: &Builder, dim: usize) -> Result<Material> {
        let g = b.number(&self.shear_modulus, "shear_modulus")?;
        let density = b.opt_number(&self.density, "density")?;
        let inertia = b.opt_number(&self.micro_inertia, "micro_inertia")?;
        let forbid = |v: &Option<Scalar>, name: &str| match v {
            Some(_) => Err(Error::Config(format!("`{name}` does not apply to {dim}D materials"))),
            None => Ok(()),
        };
        if dim == 2 {
            for (v, n) in [(&self.bulk_modulus, "bulk_modulus"), (&self.l_modulus, "l_modulus"), (&self.m_modulus, "m_modulus"), (&self.mc_modulus, "mc_modulus")] {
                forbid(v, n)?;
            }
            let nu = match (b.opt_number(&self.poisson_ratio, "poisson_ratio")?, b.opt_number(&self.lambda, "lambda")?) {
                (Some(nu), None) => nu,
                (None, Some(l)) => l / (2.0 * (l + g)),
                _ => return Err(Error::Config("give exactly one of poisson_ratio and lambda".into())),
            };
            let a = match (b.opt_number(&self.coupling_ratio, "coupling_ratio")?, b.opt_number(&self.coupling_modulus, "coupling_modulus")?) {
                (Some(a), None) => a,
                (None, Some(gc)) => gc / g,
                _ => return Err(Error::Config("give exactly one of coupling_ratio and coupling_modulus".into())),
            };
            let l = b.opt_number(&self.length, "length")?.ok_or_else(|| Error::Config("2D materials need `length`".into()))?;
            let mut m = CosseratMaterial2D::new(g, nu, a, l)?;
            if density.is_some() || inertia.is_some() {
                m = m.with_inertia(density.unwrap_or(1.0), inertia.unwrap_or(1.0))?;
            }
            Ok(Material::Plane(m))
        } else {
            for (v, n) in [(&self.poisson_ratio, "poisson_ratio"), (&self.coupling_ratio, "coupling_ratio"), (&self.length, "length")] {
                forbid(v, n)?;
            }
            let k = match (b.opt_number(&self.bulk_modulus, "bulk_modulus")?, b.opt_number(&self.lambda, "lambda")?) {
                (Some(k), None) => k,
                (None, Some(l)) => l + 2.0 * g / 3.0,
                _ => return Err(Error::Config("give exactly one of bulk_modulus and lambda".into())),
            };
            let get = |v: &Option<Scalar>, n: &str| -> Result<f64> {
                b.opt_number(v, n)?.ok_or_else(|| Error::Config(format!("3D materials need `{n}`")))
            };
            let mut m = CosseratMaterial3D::new(
                k,
                g,
                get(&self.coupling_modulus, "coupling_modulus")?,
                get(&self.l_modulus, "l_modulus")?,
                get(&self.m_modulus, "m_modulus")?,
                get(&self.mc_modulus, "mc_modulus")?,
            )?;
            if density.is_some() || inertia.is_some() {
                m = m.with_inertia(density.unwrap_or(1.0), inertia.unwrap_or(1.0))?;
            }
            Ok(Material::Solid(m))
        }
    }
}

impl RawDynamics {
    fn build(&self, b: &Builder) -> Result<Dynamics> {
        let scheme = match &self.scheme {
            Some(s) => DampingScheme::from_str(s)?,
            None => DampingScheme::Explicit,
        };
        let mut probes = Vec::new();
        for p in &self.probes {
            if p.point.len() < 2 || p.point.len() > 3 {
                return Err(Error::Config(format!("probe '{}' needs a 2D or 3D point", p.name)));
            }
            let mut x = Point::zeros();
            for (i, s) in p.point.iter().enumerate() {
                x[i] = b.number(s, "probe point")?;
            }
            probes.push(Probe { name: p.name.clone(), point: x, field: parse_field(&p.field)?, component: p.component, rate: p.rate });
        }
        Ok(Dynamics {
            end_time: b.number(&self.end_time, "end_time")?,
            dt: b.number(&self.dt, "dt")?,
            scheme,
            initial_displacement: self.initial_displacement.as_deref().map(|l| b.vector_fn(l, "initial displacement")).transpose()?,
            initial_velocity: self.initial_velocity.as_deref().map(|l| b.vector_fn(l, "initial velocity")).transpose()?,
            probes,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const PATCH: &str = r#"
name = "patch1_cfg"

[parameters]
G = 1000
l = 0.1

[mesh]
kind = "rectangle"
origin = [-0.12, 0]
size = [0.24, 0.12]
cells = [10, 5]

[material]
shear_modulus = "G"
poisson_ratio = 0.25
coupling_ratio = 0.5
length = "l"

[boundary.left]
displacement = ["(x + y/2)/G", "(x + y)/G"]
rotation = ["1/(4*G)"]
[boundary.right]
displacement = ["(x + y/2)/G", "(x + y)/G"]
rotation = ["1/(4*G)"]
[boundary.bottom]
displacement = ["(x + y/2)/G", "(x + y)/G"]
rotation = ["1/(4*G)"]
[boundary.top]
displacement = ["(x + y/2)/G", "(x + y)/G"]
rotation = ["1/(4*G)"]

[expected]
sxx = 4
syy = 4
sxy = "3/2"
syx = 1.5
"#;

    fn eval(src: &str) -> f64 {
        let b = Builder::new(&BTreeMap::new()).unwrap();
        b.expr(&Scalar::Text(src.into())).unwrap().eval(&Point::new(0.5, 2.0, 0.0), 3.0)
    }

    #[test]
    fn integer_division_is_real() {
        assert_eq!(eval("1/4"), 0.25);
        assert_eq!(eval("3/2*2"), 3.0);
        assert_eq!(eval("1e3/8"), 125.0);
        assert_eq!(eval("2.5/5"), 0.5);
    }

    #[test]
    fn floatify_leaves_identifiers_alone() {
        assert_eq!(floatify("x2 + 2*x_1 - 10/3"), "x2 + 2.0*x_1 - 10.0/3.0");
        assert_eq!(floatify("1.5e-3 + 7"), "0.0015 + 7.0");
        assert_eq!(floatify(".5*2E2 - x1e3"), "0.5*200.0 - x1e3");
    }

    #[test]
    fn variables_and_functions() {
        assert_eq!(eval("x + y + t"), 5.5);
        assert!((eval("sin(pi/2) + math::sqrt(4)") - 3.0).abs() < 1e-15);
        assert_eq!(eval("step(x - 1)"), 0.0);
        assert_eq!(eval("ricker(10, t, t)"), 1.0);
        assert_eq!(eval("2^3"), 8.0);
    }

    #[test]
    fn parameters_resolve_in_any_order() {
        let mut raw = BTreeMap::new();
        raw.insert("a".to_string(), Scalar::Text("b * 2".into()));
        raw.insert("b".to_string(), Scalar::Text("c + 1".into()));
        raw.insert("c".to_string(), Scalar::Number(1.0));
        let b = Builder::new(&raw).unwrap();
        assert_eq!(b.number(&Scalar::Text("a".into()), "a").unwrap(), 4.0);
    }

    #[test]
    fn cyclic_or_unknown_parameters_fail() {
        let mut raw = BTreeMap::new();
        raw.insert("a".to_string(), Scalar::Text("b".into()));
        raw.insert("b".to_string(), Scalar::Text("a".into()));
        assert!(Builder::new(&raw).is_err());
        let b = Builder::new(&BTreeMap::new()).unwrap();
        assert!(b.expr(&Scalar::Text("q + 1".into())).is_err());
        let mut raw = BTreeMap::new();
        raw.insert("x".to_string(), Scalar::Number(1.0));
        assert!(Builder::new(&raw).is_err());
    }

    #[test]
    fn patch_config_builds_and_runs() {
        let cfg = parse(PATCH, Path::new(".")).unwrap();
        assert!(cfg.solver.is_none());
        let spec = &cfg.spec;
        assert_eq!(spec.bcs.constraints.len(), 4);
        assert_eq!(spec.bcs.constraints["left"].len(), 3);
        let out = super::super::run_case(spec, &Default::default()).unwrap();
        for name in ["sxx", "syy", "sxy", "syx"] {
            let c = out.report.component(name).unwrap();
            assert!(c.max_relative_error.unwrap() < 1e-8, "{name}: {c:?}");
        }
    }

    #[test]
    fn uncovered_tag_is_an_error() {
        let text = PATCH.replace("[boundary.top]", "[boundary.elsewhere]");
        let cfg = parse(&text, Path::new(".")).unwrap();
        let err = super::super::run_case(&cfg.spec, &Default::default()).err().unwrap();
        assert!(err.to_string().contains("top"), "{err}");
    }

    #[test]
    fn free_components_and_constraint_lists() {
        let text = r#"
name = "c"
[mesh]
kind = "rectangle"
size = [1, 1]
cells = [2, 2]
[material]
shear_modulus = 1
poisson_ratio = 0
coupling_modulus = 0.5
length = 0.1
[boundary.left]
displacement = [0, "free"]
rotation = ["free"]
[boundary.right]
constraints = [{ field = "displacement", direction = "normal" }, { field = "rotation", direction = [1], value = "y" }]
traction = [0, "-1"]
[boundary.top]
[boundary.bottom]
[solver]
kind = "krylov"
tolerance = 1e-12
"#;
        let cfg = parse(text, Path::new(".")).unwrap();
        let bcs = &cfg.spec.bcs;
        assert_eq!(bcs.constraints["left"].len(), 1);
        assert_eq!(bcs.constraints["right"].len(), 2);
        assert!(bcs.loads.contains_key("top") && bcs.loads.contains_key("right") && !bcs.loads.contains_key("left"));
        let s = cfg.solver.unwrap();
        assert_eq!(s.kind, SolverKind::Iterative);
        assert_eq!(s.tolerance, 1e-12);
        match &cfg.spec.material {
            Material::Plane(m) => assert_eq!(m.coupling_ratio, 0.5),
            _ => panic!("expected a plane material"),
        }
    }

    #[test]
    fn schema_errors_are_reported() {
        let bad_key = PATCH.replace("poisson_ratio = 0.25", "poisson = 0.25");
        assert!(parse(&bad_key, Path::new(".")).is_err());
        let both = PATCH.replace("poisson_ratio = 0.25", "poisson_ratio = 0.25\nlambda = 1");
        assert!(parse(&both, Path::new(".")).is_err());
        let comp = PATCH.replace("sxx = 4", "szz = 4");
        assert!(parse(&comp, Path::new(".")).is_err());
        let kind = PATCH.replace("kind = \"rectangle\"", "kind = \"disc\"");
        assert!(parse(&kind, Path::new(".")).is_err());
        let varying = PATCH.replace("poisson_ratio = 0.25", "poisson_ratio = \"x\"");
        assert!(parse(&varying, Path::new(".")).is_err());
    }

    #[test]
    fn box_dynamics_with_probes() {
        let text = r#"
name = "bar"
[mesh]
kind = "box"
size = [1, 0.2, 0.2]
cells = [4, 1, 1]
[material]
lambda = 1
G = 1
Gc = 0.5
L = 0.01
M = 0.01
Mc = 0.01
rho = 2
I = 0.1
[boundary.left]
displacement = [0, 0, 0]
rotation = [0, 0, 0]
[boundary.right]
traction = ["step(1e-3 - t)", 0, 0]
[boundary.top]
[boundary.bottom]
[boundary.front]
[boundary.back]
[dynamics]
end_time = 0.01
dt = 0.005
scheme = "trapezoidal"
probes = [{ name = "tip", point = [0.95, 0.1, 0.1], component = 0, rate = true }]
"#;
        let cfg = parse(text, Path::new(".")).unwrap();
        let Mode::Dynamic(d) = &cfg.spec.mode else { panic!("expected dynamics") };
        assert_eq!(d.scheme, DampingScheme::Trapezoidal);
        assert_eq!(d.probes[0].field, Field::Displacement);
        assert!(d.probes[0].rate);
        match &cfg.spec.material {
            Material::Solid(m) => {
                assert!((m.bulk_modulus - (1.0 + 2.0 / 3.0)).abs() < 1e-15);
                assert_eq!(m.density, 2.0);
            }
            _ => panic!("expected a solid material"),
        }
        let out = super::super::run_case(&cfg.spec, &Default::default()).unwrap();
        assert_eq!(out.trajectory.unwrap().times.len(), 3);
    }
}
