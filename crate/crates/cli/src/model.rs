//! Model files: TOML schema, validation and the checked [`ModelSpec`].

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64 as C64;
use serde::Deserialize;

use openq_core::odeint::{IntegratorOptions, Method};
use openq_core::{Coefficient, Dims, Qobj};
use openq_solvers::heom::BosonicEnvironment;
use openq_solvers::{MapKind, SteadyMethod};

use crate::expr::{eval, Env, Value};
use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolverKind {
    Sesolve,
    Mesolve,
    Brmesolve,
    Steadystate,
    Mcsolve,
    NmMcsolve,
    Smesolve,
    Heomsolve,
    Fsesolve,
}

impl SolverKind {
    pub const ALL: [SolverKind; 9] = [
        SolverKind::Sesolve,
        SolverKind::Mesolve,
        SolverKind::Brmesolve,
        SolverKind::Steadystate,
        SolverKind::Mcsolve,
        SolverKind::NmMcsolve,
        SolverKind::Smesolve,
        SolverKind::Heomsolve,
        SolverKind::Fsesolve,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Sesolve => "sesolve",
            SolverKind::Mesolve => "mesolve",
            SolverKind::Brmesolve => "brmesolve",
            SolverKind::Steadystate => "steadystate",
            SolverKind::Mcsolve => "mcsolve",
            SolverKind::NmMcsolve => "nm_mcsolve",
            SolverKind::Smesolve => "smesolve",
            SolverKind::Heomsolve => "heomsolve",
            SolverKind::Fsesolve => "fsesolve",
        }
    }

    pub fn is_trajectory(self) -> bool {
        matches!(self, SolverKind::Mcsolve | SolverKind::NmMcsolve | SolverKind::Smesolve)
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SolverKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        SolverKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown solver '{s}'"))
    }
}

/// A number, or an expression over the model parameters.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum Num {
    Value(f64),
    Expr(String),
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CoeffFile {
    Const { value: Num },
    /// `amp · sin(freq·t + phase)`
    Sin { amp: Option<Num>, freq: Num, phase: Option<Num> },
    /// `amp · cos(freq·t + phase)`
    Cos { amp: Option<Num>, freq: Num, phase: Option<Num> },
    /// `amp · exp(rate·t)`
    Exp { amp: Option<Num>, rate: Num },
    /// `amp · exp(−(t − t0)² / (2σ²))`
    Gauss { amp: Option<Num>, t0: Num, sigma: Num },
    /// Cubic spline through the samples.
    Samples { times: Vec<f64>, values: Vec<f64> },
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermFile {
    pub op: String,
    pub coeff: Option<CoeffFile>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TlistFile {
    pub start: f64,
    pub stop: f64,
    pub num: usize,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EopFile {
    pub label: String,
    pub op: String,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BathFile {
    pub coupling: String,
    pub kind: String,
    pub temperature: Option<Num>,
    pub lambda: Option<Num>,
    pub gamma: Option<Num>,
    pub w0: Option<Num>,
    pub alpha: Option<Num>,
    pub wc: Option<Num>,
    pub s: Option<Num>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptionsFile {
    pub ntraj: Option<usize>,
    pub seed: Option<u64>,
    pub map: Option<String>,
    pub improved_sampling: Option<bool>,
    pub sec_cutoff: Option<f64>,
    pub n_c: Option<usize>,
    pub n_k: Option<usize>,
    pub atol: Option<f64>,
    pub rtol: Option<f64>,
    pub nsteps: Option<usize>,
    pub max_step: Option<f64>,
    pub method: Option<String>,
    pub steady_method: Option<String>,
    pub dt_sub: Option<f64>,
    pub period: Option<Num>,
    pub n_t: Option<usize>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub dims: Vec<usize>,
    pub solver: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    #[serde(default)]
    pub hamiltonian: Vec<TermFile>,
    #[serde(default)]
    pub c_ops: Vec<TermFile>,
    #[serde(default)]
    pub sc_ops: Vec<TermFile>,
    pub initial_state: Option<String>,
    pub tlist: Option<TlistFile>,
    #[serde(default)]
    pub e_ops: Vec<EopFile>,
    #[serde(default)]
    pub baths: Vec<BathFile>,
    #[serde(default)]
    pub options: OptionsFile,
}

#[derive(Clone, Debug)]
pub enum BathSpec {
    /// `S(ω) = γ θ(ω)`
    Flat { gamma: f64 },
    Env(BosonicEnvironment),
}

#[derive(Clone, Debug)]
pub struct ModelSpec {
    pub dims: Vec<usize>,
    pub solver: SolverKind,
    pub hamiltonian: Vec<(Qobj, Option<Coefficient>)>,
    pub c_ops: Vec<(Qobj, Option<Coefficient>)>,
    pub sc_ops: Vec<Qobj>,
    pub initial_state: Option<Qobj>,
    pub tlist: Vec<f64>,
    pub e_ops: Vec<(String, Qobj)>,
    pub baths: Vec<(Qobj, BathSpec)>,
    pub ntraj: Option<usize>,
    pub seed: Option<u64>,
    pub map: MapKind,
    pub improved_sampling: bool,
    pub sec_cutoff: f64,
    pub n_c: usize,
    pub n_k: usize,
    pub integrator: IntegratorOptions,
    pub steady_method: SteadyMethod,
    pub dt_sub: Option<f64>,
    pub period: Option<f64>,
    pub n_t: usize,
}

fn invalid(path: impl fmt::Display, msg: impl fmt::Display) -> CliError {
    CliError::Validation(format!("{path}: {msg}"))
}

struct Ctx<'a> {
    env: Env<'a>,
    oper: Dims,
}

impl Ctx<'_> {
    fn num(&self, path: &str, n: &Num) -> Result<f64, CliError> {
        match n {
            Num::Value(v) => Ok(*v),
            Num::Expr(s) => eval(s, &self.env).and_then(|v| v.real()).map_err(|e| invalid(path, e)),
        }
    }

    fn opt_num(&self, path: &str, n: &Option<Num>, default: f64) -> Result<f64, CliError> {
        n.as_ref().map_or(Ok(default), |n| self.num(path, n))
    }

    fn req_num(&self, path: &str, n: &Option<Num>) -> Result<f64, CliError> {
        let n = n.as_ref().ok_or_else(|| invalid(path, "missing"))?;
        self.num(path, n)
    }

    fn operator(&self, path: &str, src: &str) -> Result<Qobj, CliError> {
        let q = eval(src, &self.env).and_then(Value::qobj).map_err(|e| invalid(path, e))?;
        if q.dims() != &self.oper {
            return Err(invalid(path, format!("dims {} do not match the model dims {}", q.dims(), self.oper)));
        }
        Ok(q)
    }

    fn coefficient(&self, path: &str, c: &CoeffFile) -> Result<Coefficient, CliError> {
        let p = |name: &str| format!("{path}.{name}");
        Ok(match c {
            CoeffFile::Const { value } => Coefficient::constant(C64::new(self.num(&p("value"), value)?, 0.0)),
            CoeffFile::Sin { amp, freq, phase } | CoeffFile::Cos { amp, freq, phase } => {
                let a = self.opt_num(&p("amp"), amp, 1.0)?;
                let w = self.num(&p("freq"), freq)?;
                let ph = self.opt_num(&p("phase"), phase, 0.0)?;
                if matches!(c, CoeffFile::Sin { .. }) {
                    Coefficient::real_fn(move |t| a * (w * t + ph).sin())
                } else {
                    Coefficient::real_fn(move |t| a * (w * t + ph).cos())
                }
            }
            CoeffFile::Exp { amp, rate } => {
                let a = self.opt_num(&p("amp"), amp, 1.0)?;
                let r = self.num(&p("rate"), rate)?;
                Coefficient::real_fn(move |t| a * (r * t).exp())
            }
            CoeffFile::Gauss { amp, t0, sigma } => {
                let a = self.opt_num(&p("amp"), amp, 1.0)?;
                let t0 = self.num(&p("t0"), t0)?;
                let s = self.num(&p("sigma"), sigma)?;
                if !(s > 0.0) {
                    return Err(invalid(p("sigma"), "must be positive"));
                }
                Coefficient::real_fn(move |t| a * (-(t - t0).powi(2) / (2.0 * s * s)).exp())
            }
            CoeffFile::Samples { times, values } => {
                let v: Vec<C64> = values.iter().map(|&x| C64::new(x, 0.0)).collect();
                Coefficient::spline(times, &v).map_err(|e| invalid(path, e))?
            }
        })
    }

    fn terms(&self, path: &str, terms: &[TermFile]) -> Result<Vec<(Qobj, Option<Coefficient>)>, CliError> {
        terms
            .iter()
            .enumerate()
            .map(|(k, t)| {
                let op = self.operator(&format!("{path}[{k}].op"), &t.op)?;
                let c = t.coeff.as_ref().map(|c| self.coefficient(&format!("{path}[{k}].coeff"), c)).transpose()?;
                Ok((op, c))
            })
            .collect()
    }

    fn bath(&self, path: &str, b: &BathFile) -> Result<(Qobj, BathSpec), CliError> {
        let q = self.operator(&format!("{path}.coupling"), &b.coupling)?;
        let f = |name: &str| format!("{path}.{name}");
        let temp = self.opt_num(&f("temperature"), &b.temperature, 0.0)?;
        let env = |r: openq_core::Result<BosonicEnvironment>| r.map(BathSpec::Env).map_err(|e| invalid(path, e));
        let spec = match b.kind.as_str() {
            "flat" => BathSpec::Flat {
                gamma: self.req_num(&f("gamma"), &b.gamma)?,
            },
            "drude_lorentz" => env(BosonicEnvironment::drude_lorentz(
                temp,
                self.req_num(&f("lambda"), &b.lambda)?,
                self.req_num(&f("gamma"), &b.gamma)?,
            ))?,
            "underdamped" => env(BosonicEnvironment::underdamped(
                temp,
                self.req_num(&f("lambda"), &b.lambda)?,
                self.req_num(&f("gamma"), &b.gamma)?,
                self.req_num(&f("w0"), &b.w0)?,
            ))?,
            "ohmic" => env(BosonicEnvironment::ohmic(
                temp,
                self.req_num(&f("alpha"), &b.alpha)?,
                self.req_num(&f("wc"), &b.wc)?,
                self.opt_num(&f("s"), &b.s, 1.0)?,
            ))?,
            other => return Err(invalid(f("kind"), format!("unknown bath kind '{other}'"))),
        };
        Ok((q, spec))
    }
}

pub fn parse_model(text: &str) -> Result<ModelSpec, CliError> {
    let file: ModelFile = toml::from_str(text).map_err(|e| CliError::Validation(format!("syntax: {e}")))?;
    validate(file, None)
}

/// Checks every expression against the model dims and builds the operators.
/// `solver` overrides the file's solver field.
pub fn validate(file: ModelFile, solver: Option<SolverKind>) -> Result<ModelSpec, CliError> {
    if file.dims.is_empty() || file.dims.contains(&0) {
        return Err(invalid("dims", "must be a non-empty list of positive integers"));
    }
    let solver = match solver {
        Some(s) => s,
        None => file.solver.parse().map_err(|e| invalid("solver", e))?,
    };
    for name in file.params.keys() {
        if matches!(name.as_str(), "pi" | "im") {
            return Err(invalid(format!("params.{name}"), "shadows a built-in constant"));
        }
    }
    let ctx = Ctx {
        env: Env { params: &file.params },
        oper: Dims::oper(&file.dims),
    };
    let hamiltonian = ctx.terms("hamiltonian", &file.hamiltonian)?;
    let c_ops = ctx.terms("c_ops", &file.c_ops)?;
    let sc_ops = ctx
        .terms("sc_ops", &file.sc_ops)?
        .into_iter()
        .enumerate()
        .map(|(k, (q, c))| match c {
            None => Ok(q),
            Some(_) => Err(invalid(format!("sc_ops[{k}].coeff"), "stochastic operators are time-independent")),
        })
        .collect::<Result<Vec<_>, _>>()?;
    let e_ops = file
        .e_ops
        .iter()
        .enumerate()
        .map(|(k, e)| {
            if e.label.is_empty() || e.label.contains([',', '"', '\n']) {
                return Err(invalid(format!("e_ops[{k}].label"), "must be non-empty without commas or quotes"));
            }
            Ok((e.label.clone(), ctx.operator(&format!("e_ops[{k}].op"), &e.op)?))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let baths = file
        .baths
        .iter()
        .enumerate()
        .map(|(k, b)| ctx.bath(&format!("baths[{k}]"), b))
        .collect::<Result<Vec<_>, _>>()?;
    let initial_state = match &file.initial_state {
        None => None,
        Some(src) => {
            let q = eval(src, &ctx.env).and_then(Value::qobj).map_err(|e| invalid("initial_state", e))?;
            let ok = if q.is_ket() {
                q.dims() == &Dims::ket(&file.dims)
            } else {
                q.dims() == &ctx.oper
            };
            if !ok {
                return Err(invalid("initial_state", format!("dims {} do not match the model dims {:?}", q.dims(), file.dims)));
            }
            Some(q)
        }
    };
    let tlist = match &file.tlist {
        None => Vec::new(),
        Some(t) => {
            if t.num < 2 {
                return Err(invalid("tlist.num", "must be at least 2"));
            }
            if !(t.start.is_finite() && t.stop.is_finite() && t.stop > t.start) {
                return Err(invalid("tlist", "stop must be after start"));
            }
            let h = (t.stop - t.start) / (t.num - 1) as f64;
            (0..t.num)
                .map(|k| if k + 1 == t.num { t.stop } else { t.start + h * k as f64 })
                .collect()
        }
    };
    let o = &file.options;
    let mut integrator = IntegratorOptions::default();
    if let Some(v) = o.atol {
        integrator.atol = v;
    }
    if let Some(v) = o.rtol {
        integrator.rtol = v;
    }
    if let Some(v) = o.nsteps {
        integrator.nsteps = v;
    }
    integrator.max_step = o.max_step;
    integrator.method = match o.method.as_deref() {
        None | Some("rk45") => Method::Rk45,
        Some("diag") => Method::DiagExpm,
        Some(m) => return Err(invalid("options.method", format!("unknown integration method '{m}'"))),
    };
    integrator.validate().map_err(|e| invalid("options", e))?;
    let map = match o.map.as_deref() {
        None | Some("parallel") => MapKind::Parallel,
        Some("serial") => MapKind::Serial,
        Some(m) => return Err(invalid("options.map", format!("unknown map '{m}'"))),
    };
    let steady_method = match o.steady_method.as_deref() {
        None | Some("direct") => SteadyMethod::Direct,
        Some("power") => SteadyMethod::Power,
        Some("svd") => SteadyMethod::Svd,
        Some(m) => return Err(invalid("options.steady_method", format!("unknown method '{m}'"))),
    };
    let period = o.period.as_ref().map(|p| ctx.num("options.period", p)).transpose()?;
    let spec = ModelSpec {
        dims: file.dims.clone(),
        solver,
        hamiltonian,
        c_ops,
        sc_ops,
        initial_state,
        tlist,
        e_ops,
        baths,
        ntraj: o.ntraj,
        seed: o.seed,
        map,
        improved_sampling: o.improved_sampling.unwrap_or(false),
        sec_cutoff: o.sec_cutoff.unwrap_or(0.1),
        n_c: o.n_c.unwrap_or(2),
        n_k: o.n_k.unwrap_or(2),
        integrator,
        steady_method,
        dt_sub: o.dt_sub,
        period,
        n_t: o.n_t.unwrap_or(100),
    };
    check_solver_needs(&spec)?;
    Ok(spec)
}

fn check_solver_needs(m: &ModelSpec) -> Result<(), CliError> {
    use SolverKind::*;
    if m.hamiltonian.is_empty() {
        return Err(invalid("hamiltonian", "at least one term is required"));
    }
    if m.solver != Steadystate {
        if m.tlist.is_empty() {
            return Err(invalid("tlist", format!("required by {}", m.solver)));
        }
        if m.initial_state.is_none() {
            return Err(invalid("initial_state", format!("required by {}", m.solver)));
        }
    }
    let static_h = m.hamiltonian.iter().all(|(_, c)| c.is_none());
    match m.solver {
        Sesolve | Fsesolve if !m.c_ops.is_empty() => Err(invalid("c_ops", format!("{} takes no collapse operators", m.solver))),
        Sesolve | Fsesolve | Mcsolve if m.initial_state.as_ref().is_some_and(|s| !s.is_ket()) => {
            Err(invalid("initial_state", format!("{} needs a ket", m.solver)))
        }
        Fsesolve if m.period.is_none() => Err(invalid("options.period", "required by fsesolve")),
        Steadystate if !static_h || m.c_ops.iter().any(|(_, c)| c.is_some()) => {
            Err(invalid("hamiltonian", "steadystate needs time-independent operators"))
        }
        Brmesolve | Heomsolve if !static_h => Err(invalid("hamiltonian", format!("{} needs a time-independent Hamiltonian", m.solver))),
        Brmesolve | Heomsolve if m.baths.is_empty() => Err(invalid("baths", format!("required by {}", m.solver))),
        Heomsolve if m.baths.iter().any(|(_, b)| matches!(b, BathSpec::Flat { .. })) => {
            Err(invalid("baths", "heomsolve needs a drude_lorentz or underdamped bath"))
        }
        Brmesolve | Heomsolve if !m.c_ops.is_empty() => {
            Err(invalid("c_ops", format!("{} takes its dissipation from baths, not c_ops", m.solver)))
        }
        NmMcsolve if m.c_ops.is_empty() => Err(invalid("c_ops", "nm_mcsolve needs at least one (operator, rate) pair")),
        Smesolve if m.sc_ops.is_empty() => Err(invalid("sc_ops", "smesolve needs at least one monitored operator")),
        _ => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DECAY: &str = r#"
dims = [2]
solver = "mesolve"
initial_state = "basis(2, 0)"
params = { eps = 1.0, gamma = 0.2 }
hamiltonian = [{ op = "0.5*eps*sigmaz" }]
c_ops = [{ op = "sqrt(gamma)*sigmam" }]
e_ops = [{ label = "sz", op = "sigmaz" }]
tlist = { start = 0.0, stop = 5.0, num = 11 }
"#;

    #[test]
    fn minimal_decay_model() {
        let m = parse_model(DECAY).unwrap();
        assert_eq!(m.solver, SolverKind::Mesolve);
        assert_eq!(m.tlist.len(), 11);
        assert_eq!(m.tlist[10], 5.0);
        assert_eq!(m.c_ops.len(), 1);
    }

    #[test]
    fn unknown_solver_names_the_field() {
        let text = DECAY.replace("\"mesolve\"", "\"floquetx\"");
        let e = parse_model(&text).unwrap_err().to_string();
        assert!(e.contains("solver") && e.contains("unknown solver"), "{e}");
    }

    #[test]
    fn tensor_dims() {
        let text = DECAY
            .replace("dims = [2]", "dims = [2, 2]")
            .replace("basis(2, 0)", "tensor(basis(2, 0), basis(2, 1))")
            .replace("0.5*eps*sigmaz", "tensor(sigmaz, identity(2))")
            .replace("sqrt(gamma)*sigmam", "tensor(sigmam, identity(2))")
            .replace("op = \"sigmaz\"", "op = \"tensor(identity(2), sigmaz)\"");
        let m = parse_model(&text).unwrap();
        assert_eq!(m.hamiltonian[0].0.dims(), &Dims::oper(&[2, 2]));
    }

    #[test]
    fn dims_mismatch_names_the_path() {
        let text = DECAY.replace("op = \"sigmaz\"", "op = \"destroy(3)\"");
        let e = parse_model(&text).unwrap_err().to_string();
        assert!(e.contains("e_ops[0].op"), "{e}");
    }

    #[test]
    fn unknown_factory_and_syntax() {
        let e = parse_model(&DECAY.replace("sigmam", "sigmaq")).unwrap_err().to_string();
        assert!(e.contains("c_ops[0].op"), "{e}");
        assert!(parse_model("dims = [2").unwrap_err().to_string().contains("syntax"));
        let e = parse_model(&DECAY.replace("num = 11", "num = 1")).unwrap_err().to_string();
        assert!(e.contains("tlist.num"), "{e}");
    }
}
